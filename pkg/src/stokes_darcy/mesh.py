"""Structured two-subdomain triangulations.

The fluid and porous rectangles are stacked vertically and share one full
horizontal edge (the interface). Every square cell of the grid is split by
its bottom-left to top-right diagonal, so meshes are nested under n -> 2n.
"""
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

FLUID = 0
POROUS = 1


class Tag(IntEnum):
    INTERIOR = 0
    GAMMA_F = 1  # fluid boundary away from the interface
    GAMMA_PD = 2  # porous boundary carrying pressure data
    GAMMA_P = 3  # remaining porous boundary (normal flux data)
    INTERFACE = 4


SIDES = ("bottom", "top", "left", "right")


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    """Two axis-aligned rectangles, each given as ((x0, x1), (y0, y1))."""

    fluid_rect: tuple = ((0.0, 1.0), (0.0, 1.0))
    porous_rect: tuple = ((0.0, 1.0), (1.0, 2.0))
    dirichlet_porous_side: str = "top"

    def __post_init__(self):
        fr = tuple(tuple(float(v) for v in r) for r in self.fluid_rect)
        pr = tuple(tuple(float(v) for v in r) for r in self.porous_rect)
        object.__setattr__(self, "fluid_rect", fr)
        object.__setattr__(self, "porous_rect", pr)
        for name, r in (("fluid_rect", fr), ("porous_rect", pr)):
            if not (r[0][1] > r[0][0] and r[1][1] > r[1][0]):
                raise MeshError(f"{name} has empty extent: {r}")
        if self.dirichlet_porous_side not in SIDES:
            raise MeshError(f"dirichlet_porous_side must be one of {SIDES}, got {self.dirichlet_porous_side!r}")
        if fr[0] != pr[0]:
            raise MeshError("rectangles must share a full horizontal edge (x-ranges differ)")
        if fr[1][1] == pr[1][0]:
            below = "fluid"
        elif pr[1][1] == fr[1][0]:
            below = "porous"
        else:
            raise MeshError("fluid and porous rectangles are not adjacent")
        iface_side = "bottom" if below == "fluid" else "top"
        if self.dirichlet_porous_side == iface_side:
            raise MeshError("the pressure-data side cannot coincide with the interface")
        object.__setattr__(self, "_fluid_below", below == "fluid")

    @property
    def fluid_below(self):
        return self._fluid_below

    @property
    def interface_y(self):
        return self.fluid_rect[1][1] if self.fluid_below else self.fluid_rect[1][0]

    @property
    def interface_normal(self):
        """Unit normal on the interface pointing from the fluid into the porous region."""
        return np.array([0.0, 1.0]) if self.fluid_below else np.array([0.0, -1.0])

    def area(self, region):
        (x0, x1), (y0, y1) = self.fluid_rect if region == FLUID else self.porous_rect
        return (x1 - x0) * (y1 - y0)


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), counter-clockwise
    triangle_region: np.ndarray  # (nt,) FLUID / POROUS
    edges: np.ndarray  # (ne, 2), lower vertex index first
    edge_triangles: np.ndarray  # (ne, 2), -1 where absent
    tri_edges: np.ndarray  # (nt, 3) global edge of local edge i (opposite vertex i)
    tri_edge_signs: np.ndarray  # (nt, 3) +1 if the global edge normal points out of the triangle
    boundary_tag: np.ndarray  # (ne,) Tag values
    interface_edges: np.ndarray  # ordered by position along the interface
    interface_normal: np.ndarray  # n_f, (2,)
    h: float
    n: int
    spec: DomainSpec = field(repr=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    def triangle_coords(self, which=None):
        tris = self.triangles if which is None else self.triangles[which]
        return self.vertices[tris]

    def areas(self, which=None):
        c = self.triangle_coords(which)
        e1 = c[:, 1] - c[:, 0]
        e2 = c[:, 2] - c[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edge_lengths(self, which=None):
        e = self.edges if which is None else self.edges[which]
        d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def edge_normals(self, which=None):
        """Global edge normals: tangent lower->higher vertex rotated clockwise."""
        e = self.edges if which is None else self.edges[which]
        d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        length = np.hypot(d[:, 0], d[:, 1])
        return np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]

    def region_triangles(self, region):
        return np.flatnonzero(self.triangle_region == region)

    def edges_with_tag(self, tag):
        return np.flatnonzero(self.boundary_tag == tag)

    def interface_cells(self):
        """(fluid triangle, porous triangle) for each interface edge, in order."""
        et = self.edge_triangles[self.interface_edges]
        fluid_first = self.triangle_region[et[:, 0]] == FLUID
        f = np.where(fluid_first, et[:, 0], et[:, 1])
        p = np.where(fluid_first, et[:, 1], et[:, 0])
        return f, p


def _cells(extent, n, what):
    c = extent * n
    k = int(round(c))
    if abs(c - k) > 1e-9 or k < 1:
        raise MeshError(f"{what} extent {extent} is not a positive multiple of 1/{n}")
    return k


def _build_edges(triangles):
    nt = len(triangles)
    local = np.array([[1, 2], [2, 0], [0, 1]])
    pairs = triangles[:, local].reshape(-1, 2)
    pairs = np.sort(pairs, axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    tri_edges = inverse.reshape(nt, 3)
    counts = np.bincount(inverse, minlength=len(edges))
    if counts.max() > 2:
        bad = int(np.argmax(counts))
        raise MeshError(f"edge {edges[bad].tolist()} shared by more than two triangles")
    owner = np.repeat(np.arange(nt), 3)
    order = np.argsort(inverse, kind="stable")
    se = inverse[order]
    first = np.r_[True, se[1:] != se[:-1]]
    edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
    edge_triangles[se[first], 0] = owner[order[first]]
    edge_triangles[se[~first], 1] = owner[order[~first]]
    return edges.astype(np.int64), edge_triangles, tri_edges.astype(np.int64)


def _edge_signs(vertices, triangles, edges, tri_edges):
    coords = vertices[triangles]
    ev = edges[tri_edges]  # (nt, 3, 2)
    d = vertices[ev[..., 1]] - vertices[ev[..., 0]]
    normal = np.stack([d[..., 1], -d[..., 0]], axis=-1)
    mid = 0.5 * (vertices[ev[..., 0]] + vertices[ev[..., 1]])
    # the vertex opposite local edge i lies on the inner side
    inward = coords - mid
    return np.where(np.einsum("tic,tic->ti", normal, inward) < 0.0, 1, -1).astype(np.int64)


def build_structured_mesh(spec, n):
    """Uniform right-triangle mesh with ``n`` subdivisions per unit length."""
    if int(n) != n or n < 2:
        raise MeshError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    if not isinstance(spec, DomainSpec):
        raise MeshError("spec must be a DomainSpec")
    (x0, x1), _ = spec.fluid_rect
    lower, upper = (spec.fluid_rect, spec.porous_rect) if spec.fluid_below else (spec.porous_rect, spec.fluid_rect)
    nx = _cells(x1 - x0, n, "x")
    ny_lo = _cells(lower[1][1] - lower[1][0], n, "lower rectangle y")
    ny_hi = _cells(upper[1][1] - upper[1][0], n, "upper rectangle y")
    y0 = lower[1][0]
    ny = ny_lo + ny_hi

    xs = x0 + (x1 - x0) * np.arange(nx + 1) / nx
    ys = np.concatenate([
        y0 + (lower[1][1] - y0) * np.arange(ny_lo) / ny_lo,
        upper[1][0] + (upper[1][1] - upper[1][0]) * np.arange(ny_hi + 1) / ny_hi,
    ])
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    v00 = (j * (nx + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([v00, v10, v11])
    triangles[1::2] = np.column_stack([v00, v11, v01])
    row = np.repeat(j.ravel(), 2)
    lower_region = FLUID if spec.fluid_below else POROUS
    region = np.where(row < ny_lo, lower_region, 1 - lower_region).astype(np.int8)

    edges, edge_triangles, tri_edges = _build_edges(triangles)
    signs = _edge_signs(vertices, triangles, edges, tri_edges)
    hx = (x1 - x0) / nx
    hy = max((lower[1][1] - lower[1][0]) / ny_lo, (upper[1][1] - upper[1][0]) / ny_hi)
    mesh = TriMesh(
        vertices=_frozen(vertices),
        triangles=_frozen(triangles),
        triangle_region=_frozen(region),
        edges=_frozen(edges),
        edge_triangles=_frozen(edge_triangles),
        tri_edges=_frozen(tri_edges),
        tri_edge_signs=_frozen(signs),
        boundary_tag=_frozen(np.zeros(len(edges), dtype=np.int8)),
        interface_edges=_frozen(np.zeros(0, dtype=np.int64)),
        interface_normal=_frozen(spec.interface_normal),
        h=float(np.hypot(hx, hy)),
        n=n,
        spec=spec,
    )
    return classify_boundary(mesh, spec)


def _on_side(mid, rect, side, tol):
    (x0, x1), (y0, y1) = rect
    if side == "bottom":
        return np.abs(mid[:, 1] - y0) < tol
    if side == "top":
        return np.abs(mid[:, 1] - y1) < tol
    if side == "left":
        return np.abs(mid[:, 0] - x0) < tol
    return np.abs(mid[:, 0] - x1) < tol


def classify_boundary(mesh, spec):
    """Return a copy of ``mesh`` with boundary tags and the interface edge list filled."""
    et = mesh.edge_triangles
    reg = mesh.triangle_region
    tags = np.full(mesh.n_edges, -1, dtype=np.int8)
    interior = et[:, 1] >= 0
    both = et[interior]
    tags[interior] = np.where(reg[both[:, 0]] != reg[both[:, 1]], Tag.INTERFACE, Tag.INTERIOR)

    boundary = np.flatnonzero(~interior)
    owner_region = reg[et[boundary, 0]]
    mid = 0.5 * (mesh.vertices[mesh.edges[boundary, 0]] + mesh.vertices[mesh.edges[boundary, 1]])
    tol = 1e-9 * max(1.0, float(np.abs(mesh.vertices).max()))
    on_pd = _on_side(mid, spec.porous_rect, spec.dirichlet_porous_side, tol)
    btags = np.where(owner_region == FLUID, Tag.GAMMA_F, np.where(on_pd, Tag.GAMMA_PD, Tag.GAMMA_P))
    tags[boundary] = btags
    if (tags < 0).any():
        bad = np.flatnonzero(tags < 0)
        raise MeshError(f"{len(bad)} edges left untagged, e.g. edge {mesh.edges[bad[0]].tolist()}")

    iface = np.flatnonzero(tags == Tag.INTERFACE)
    imid = 0.5 * (mesh.vertices[mesh.edges[iface, 0]] + mesh.vertices[mesh.edges[iface, 1]])
    iface = iface[np.argsort(imid[:, 0], kind="stable")]
    return replace(mesh, boundary_tag=_frozen(tags), interface_edges=_frozen(iface), spec=spec)


def example51_domain(dirichlet_porous_side="top"):
    """Fluid (0,1)x(0,1) below porous (0,1)x(1,2)."""
    return DomainSpec(((0.0, 1.0), (0.0, 1.0)), ((0.0, 1.0), (1.0, 2.0)), dirichlet_porous_side)
