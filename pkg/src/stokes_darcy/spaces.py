"""Degree-of-freedom maps and essential boundary conditions.

Numbering is deterministic and follows entity order:

- Stokes velocity (MINI): ``2*k + c`` for the k-th fluid vertex and
  component ``c``, followed by ``2*n_vf + 2*m + c`` for the bubble on the
  m-th fluid triangle.
- Stokes pressure (P1): the k-th fluid vertex.
- Darcy velocity (RT0): the k-th porous edge; the coefficient is the flux
  through the edge along its global normal.
- Darcy pressure (DG0): the m-th porous triangle.
"""
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .fem_core import quad_edge, quad_triangle
from .mesh import FLUID, POROUS, MeshError, Tag


def _ro(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _local_index(global_ids, size):
    m = np.full(size, -1, dtype=np.int64)
    m[global_ids] = np.arange(len(global_ids))
    return m


@dataclass(frozen=True, eq=False)
class StokesVelocitySpace:
    mesh: object = field(repr=False)
    triangles: np.ndarray  # global ids of fluid triangles
    vertices: np.ndarray  # global ids of fluid vertices
    vertex_index: np.ndarray  # global vertex -> fluid vertex, -1 outside
    cell_dofs: np.ndarray  # (n_tf, 8)
    dirichlet_vertices: np.ndarray  # fluid-local vertex ids on closed Gamma_f
    dirichlet_dofs: np.ndarray

    @property
    def dim(self):
        return 2 * len(self.vertices) + 2 * len(self.triangles)

    @property
    def n_vertex_dofs(self):
        return 2 * len(self.vertices)

    def vertex_dofs(self, global_vertices):
        k = self.vertex_index[np.asarray(global_vertices)]
        return np.stack([2 * k, 2 * k + 1], axis=-1)


@dataclass(frozen=True, eq=False)
class StokesPressureSpace:
    mesh: object = field(repr=False)
    vertices: np.ndarray
    vertex_index: np.ndarray
    cell_dofs: np.ndarray  # (n_tf, 3)

    @property
    def dim(self):
        return len(self.vertices)

    @property
    def triangles(self):
        """Fluid triangles, in the row order of ``cell_dofs``."""
        return self.mesh.region_triangles(FLUID)


@dataclass(frozen=True, eq=False)
class DarcyVelocitySpace:
    mesh: object = field(repr=False)
    triangles: np.ndarray  # global ids of porous triangles
    edges: np.ndarray  # global ids of porous edges
    edge_index: np.ndarray
    cell_dofs: np.ndarray  # (n_tp, 3) local edge i -> dof
    cell_signs: np.ndarray  # (n_tp, 3)
    essential_dofs: np.ndarray  # flux data edges (Gamma_p)
    pressure_dofs: np.ndarray  # edges on Gamma_p^D (natural pressure data)
    interface_dofs: np.ndarray  # in interface order

    @property
    def dim(self):
        return len(self.edges)


@dataclass(frozen=True, eq=False)
class DarcyPressureSpace:
    mesh: object = field(repr=False)
    triangles: np.ndarray
    triangle_index: np.ndarray

    @property
    def dim(self):
        return len(self.triangles)


@dataclass(frozen=True, eq=False)
class Spaces:
    velocity_f: StokesVelocitySpace
    pressure_f: StokesPressureSpace
    velocity_p: DarcyVelocitySpace
    pressure_p: DarcyPressureSpace

    def __iter__(self):
        return iter((self.velocity_f, self.pressure_f, self.velocity_p, self.pressure_p))


def build_spaces(mesh):
    """Build the four discrete spaces on a tagged mesh."""
    tags = mesh.boundary_tag
    boundary = mesh.edge_triangles[:, 1] < 0
    if (tags[boundary] == Tag.INTERIOR).any():
        raise MeshError("mesh has untagged boundary edges; run classify_boundary first")

    nv = mesh.n_vertices
    tf = mesh.region_triangles(FLUID)
    tp = mesh.region_triangles(POROUS)

    fverts = np.unique(mesh.triangles[tf])
    vidx = _local_index(fverts, nv)
    nvf = len(fverts)
    loc = vidx[mesh.triangles[tf]]  # (n_tf, 3)
    bub = 2 * nvf + 2 * np.arange(len(tf))
    vdofs = np.empty((len(tf), 8), dtype=np.int64)
    vdofs[:, 0:6:2] = 2 * loc
    vdofs[:, 1:6:2] = 2 * loc + 1
    vdofs[:, 6] = bub
    vdofs[:, 7] = bub + 1
    gf = mesh.edges[tags == Tag.GAMMA_F]
    dverts = np.unique(vidx[gf.ravel()])
    ddofs = np.sort(np.concatenate([2 * dverts, 2 * dverts + 1]))
    Vf = StokesVelocitySpace(mesh, _ro(tf), _ro(fverts), _ro(vidx), _ro(vdofs), _ro(dverts), _ro(ddofs))
    Qf = StokesPressureSpace(mesh, _ro(fverts), _ro(vidx), _ro(loc))

    pedges = np.unique(mesh.tri_edges[tp])
    eidx = _local_index(pedges, mesh.n_edges)
    Vp = DarcyVelocitySpace(
        mesh,
        _ro(tp),
        _ro(pedges),
        _ro(eidx),
        _ro(eidx[mesh.tri_edges[tp]]),
        _ro(mesh.tri_edge_signs[tp]),
        _ro(np.sort(eidx[np.flatnonzero(tags == Tag.GAMMA_P)])),
        _ro(np.sort(eidx[np.flatnonzero(tags == Tag.GAMMA_PD)])),
        _ro(eidx[mesh.interface_edges]),
    )
    Qp = DarcyPressureSpace(mesh, _ro(tp), _ro(_local_index(tp, mesh.n_triangles)))
    return Spaces(Vf, Qf, Vp, Qp)


# ---------------------------------------------------------------------------
# boundary data


@dataclass(frozen=True)
class BoundaryData:
    """Time-dependent boundary traces.

    ``velocity_f(x, t)`` -> (m, 2) on Gamma_f; ``flux_p(x, t, normal)`` -> (m,)
    normal Darcy flux ``u_p . normal``; ``pressure_p(x, t)`` -> (m,) on
    Gamma_p^D.
    """

    velocity_f: object
    flux_p: object
    pressure_p: object

    @classmethod
    def from_case(cls, case):
        def flux(x, t, normal):
            return np.einsum("mc,mc->m", case.u_p(x, t), normal)

        return cls(case.u_f, flux, case.phi_p)

    @classmethod
    def homogeneous(cls):
        return cls(
            lambda x, t: np.zeros((len(x), 2)),
            lambda x, t, normal: np.zeros(len(x)),
            lambda x, t: np.zeros(len(x)),
        )


def stokes_dirichlet_values(space, data, t):
    """Nodal values of the Dirichlet velocity at the constrained dofs (sorted dof order)."""
    gv = space.vertices[space.dirichlet_vertices]
    vals = np.asarray(data.velocity_f(space.mesh.vertices[gv], t), dtype=float)
    out = np.empty(2 * len(gv))
    out[0::2] = vals[:, 0]
    out[1::2] = vals[:, 1]
    # dirichlet_dofs is sorted and equals interleaved 2k, 2k+1 for sorted k
    return out


def darcy_flux_values(space, data, t, degree=6):
    """Edge fluxes of the normal-flux data along each edge's global normal."""
    mesh = space.mesh
    ge = space.edges[space.essential_dofs]
    if len(ge) == 0:
        return np.zeros(0)
    rule = quad_edge(degree)
    a = mesh.vertices[mesh.edges[ge, 0]]
    b = mesh.vertices[mesh.edges[ge, 1]]
    x = rule.points[:, 0, None, None] * a[None] + rule.points[:, 1, None, None] * b[None]  # (nq, m, 2)
    normals = mesh.edge_normals(ge)
    lengths = mesh.edge_lengths(ge)
    nq, m = x.shape[:2]
    g = data.flux_p(x.reshape(-1, 2), t, np.tile(normals, (nq, 1))).reshape(nq, m)
    return lengths * (rule.weights @ g)


def essential_values(space, data, t):
    if isinstance(space, StokesVelocitySpace):
        return space.dirichlet_dofs, stokes_dirichlet_values(space, data, t)
    if isinstance(space, DarcyVelocitySpace):
        return space.essential_dofs, darcy_flux_values(space, data, t)
    raise TypeError(f"no essential conditions for {type(space).__name__}")


# ---------------------------------------------------------------------------
# sparse systems


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Square sparse system ``matrix @ x = rhs`` with a named block layout."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    blocks: tuple = ()  # ((name, size), ...)

    def __post_init__(self):
        n, m = self.matrix.shape
        if n != m or len(self.rhs) != n:
            raise ValueError(f"inconsistent system: matrix {self.matrix.shape}, rhs {len(self.rhs)}")
        if self.blocks and sum(s for _, s in self.blocks) != n:
            raise ValueError("block layout does not match system size")

    def block_slice(self, name):
        start = 0
        for b, size in self.blocks:
            if b == name:
                return slice(start, start + size)
            start += size
        raise KeyError(name)

    def split(self, x):
        out, start = {}, 0
        for b, size in self.blocks:
            out[b] = x[start:start + size]
            start += size
        return out


def constrain(matrix, dofs):
    """Symmetric elimination pattern for ``dofs``.

    Returns ``(constrained_matrix, lift)`` where rows/columns of ``dofs`` are
    replaced by identity and ``lift = matrix[:, dofs]`` with those rows
    zeroed. A right-hand side ``b`` with data ``g`` becomes
    ``b - lift @ g`` with ``g`` written into the constrained entries.
    """
    A = sp.csr_matrix(matrix, dtype=float)
    n = A.shape[0]
    dofs = np.asarray(dofs, dtype=np.int64)
    keep = np.ones(n)
    keep[dofs] = 0.0
    D = sp.diags(keep)
    lift = sp.csr_matrix(D @ A[:, dofs])
    unit = np.zeros(n)
    unit[dofs] = 1.0
    Ac = sp.csr_matrix(D @ A @ D + sp.diags(unit))
    Ac.eliminate_zeros()
    Ac.sort_indices()
    return Ac, lift


def constrained_rhs(rhs, lift, dofs, values):
    b = np.array(rhs, dtype=float, copy=True)
    if len(dofs):
        b -= lift @ values
        b[dofs] = values
    return b


def apply_dirichlet(system, dofs, values):
    """Eliminate ``dofs`` with prescribed ``values``; returns a new system."""
    dofs = np.asarray(dofs, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    if dofs.shape != values.shape:
        raise ValueError("dofs and values differ in length")
    if len(dofs) and (dofs.min() < 0 or dofs.max() >= system.matrix.shape[0]):
        raise ValueError("constrained dof outside the system")
    Ac, lift = constrain(system.matrix, dofs)
    return replace(system, matrix=Ac, rhs=constrained_rhs(system.rhs, lift, dofs, values))


def apply_essential_bcs(system, space, data, t, offset=0):
    """Impose the essential conditions of ``space`` whose dofs start at ``offset``."""
    dofs, values = essential_values(space, data, t)
    if offset + space.dim > system.matrix.shape[0]:
        raise ValueError(f"space of dim {space.dim} at offset {offset} exceeds system size {system.matrix.shape[0]}")
    return apply_dirichlet(system, dofs + offset, values)


# ---------------------------------------------------------------------------
# interpolation into the discrete spaces


def interpolate_mini(space, func, t):
    """Nodal interpolant: vertex values of ``func``, bubble coefficients zero."""
    vals = np.asarray(func(space.mesh.vertices[space.vertices], t), dtype=float)
    out = np.zeros(space.dim)
    out[: space.n_vertex_dofs] = vals.ravel()
    return out


def interpolate_p1(space, func, t):
    return np.asarray(func(space.mesh.vertices[space.vertices], t), dtype=float).copy()


def interpolate_rt0(space, func, t, degree=6):
    """Edge fluxes ``int_e u . n_e ds`` along each edge's global normal."""
    mesh = space.mesh
    rule = quad_edge(degree)
    a = mesh.vertices[mesh.edges[space.edges, 0]]
    b = mesh.vertices[mesh.edges[space.edges, 1]]
    x = rule.points[None, :, 0, None] * a[:, None, :] + rule.points[None, :, 1, None] * b[:, None, :]
    ne, nq = x.shape[:2]
    u = np.asarray(func(x.reshape(-1, 2), t), dtype=float).reshape(ne, nq, 2)
    un = np.einsum("eqc,ec->eq", u, mesh.edge_normals(space.edges))
    return mesh.edge_lengths(space.edges) * (un @ rule.weights)


def project_dg0(space, func, t, degree=6):
    """Cell averages (the L2 projection onto piecewise constants)."""
    rule = quad_triangle(degree)
    coords = space.mesh.triangle_coords(space.triangles)
    x = np.einsum("qk,tkc->tqc", rule.points, coords)
    nt, nq = x.shape[:2]
    f = np.asarray(func(x.reshape(-1, 2), t), dtype=float).reshape(nt, nq)
    # weights sum to 1/2, so 2 * sum(w f) is the cell average
    return 2.0 * (f @ rule.weights)
