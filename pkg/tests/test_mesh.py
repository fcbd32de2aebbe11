import numpy as np
import pytest

from stokes_darcy.mesh import (
    FLUID,
    POROUS,
    DomainSpec,
    MeshError,
    Tag,
    build_structured_mesh,
    example51_domain,
)


def test_example_counts(mesh4):
    assert mesh4.n_vertices == 45
    assert mesh4.n_triangles == 64
    counts = {t: int((mesh4.boundary_tag == t).sum()) for t in Tag}
    assert counts[Tag.GAMMA_F] == 12
    assert counts[Tag.GAMMA_PD] == 4
    assert counts[Tag.GAMMA_P] == 8
    assert counts[Tag.INTERFACE] == 4
    assert np.isclose(mesh4.h, np.sqrt(2) / 4)


def test_region_areas(mesh4):
    for region in (FLUID, POROUS):
        tris = mesh4.region_triangles(region)
        assert np.isclose(mesh4.areas(tris).sum(), 1.0)


def test_orientation_and_edges(mesh4):
    assert (mesh4.areas() > 0).all()
    assert (mesh4.edges[:, 0] < mesh4.edges[:, 1]).all()
    # local edge i is opposite local vertex i
    for t in range(mesh4.n_triangles):
        tri = mesh4.triangles[t]
        for i in range(3):
            e = mesh4.edges[mesh4.tri_edges[t, i]]
            assert tri[i] not in e


def test_edge_signs_match_outward_normals(mesh4):
    coords = mesh4.triangle_coords()
    for t in range(mesh4.n_triangles):
        centroid = coords[t].mean(axis=0)
        for i in range(3):
            e = mesh4.tri_edges[t, i]
            mid = mesh4.vertices[mesh4.edges[e]].mean(axis=0)
            outward = np.dot(mesh4.edge_normals([e])[0], mid - centroid) > 0
            assert (mesh4.tri_edge_signs[t, i] > 0) == outward


def test_interior_edges_have_opposite_signs(mesh4):
    inner = np.flatnonzero(mesh4.edge_triangles[:, 1] >= 0)
    for e in inner:
        s = []
        for t in mesh4.edge_triangles[e]:
            i = int(np.flatnonzero(mesh4.tri_edges[t] == e)[0])
            s.append(mesh4.tri_edge_signs[t, i])
        assert s[0] == -s[1]


def test_interface(mesh4):
    ie = mesh4.interface_edges
    mids = mesh4.vertices[mesh4.edges[ie]].mean(axis=1)
    assert np.allclose(mids[:, 1], 1.0)
    assert (np.diff(mids[:, 0]) > 0).all()
    f, p = mesh4.interface_cells()
    assert (mesh4.triangle_region[f] == FLUID).all()
    assert (mesh4.triangle_region[p] == POROUS).all()
    assert np.allclose(mesh4.interface_normal, [0.0, 1.0])


def test_pressure_side_on_top(mesh4):
    pd = mesh4.edges_with_tag(Tag.GAMMA_PD)
    assert np.allclose(mesh4.vertices[mesh4.edges[pd]][..., 1], 2.0)


def test_arrays_read_only(mesh4):
    with pytest.raises(ValueError):
        mesh4.vertices[0, 0] = 1.0


def test_porous_below():
    spec = DomainSpec(((0, 1), (1, 2)), ((0, 1), (0, 1)), "bottom")
    m = build_structured_mesh(spec, 4)
    assert np.allclose(m.interface_normal, [0.0, -1.0])
    assert len(m.interface_edges) == 4


@pytest.mark.parametrize(
    "args",
    [
        (((0, 1), (0, 1)), ((0, 2), (1, 2))),  # x-ranges differ
        (((0, 1), (0, 1)), ((0, 1), (1.5, 2))),  # gap
        (((0, 1), (0, 1)), ((0, 1), (1, 2)), "bottom"),  # pressure side on interface
        (((0, 1), (0, 0)), ((0, 1), (1, 2))),  # empty
    ],
)
def test_bad_domains(args):
    with pytest.raises(MeshError):
        DomainSpec(*args)


def test_bad_resolution():
    with pytest.raises(MeshError):
        build_structured_mesh(example51_domain(), 1)
    with pytest.raises(MeshError):
        build_structured_mesh(DomainSpec(((0, 1.5), (0, 1)), ((0, 1.5), (1, 2))), 3)
