import numpy as np
import pytest
import scipy.sparse as sp

from stokes_darcy.assembly import (
    LoadAssembler,
    ModelParams,
    ParameterError,
    assemble_a_gamma,
    assemble_a_p,
    assemble_b_f,
    assemble_b_p,
    assemble_deformation,
    assemble_mass_f,
    assemble_mass_p,
    assemble_penalty,
)
from stokes_darcy.manufactured import ManufacturedCase, zero_case
from stokes_darcy.solver import assemble_operators, ritz_matrix, ritz_projection
from stokes_darcy.spaces import (
    BoundaryData,
    interpolate_mini,
    interpolate_p1,
    interpolate_rt0,
)


def _sym_err(A):
    return abs(A - A.T).max() if A.nnz else 0.0


def _const(c):
    c = np.asarray(c, dtype=float)
    if c.ndim == 0:
        return lambda x, t: np.full(len(x), float(c))
    return lambda x, t: np.tile(c, (len(x), 1))


@pytest.fixture(scope="module")
def ops(mesh4, spaces4):
    return assemble_operators(mesh4, spaces4, ModelParams())


def test_params_invariants():
    p = ModelParams()
    assert np.isclose(p.trace_pi, 2.0)
    assert np.isclose(p.bjs_coeff, 1.0)
    for bad in (dict(nu=0), dict(K=(1, -1)), dict(g0=0), dict(alpha=0), dict(S0=-1), dict(gamma=-1), dict(K=(1,))):
        with pytest.raises(ParameterError):
            ModelParams(**bad)


def test_symmetric_blocks(ops):
    for name in ("A_f", "M_f", "A_p", "M_p", "P_ff", "P_pp"):
        assert _sym_err(getattr(ops, name)) <= 1e-12, name
    assert abs(ops.P_fp - ops.P_pf.T).max() <= 1e-12


def test_block_shapes(ops, spaces4):
    Vf, Qf, Vp, Qp = spaces4
    assert ops.B_f.shape == (Qf.dim, Vf.dim)
    assert ops.B_p.shape == (Qp.dim, Vp.dim)
    assert ops.G_f.shape == (Qp.dim, Vf.dim)
    assert ops.G_p.shape == (Qp.dim, Vp.dim)
    assert ops.P_fp.shape == (Vf.dim, Vp.dim)


def test_ritz_matrix_structure(ops):
    K = ritz_matrix(ops).tocsr()
    # the penalty couples the velocities symmetrically; pressure pairs are skew
    nf = ops.A_f.shape[0]
    nqf = ops.B_f.shape[0]
    npv = ops.A_p.shape[0]
    s = np.cumsum([0, nf, nqf, npv, ops.M_p.shape[0]])
    blk = lambda i, j: K[s[i]:s[i + 1], s[j]:s[j + 1]]  # noqa: E731
    for i, j in [(0, 1), (0, 3), (2, 3)]:
        assert abs(blk(i, j) + blk(j, i).T).max() <= 1e-12
    assert abs(blk(0, 2) - blk(2, 0).T).max() <= 1e-12
    for i in (0, 2):
        assert _sym_err(blk(i, i)) <= 1e-12


def test_energy_values(mesh4, spaces4):
    Vf, Qf, Vp, Qp = spaces4
    p = ModelParams()
    shear = interpolate_mini(Vf, lambda x, t: np.column_stack([x[:, 1], 0 * x[:, 0]]), 0)
    rot = interpolate_mini(Vf, lambda x, t: np.column_stack([-x[:, 1], x[:, 0]]), 0)
    A = assemble_deformation(mesh4, Vf, p)
    assert np.isclose(shear @ A @ shear, 1.0)  # 2 nu |D|^2 = 1 on unit area
    assert abs(rot @ A @ rot) < 1e-12
    one = interpolate_mini(Vf, _const([1.0, 0.0]), 0)
    assert np.isclose(one @ assemble_mass_f(mesh4, Vf) @ one, 1.0)
    assert np.isclose(assemble_mass_p(mesh4, Qp).sum(), 1.0)


def test_bjs_term(ops, spaces4):
    Vf = spaces4.velocity_f
    ux = interpolate_mini(Vf, _const([1.0, 0.0]), 0)
    assert np.isclose(ux @ ops.A_f @ ux, 1.0)  # bjs * |interface| with bjs = 1
    uy = interpolate_mini(Vf, _const([0.0, 1.0]), 0)
    assert abs(uy @ ops.A_f @ uy) < 1e-12


def test_divergence_blocks(mesh4, spaces4):
    Vf, Qf, Vp, Qp = spaces4
    p = ModelParams(g0=2.0)
    lin = lambda x, t: x.copy()  # noqa: E731  div = 2
    Bf = assemble_b_f(mesh4, Vf, Qf)
    one_q = np.ones(Qf.dim)
    assert np.isclose(one_q @ Bf @ interpolate_mini(Vf, lin, 0), 2.0)
    Bp = assemble_b_p(mesh4, Vp, Qp, p)
    r = Bp @ interpolate_rt0(Vp, lin, 0)
    assert np.allclose(r, 2.0 * 2.0 * mesh4.areas(Qp.triangles))


def test_darcy_mass(mesh4, spaces4):
    Vp = spaces4.velocity_p
    p = ModelParams(K=(2.0, 0.5), g0=3.0)
    c = interpolate_rt0(Vp, _const([1.0, 1.0]), 0)
    assert np.isclose(c @ assemble_a_p(mesh4, Vp, p) @ c, 3.0 * (0.5 + 2.0))


def test_interface_forms(mesh4, spaces4):
    Vf, Qf, Vp, Qp = spaces4
    p = ModelParams(gamma=3.0, g0=2.0)
    uf = interpolate_mini(Vf, _const([0.4, 1.0]), 0)
    up = interpolate_rt0(Vp, _const([5.0, 1.0]), 0)
    assert np.isclose(uf @ assemble_penalty(mesh4, Vf, Vf, p) @ uf, 3.0)
    assert np.isclose(up @ assemble_penalty(mesh4, Vp, Vp, p) @ up, 3.0)
    assert np.isclose(uf @ assemble_penalty(mesh4, Vp, Vf, p) @ up, 3.0)
    q = np.ones(Qp.dim)
    assert np.isclose(q @ assemble_a_gamma(mesh4, Qp, Vf, "fluid", p) @ uf, 2.0)
    assert np.isclose(q @ assemble_a_gamma(mesh4, Qp, Vp, "porous", p) @ up, -2.0)
    with pytest.raises(TypeError):
        assemble_a_gamma(mesh4, Qp, Vp, "fluid", p)
    with pytest.raises(ValueError):
        assemble_a_gamma(mesh4, Qp, Vf, "middle", p)


def test_loads(mesh4, spaces4):
    Vf, Qf, Vp, Qp = spaces4
    p = ModelParams(g0=2.0)
    L = LoadAssembler(mesh4, spaces4, p)
    f = L.fluid_load(_const([1.0, 0.0]), 0)
    assert np.isclose(f[: Vf.n_vertex_dofs : 2].sum(), 1.0)
    assert np.allclose(f[1 : Vf.n_vertex_dofs : 2], 0.0)
    # bubble load = 27/120 * 2|K| ... = 9/20 |K|
    assert np.allclose(f[Vf.n_vertex_dofs :: 2], 0.45 * mesh4.areas(Vf.triangles))
    assert np.allclose(L.darcy_pressure_load(_const(1.0), 0), 2.0 * mesh4.areas(Qp.triangles))
    bc = L.pressure_bc_load(_const(1.0), 0)
    # top edges, global normal points down: outward sign -1
    assert np.allclose(bc[Vp.pressure_dofs], 2.0)
    assert np.count_nonzero(bc) == len(Vp.pressure_dofs)
    assert np.allclose(L.interface_residual_load(zero_case(), 0.4), 0.0)


def _affine_case():
    """Fields that lie in the discrete spaces; Darcy law is not needed here."""
    u_f = lambda x, t: np.column_stack([1.0 + 0 * x[:, 0] + t, 2.0 + 0 * x[:, 1]])  # noqa: E731
    p_f = lambda x, t: 1.0 + x[:, 0] - 2.0 * x[:, 1]  # noqa: E731
    u_p = _const([0.5, -0.25])
    phi = _const(3.0)
    zv, zs = _const([0.0, 0.0]), _const(0.0)
    grad = lambda x, t: np.zeros((len(x), 2, 2))  # noqa: E731
    return ManufacturedCase("affine", u_f, p_f, u_p, phi, zv, zs, zv, zs, grad, zv, zs)


def test_ritz_reproduces_discrete_fields(mesh4, spaces4):
    Vf, Qf, Vp, Qp = spaces4
    p = ModelParams(gamma=2.0)
    c = _affine_case()
    st = ritz_projection(mesh4, spaces4, p, c, 0.0, data=BoundaryData.from_case(c))
    assert np.allclose(st.u_f, interpolate_mini(Vf, c.u_f, 0.0), atol=1e-10)
    assert np.allclose(st.p_f, interpolate_p1(Qf, c.p_f, 0.0), atol=1e-10)
    assert np.allclose(st.u_p, interpolate_rt0(Vp, c.u_p, 0.0), atol=1e-10)
    assert np.allclose(st.phi_p, 3.0, atol=1e-10)


def test_assembly_deterministic(mesh4, spaces4):
    a = assemble_operators(mesh4, spaces4, ModelParams())
    b = assemble_operators(mesh4, spaces4, ModelParams())
    for name in ("A_f", "B_f", "A_p", "P_fp", "G_f"):
        x, y = getattr(a, name), getattr(b, name)
        assert (x.indptr == y.indptr).all() and (x.indices == y.indices).all()
        assert (x.data == y.data).all()
        assert sp.isspmatrix_csr(x)
