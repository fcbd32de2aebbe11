"""Bilinear forms and load vectors of the penalized Stokes-Darcy formulation.

Element blocks are computed by :mod:`stokes_darcy.kernels`, scattered into
COO triplets in element order and compressed; the summation order is fixed,
so repeated assembly is bit-identical.

Interface forms are written with the fluid normal ``n_f`` (fluid -> porous)
and the jump ``[v] = (v_f - v_p) . n_f``. On an interface edge the fluid
trace only involves the two vertex hat functions (bubbles vanish on edges)
and the RT0 normal trace is constant: ``psi_e . n_f = sigma_e / |e|`` with
``sigma_e = n_e . n_f`` the orientation of the global edge normal.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import kernels
from .fem_core import quad_edge, quad_triangle
from .spaces import DarcyVelocitySpace, StokesVelocitySpace

VOLUME_DEGREE = 4
MASS_DEGREE = 6
LOAD_DEGREE = 6
EDGE_DEGREE = 6


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Physical and penalty constants (defaults: the smooth benchmark setting)."""

    nu: float = 1.0
    K: tuple = (1.0, 1.0)
    g0: float = 1.0
    alpha: float = 1.0
    S0: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "K", tuple(float(k) for k in self.K))
        if len(self.K) != 2:
            raise ParameterError("K must hold two diagonal entries (k1, k2)")
        checks = {
            "nu > 0": self.nu > 0,
            "k1 > 0 and k2 > 0": min(self.K) > 0,
            "g0 > 0": self.g0 > 0,
            "alpha > 0": self.alpha > 0,
            "S0 >= 0": self.S0 >= 0,
            "gamma > 0": self.gamma > 0,
        }
        for rule, ok in checks.items():
            if not ok:
                raise ParameterError(f"parameter invariant violated: {rule}")

    @property
    def trace_pi(self):
        return self.nu * sum(self.K) / self.g0

    @property
    def bjs_coeff(self):
        """alpha nu sqrt(d) / sqrt(trace(Pi)) with Pi = K nu / g0 and d = 2."""
        return self.alpha * self.nu * np.sqrt(2.0) / np.sqrt(self.trace_pi)

    @property
    def kinv(self):
        return np.array([1.0 / self.K[0], 1.0 / self.K[1]])


def _scatter(rows, cols, local, shape):
    nt = local.shape[0]
    r = np.broadcast_to(rows[:, :, None], local.shape).reshape(nt, -1)
    c = np.broadcast_to(cols[:, None, :], local.shape).reshape(nt, -1)
    A = sp.coo_matrix((local.reshape(-1), (r.reshape(-1), c.reshape(-1))), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _coords(space):
    return space.mesh.triangle_coords(space.triangles)


# ---------------------------------------------------------------------------
# Stokes blocks


def assemble_mass_f(mesh, Vf, degree=MASS_DEGREE):
    rule = quad_triangle(degree)
    _, mass, _ = kernels.mini_matrices(_coords(Vf), rule.points, rule.weights, 1.0)
    return _scatter(Vf.cell_dofs, Vf.cell_dofs, mass, (Vf.dim, Vf.dim))


def assemble_deformation(mesh, Vf, params, degree=VOLUME_DEGREE):
    rule = quad_triangle(degree)
    stiff, _, _ = kernels.mini_matrices(_coords(Vf), rule.points, rule.weights, params.nu)
    return _scatter(Vf.cell_dofs, Vf.cell_dofs, stiff, (Vf.dim, Vf.dim))


def assemble_a_f(mesh, Vf, params, degree=VOLUME_DEGREE):
    """2 nu (D(u), D(v)) plus the BJS tangential interface term."""
    A = assemble_deformation(mesh, Vf, params, degree)
    tau = _tangent(mesh)
    return (A + params.bjs_coeff * _fluid_edge_mass(mesh, Vf, tau)).tocsr()


def assemble_b_f(mesh, Vf, Qf, degree=VOLUME_DEGREE):
    """B[q, v] = (q, div v); shape (dim Qf, dim Vf)."""
    rule = quad_triangle(degree)
    _, _, div = kernels.mini_matrices(_coords(Vf), rule.points, rule.weights, 1.0)
    return _scatter(Qf.cell_dofs, Vf.cell_dofs, div, (Qf.dim, Vf.dim))


# ---------------------------------------------------------------------------
# Darcy blocks


def assemble_a_p(mesh, Vp, params, degree=2):
    """g0 (K^{-1} u, v) on RT0."""
    rule = quad_triangle(degree)
    local = kernels.rt0_mass(_coords(Vp), Vp.cell_signs, params.kinv, rule.points, rule.weights)
    return params.g0 * _scatter(Vp.cell_dofs, Vp.cell_dofs, local, (Vp.dim, Vp.dim))


def assemble_b_p(mesh, Vp, Qp, params):
    """B[q, v] = g0 (q, div v); exact since div of RT0 is cellwise constant."""
    rows = np.repeat(np.arange(Qp.dim), 3)
    vals = params.g0 * Vp.cell_signs.astype(float).ravel()
    B = sp.coo_matrix((vals, (rows, Vp.cell_dofs.ravel())), shape=(Qp.dim, Vp.dim)).tocsr()
    B.sort_indices()
    return B


def assemble_mass_p(mesh, Qp):
    return sp.diags(mesh.areas(Qp.triangles)).tocsr()


# ---------------------------------------------------------------------------
# interface forms


@dataclass(frozen=True, eq=False)
class InterfaceGeometry:
    edges: np.ndarray  # global edge ids, ordered along the interface
    vertices: np.ndarray  # (ni, 2) global vertex ids, lower index first
    vertices_xy: np.ndarray  # (ni, 2, 2)
    lengths: np.ndarray
    sigma: np.ndarray  # n_e . n_f (+-1)
    fluid_cells: np.ndarray  # global triangle ids
    porous_cells: np.ndarray
    normal: np.ndarray  # n_f
    tangent: np.ndarray

    def points(self, rule):
        """Quadrature points (ni * nq, 2); hat weights are ``rule.points``."""
        a = self.vertices_xy[:, 0]
        b = self.vertices_xy[:, 1]
        x = rule.points[None, :, 0, None] * a[:, None, :] + rule.points[None, :, 1, None] * b[:, None, :]
        return x.reshape(-1, 2)


def _tangent(mesh):
    n = mesh.interface_normal
    return np.array([n[1], -n[0]])


def interface_geometry(mesh):
    ie = mesh.interface_edges
    f, p = mesh.interface_cells()
    sigma = mesh.edge_normals(ie) @ mesh.interface_normal
    return InterfaceGeometry(
        edges=ie,
        vertices=mesh.edges[ie],
        vertices_xy=mesh.vertices[mesh.edges[ie]],
        lengths=mesh.edge_lengths(ie),
        sigma=np.rint(sigma),
        fluid_cells=f,
        porous_cells=p,
        normal=np.asarray(mesh.interface_normal, dtype=float),
        tangent=_tangent(mesh),
    )


def _hat_mass(lengths):
    return lengths[:, None, None] * (np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0)[None]


def _trace_coeffs(mesh, space, direction=None):
    """Interface traces ``basis . d`` written in the two edge hats.

    ``d`` defaults to ``n_f``. Returns ``(dofs (ni, k), coeffs (ni, k, 2))``:
    a fluid vertex dof (a, c) has trace ``d_c hat_a``; the RT0 dof of the edge
    has normal trace ``sigma / |e| (hat_0 + hat_1)``.
    """
    geo = interface_geometry(mesh)
    ni = len(geo.edges)
    if isinstance(space, StokesVelocitySpace):
        d = geo.normal if direction is None else np.asarray(direction, dtype=float)
        dofs = space.vertex_dofs(geo.vertices).reshape(ni, 4)
        coef = np.zeros((ni, 4, 2))
        for a in range(2):
            for c in range(2):
                coef[:, 2 * a + c, a] = d[c]
        return dofs, coef
    if isinstance(space, DarcyVelocitySpace):
        if direction is not None:
            raise ValueError("RT0 traces are only defined for the normal direction")
        dofs = space.edge_index[geo.edges][:, None]
        coef = np.repeat((geo.sigma / geo.lengths)[:, None, None], 2, axis=2)
        return dofs, coef
    raise TypeError(f"{type(space).__name__} has no interface velocity trace")


def _fluid_edge_mass(mesh, Vf, direction):
    """<u . d, v . d> over the interface for MINI fields (d fixed unit vector)."""
    geo = interface_geometry(mesh)
    dofs, coef = _trace_coeffs(mesh, Vf, direction)
    local = np.einsum("eah,ehk,ebk->eab", coef, _hat_mass(geo.lengths), coef)
    return _scatter(dofs, dofs, local, (Vf.dim, Vf.dim))


def assemble_penalty(mesh, trial, test, params):
    """gamma <u . n_f, v . n_f> on the interface; rows index ``test``, columns ``trial``."""
    geo = interface_geometry(mesh)
    dr, cr = _trace_coeffs(mesh, test)
    dc, cc = _trace_coeffs(mesh, trial)
    local = np.einsum("eah,ehk,ebk->eab", cr, _hat_mass(geo.lengths), cc)
    return params.gamma * _scatter(dr, dc, local, (test.dim, trial.dim))


def assemble_a_gamma(mesh, Qp, V, side, params):
    """g0 <q, [v]> for v supported on one side; shape (dim Qp, dim V).

    ``side='fluid'`` gives ``g0 <q, v_f . n_f>``; ``side='porous'`` gives
    ``-g0 <q, v_p . n_f> = g0 <q, v_p . n_p>``.
    """
    if side not in ("fluid", "porous"):
        raise ValueError(f"side must be 'fluid' or 'porous', got {side!r}")
    expected = StokesVelocitySpace if side == "fluid" else DarcyVelocitySpace
    if not isinstance(V, expected):
        raise TypeError(f"side {side!r} needs a {expected.__name__}")
    geo = interface_geometry(mesh)
    dofs, coef = _trace_coeffs(mesh, V)
    # int hat = |e| / 2
    vec = 0.5 * geo.lengths[:, None] * coef.sum(axis=2)
    sign = 1.0 if side == "fluid" else -1.0
    rows = Qp.triangle_index[geo.porous_cells][:, None]
    local = sign * params.g0 * vec[:, None, :]
    return _scatter(rows, dofs, local, (Qp.dim, V.dim))


# ---------------------------------------------------------------------------
# load vectors


@dataclass(frozen=True)
class Loads:
    fluid: np.ndarray  # (f_f, v) + interface traction consistency term
    darcy_velocity: np.ndarray  # -g0 <phi_D, v . n_p> on Gamma_p^D
    darcy_pressure: np.ndarray  # g0 (f_p, q)


class LoadAssembler:
    """Quadrature-to-dof operators built once per mesh; per-time loads are then
    a field evaluation at fixed points plus a sparse product."""

    def __init__(self, mesh, spaces, params, degree=LOAD_DEGREE, edge_degree=EDGE_DEGREE):
        self.mesh = mesh
        self.spaces = spaces
        self.params = params
        self.rule = quad_triangle(degree)
        self.edge_rule = quad_edge(edge_degree)

    @cached_property
    def _fluid(self):
        Vf = self.spaces.velocity_f
        coords = _coords(Vf)
        det, _ = kernels.geometry(coords)
        vals, _ = kernels.mini_basis(coords, self.rule.points)
        nt, nq = len(coords), len(self.rule)
        x = np.einsum("qk,tkc->tqc", self.rule.points, coords).reshape(-1, 2)
        w = (np.abs(det)[:, None] * self.rule.weights[None, :])  # (nt, nq)
        # value[t, q, a] for each dof 2a+i paired with column (t*nq+q)*2+i
        val = w[:, :, None] * vals[None, :, :]
        rows = np.empty((nt, nq, 4, 2), dtype=np.int64)
        cols = np.empty((nt, nq, 4, 2), dtype=np.int64)
        data = np.empty((nt, nq, 4, 2))
        base = (np.arange(nt)[:, None] * nq + np.arange(nq)[None, :]) * 2
        for i in range(2):
            rows[..., i] = Vf.cell_dofs[:, None, i::2]
            cols[..., i] = base[:, :, None] + i
            data[..., i] = val
        L = sp.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())), shape=(Vf.dim, 2 * nt * nq)).tocsr()
        return x, L

    @cached_property
    def _porous(self):
        Qp = self.spaces.pressure_p
        coords = _coords(Qp)
        det, _ = kernels.geometry(coords)
        nt, nq = len(coords), len(self.rule)
        x = np.einsum("qk,tkc->tqc", self.rule.points, coords).reshape(-1, 2)
        w = np.abs(det)[:, None] * self.rule.weights[None, :]
        rows = np.repeat(np.arange(nt), nq)
        L = sp.csr_matrix((w.ravel(), (rows, np.arange(nt * nq))), shape=(nt, nt * nq))
        return x, L

    def _edge_points(self, edges):
        m = self.mesh
        a = m.vertices[m.edges[edges, 0]]
        b = m.vertices[m.edges[edges, 1]]
        p = self.edge_rule.points
        x = p[None, :, 0, None] * a[:, None, :] + p[None, :, 1, None] * b[:, None, :]
        return x.reshape(-1, 2)

    @cached_property
    def _pressure_bc(self):
        Vp = self.spaces.velocity_p
        m = self.mesh
        ge = Vp.edges[Vp.pressure_dofs]
        nq = len(self.edge_rule)
        x = self._edge_points(ge)
        # outward sign of the porous cell on each edge
        owner = m.edge_triangles[ge, 0]
        loc = np.argmax(m.tri_edges[owner] == ge[:, None], axis=1)
        s_out = m.tri_edge_signs[owner, loc].astype(float)
        # v . n_p = s_out / |e| and ds = |e| w
        vals = -self.params.g0 * s_out[:, None] * self.edge_rule.weights[None, :]
        rows = np.repeat(Vp.pressure_dofs, nq)
        L = sp.csr_matrix((vals.ravel(), (rows, np.arange(len(ge) * nq))), shape=(Vp.dim, len(ge) * nq))
        return x, L

    @cached_property
    def _interface(self):
        Vf = self.spaces.velocity_f
        geo = interface_geometry(self.mesh)
        ni, nq = len(geo.edges), len(self.edge_rule)
        x = self._edge_points(geo.edges)
        dofs = Vf.vertex_dofs(geo.vertices)  # (ni, 2 vertices, 2 comps)
        hats = self.edge_rule.points  # (nq, 2)
        w = geo.lengths[:, None] * self.edge_rule.weights[None, :]
        rows = np.empty((ni, nq, 2, 2), dtype=np.int64)
        cols = np.empty((ni, nq, 2, 2), dtype=np.int64)
        data = np.empty((ni, nq, 2, 2))
        base = (np.arange(ni)[:, None] * nq + np.arange(nq)[None, :]) * 2
        for a in range(2):
            for i in range(2):
                rows[:, :, a, i] = dofs[:, None, a, i]
                cols[:, :, a, i] = base + i
                data[:, :, a, i] = w * hats[None, :, a]
        L = sp.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())), shape=(Vf.dim, 2 * ni * nq)).tocsr()
        return x, L

    def fluid_load(self, f, t):
        x, L = self._fluid
        return L @ np.asarray(f(x, t), dtype=float).ravel()

    def darcy_pressure_load(self, f_p, t):
        x, L = self._porous
        return self.params.g0 * (L @ np.asarray(f_p(x, t), dtype=float))

    def pressure_bc_load(self, pressure, t):
        x, L = self._pressure_bc
        if L.shape[1] == 0:
            return np.zeros(L.shape[0])
        return L @ np.asarray(pressure(x, t), dtype=float)

    def interface_residual_load(self, case, t):
        """<T n_f + g0 phi n_f + bjs (u . tau) tau, v_f> from the exact fields.

        This is what the exact solution leaves over when the interface
        conditions (normal stress balance, BJS) are not satisfied exactly;
        it vanishes when they are.
        """
        x, L = self._interface
        if L.shape[1] == 0:
            return np.zeros(L.shape[0])
        p = self.params
        n = self.mesh.interface_normal
        tau = _tangent(self.mesh)
        g = case.grad_u_f(x, t)
        D = 0.5 * (g + np.transpose(g, (0, 2, 1)))
        traction = 2.0 * p.nu * D @ n - case.p_f(x, t)[:, None] * n[None, :]
        ut = case.u_f(x, t) @ tau
        r = traction + p.g0 * case.phi_p(x, t)[:, None] * n[None, :] + p.bjs_coeff * ut[:, None] * tau[None, :]
        return L @ r.ravel()

    def loads(self, case, data, t):
        return Loads(
            fluid=self.fluid_load(case.f_f, t) + self.interface_residual_load(case, t),
            darcy_velocity=self.pressure_bc_load(data.pressure_p, t),
            darcy_pressure=self.darcy_pressure_load(case.f_p, t),
        )


def assemble_loads(mesh, spaces, case, data, t, params):
    return LoadAssembler(mesh, spaces, params).loads(case, data, t)


# ---------------------------------------------------------------------------
# forms applied to exact fields (right side of the Ritz projection)


def exact_form_rhs(mesh, spaces, params, case, t, degree=LOAD_DEGREE, edge_degree=EDGE_DEGREE):
    """Every form of the steady coupled operator applied to the exact fields,
    tested against each discrete basis function.

    Returns vectors for the (v_f, q_f, v_p, q_p) rows.
    """
    Vf, Qf, Vp, Qp = spaces
    rule = quad_triangle(degree)
    erule = quad_edge(edge_degree)
    nu, g0, gamma = params.nu, params.g0, params.gamma

    # fluid volume: 2 nu (D(u), D(v)) - (p, div v) and (q, div u)
    coords = _coords(Vf)
    det, _ = kernels.geometry(coords)
    vals, grads = kernels.mini_basis(coords, rule.points)
    nt, nq = len(coords), len(rule)
    x = np.einsum("qk,tkc->tqc", rule.points, coords).reshape(-1, 2)
    w = np.abs(det)[:, None] * rule.weights[None, :]
    g = case.grad_u_f(x, t).reshape(nt, nq, 2, 2)
    stress = nu * (g + np.transpose(g, (0, 1, 3, 2)))
    stress -= case.p_f(x, t).reshape(nt, nq)[:, :, None, None] * np.eye(2)
    local = np.einsum("tq,tqij,tqaj->tai", w, stress, grads).reshape(nt, 8)
    rhs_vf = np.bincount(Vf.cell_dofs.ravel(), local.ravel(), minlength=Vf.dim)
    divu = (g[..., 0, 0] + g[..., 1, 1])
    local_q = np.einsum("tq,qk,tq->tk", w, rule.points, divu)
    rhs_qf = np.bincount(Qf.cell_dofs.ravel(), local_q.ravel(), minlength=Qf.dim)

    # porous volume: g0 (K^-1 u_p, v) - g0 (phi, div v) and g0 (div u_p, q)
    pc = _coords(Vp)
    pdet, _ = kernels.geometry(pc)
    pw = np.abs(pdet)[:, None] * rule.weights[None, :]
    xp = np.einsum("qk,tkc->tqc", rule.points, pc).reshape(-1, 2)
    ntp = len(pc)
    psi = kernels.rt0_values(pc, Vp.cell_signs, rule.points)  # (nt, 3, nq, 2)
    up = case.u_p(xp, t).reshape(ntp, nq, 2) * params.kinv
    phi_int = np.einsum("tq,tq->t", pw, case.phi_p(xp, t).reshape(ntp, nq))
    area = 0.5 * pdet
    local_p = g0 * np.einsum("tq,tqc,tiqc->ti", pw, up, psi)
    local_p -= g0 * Vp.cell_signs / area[:, None] * phi_int[:, None]
    rhs_vp = np.bincount(Vp.cell_dofs.ravel(), local_p.ravel(), minlength=Vp.dim)
    rhs_qp = g0 * np.einsum("tq,tq->t", pw, case.div_u_p(xp, t).reshape(ntp, nq))

    # interface: a_Gamma(phi, [v]) + gamma <[u], [v]> and -a_Gamma(q, [u])
    geo = interface_geometry(mesh)
    ni, nqe = len(geo.edges), len(erule)
    if ni:
        xe = geo.points(erule)
        n = geo.normal
        jump = ((case.u_f(xe, t) - case.u_p(xe, t)) @ n).reshape(ni, nqe)
        phi = case.phi_p(xe, t).reshape(ni, nqe)
        we = geo.lengths[:, None] * erule.weights[None, :]
        dens = g0 * phi + gamma * jump  # multiplies [v]
        # fluid test: v_f . n_f = hat_a n_i
        hat_int = np.einsum("eq,eq,qa->ea", we, dens, erule.points)  # (ni, 2)
        vd = Vf.vertex_dofs(geo.vertices)  # (ni, 2, 2)
        contrib = hat_int[:, :, None] * n[None, None, :]
        # BJS part of a_f: bjs <u . tau, v . tau>
        ut = (case.u_f(xe, t) @ geo.tangent).reshape(ni, nqe)
        bjs_int = params.bjs_coeff * np.einsum("eq,eq,qa->ea", we, ut, erule.points)
        contrib += bjs_int[:, :, None] * geo.tangent[None, None, :]
        rhs_vf += np.bincount(vd.ravel(), contrib.ravel(), minlength=Vf.dim)
        # porous test: [v] = -v_p . n_f = -sigma / |e|
        tot = np.einsum("eq,eq->e", we, dens)
        pd = Vp.edge_index[geo.edges]
        rhs_vp += np.bincount(pd, -geo.sigma / geo.lengths * tot, minlength=Vp.dim)
        jint = np.einsum("eq,eq->e", we, jump)
        rhs_qp -= np.bincount(Qp.triangle_index[geo.porous_cells], g0 * jint, minlength=Qp.dim)
    return rhs_vf, rhs_qf, rhs_vp, rhs_qp
