"""Decoupled backward-Euler stepping, the steady coupled (Ritz) projection and
the sparse solve contract.

All system matrices are time independent, so each mesh factors the Darcy and
Stokes systems once; a time step is two right-hand-side builds and two pairs
of triangular solves.
"""
import logging
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import (
    LoadAssembler,
    assemble_a_f,
    assemble_a_gamma,
    assemble_a_p,
    assemble_b_f,
    assemble_b_p,
    assemble_mass_f,
    assemble_mass_p,
    assemble_penalty,
    exact_form_rhs,
)
from .spaces import (
    BoundaryData,
    SparseSystem,
    constrain,
    constrained_rhs,
    darcy_flux_values,
    interpolate_mini,
    stokes_dirichlet_values,
)

log = logging.getLogger(__name__)

SOLVE_RTOL = 1e-10


class SolverError(RuntimeError):
    pass


class Factorization:
    """Sparse LU (SuperLU) with a residual check on every solve.

    One step of iterative refinement is applied when the first solve misses
    the tolerance.
    """

    def __init__(self, matrix, rtol=SOLVE_RTOL):
        A = sp.csc_matrix(matrix, dtype=float)
        n, m = A.shape
        if n != m:
            raise SolverError(f"matrix is not square: {A.shape}")
        self.matrix = A
        self.rtol = rtol
        try:
            self._lu = splu(A)
        except RuntimeError as exc:
            raise SolverError(f"LU factorization failed (dim {n}, nnz {A.nnz}): {exc}") from exc
        udiag = np.abs(self._lu.U.diagonal())
        if udiag.size and (not np.isfinite(udiag).all() or udiag.min() <= 1e-14 * udiag.max()):
            k = int(np.argmin(udiag))
            raise SolverError(
                f"matrix is numerically singular (dim {n}): pivot {k} = {udiag[k]:.3e}, "
                f"largest pivot {udiag.max():.3e}"
            )

    @property
    def shape(self):
        return self.matrix.shape

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        x = self._lu.solve(b)
        bnorm = np.linalg.norm(b)
        r = b - self.matrix @ x
        if np.linalg.norm(r) > self.rtol * bnorm:
            x = x + self._lu.solve(r)
            r = b - self.matrix @ x
        rel = np.linalg.norm(r) / bnorm if bnorm > 0 else np.linalg.norm(r)
        if not np.isfinite(x).all() or rel > self.rtol:
            raise SolverError(f"solve missed tolerance (dim {len(b)}): relative residual {rel:.3e} > {self.rtol:.1e}")
        return x


def sparse_solve(system, rtol=SOLVE_RTOL):
    """Solve a :class:`SparseSystem` to relative residual ``rtol``."""
    return Factorization(system.matrix, rtol).solve(system.rhs)


@dataclass(frozen=True)
class FieldState:
    t: float
    u_f: np.ndarray
    p_f: np.ndarray
    u_p: np.ndarray
    phi_p: np.ndarray

    def check(self, spaces):
        dims = (spaces.velocity_f.dim, spaces.pressure_f.dim, spaces.velocity_p.dim, spaces.pressure_p.dim)
        got = (len(self.u_f), len(self.p_f), len(self.u_p), len(self.phi_p))
        if dims != got:
            raise ValueError(f"state vector lengths {got} do not match space dimensions {dims}")
        return self

    @classmethod
    def zeros(cls, spaces, t=0.0):
        Vf, Qf, Vp, Qp = spaces
        return cls(t, np.zeros(Vf.dim), np.zeros(Qf.dim), np.zeros(Vp.dim), np.zeros(Qp.dim))


@dataclass(frozen=True)
class TimeGrid:
    tau: float
    N: int

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("time step must be positive")
        if int(self.N) != self.N or self.N < 0:
            raise ValueError("step count must be a non-negative integer")

    @property
    def T(self):
        return self.N * self.tau

    def times(self):
        return self.tau * np.arange(self.N + 1)

    @classmethod
    def from_final_time(cls, T, tau):
        N = int(round(T / tau))
        if N < 1 or abs(N * tau - T) > 1e-9 * max(1.0, T):
            raise ValueError(f"final time {T} is not a whole number of steps of size {tau}")
        return cls(T / N, N)


@dataclass(frozen=True, eq=False)
class Operators:
    """All time-independent blocks on one mesh.

    Shapes follow (test, trial): ``B_f`` is (Q_f, V_f); ``G_f`` and ``G_p`` are
    ``g0 <q, [v]>`` restricted to fluid / porous velocities; ``P_xy`` is the
    penalty with test space x and trial space y.
    """

    A_f: sp.csr_matrix
    M_f: sp.csr_matrix
    B_f: sp.csr_matrix
    A_p: sp.csr_matrix
    B_p: sp.csr_matrix
    M_p: sp.csr_matrix
    G_f: sp.csr_matrix
    G_p: sp.csr_matrix
    P_ff: sp.csr_matrix
    P_fp: sp.csr_matrix
    P_pf: sp.csr_matrix
    P_pp: sp.csr_matrix


def assemble_operators(mesh, spaces, params):
    Vf, Qf, Vp, Qp = spaces
    return Operators(
        A_f=assemble_a_f(mesh, Vf, params),
        M_f=assemble_mass_f(mesh, Vf),
        B_f=assemble_b_f(mesh, Vf, Qf),
        A_p=assemble_a_p(mesh, Vp, params),
        B_p=assemble_b_p(mesh, Vp, Qp, params),
        M_p=assemble_mass_p(mesh, Qp),
        G_f=assemble_a_gamma(mesh, Qp, Vf, "fluid", params),
        G_p=assemble_a_gamma(mesh, Qp, Vp, "porous", params),
        P_ff=assemble_penalty(mesh, Vf, Vf, params),
        P_fp=assemble_penalty(mesh, Vp, Vf, params),
        P_pf=assemble_penalty(mesh, Vf, Vp, params),
        P_pp=assemble_penalty(mesh, Vp, Vp, params),
    )


class DecoupledScheme:
    """Backward-Euler decoupled stepping: a Darcy solve with the lagged Stokes
    interface trace, then a Stokes solve with the fresh Darcy fields."""

    def __init__(self, mesh, spaces, params, tau, case, data=None, operators=None, rtol=SOLVE_RTOL):
        if not tau > 0:
            raise ValueError("time step must be positive")
        self.mesh = mesh
        self.spaces = spaces
        self.params = params
        self.tau = float(tau)
        self.case = case
        self.data = BoundaryData.from_case(case) if data is None else data
        self.ops = assemble_operators(mesh, spaces, params) if operators is None else operators
        self.loader = LoadAssembler(mesh, spaces, params)
        Vf, Qf, Vp, Qp = spaces
        o = self.ops

        coupling = (o.B_p - o.G_p).tocsr()
        self.darcy_matrix = sp.bmat(
            [[o.A_p + o.P_pp, -coupling.T], [coupling, (params.g0 * params.S0 / self.tau) * o.M_p]], format="csr"
        )
        self.darcy_blocks = (("u_p", Vp.dim), ("phi_p", Qp.dim))
        self._darcy_bc = Vp.essential_dofs
        self._darcy_constrained, self._darcy_lift = constrain(self.darcy_matrix, self._darcy_bc)

        zero = sp.csr_matrix((Qf.dim, Qf.dim))
        self.stokes_matrix = sp.bmat(
            [[o.M_f / self.tau + o.A_f + o.P_ff, -o.B_f.T], [o.B_f, zero]], format="csr"
        )
        self.stokes_blocks = (("u_f", Vf.dim), ("p_f", Qf.dim))
        self._stokes_bc = Vf.dirichlet_dofs
        self._stokes_constrained, self._stokes_lift = constrain(self.stokes_matrix, self._stokes_bc)
        self.rtol = rtol

    # factored on first use, then reused for every step
    @cached_property
    def darcy_lu(self):
        return Factorization(self._darcy_constrained, self.rtol)

    @cached_property
    def stokes_lu(self):
        return Factorization(self._stokes_constrained, self.rtol)

    # -- right-hand sides -------------------------------------------------

    def darcy_rhs(self, state, t_next):
        p, o = self.params, self.ops
        F_v = self.loader.pressure_bc_load(self.data.pressure_p, t_next)
        F_q = self.loader.darcy_pressure_load(self.case.f_p, t_next)
        rhs_v = F_v + o.P_pf @ state.u_f
        rhs_q = F_q + (p.g0 * p.S0 / self.tau) * (o.M_p @ state.phi_p) + o.G_f @ state.u_f
        return np.concatenate([rhs_v, rhs_q])

    def stokes_rhs(self, state, u_p, phi_p, t_next):
        o = self.ops
        F = self.loader.fluid_load(self.case.f_f, t_next) + self.loader.interface_residual_load(self.case, t_next)
        rhs_v = F + (o.M_f @ state.u_f) / self.tau - o.G_f.T @ phi_p + o.P_fp @ u_p
        return np.concatenate([rhs_v, np.zeros(self.spaces.pressure_f.dim)])

    def darcy_system(self, state, t_next):
        """Unconstrained Darcy system and its essential data (for inspection)."""
        g = darcy_flux_values(self.spaces.velocity_p, self.data, t_next)
        return SparseSystem(self.darcy_matrix, self.darcy_rhs(state, t_next), self.darcy_blocks), self._darcy_bc, g

    def stokes_system(self, state, u_p, phi_p, t_next):
        g = stokes_dirichlet_values(self.spaces.velocity_f, self.data, t_next)
        return (
            SparseSystem(self.stokes_matrix, self.stokes_rhs(state, u_p, phi_p, t_next), self.stokes_blocks),
            self._stokes_bc,
            g,
        )

    # -- steps ---------------------------------------------------------------

    def darcy_step(self, state, t_next):
        g = darcy_flux_values(self.spaces.velocity_p, self.data, t_next)
        b = constrained_rhs(self.darcy_rhs(state, t_next), self._darcy_lift, self._darcy_bc, g)
        x = self.darcy_lu.solve(b)
        nv = self.spaces.velocity_p.dim
        return x[:nv], x[nv:]

    def stokes_step(self, state, u_p, phi_p, t_next):
        g = stokes_dirichlet_values(self.spaces.velocity_f, self.data, t_next)
        b = constrained_rhs(self.stokes_rhs(state, u_p, phi_p, t_next), self._stokes_lift, self._stokes_bc, g)
        x = self.stokes_lu.solve(b)
        nv = self.spaces.velocity_f.dim
        return x[:nv], x[nv:]

    def step(self, state):
        t_next = state.t + self.tau
        u_p, phi_p = self.darcy_step(state, t_next)
        u_f, p_f = self.stokes_step(state, u_p, phi_p, t_next)
        return FieldState(t_next, u_f, p_f, u_p, phi_p)


def darcy_step(scheme, state, t_next):
    return scheme.darcy_step(state, t_next)


def stokes_step(scheme, state, darcy_next, t_next):
    u_p, phi_p = darcy_next
    return scheme.stokes_step(state, u_p, phi_p, t_next)


# ---------------------------------------------------------------------------
# steady coupled projection


def ritz_matrix(ops):
    o = ops
    coupling = (o.B_p - o.G_p).tocsr()
    return sp.bmat(
        [
            [o.A_f + o.P_ff, -o.B_f.T, -o.P_fp, o.G_f.T],
            [o.B_f, None, None, None],
            [-o.P_pf, None, o.A_p + o.P_pp, -coupling.T],
            [-o.G_f, None, coupling, None],
        ],
        format="csr",
    )


def ritz_projection(mesh, spaces, params, case, t, operators=None, data=None, rtol=SOLVE_RTOL):
    """Steady coupled projection of the exact fields at time ``t``.

    Solves the monolithic four-field system whose left side is the coupled
    steady operator and whose right side is the same operator applied to the
    exact fields. Essential data: nodal Stokes velocity on Gamma_f, edge
    fluxes on Gamma_p.
    """
    ops = assemble_operators(mesh, spaces, params) if operators is None else operators
    data = BoundaryData.from_case(case) if data is None else data
    Vf, Qf, Vp, Qp = spaces
    K = ritz_matrix(ops)
    rhs = np.concatenate(exact_form_rhs(mesh, spaces, params, case, t))
    off_p = Vf.dim + Qf.dim
    dofs = np.concatenate([Vf.dirichlet_dofs, off_p + Vp.essential_dofs])
    vals = np.concatenate([stokes_dirichlet_values(Vf, data, t), darcy_flux_values(Vp, data, t)])
    Kc, lift = constrain(K, dofs)
    x = Factorization(Kc, rtol).solve(constrained_rhs(rhs, lift, dofs, vals))
    s = np.cumsum([0, Vf.dim, Qf.dim, Vp.dim, Qp.dim])
    return FieldState(float(t), x[s[0]:s[1]], x[s[1]:s[2]], x[s[2]:s[3]], x[s[3]:s[4]])


# ---------------------------------------------------------------------------
# transient driver


def initial_state(mesh, spaces, params, case, operators=None, data=None, t0=0.0):
    """Nodal MINI interpolant for the Stokes velocity; Darcy fields (and the
    Stokes pressure) from the steady coupled projection at ``t0``."""
    ritz = ritz_projection(mesh, spaces, params, case, t0, operators=operators, data=data)
    return replace(ritz, u_f=interpolate_mini(spaces.velocity_f, case.u_f, t0))


def run_transient(mesh, spaces, params, grid, case, data=None, callback=None, scheme=None, state=None):
    """Advance ``grid.N`` decoupled steps and return the final state.

    ``callback(n, state)`` is called after every step (n = 1..N).
    """
    if scheme is None:
        scheme = DecoupledScheme(mesh, spaces, params, grid.tau, case, data)
    elif abs(scheme.tau - grid.tau) > 1e-15 * grid.tau:
        raise ValueError("scheme time step differs from the time grid")
    if state is None:
        state = initial_state(mesh, spaces, params, case, operators=scheme.ops, data=scheme.data)
    state.check(spaces)
    for n in range(1, grid.N + 1):
        try:
            state = scheme.step(state)
        except SolverError as exc:
            raise SolverError(f"step {n} (t={state.t + grid.tau:.6g}): {exc}") from exc
        if callback is not None:
            callback(n, state)
    return state
