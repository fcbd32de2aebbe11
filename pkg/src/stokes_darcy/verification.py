"""Error norms, observed orders and the convergence study driver.

Norms are evaluated by per-element quadrature (degree 6 by default) of the
mismatch between a discrete field and a callable exact field. The study
runs one transient solve per mesh level with ``tau = h**2`` and measures
errors at the final time.
"""
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .assembly import ModelParams, interface_geometry
from .fem_core import quad_edge, quad_triangle
from .manufactured import CASES, ManufacturedCase, example51_case  # noqa: F401  (re-export)
from .mesh import FLUID, POROUS, build_structured_mesh, example51_domain
from .solver import SOLVE_RTOL, DecoupledScheme, SolverError, TimeGrid, ritz_projection, run_transient
from .spaces import (
    DarcyPressureSpace,
    DarcyVelocitySpace,
    StokesPressureSpace,
    StokesVelocitySpace,
    build_spaces,
)

log = logging.getLogger(__name__)

ERROR_DEGREE = 6

_REGION = {
    StokesVelocitySpace: FLUID,
    StokesPressureSpace: FLUID,
    DarcyVelocitySpace: POROUS,
    DarcyPressureSpace: POROUS,
}


def _cell_quadrature(space, degree):
    rule = quad_triangle(degree)
    coords = space.mesh.triangle_coords(space.triangles)
    det, _ = kernels.geometry(coords)
    w = np.abs(det)[:, None] * rule.weights[None, :]
    x = np.einsum("qk,tkc->tqc", rule.points, coords)
    return rule, coords, w, x


def _discrete_values(coeffs, space, rule, coords):
    """Field values at the quadrature points, shape (nt, nq) or (nt, nq, 2)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (space.dim,):
        raise ValueError(f"expected {space.dim} coefficients, got shape {coeffs.shape}")
    if isinstance(space, StokesVelocitySpace):
        u, _ = kernels.mini_eval(coords, coeffs[space.cell_dofs], rule.points)
        return u
    if isinstance(space, StokesPressureSpace):
        return coeffs[space.cell_dofs] @ rule.points.T
    if isinstance(space, DarcyVelocitySpace):
        psi = kernels.rt0_values(coords, space.cell_signs, rule.points)
        return np.einsum("ti,tiqc->tqc", coeffs[space.cell_dofs], psi)
    if isinstance(space, DarcyPressureSpace):
        return np.repeat(coeffs[:, None], len(rule), axis=1)
    raise TypeError(f"no L2 evaluation for {type(space).__name__}")


def l2_error(coeffs, space, exact, t, region=None, degree=ERROR_DEGREE):
    """L2 norm over the space's subdomain of ``u_h - exact(., t)``."""
    if region is not None and region != _REGION.get(type(space)):
        raise ValueError(f"{type(space).__name__} does not live on region {region}")
    if degree < 6:
        raise ValueError("error quadrature needs degree >= 6")
    rule, coords, w, x = _cell_quadrature(space, degree)
    uh = _discrete_values(coeffs, space, rule, coords)
    ex = np.asarray(exact(x.reshape(-1, 2), t), dtype=float).reshape(uh.shape)
    d = (uh - ex) ** 2
    if d.ndim == 3:
        d = d.sum(axis=-1)
    return float(np.sqrt(np.sum(w * d)))


def h1_seminorm_error(coeffs, space, exact_grad, t, degree=ERROR_DEGREE):
    """|u_h - u|_{H1(fluid)} for a MINI field; ``exact_grad`` returns (m, 2, 2)."""
    if not isinstance(space, StokesVelocitySpace):
        raise TypeError("H1 error is defined for the Stokes velocity only")
    rule, coords, w, x = _cell_quadrature(space, degree)
    coeffs = np.asarray(coeffs, dtype=float)
    _, du = kernels.mini_eval(coords, coeffs[space.cell_dofs], rule.points)
    g = np.asarray(exact_grad(x.reshape(-1, 2), t), dtype=float).reshape(du.shape)
    return float(np.sqrt(np.sum(w * np.sum((du - g) ** 2, axis=(-2, -1)))))


def interface_jump_norm(mesh, spaces, u_f, u_p, degree=ERROR_DEGREE):
    """L2(interface) norm of ``(u_fh - u_ph) . n_f``."""
    geo = interface_geometry(mesh)
    if len(geo.edges) == 0:
        return 0.0
    Vf, _, Vp, _ = spaces
    rule = quad_edge(degree)
    dofs = Vf.vertex_dofs(geo.vertices)  # (ni, 2, 2); bubbles vanish on edges
    un = np.asarray(u_f, dtype=float)[dofs] @ geo.normal  # (ni, 2)
    fluid = un @ rule.points.T  # (ni, nq)
    porous = (np.asarray(u_p, dtype=float)[Vp.edge_index[geo.edges]] * geo.sigma / geo.lengths)[:, None]
    w = geo.lengths[:, None] * rule.weights[None, :]
    return float(np.sqrt(np.sum(w * (fluid - porous) ** 2)))


def eoc(errors):
    """log2(e_h / e_{h/2}) between adjacent entries (nan when undefined)."""
    e = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.log2(e[:-1] / e[1:])
    return np.where(np.isfinite(r), r, np.nan)


# ---------------------------------------------------------------------------
# convergence study


@dataclass(frozen=True)
class StudyRow:
    n: int
    h: float
    tau: float
    err_uf: float
    err_up: float
    err_phi: float
    err_uf_h1: float
    jump: float
    wall_s: float


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)
    failure: str | None = None

    def __post_init__(self):
        h = [r.h for r in self.rows]
        for a, b in zip(h, h[1:]):
            if not math.isclose(a, 2.0 * b, rel_tol=1e-12):
                raise ValueError("report rows must halve h from one row to the next")

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def rates(self, name):
        return eoc(self.column(name))

    @property
    def ok(self):
        return self.failure is None


def mesh_size(n):
    """Grid spacing of the n x n-per-unit structured mesh (Table 1 convention)."""
    return 1.0 / n


def h_to_n(h):
    n = round(1.0 / h)
    if n < 2 or not math.isclose(n * h, 1.0, rel_tol=1e-9):
        raise ValueError(f"h={h} is not 1/n for an integer n >= 2")
    return n


def halving(ns):
    return all(b == 2 * a for a, b in zip(ns, ns[1:]))


def final_errors(mesh, spaces, case, state, n, tau, wall_s=0.0, degree=ERROR_DEGREE):
    """Study row for a state at its own time ``state.t``."""
    Vf, _, Vp, Qp = spaces
    t = state.t
    return StudyRow(
        n=n,
        h=mesh_size(n),
        tau=tau,
        err_uf=l2_error(state.u_f, Vf, case.u_f, t, degree=degree),
        err_up=l2_error(state.u_p, Vp, case.u_p, t, degree=degree),
        err_phi=l2_error(state.phi_p, Qp, case.phi_p, t, degree=degree),
        err_uf_h1=h1_seminorm_error(state.u_f, Vf, case.grad_u_f, t, degree=degree),
        jump=interface_jump_norm(mesh, spaces, state.u_f, state.u_p, degree=degree),
        wall_s=wall_s,
    )


def solve_level(n, params=None, T=1.0, tau=None, domain=None, case="example51", rtol=SOLVE_RTOL):
    """Transient solve on the level-n mesh; returns (mesh, spaces, case, state, tau)."""
    params = ModelParams() if params is None else params
    domain = example51_domain() if domain is None else domain
    h = mesh_size(n)
    tau = h * h if tau is None else tau
    mesh = build_structured_mesh(domain, n)
    spaces = build_spaces(mesh)
    mc = CASES[case](params) if isinstance(case, str) else case
    grid = TimeGrid.from_final_time(T, tau)
    scheme = DecoupledScheme(mesh, spaces, params, grid.tau, mc, rtol=rtol)
    st = run_transient(mesh, spaces, params, grid, mc, scheme=scheme)
    return mesh, spaces, mc, st, grid.tau


def run_level(n, params=None, T=1.0, tau=None, domain=None, case="example51", rtol=SOLVE_RTOL, degree=ERROR_DEGREE):
    """One transient solve on the level-n mesh; errors at the final time."""
    start = time.perf_counter()
    mesh, spaces, mc, st, tau = solve_level(n, params, T, tau, domain, case, rtol)
    row = final_errors(mesh, spaces, mc, st, n, tau, degree=degree)
    row = replace(row, wall_s=time.perf_counter() - start)
    log.info("n=%d h=%.4g: uf %.4e up %.4e phi %.4e (%.1fs)", n, row.h, row.err_uf, row.err_up, row.err_phi, row.wall_s)
    return row


def _level(args):
    n, kwargs = args
    try:
        return run_level(n, **kwargs)
    except SolverError as exc:
        return SolverError(f"h=1/{n}: {exc}")


def run_convergence_study(ns=(4, 8, 16, 32), params=None, T=1.0, jobs=1, domain=None, on_row=None, **level_kwargs):
    """Transient solves over a halving sequence of levels ``n`` (h = 1/n).

    Levels run in a process pool when ``jobs > 1``; rows are merged in level
    order. A solver failure stops the report at the failing level and is
    recorded in ``report.failure``.
    """
    ns = [int(n) for n in ns]
    if not ns or not halving(ns):
        raise ValueError(f"levels must double from one entry to the next, got {ns}")
    kwargs = dict(params=params, T=T, domain=domain, **level_kwargs)
    work = [(n, kwargs) for n in ns]
    jobs = max(1, min(int(jobs or os.cpu_count() or 1), len(ns)))
    if jobs == 1:
        results = (_level(w) for w in work)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=jobs)
        results = pool.map(_level, work)
    report = ConvergenceReport()
    try:
        for res in results:
            if isinstance(res, Exception):
                report.failure = str(res)
                break
            report.rows.append(res)
            if on_row is not None:
                on_row(res)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return report


def run_ritz_level(n, params=None, t=0.0, domain=None, case="example51", rtol=SOLVE_RTOL, degree=ERROR_DEGREE):
    """Steady coupled projection of the exact fields at time ``t`` on level n.

    The row reuses :class:`StudyRow`; ``tau`` is 0 (no time stepping).
    """
    params = ModelParams() if params is None else params
    domain = example51_domain() if domain is None else domain
    start = time.perf_counter()
    mesh = build_structured_mesh(domain, n)
    spaces = build_spaces(mesh)
    mc = CASES[case](params) if isinstance(case, str) else case
    st = ritz_projection(mesh, spaces, params, mc, t, rtol=rtol)
    row = final_errors(mesh, spaces, mc, st, n, 0.0, degree=degree)
    return replace(row, wall_s=time.perf_counter() - start)


def run_ritz_study(ns=(4, 8, 16, 32), params=None, t=0.0, **kwargs):
    ns = [int(n) for n in ns]
    if not ns or not halving(ns):
        raise ValueError(f"levels must double from one entry to the next, got {ns}")
    return ConvergenceReport([run_ritz_level(n, params, t, **kwargs) for n in ns])
