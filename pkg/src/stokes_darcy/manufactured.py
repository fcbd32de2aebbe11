"""Exact solutions with closed-form forcings.

All callables take points ``x`` of shape (m, 2) and a scalar time ``t``.
Gradients are returned as (m, 2, 2) with ``g[:, i, j] = d u_i / d x_j``.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

PI = np.pi


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    u_f: Callable
    p_f: Callable
    u_p: Callable
    phi_p: Callable
    f_f: Callable
    f_p: Callable
    du_f_dt: Callable
    dphi_p_dt: Callable
    grad_u_f: Callable
    grad_phi_p: Callable
    div_u_p: Callable
    params: object = None

    def div_u_f(self, x, t):
        g = self.grad_u_f(x, t)
        return g[:, 0, 0] + g[:, 1, 1]


def example51_case(params):
    """Smooth exact solution on fluid (0,1)^2 below porous (0,1)x(1,2).

    The Darcy velocity is recomputed as ``-K grad(phi_p)`` so that other
    conductivities stay consistent; for ``K = I`` it is the textbook field.
    Forcings follow the strong equations for the given parameters.
    """
    nu, S0 = params.nu, params.S0
    k1, k2 = params.K

    def A(x):  # 2 - pi sin(pi x)
        return 2.0 - PI * np.sin(PI * x)

    def dA(x):
        return -PI**2 * np.cos(PI * x)

    def d2A(x):
        return PI**3 * np.sin(PI * x)

    def B(y):  # 1 - y - cos(pi y)
        return 1.0 - y - np.cos(PI * y)

    def dB(y):
        return -1.0 + PI * np.sin(PI * y)

    def d2B(y):
        return PI**2 * np.cos(PI * y)

    def u_f(x, t):
        X, Y = x[:, 0], x[:, 1]
        c = np.cos(t)
        return np.column_stack([
            (X**2 * (Y - 1.0) ** 2 + Y) * c,
            (-2.0 / 3.0 * X * (Y - 1.0) ** 3 + A(X)) * c,
        ])

    def du_f_dt(x, t):
        X, Y = x[:, 0], x[:, 1]
        s = -np.sin(t)
        return np.column_stack([(X**2 * (Y - 1.0) ** 2 + Y) * s, (-2.0 / 3.0 * X * (Y - 1.0) ** 3 + A(X)) * s])

    def grad_u_f(x, t):
        X, Y = x[:, 0], x[:, 1]
        c = np.cos(t)
        g = np.empty((len(X), 2, 2))
        g[:, 0, 0] = 2.0 * X * (Y - 1.0) ** 2 * c
        g[:, 0, 1] = (2.0 * X**2 * (Y - 1.0) + 1.0) * c
        g[:, 1, 0] = (-2.0 / 3.0 * (Y - 1.0) ** 3 + dA(X)) * c
        g[:, 1, 1] = -2.0 * X * (Y - 1.0) ** 2 * c
        return g

    def p_f(x, t):
        X, Y = x[:, 0], x[:, 1]
        return A(X) * np.sin(0.5 * PI * Y) * np.cos(t)

    def f_f(x, t):
        X, Y = x[:, 0], x[:, 1]
        c = np.cos(t)
        lap1 = (2.0 * (Y - 1.0) ** 2 + 2.0 * X**2) * c
        lap2 = (d2A(X) - 4.0 * X * (Y - 1.0)) * c
        dpx = dA(X) * np.sin(0.5 * PI * Y) * c
        dpy = A(X) * 0.5 * PI * np.cos(0.5 * PI * Y) * c
        # u_f is solenoidal, so -div(2 nu D(u)) = -nu lap(u)
        return du_f_dt(x, t) + np.column_stack([-nu * lap1 + dpx, -nu * lap2 + dpy])

    def phi_p(x, t):
        X, Y = x[:, 0], x[:, 1]
        return A(X) * B(Y) * np.cos(t)

    def dphi_p_dt(x, t):
        X, Y = x[:, 0], x[:, 1]
        return -A(X) * B(Y) * np.sin(t)

    def grad_phi_p(x, t):
        X, Y = x[:, 0], x[:, 1]
        c = np.cos(t)
        return np.column_stack([dA(X) * B(Y) * c, A(X) * dB(Y) * c])

    def u_p(x, t):
        g = grad_phi_p(x, t)
        return np.column_stack([-k1 * g[:, 0], -k2 * g[:, 1]])

    def div_u_p(x, t):
        X, Y = x[:, 0], x[:, 1]
        return -(k1 * d2A(X) * B(Y) + k2 * A(X) * d2B(Y)) * np.cos(t)

    def f_p(x, t):
        return S0 * dphi_p_dt(x, t) + div_u_p(x, t)

    return ManufacturedCase(
        name="example51",
        u_f=u_f,
        p_f=p_f,
        u_p=u_p,
        phi_p=phi_p,
        f_f=f_f,
        f_p=f_p,
        du_f_dt=du_f_dt,
        dphi_p_dt=dphi_p_dt,
        grad_u_f=grad_u_f,
        grad_phi_p=grad_phi_p,
        div_u_p=div_u_p,
        params=params,
    )


def zero_case(params=None):
    """Identically zero fields and data."""

    def vec(x, t):
        return np.zeros((len(x), 2))

    def scal(x, t):
        return np.zeros(len(x))

    def ten(x, t):
        return np.zeros((len(x), 2, 2))

    return ManufacturedCase("zero", vec, scal, vec, scal, vec, scal, vec, scal, ten, vec, scal, params)


CASES = {"example51": example51_case, "zero": zero_case}
