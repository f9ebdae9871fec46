"""
Projected primal-dual secondary controller.

The controller integrates the Lagrangian saddle flow of the steady-state
program using measured station currents ``u_y`` instead of the model
output, so the affine offset ``w`` never has to be known::

    dx_p/dt = -K_p ([I  K_G'] grad f(x_p, u_y) + K_G'(z_max - z_min) + l_max - l_min)
    dz_max/dt = K_dI Psi(u_y - I_max, z_max)
    dz_min/dt = K_dI Psi(I_min - u_y, z_min)
    dl_max/dt = K_dV Psi(V_nom + x_p - V_max, l_max)
    dl_min/dt = K_dV Psi(V_min - V_nom - x_p, l_min)

``Psi`` lets a dual decrease only while it is positive, which keeps the
dual orthant invariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from .grid import ConductanceBlocks, reduce_conductance
from .optimizer import KktPoint, OperatingLimits, QuadraticCost

Array = NDArray[np.float64]
GradientFn = Callable[[Array, Array], tuple[Array, Array]]


def psi(a: float, b: float) -> float:
    """``a`` if ``b > 0`` else ``max(0, a)``."""
    return a if b > 0 else max(0.0, a)


def Psi(a, b) -> Array:
    """Elementwise :func:`psi`."""
    a = np.asarray(a, dtype=float)
    return np.where(np.asarray(b) > 0, a, np.maximum(a, 0.0))


def _diag(x, n: int, name: str) -> Array:
    x = np.asarray(x, dtype=float)
    d = np.full(n, float(x)) if x.ndim == 0 else (np.diag(x).copy() if x.ndim == 2 else x.copy())
    if d.size != n:
        raise ValueError(f"{name} must have {n} diagonal entries")
    if np.any(d <= 0):
        raise ValueError(f"{name} must be positive definite")
    return d


@dataclass
class ControllerGains:
    """Diagonal gains, stored as their diagonals.

    Scalars, vectors and diagonal matrices are all accepted.
    """

    K_p: Array
    K_d_I: Array
    K_d_V: Array
    n: int = 0
    K_d_A: float = 10.0   # gain for optional extra constraint rows

    def __post_init__(self):
        if not self.n:
            sizes = [np.shape(v)[0] for v in (self.K_p, self.K_d_I, self.K_d_V) if np.ndim(v)]
            if not sizes:
                raise ValueError("n is required when all gains are scalars")
            self.n = sizes[0]
        n = self.n
        self.K_p = _diag(self.K_p, n, "K_p")
        self.K_d_I = _diag(self.K_d_I, n, "K_d_I")
        self.K_d_V = _diag(self.K_d_V, n, "K_d_V")
        if not self.K_d_A > 0:
            raise ValueError("K_d_A must be positive")

    @property
    def K_d(self) -> Array:
        """Diagonal of ``blkdiag(K_dI, K_dI, K_dV, K_dV)``."""
        return np.concatenate([self.K_d_I, self.K_d_I, self.K_d_V, self.K_d_V])

    def scaled(self, factor: float) -> "ControllerGains":
        return ControllerGains(self.K_p * factor, self.K_d_I * factor, self.K_d_V * factor,
                               n=self.n, K_d_A=self.K_d_A * factor)


@dataclass
class ControllerState:
    x_p: Array
    zeta_max: Array
    zeta_min: Array
    lambda_max: Array
    lambda_min: Array
    mu: Array = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def zeros(cls, n: int, k: int = 0) -> "ControllerState":
        z = np.zeros(n)
        return cls(z.copy(), z.copy(), z.copy(), z.copy(), z.copy(), np.zeros(k))

    @property
    def n(self) -> int:
        return self.x_p.size

    @property
    def x_d(self) -> Array:
        return np.concatenate([self.zeta_max, self.zeta_min, self.lambda_max, self.lambda_min])

    def as_vector(self) -> Array:
        return np.concatenate([self.x_p, self.x_d, self.mu])

    @classmethod
    def from_vector(cls, v: Array, n: int) -> "ControllerState":
        v = np.asarray(v, dtype=float)
        return cls(v[:n].copy(), v[n:2 * n].copy(), v[2 * n:3 * n].copy(),
                   v[3 * n:4 * n].copy(), v[4 * n:5 * n].copy(), v[5 * n:].copy())

    def copy(self) -> "ControllerState":
        return ControllerState.from_vector(self.as_vector(), self.n)


@dataclass
class SensitivityInput:
    """Reported ac-GFM conductances ``G_Pi``, the diagonal of ``U_G``."""

    g_p: Array

    @property
    def U_G(self) -> Array:
        return np.diag(np.asarray(self.g_p, dtype=float))


def construct_sensitivity(blocks: ConductanceBlocks, sens: SensitivityInput) -> tuple[Array, bool]:
    """``K_G = G_N - G_NM (G_M + U_G)^+ G_MN`` and the rank-deficiency flag."""
    K_G, _, singular = reduce_conductance(blocks, sens.U_G)
    return K_G, singular


class PrimalDualController:
    """Right-hand side of the projected flow for fixed cost, limits and gains.

    Works on the stacked vector ``(x_p, x_d, mu)`` so the integrator does not
    allocate state objects per stage.
    """

    def __init__(self, cost: QuadraticCost | GradientFn, limits: OperatingLimits,
                 gains: ControllerGains, V_nom: float):
        self.gradient: GradientFn = cost.gradient if isinstance(cost, QuadraticCost) else cost
        self.limits = limits
        self.gains = gains
        self.V_nom = float(V_nom)
        self.n = limits.n
        self.k = limits.A_const.shape[0]
        if gains.n != self.n:
            raise ValueError("gain dimension does not match limits")

    def rhs(self, v: Array, u_y: Array, K_G: Array) -> Array:
        n, lim, g = self.n, self.limits, self.gains
        x = v[:n]
        zmax, zmin = v[n:2 * n], v[2 * n:3 * n]
        lmax, lmin = v[3 * n:4 * n], v[4 * n:5 * n]
        gu, gy = self.gradient(x, u_y)
        dx = gu + K_G.T @ (gy + zmax - zmin) + lmax - lmin
        out = np.empty_like(v)
        with np.errstate(invalid="ignore"):
            out[n:2 * n] = g.K_d_I * Psi(u_y - lim.I_max, zmax)
            out[2 * n:3 * n] = g.K_d_I * Psi(lim.I_min - u_y, zmin)
            out[3 * n:4 * n] = g.K_d_V * Psi(self.V_nom + x - lim.V_max, lmax)
            out[4 * n:5 * n] = g.K_d_V * Psi(lim.V_min - self.V_nom - x, lmin)
        if self.k:
            mu = v[5 * n:]
            dx = dx + lim.A_const.T @ mu
            out[5 * n:] = g.K_d_A * Psi(lim.A_const @ x - lim.b_const, mu)
        out[:n] = -g.K_p * dx
        return out

    def rk4(self, v: Array, h: float, u_y: Array, K_G: Array) -> Array:
        """One fourth-order step with held inputs, followed by the dual floor."""
        k1 = self.rhs(v, u_y, K_G)
        k2 = self.rhs(v + 0.5 * h * k1, u_y, K_G)
        k3 = self.rhs(v + 0.5 * h * k2, u_y, K_G)
        k4 = self.rhs(v + h * k3, u_y, K_G)
        out = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return self.floor(out)

    def floor(self, v: Array) -> Array:
        v[self.n:] = np.maximum(v[self.n:], 0.0)
        return v


def projected_rhs(state: ControllerState, u_y: Array, K_G: Array, gains: ControllerGains,
                  cost: QuadraticCost | GradientFn, limits: OperatingLimits,
                  V_nom: float) -> ControllerState:
    """Time derivative of ``state`` under held measurements ``u_y``."""
    ctrl = PrimalDualController(cost, limits, gains, V_nom)
    d = ctrl.rhs(state.as_vector(), np.asarray(u_y, dtype=float), np.asarray(K_G, dtype=float))
    return ControllerState.from_vector(d, state.n)


def rk4_step(state: ControllerState, h: float, u_y: Array, K_G: Array, gains: ControllerGains,
             cost, limits: OperatingLimits, V_nom: float) -> ControllerState:
    ctrl = PrimalDualController(cost, limits, gains, V_nom)
    v = ctrl.rk4(state.as_vector(), h, np.asarray(u_y, dtype=float), np.asarray(K_G, dtype=float))
    return ControllerState.from_vector(v, state.n)


def lyapunov_value(state: ControllerState, optimum: KktPoint, gains: ControllerGains) -> float:
    """``1/2 dx_p' K_p^-1 dx_p + 1/2 dx_d' K_d^-1 dx_d`` about ``optimum``."""
    dx = state.x_p - optimum.u
    dd = state.x_d - optimum.duals
    val = 0.5 * float(dx @ (dx / gains.K_p)) + 0.5 * float(dd @ (dd / gains.K_d))
    if np.size(state.mu) and np.size(optimum.mu):
        dm = state.mu - optimum.mu
        val += 0.5 * float(dm @ dm) / gains.K_d_A
    return val


def state_from_point(point: KktPoint) -> ControllerState:
    return ControllerState(point.u.copy(), point.zeta_max.copy(), point.zeta_min.copy(),
                           point.lambda_max.copy(), point.lambda_min.copy(), np.array(point.mu, dtype=float))


def table_ii_gains(case: str, n: int = 6) -> ControllerGains:
    """Primal-dual gains used for the three case studies."""
    if case in ("loss", "loss_surrogate"):
        return ControllerGains(200.0, 25.0, 25.0, n=n)
    if case in ("quadratic", "proportional"):
        return ControllerGains(200.0, 10.0, 10.0, n=n)
    raise ValueError(f"unknown case {case!r}")


def converge_flow(ctrl: PrimalDualController, model_K: Array, output: Callable[[Array], Array],
                  v0: Optional[Array] = None, h: float = 1e-3, t_end: float = 10.0) -> Array:
    """Integrate the flow against a memoryless plant ``y = output(x_p)``.

    Plant is evaluated at every stage, i.e. continuous feedback.
    """
    n = ctrl.n
    v = np.zeros(5 * n + ctrl.k) if v0 is None else np.array(v0, dtype=float)

    def f(z):
        return ctrl.rhs(z, output(z[:n]), model_K)

    for _ in range(int(round(t_end / h))):
        k1 = f(v)
        k2 = f(v + 0.5 * h * k1)
        k3 = f(v + 0.5 * h * k2)
        k4 = f(v + h * k3)
        v = ctrl.floor(v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))
    return v
