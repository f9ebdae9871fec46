"""
Steady-state optimization problem and its reference solver.

The program is posed on the dc-GFM setpoint deviations ``u`` with outputs
tied to inputs through the quasi-static map ``y = K_G u + w``::

    min  f(u, y)
    s.t. I_min <= y <= I_max
         V_min <= V_nom + u <= V_max
         A_const u <= b_const            (optional)

Costs are convex quadratics. Substituting the output map gives a QP in ``u``
which :func:`reference_qp_solve` solves with a primal active-set method; it
serves as the ground truth the closed loop is compared against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linprog

from .grid import QuasiStaticModel

Array = NDArray[np.float64]

PSD_TOL = 1e-8


class InfeasibleProblemError(ValueError):
    """No setpoint satisfies all limits.

    Attributes
    ----------
    constraint : str
        Name of the most violated row at the least-violation point.
    violation : float
        Total violation (sum over rows) at that point.
    farkas : ndarray
        Nonnegative row multipliers ``z`` with ``z @ A ~ 0`` and ``z @ b < 0``.
    """

    def __init__(self, message, constraint="", violation=0.0, farkas=None):
        super().__init__(message)
        self.constraint = constraint
        self.violation = violation
        self.farkas = farkas if farkas is not None else np.zeros(0)


class NonConvexProblemError(ValueError):
    pass


def _check_psd(name: str, P: Array):
    if not np.allclose(P, P.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(P).max(initial=0.0))):
        raise NonConvexProblemError(f"{name} must be symmetric")
    if P.size == 0:
        return
    eig = np.linalg.eigvalsh(0.5 * (P + P.T))
    norm = max(np.abs(eig).max(), 1e-300)
    if eig[0] < -PSD_TOL * norm:
        raise NonConvexProblemError(f"{name} is indefinite (min eigenvalue {eig[0]:.3e})")


@dataclass
class QuadraticCost:
    """``f(u, y) = 1/2 u'P_u u + q_u'u + 1/2 y'P_y y + q_y'y + u'C_uy y``.

    ``C_uy`` is zero for all but the exact loss objective; ``P_u`` and
    ``P_y`` must be symmetric positive semidefinite.
    """

    P_u: Array
    q_u: Array
    P_y: Array
    q_y: Array
    C_uy: Optional[Array] = None
    name: str = "custom"

    def __post_init__(self):
        self.P_u = np.atleast_2d(np.asarray(self.P_u, dtype=float))
        self.P_y = np.atleast_2d(np.asarray(self.P_y, dtype=float))
        self.q_u = np.asarray(self.q_u, dtype=float).reshape(-1)
        self.q_y = np.asarray(self.q_y, dtype=float).reshape(-1)
        n = self.q_u.size
        if self.C_uy is None:
            self.C_uy = np.zeros((n, n))
        self.C_uy = np.atleast_2d(np.asarray(self.C_uy, dtype=float))
        for arr in (self.P_u, self.P_y, self.C_uy):
            if arr.shape != (n, n):
                raise ValueError(f"cost matrices must be {n}x{n}, got {arr.shape}")
        if self.q_y.size != n:
            raise ValueError("q_u and q_y lengths differ")
        _check_psd("P_u", self.P_u)
        _check_psd("P_y", self.P_y)

    @property
    def n(self) -> int:
        return self.q_u.size

    def value(self, u, y) -> float:
        u = np.asarray(u, dtype=float)
        y = np.asarray(y, dtype=float)
        return float(0.5 * u @ self.P_u @ u + self.q_u @ u + 0.5 * y @ self.P_y @ y
                     + self.q_y @ y + u @ self.C_uy @ y)

    def gradient(self, u, y) -> tuple[Array, Array]:
        """Partial gradients ``(df/du, df/dy)``."""
        u = np.asarray(u, dtype=float)
        y = np.asarray(y, dtype=float)
        return (self.P_u @ u + self.q_u + self.C_uy @ y,
                self.P_y @ y + self.q_y + self.C_uy.T @ u)

    def reduced(self, model: QuasiStaticModel) -> tuple[Array, Array, float]:
        """Hessian, linear term and constant of ``g(u) = f(u, K_G u + w)``."""
        K, w = model.K_G, model.w
        H = self.P_u + K.T @ self.P_y @ K + self.C_uy @ K + K.T @ self.C_uy.T
        H = 0.5 * (H + H.T)
        c = self.q_u + K.T @ (self.P_y @ w + self.q_y) + self.C_uy @ w
        const = 0.5 * w @ self.P_y @ w + self.q_y @ w
        return H, c, float(const)


def cost_gradient(cost: QuadraticCost, u, y) -> Array:
    """Stacked ``(df/du, df/dy)``."""
    gu, gy = cost.gradient(u, y)
    return np.concatenate([gu, gy])


# -- cost templates --------------------------------------------------------

def loss_cost(n: int, V_nom: float) -> QuadraticCost:
    """Power delivered by the dc-GFM stations, ``(V_nom 1 + u)'y``.

    With fixed ac-GFM power this equals network losses plus a constant.
    """
    return QuadraticCost(P_u=np.zeros((n, n)), q_u=np.zeros(n), P_y=np.zeros((n, n)),
                         q_y=np.full(n, float(V_nom)), C_uy=np.eye(n), name="loss")


def loss_surrogate_cost(K_G: Array) -> QuadraticCost:
    """``1/2 u'K_G u``; penalizes setpoint deviations through the reduced network."""
    n = K_G.shape[0]
    return QuadraticCost(P_u=0.5 * (K_G + K_G.T), q_u=np.zeros(n), P_y=np.zeros((n, n)),
                         q_y=np.zeros(n), name="loss_surrogate")


TABLE_II_P_Y = np.array([2.4, 5.7, 3.0, 4.2, 3.6, 4.8])
TABLE_II_Q_Y = 1000.0 * np.array([30.0, 75.0, 36.0, 54.0, 45.0, 63.0])


def quadratic_output_cost(P_y_diag=TABLE_II_P_Y, q_y=TABLE_II_Q_Y) -> QuadraticCost:
    P_y_diag = np.asarray(P_y_diag, dtype=float)
    n = P_y_diag.size
    return QuadraticCost(P_u=np.zeros((n, n)), q_u=np.zeros(n), P_y=np.diag(P_y_diag),
                         q_y=np.asarray(q_y, dtype=float), name="quadratic")


def proportional_cost(I_star, weight: float = 1000.0) -> QuadraticCost:
    """``weight/2 * sum(y_i^2 / I_star_i)``; optimal currents scale with rating."""
    I_star = np.asarray(I_star, dtype=float)
    n = I_star.size
    return QuadraticCost(P_u=np.zeros((n, n)), q_u=np.zeros(n), P_y=np.diag(weight / I_star),
                         q_y=np.zeros(n), name="proportional")


# -- limits and KKT bookkeeping -------------------------------------------

@dataclass
class OperatingLimits:
    I_min: Array
    I_max: Array
    V_min: Array
    V_max: Array
    A_const: Array = field(default_factory=lambda: np.zeros((0, 0)))
    b_const: Array = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name in ("I_min", "I_max", "V_min", "V_max"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        n = self.I_min.size
        if not all(v.size == n for v in (self.I_max, self.V_min, self.V_max)):
            raise ValueError("limit vectors must have equal length")
        self.A_const = np.asarray(self.A_const, dtype=float).reshape(-1, n) \
            if np.size(self.A_const) else np.zeros((0, n))
        self.b_const = np.asarray(self.b_const, dtype=float).reshape(-1)
        if self.A_const.shape[0] != self.b_const.size:
            raise ValueError("A_const and b_const row counts differ")
        if np.any(self.I_min > self.I_max):
            raise ValueError("I_min exceeds I_max")
        if np.any(self.V_min > self.V_max):
            raise ValueError("V_min exceeds V_max")

    @property
    def n(self) -> int:
        return self.I_min.size

    def check_nominal(self, V_nom: float):
        if np.any(self.V_min > V_nom) or np.any(self.V_max < V_nom):
            raise ValueError("nominal voltage lies outside the voltage limits")

    @classmethod
    def symmetric(cls, I_star, V_nom: float, v_band=(0.95, 1.05), i_scale: float = 1.0):
        I_star = np.asarray(I_star, dtype=float)
        n = I_star.size
        return cls(I_min=-i_scale * I_star, I_max=i_scale * I_star,
                   V_min=np.full(n, v_band[0] * V_nom), V_max=np.full(n, v_band[1] * V_nom))


@dataclass
class KktResiduals:
    stationarity: float
    complementarity: float
    feasibility: float
    dual_negativity: float
    relative: dict = field(default_factory=dict)
    consistent: bool = True

    @property
    def worst(self) -> float:
        """Largest dimensionless residual."""
        return max(self.relative.values()) if self.relative else 0.0


@dataclass
class KktPoint:
    u: Array
    y: Array
    zeta_max: Array
    zeta_min: Array
    lambda_max: Array
    lambda_min: Array
    mu: Array = field(default_factory=lambda: np.zeros(0))
    residuals: Optional[KktResiduals] = None
    objective: float = float("nan")

    @property
    def duals(self) -> Array:
        return np.concatenate([self.zeta_max, self.zeta_min, self.lambda_max, self.lambda_min])


@dataclass
class _Rows:
    A: Array
    b: Array
    names: list
    kind: NDArray[np.int64]   # 0 zeta_max, 1 zeta_min, 2 lambda_max, 3 lambda_min, 4 mu
    slot: NDArray[np.int64]   # station (or const row) index


def _constraint_rows(limits: OperatingLimits, model: QuasiStaticModel) -> _Rows:
    K, w, V = model.K_G, model.w, model.V_nom
    n = model.n
    eye = np.eye(n)
    blocks = [
        (K, limits.I_max - w, "I_max"),
        (-K, w - limits.I_min, "I_min"),
        (eye, limits.V_max - V, "V_max"),
        (-eye, V - limits.V_min, "V_min"),
    ]
    A, b, names, kind, slot = [], [], [], [], []
    for k, (Ak, bk, label) in enumerate(blocks):
        for i in range(n):
            if np.isfinite(bk[i]):
                A.append(Ak[i]); b.append(bk[i]); names.append(f"{label}[{i}]")
                kind.append(k); slot.append(i)
    for j in range(limits.A_const.shape[0]):
        A.append(limits.A_const[j]); b.append(limits.b_const[j]); names.append(f"A_const[{j}]")
        kind.append(4); slot.append(j)
    return _Rows(np.array(A, dtype=float).reshape(-1, n), np.array(b, dtype=float), names,
                 np.array(kind, dtype=np.int64), np.array(slot, dtype=np.int64))


def _scales(H, c, limits, model):
    span_V = limits.V_max - limits.V_min
    span_V = span_V[np.isfinite(span_V)]
    U = float(span_V.max()) if span_V.size and span_V.max() > 0 else model.V_nom
    K_norm = float(np.linalg.norm(model.K_G, 2)) if model.n else 1.0
    span_I = limits.I_max - limits.I_min
    span_I = span_I[np.isfinite(span_I)]
    I = float(span_I.max()) if span_I.size and span_I.max() > 0 else max(1.0, K_norm * U)
    G = max(float(np.abs(c).max(initial=0.0)), float(np.linalg.norm(H, 2)) * U, 1e-12)
    return G, U, I, max(K_norm, 1e-300)


def problem_scale(cost: QuadraticCost, limits: OperatingLimits, model: QuasiStaticModel) -> float:
    """Gradient magnitude over the voltage box; the unit residuals are measured in."""
    H, c, _ = cost.reduced(model)
    return _scales(H, c, limits, model)[0]


def kkt_residual(cost: QuadraticCost, limits: OperatingLimits, model: QuasiStaticModel,
                 point: KktPoint) -> KktResiduals:
    """Residuals of the KKT conditions at ``point``.

    ``relative`` holds each residual in dimensionless form: stationarity over
    the gradient scale, complementarity over gradient scale times voltage
    span, feasibility over the current or voltage span, and negative duals
    over their natural scale.
    """
    u, y = np.asarray(point.u, dtype=float), np.asarray(point.y, dtype=float)
    K, V = model.K_G, model.V_nom
    consistent = bool(np.allclose(y, K @ u + model.w, rtol=1e-9,
                                  atol=1e-9 * max(1.0, np.abs(y).max(initial=0.0))))
    gu, gy = cost.gradient(u, y)
    mu = np.asarray(point.mu, dtype=float) if np.size(point.mu) else np.zeros(limits.A_const.shape[0])
    station = gu + K.T @ gy + K.T @ (point.zeta_max - point.zeta_min) \
        + (point.lambda_max - point.lambda_min) + limits.A_const.T @ mu
    stationarity = float(np.abs(station).max(initial=0.0))

    slack_I_max = np.where(np.isfinite(limits.I_max), y - limits.I_max, -np.inf)
    slack_I_min = np.where(np.isfinite(limits.I_min), limits.I_min - y, -np.inf)
    slack_V_max = np.where(np.isfinite(limits.V_max), V + u - limits.V_max, -np.inf)
    slack_V_min = np.where(np.isfinite(limits.V_min), limits.V_min - V - u, -np.inf)
    slack_A = limits.A_const @ u - limits.b_const

    def comp(d, s):
        d = np.asarray(d, dtype=float)
        with np.errstate(invalid="ignore"):
            prod = np.where(np.isfinite(s), d * s, np.where(d == 0, 0.0, np.inf))
        return float(np.abs(prod).max(initial=0.0))

    comp_I = max(comp(point.zeta_max, slack_I_max), comp(point.zeta_min, slack_I_min))
    comp_V = max(comp(point.lambda_max, slack_V_max), comp(point.lambda_min, slack_V_min),
                 comp(mu, slack_A))
    feas_I = max(float(np.max(slack_I_max, initial=0.0)), float(np.max(slack_I_min, initial=0.0)), 0.0)
    feas_V = max(float(np.max(slack_V_max, initial=0.0)), float(np.max(slack_V_min, initial=0.0)),
                 float(np.max(slack_A, initial=0.0)), 0.0)
    neg_z = max(0.0, -float(np.min(np.concatenate([point.zeta_max, point.zeta_min]), initial=0.0)))
    neg_l = max(0.0, -float(np.min(np.concatenate([point.lambda_max, point.lambda_min, mu]),
                                   initial=0.0)))

    H, c, _ = cost.reduced(model)
    G, U, I, K_norm = _scales(H, c, limits, model)
    relative = {
        "stationarity": stationarity / G,
        "complementarity": max(comp_I, comp_V) / (G * U),
        "feasibility": max(feas_I / I, feas_V / U),
        "dual_negativity": max(neg_z * K_norm, neg_l) / G,
    }
    return KktResiduals(stationarity=stationarity, complementarity=max(comp_I, comp_V),
                        feasibility=max(feas_I, feas_V), dual_negativity=max(neg_z, neg_l),
                        relative=relative, consistent=consistent)


def _point_from_multipliers(u, rows: _Rows, mult, limits, model, cost) -> KktPoint:
    n = model.n
    duals = np.zeros((4, n))
    mu = np.zeros(limits.A_const.shape[0])
    for r, val in enumerate(mult):
        if rows.kind[r] == 4:
            mu[rows.slot[r]] += val
        else:
            duals[rows.kind[r], rows.slot[r]] += val
    y = model.K_G @ u + model.w
    point = KktPoint(u=u, y=y, zeta_max=duals[0], zeta_min=duals[1], lambda_max=duals[2],
                     lambda_min=duals[3], mu=mu, objective=cost.value(u, y))
    point.residuals = kkt_residual(cost, limits, model, point)
    return point


# -- reference solver ------------------------------------------------------

def _phase_one(A: Array, b: Array, names) -> Array:
    """Feasible point of ``A u <= b`` or an infeasibility certificate."""
    n = A.shape[1]
    if A.shape[0] == 0:
        return np.zeros(n)
    res = linprog(np.zeros(n), A_ub=A, b_ub=b, bounds=[(None, None)] * n, method="highs")
    if res.status == 0:
        return res.x
    # least total violation; its row duals certify infeasibility
    k = A.shape[0]
    c = np.concatenate([np.zeros(n), np.ones(k)])
    A_el = np.hstack([A, -np.eye(k)])
    el = linprog(c, A_ub=A_el, b_ub=b, bounds=[(None, None)] * n + [(0, None)] * k,
                 method="highs")
    if el.status != 0:
        raise InfeasibleProblemError("phase-one problem could not be solved")
    s = el.x[n:]
    worst = int(np.argmax(s))
    farkas = -el.ineqlin.marginals
    raise InfeasibleProblemError(
        f"limits are infeasible: total violation {s.sum():.6g}, worst row {names[worst]}",
        constraint=names[worst], violation=float(s.sum()), farkas=farkas)


def _null_space(A: Array, n: int, tol: float = 1e-12) -> Array:
    if A.shape[0] == 0:
        return np.eye(n)
    _, s, Vt = np.linalg.svd(A)
    rank = int(np.sum(s > tol * max(s[0], 1e-300)))
    return Vt[rank:].T


def _active_set(H, c, A, b, x, max_iter=None, min_norm=True):
    """Primal active-set method for ``min 1/2 x'Hx + c'x, A x <= b`` from a feasible ``x``.

    Rows of ``A`` are assumed normalized. Handles positive semidefinite
    ``H`` by stepping along zero-curvature descent directions until a
    constraint blocks.
    """
    n = H.shape[0]
    k = A.shape[0]
    max_iter = max_iter or 50 * (k + n + 1)
    hnorm = max(np.linalg.norm(H, 2), 1e-300)
    scale_x = max(1.0, np.abs(x).max(initial=0.0), np.abs(b).max(initial=0.0))
    feas_tol = 1e-11 * scale_x
    step_tol = 1e-13 * scale_x

    def independent(rows):
        keep = []
        for r in rows:
            trial = keep + [r]
            if np.linalg.matrix_rank(A[trial], tol=1e-10) == len(trial):
                keep.append(r)
        return keep

    active = np.flatnonzero(b - A @ x <= feas_tol)
    W = independent(list(active))
    for _ in range(max_iter):
        g = H @ x + c
        Z = _null_space(A[W], n)
        p = np.zeros(n)
        unbounded_dir = False
        if Z.shape[1]:
            Hz = Z.T @ H @ Z
            gz = Z.T @ g
            lam, Q = np.linalg.eigh(0.5 * (Hz + Hz.T))
            if lam[0] < -1e-9 * hnorm:
                raise NonConvexProblemError("reduced Hessian is indefinite")
            pos = lam > 1e-10 * hnorm
            qg = Q.T @ gz
            flat = Q[:, ~pos] @ qg[~pos]
            gscale = max(np.abs(g).max(initial=0.0), np.abs(c).max(initial=0.0), 1e-300)
            if np.abs(flat).max(initial=0.0) > 1e-10 * gscale:
                p = -Z @ flat
                unbounded_dir = True
            else:
                p = -Z @ (Q[:, pos] @ (qg[pos] / lam[pos]))
        if np.abs(p).max(initial=0.0) <= step_tol and not unbounded_dir:
            if not W:
                return x, W, np.zeros(0)
            AW = A[W]
            lam_w, *_ = np.linalg.lstsq(AW.T, -g, rcond=None)
            j = int(np.argmin(lam_w))
            gscale = max(np.abs(g).max(initial=0.0), np.abs(c).max(initial=0.0), 1e-300)
            if lam_w[j] >= -1e-10 * gscale:
                if min_norm:
                    # multipliers of a convex QP are shared by all its minimizers
                    x = _min_norm_optimum(H, c, A, b, x)
                return x, W, lam_w
            W.pop(j)
            continue
        Ap = A @ p
        alpha = np.inf if unbounded_dir else 1.0
        block = None
        for r in range(k):
            if r in W or Ap[r] <= 1e-14 * np.abs(p).max():
                continue
            ar = max(b[r] - A[r] @ x, 0.0) / Ap[r]
            if ar < alpha:
                alpha, block = ar, r
        if not np.isfinite(alpha):
            raise NonConvexProblemError("objective is unbounded below on the feasible set")
        x = x + alpha * p
        if block is not None:
            W = independent(W + [block])
    raise RuntimeError("active-set iteration limit reached")


def _min_norm_optimum(H, c, A, b, x):
    """Smallest-norm point of the optimal face ``{Hz = Hx, c'z = c'x, Az <= b}``."""
    n = x.size
    N = _null_space(H, n, tol=1e-10)
    if N.shape[1] and np.abs(c @ N).max() > 1e-12 * max(np.abs(c).max(), 1e-300):
        N = N @ _null_space((c @ N)[None, :], N.shape[1])
    if not N.shape[1]:
        return x
    AN = A @ N
    norms = np.linalg.norm(AN, axis=1)
    keep = norms > 1e-12
    An = AN[keep] / norms[keep, None]
    slack = np.maximum(b[keep] - A[keep] @ x, 0.0) / norms[keep]
    z, _, _ = _active_set(np.eye(N.shape[1]), N.T @ x, An, slack, np.zeros(N.shape[1]),
                          min_norm=False)
    return x + N @ z


def reference_qp_solve(cost: QuadraticCost, limits: OperatingLimits,
                       model: QuasiStaticModel) -> KktPoint:
    """Solve the steady-state program for the given quasi-static model.

    Raises
    ------
    InfeasibleProblemError
        If no setpoint satisfies the limits.
    NonConvexProblemError
        If the substituted objective is not convex.
    """
    H, c, _ = cost.reduced(model)
    eig = np.linalg.eigvalsh(H) if H.size else np.zeros(1)
    if eig[0] < -PSD_TOL * max(np.abs(eig).max(), 1e-300):
        raise NonConvexProblemError(f"reduced Hessian is indefinite (min eigenvalue {eig[0]:.3e})")
    rows = _constraint_rows(limits, model)
    norms = np.linalg.norm(rows.A, axis=1) if rows.A.size else np.zeros(0)
    norms = np.where(norms > 0, norms, 1.0)
    A = rows.A / norms[:, None]
    b = rows.b / norms
    x0 = _phase_one(A, b, rows.names)
    x0 = _polish_feasible(A, b, x0)
    x, W, lam_w = _active_set(H, c, A, b, x0)
    mult = np.zeros(len(b))
    for r, val in zip(W, lam_w):
        mult[r] = max(val, 0.0) / norms[r]
    return _point_from_multipliers(x, rows, mult, limits, model, cost)


def _polish_feasible(A, b, x):
    """Pull a phase-one point strictly onto the feasible side of tiny violations."""
    for _ in range(5):
        viol = A @ x - b
        r = int(np.argmax(viol)) if viol.size else 0
        if not viol.size or viol[r] <= 0:
            break
        x = x - viol[r] * A[r]
    return x


def enumerate_active_sets(cost: QuadraticCost, limits: OperatingLimits,
                          model: QuasiStaticModel, tol: float = 1e-9) -> KktPoint:
    """Exhaustive KKT search over all candidate active sets (small ``n`` only).

    Every subset of at most ``n`` constraint rows is tried as an equality
    system; candidates that are primal feasible with nonnegative multipliers
    are KKT points, and the best objective (then smallest norm) wins.
    """
    H, c, _ = cost.reduced(model)
    rows = _constraint_rows(limits, model)
    n = model.n
    k = rows.A.shape[0]
    if n > 4:
        raise ValueError("enumeration is limited to n <= 4")
    bscale = max(1.0, np.abs(rows.b).max(initial=0.0))
    gscale = max(1.0, np.abs(c).max(initial=0.0), np.linalg.norm(H, 2) * bscale)
    best = None
    for size in range(0, min(n, k) + 1):
        for S in itertools.combinations(range(k), size):
            S = list(S)
            AS = rows.A[S]
            M = np.block([[H, AS.T], [AS, np.zeros((size, size))]])
            rhs = np.concatenate([-c, rows.b[S]])
            sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
            if np.abs(M @ sol - rhs).max(initial=0.0) > tol * max(gscale, bscale):
                continue
            x, lam = sol[:n], sol[n:]
            if np.any(lam < -tol * gscale):
                continue
            if np.any(rows.A @ x - rows.b > tol * bscale):
                continue
            obj = 0.5 * x @ H @ x + c @ x
            key = (obj, float(np.linalg.norm(x)))
            if best is None or key[0] < best[0][0] - tol * max(1.0, abs(key[0])) or (
                    abs(key[0] - best[0][0]) <= tol * max(1.0, abs(key[0])) and key[1] < best[0][1]):
                mult = np.zeros(k)
                mult[S] = np.maximum(lam, 0.0)
                best = (key, x, mult)
    if best is None:
        raise InfeasibleProblemError("no KKT point found by enumeration")
    _, x, mult = best
    return _point_from_multipliers(x, rows, mult, limits, model, cost)


def format_kkt_report(point: KktPoint) -> str:
    """Key-value text record of an optimum (9 significant digits)."""
    def vec(v):
        return ", ".join(f"{x:.9g}" for x in np.asarray(v, dtype=float))

    lines = [
        f"objective = {point.objective:.9g}",
        f"u = {vec(point.u)}",
        f"y = {vec(point.y)}",
        f"zeta_max = {vec(point.zeta_max)}",
        f"zeta_min = {vec(point.zeta_min)}",
        f"lambda_max = {vec(point.lambda_max)}",
        f"lambda_min = {vec(point.lambda_min)}",
    ]
    if np.size(point.mu):
        lines.append(f"mu = {vec(point.mu)}")
    if point.residuals is not None:
        r = point.residuals
        lines += [
            f"stationarity = {r.stationarity:.9g}",
            f"complementarity = {r.complementarity:.9g}",
            f"feasibility = {r.feasibility:.9g}",
            f"dual_negativity = {r.dual_negativity:.9g}",
            f"worst_relative = {r.worst:.9g}",
        ]
    return "\n".join(lines) + "\n"
