"""
Quasi-static dc network model.

Builds the conductance matrix of a multi-terminal dc grid from its cable
topology, eliminates the constant-power (ac-GFM) nodes by Kron reduction and
evaluates the resulting affine map between dc-GFM voltage setpoint deviations
``u`` and dc-GFM output currents ``y``::

    y = K_G u + w

Node ordering is fixed when the topology is built: dc-GFM nodes first, then
ac-GFM nodes. Every vector in this module follows that order. All quantities
are SI (V, A, Ohm, S, W).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]

PINV_RCOND = 1e-12


class InvalidTopologyError(ValueError):
    """Raised when a topology violates a structural invariant."""


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when the interior (ac-GFM) network equations cannot be solved."""


class PlantCollapseError(RuntimeError):
    """Raised when the constant-power network equations have no nearby solution.

    Attributes
    ----------
    node : str
        Id of the ac-GFM node with the largest residual at the last iterate.
    """

    def __init__(self, message: str, node: str):
        super().__init__(message)
        self.node = node


# --------------------------------------------------------------------------
# Topology
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CableParams:
    """Per-km parameters of the fifth-order cable model.

    Only the steady-state reduction is used by the algebraic model: the three
    RL branches collapse to ``r1 || r2 || r3`` and the shunt conductance ``g``
    is split between both cable ends. ``c`` [F/km] and ``l_eq`` [H/km] feed
    the reduced dynamic plant only.
    """

    r1: float
    r2: float
    r3: float
    g: float
    c: float = 0.1616e-6
    l_eq: float = 3e-3

    def __post_init__(self):
        if min(self.r1, self.r2, self.r3) <= 0:
            raise InvalidTopologyError("cable resistances must be positive")
        if self.g < 0 or self.c < 0 or self.l_eq < 0:
            raise InvalidTopologyError("cable g, c and l_eq must be non-negative")

    @property
    def series_resistance(self) -> float:
        """Steady-state series resistance per km [Ohm/km]."""
        return 1.0 / (1.0 / self.r1 + 1.0 / self.r2 + 1.0 / self.r3)


#: Transmission line parameters of the offshore test grid (g in S/km).
TABLE_I_CABLE = CableParams(r1=0.1265, r2=0.1504, r3=0.0178, g=0.1015e-6)


@dataclass(frozen=True)
class Line:
    a: str
    b: str
    length_km: float
    cable: CableParams = TABLE_I_CABLE

    @property
    def resistance(self) -> float:
        return self.length_km * self.cable.series_resistance

    @property
    def shunt(self) -> float:
        """Total shunt conductance of the line [S]."""
        return self.length_km * self.cable.g


@dataclass
class GridTopology:
    """Node partition and cable list of a dc grid.

    Parameters
    ----------
    dcgfm_nodes : sequence of str
        Dispatchable (dc grid-forming) stations, the set N.
    acgfm_nodes : sequence of str
        Constant-power (ac grid-forming) stations, the set M.
    lines : sequence of Line
    ratings : dict, optional
        Apparent power rating ``S_star`` [VA] per node id.
    """

    dcgfm_nodes: Sequence[str]
    acgfm_nodes: Sequence[str]
    lines: Sequence[Line]
    ratings: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.dcgfm_nodes = [str(v) for v in self.dcgfm_nodes]
        self.acgfm_nodes = [str(v) for v in self.acgfm_nodes]
        self.lines = list(self.lines)
        self.ratings = {str(k): float(v) for k, v in self.ratings.items()}
        self._validate()

    @property
    def n(self) -> int:
        return len(self.dcgfm_nodes)

    @property
    def m(self) -> int:
        return len(self.acgfm_nodes)

    @property
    def nodes(self) -> list[str]:
        return list(self.dcgfm_nodes) + list(self.acgfm_nodes)

    def index(self) -> dict[str, int]:
        return {v: k for k, v in enumerate(self.nodes)}

    def rated_currents(self, v_nom: float) -> Array:
        """``I_star = S_star / V_nom`` for the dc-GFM stations [A]."""
        missing = [v for v in self.dcgfm_nodes if v not in self.ratings]
        if missing:
            raise InvalidTopologyError(f"no rating for dc-GFM nodes {missing}")
        return np.array([self.ratings[v] for v in self.dcgfm_nodes]) / v_nom

    def _validate(self):
        nodes = self.nodes
        if self.n < 1:
            raise InvalidTopologyError("at least one dc-GFM node is required")
        if len(set(nodes)) != len(nodes):
            dup = sorted({v for v in nodes if nodes.count(v) > 1})
            raise InvalidTopologyError(f"duplicate or shared node ids: {dup}")
        known = set(nodes)
        for line in self.lines:
            for end in (line.a, line.b):
                if end not in known:
                    raise InvalidTopologyError(f"line endpoint {end!r} is not a declared node")
            if line.a == line.b:
                raise InvalidTopologyError(f"line {line.a}-{line.b} is a self loop")
            if not line.length_km > 0:
                raise InvalidTopologyError(
                    f"line {line.a}-{line.b} has non-positive length {line.length_km}")
        if not _is_connected(nodes, [(l.a, l.b) for l in self.lines]):
            raise InvalidTopologyError("the line graph is not connected")


def _is_connected(nodes, edges) -> bool:
    adj = {v: set() for v in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, stack = {nodes[0]}, [nodes[0]]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(nodes)


# --------------------------------------------------------------------------
# Conductance matrix and Kron reduction
# --------------------------------------------------------------------------

@dataclass
class ConductanceBlocks:
    """Partitioned network conductance matrix.

    ``branch_*`` hold the merged branches (parallel lines between the same
    pair collapse into one) and are used for loss accounting.
    """

    G_N: Array
    G_NM: Array
    G_MN: Array
    G_M: Array
    shunt_G: Array
    branch_from: NDArray[np.int64]
    branch_to: NDArray[np.int64]
    branch_R: Array

    @property
    def n(self) -> int:
        return self.G_N.shape[0]

    @property
    def m(self) -> int:
        return self.G_M.shape[0]

    @property
    def full(self) -> Array:
        return np.block([[self.G_N, self.G_NM], [self.G_MN, self.G_M]])


def build_conductance_blocks(topology: GridTopology) -> ConductanceBlocks:
    """Assemble the node conductance matrix of the steady-state cable network.

    Each line contributes ``1/R`` to the Laplacian and half of its shunt
    conductance to both endpoint diagonals (pi model).
    """
    idx = topology.index()
    size = topology.n + topology.m
    shunt = np.zeros(size)
    branch_g: dict[tuple[int, int], float] = {}
    for line in topology.lines:
        R = line.resistance
        if not R > 0:
            raise InvalidTopologyError(f"line {line.a}-{line.b} has non-positive resistance")
        i, j = sorted((idx[line.a], idx[line.b]))
        branch_g[(i, j)] = branch_g.get((i, j), 0.0) + 1.0 / R
        shunt[i] += 0.5 * line.shunt
        shunt[j] += 0.5 * line.shunt

    G = np.diag(shunt.copy())
    for (i, j), g in branch_g.items():
        G[i, i] += g
        G[j, j] += g
        G[i, j] -= g
        G[j, i] -= g

    pairs = sorted(branch_g)
    n = topology.n
    return ConductanceBlocks(
        G_N=G[:n, :n].copy(),
        G_NM=G[:n, n:].copy(),
        G_MN=G[n:, :n].copy(),
        G_M=G[n:, n:].copy(),
        shunt_G=shunt,
        branch_from=np.array([p[0] for p in pairs], dtype=np.int64),
        branch_to=np.array([p[1] for p in pairs], dtype=np.int64),
        branch_R=np.array([1.0 / branch_g[p] for p in pairs]),
    )


@dataclass
class AcGfmLinearization:
    """Linearization ``I = -G_P V + I_bar`` of the constant-power stations."""

    G_P: Array
    I_bar: Array
    V_bar: Array

    @property
    def g_p(self) -> Array:
        return np.diag(self.G_P).copy()


def linearize_acgfm(P: Array, V_bar: Array) -> AcGfmLinearization:
    """Tangent of ``I = P / V`` at ``V_bar`` for each ac-GFM station."""
    P = np.asarray(P, dtype=float)
    V_bar = np.asarray(V_bar, dtype=float)
    if np.any(V_bar <= 0):
        raise ValueError("linearization voltages must be positive")
    return AcGfmLinearization(G_P=np.diag(P / V_bar**2), I_bar=2.0 * P / V_bar, V_bar=V_bar)


def moore_penrose(A: Array) -> tuple[Array, bool]:
    """SVD pseudoinverse with relative cutoff; flags rank deficiency."""
    if A.size == 0:
        return A.T.copy(), False
    U, s, Vt = np.linalg.svd(A)
    keep = s > PINV_RCOND * s[0]
    pinv = (Vt[keep].T / s[keep]) @ U[:, keep].T
    return pinv, not bool(keep.all())


@dataclass
class QuasiStaticModel:
    K_G: Array
    w: Array
    V_nom: float
    singular: bool = False

    @property
    def n(self) -> int:
        return self.K_G.shape[0]


def reduce_conductance(blocks: ConductanceBlocks, U_G: Array) -> tuple[Array, Array, bool]:
    """Return ``(K_G, G_NM (G_M + U_G)^+, singular)``."""
    if blocks.m == 0:
        return blocks.G_N.copy(), np.zeros((blocks.n, 0)), False
    inv, singular = moore_penrose(blocks.G_M + U_G)
    G_NM_red = blocks.G_NM @ inv
    return blocks.G_N - G_NM_red @ blocks.G_MN, G_NM_red, singular


def kron_reduce(blocks: ConductanceBlocks, lin: AcGfmLinearization, V_nom: float) -> QuasiStaticModel:
    """Eliminate the ac-GFM nodes and return the reduced input-output map."""
    K_G, G_NM_red, singular = reduce_conductance(blocks, lin.G_P)
    w = V_nom * K_G @ np.ones(blocks.n) + G_NM_red @ lin.I_bar
    return QuasiStaticModel(K_G=K_G, w=w, V_nom=V_nom, singular=singular)


def quasi_static_output(model: QuasiStaticModel, u: Array) -> Array:
    return model.K_G @ np.asarray(u, dtype=float) + model.w


def full_network_solve(blocks: ConductanceBlocks, lin: AcGfmLinearization, u: Array,
                       V_nom: float) -> tuple[Array, Array]:
    """Solve the unreduced linearized circuit.

    dc-GFM voltages are imposed at ``V_nom + u``; the ac-GFM voltages follow
    from ``(G_M + G_P) V_M = I_bar - G_MN V_N``.

    Returns
    -------
    y : ndarray
        dc-GFM output currents [A].
    V_M : ndarray
        ac-GFM node voltages [V].
    """
    V_N = V_nom + np.asarray(u, dtype=float)
    if blocks.m == 0:
        return blocks.G_N @ V_N, np.zeros(0)
    A = blocks.G_M + lin.G_P
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= PINV_RCOND * s[0]:
        raise SingularSystemError("interior network matrix G_M + G_P is singular")
    V_M = np.linalg.solve(A, lin.I_bar - blocks.G_MN @ V_N)
    return blocks.G_N @ V_N + blocks.G_NM @ V_M, V_M


def ohmic_loss_from_voltages(blocks: ConductanceBlocks, V: Array) -> float:
    """Dissipated power for the full node voltage vector ``V`` [W]."""
    V = np.asarray(V, dtype=float)
    dV = V[blocks.branch_from] - V[blocks.branch_to]
    return float(np.sum(dV**2 / blocks.branch_R) + np.sum(blocks.shunt_G * V**2))


def ohmic_loss(blocks: ConductanceBlocks, lin: AcGfmLinearization, u: Array, V_nom: float) -> float:
    _, V_M = full_network_solve(blocks, lin, u, V_nom)
    V = np.concatenate([V_nom + np.asarray(u, dtype=float), V_M])
    return ohmic_loss_from_voltages(blocks, V)


def droop_resistances(topology: GridTopology, V_nom: float, fraction: float = 0.05) -> Array:
    """Diagonal droop gains ``R_d = fraction * V_nom / I_rated`` [Ohm]."""
    return np.diag(fraction * V_nom / topology.rated_currents(V_nom))


def droop_steady_state(model: QuasiStaticModel, R_d: Array) -> tuple[Array, Array]:
    """Equilibrium of ``y = K_G u + w`` under the local law ``u = -R_d y``."""
    n = model.n
    A = np.eye(n) + model.K_G @ R_d
    try:
        y = np.linalg.solve(A, model.w)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("I + K_G R_d is singular") from exc
    return -R_d @ y, y


# --------------------------------------------------------------------------
# Nonlinear constant-power network
# --------------------------------------------------------------------------

def solve_acgfm_voltages(blocks: ConductanceBlocks, V_N: Array, P_M: Array,
                         V_init: Array | None = None, relaxation: float = 0.7,
                         tol: float = 1e-10, max_iter: int = 200,
                         node_ids: Sequence[str] | None = None) -> Array:
    """Solve ``G_MN V_N + G_M V_M = P_M / V_M`` for the ac-GFM voltages.

    Damped fixed-point iteration on the re-linearized circuit: each candidate
    solves the linear network with the constant-power stations replaced by
    their tangent at the current iterate, and the iterate moves a fraction
    ``relaxation`` towards it. ``tol`` is relative to ``max(V_N)``.
    """
    m = blocks.m
    if m == 0:
        return np.zeros(0)
    V_N = np.asarray(V_N, dtype=float)
    P_M = np.asarray(P_M, dtype=float)
    V = np.full(m, float(np.mean(V_N))) if V_init is None else np.array(V_init, dtype=float)
    rhs_N = blocks.G_MN @ V_N
    atol = tol * float(np.max(np.abs(V_N)))
    ids = list(node_ids) if node_ids is not None else [str(k) for k in range(m)]
    for _ in range(max_iter):
        if not np.all(np.isfinite(V)) or np.any(V <= 0):
            break
        g_p = P_M / V**2
        A = blocks.G_M + np.diag(g_p)
        try:
            cand = np.linalg.solve(A, 2.0 * P_M / V - rhs_N)
        except np.linalg.LinAlgError:
            break
        step = relaxation * (cand - V)
        V = V + step
        if np.max(np.abs(step)) <= atol:
            return V
    with np.errstate(all="ignore"):
        resid = np.abs(rhs_N + blocks.G_M @ V - P_M / V)
    worst = int(np.nanargmax(np.where(np.isfinite(resid), resid, np.inf))) if m else 0
    raise PlantCollapseError(
        f"constant-power network solve did not converge (worst node {ids[worst]})", ids[worst])
