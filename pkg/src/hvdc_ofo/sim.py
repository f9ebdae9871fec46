"""
Closed-loop simulation of the secondary controller against a dc grid.

Two plants are available. The static plant solves the nonlinear
constant-power network at every evaluation, so the controller always acts
on true steady-state currents. The dynamic plant adds series inductance,
node capacitance and a first-order lag on each dc-GFM voltage source.

Timeline: primary droop only until ``activation_time``, then the
primal-dual controller takes over the dc-GFM setpoints.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .comms import ChannelBank, TriggerConfig, trigger_report
from .controller import ControllerGains, PrimalDualController, SensitivityInput, \
    construct_sensitivity, table_ii_gains
from .grid import ConductanceBlocks, GridTopology, PlantCollapseError, QuasiStaticModel, \
    build_conductance_blocks, droop_resistances, droop_steady_state, kron_reduce, \
    linearize_acgfm, ohmic_loss_from_voltages, solve_acgfm_voltages
from .optimizer import KktPoint, OperatingLimits, QuadraticCost, kkt_residual, \
    loss_cost, loss_surrogate_cost, proportional_cost, quadratic_output_cost, \
    reference_qp_solve

Array = NDArray[np.float64]

COMM_MODES = ("continuous", "periodic", "event")
PLANT_KINDS = ("static", "dynamic")
CASES = ("loss", "loss_surrogate", "quadratic", "proportional")


# -- schedule ----------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleEvent:
    t: float
    node: str
    P: float   # injected dc power [W], negative for consumption


@dataclass
class ScenarioSchedule:
    events: list
    duration: float
    activation_time: float = 10.0

    def __post_init__(self):
        self.events = [e if isinstance(e, ScheduleEvent) else ScheduleEvent(float(e[0]), str(e[1]), float(e[2]))
                       for e in self.events]
        times = [e.t for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("schedule event times must be nondecreasing")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.activation_time < 0:
            raise ValueError("activation time must be nonnegative")

    def validate(self, topology: GridTopology):
        known = set(topology.acgfm_nodes)
        for e in self.events:
            if e.node not in known:
                raise ValueError(f"schedule event references non-ac-GFM node {e.node!r}")

    def injections_at(self, t: float, topology: GridTopology) -> Array:
        idx = {k: i for i, k in enumerate(topology.acgfm_nodes)}
        P = np.zeros(topology.m)
        for e in self.events:
            if e.t <= t + 1e-12:
                P[idx[e.node]] = e.P
        return P

    def change_times(self) -> list:
        return sorted({e.t for e in self.events if e.t > 0})

    def segments(self) -> list:
        """``(start, end)`` intervals with constant injections."""
        cuts = [0.0] + [t for t in self.change_times() if t < self.duration] + [self.duration]
        return list(zip(cuts[:-1], cuts[1:]))


# -- plants ------------------------------------------------------------------

@dataclass
class PlantOutput:
    y: Array
    V_M: Array
    g_p: Array


class StaticPlant:
    """Nonlinear steady-state network; dc-GFM voltages imposed directly."""

    kind = "static"

    def __init__(self, topology: GridTopology, V_nom: float, blocks: ConductanceBlocks | None = None):
        self.topology = topology
        self.blocks = blocks if blocks is not None else build_conductance_blocks(topology)
        self.V_nom = float(V_nom)
        self.P = np.zeros(topology.m)
        self.V_M = np.full(topology.m, self.V_nom)
        self.V_N = np.full(topology.n, self.V_nom)

    def set_injections(self, P: Array):
        self.P = np.asarray(P, dtype=float).copy()

    def evaluate(self, u: Array, commit: bool = True) -> PlantOutput:
        V_N = self.V_nom + np.asarray(u, dtype=float)
        b = self.blocks
        V_M = solve_acgfm_voltages(b, V_N, self.P, V_init=self.V_M, tol=1e-10 * self.V_nom / max(V_N.max(), 1e-300),
                                   node_ids=self.topology.acgfm_nodes)
        y = b.G_N @ V_N + b.G_NM @ V_M
        if commit:
            self.V_M, self.V_N = V_M, V_N
        return PlantOutput(y=y, V_M=V_M, g_p=self.P / V_M**2)

    def voltages(self) -> Array:
        return np.concatenate([self.V_N, self.V_M])


class DynamicPlant:
    """RL lines, node capacitance and lagged dc-GFM voltage sources.

    State ``(e, V_M, i_br)``: source voltages at dc-GFM nodes, ac-GFM node
    voltages and merged-branch currents (positive from lower to higher index).
    """

    kind = "dynamic"

    def __init__(self, topology: GridTopology, V_nom: float, tau: float = 0.05,
                 blocks: ConductanceBlocks | None = None):
        if tau <= 0:
            raise ValueError("source lag must be positive")
        self.topology = topology
        self.blocks = b = blocks if blocks is not None else build_conductance_blocks(topology)
        self.V_nom = float(V_nom)
        self.tau = float(tau)
        n, m = topology.n, topology.m
        idx = topology.index()
        inv_L: dict = {}
        cap = np.zeros(n + m)
        for line in topology.lines:
            i, j = sorted((idx[line.a], idx[line.b]))
            L = line.length_km * line.cable.l_eq
            if not L > 0:
                raise ValueError("line inductance must be positive")
            inv_L[(i, j)] = inv_L.get((i, j), 0.0) + 1.0 / L
            cap[i] += 0.5 * line.cable.c * line.length_km
            cap[j] += 0.5 * line.cable.c * line.length_km
        if np.any(cap[n:] <= 0):
            raise ValueError("every ac-GFM node needs positive capacitance")
        self.L = np.array([1.0 / inv_L[(int(f), int(t))] for f, t in zip(b.branch_from, b.branch_to)])
        self.C = cap
        nb = self.L.size
        inc = np.zeros((n + m, nb))
        inc[b.branch_from, np.arange(nb)] = 1.0
        inc[b.branch_to, np.arange(nb)] = -1.0
        self.inc = inc
        self.n, self.m, self.nb = n, m, nb
        self.P = np.zeros(m)
        self.x = np.concatenate([np.full(n + m, self.V_nom), np.zeros(nb)])

    def set_injections(self, P: Array):
        self.P = np.asarray(P, dtype=float).copy()

    def initialize_steady(self, u: Array):
        """Place the state at the static equilibrium for setpoints ``V_nom + u``."""
        static = StaticPlant(self.topology, self.V_nom, self.blocks)
        static.set_injections(self.P)
        static.evaluate(u)
        V = static.voltages()
        i_br = (V[self.blocks.branch_from] - V[self.blocks.branch_to]) / self.blocks.branch_R
        self.x = np.concatenate([V, i_br])

    def derivative(self, x: Array, V_set: Array) -> Array:
        n, m = self.n, self.m
        V = x[:n + m]
        i_br = x[n + m:]
        b = self.blocks
        dx = np.empty_like(x)
        dx[:n] = (V_set - V[:n]) / self.tau
        net = self.inc[n:] @ i_br + b.shunt_G[n:] * V[n:]
        dx[n:n + m] = (self.P / V[n:] - net) / self.C[n:]
        dx[n + m:] = (V[b.branch_from] - V[b.branch_to] - b.branch_R * i_br) / self.L
        return dx

    def output(self, x: Array, V_set: Array) -> PlantOutput:
        n, m = self.n, self.m
        V = x[:n + m]
        if np.any(V[n:] <= 0) or not np.all(np.isfinite(x)):
            worst = int(np.argmin(V[n:]))
            raise PlantCollapseError("ac-GFM node voltage collapsed", self.topology.acgfm_nodes[worst])
        e_dot = (V_set - V[:n]) / self.tau
        y = self.inc[:n] @ x[n + m:] + self.blocks.shunt_G[:n] * V[:n] + self.C[:n] * e_dot
        return PlantOutput(y=y, V_M=V[n:].copy(), g_p=self.P / V[n:]**2)

    def voltages(self) -> Array:
        return self.x[:self.n + self.m].copy()


@dataclass
class LinearizationEntry:
    node: str
    G_P: float
    I_bar: float
    V_bar: float


def linearization_report(plant, u: Optional[Array] = None) -> list:
    """Per ac-GFM node ``(G_P, I_bar, V_bar)`` at the plant's operating voltage."""
    if isinstance(plant, StaticPlant):
        V_M = plant.evaluate(plant.V_N - plant.V_nom if u is None else u).V_M
    else:
        V_M = plant.voltages()[plant.n:]
    lin = linearize_acgfm(plant.P, V_M)
    return [LinearizationEntry(node, float(g), float(i), float(v))
            for node, g, i, v in zip(plant.topology.acgfm_nodes, lin.g_p, lin.I_bar, lin.V_bar)]


# -- steady-state helpers on the nonlinear network ----------------------------

def _linear_model(plant: StaticPlant, out: PlantOutput) -> QuasiStaticModel:
    return kron_reduce(plant.blocks, linearize_acgfm(plant.P, out.V_M), plant.V_nom)


def nonlinear_optimum(plant: StaticPlant, cost: QuadraticCost, limits: OperatingLimits,
                      u0: Optional[Array] = None, tol: float = 1e-9, max_iter: int = 50) -> KktPoint:
    """KKT point of the steady-state program on the nonlinear network.

    Sequential linearization: re-linearize the constant-power stations at
    the current iterate and solve the resulting QP until the iterate stops
    moving. At the fixed point the linear model reproduces the plant's
    currents and Jacobian, so the returned KKT point is exact.
    """
    u = np.zeros(plant.topology.n) if u0 is None else np.array(u0, dtype=float)
    for _ in range(max_iter):
        out = plant.evaluate(u)
        model = _linear_model(plant, out)
        point = reference_qp_solve(cost, limits, model)
        step = np.abs(point.u - u).max()
        u = point.u
        if step <= tol * plant.V_nom:
            out = plant.evaluate(u)
            model = _linear_model(plant, out)
            point = reference_qp_solve(cost, limits, model)
            return point
    raise RuntimeError("sequential linearization did not converge")


def droop_operating_point(plant: StaticPlant, R_d: Array, tol: float = 1e-10,
                          max_iter: int = 100) -> tuple[Array, PlantOutput]:
    """Equilibrium of the nonlinear network under ``u = -R_d y``."""
    u = np.zeros(plant.topology.n)
    for _ in range(max_iter):
        out = plant.evaluate(u)
        model = _linear_model(plant, out)
        u_new, _ = droop_steady_state(model, R_d)
        if np.abs(u_new - u).max() <= tol * plant.V_nom:
            return u_new, plant.evaluate(u_new)
        u = u_new
    raise RuntimeError("droop equilibrium did not converge")


# -- closed loop -------------------------------------------------------------

@dataclass
class SimConfig:
    h: float = 1e-3
    record_period: float = 0.01
    comm_mode: str = "continuous"
    period: float = 0.01
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    plant_kind: str = "static"
    droop_fraction: float = 0.05
    source_lag: float = 0.05

    def __post_init__(self):
        if self.comm_mode not in COMM_MODES:
            raise ValueError(f"comm_mode must be one of {COMM_MODES}")
        if self.plant_kind not in PLANT_KINDS:
            raise ValueError(f"plant_kind must be one of {PLANT_KINDS}")
        if self.h <= 0:
            raise ValueError("step must be positive")
        if self.comm_mode == "event" and self.h > self.trigger.T_min + 1e-12:
            raise ValueError("step must not exceed T_min")
        if self.record_period < self.h:
            raise ValueError("record period must be at least one step")


@dataclass
class TrajectoryRecord:
    dcgfm_nodes: list
    all_nodes: list
    t: Array
    u: Array
    y: Array
    V: Array
    x_p: Array
    duals: Array
    g_p: Array
    loss: Array
    lyapunov: Array
    channels: list = field(default_factory=list)

    def columns(self) -> list:
        n_ids, a_ids = self.dcgfm_nodes, self.all_nodes
        m_ids = a_ids[len(n_ids):]
        cols = ["time_s"]
        cols += [f"u_{i}" for i in n_ids] + [f"y_{i}" for i in n_ids] + [f"V_{i}" for i in a_ids]
        cols += [f"x_p_{i}" for i in n_ids]
        for d in ("zeta_max", "zeta_min", "lambda_max", "lambda_min"):
            cols += [f"{d}_{i}" for i in n_ids]
        cols += [f"G_P_{i}" for i in m_ids] + ["loss_W", "lyapunov"]
        return cols

    def to_array(self) -> Array:
        return np.column_stack([self.t, self.u, self.y, self.V, self.x_p, self.duals,
                                self.g_p, self.loss, self.lyapunov])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            for row in self.to_array():
                w.writerow([f"{v:.9g}" for v in row])


class ClosedLoop:
    """Plant, controller, communication banks and recorder wired together."""

    def __init__(self, topology: GridTopology, cost: QuadraticCost, limits: OperatingLimits,
                 gains: ControllerGains, schedule: ScenarioSchedule, V_nom: float,
                 cfg: SimConfig | None = None, sensitivity_bias: Optional[Array] = None):
        self.cfg = cfg = cfg or SimConfig()
        schedule.validate(topology)
        self.topology = topology
        self.schedule = schedule
        self.V_nom = float(V_nom)
        self.blocks = build_conductance_blocks(topology)
        self.ctrl = PrimalDualController(cost, limits, gains, V_nom)
        self.cost, self.limits, self.gains = cost, limits, gains
        self.R_d = droop_resistances(topology, V_nom, cfg.droop_fraction)
        self.bias = np.ones(topology.m) if sensitivity_bias is None else np.asarray(sensitivity_bias, float)
        if cfg.plant_kind == "static":
            self.plant = StaticPlant(topology, V_nom, self.blocks)
        else:
            self.plant = DynamicPlant(topology, V_nom, cfg.source_lag, self.blocks)
        n = topology.n
        self.banks = {
            "y": ChannelBank("y", topology.dcgfm_nodes),
            "x_p": ChannelBank("x_p", topology.dcgfm_nodes),
            "G_P": ChannelBank("G_P", topology.acgfm_nodes),
        }
        self.v = np.zeros(5 * n + self.ctrl.k)
        self.active = False
        self.u_applied = np.zeros(n)
        self._droop_cache: dict = {}
        self._K_cache: tuple = (None, None)

    # sensitivity from reported conductances, cached on the exact held values
    def _K_G(self, g_p: Array) -> Array:
        key = g_p.tobytes()
        if self._K_cache[0] != key:
            K, _ = construct_sensitivity(self.blocks, SensitivityInput(g_p * self.bias))
            self._K_cache = (key, K)
        return self._K_cache[1]

    def _droop_u(self, P: Array) -> Array:
        key = P.tobytes()
        if key not in self._droop_cache:
            self._droop_cache[key], _ = droop_operating_point(self.plant, self.R_d)
        return self._droop_cache[key]

    def run(self, references: Optional[Sequence[tuple]] = None,
            on_step: Optional[Callable] = None) -> TrajectoryRecord:
        """Simulate the whole schedule.

        ``references`` is a list of ``(t_start, KktPoint)`` used for the
        recorded Lyapunov value; NaN is recorded where none applies.
        """
        cfg, topo = self.cfg, self.topology
        n, m = topo.n, topo.m
        h = cfg.h
        steps = int(round(self.schedule.duration / h))
        every = max(1, int(round(cfg.record_period / h)))
        n_rec = steps // every + 1
        rec = TrajectoryRecord(
            dcgfm_nodes=list(topo.dcgfm_nodes), all_nodes=topo.nodes,
            t=np.zeros(n_rec), u=np.zeros((n_rec, n)), y=np.zeros((n_rec, n)),
            V=np.zeros((n_rec, n + m)), x_p=np.zeros((n_rec, n)), duals=np.zeros((n_rec, 4 * n)),
            g_p=np.zeros((n_rec, m)), loss=np.zeros(n_rec), lyapunov=np.full(n_rec, np.nan))
        refs = sorted(references or [], key=lambda r: r[0])
        P_current = None
        r = 0
        if isinstance(self.plant, DynamicPlant):
            self.plant.set_injections(self.schedule.injections_at(0.0, topo))
            self.plant.initialize_steady(self._static_droop_u(self.plant.P))
        for k in range(steps + 1):
            t = k * h
            # events at exactly the end time belong to the next run
            P = self.schedule.injections_at(t if k < steps else t - 0.5 * h, topo)
            if P_current is None or not np.array_equal(P, P_current):
                self.plant.set_injections(P)
                P_current = P
            if not self.active and t >= self.schedule.activation_time - 1e-12:
                self._activate(t)
            out = self._measure()
            if k % every == 0 and r < n_rec:
                self._record(rec, r, t, out, refs)
                r += 1
            if k == steps:
                break
            self._advance(t, out)
            if on_step is not None:
                on_step(self, t)
        rec.channels = [c for b in self.banks.values() for c in b.channels]
        return rec

    def _static_droop_u(self, P):
        static = StaticPlant(self.topology, self.V_nom, self.blocks)
        static.set_injections(P)
        u, _ = droop_operating_point(static, self.R_d)
        return u

    def _activate(self, t: float):
        self.active = True
        self.v[:] = 0.0
        mode = self.cfg.comm_mode
        if mode != "continuous":
            self.banks["x_p"].update(self.v[:self.topology.n], t, mode, self.cfg.trigger, self.cfg.period)
            self.u_applied = self.banks["x_p"].held()
        else:
            self.u_applied = self.v[:self.topology.n].copy()

    def _measure(self) -> PlantOutput:
        if isinstance(self.plant, StaticPlant):
            if not self.active:
                self.u_applied = self._droop_u(self.plant.P)
            return self.plant.evaluate(self.u_applied)
        if not self.active:
            V_set = self.V_nom - self.R_d @ self._droop_y()
        else:
            V_set = self.V_nom + self.u_applied
        self._V_set = V_set
        return self.plant.output(self.plant.x, V_set)

    def _droop_y(self):
        # source current excluding the capacitive term; the droop acts on the line current
        p = self.plant
        V = p.x[:p.n + p.m]
        return p.inc[:p.n] @ p.x[p.n + p.m:] + p.blocks.shunt_G[:p.n] * V[:p.n]

    def _record(self, rec, r, t, out, refs):
        n = self.topology.n
        V_N = self.plant.V_N if isinstance(self.plant, StaticPlant) else self.plant.x[:n]
        V = np.concatenate([V_N, out.V_M])
        rec.t[r] = t
        rec.u[r] = V_N - self.V_nom if isinstance(self.plant, StaticPlant) else self._V_set - self.V_nom
        rec.y[r] = out.y
        rec.V[r] = V
        rec.x_p[r] = self.v[:n]
        rec.duals[r] = self.v[n:5 * n]
        rec.g_p[r] = out.g_p
        rec.loss[r] = ohmic_loss_from_voltages(self.blocks, V)
        if self.active and refs:
            ref = None
            for t0, point in refs:
                if t0 <= t + 1e-12:
                    ref = point
            if ref is not None:
                dx = self.v[:n] - ref.u
                dd = self.v[n:5 * n] - ref.duals
                rec.lyapunov[r] = 0.5 * dx @ (dx / self.gains.K_p) + 0.5 * dd @ (dd / self.gains.K_d)

    def _advance(self, t: float, out: PlantOutput):
        cfg = self.cfg
        h = cfg.h
        n = self.topology.n
        dynamic = isinstance(self.plant, DynamicPlant)
        if not self.active:
            if dynamic:
                self._integrate_plant(h, lambda x: self.V_nom - self.R_d @ self._droop_y_of(x))
            return
        mode = cfg.comm_mode
        if mode == "continuous":
            if dynamic:
                self._joint_step(h)
            else:
                self._static_continuous_step(h, out)
            self.u_applied = self.v[:n].copy()
            return
        tr, per = cfg.trigger, cfg.period
        self.banks["y"].update(out.y, t, mode, tr, per)
        self.banks["G_P"].update(out.g_p, t, mode, tr, per)
        y_hat = self.banks["y"].held()
        K_G = self._K_G(self.banks["G_P"].held())
        self.v = self.ctrl.rk4(self.v, h, y_hat, K_G)
        if dynamic:
            V_set = self.V_nom + self.u_applied
            self._integrate_plant(h, lambda x: V_set)
        # x_p is sampled at the end of the step, effective from the next one
        self.banks["x_p"].update(self.v[:n], t + h, mode, tr, per)
        self.u_applied = self.banks["x_p"].held()

    def _static_continuous_step(self, h, out):
        n = self.topology.n
        plant = self.plant

        def f(v, o=None):
            o = o if o is not None else plant.evaluate(v[:n], commit=False)
            return self.ctrl.rhs(v, o.y, self._K_G(o.g_p))

        v = self.v
        k1 = f(v, out)
        k2 = f(v + 0.5 * h * k1)
        k3 = f(v + 0.5 * h * k2)
        k4 = f(v + h * k3)
        self.v = self.ctrl.floor(v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))

    def _droop_y_of(self, x):
        p = self.plant
        return p.inc[:p.n] @ x[p.n + p.m:] + p.blocks.shunt_G[:p.n] * x[:p.n]

    def _integrate_plant(self, h, V_set_of):
        p = self.plant
        x = p.x

        def f(z):
            return p.derivative(z, V_set_of(z))

        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        p.x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def _joint_step(self, h):
        p = self.plant
        n = self.topology.n
        nx = p.x.size

        def f(z):
            x, v = z[:nx], z[nx:]
            V_set = self.V_nom + v[:n]
            o = p.output(x, V_set)
            return np.concatenate([p.derivative(x, V_set), self.ctrl.rhs(v, o.y, self._K_G(o.g_p))])

        z = np.concatenate([p.x, self.v])
        k1 = f(z)
        k2 = f(z + 0.5 * h * k1)
        k3 = f(z + 0.5 * h * k2)
        k4 = f(z + h * k3)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        p.x = z[:nx]
        self.v = self.ctrl.floor(z[nx:].copy())


def step_closed_loop(loop: ClosedLoop, t: float) -> PlantOutput:
    """Advance ``loop`` by one step starting at time ``t``; returns the measurement at ``t``."""
    P = loop.schedule.injections_at(t, loop.topology)
    if not np.array_equal(P, loop.plant.P):
        loop.plant.set_injections(P)
    if not loop.active and t >= loop.schedule.activation_time - 1e-12:
        loop._activate(t)
    out = loop._measure()
    loop._advance(t, out)
    return out


# -- case studies -------------------------------------------------------------

def case_cost(name: str, topology: GridTopology, V_nom: float, P0: Array,
              blocks: ConductanceBlocks | None = None) -> QuadraticCost:
    """Cost template for a named case, scaled to ``topology``."""
    n = topology.n
    if name == "loss":
        return loss_cost(n, V_nom)
    if name == "loss_surrogate":
        plant = StaticPlant(topology, V_nom, blocks)
        plant.set_injections(P0)
        return loss_surrogate_cost(_linear_model(plant, plant.evaluate(np.zeros(n))).K_G)
    if name == "quadratic":
        if n != 6:
            raise ValueError("the quadratic template is defined for six dc-GFM stations")
        return quadratic_output_cost()
    if name == "proportional":
        return proportional_cost(topology.rated_currents(V_nom))
    raise ValueError(f"unknown case {name!r}")


@dataclass
class CaseSummary:
    case: str
    comm_mode: str
    plant_kind: str
    kkt_worst: float
    kkt: dict
    u_error: float
    u_oracle: Array
    u_terminal: Array
    y_terminal: Array
    V_violation: float
    I_violation: float
    V_violation_rel: float
    I_violation_rel: float
    loss_ofo: float
    loss_droop: float
    trigger_counts: dict
    saturated: list
    saturated_duals: list
    marginal_spread: float = float("nan")
    ratio_spread: float = float("nan")
    voltage_bound_active: list = field(default_factory=list)

    def as_text(self) -> str:
        def vec(v):
            return ", ".join(f"{x:.9g}" for x in np.asarray(v, dtype=float))
        lines = [
            f"case = {self.case}", f"comm_mode = {self.comm_mode}", f"plant_kind = {self.plant_kind}",
            f"kkt_worst_relative = {self.kkt_worst:.9g}",
        ]
        lines += [f"kkt_{k} = {v:.9g}" for k, v in self.kkt.items()]
        lines += [
            f"u_error_inf = {self.u_error:.9g}", f"u_oracle = {vec(self.u_oracle)}",
            f"u_terminal = {vec(self.u_terminal)}", f"y_terminal = {vec(self.y_terminal)}",
            f"voltage_violation = {self.V_violation:.9g}", f"current_violation = {self.I_violation:.9g}",
            f"loss_ofo = {self.loss_ofo:.9g}", f"loss_droop = {self.loss_droop:.9g}",
            f"active_limits = {', '.join(self.saturated) or '-'}",
            f"active_limit_duals = {', '.join(f'{d:.9g}' for d in self.saturated_duals) or '-'}",
            f"voltage_bound_stations = {', '.join(self.voltage_bound_active) or '-'}",
            f"marginal_cost_spread = {self.marginal_spread:.9g}",
            f"current_ratio_spread = {self.ratio_spread:.9g}",
        ]
        lines += [f"triggers_{k} = {v}" for k, v in self.trigger_counts.items()]
        return "\n".join(lines) + "\n"


def relative_spread(values: Array) -> float:
    """``(max - min) / max|.|``; zero for fewer than two values."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float((values.max() - values.min()) / max(np.abs(values).max(), 1e-300))


def summarize(loop: ClosedLoop, rec: TrajectoryRecord, case: str, oracle: KktPoint,
              sat_tol: float = 1e-4) -> CaseSummary:
    topo, lim, V_nom = loop.topology, loop.limits, loop.V_nom
    n = topo.n
    static = StaticPlant(topo, V_nom, loop.blocks)
    static.set_injections(loop.plant.P)
    u = rec.u[-1]
    y = rec.y[-1]
    v = loop.v
    # optimality is judged on the controller state; limits on what the plant sees
    x_p = v[:n].copy()
    out = static.evaluate(x_p)
    model = _linear_model(static, out)
    point = KktPoint(u=x_p, y=out.y, zeta_max=v[n:2 * n], zeta_min=v[2 * n:3 * n],
                     lambda_max=v[3 * n:4 * n], lambda_min=v[4 * n:5 * n], mu=v[5 * n:])
    res = kkt_residual(loop.cost, lim, model, point)
    V_N = V_nom + u
    V_viol = float(max(np.max(V_N - lim.V_max), np.max(lim.V_min - V_N), 0.0))
    I_viol = float(max(np.max(y - lim.I_max), np.max(lim.I_min - y), 0.0))
    V_rng = float(np.max(lim.V_max - lim.V_min))
    I_rng = float(np.max(lim.I_max - lim.I_min))
    _, droop_out = droop_operating_point(static, loop.R_d)
    V_droop = static.voltages()
    loss_droop = ohmic_loss_from_voltages(loop.blocks, V_droop)
    I_span = lim.I_max - lim.I_min
    V_span = lim.V_max - lim.V_min
    at = {
        "I_max": np.abs(y - lim.I_max) <= sat_tol * I_span,
        "I_min": np.abs(y - lim.I_min) <= sat_tol * I_span,
        "V_max": np.abs(V_N - lim.V_max) <= sat_tol * V_span,
        "V_min": np.abs(V_N - lim.V_min) <= sat_tol * V_span,
    }
    dual_of = {"I_max": point.zeta_max, "I_min": point.zeta_min,
               "V_max": point.lambda_max, "V_min": point.lambda_min}
    sat = np.zeros(n, dtype=bool)
    sat_ids, sat_duals = [], []
    for key, mask in at.items():
        for i in np.flatnonzero(mask):
            sat_ids.append(f"{topo.dcgfm_nodes[i]}:{key}")
            sat_duals.append(float(dual_of[key][i]))
        sat |= mask
    v_active = at["V_max"] | at["V_min"]
    free = ~sat
    summary = CaseSummary(
        case=case, comm_mode=loop.cfg.comm_mode, plant_kind=loop.cfg.plant_kind,
        kkt_worst=res.worst, kkt=dict(res.relative), u_error=float(np.abs(x_p - oracle.u).max()),
        u_oracle=oracle.u, u_terminal=u, y_terminal=y, V_violation=V_viol, I_violation=I_viol,
        V_violation_rel=V_viol / V_rng, I_violation_rel=I_viol / I_rng,
        loss_ofo=float(rec.loss[-1]), loss_droop=loss_droop,
        trigger_counts={k: b.count() for k, b in loop.banks.items()},
        saturated=sat_ids, saturated_duals=sat_duals,
        voltage_bound_active=[topo.dcgfm_nodes[i] for i in np.flatnonzero(v_active)])
    if isinstance(loop.cost, QuadraticCost) and case == "quadratic":
        marg = loop.cost.P_y @ y + loop.cost.q_y
        summary.marginal_spread = relative_spread(marg[free])
    if case == "proportional":
        ratio = y / topo.rated_currents(V_nom)
        summary.ratio_spread = relative_spread(ratio[free])
    return summary


@dataclass
class CaseStudy:
    """Everything needed to run one case: grid, objective, limits, gains and schedule."""

    name: str
    topology: GridTopology
    V_nom: float
    limits: OperatingLimits
    schedule: ScenarioSchedule
    gains: Optional[ControllerGains] = None
    cost: Optional[QuadraticCost] = None

    def __post_init__(self):
        P0 = self.schedule.injections_at(self.schedule.activation_time, self.topology)
        if self.cost is None:
            self.cost = case_cost(self.name, self.topology, self.V_nom, P0)
        if self.gains is None:
            self.gains = table_ii_gains(self.name, self.topology.n)


def segment_optima(study: CaseStudy, blocks: ConductanceBlocks | None = None) -> list:
    """Nonlinear optimum for every constant-injection segment after activation."""
    plant = StaticPlant(study.topology, study.V_nom, blocks)
    sched = study.schedule
    starts = [sched.activation_time] + [t for t in sched.change_times()
                                         if sched.activation_time < t < sched.duration]
    out = []
    u0 = None
    for t0 in starts:
        plant.set_injections(sched.injections_at(t0, study.topology))
        point = nonlinear_optimum(plant, study.cost, study.limits, u0=u0)
        u0 = point.u
        out.append((t0, point))
    return out


def run_case_study(study: CaseStudy, cfg: SimConfig | None = None,
                   sensitivity_bias: Optional[Array] = None) -> tuple:
    """Simulate ``study`` and return ``(record, summary, loop)``."""
    cfg = cfg or SimConfig()
    loop = ClosedLoop(study.topology, study.cost, study.limits, study.gains, study.schedule,
                      study.V_nom, cfg, sensitivity_bias=sensitivity_bias)
    refs = segment_optima(study, loop.blocks)
    rec = loop.run(references=refs)
    summary = summarize(loop, rec, study.name, refs[-1][1])
    return rec, summary, loop


def trigger_summary(loop: ClosedLoop) -> dict:
    chans = [c for b in loop.banks.values() for c in b.channels]
    return trigger_report(chans, loop.cfg.trigger.T_min, loop.cfg.trigger.T_max, loop.cfg.h)
