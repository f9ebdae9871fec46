"""
Loading topology and scenario files.

Topology file::

    [cable table1]
    r1 = 0.1265
    r2 = 0.1504
    r3 = 0.0178
    g = 0.1015e-6          # S/km
    c = 0.1616e-6          # F/km (dynamic plant only)
    l_eq = 3e-3            # H/km (dynamic plant only)
    [stations]
    1, dcgfm, 2000         # id, mode, rating [MVA]
    7, acgfm, 1000
    [lines]
    1, 7, 250              # a, b, length [km], optional cable name

Scenario file::

    [scenario]
    topology = replica12.grid      # relative to the scenario file
    case = proportional            # loss | loss_surrogate | quadratic | proportional | custom
    v_nom = 620e3
    duration = 40
    activation_time = 10
    comm_mode = continuous         # continuous | periodic | event
    plant = static                 # static | dynamic
    step = 1e-3
    record_period = 0.01
    kkt_tolerance = 1e-4
    [limits]
    v_min_pu = 0.95                # or v_min/v_max vectors [V], or u_min/u_max deviations [V]
    v_max_pu = 1.0
    i_scale = 1.0                  # I bounds = +-i_scale * rated current, or i_min/i_max vectors
    [gains]                        # optional, defaults per case
    k_p = 200
    k_d_i = 10
    k_d_v = 10
    [trigger]                      # optional
    sigma_y = 5
    sigma_x = 20
    sigma_g = 1e-4
    t_min = 0.01
    t_max = 1
    period = 0.01
    [schedule]
    0, 7, 900                      # t [s], ac-GFM node, injected power [MW]
    [cost]                         # required for case = custom
    p_y = 1                        # diagonal or 'a, b; c, d' matrix, same for p_u
    [constraints]
    1, 1, 50                       # extra rows a_1..a_n, b  (a u <= b)
    [model]                        # oracle-only instances without a grid
    k_g = 1
    w = 5
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .comms import TriggerConfig
from .controller import ControllerGains, table_ii_gains
from .grid import CableParams, GridTopology, Line, QuasiStaticModel, TABLE_I_CABLE
from .optimizer import OperatingLimits, QuadraticCost, loss_cost, loss_surrogate_cost
from .sim import CASES, COMM_MODES, PLANT_KINDS, CaseStudy, ScenarioSchedule, SimConfig, case_cost
from .textio import ParseError, Section, parse_file, parse_text

DATA_DIR = Path(__file__).parent / "data"


def _one(sections, kind, path, required=True) -> Optional[Section]:
    found = [s for s in sections if s.kind == kind]
    if len(found) > 1:
        raise ParseError(path, found[1].line, 1, f"duplicate [{kind}] section")
    if not found and required:
        raise ParseError(path, 1, 1, f"missing [{kind}] section")
    return found[0] if found else None


def topology_from_sections(sections, path) -> GridTopology:
    cables = {"": TABLE_I_CABLE, "table1": TABLE_I_CABLE}
    for s in sections:
        if s.kind == "cable":
            s.check_keys({"r1", "r2", "r3", "g", "c", "l_eq"})
            try:
                cables[s.name] = CableParams(
                    r1=s.number("r1"), r2=s.number("r2"), r3=s.number("r3"), g=s.number("g"),
                    c=s.number("c", TABLE_I_CABLE.c), l_eq=s.number("l_eq", TABLE_I_CABLE.l_eq))
            except ValueError as exc:
                if isinstance(exc, ParseError):
                    raise
                raise s.error(None, str(exc)) from None
    st = _one(sections, "stations", path)
    ln = _one(sections, "lines", path)
    dc, ac, ratings = [], [], {}
    for toks, line, col in st.rows:
        if len(toks) != 3:
            raise ParseError(path, line, col, "station rows are 'id, mode, rating_MVA'")
        sid, mode, rating = toks
        if mode.lower() not in ("dcgfm", "acgfm"):
            raise ParseError(path, line, col, f"station mode must be dcgfm or acgfm, got {mode!r}")
        try:
            ratings[sid] = float(rating) * 1e6
        except ValueError:
            raise ParseError(path, line, col, f"bad rating {rating!r}") from None
        (dc if mode.lower() == "dcgfm" else ac).append(sid)
    lines = []
    for toks, line, col in ln.rows:
        if len(toks) not in (3, 4):
            raise ParseError(path, line, col, "line rows are 'a, b, length_km[, cable]'")
        cable = toks[3] if len(toks) == 4 else ""
        if cable not in cables:
            raise ParseError(path, line, col, f"unknown cable {cable!r}")
        try:
            length = float(toks[2])
        except ValueError:
            raise ParseError(path, line, col, f"bad length {toks[2]!r}") from None
        lines.append(Line(toks[0], toks[1], length, cables[cable]))
    try:
        return GridTopology(dc, ac, lines, ratings)
    except ValueError as exc:
        raise ParseError(path, st.line, 1, f"invalid topology: {exc}") from None


def load_topology(path) -> GridTopology:
    return topology_from_sections(parse_file(path), path)


@dataclass
class Scenario:
    path: Path
    case: str
    V_nom: float
    limits: OperatingLimits
    gains: ControllerGains
    sim: SimConfig
    topology: Optional[GridTopology] = None
    model: Optional[QuasiStaticModel] = None
    schedule: Optional[ScenarioSchedule] = None
    cost: Optional[QuadraticCost] = None
    kkt_tolerance: float = 1e-4
    overrides: dict = field(default_factory=dict)

    def study(self) -> CaseStudy:
        if self.topology is None or self.schedule is None:
            raise ValueError("scenario has no grid or schedule to simulate")
        return CaseStudy(self.case, self.topology, self.V_nom, self.limits, self.schedule,
                         gains=self.gains, cost=self.cost)

    def resolved_cost(self, t: float | None = None) -> QuadraticCost:
        if self.cost is not None:
            return self.cost
        sched = self.schedule
        t = sched.activation_time if t is None else t
        return case_cost(self.case, self.topology, self.V_nom, sched.injections_at(t, self.topology))

    def with_overrides(self, comm_mode=None, plant=None, duration=None, gains=None, trigger=None):
        sim = self.sim
        if comm_mode is not None or plant is not None or trigger is not None:
            sim = replace(sim, comm_mode=comm_mode or sim.comm_mode, plant_kind=plant or sim.plant_kind,
                          trigger=trigger or sim.trigger)
        sched = self.schedule
        if duration is not None and sched is not None:
            sched = ScenarioSchedule(sched.events, duration, sched.activation_time)
        return replace(self, sim=sim, schedule=sched, gains=gains or self.gains)


def _cost_from_section(s: Section, n: int) -> QuadraticCost:
    s.check_keys({"p_u", "q_u", "p_y", "q_y"})

    def mat(key):
        if not s.has(key):
            return np.zeros((n, n))
        if ";" in s.text(key) or n == 1:
            M = s.matrix(key, n)
            if M.shape != (n, n):
                raise s.error(key, f"'{key}' must be {n}x{n}")
            return M
        return np.diag(s.vector(key, n))

    def vec(key):
        return s.vector(key, n) if s.has(key) else np.zeros(n)

    try:
        return QuadraticCost(mat("p_u"), vec("q_u"), mat("p_y"), vec("q_y"), name="custom")
    except ValueError as exc:
        raise s.error(None, f"invalid cost: {exc}") from None


def scenario_from_text(text: str, path="<string>") -> Scenario:
    path = Path(path)
    sections = parse_text(text, path)
    head = _one(sections, "scenario", path)
    head.check_keys({"topology", "case", "v_nom", "duration", "activation_time", "comm_mode", "plant",
                     "step", "record_period", "kkt_tolerance", "droop_fraction", "source_lag"})
    case = head.text("case")
    if case not in CASES + ("custom",):
        raise head.error("case", f"unknown case {case!r}; expected one of {CASES + ('custom',)}")
    V_nom = head.number("v_nom", 620e3)
    if V_nom <= 0:
        raise head.error("v_nom", "v_nom must be positive")

    topology = model = schedule = None
    if head.has("topology"):
        topo_path = (path.parent / head.text("topology")).resolve()
        if not topo_path.exists():
            raise head.error("topology", f"topology file not found: {topo_path}")
        topology = load_topology(topo_path)
        n = topology.n
    else:
        ms = _one(sections, "model", path, required=False)
        if ms is None:
            raise head.error(None, "scenario needs a 'topology' or a [model] section")
        ms.check_keys({"k_g", "w"})
        w = ms.vector("w")
        n = w.size
        K = ms.matrix("k_g", n)
        if K.shape != (n, n):
            raise ms.error("k_g", f"k_g must be {n}x{n}")
        model = QuasiStaticModel(K_G=K, w=w, V_nom=V_nom)

    ls = _one(sections, "limits", path)
    ls.check_keys({"v_min_pu", "v_max_pu", "v_min", "v_max", "u_min", "u_max", "i_scale", "i_min", "i_max"})
    if ls.has("v_min_pu"):
        V_min = np.full(n, ls.number("v_min_pu") * V_nom)
    elif ls.has("u_min"):
        V_min = V_nom + ls.vector("u_min", n)
    else:
        V_min = ls.vector("v_min", n) if ls.has("v_min") else np.full(n, -np.inf)
    if ls.has("v_max_pu"):
        V_max = np.full(n, ls.number("v_max_pu") * V_nom)
    elif ls.has("u_max"):
        V_max = V_nom + ls.vector("u_max", n)
    else:
        V_max = ls.vector("v_max", n) if ls.has("v_max") else np.full(n, np.inf)
    if ls.has("i_scale"):
        if topology is None:
            raise ls.error("i_scale", "i_scale needs a topology with ratings")
        I_star = topology.rated_currents(V_nom)
        I_min, I_max = -ls.number("i_scale") * I_star, ls.number("i_scale") * I_star
    else:
        I_min = ls.vector("i_min", n) if ls.has("i_min") else np.full(n, -np.inf)
        I_max = ls.vector("i_max", n) if ls.has("i_max") else np.full(n, np.inf)
    cs = _one(sections, "constraints", path, required=False)
    A = np.zeros((0, n))
    b = np.zeros(0)
    if cs is not None:
        rows = []
        for toks, line, col in cs.rows:
            if len(toks) != n + 1:
                raise ParseError(path, line, col, f"constraint rows need {n} coefficients and a bound")
            try:
                rows.append([float(t) for t in toks])
            except ValueError:
                raise ParseError(path, line, col, "constraint rows must be numeric") from None
        if rows:
            arr = np.array(rows)
            A, b = arr[:, :n], arr[:, n]
    try:
        limits = OperatingLimits(I_min, I_max, V_min, V_max, A, b)
        limits.check_nominal(V_nom)
    except ValueError as exc:
        raise ls.error(None, f"invalid limits: {exc}") from None

    gs = _one(sections, "gains", path, required=False)
    if gs is not None:
        gs.check_keys({"k_p", "k_d_i", "k_d_v"})
        try:
            gains = ControllerGains(gs.vector("k_p", n), gs.vector("k_d_i", n), gs.vector("k_d_v", n), n=n)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise gs.error(None, str(exc)) from None
    elif case == "custom":
        gains = ControllerGains(200.0, 10.0, 10.0, n=n)
    else:
        gains = table_ii_gains(case, n)

    ts = _one(sections, "trigger", path, required=False)
    trig = TriggerConfig()
    period = 0.01
    if ts is not None:
        ts.check_keys({"sigma_y", "sigma_x", "sigma_g", "t_min", "t_max", "period"})
        try:
            trig = TriggerConfig(ts.number("sigma_y", trig.sigma_y), ts.number("sigma_x", trig.sigma_x),
                                 ts.number("sigma_g", trig.sigma_G), ts.number("t_min", trig.T_min),
                                 ts.number("t_max", trig.T_max))
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ts.error(None, str(exc)) from None
        period = ts.number("period", period)
    comm = head.text("comm_mode", "continuous")
    if comm not in COMM_MODES:
        raise head.error("comm_mode", f"comm_mode must be one of {COMM_MODES}")
    plant = head.text("plant", "static")
    if plant not in PLANT_KINDS:
        raise head.error("plant", f"plant must be one of {PLANT_KINDS}")
    try:
        sim = SimConfig(h=head.number("step", 1e-3), record_period=head.number("record_period", 0.01),
                        comm_mode=comm, period=period, trigger=trig, plant_kind=plant,
                        droop_fraction=head.number("droop_fraction", 0.05),
                        source_lag=head.number("source_lag", 0.05))
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise head.error(None, str(exc)) from None

    ss = _one(sections, "schedule", path, required=False)
    if topology is not None:
        if ss is None:
            raise head.error(None, "a grid scenario needs a [schedule] section")
        events = []
        known = set(topology.acgfm_nodes)
        for toks, line, col in ss.rows:
            if len(toks) != 3:
                raise ParseError(path, line, col, "schedule rows are 't_s, node, P_MW'")
            try:
                t, P = float(toks[0]), float(toks[2]) * 1e6
            except ValueError:
                raise ParseError(path, line, col, "schedule time and power must be numeric") from None
            if toks[1] not in known:
                raise ParseError(path, line, col, f"node {toks[1]!r} is not an ac-GFM station")
            if events and t < events[-1][0]:
                raise ParseError(path, line, col, "schedule times must be nondecreasing")
            events.append((t, toks[1], P))
        try:
            schedule = ScenarioSchedule(events, head.number("duration", 40.0),
                                        head.number("activation_time", 10.0))
        except ValueError as exc:
            raise ss.error(None, str(exc)) from None

    cost = None
    cos = _one(sections, "cost", path, required=False)
    if cos is not None:
        cost = _cost_from_section(cos, n)
    elif case == "custom":
        raise head.error("case", "case 'custom' needs a [cost] section")
    elif topology is None:
        if case in ("loss", "loss_surrogate"):
            cost = loss_cost(n, V_nom) if case == "loss" else loss_surrogate_cost(model.K_G)
        else:
            raise head.error("case", f"case {case!r} needs a topology")
    return Scenario(path=path, case=case, V_nom=V_nom, limits=limits, gains=gains, sim=sim,
                    topology=topology, model=model, schedule=schedule, cost=cost,
                    kkt_tolerance=head.number("kkt_tolerance", 1e-4))


def load_scenario(path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except FileNotFoundError:
        raise ParseError(path, 0, 0, f"file not found: {path}") from None
    return scenario_from_text(text, p)


def bundled(name: str) -> Path:
    """Path of a bundled data file."""
    p = DATA_DIR / name
    if not p.exists():
        raise FileNotFoundError(p)
    return p
