"""Random grids and program instances shared by the test modules."""

from __future__ import annotations

import numpy as np

from hvdc_ofo.grid import GridTopology, Line, build_conductance_blocks, kron_reduce, linearize_acgfm
from hvdc_ofo.optimizer import OperatingLimits, loss_cost, proportional_cost, quadratic_output_cost

V_NOM = 620e3
TEMPLATES = ("loss", "quadratic", "proportional")


def random_topology(rng: np.random.Generator, n: int | None = None, m: int | None = None,
                    max_nodes: int = 12) -> GridTopology:
    """Connected grid: random spanning tree plus a few chords, 50-400 km lines."""
    n = int(rng.integers(1, 7)) if n is None else n
    m = int(rng.integers(0, max_nodes - n + 1)) if m is None else m
    dc = [f"N{i}" for i in range(n)]
    ac = [f"M{j}" for j in range(m)]
    nodes = dc + ac
    order = list(rng.permutation(nodes))
    pairs = {tuple(sorted((order[k], order[int(rng.integers(0, k))]))) for k in range(1, len(order))}
    for _ in range(int(rng.integers(0, len(nodes)))):
        a, b = rng.choice(len(nodes), size=2, replace=False)
        pairs.add(tuple(sorted((nodes[a], nodes[b]))))
    lines = [Line(a, b, float(rng.uniform(50.0, 400.0))) for a, b in sorted(pairs)]
    if len(nodes) == 1:
        lines = []
    ratings = {v: float(rng.uniform(300e6, 2000e6)) for v in dc}
    return GridTopology(dc, ac, lines, ratings)


def random_linearization(rng, m: int, nonneg: bool = False):
    """Injections within +-1 GW (or 0..1 GW) at voltages within 5 % of nominal."""
    P = rng.uniform(0.0 if nonneg else -1e9, 1e9, size=m)
    V_bar = V_NOM * rng.uniform(0.95, 1.05, size=m)
    return linearize_acgfm(P, V_bar)


def random_model(rng, n=None, m=None, nonneg=True):
    topo = random_topology(rng, n, m)
    blocks = build_conductance_blocks(topo)
    lin = random_linearization(rng, topo.m, nonneg=nonneg)
    return topo, blocks, lin, kron_reduce(blocks, lin, V_NOM)


def random_cost(rng, template: str, topo: GridTopology):
    n = topo.n
    if template == "loss":
        return loss_cost(n, V_NOM)
    if template == "quadratic":
        return quadratic_output_cost(rng.uniform(2.0, 6.0, n), 1000.0 * rng.uniform(30.0, 75.0, n))
    return proportional_cost(topo.rated_currents(V_NOM))


def random_limits(rng, model) -> OperatingLimits:
    """Boxes around a random reachable point, so the instance is feasible."""
    n = model.n
    u0 = V_NOM * rng.uniform(-0.03, 0.03, n)
    y0 = model.K_G @ u0 + model.w
    dv = V_NOM * rng.uniform(0.001, 0.05, size=(2, n))
    scale = max(float(np.abs(y0).max()), 1e3)
    di = scale * rng.uniform(0.02, 1.0, size=(2, n))
    return OperatingLimits(I_min=y0 - di[0], I_max=y0 + di[1],
                           V_min=V_NOM + u0 - dv[0], V_max=V_NOM + u0 + dv[1])


def random_instance(rng, template: str, n=None, m=None):
    topo, blocks, lin, model = random_model(rng, n, m, nonneg=True)
    return random_cost(rng, template, topo), random_limits(rng, model), model
