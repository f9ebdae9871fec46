import numpy as np
import pytest
from hypothesis import given, strategies as st

from _gen import V_NOM, random_linearization, random_topology
from hvdc_ofo.grid import (CableParams, GridTopology, InvalidTopologyError, Line, PlantCollapseError,
                           TABLE_I_CABLE, build_conductance_blocks, droop_resistances,
                           droop_steady_state, full_network_solve, kron_reduce, linearize_acgfm,
                           ohmic_loss, ohmic_loss_from_voltages, quasi_static_output,
                           solve_acgfm_voltages)

BARE = CableParams(r1=1.0, r2=np.inf, r3=np.inf, g=0.0)


def two_node(R=1.0, shunt=0.0):
    cable = CableParams(r1=R, r2=np.inf, r3=np.inf, g=shunt)
    return GridTopology(["A"], ["B"], [Line("A", "B", 1.0, cable)], {"A": 1.0})


def test_single_line_blocks():
    b = build_conductance_blocks(two_node())
    assert b.G_N.ravel() == pytest.approx([1.0])
    assert b.G_NM.ravel() == pytest.approx([-1.0])
    assert b.G_M.ravel() == pytest.approx([1.0])


def test_shunt_split_between_ends():
    b = build_conductance_blocks(two_node(shunt=0.2))
    assert b.G_N.ravel() == pytest.approx([1.1])
    assert b.G_M.ravel() == pytest.approx([1.1])


def test_table_cable_100km_resistance():
    # parallel of the three bundled-cable conductor paths, computed by hand
    r = 1.0 / (1 / 0.1265 + 1 / 0.1504 + 1 / 0.0178)
    assert Line("a", "b", 100.0).resistance == pytest.approx(100 * r, rel=1e-12)
    assert Line("a", "b", 100.0).resistance == pytest.approx(1.41375, abs=5e-5)
    assert TABLE_I_CABLE.g == pytest.approx(0.1015e-6)


def test_parallel_lines_merge():
    t = GridTopology(["A"], ["B"], [Line("A", "B", 1.0, BARE), Line("B", "A", 1.0, BARE)], {"A": 1})
    b = build_conductance_blocks(t)
    assert b.G_N.ravel() == pytest.approx([2.0])
    assert b.branch_R.size == 1 and b.branch_R[0] == pytest.approx(0.5)


@pytest.mark.parametrize("topo", [
    lambda: GridTopology([], ["B"], []),
    lambda: GridTopology(["A"], ["A"], []),
    lambda: GridTopology(["A"], ["B"], [Line("A", "C", 1.0)]),
    lambda: GridTopology(["A"], ["B"], [Line("A", "A", 1.0)]),
    lambda: GridTopology(["A"], ["B"], [Line("A", "B", 0.0)]),
    lambda: GridTopology(["A"], ["B", "C"], [Line("A", "B", 1.0)]),
])
def test_invalid_topologies(topo):
    with pytest.raises(InvalidTopologyError):
        topo()


def test_kron_two_node_zero_gp():
    b = build_conductance_blocks(two_node())
    I_bar = 7.0
    lin = linearize_acgfm(np.zeros(1), np.ones(1))
    lin.I_bar[:] = I_bar
    model = kron_reduce(b, lin, 0.0)
    assert model.K_G.ravel() == pytest.approx([0.0], abs=1e-15)
    # w = V_nom K_G 1 + G_NM (G_M + G_P)^-1 I_bar = -I_bar
    assert model.w == pytest.approx([-I_bar])


@given(st.floats(0.0, 100.0))
def test_kron_two_node_gp(gp):
    b = build_conductance_blocks(two_node())
    lin = linearize_acgfm(np.array([gp]), np.ones(1))
    assert kron_reduce(b, lin, 1.0).K_G[0, 0] == pytest.approx(gp / (1 + gp), rel=1e-12, abs=1e-15)


def test_kron_without_interior_nodes():
    t = GridTopology(["A", "B"], [], [Line("A", "B", 1.0, BARE)], {"A": 1, "B": 1})
    b = build_conductance_blocks(t)
    model = kron_reduce(b, linearize_acgfm(np.zeros(0), np.zeros(0) + 1), 10.0)
    assert np.array_equal(model.K_G, b.G_N)
    assert model.w == pytest.approx(10.0 * b.G_N @ np.ones(2))


def test_quasi_static_output_examples():
    b = build_conductance_blocks(two_node())
    model = kron_reduce(b, linearize_acgfm(np.zeros(1), np.ones(1)), 0.0)
    assert quasi_static_output(model, np.zeros(1)) == pytest.approx([0.0])
    model.K_G[:] = 0.5
    model.w[:] = -10.0
    assert quasi_static_output(model, np.ones(1)) == pytest.approx([-9.5])


def test_full_solve_uniform_equilibrium():
    t = GridTopology(["A", "B"], ["C"], [Line("A", "C", 1.0, BARE), Line("B", "C", 2.0, BARE)],
                     {"A": 1, "B": 1})
    b = build_conductance_blocks(t)
    y, V_M = full_network_solve(b, linearize_acgfm(np.zeros(1), np.full(1, 400.0)), np.zeros(2), 400.0)
    assert y == pytest.approx([0.0, 0.0], abs=1e-12)
    assert V_M == pytest.approx([400.0])


def test_full_solve_ohms_law():
    # a station drawing 10 A through 1 Ohm; y > 0 means the dc-GFM station supplies current
    b = build_conductance_blocks(two_node())
    V_nom = 1000.0
    lin = linearize_acgfm(np.zeros(1), np.full(1, V_nom))
    lin.I_bar[:] = -10.0
    y, V_M = full_network_solve(b, lin, np.zeros(1), V_nom)
    assert V_M == pytest.approx([V_nom - 10.0])
    assert y == pytest.approx([10.0])


def test_replica_zero_u_matches_full_solve(replica, replica_blocks, rng):
    lin = random_linearization(rng, replica.m)
    model = kron_reduce(replica_blocks, lin, V_NOM)
    y_full, _ = full_network_solve(replica_blocks, lin, np.zeros(replica.n), V_NOM)
    assert quasi_static_output(model, np.zeros(replica.n)) == pytest.approx(y_full, rel=1e-9, abs=1e-6)


@given(st.integers(0, 2**32 - 1))
def test_kron_matches_full_solve_property(seed):
    rng = np.random.default_rng(seed)
    topo = random_topology(rng)
    b = build_conductance_blocks(topo)
    lin = random_linearization(rng, topo.m, nonneg=True)
    u = V_NOM * rng.uniform(-0.05, 0.05, topo.n)
    y_full, _ = full_network_solve(b, lin, u, V_NOM)
    y_red = quasi_static_output(kron_reduce(b, lin, V_NOM), u)
    scale = max(np.abs(y_full).max(), 1e-9 * V_NOM * np.abs(b.full).max())
    assert np.abs(y_red - y_full).max() <= 1e-9 * scale


@given(st.integers(0, 2**32 - 1))
def test_conductance_matrix_structure(seed):
    topo = random_topology(np.random.default_rng(seed))
    G = build_conductance_blocks(topo).full
    assert np.allclose(G, G.T)
    # weakly diagonally dominant with positive shunt surplus
    off = np.abs(G - np.diag(np.diag(G))).sum(axis=1)
    assert np.all(np.diag(G) >= off - 1e-15)
    if topo.lines:
        assert np.linalg.eigvalsh(G)[0] > 0


def test_ohmic_loss_examples():
    b = build_conductance_blocks(two_node())
    assert ohmic_loss_from_voltages(b, np.array([5.0, 5.0])) == 0.0
    assert ohmic_loss_from_voltages(b, np.array([12.0, 10.0])) == pytest.approx(4.0)
    lin = linearize_acgfm(np.zeros(1), np.ones(1))
    assert ohmic_loss(b, lin, np.zeros(1), 100.0) == pytest.approx(0.0, abs=1e-18)


def test_loss_equals_power_balance(replica, replica_blocks, rng):
    # losses = sum of injections, with the linearized stations drawing G_P V^2 + I_bar V
    lin = random_linearization(rng, replica.m)
    u = V_NOM * rng.uniform(-0.02, 0.02, replica.n)
    y, V_M = full_network_solve(replica_blocks, lin, u, V_NOM)
    inj_M = (-lin.g_p * V_M + lin.I_bar) * V_M
    assert ohmic_loss(replica_blocks, lin, u, V_NOM) == pytest.approx(
        float((V_NOM + u) @ y + inj_M.sum()), rel=1e-9)


def test_droop_trivial_cases(replica, replica_blocks, rng):
    model = kron_reduce(replica_blocks, random_linearization(rng, replica.m), V_NOM)
    u, y = droop_steady_state(model, np.zeros((replica.n, replica.n)))
    assert np.all(u == 0) and y == pytest.approx(model.w)
    model.w[:] = 0
    u, y = droop_steady_state(model, droop_resistances(replica, V_NOM))
    assert np.all(u == 0) and np.all(y == 0)


def test_droop_satisfies_local_law(replica, replica_blocks, rng):
    model = kron_reduce(replica_blocks, random_linearization(rng, replica.m), V_NOM)
    R_d = droop_resistances(replica, V_NOM, 0.05)
    u, y = droop_steady_state(model, R_d)
    assert u == pytest.approx(-R_d @ y)
    assert y == pytest.approx(model.K_G @ u + model.w)


def test_linearization_examples():
    lin = linearize_acgfm(np.zeros(2), np.full(2, 620e3))
    assert np.all(lin.g_p == 0) and np.all(lin.I_bar == 0)
    lin = linearize_acgfm(np.array([1e9]), np.array([620e3]))
    assert lin.g_p[0] == pytest.approx(2.601e-3, rel=1e-3)
    assert lin.I_bar[0] == pytest.approx(3225.8, rel=1e-4)


@given(st.floats(-2e9, 2e9), st.floats(3e5, 8e5))
def test_linearization_exact_at_expansion_point(P, V):
    lin = linearize_acgfm(np.array([P]), np.array([V]))
    assert -lin.g_p[0] * V + lin.I_bar[0] == pytest.approx(P / V, rel=1e-12, abs=1e-12)


def test_nonlinear_solver_fixed_point(replica, replica_blocks, rng):
    P = 1e6 * np.array([900, 700, -300, 600, 800, -200.0])
    V_N = V_NOM + V_NOM * rng.uniform(-0.02, 0.0, replica.n)
    V_M = solve_acgfm_voltages(replica_blocks, V_N, P)
    resid = replica_blocks.G_MN @ V_N + replica_blocks.G_M @ V_M - P / V_M
    assert np.abs(resid).max() < 1e-6 * np.abs(P / V_M).max()


def test_nonlinear_solver_reports_collapse(replica, replica_blocks):
    # far beyond the transfer capacity of the cables
    P = np.full(replica.m, -2e11)
    with pytest.raises(PlantCollapseError) as err:
        solve_acgfm_voltages(replica_blocks, np.full(replica.n, V_NOM), P, node_ids=replica.acgfm_nodes)
    assert err.value.node in replica.acgfm_nodes
