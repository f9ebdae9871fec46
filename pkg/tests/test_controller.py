import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _gen import TEMPLATES, V_NOM, random_instance, random_linearization
from hvdc_ofo.controller import (ControllerGains, ControllerState, PrimalDualController, Psi,
                                 SensitivityInput, construct_sensitivity, converge_flow,
                                 lyapunov_value, projected_rhs, psi, rk4_step, state_from_point,
                                 table_ii_gains)
from hvdc_ofo.grid import build_conductance_blocks, kron_reduce
from hvdc_ofo.optimizer import OperatingLimits, problem_scale, reference_qp_solve
from test_optimizer import toy_n1, toy_n2


@pytest.mark.parametrize("a, b, out", [(-3, 1, -3), (-3, 0, 0), (2, -1, 2), (0.5, 0, 0.5)])
def test_psi(a, b, out):
    assert psi(a, b) == out


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=8), st.data())
def test_Psi_matches_scalar(a, data):
    b = data.draw(st.lists(st.floats(-1, 1), min_size=len(a), max_size=len(a)))
    assert list(Psi(a, b)) == [psi(x, y) for x, y in zip(a, b)]


def test_gains_accept_scalar_vector_matrix():
    g = ControllerGains(200.0, np.full(3, 10.0), np.diag([1.0, 2.0, 3.0]))
    assert g.n == 3
    assert g.K_d == pytest.approx([10] * 6 + [1, 2, 3] * 2)
    with pytest.raises(ValueError):
        ControllerGains(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        ControllerGains(-1.0, 1.0, 1.0, n=2)
    assert table_ii_gains("loss").K_d_I[0] == 25
    assert table_ii_gains("proportional").K_p[0] == 200


def test_state_roundtrip():
    s = ControllerState(*(np.arange(3.0) + k for k in range(5)), mu=np.array([7.0]))
    back = ControllerState.from_vector(s.as_vector(), 3)
    assert np.array_equal(back.as_vector(), s.as_vector())
    assert back.x_d.size == 12


@pytest.mark.parametrize("template", TEMPLATES)
def test_rhs_vanishes_at_kkt_point(template, rng):
    for _ in range(10):
        cost, lim, model = random_instance(rng, template)
        gains = ControllerGains(200.0, 10.0, 10.0, n=model.n)
        p = reference_qp_solve(cost, lim, model)
        d = projected_rhs(state_from_point(p), p.y, model.K_G, gains, cost, lim, V_NOM)
        scale = problem_scale(cost, lim, model)
        assert np.abs(d.x_p).max() < 1e-8 * scale * gains.K_p.max()
        assert np.abs(d.x_d).max() < 1e-8 * 5 * V_NOM * gains.K_d.max()


def test_interior_reduces_to_gradient_flow(rng):
    cost, _, model = random_instance(rng, "quadratic")
    n = model.n
    lim = OperatingLimits(np.full(n, -1e9), np.full(n, 1e9), np.full(n, 0.5 * V_NOM), np.full(n, 1.5 * V_NOM))
    gains = ControllerGains(rng.uniform(1, 300, n), 10.0, 10.0)
    x = V_NOM * rng.uniform(-0.01, 0.01, n)
    y = model.K_G @ x + model.w
    state = ControllerState.zeros(n)
    state.x_p = x
    d = projected_rhs(state, y, model.K_G, gains, cost, lim, V_NOM)
    gu, gy = cost.gradient(x, y)
    assert d.x_p == pytest.approx(-gains.K_p * (gu + model.K_G.T @ gy))
    assert np.all(d.x_d == 0)


def test_toy_flow_converges():
    cost, lim, model = toy_n1()
    k_p = 5.0
    ctrl = PrimalDualController(cost, lim, ControllerGains(k_p, 1.0, 1.0, n=1), model.V_nom)
    v = converge_flow(ctrl, model.K_G, lambda u: model.K_G @ u + model.w, h=1e-2, t_end=50 / k_p)
    assert v[0] == pytest.approx(-2.0, abs=1e-4)
    assert v[4] == pytest.approx(3.0, abs=1e-3)   # lambda_min


def test_toy_n2_flow_converges():
    cost, lim, model = toy_n2()
    p = reference_qp_solve(cost, lim, model)
    ctrl = PrimalDualController(cost, lim, ControllerGains(2.0, 2.0, 2.0, n=2), model.V_nom)
    v = converge_flow(ctrl, model.K_G, lambda u: model.K_G @ u + model.w, h=1e-2, t_end=100)
    assert v[:2] == pytest.approx(p.u, abs=1e-5)
    assert v[2:4] == pytest.approx(p.zeta_max, abs=1e-4)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.floats(-1e4, 1e4), st.floats(0.0, 1.0))
def test_rk4_keeps_duals_nonnegative(seed, kick, h):
    rng = np.random.default_rng(seed)
    cost, lim, model = random_instance(rng, "proportional")
    n = model.n
    gains = table_ii_gains("proportional", n)
    s = ControllerState(V_NOM * rng.uniform(-0.05, 0.05, n), *(np.abs(rng.normal(0, 10, (4, n)))))
    y = model.K_G @ s.x_p + model.w + kick
    out = rk4_step(s, h * 1e-2, y, model.K_G, gains, cost, lim, V_NOM)
    assert np.all(out.x_d >= 0)


def test_construct_sensitivity_equals_kron(replica, replica_blocks, rng):
    lin = random_linearization(rng, replica.m)
    K, singular = construct_sensitivity(replica_blocks, SensitivityInput(lin.g_p))
    assert not singular
    assert np.abs(K - kron_reduce(replica_blocks, lin, V_NOM).K_G).max() <= 1e-12 * np.abs(K).max()


def test_construct_sensitivity_without_interior(replica):
    from hvdc_ofo.grid import GridTopology, Line
    t = GridTopology(["a", "b"], [], [Line("a", "b", 100.0)], {"a": 1, "b": 1})
    b = build_conductance_blocks(t)
    K, _ = construct_sensitivity(b, SensitivityInput(np.zeros(0)))
    assert np.array_equal(K, b.G_N)


def test_lyapunov_examples():
    cost, lim, model = toy_n2()
    p = reference_qp_solve(cost, lim, model)
    gains = ControllerGains(200.0, 10.0, 10.0, n=2)
    s = state_from_point(p)
    assert lyapunov_value(s, p, gains) == 0.0
    s.x_p[0] += 1.0
    assert lyapunov_value(s, p, gains) == pytest.approx(1 / 400)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.sampled_from(TEMPLATES))
def test_lyapunov_decreases_on_linear_plant(seed, template):
    rng = np.random.default_rng(seed)
    cost, lim, model = random_instance(rng, template, n=int(rng.integers(1, 5)))
    p = reference_qp_solve(cost, lim, model)
    gains = ControllerGains(rng.uniform(0.5, 5.0, model.n), 1.0, 1.0)
    ctrl = PrimalDualController(cost, lim, gains, V_NOM)
    out = lambda u: model.K_G @ u + model.w
    v = np.zeros(5 * model.n)
    vals = [lyapunov_value(ControllerState.from_vector(v, model.n), p, gains)]
    for _ in range(20):
        v = converge_flow(ctrl, model.K_G, out, v0=v, h=1e-3, t_end=0.01)
        vals.append(lyapunov_value(ControllerState.from_vector(v, model.n), p, gains))
    assert np.all(np.diff(vals) <= 1e-9 * vals[0])
