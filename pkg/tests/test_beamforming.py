import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wpsn import beamforming as bf
from wpsn.errors import DegenerateChannel, DegenerateGeometry, InvalidArgument

from conftest import geometry_channel, random_budget, random_channel

FAST_ORACLE = bf.OracleConfig(restarts=6)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# -- receive power ---------------------------------------------------------------

def test_zero_weights_give_zero_power():
    H = np.ones((2, 3), complex)
    np.testing.assert_array_equal(bf.receive_power(H, np.zeros(3)), 0.0)


def test_scalar_receive_power():
    r = bf.receive_power(np.array([[0.01]]), np.array([np.sqrt(0.14)]))
    assert r[0] == pytest.approx(1.4e-5, rel=1e-12)


def test_receive_power_shape_mismatch():
    with pytest.raises(InvalidArgument):
        bf.receive_power(np.ones((2, 3)), np.ones(4))


def test_budget_rejects_nonpositive():
    with pytest.raises(InvalidArgument):
        bf.PowerBudget(0.1, -1.0)


# -- time sharing ----------------------------------------------------------------

def test_per_antenna_only_branch(rng):
    h = random_channel(rng, 1, 5)[0]
    b = bf.PowerBudget(0.1, 0.5)
    w = bf.ts_weights(h, b)
    np.testing.assert_allclose(np.abs(w), np.sqrt(0.1), rtol=0, atol=1e-12)
    # phases conjugate the channel, up to one global rotation
    ph = np.angle(w * h)
    np.testing.assert_allclose(np.exp(1j * (ph - ph[0])), 1.0, atol=1e-12)


def test_total_only_branch_is_matched_filter(rng):
    h = random_channel(rng, 1, 4)[0]
    b = bf.PowerBudget(1.0, 0.7)
    w = bf.ts_weights(h, b)
    mf = np.conj(h) / np.linalg.norm(h) * np.sqrt(0.7)
    assert abs(np.vdot(mf, w)) / (np.linalg.norm(mf) * np.linalg.norm(w)) == pytest.approx(1, abs=1e-12)
    assert np.sum(np.abs(w) ** 2) == pytest.approx(0.7, abs=1e-12)


def test_two_antenna_worked_example():
    x, price = bf.water_fill([1.0, 2.0], bf.PowerBudget(1.0, 1.5))
    np.testing.assert_allclose(x, [np.sqrt(0.5), 1.0], atol=1e-12)
    assert price == pytest.approx(0.5 * np.sqrt(2.0), abs=1e-12)
    assert float(np.dot([1, 2], x)) == pytest.approx(2.7071, abs=1e-4)


def test_two_antenna_example_against_grid():
    a = np.array([1.0, 2.0])
    g = np.linspace(0, 1, 2001)
    X1, X2 = np.meshgrid(g, g)
    ok = X1**2 + X2**2 <= 1.5
    best = np.max(np.where(ok, a[0] * X1 + a[1] * X2, -np.inf))
    x, _ = bf.water_fill(a, bf.PowerBudget(1.0, 1.5))
    assert a @ x >= best - 1e-9


def test_zero_row_is_degenerate():
    with pytest.raises(DegenerateChannel):
        bf.ts_weights(np.zeros(3), bf.PowerBudget(1, 1))


def test_zero_gain_antenna_gets_no_power():
    x, _ = bf.water_fill([0.0, 1.0, 2.0], bf.PowerBudget(0.5, 0.6))
    assert x[0] == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.floats(0.02, 0.5), st.floats(0.02, 3.0), st.integers(0, 10_000))
def test_water_fill_feasible_and_kkt(n, p_ant, p_tot, seed):
    a = np.random.default_rng(seed).uniform(0.01, 2.0, n)
    b = bf.PowerBudget(p_ant, p_tot)
    x, price = bf.water_fill(a, b)
    assert np.all(x**2 <= p_ant + 1e-9) and np.sum(x**2) <= p_tot + 1e-9
    if p_tot < n * p_ant:
        # total budget binds and uncapped entries follow a / (2 price)
        assert np.sum(x**2) == pytest.approx(p_tot, rel=1e-9)
        free = x < np.sqrt(p_ant) - 1e-12
        np.testing.assert_allclose(x[free], a[free] / (2 * price), rtol=1e-9)


def test_ts_matches_oracle(rng):
    for _ in range(40):
        N = int(rng.integers(2, 7))
        h = random_channel(rng, 1, N)[0]
        b = random_budget(rng)
        w = bf.ts_weights(h, b)
        _, obj = bf.sdr_oracle(h[None], [1.0], b, FAST_ORACLE)
        assert abs(h @ w) ** 2 >= obj * (1 - 1e-6)
        assert b.is_feasible(w)


def test_ts_solution_k1():
    h = np.array([[0.3, 0.4j]])
    ts = bf.ts_solution(h, bf.PowerBudget(1, 1))
    assert ts.power_matrix.shape == (1, 1)
    assert ts.power_matrix[0, 0] == pytest.approx(0.25)


def test_ts_orthogonal_rows_total_power_only():
    H = np.array([[1.0, 1.0], [1.0, -1.0]], complex)
    ts = bf.ts_solution(H, bf.PowerBudget(5, 1))
    assert ts.power_matrix[0, 1] == pytest.approx(0, abs=1e-15)
    assert ts.power_matrix[1, 0] == pytest.approx(0, abs=1e-15)


def test_ts_average_power(rng):
    ts = bf.ts_solution(random_channel(rng, 3, 4), bf.PowerBudget(0.2, 0.5))
    np.testing.assert_array_equal(ts.average_power([1, 0, 0]), ts.power_matrix[0])
    with pytest.raises(InvalidArgument):
        ts.average_power([0.5, 0.6, 0])


# -- beam splitting --------------------------------------------------------------

def test_bs_k1_is_matched_filter(rng):
    h = random_channel(rng, 1, 6)
    b = bf.PowerBudget(10.0, 1.0)
    w = bf.bs_weights(h, [1.0], b)
    mf = bf.ts_weights(h[0], b)
    assert abs(np.vdot(w, mf)) / (np.linalg.norm(w) * np.linalg.norm(mf)) >= 1 - 1e-12


def test_bs_one_hot_equals_ts_power(rng):
    H = random_channel(rng, 3, 5)
    b = bf.PowerBudget(10.0, 1.0)
    for k in range(3):
        r = bf.receive_power(H, bf.bs_weights(H, np.eye(3)[k], b))
        ts = bf.ts_solution(H, b)
        assert r[k] == pytest.approx(ts.power_matrix[k, k], rel=1e-10)


def test_bs_total_power_regime_matches_oracle(rng):
    for _ in range(20):
        K, N = int(rng.integers(2, 4)), int(rng.integers(2, 9))
        H = random_channel(rng, K, N)
        alpha = rng.uniform(0, 1, K)
        b = bf.PowerBudget(5.0, float(rng.uniform(0.1, 1.0)))
        w = bf.bs_weights(H, alpha, b)
        _, obj = bf.sdr_oracle(H, alpha, b, FAST_ORACLE)
        assert rel(alpha @ bf.receive_power(H, w), obj) < 1e-6
        assert b.is_feasible(w)


def test_bs_is_feasible_under_per_antenna_caps(rng):
    for _ in range(50):
        H = random_channel(rng, 3, 6)
        b = random_budget(rng)
        assert b.is_feasible(bf.bs_weights(H, rng.uniform(0, 1, 3), b))


def test_bs_never_worse_than_best_ts_beam(rng):
    for _ in range(50):
        H = random_channel(rng, 3, 6)
        b = random_budget(rng)
        alpha = rng.uniform(0, 1, 3)
        ts = bf.ts_solution(H, b)
        bs = alpha @ bf.receive_power(H, bf.bs_weights(H, alpha, b))
        assert bs >= np.max(ts.power_matrix @ alpha) - 1e-12


def test_bs_rejects_bad_alpha():
    with pytest.raises(InvalidArgument):
        bf.bs_weights(np.ones((2, 2)), [1.0, -1.0], bf.PowerBudget(1, 1))
    with pytest.raises(InvalidArgument):
        bf.bs_weights(np.ones((2, 2)), [1.0], bf.PowerBudget(1, 1))


def test_oracle_single_antenna():
    H = np.array([[0.5], [2.0j]])
    b = bf.PowerBudget(0.3, 0.7)
    w, obj = bf.sdr_oracle(H, [1.0, 0.5], b, FAST_ORACLE)
    assert abs(w[0]) ** 2 == pytest.approx(0.3, rel=1e-9)
    assert obj == pytest.approx(0.3 * (0.25 + 0.5 * 4.0), rel=1e-9)


def test_oracle_at_least_as_good_as_bs(rng):
    for _ in range(100):
        H = random_channel(rng, 2, 2)
        b = random_budget(rng)
        alpha = rng.uniform(0, 1, 2)
        _, obj = bf.sdr_oracle(H, alpha, b, FAST_ORACLE)
        bs = alpha @ bf.receive_power(H, bf.bs_weights(H, alpha, b))
        assert obj >= bs - 1e-9


def test_projection_is_feasible_and_idempotent(rng):
    b = bf.PowerBudget(0.1, 0.35)
    W = random_channel(rng, 20, 5)
    P = bf.project_feasible(W, b)
    assert all(b.is_feasible(p) for p in P)
    np.testing.assert_allclose(bf.project_feasible(P, b), P, atol=1e-14)


# -- region ----------------------------------------------------------------------

def test_region_samples_feasible_and_seeded(rng):
    H = random_channel(rng, 2, 4)
    b = bf.PowerBudget(0.14, 0.3)
    W = np.array([bf.sample_weights(4, b, 7, i) for i in range(200)])
    assert all(b.is_feasible(w) for w in W)
    np.testing.assert_array_equal(bf.sample_region(H, b, 50, 7), bf.sample_region(H, b, 50, 7))
    # sample i does not depend on how many samples are drawn
    np.testing.assert_array_equal(bf.sample_region(H, b, 10, 7), bf.sample_region(H, b, 50, 7)[:10])


def test_region_k1_below_ts(rng):
    H = random_channel(rng, 1, 5)
    b = bf.PowerBudget(0.14, 0.56)
    top = bf.ts_solution(H, b).power_matrix[0, 0]
    assert np.all(bf.sample_region(H, b, 2000, 1) <= top + 1e-9)


def test_dominance_scan_on_two_node_geometry(default_budget):
    H = geometry_channel("circular", (0, 90))
    samples = bf.sample_region(H, default_budget, 2000, 3)
    front = bf.pareto_frontier(H, default_budget, bf.alpha_grid(2, 20), "oracle", FAST_ORACLE)
    assert not bf.dominated(samples, front).any()


def test_dominated_helper():
    front = np.array([[1.0, 1.0], [0.2, 5.0]])
    assert bf.dominated(np.array([[2.0, 2.0], [0.5, 3.0]]), front).tolist() == [True, False]


def test_alpha_grid_shapes():
    assert bf.alpha_grid(2, 5).shape == (5, 2)
    g = bf.alpha_grid(3, 10, seed=1)
    np.testing.assert_allclose(g.sum(axis=1), 1.0)
    np.testing.assert_array_equal(g[:3], np.eye(3))


# -- beta and gain ---------------------------------------------------------------

def test_beta_k1():
    ts = bf.ts_solution(np.array([[0.2, 0.1j]]), bf.PowerBudget(1, 1))
    assert bf.beta_vector(ts)[0] == pytest.approx(1 / ts.power_matrix[0, 0])


def test_beta_symmetric_2x2():
    ts = bf.TsSolution(np.zeros((2, 1)), np.array([[3.0, 1.0], [1.0, 3.0]]), np.zeros(2))
    np.testing.assert_allclose(bf.beta_vector(ts), [0.25, 0.25])


def test_gain_k1_is_one(rng):
    assert bf.beam_splitting_gain(random_channel(rng, 1, 4), bf.PowerBudget(0.1, 0.3)) == pytest.approx(1.0, abs=1e-12)


def test_colocated_nodes_are_degenerate(default_budget):
    H = geometry_channel("circular", (30, 30))
    with pytest.raises(DegenerateGeometry):
        bf.beam_splitting_gain(H, default_budget)


@pytest.mark.parametrize("az", [(0, 40), (0, 90), (0, 150), (0, 60, 120), (0, 120, 240)])
def test_gain_at_least_one(az, default_budget):
    rep = bf.gain_report(geometry_channel("circular", az), default_budget, oracle=FAST_ORACLE)
    assert rep.gamma >= 1 - 1e-9
    assert rep.gamma_oracle >= rep.gamma - 1e-9
