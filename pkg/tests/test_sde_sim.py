import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from hawkesvol.hawkes_sim import MarkedBatch, MarkedPointPath, simulate_hawkes_batch
from hawkesvol.montecarlo import mean_se
from hawkesvol.model import Constant, Exponential, HawkesParams, ModelParams, TimeGrid, default_params
from hawkesvol.sde_sim import (
    PositivityViolated,
    VarianceBatch,
    cir_mean,
    cir_transition,
    implicit_sqrt_step,
    noncentral_chisquare,
    simulate_comparison_pair,
    simulate_stock,
    simulate_variance,
    simulate_variance_batch,
    write_paths_csv,
)


def _empty(n, hawkes=HawkesParams(), horizon=1.0):
    return MarkedBatch(np.empty((n, 0)), np.empty((n, 0)), np.zeros(n, int), hawkes, horizon)


# -- CIR transition -----------------------------------------------------------

def test_cir_mean_formula_value():
    assert math.isclose(cir_mean(0.09, 1.0, 1.0, 0.04), 0.09 * math.exp(-1) + 0.04 * (1 - math.exp(-1)))
    assert abs(float(cir_mean(0.09, 1.0, 1.0, 0.04)) - 0.05840) < 1e-5


def test_cir_transition_mean():
    rng = np.random.default_rng(1)
    draws = cir_transition(np.full(100_000, 0.09), 1.0, 1.0, 0.04, 0.2, rng)
    est, se = mean_se(draws)
    assert abs(est - cir_mean(0.09, 1.0, 1.0, 0.04)) <= 4 * se


@pytest.mark.parametrize("dt", [0.01, 0.5, 3.0])
def test_cir_transition_stationary_start(dt):
    rng = np.random.default_rng(2)
    est, se = mean_se(cir_transition(np.full(50_000, 0.04), dt, 2.0, 0.04, 0.3, rng))
    assert abs(est - 0.04) <= 4 * se


def test_cir_transition_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        cir_transition(0.04, 0.0, 2.0, 0.04, 0.3, np.random.default_rng(0))


@pytest.mark.parametrize("df,nc", [(3.5, 2.0), (0.6, 1.5), (1.0, 0.3), (8.0, 40.0)])
def test_noncentral_chisquare_against_scipy(df, nc):
    x = noncentral_chisquare(np.full(20_000, df), np.full(20_000, nc), np.random.default_rng(3))
    assert stats.kstest(x, stats.ncx2(df, nc).cdf).pvalue > 0.01


def test_cir_against_fine_euler():
    m = ModelParams(kappa=1.0, vbar=0.04, sigma=0.2, v0=0.09)
    grid = TimeGrid.uniform(1.0, 10_000)
    vb = simulate_variance_batch(m, _empty(4000), grid, "euler", np.random.default_rng(5))
    est, se = mean_se(vb.values[:, -1])
    assert abs(est - cir_mean(0.09, 1.0, 1.0, 0.04)) <= 4 * se


# -- variance with jumps ------------------------------------------------------

def test_zero_events_equals_eta_zero(defaults):
    m, h, law = defaults
    grid = TimeGrid.uniform(1.0, 20)
    a = simulate_variance_batch(m, _empty(30), grid, "exact", np.random.default_rng(9))
    b = simulate_variance_batch(m.with_(eta=0.0), _empty(30), grid, "exact", np.random.default_rng(9))
    assert np.array_equal(a.values, b.values)


def test_eta_zero_matches_cir_mean(defaults):
    m, h, law = defaults
    m = m.with_(eta=0.0, v0=0.09)
    grid = TimeGrid.uniform(1.0, 5)
    marked = simulate_hawkes_batch(h, law, 1.0, np.random.default_rng(10), 40_000)
    vb = simulate_variance_batch(m, marked, grid, "exact", np.random.default_rng(11))
    for k in range(1, 6):
        est, se = mean_se(vb.values[:, k])
        assert abs(est - cir_mean(m.v0, grid.times[k], m.kappa, m.vbar)) <= 4 * se


def test_mean_ode_oracle_with_jumps():
    from hawkesvol.mc_harness import variance_mean_oracle

    m = ModelParams(kappa=1.0, vbar=0.04, sigma=0.2, v0=0.04, eta=1.0)
    h = HawkesParams(1.0, 0.5, 1.0)
    law = Exponential(10.0)
    rng = np.random.default_rng(12)
    marked = simulate_hawkes_batch(h, law, 1.0, rng, 40_000)
    vb = simulate_variance_batch(m, marked, TimeGrid.uniform(1.0, 10), "exact", rng)
    est, se = mean_se(vb.values[:, -1])
    assert abs(est - float(variance_mean_oracle(m, h, law, 1.0)[0])) <= 4 * se


@pytest.mark.parametrize("scheme", ["exact", "euler", "implicit"])
def test_jump_reconstruction(defaults, scheme):
    m, h, law = defaults
    marked = simulate_hawkes_batch(h, law, 1.0, np.random.default_rng(13), 200)
    vb = simulate_variance_batch(m, marked, TimeGrid.uniform(1.0, 50), scheme, np.random.default_rng(14))
    for p in range(vb.n_paths):
        path = vb.path(p)
        assert math.isclose(path.jumps().sum(), m.eta * marked.compound_at(1.0)[p], rel_tol=1e-12, abs_tol=1e-15)
        assert np.allclose(path.jumps(), m.eta * marked.path(p).marks, rtol=1e-12)


def test_event_on_grid_node(defaults):
    m, h, _ = defaults
    p = MarkedPointPath(np.array([0.5]), np.array([0.2]), h.lambda0, h.alpha, h.beta, 1.0)
    path = simulate_variance(m, p, TimeGrid.uniform(1.0, 4), "exact", np.random.default_rng(0))
    assert path.times.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert math.isclose(path.jumps()[0], m.eta * 0.2, rel_tol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exact_scheme_positive(seed):
    m, h, law = default_params()
    rng = np.random.default_rng(seed)
    marked = simulate_hawkes_batch(h, law, 1.0, rng, 100)
    vb = simulate_variance_batch(m, marked, TimeGrid.uniform(1.0, 100), "exact", rng)
    assert vb.min_value.min() > 0


def test_positivity_violation_raises(monkeypatch, defaults):
    import hawkesvol.sde_sim as sde

    monkeypatch.setattr(sde, "cir_transition", lambda v, dt, *a: np.zeros_like(v))
    with pytest.raises(PositivityViolated):
        sde.simulate_variance_batch(defaults[0], _empty(3), TimeGrid.uniform(1.0, 4), "exact",
                                    np.random.default_rng(0))


@pytest.mark.slow
def test_scheme_agreement(defaults):
    m, h, law = defaults
    n = 4000
    marked = simulate_hawkes_batch(h, law, 1.0, np.random.default_rng(15), n)
    ex = simulate_variance_batch(m, marked, TimeGrid.uniform(1.0, 100), "exact", np.random.default_rng(16))
    eu = simulate_variance_batch(m, marked, TimeGrid.uniform(1.0, 10_000), "euler", np.random.default_rng(17))
    (a, sa), (b, sb) = mean_se(ex.values[:, -1]), mean_se(eu.values[:, -1])
    assert abs(a - b) <= 4 * math.hypot(sa, sb)


def test_implicit_step_monotone_and_positive():
    rng = np.random.default_rng(18)
    x = np.sort(rng.uniform(0.0, 0.2, 1000))
    dw = rng.standard_normal() * 0.03
    y = implicit_sqrt_step(x, 1e-3, np.full_like(x, dw), 2.0, 0.04, 0.3)
    assert np.all(np.diff(y) >= 0) and np.all(y > 0)


def test_implicit_scheme_needs_strict_feller():
    m = ModelParams(kappa=1.0, vbar=0.02, sigma=0.4)
    with pytest.raises(ValueError):
        simulate_variance_batch(m, _empty(2), TimeGrid.uniform(1.0, 4), "implicit", np.random.default_rng(0))


# -- coupled comparison -------------------------------------------------------

def _hand_stepped(scheme, v0, kappa, vbar, sigma, eta, j, t1, normals):
    """Scalar re-implementation on the partition {0, .25, .5, t1, .75, 1}."""
    nodes = [0.0, 0.25, 0.5, t1, 0.75, 1.0]

    def step(x, dt, dw):
        if scheme == "euler":
            xp = max(x, 0.0)
            return x - kappa * (xp - vbar) * dt + sigma * math.sqrt(xp) * dw
        y = math.sqrt(max(x, 0.0))
        b = y + 0.5 * sigma * dw
        lead = 1.0 + 0.5 * kappa * dt
        c = (4 * kappa * vbar - sigma**2) / 8 * dt
        return ((b + math.sqrt(b * b + 4 * lead * c)) / (2 * lead)) ** 2

    v, vt = v0, v0
    jump_path, free_path = [v0], [v0]
    for i in range(5):
        dt = nodes[i + 1] - nodes[i]
        dw = math.sqrt(dt) * normals[i]
        v, vt = step(v, dt, dw), step(vt, dt, dw)
        if nodes[i + 1] == t1:
            pre = max(v, 0.0)
            v = pre + eta * j
            jump_path.append(pre)
            free_path.append(max(vt, 0.0))
        jump_path.append(max(v, 0.0))
        free_path.append(max(vt, 0.0))
    return jump_path, free_path


@pytest.mark.parametrize("scheme", ["euler", "implicit"])
def test_four_step_coupled_example(scheme):
    m = ModelParams(v0=0.04, kappa=2.0, vbar=0.04, sigma=0.3, eta=0.5)
    h = HawkesParams()
    j, t1 = 0.1, 0.6
    marked = MarkedPointPath(np.array([t1]), np.array([j]), 1.0, 1.0, 2.0, 1.0)
    grid = TimeGrid.uniform(1.0, 4)
    (gt, free), path = simulate_comparison_pair(m, h, Constant(j), grid, np.random.default_rng(21), marked, scheme)
    normals = np.random.default_rng(21).standard_normal(5)
    want_jump, want_free = _hand_stepped(scheme, 0.04, 2.0, 0.04, 0.3, 0.5, j, t1, normals)
    # grid-only values of the hand path: indices of 0, .25, .5, .75, 1 (skip the t1 pair)
    grid_idx = [0, 1, 2, 5, 6]
    assert np.allclose(free, [want_free[i] for i in grid_idx], rtol=1e-14, atol=0)
    assert np.allclose(path.values, [want_jump[i] for i in (0, 1, 2, 4, 5, 6)], rtol=1e-14, atol=0)
    assert math.isclose(path.jumps()[0], m.eta * j, rel_tol=1e-13)
    gap_before = want_jump[3] - want_free[3]
    gap_after = want_jump[4] - want_free[4]
    assert math.isclose(gap_after - gap_before, m.eta * j, rel_tol=1e-12)
    assert all(a - b >= 0 for a, b in zip(want_jump[4:], want_free[4:]))


def test_no_events_paths_identical(defaults):
    m, h, law = defaults
    marked = MarkedPointPath.empty(h, 1.0)
    (_, free), path = simulate_comparison_pair(m, h, law, TimeGrid.uniform(1.0, 200), np.random.default_rng(0), marked)
    assert np.array_equal(free, path.values)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_implicit_comparison_holds(seed):
    m, h, law = default_params()
    (_, free), path = simulate_comparison_pair(m, h, law, TimeGrid.uniform(1.0, 500), np.random.default_rng(seed))
    on_grid = ~path.is_event
    assert np.all(free <= path.values[on_grid] + 1e-12)
    assert path.batch.max_violation[0] <= 1e-12


def test_full_truncation_excess_confined_near_zero(defaults):
    """Full-truncation Euler is not order preserving close to 0; an excess can only start there."""
    m, h, law = defaults
    rng = np.random.default_rng(22)
    marked = simulate_hawkes_batch(h, law, 1.0, rng, 3000)
    vb = simulate_variance_batch(m, marked, TimeGrid.uniform(1.0, 1000), "euler", rng, companion=True)
    excess = vb.companion - vb.values
    bad = excess > 1e-12
    for p in np.flatnonzero(bad.any(axis=1)):
        k = int(np.argmax(bad[p]))
        assert max(vb.values[p, k - 1], vb.companion[p, k - 1]) < 1e-3
    assert np.all(excess <= 1e-3)


# -- stock --------------------------------------------------------------------

def test_zero_variance_stub_gives_deterministic_growth():
    from hawkesvol.model import PiecewiseConstant

    mu = PiecewiseConstant(((0.0, 0.05), (0.5, 0.10)))
    m = ModelParams(mu=mu)
    grid = TimeGrid.uniform(1.0, 10)
    z = np.zeros((3, 10))
    vb = VarianceBatch(grid, "euler", m.kappa, m.vbar, np.zeros((3, 11)), z, z, z,
                       np.empty((3, 0)), np.empty((3, 0)), _empty(3), np.zeros(3))
    sb = simulate_stock(m, vb, grid, None, np.random.default_rng(0))
    want = m.s0 * np.exp([mu.integral(t) for t in grid.times])
    assert np.allclose(np.exp(sb.log_s), want, rtol=1e-13)


def test_rho_zero_decouples_shocks(defaults):
    m, h, law = defaults
    m = m.with_(rho=0.0)
    rng = np.random.default_rng(23)
    marked = simulate_hawkes_batch(h, law, 1.0, rng, 20_000)
    grid = TimeGrid.uniform(1.0, 10)
    vb = simulate_variance_batch(m, marked, grid, "euler", rng)
    sb = simulate_stock(m, vb, grid, None, rng)
    shock_s = np.diff(sb.log_s, axis=1)[:, 3] - (m.mu(0.3) * grid.dt - 0.5 * vb.step_variance[:, 3])
    r = np.corrcoef(shock_s, vb.int_sqrt_dw[:, 3])[0, 1]
    assert abs(r) <= 4 / math.sqrt(shock_s.size)


def test_stock_starts_at_s0(defaults):
    m, h, law = defaults
    rng = np.random.default_rng(24)
    grid = TimeGrid.uniform(1.0, 10)
    vb = simulate_variance_batch(m, simulate_hawkes_batch(h, law, 1.0, rng, 5), grid, "exact", rng)
    sb = simulate_stock(m, vb, grid, None, rng)
    assert np.all(np.exp(sb.log_s[:, 0]) == pytest.approx(m.s0))
    assert sb.measure == "P"


def test_stock_rejects_other_grid(defaults):
    m, h, law = defaults
    rng = np.random.default_rng(25)
    vb = simulate_variance_batch(m, _empty(2), TimeGrid.uniform(1.0, 10), "exact", rng)
    with pytest.raises(ValueError):
        simulate_stock(m, vb, TimeGrid.uniform(1.0, 20), None, rng)


def test_paths_csv_columns(tmp_path, defaults):
    m, h, law = defaults
    rng = np.random.default_rng(26)
    grid = TimeGrid.uniform(1.0, 4)
    vb = simulate_variance_batch(m, simulate_hawkes_batch(h, law, 1.0, rng, 2), grid, "exact", rng)
    write_paths_csv(tmp_path / "p.csv", vb, simulate_stock(m, vb, grid, None, rng))
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "path_id,t,v,logS,lambda,N,L"
    assert len(lines) == 1 + 2 * 5
