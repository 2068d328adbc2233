"""Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines; they are
also printed through ``capsys.disabled`` so plain ``pytest -v`` shows them.
"""

import json
import math

import numpy as np
import pytest

from hawkesvol import jump_mgf
from hawkesvol.affine_odes import (
    compute_c_l,
    compute_c_s,
    context,
    envelopes,
    feasible,
    solve_F,
    solve_G,
    solve_H,
    solve_h,
)
from hawkesvol.io import dumps
from hawkesvol.mc_harness import (
    Experiment,
    run_comparison,
    run_emm,
    run_exp_moment,
    run_hawkes_moments,
    run_martingale,
    run_mean_variance,
    run_suite,
    suite_json,
)
from hawkesvol.model import Constant, Exponential, Gamma, TimeGrid, default_params, example_laws

pytestmark = pytest.mark.slow

MC_PATHS = 100_000
COMPARISON_PATHS = 10_000
SEED = 20240611


def _line(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} | {detail}")
    assert ok, detail


def _status_summary(reports):
    return "; ".join(f"{r.name}: {r.estimate:.6g} vs {r.target:.6g} (se {r.std_error:.3g}) {r.status}" for r in reports)


def test_criterion_1_ode_residuals(capsys):
    m, h, _ = default_params()
    grid = TimeGrid.uniform(m.horizon, 10_000)
    dt = grid.dt
    worst_g = worst_h = 0.0
    terminal_ok = True
    for law in example_laws().values():
        c_l = compute_c_l(m, h, law)
        for frac in (0.25, 0.5, 0.9):
            c = frac * c_l
            G = solve_G(c, grid, m)
            H = solve_H(c, grid, G, m, h, law)
            F = solve_F(grid, G, H, m, h)
            terminal_ok &= G[-1] == 0.0 and H[-1] == 0.0 and F[-1] == 0.0
            dG = (G[2:] - G[:-2]) / (2 * dt)
            dH = (H[2:] - H[:-2]) / (2 * dt)
            Gi, Hi = G[1:-1], H[1:-1]
            res_g = dG + 0.5 * m.sigma**2 * Gi**2 - m.kappa * Gi + c
            res_h = dH - h.beta * Hi + jump_mgf.mgf(law, m.eta * Gi) * np.exp(h.alpha * Hi) - 1.0
            worst_g = max(worst_g, float(np.abs(res_g).max()))
            worst_h = max(worst_h, float(np.abs(res_h).max()))
    ok = worst_g < 1e-6 and worst_h < 1e-5 and terminal_ok
    _line(capsys, 1, ok, f"max G residual {worst_g:.2e} (<1e-6), max H residual {worst_h:.2e} (<1e-5), "
                         f"terminal zeros {terminal_ok}")


def test_criterion_2_brackets(capsys):
    m, h, _ = default_params()
    grid = TimeGrid.uniform(m.horizon, 1000)
    tol = 1e-9
    worst = -math.inf
    for law in example_laws().values():
        c_l = compute_c_l(m, h, law)
        for frac in (0.25, 0.5, 0.9):
            c = frac * c_l
            ctx = context(c, m, h, law)
            hh = solve_h(c, grid, m, h, law)
            h_m, h_M = envelopes(ctx, grid)
            excess = max(
                float((-1.0 / h.beta - hh).max()),
                float((hh - ctx.x_p).max()),
                float((h_m - hh).max()),
                float((hh - h_M).max()),
            )
            worst = max(worst, excess)
    _line(capsys, 2, worst <= tol, f"largest bracket excess {worst:.2e} (tolerance {tol:g}) over 3 laws x 3 exponents")


def _closed_form_c_s(m, h, law):
    k2e = m.kappa / (2 * m.eta)
    r = h.alpha / h.beta
    match law:
        case Exponential(rate=lam):
            first = k2e * lam * (1 - r * math.exp(1 - r))
        case Gamma(shape=k, rate=lam):
            first = k2e * lam * (1 - 1 / ((1 / r) * math.exp(r - 1)) ** (1 / k))
        case Constant(value=j):
            first = k2e / j * (math.log(1 / r) + r - 1)
    return min(first, m.c_cap)


def test_criterion_3_c_s_c_l(capsys):
    m, h, _ = default_params()
    tol = 1e-8
    parts, ok = [], True
    for name, law in example_laws().items():
        c_s, c_l = compute_c_s(m, h, law), compute_c_l(m, h, law)
        ref = _closed_form_c_s(m, h, law)
        rel = abs(c_s - ref) / abs(ref)
        below = feasible(c_l - tol, m, h, law)
        above = c_l == m.c_cap or not feasible(min(c_l + tol, m.c_cap), m, h, law)
        this = rel <= 1e-12 and c_s < c_l <= m.c_cap and below and above
        ok &= this
        parts.append(f"{name}: c_s={c_s:.10g} (rel err {rel:.1e}) c_l={c_l:.10g} probes {below}/{above}")
    _line(capsys, 3, ok, "; ".join(parts) + f"; cap={m.c_cap:.6g}")


def test_criterion_4_exponential_moment(capsys):
    m, h, law = default_params()
    c_l = compute_c_l(m, h, law)
    exp = Experiment("exp-moment", m, h, law, MC_PATHS, SEED, TimeGrid.uniform(m.horizon, 100))
    zero = run_exp_moment(0.0, exp)
    reps = [run_exp_moment(f * c_l, exp) for f in (0.25, 0.5, 0.75)]
    ok = zero.estimate == 1.0 and all(r.status == "pass" for r in reps)
    _line(capsys, 4, ok, f"c=0 estimate {zero.estimate!r}; " + _status_summary(reps))


def test_criterion_5_comparison(capsys):
    m, h, law = default_params()
    exp = Experiment("comparison", m, h, law, COMPARISON_PATHS, SEED, TimeGrid.uniform(m.horizon, 1000))
    r = run_comparison(exp)
    # not gating: full truncation loses monotonicity next to 0, reported for reference
    ft = run_comparison(Experiment("comparison", m, h, law, COMPARISON_PATHS, SEED, exp.grid,
                                   options=(("scheme", "euler"),)))
    _line(capsys, 5, r.passed and r.extra["violating_paths"] == 0,
          f"{r.extra['violating_paths']} violating paths of {r.n_paths} at dt={r.extra['dt']:g} "
          f"(scheme {r.extra['scheme']}, max excess {r.extra['max_excess']:.2e}); "
          f"reference full-truncation euler: {ft.extra['violating_paths']} paths, "
          f"max excess {ft.extra['max_excess']:.2e}")


def test_criterion_6_mean_identities(capsys):
    m, h, law = default_params()
    grid = TimeGrid.uniform(m.horizon, 100)
    mv = run_mean_variance(Experiment("mean-variance", m, h, law, MC_PATHS, SEED, grid))
    hm = run_hawkes_moments(Experiment("hawkes-moments", m, h, law, MC_PATHS, SEED, grid))
    reps = mv + hm
    ok = len(reps) == 17 and all(r.passed for r in reps)
    worst = max(abs(r.estimate - r.target) / r.std_error for r in reps)
    _line(capsys, 6, ok, f"{sum(r.passed for r in reps)}/{len(reps)} within 4 SE, worst |z| = {worst:.2f}")


def test_criterion_7_martingales(capsys):
    m, h, law = default_params()
    grid = TimeGrid.uniform(m.horizon, 100)
    mart = run_martingale(Experiment("martingale", m, h, law, MC_PATHS, SEED, grid))
    emm = run_emm(Experiment("emm", m, h, law, MC_PATHS, SEED, grid))
    x_reports = [r for r in mart if r.name.startswith("E[X_T]")]
    ok = len(x_reports) == 3 and all(r.passed for r in mart + emm)
    _line(capsys, 7, ok, _status_summary(x_reports + emm))


def test_criterion_8_determinism(capsys):
    docs = []
    for workers in (1, 2):
        reps = run_suite("full", seed=SEED, workers=workers)
        docs.append(dumps(suite_json("full", SEED, reps)))
    same = docs[0] == docs[1]
    n = len(json.loads(docs[0])["reports"])
    _line(capsys, 8, same, f"full suite ({n} reports) byte-identical across two runs with workers 1 and 2: {same}")
