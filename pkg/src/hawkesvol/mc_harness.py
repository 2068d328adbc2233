"""Monte Carlo experiments that check the model's analytic statements.

Each ``run_*`` function takes an ``Experiment`` and returns ``McReport``s;
``run_suite`` strings them together for the ``verify`` command.
"""

from __future__ import annotations

import functools
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import affine_odes, jump_mgf, measures
from .hawkes_sim import MarkedBatch, simulate_hawkes_batch
from .model import HawkesParams, JumpLaw, ModelParams, TimeGrid, default_params, params_to_dict
from .montecarlo import McReport, map_chunks, mean_se
from .sde_sim import cir_mean, simulate_comparison_batch, simulate_variance_batch

log = logging.getLogger("hawkesvol")

KINDS = ("exp-moment", "mean-variance", "comparison", "martingale", "emm", "hawkes-moments")
CHECKPOINTS = (0.2, 0.4, 0.6, 0.8, 1.0)
VIOLATION_TOL = 1e-12


@dataclass(frozen=True)
class Experiment:
    kind: str
    model: ModelParams
    hawkes: HawkesParams
    law: JumpLaw
    n_paths: int = 10_000
    master_seed: int = 0
    grid: TimeGrid | None = None
    workers: int = 1
    options: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.n_paths < 100:
            raise ValueError("n_paths must be >= 100")
        if self.grid is None:
            object.__setattr__(self, "grid", TimeGrid.uniform(self.model.horizon, 100))

    def descriptor(self) -> dict:
        g = self.grid
        return {
            "kind": self.kind,
            "params": params_to_dict(self.model, self.hawkes, self.law),
            "n_paths": self.n_paths,
            "seed": self.master_seed,
            "grid": [g.t_start, g.t_end, g.n_steps],
            "options": [list(o) for o in self.options],
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.descriptor(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _start(exp: Experiment, what: str) -> float:
    log.info("%s config=%s seed=%d paths=%d", what, exp.config_hash(), exp.master_seed, exp.n_paths)
    return time.perf_counter()


def _checkpoint_index(grid: TimeGrid, t: float) -> int:
    k = int(round((t - grid.t_start) / grid.dt))
    if not math.isclose(grid.times[k], t, abs_tol=1e-12):
        raise ValueError(f"checkpoint t={t} is not a grid node")
    return k


# -- oracles ----------------------------------------------------------------

def variance_mean_oracle(model: ModelParams, hawkes: HawkesParams, law: JumpLaw, t, n_steps: int = 2000):
    """E[v_t] from m' = -kappa (m - vbar) + eta E[J] E[lambda_t], RK4 from m(0) = v0."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    ej = jump_mgf.mean(law)
    s = np.linspace(0.0, float(t.max()), n_steps + 1)

    def rhs(u, m):
        return -model.kappa * (m - model.vbar) + model.eta * ej * float(hawkes.mean_intensity(u))

    m = affine_odes.rk4(rhs, model.v0, s)
    return np.interp(t, s, m)


# -- chunk kernels (module level so they pickle) ----------------------------

def _exp_moment_chunk(rng, n, model, hawkes, law, grid, c):
    marked = simulate_hawkes_batch(hawkes, law, model.horizon, rng, n)
    vb = simulate_variance_batch(model, marked, grid, "exact", rng)
    return {"y": np.exp(c * vb.integrated())}


def _mean_chunk(rng, n, model, hawkes, law, grid, jumps):
    if jumps:
        marked = simulate_hawkes_batch(hawkes, law, model.horizon, rng, n)
    else:
        marked = MarkedBatch(np.empty((n, 0)), np.empty((n, 0)), np.zeros(n, int), hawkes, model.horizon)
    vb = simulate_variance_batch(model, marked, grid, "exact", rng)
    idx = [_checkpoint_index(grid, t) for t in CHECKPOINTS]
    return {f"v{t}": vb.values[:, k] for t, k in zip(CHECKPOINTS, idx)}


def _comparison_chunk(rng, n, model, hawkes, law, grid, scheme):
    marked = simulate_hawkes_batch(hawkes, law, model.horizon, rng, n)
    vb = simulate_comparison_batch(model, marked, grid, rng, scheme)
    return {
        "bad": (vb.max_violation > VIOLATION_TOL).astype(float),
        "worst": vb.max_violation,
        "events": marked.counts.astype(float),
    }


def _hawkes_chunk(rng, n, hawkes, law, horizon):
    b = simulate_hawkes_batch(hawkes, law, horizon, rng, n)
    lam_n = b.compensator_at(horizon)
    out = {
        "N": b.count_at(horizon) - lam_n,
        "L": b.compound_at(horizon) - jump_mgf.mean(law) * lam_n,
    }
    for t in CHECKPOINTS:
        out[f"lam{t}"] = b.intensity_at(t * horizon)
    return out


# -- experiments ------------------------------------------------------------

def run_exp_moment(c: float, exp: Experiment) -> McReport:
    """E[exp(c int v)] against exp(F(0) + G(0) v0 + H(0) lambda0), bound mode."""
    t0 = _start(exp, f"exp-moment c={c!r}")
    m, h, law = exp.model, exp.hawkes, exp.law
    c_l = affine_odes.compute_c_l(m, h, law)
    if c >= c_l and c > 0:
        raise affine_odes.InadmissibleExponent(f"c = {c} >= c_l = {c_l}")
    bound = affine_odes.supermartingale_bound(c, TimeGrid.uniform(m.horizon, 2000), m, h, law, c_limit=c_l)
    fn = functools.partial(_exp_moment_chunk, model=m, hawkes=h, law=law, grid=exp.grid, c=c)
    y = map_chunks(fn, exp.n_paths, exp.master_seed, f"exp-moment:{c!r}", exp.workers)["y"]
    est, se = mean_se(y)
    return McReport(
        f"E[exp(c int v)] <= M(0), c={c:.6g}", est, se, bound.bound_M0, "bound", exp.n_paths,
        wall_time=time.perf_counter() - t0,
        extra={"c": c, "c_l": c_l, "c_over_c_l": c / c_l, "config": exp.config_hash()},
    )


def run_mean_variance(exp: Experiment) -> list[McReport]:
    """Jump-free and full-model E[v_t] at five checkpoints, two-sided."""
    t0 = _start(exp, "mean-variance")
    m, h, law = exp.model, exp.hawkes, exp.law
    ts = [t * m.horizon for t in CHECKPOINTS]
    reports = []
    for jumps in (False, True):
        fn = functools.partial(_mean_chunk, model=m, hawkes=h, law=law, grid=exp.grid, jumps=jumps)
        out = map_chunks(fn, exp.n_paths, exp.master_seed, f"mean-variance:{jumps}", exp.workers)
        if jumps:
            target = variance_mean_oracle(m, h, law, ts)
        else:
            target = cir_mean(m.v0, np.array(ts), m.kappa, m.vbar)
        label = "E[v_t]" if jumps else "E[v~_t] (no jumps)"
        for t, key, tgt in zip(ts, CHECKPOINTS, target):
            est, se = mean_se(out[f"v{key}"])
            reports.append(McReport(f"{label} t={t:.3g}", est, se, float(tgt), "two-sided", exp.n_paths,
                                    extra={"t": t, "config": exp.config_hash()}))
    wall = time.perf_counter() - t0
    for r in reports:
        r.wall_time = wall / len(reports)
    return reports


def run_comparison(exp: Experiment) -> McReport:
    """Fraction of coupled paths where the jump-free variance exceeds the jumping one.

    ``options`` may carry ``("scheme", name)``; the default is the
    order-preserving implicit scheme.
    """
    t0 = _start(exp, "comparison")
    m, h, law = exp.model, exp.hawkes, exp.law
    scheme = dict(exp.options).get("scheme", "implicit")
    fn = functools.partial(_comparison_chunk, model=m, hawkes=h, law=law, grid=exp.grid, scheme=scheme)
    out = map_chunks(fn, exp.n_paths, exp.master_seed, f"comparison:{scheme}", exp.workers)
    frac = math.fsum(out["bad"]) / exp.n_paths
    return McReport(
        "v~ <= v + 1e-12 pathwise", frac, 0.0, 0.0, "exact", exp.n_paths,
        wall_time=time.perf_counter() - t0,
        extra={"scheme": scheme, "violating_paths": int(math.fsum(out["bad"])),
               "max_excess": float(out["worst"].max()),
               "mean_events": math.fsum(out["events"]) / exp.n_paths,
               "dt": exp.grid.dt, "config": exp.config_hash()},
    )


def run_hawkes_moments(exp: Experiment) -> list[McReport]:
    """Compensated N and L centre on zero; E[lambda_t] matches its mean ODE."""
    t0 = _start(exp, "hawkes-moments")
    h, law, T = exp.hawkes, exp.law, exp.model.horizon
    fn = functools.partial(_hawkes_chunk, hawkes=h, law=law, horizon=T)
    out = map_chunks(fn, exp.n_paths, exp.master_seed, "hawkes-moments", exp.workers)
    reports = []
    for key, name in (("N", "E[N_T - Lambda^N_T]=0"), ("L", "E[L_T - Lambda^L_T]=0")):
        est, se = mean_se(out[key])
        reports.append(McReport(name, est, se, 0.0, "two-sided", exp.n_paths, extra={"config": exp.config_hash()}))
    for t in CHECKPOINTS:
        est, se = mean_se(out[f"lam{t}"])
        reports.append(McReport(f"E[lambda_t] t={t * T:.3g}", est, se, float(h.mean_intensity(t * T)),
                                "two-sided", exp.n_paths, extra={"t": t * T, "config": exp.config_hash()}))
    wall = time.perf_counter() - t0
    for r in reports:
        r.wall_time = wall / len(reports)
    return reports


def run_martingale(exp: Experiment, fractions=(0.3, 0.6, 0.9)) -> list[McReport]:
    """E[X_T] = 1 for a = f sqrt(2 c_l), plus E[Z_T] = 1 and the drift identity."""
    _start(exp, "martingale")
    m, h, law = exp.model, exp.hawkes, exp.law
    c_l = affine_odes.compute_c_l(m, h, law)
    reports = []
    for f in fractions:
        a = f * measures.elmm_bound(c_l)
        res = measures.martingale_check(m, h, law, a, exp.n_paths, exp.grid, exp.master_seed, exp.workers, c_l)
        for key in ("X", "Z", "drift"):
            r = res[key]
            r.name = f"{r.name} a={f:g}*sqrt(2c_l)"
            r.extra["config"] = exp.config_hash()
            reports.append(r)
    return reports


def run_emm(exp: Experiment, fraction: float = 0.5) -> list[McReport]:
    """Direct Q-simulation, importance weighting under P, and their agreement."""
    _start(exp, "emm")
    m, h, law = exp.model, exp.hawkes, exp.law
    c_l = affine_odes.compute_c_l(m, h, law)
    a = fraction * measures.emm_bound(c_l, m.rho)
    direct = measures.emm_check_direct(m, h, law, a, exp.n_paths, exp.grid, exp.master_seed, exp.workers, c_l)
    weighted = measures.emm_check_weighted(m, h, law, a, exp.n_paths, exp.grid, exp.master_seed, exp.workers, c_l)
    both = measures.cross_check(direct, weighted)
    for r in (direct, weighted, both):
        r.extra["config"] = exp.config_hash()
    return [direct, weighted, both]


# -- suites -----------------------------------------------------------------

SUITE_PATHS = {"quick": 2_000, "full": 20_000}


def suite_experiments(
    name: str,
    model: ModelParams | None = None,
    hawkes: HawkesParams | None = None,
    law: JumpLaw | None = None,
    seed: int = 0,
    n_paths: int | None = None,
    n_steps: int | None = None,
    workers: int = 1,
) -> list[tuple[str, Experiment]]:
    if name not in SUITE_PATHS:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITE_PATHS)}")
    if model is None:
        model, hawkes, law = default_params()
    n = SUITE_PATHS[name] if n_paths is None else n_paths
    steps = 100 if n_steps is None else n_steps
    grid = TimeGrid.uniform(model.horizon, steps)
    fine = TimeGrid.uniform(model.horizon, max(steps, 1000 if name == "full" else 200))
    base = Experiment("exp-moment", model, hawkes, law, n, seed, grid, workers)
    return [
        ("exp-moment", base),
        ("mean-variance", replace(base, kind="mean-variance")),
        ("hawkes-moments", replace(base, kind="hawkes-moments")),
        ("comparison", replace(base, kind="comparison", grid=fine, n_paths=max(100, n // 2))),
        ("martingale", replace(base, kind="martingale")),
        ("emm", replace(base, kind="emm")),
    ]


def run_experiment(kind: str, exp: Experiment) -> list[McReport]:
    if kind == "exp-moment":
        c_l = affine_odes.compute_c_l(exp.model, exp.hawkes, exp.law)
        return [run_exp_moment(f * c_l, exp) for f in (0.0, 0.25, 0.5, 0.75)]
    if kind == "mean-variance":
        return run_mean_variance(exp)
    if kind == "hawkes-moments":
        return run_hawkes_moments(exp)
    if kind == "comparison":
        return [run_comparison(exp)]
    if kind == "martingale":
        return run_martingale(exp)
    if kind == "emm":
        return run_emm(exp)
    raise ValueError(kind)


def run_suite(name: str, **kwargs) -> list[McReport]:
    reports = []
    for kind, exp in suite_experiments(name, **kwargs):
        reports.extend(run_experiment(kind, exp))
    return reports


def suite_json(name: str, seed: int, reports: list[McReport]) -> dict:
    return {
        "suite": name,
        "seed": seed,
        "all_pass": all(r.status != "fail" for r in reports),
        "reports": [r.to_json() for r in reports],
    }


def format_table(reports: list[McReport]) -> str:
    head = f"{'check':<52} {'estimate':>14} {'target':>14} {'std_err':>11} {'status':>12} {'secs':>7}"
    lines = [head, "-" * len(head)]
    for r in reports:
        lines.append(
            f"{r.name[:52]:<52} {r.estimate:>14.8g} {r.target:>14.8g} {r.std_error:>11.3g} "
            f"{r.status:>12} {r.wall_time:>7.2f}"
        )
    return "\n".join(lines)
