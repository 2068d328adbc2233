"""Girsanov family Q(a) of equivalent (local) martingale measures.

Under Q(a) the Brownian motions shift by (theta^(a) dt, a sqrt(v) dt), the
discounted stock has drift zero, the variance mean-reverts with
kappa + a sigma towards kappa vbar / (kappa + a sigma), and the compound
Hawkes process keeps its law.
"""

from __future__ import annotations

import enum
import functools
import math
import time
from dataclasses import dataclass

import numpy as np

from . import affine_odes
from .hawkes_sim import simulate_hawkes_batch
from .model import HawkesParams, JumpLaw, ModelParams, TimeGrid
from .montecarlo import McReport, map_chunks, mean_se
from .sde_sim import StockBatch, VarianceBatch, simulate_stock, simulate_variance_batch

MIN_VARIANCE = 1e-12


class NonpositiveVariance(ValueError):
    pass


class ClassificationMismatch(ValueError):
    pass


class Classification(str, enum.Enum):
    EMM = "EMM"
    ELMM = "ELMM"
    INADMISSIBLE = "inadmissible"


def elmm_bound(c_l: float) -> float:
    return math.sqrt(2.0 * c_l)


def emm_bound(c_l: float, rho: float) -> float:
    """Radius of the EMM set; 0 when rho^2 >= c_l."""
    if rho**2 >= c_l:
        return 0.0
    return min(math.sqrt(2.0 * c_l) / 2.0, math.sqrt(c_l - rho**2))


def classify(a: float, c_l: float, rho: float) -> Classification:
    if not c_l > 0:
        raise ValueError("c_l must be > 0")
    if abs(a) < emm_bound(c_l, rho):
        return Classification.EMM
    if abs(a) < elmm_bound(c_l):
        return Classification.ELMM
    return Classification.INADMISSIBLE


@dataclass(frozen=True)
class MeasureSpec:
    a: float
    classification: Classification
    kappa_a: float
    vbar_a: float
    c_l: float

    @property
    def simulable(self) -> bool:
        return self.kappa_a > 0


def measure_spec(a: float, model: ModelParams, c_l: float) -> MeasureSpec:
    kappa_a = model.kappa + a * model.sigma
    vbar_a = model.kappa * model.vbar / kappa_a if kappa_a != 0 else math.inf
    return MeasureSpec(a, classify(a, c_l, model.rho), kappa_a, vbar_a, c_l)


def theta(a: float, t, v, model: ModelParams):
    """Market price of risk for the B-direction."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise NonpositiveVariance("theta needs v > 0")
    sv = np.sqrt(v)
    out = ((np.asarray(model.mu(t)) - model.r) / sv - a * model.rho * sv) / math.sqrt(1.0 - model.rho**2)
    return float(out) if out.ndim == 0 else out


def drift_residual(a: float, t, v, model: ModelParams):
    """mu_t - sqrt(v)(sqrt(1-rho^2) theta + a rho sqrt(v)) - r; zero up to rounding."""
    sv = np.sqrt(np.asarray(v, dtype=float))
    th = theta(a, t, v, model)
    return np.asarray(model.mu(t)) - sv * (math.sqrt(1.0 - model.rho**2) * th + a * model.rho * sv) - model.r


def density_factors(vb: VarianceBatch, sb: StockBatch, model: ModelParams, a: float):
    """(Y_T, Z_T, X_T) per path from P-paths, by left-point Ito sums on the grid.

    The step variance ``vhat_k`` is the one the stock scheme used, so Y
    shares its B-increments with the stock.
    """
    if sb.measure != "P":
        raise ValueError("density factors need paths simulated under P")
    dt = vb.grid.dt
    var = vb.step_variance
    vhat = var / dt
    if np.any(vhat <= MIN_VARIANCE):
        raise NonpositiveVariance(f"step variance <= {MIN_VARIANCE} on some node")
    th = theta(a, vb.grid.times[:-1], vhat, model)
    log_y = -(th * math.sqrt(dt) * sb.normals_b).sum(axis=1) - 0.5 * (th**2).sum(axis=1) * dt
    log_z = -a * vb.int_sqrt_dw.sum(axis=1) - 0.5 * a * a * var.sum(axis=1)
    y, z = np.exp(log_y), np.exp(log_z)
    return y, z, np.exp(log_y + log_z)


# -- Monte Carlo checks -----------------------------------------------------

def _p_chunk(rng, n, model, hawkes, law, grid, a):
    marked = simulate_hawkes_batch(hawkes, law, model.horizon, rng, n)
    vb = simulate_variance_batch(model, marked, grid, "exact", rng)
    sb = simulate_stock(model, vb, grid, None, rng)
    y, z, x = density_factors(vb, sb, model, a)
    disc = math.exp(-model.r * model.horizon) * sb.s_final
    resid = np.abs(drift_residual(a, grid.times[:-1], vb.step_variance / grid.dt, model)).max(axis=1)
    return {"X": x, "Y": y, "Z": z, "XS": x * disc, "resid": resid}


def _q_chunk(rng, n, model, hawkes, law, grid, spec):
    marked = simulate_hawkes_batch(hawkes, law, model.horizon, rng, n)
    vb = simulate_variance_batch(model, marked, grid, "exact", rng, kappa=spec.kappa_a, vbar=spec.vbar_a)
    sb = simulate_stock(model, vb, grid, spec, rng)
    return {"S": math.exp(-model.r * model.horizon) * sb.s_final}


def _c_l(model, hawkes, law, c_l):
    return affine_odes.compute_c_l(model, hawkes, law) if c_l is None else c_l


def martingale_check(
    model: ModelParams,
    hawkes: HawkesParams,
    law: JumpLaw,
    a: float,
    n_paths: int,
    grid: TimeGrid,
    seed: int,
    workers: int = 1,
    c_l: float | None = None,
) -> dict[str, McReport]:
    """E[X_T] = 1 and E[Z_T] = 1 under P, plus the drift identity on every node."""
    t0 = time.perf_counter()
    spec = measure_spec(a, model, _c_l(model, hawkes, law, c_l))
    fn = functools.partial(_p_chunk, model=model, hawkes=hawkes, law=law, grid=grid, a=a)
    out = map_chunks(fn, n_paths, seed, f"density:{a!r}", workers)
    wall = time.perf_counter() - t0
    info = {"a": a, "classification": spec.classification.value}
    reports = {}
    for key in ("X", "Z"):
        est, se = mean_se(out[key])
        reports[key] = McReport(f"E[{key}_T]=1", est, se, 1.0, "two-sided", n_paths, wall_time=wall, extra=dict(info))
    worst = float(out["resid"].max())
    reports["drift"] = McReport(
        "drift identity", worst, 0.0, 0.0, "exact", n_paths,
        status="pass" if worst <= 1e-12 else "fail", wall_time=wall, extra=dict(info),
    )
    return reports


def emm_check_direct(
    model: ModelParams,
    hawkes: HawkesParams,
    law: JumpLaw,
    a: float,
    n_paths: int,
    grid: TimeGrid,
    seed: int,
    workers: int = 1,
    c_l: float | None = None,
) -> McReport:
    """Simulate under Q(a) and compare the mean discounted terminal price with s0."""
    t0 = time.perf_counter()
    spec = measure_spec(a, model, _c_l(model, hawkes, law, c_l))
    if spec.classification is not Classification.EMM:
        raise ClassificationMismatch(f"a = {a} is {spec.classification.value}, not EMM")
    if not spec.simulable:
        raise ClassificationMismatch(
            f"kappa^(a) = {spec.kappa_a} <= 0: direct Q-simulation refused, use emm_check_weighted"
        )
    fn = functools.partial(_q_chunk, model=model, hawkes=hawkes, law=law, grid=grid, spec=spec)
    out = map_chunks(fn, n_paths, seed, f"emm-direct:{a!r}", workers)
    est, se = mean_se(out["S"])
    return McReport(
        "E^Q[e^{-rT} S_T]=s0 (direct)", est, se, model.s0, "two-sided", n_paths,
        wall_time=time.perf_counter() - t0,
        extra={"a": a, "classification": spec.classification.value, "kappa_a": spec.kappa_a, "vbar_a": spec.vbar_a},
    )


def emm_check_weighted(
    model: ModelParams,
    hawkes: HawkesParams,
    law: JumpLaw,
    a: float,
    n_paths: int,
    grid: TimeGrid,
    seed: int,
    workers: int = 1,
    c_l: float | None = None,
) -> McReport:
    """E_P[X_T e^{-rT} S_T] against s0."""
    t0 = time.perf_counter()
    spec = measure_spec(a, model, _c_l(model, hawkes, law, c_l))
    fn = functools.partial(_p_chunk, model=model, hawkes=hawkes, law=law, grid=grid, a=a)
    out = map_chunks(fn, n_paths, seed, f"emm-weighted:{a!r}", workers)
    est, se = mean_se(out["XS"])
    return McReport(
        "E_P[X_T e^{-rT} S_T]=s0 (weighted)", est, se, model.s0, "two-sided", n_paths,
        wall_time=time.perf_counter() - t0,
        extra={"a": a, "classification": spec.classification.value},
    )


def cross_check(direct: McReport, weighted: McReport) -> McReport:
    """Two independent estimators of one expectation must agree within joint 4-SE bands."""
    diff = direct.estimate - weighted.estimate
    se = math.hypot(direct.std_error, weighted.std_error)
    return McReport(
        "direct vs weighted", diff, se, 0.0, "two-sided", min(direct.n_paths, weighted.n_paths),
        wall_time=direct.wall_time + weighted.wall_time,
        extra={"direct": direct.estimate, "weighted": weighted.estimate, **direct.extra},
    )
