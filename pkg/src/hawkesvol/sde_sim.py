"""Variance and stock simulation.

The variance is CIR between Hawkes events and jumps by ``eta * J_i`` at each
event.  Paths are simulated in batches on a uniform grid; paths with an event
inside a grid step are sub-stepped at the event times, so every simulated
value sits on the merged partition ``grid U events``.

Two schemes:

``exact``
    exact CIR transitions between nodes.  The Brownian integral over a
    sub-interval is recovered from the SDE itself,
    ``sigma * int sqrt(v) dW = dv + kappa * int v dt - kappa * vbar * dt``,
    with ``int v dt`` by the trapezoid rule.
``euler``
    full-truncation Euler: ``v^+`` inside the square root and the drift.
``implicit``
    drift-implicit Euler on sqrt(v).  The update is increasing in the
    previous state and strictly positive under Feller, so two paths on
    shared increments keep their order; used for coupled comparisons.

``euler`` and ``implicit`` expose their Brownian increments, which is what
a coupled jump-free companion needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hawkes_sim import MarkedBatch, MarkedPointPath
from .io import write_csv
from .model import HawkesParams, JumpLaw, ModelParams, TimeGrid

SCHEMES = ("exact", "euler", "implicit")


class PositivityViolated(RuntimeError):
    """An exact-scheme variance path produced a non-positive value."""


def noncentral_chisquare(df, nonc, rng: np.random.Generator):
    """Sample chi'^2_df(nonc) elementwise.

    df > 1 uses (Z + sqrt(nonc))^2 + chi^2_{df-1}; otherwise the Poisson
    mixture chi^2_{df + 2 N}, N ~ Poisson(nonc / 2).
    """
    df, nonc = np.broadcast_arrays(np.asarray(df, float), np.asarray(nonc, float))
    out = np.empty(df.shape)
    big = df > 1.0
    if np.any(big):
        z = rng.standard_normal(int(big.sum()))
        out[big] = (z + np.sqrt(nonc[big])) ** 2 + rng.chisquare(df[big] - 1.0)
    if np.any(~big):
        k = rng.poisson(nonc[~big] / 2.0)
        out[~big] = rng.chisquare(df[~big] + 2.0 * k)
    return out


def cir_transition(v_start, dt, kappa: float, vbar: float, sigma: float, rng: np.random.Generator):
    """Exact draw of v_{t+dt} given v_t = v_start for dv = -kappa (v - vbar) dt + sigma sqrt(v) dW."""
    dt = np.asarray(dt, dtype=float)
    if np.any(dt <= 0):
        raise ValueError("cir_transition needs dt > 0")
    if kappa <= 0:
        raise ValueError("cir_transition needs kappa > 0")
    decay = np.exp(-kappa * dt)
    scale = sigma**2 * (-np.expm1(-kappa * dt)) / (4.0 * kappa)
    df = 4.0 * kappa * vbar / sigma**2
    nonc = np.asarray(v_start, dtype=float) * decay / scale
    out = scale * noncentral_chisquare(df, nonc, rng)
    return float(out) if out.ndim == 0 else out


def cir_mean(v0: float, t, kappa: float, vbar: float):
    """E[v_t] of the jump-free CIR process."""
    e = np.exp(-kappa * np.asarray(t, dtype=float))
    return v0 * e + vbar * (1.0 - e)


def implicit_sqrt_step(v, dt, dw, kappa: float, vbar: float, sigma: float):
    """One drift-implicit Euler step for y = sqrt(v).

    dy = ((4 kappa vbar - sigma^2) / (8 y) - kappa y / 2) dt + sigma dW / 2 with
    the drift taken at the new point; the resulting quadratic has one
    positive root, increasing in the old y.
    """
    y = np.sqrt(np.maximum(v, 0.0))
    b = y + 0.5 * sigma * dw
    lead = 1.0 + 0.5 * kappa * dt
    const = (4.0 * kappa * vbar - sigma**2) / 8.0 * dt
    y_new = (b + np.sqrt(b * b + 4.0 * lead * const)) / (2.0 * lead)
    return y_new * y_new


@dataclass(frozen=True)
class VarianceBatch:
    """Simulated variance on a grid for many paths.

    ``values`` are right-continuous values at grid times.  Per grid step:
    ``int_v`` is the trapezoid integral of v over the merged partition,
    ``int_v_left`` the left-point Riemann sum, ``int_sqrt_dw`` the Brownian
    integral of sqrt(v).  ``pre_jump``/``post_jump`` are padded like the
    marked batch.  ``companion`` holds the jump-free process driven by the
    same increments, when requested.
    """

    grid: TimeGrid
    scheme: str
    kappa: float
    vbar: float
    values: np.ndarray
    int_v: np.ndarray
    int_v_left: np.ndarray
    int_sqrt_dw: np.ndarray
    pre_jump: np.ndarray
    post_jump: np.ndarray
    marked: MarkedBatch
    min_value: np.ndarray
    companion: np.ndarray | None = None
    max_violation: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def step_variance(self) -> np.ndarray:
        """Integrated variance per step used by the stock and density schemes."""
        return self.int_v if self.scheme == "exact" else self.int_v_left

    def integrated(self) -> np.ndarray:
        """int_0^T v du per path, trapezoid on the merged partition."""
        return self.int_v.sum(axis=1)

    def path(self, p: int) -> "VariancePath":
        k = self.marked.counts[p]
        grid_t = self.grid.times
        ev_t = self.marked.times[p, :k]
        times = np.concatenate([grid_t, ev_t])
        right = np.concatenate([self.values[p], self.post_jump[p, :k]])
        left = np.concatenate([self.values[p], self.pre_jump[p, :k]])
        is_event = np.concatenate([np.zeros(grid_t.size, bool), np.ones(k, bool)])
        order = np.argsort(times, kind="stable")
        times, right, left, is_event = times[order], right[order], left[order], is_event[order]
        # event on a grid node: drop the grid entry, the event entry carries both limits
        keep = ~np.concatenate([np.diff(times) == 0, [False]])
        sub = VarianceBatch(
            self.grid, self.scheme, self.kappa, self.vbar,
            self.values[p:p + 1], self.int_v[p:p + 1], self.int_v_left[p:p + 1],
            self.int_sqrt_dw[p:p + 1], self.pre_jump[p:p + 1], self.post_jump[p:p + 1],
            _slice_marked(self.marked, p), self.min_value[p:p + 1],
            None if self.companion is None else self.companion[p:p + 1],
            None if self.max_violation is None else self.max_violation[p:p + 1],
        )
        return VariancePath(self.grid, times[keep], right[keep], left[keep], is_event[keep], self.scheme, sub)


def _slice_marked(m: MarkedBatch, p: int) -> MarkedBatch:
    k = m.counts[p]
    return MarkedBatch(m.times[p:p + 1, :k], m.marks[p:p + 1, :k], m.counts[p:p + 1], m.hawkes, m.horizon)


@dataclass(frozen=True)
class VariancePath:
    grid: TimeGrid
    times: np.ndarray
    values: np.ndarray
    left: np.ndarray
    is_event: np.ndarray
    scheme: str
    batch: VarianceBatch

    def jumps(self) -> np.ndarray:
        return (self.values - self.left)[self.is_event]

    def rows(self):
        return zip(self.times, self.values)


def _marked_as_batch(marked: MarkedPointPath | MarkedBatch) -> MarkedBatch:
    if isinstance(marked, MarkedBatch):
        return marked
    k = len(marked)
    return MarkedBatch(
        marked.event_times.reshape(1, k), marked.marks.reshape(1, k), np.array([k]),
        marked.params, marked.horizon,
    )


def simulate_variance_batch(
    model: ModelParams,
    marked: MarkedBatch,
    grid: TimeGrid,
    scheme: str = "exact",
    rng: np.random.Generator | None = None,
    *,
    kappa: float | None = None,
    vbar: float | None = None,
    companion: bool = False,
) -> VarianceBatch:
    """Interlace CIR dynamics with jumps ``eta * J_i`` at the event times.

    ``kappa``/``vbar`` override the model's values (used for Q-dynamics).
    Under ``euler`` a negative pre-jump state is clamped to 0 before the
    jump is added, so stored values are always >= 0 and each jump equals
    ``eta * J_i`` exactly.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    if companion and scheme == "exact":
        raise ValueError("the coupled jump-free companion needs shared increments (euler or implicit)")
    if scheme == "implicit" and 4.0 * model.kappa * model.vbar <= model.sigma**2:
        raise ValueError("the implicit scheme needs 4 kappa vbar > sigma^2")
    if abs(grid.t_start) > 0 or grid.t_end < marked.horizon - 1e-12:
        raise ValueError("grid must cover [0, T]")
    rng = np.random.default_rng() if rng is None else rng
    kap = model.kappa if kappa is None else float(kappa)
    vb = model.vbar if vbar is None else float(vbar)
    sig, eta = model.sigma, model.eta

    n, m = marked.n_paths, grid.n_steps
    ts = grid.times
    ev_times = np.concatenate([marked.times, np.full((n, 1), np.inf)], axis=1)
    ev_marks = marked.marks
    kmax = marked.times.shape[1]

    v = np.full(n, model.v0)
    vt = np.full(n, model.v0) if companion else None
    values = np.empty((n, m + 1))
    values[:, 0] = model.v0
    comp_vals = np.empty((n, m + 1)) if companion else None
    if companion:
        comp_vals[:, 0] = model.v0
    int_v = np.zeros((n, m))
    int_v_left = np.zeros((n, m))
    int_sw = np.zeros((n, m))
    pre = np.full((n, kmax), np.nan)
    post = np.full((n, kmax), np.nan)
    vmin = np.full(n, model.v0)
    worst = np.full(n, -np.inf) if companion else None
    ptr = np.zeros(n, dtype=int)

    def advance(idx, k, dt):
        if idx.size == 0:
            return
        pos = dt > 0
        if not np.all(pos):
            idx, dt = idx[pos], dt[pos]
        if scheme == "exact":
            old = v[idx]
            new = cir_transition(old, dt, kap, vb, sig, rng)
            trap = 0.5 * (old + new) * dt
            int_v[idx, k] += trap
            int_v_left[idx, k] += old * dt
            int_sw[idx, k] += (new - old + kap * trap - kap * vb * dt) / sig
            v[idx] = new
            vmin[idx] = np.minimum(vmin[idx], new)
        else:
            dw = np.sqrt(dt) * rng.standard_normal(idx.size)
            old = v[idx]
            op = np.maximum(old, 0.0)
            new = step(old, dt, dw)
            newp = np.maximum(new, 0.0)
            int_v[idx, k] += 0.5 * (op + newp) * dt
            int_v_left[idx, k] += op * dt
            int_sw[idx, k] += np.sqrt(op) * dw
            v[idx] = new
            vmin[idx] = np.minimum(vmin[idx], newp)
            if companion:
                n2 = step(vt[idx], dt, dw)
                vt[idx] = n2
                worst[idx] = np.maximum(worst[idx], np.maximum(n2, 0.0) - newp)

    def step(x, dt, dw):
        if scheme == "euler":
            xp = np.maximum(x, 0.0)
            return x - kap * (xp - vb) * dt + sig * np.sqrt(xp) * dw
        return implicit_sqrt_step(x, dt, dw, kap, vb, sig)

    def jump(idx):
        if idx.size == 0:
            return
        slot = ptr[idx]
        before = v[idx] if scheme == "exact" else np.maximum(v[idx], 0.0)
        after = before + eta * ev_marks[idx, slot]
        pre[idx, slot] = before
        post[idx, slot] = after
        v[idx] = after
        ptr[idx] += 1

    rows = np.arange(n)
    for k in range(m):
        t0, t1 = ts[k], ts[k + 1]
        nxt = ev_times[rows, ptr]
        busy = nxt <= t1
        advance(np.flatnonzero(~busy), k, np.full(int((~busy).sum()), t1 - t0))
        idx = np.flatnonzero(busy)
        cur = np.full(idx.size, t0)
        while idx.size:
            te = ev_times[idx, ptr[idx]]
            hit = te <= t1
            stop = np.where(hit, te, t1)
            advance(idx, k, stop - cur)
            jump(idx[hit])
            more = hit & (stop < t1)
            idx, cur = idx[more], stop[more]
        values[:, k + 1] = v if scheme == "exact" else np.maximum(v, 0.0)
        if companion:
            comp_vals[:, k + 1] = np.maximum(vt, 0.0)

    if scheme == "exact" and np.any(vmin <= 0):
        bad = int(np.argmin(vmin))
        raise PositivityViolated(f"path {bad} reached v = {vmin[bad]!r} under the exact scheme")
    return VarianceBatch(
        grid, scheme, kap, vb, values, int_v, int_v_left, int_sw, pre, post, marked, vmin,
        comp_vals, worst,
    )


def simulate_variance(
    model: ModelParams,
    marked: MarkedPointPath,
    grid: TimeGrid,
    scheme: str = "exact",
    rng: np.random.Generator | None = None,
) -> VariancePath:
    return simulate_variance_batch(model, _marked_as_batch(marked), grid, scheme, rng).path(0)


def simulate_comparison_batch(
    model: ModelParams, marked: MarkedBatch, grid: TimeGrid, rng: np.random.Generator, scheme: str = "implicit"
) -> VarianceBatch:
    """Jumping v and jump-free companion on shared Brownian increments."""
    return simulate_variance_batch(model, marked, grid, scheme, rng, companion=True)


def simulate_comparison_pair(
    model: ModelParams,
    hawkes: HawkesParams,
    law: JumpLaw,
    grid: TimeGrid,
    rng: np.random.Generator,
    marked: MarkedPointPath | None = None,
    scheme: str = "implicit",
):
    """(jump-free path, jumping path) coupled on the same W increments and events.

    The jump-free path is returned as ``(times, values)`` on the grid; the
    jumping path as a ``VariancePath`` on the merged partition.
    """
    from .hawkes_sim import simulate_hawkes

    if marked is None:
        marked = simulate_hawkes(hawkes, law, model.horizon, rng)
    vb = simulate_comparison_batch(model, _marked_as_batch(marked), grid, rng, scheme)
    return (grid.times, vb.companion[0]), vb.path(0)


# -- stock ------------------------------------------------------------------

@dataclass(frozen=True)
class StockBatch:
    grid: TimeGrid
    log_s: np.ndarray
    normals_b: np.ndarray
    measure: str
    a: float | None = None

    @property
    def s_final(self) -> np.ndarray:
        return np.exp(self.log_s[:, -1])


def simulate_stock(
    model: ModelParams,
    v_path: VarianceBatch | VariancePath,
    grid: TimeGrid,
    measure=None,
    rng: np.random.Generator | None = None,
) -> StockBatch:
    """Log-Euler stock driven by the same W integrals as the variance.

    Per step: dlogS = (drift - vhat/2) dt + sqrt(1 - rho^2) sqrt(vhat dt) xi + rho int sqrt(v) dW,
    with vhat dt the step's integrated variance (left point under euler) and
    drift mu(t_k) under P, r under a measure ``Q(a)``.
    """
    vb = v_path.batch if isinstance(v_path, VariancePath) else v_path
    if vb.grid != grid:
        raise ValueError("variance and stock grids differ")
    if measure is not None:
        if not np.isclose(vb.kappa, measure.kappa_a) or not np.isclose(vb.vbar, measure.vbar_a):
            raise ValueError("variance was not simulated with the Q(a) coefficients")
    rng = np.random.default_rng() if rng is None else rng
    dt = grid.dt
    ts = grid.times[:-1]
    drift = np.full(ts.size, model.r) if measure is not None else np.asarray(model.mu(ts), float)
    var = vb.step_variance
    xi = rng.standard_normal(var.shape)
    incr = (
        drift * dt
        - 0.5 * var
        + np.sqrt(1.0 - model.rho**2) * np.sqrt(var) * xi
        + model.rho * vb.int_sqrt_dw
    )
    log_s = np.empty((var.shape[0], var.shape[1] + 1))
    log_s[:, 0] = np.log(model.s0)
    np.cumsum(incr, axis=1, out=log_s[:, 1:])
    log_s[:, 1:] += np.log(model.s0)
    tag = "P" if measure is None else f"Q({measure.a!r})"
    return StockBatch(grid, log_s, xi, tag, None if measure is None else measure.a)


def write_paths_csv(dest, vb: VarianceBatch, sb: StockBatch | None = None) -> None:
    """Long-format dump on the grid: path_id, t, v, logS, lambda, N, L."""
    ts = vb.grid.times

    def rows():
        for p in range(vb.n_paths):
            m = vb.marked
            for k, t in enumerate(ts):
                mask = m.times[p] <= t
                lam = m.hawkes.lambda0 + m.hawkes.alpha * np.exp(
                    -m.hawkes.beta * (t - m.times[p][mask])
                ).sum()
                yield (
                    p, t, vb.values[p, k],
                    sb.log_s[p, k] if sb is not None else float("nan"),
                    lam, int(mask.sum()), m.marks[p][mask].sum(),
                )

    write_csv(dest, ["path_id", "t", "v", "logS", "lambda", "N", "L"], rows())
