"""Exponential-kernel Hawkes process with i.i.d. marks.

Intensity: lambda_t = lambda0 + alpha * sum_{t_i <= t} exp(-beta (t - t_i)).
Simulation is Ogata thinning, vectorised across paths: the intensity only
decays between events, so its current value bounds it until the next event.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import jump_mgf
from .io import write_csv
from .model import HawkesParams, JumpLaw, TimeGrid, sample_marks


@dataclass(frozen=True)
class MarkedPointPath:
    event_times: np.ndarray
    marks: np.ndarray
    lambda0: float
    alpha: float
    beta: float
    horizon: float

    def __post_init__(self):
        et = np.asarray(self.event_times, dtype=float)
        mk = np.asarray(self.marks, dtype=float)
        if et.shape != mk.shape:
            raise ValueError("event_times and marks must align")
        if et.size and (np.any(np.diff(et) <= 0) or et[0] <= 0 or et[-1] > self.horizon):
            raise ValueError("event times must be strictly increasing in (0, T]")
        if np.any(mk <= 0):
            raise ValueError("marks must be strictly positive")
        object.__setattr__(self, "event_times", et)
        object.__setattr__(self, "marks", mk)

    @classmethod
    def empty(cls, hawkes: HawkesParams, horizon: float) -> "MarkedPointPath":
        return cls(np.empty(0), np.empty(0), hawkes.lambda0, hawkes.alpha, hawkes.beta, horizon)

    @property
    def params(self) -> HawkesParams:
        return HawkesParams(self.lambda0, self.alpha, self.beta)

    def __len__(self) -> int:
        return self.event_times.size

    def count(self, t):
        """N_t, right-continuous."""
        return np.searchsorted(self.event_times, t, side="right")

    def compound(self, t):
        """L_t = sum of marks of events at or before t."""
        csum = np.concatenate([[0.0], np.cumsum(self.marks)])
        return csum[self.count(t)]

    def lambda_after_events(self) -> np.ndarray:
        """Intensity immediately after each event, by the decay-and-jump recurrence."""
        out = np.empty_like(self.event_times)
        lam, prev = self.lambda0, 0.0
        for i, ti in enumerate(self.event_times):
            lam = self.lambda0 + (lam - self.lambda0) * np.exp(-self.beta * (ti - prev)) + self.alpha
            out[i] = lam
            prev = ti
        return out


def _check_time(path: MarkedPointPath, t) -> np.ndarray:
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > path.horizon):
        raise ValueError(f"t must lie in [0, {path.horizon}]")
    return t_arr


def intensity_at(path: MarkedPointPath, t):
    """lambda_t with events at exactly t included."""
    t_arr = _check_time(path, t)
    lags = t_arr[..., None] - path.event_times
    kern = np.where(lags >= 0, np.exp(-path.beta * np.where(lags >= 0, lags, 0.0)), 0.0)
    out = path.lambda0 + path.alpha * kern.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def compensators(path: MarkedPointPath, law: JumpLaw, grid: TimeGrid | np.ndarray):
    """(Lambda^N, Lambda^L) on the grid, integrating the kernel in closed form."""
    t = grid.times if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    t = _check_time(path, t)
    lags = t[..., None] - path.event_times
    pos = np.where(lags > 0, lags, 0.0)
    lam_n = path.lambda0 * t + (path.alpha / path.beta) * (-np.expm1(-path.beta * pos)).sum(axis=-1)
    return lam_n, jump_mgf.mean(law) * lam_n


# -- batch simulation -------------------------------------------------------

@dataclass(frozen=True)
class MarkedBatch:
    """Many marked paths in padded form; slots past ``counts[p]`` hold ``inf`` times and zero marks."""

    times: np.ndarray
    marks: np.ndarray
    counts: np.ndarray
    hawkes: HawkesParams
    horizon: float

    @property
    def n_paths(self) -> int:
        return self.counts.size

    def path(self, p: int) -> MarkedPointPath:
        k = self.counts[p]
        h = self.hawkes
        return MarkedPointPath(self.times[p, :k], self.marks[p, :k], h.lambda0, h.alpha, h.beta, self.horizon)

    def count_at(self, t: float) -> np.ndarray:
        return (self.times <= t).sum(axis=1)

    def compound_at(self, t: float) -> np.ndarray:
        return np.where(self.times <= t, self.marks, 0.0).sum(axis=1)

    def intensity_at(self, t: float) -> np.ndarray:
        h = self.hawkes
        lags = t - self.times
        kern = np.exp(-h.beta * np.where(lags >= 0, lags, 0.0))
        return h.lambda0 + h.alpha * np.where(lags >= 0, kern, 0.0).sum(axis=1)

    def compensator_at(self, t: float) -> np.ndarray:
        h = self.hawkes
        lags = np.where(self.times <= t, t - self.times, 0.0)
        return h.lambda0 * t + (h.alpha / h.beta) * (-np.expm1(-h.beta * lags)).sum(axis=1)


def simulate_hawkes_batch(
    hawkes: HawkesParams, law: JumpLaw, horizon: float, rng: np.random.Generator, n_paths: int
) -> MarkedBatch:
    lam0, alpha, beta = hawkes.lambda0, hawkes.alpha, hawkes.beta
    t = np.zeros(n_paths)
    lam = np.full(n_paths, lam0)  # intensity at time t, including any event at t
    alive = np.arange(n_paths)
    ev_path: list[np.ndarray] = []
    ev_time: list[np.ndarray] = []
    while alive.size:
        cand = t[alive] + rng.exponential(1.0, alive.size) / lam[alive]
        inside = cand <= horizon
        alive, cand = alive[inside], cand[inside]
        # rejected candidates still decay the bound, which keeps it exact and tighter
        lam_c = lam0 + (lam[alive] - lam0) * np.exp(-beta * (cand - t[alive]))
        accept = rng.uniform(size=alive.size) * lam[alive] <= lam_c
        t[alive] = cand
        lam[alive] = lam_c + alpha * accept
        ev_path.append(alive[accept])
        ev_time.append(cand[accept])

    paths = np.concatenate(ev_path) if ev_path else np.empty(0, int)
    times = np.concatenate(ev_time) if ev_time else np.empty(0)
    order = np.lexsort((times, paths))
    paths, times = paths[order], times[order]
    counts = np.bincount(paths, minlength=n_paths)
    kmax = int(counts.max()) if n_paths else 0
    slot = np.arange(paths.size) - np.repeat(np.cumsum(counts) - counts, counts)
    tt = np.full((n_paths, kmax), np.inf)
    mm = np.zeros((n_paths, kmax))
    tt[paths, slot] = times
    mm[paths, slot] = sample_marks(law, rng, paths.size)
    return MarkedBatch(tt, mm, counts, hawkes, float(horizon))


def simulate_hawkes(
    hawkes: HawkesParams, law: JumpLaw, horizon: float, rng: np.random.Generator
) -> MarkedPointPath:
    return simulate_hawkes_batch(hawkes, law, horizon, rng, 1).path(0)


def write_path_csv(path: MarkedPointPath, dest: str | Path) -> None:
    rows = zip(path.event_times, path.marks, path.lambda_after_events())
    write_csv(dest, ["t_event", "mark", "lambda_after_event"], rows)


def read_path_csv(src: str | Path, hawkes: HawkesParams, horizon: float) -> MarkedPointPath:
    with open(src, newline="") as fh:
        rows = list(csv.DictReader(fh))
    times = np.array([float(r["t_event"]) for r in rows])
    marks = np.array([float(r["mark"]) for r in rows])
    return MarkedPointPath(times, marks, hawkes.lambda0, hawkes.alpha, hawkes.beta, horizon)
