"""Parameter types for the Heston model with compound-Hawkes variance jumps.

The stock and variance follow

    dS/S = mu_t dt + sqrt(v) (sqrt(1 - rho^2) dB + rho dW)
    dv   = -kappa (v - vbar) dt + sigma sqrt(v) dW + eta dL

where L is a compound Hawkes process with exponential kernel
(lambda0, alpha, beta) and i.i.d. positive marks drawn from a ``JumpLaw``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import numpy as np


class ParameterError(ValueError):
    """Base class for rejected parameter bundles."""

    def __init__(self, name: str, message: str):
        super().__init__(f"{name}: {message}")
        self.name = name
        self.message = message
        self.all: list[ParameterError] = [self]


class FellerViolated(ParameterError):
    pass


class StabilityViolated(ParameterError):
    pass


class DomainViolated(ParameterError):
    pass


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-continuous step function on [0, inf) given by ``(t_from, value)`` breakpoints."""

    breakpoints: tuple[tuple[float, float], ...]

    @classmethod
    def constant(cls, value: float) -> "PiecewiseConstant":
        return cls(((0.0, float(value)),))

    def __post_init__(self):
        bps = tuple((float(t), float(v)) for t, v in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)

    @property
    def starts(self) -> np.ndarray:
        return np.array([t for t, _ in self.breakpoints])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.breakpoints])

    def __call__(self, t):
        idx = np.searchsorted(self.starts, t, side="right") - 1
        out = self.values[np.clip(idx, 0, None)]
        return float(out) if np.ndim(out) == 0 else out

    def integral(self, t: float) -> float:
        """int_0^t of the step function."""
        total = 0.0
        starts = list(self.starts) + [math.inf]
        for k, (t0, val) in enumerate(self.breakpoints):
            hi = min(starts[k + 1], t)
            if hi <= t0:
                break
            total += val * (hi - t0)
        return total

    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class ModelParams:
    s0: float = 100.0
    v0: float = 0.04
    kappa: float = 2.0
    vbar: float = 0.04
    sigma: float = 0.3
    eta: float = 0.5
    rho: float = -0.5
    r: float = 0.02
    mu: PiecewiseConstant = field(default_factory=lambda: PiecewiseConstant.constant(0.05))
    horizon: float = 1.0

    @property
    def c_cap(self) -> float:
        """kappa^2 / (2 sigma^2), the largest exponent the jump-free part tolerates."""
        return self.kappa**2 / (2.0 * self.sigma**2)

    def with_(self, **changes) -> "ModelParams":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class HawkesParams:
    lambda0: float = 1.0
    alpha: float = 1.0
    beta: float = 2.0

    @property
    def branching_ratio(self) -> float:
        return self.alpha / self.beta

    @property
    def stationary_intensity(self) -> float:
        return self.lambda0 * self.beta / (self.beta - self.alpha)

    def mean_intensity(self, t):
        """E[lambda_t] = lambda0 (beta - alpha e^{(alpha-beta)t}) / (beta - alpha)."""
        a, b = self.alpha, self.beta
        return self.lambda0 * (b - a * np.exp((a - b) * np.asarray(t, dtype=float))) / (b - a)

    def mean_count(self, t):
        """E[N_t], the integral of ``mean_intensity`` over [0, t]."""
        a, b = self.alpha, self.beta
        t = np.asarray(t, dtype=float)
        if a == 0.0:
            return self.lambda0 * t
        return self.lambda0 * (b * t + a / (b - a) * np.expm1((a - b) * t)) / (b - a)


@dataclass(frozen=True)
class Exponential:
    rate: float


@dataclass(frozen=True)
class Gamma:
    shape: float
    rate: float


@dataclass(frozen=True)
class Constant:
    value: float


JumpLaw = Union[Exponential, Gamma, Constant]


def sample_marks(law: JumpLaw, rng: np.random.Generator, size) -> np.ndarray:
    match law:
        case Exponential(rate=lam):
            return rng.exponential(1.0 / lam, size)
        case Gamma(shape=k, rate=lam):
            return rng.gamma(k, 1.0 / lam, size)
        case Constant(value=j):
            return np.full(size, float(j))
    raise TypeError(f"unknown jump law {law!r}")


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not self.t_end > self.t_start:
            raise ValueError(f"need t_end > t_start, got [{self.t_start}, {self.t_end}]")

    @classmethod
    def uniform(cls, horizon: float, n_steps: int) -> "TimeGrid":
        return cls(0.0, float(horizon), int(n_steps))

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        t = self.t_start + self.dt * np.arange(self.n_steps + 1)
        t[-1] = self.t_end
        return t

    def __len__(self) -> int:
        return self.n_steps + 1


def violations(model: ModelParams, hawkes: HawkesParams, law: JumpLaw) -> list[ParameterError]:
    """Every violated invariant of the bundle; empty when it is admissible."""
    found: list[ParameterError] = []
    positives = {
        "s0": model.s0,
        "v0": model.v0,
        "kappa": model.kappa,
        "vbar": model.vbar,
        "sigma": model.sigma,
        "eta": model.eta,
        "horizon": model.horizon,
        "lambda0": hawkes.lambda0,
        "beta": hawkes.beta,
    }
    for name, val in positives.items():
        if not (math.isfinite(val) and val > 0):
            found.append(DomainViolated(name, f"must be > 0, got {val}"))
    if not (hawkes.alpha >= 0 and math.isfinite(hawkes.alpha)):
        found.append(DomainViolated("alpha", f"must be >= 0, got {hawkes.alpha}"))
    if not (-1.0 < model.rho < 1.0):
        found.append(DomainViolated("rho", f"must lie in (-1, 1), got {model.rho}"))
    if not math.isfinite(model.r):
        found.append(DomainViolated("r", f"must be finite, got {model.r}"))
    mu = model.mu
    if not mu.breakpoints or mu.breakpoints[0][0] > 0.0:
        found.append(DomainViolated("mu", "first breakpoint must start at t=0"))
    elif np.any(np.diff(mu.starts) <= 0):
        found.append(DomainViolated("mu", "breakpoints must be strictly increasing"))
    elif not np.all(np.isfinite(mu.values)):
        found.append(DomainViolated("mu", "values must be finite"))

    if model.kappa > 0 and model.vbar > 0 and model.sigma > 0:
        lhs, rhs = 2.0 * model.kappa * model.vbar, model.sigma**2
        if lhs < rhs:
            found.append(FellerViolated("kappa,vbar,sigma", f"2*kappa*vbar = {lhs} < sigma^2 = {rhs}"))
    if hawkes.beta > 0 and hawkes.alpha >= 0 and hawkes.alpha / hawkes.beta >= 1.0:
        found.append(
            StabilityViolated("alpha,beta", f"alpha/beta = {hawkes.alpha / hawkes.beta} must be < 1")
        )

    match law:
        case Exponential(rate=lam):
            if not lam > 0:
                found.append(DomainViolated("jump_law.rate", f"must be > 0, got {lam}"))
        case Gamma(shape=k, rate=lam):
            if not k > 0:
                found.append(DomainViolated("jump_law.shape", f"must be > 0, got {k}"))
            if not lam > 0:
                found.append(DomainViolated("jump_law.rate", f"must be > 0, got {lam}"))
        case Constant(value=j):
            if not j > 0:
                found.append(DomainViolated("jump_law.value", f"must be > 0, got {j}"))
        case _:
            found.append(DomainViolated("jump_law", f"unknown law {law!r}"))
    return found


def validate(model: ModelParams, hawkes: HawkesParams, law: JumpLaw):
    """Return ``(model, hawkes, law)`` unchanged, or raise the first violation.

    The raised error carries every violation found in its ``all`` attribute.
    """
    found = violations(model, hawkes, law)
    if found:
        err = found[0]
        err.all = found
        raise err
    return model, hawkes, law


def default_params() -> tuple[ModelParams, HawkesParams, JumpLaw]:
    return ModelParams(), HawkesParams(), Exponential(10.0)


def example_laws() -> dict[str, JumpLaw]:
    """The three jump laws with closed-form admissibility constants, all with mean 0.1."""
    return {
        "exponential": Exponential(10.0),
        "gamma": Gamma(2.0, 20.0),
        "constant": Constant(0.1),
    }


# -- config files ---------------------------------------------------------

def law_from_dict(d: dict[str, Any]) -> JumpLaw:
    kind = d.get("type", "").lower()
    if kind == "exponential":
        return Exponential(float(d["rate"]))
    if kind == "gamma":
        return Gamma(float(d["shape"]), float(d["rate"]))
    if kind == "constant":
        return Constant(float(d["value"]))
    raise DomainViolated("jump_law.type", f"expected exponential|gamma|constant, got {kind!r}")


def law_to_dict(law: JumpLaw) -> dict[str, Any]:
    match law:
        case Exponential(rate=lam):
            return {"type": "exponential", "rate": lam}
        case Gamma(shape=k, rate=lam):
            return {"type": "gamma", "shape": k, "rate": lam}
        case Constant(value=j):
            return {"type": "constant", "value": j}
    raise TypeError(f"unknown jump law {law!r}")


def params_from_dict(cfg: dict[str, Any]) -> tuple[ModelParams, HawkesParams, JumpLaw]:
    m = dict(cfg.get("model", {}))
    if "mu" in m:
        mu = m.pop("mu")
        if isinstance(mu, (int, float)):
            m["mu"] = PiecewiseConstant.constant(mu)
        else:
            m["mu"] = PiecewiseConstant(tuple((bp["t_from"], bp["value"]) for bp in mu))
    if "T" in m:
        m["horizon"] = m.pop("T")
    model = ModelParams(**{k: (v if k == "mu" else float(v)) for k, v in m.items()})
    hawkes = HawkesParams(**{k: float(v) for k, v in cfg.get("hawkes", {}).items()})
    law = law_from_dict(cfg["jump_law"]) if "jump_law" in cfg else Exponential(10.0)
    return model, hawkes, law


def params_to_dict(model: ModelParams, hawkes: HawkesParams, law: JumpLaw) -> dict[str, Any]:
    m = {k: getattr(model, k) for k in ("s0", "v0", "kappa", "vbar", "sigma", "eta", "rho", "r", "horizon")}
    m["mu"] = [{"t_from": t, "value": v} for t, v in model.mu.breakpoints]
    h = {"lambda0": hawkes.lambda0, "alpha": hawkes.alpha, "beta": hawkes.beta}
    return {"model": m, "hawkes": h, "jump_law": law_to_dict(law)}


def load_config(path: str | Path):
    """Parse and validate a JSON config file."""
    with open(path) as fh:
        cfg = json.load(fh)
    return validate(*params_from_dict(cfg))
