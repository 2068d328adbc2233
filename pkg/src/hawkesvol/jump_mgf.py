"""Moment generating functions of the jump-size laws and their inverses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Constant, Exponential, Gamma, JumpLaw


class DomainExceeded(ValueError):
    """Argument at or beyond the right edge of the MGF's domain."""


def epsilon(law: JumpLaw) -> float:
    """Right edge of the MGF domain; ``math.inf`` when the MGF is entire."""
    match law:
        case Exponential(rate=lam) | Gamma(rate=lam):
            return float(lam)
        case Constant():
            return math.inf
    raise TypeError(f"unknown jump law {law!r}")


def mgf(law: JumpLaw, t):
    """E[exp(t J)]. Accepts scalars or arrays."""
    t_arr = np.asarray(t, dtype=float)
    eps = epsilon(law)
    if np.any(t_arr >= eps):
        raise DomainExceeded(f"mgf argument {np.max(t_arr)} >= epsilon_J = {eps} for {law!r}")
    match law:
        case Exponential(rate=lam):
            out = lam / (lam - t_arr)
        case Gamma(shape=k, rate=lam):
            out = (1.0 - t_arr / lam) ** (-k)
        case Constant(value=j):
            out = np.exp(t_arr * j)
    return float(out) if out.ndim == 0 else out


def mgf_inverse(law: JumpLaw, y):
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr <= 0):
        raise ValueError("mgf_inverse needs y > 0")
    match law:
        case Exponential(rate=lam):
            out = lam * (1.0 - 1.0 / y_arr)
        case Gamma(shape=k, rate=lam):
            out = lam * (1.0 - y_arr ** (-1.0 / k))
        case Constant(value=j):
            out = np.log(y_arr) / j
        case _:
            raise TypeError(f"unknown jump law {law!r}")
    return float(out) if out.ndim == 0 else out


def mean(law: JumpLaw) -> float:
    match law:
        case Exponential(rate=lam):
            return 1.0 / lam
        case Gamma(shape=k, rate=lam):
            return k / lam
        case Constant(value=j):
            return float(j)
    raise TypeError(f"unknown jump law {law!r}")


@dataclass(frozen=True)
class MgfProfile:
    law: JumpLaw
    epsilon_J: float
    mean: float

    @classmethod
    def of(cls, law: JumpLaw) -> "MgfProfile":
        return cls(law, epsilon(law), mean(law))

    def __call__(self, t):
        return mgf(self.law, t)

    def inverse(self, y):
        return mgf_inverse(self.law, y)
