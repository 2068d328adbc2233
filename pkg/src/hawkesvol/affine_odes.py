"""Affine ODEs behind the exponential moment E[exp(c int_0^T v du)].

    G' = -sigma^2 G^2 / 2 + kappa G - c
    H' = beta H - M_J(eta G) exp(alpha H) + 1
    F' = -kappa vbar G - beta lambda0 H,        G(T) = H(T) = F(T) = 0,

so that E[exp(c int v)] <= exp(F(0) + G(0) v0 + H(0) lambda0) whenever the
three are finite on [0, T].  G is closed form; H is integrated backwards in
time with classical RK4 as h(s) = H(T - s); F is a cumulative Simpson sum.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from . import jump_mgf
from .model import HawkesParams, JumpLaw, ModelParams, TimeGrid

SMALL_DT = 1e-6


class CapExceeded(ValueError):
    """c above kappa^2 / (2 sigma^2): D(c) is not real."""


class InadmissibleExponent(ValueError):
    """c at or above the admissibility limit c_l."""


class BracketViolated(RuntimeError):
    """h left its invariant region [-1/beta, x_p]."""


class NonMonotoneLambda(RuntimeError):
    """Lambda(c) decreased somewhere on the scan, so the feasible set may not be an interval."""


def discriminant(c: float, model: ModelParams) -> float:
    """D(c) = sqrt(kappa^2 - 2 sigma^2 c)."""
    arg = model.kappa**2 - 2.0 * model.sigma**2 * c
    if arg < 0:
        if arg > -1e-14 * model.kappa**2:
            return 0.0
        raise CapExceeded(f"c = {c} exceeds kappa^2/(2 sigma^2) = {model.c_cap}")
    return math.sqrt(arg)


def riccati_g(c: float, tau, model: ModelParams):
    """G at time-to-maturity tau = T - t.

    Written with exp(-D tau) so it cannot overflow; for D T < 1e-6 the
    D -> 0 limit 2 c tau / (2 + kappa tau) is used instead.
    """
    tau = np.asarray(tau, dtype=float)
    d = discriminant(c, model)
    k = model.kappa
    if d * model.horizon < SMALL_DT:
        out = 2.0 * c * tau / (2.0 + k * tau)
    else:
        e = np.exp(-d * tau)
        out = 2.0 * c * (-np.expm1(-d * tau)) / ((d - k) * e + d + k)
    return float(out) if out.ndim == 0 else out


def big_lambda(c: float, model: ModelParams) -> float:
    """Lambda(c) = eta G(0), the largest argument M_J meets along [0, T]."""
    return model.eta * riccati_g(c, model.horizon, model)


def threshold(hawkes: HawkesParams) -> float:
    """(beta/alpha) exp(alpha/beta - 1); infinite without self-excitation."""
    if hawkes.alpha == 0:
        return math.inf
    r = hawkes.alpha / hawkes.beta
    return math.exp(-math.log(r) + r - 1.0)


def feasible(c: float, model: ModelParams, hawkes: HawkesParams, law: JumpLaw) -> bool:
    """Both constraints in the definition of c_l, plus c <= cap."""
    if c > model.c_cap:
        return False
    lam = big_lambda(c, model)
    if not lam < jump_mgf.epsilon(law):
        return False
    return jump_mgf.mgf(law, lam) <= threshold(hawkes)


def compute_c_s(model: ModelParams, hawkes: HawkesParams, law: JumpLaw) -> float:
    """Explicit, horizon-free lower bound for c_l."""
    k2e = model.kappa / (2.0 * model.eta)
    eps = jump_mgf.epsilon(law)
    thr = threshold(hawkes)
    inv = eps if math.isinf(thr) else jump_mgf.mgf_inverse(law, thr)
    return min(k2e * eps, k2e * inv, model.c_cap)


@functools.lru_cache(maxsize=256)
def compute_c_l(
    model: ModelParams, hawkes: HawkesParams, law: JumpLaw, tol: float = 1e-10, n_scan: int = 400
) -> float:
    """Supremum of the feasible exponents, located by scan + bisection.

    Scans a geometric ladder up to the cap, checks Lambda is nondecreasing
    along it, then bisects between the last feasible and the first
    infeasible rung until the bracket is narrower than ``tol / 2``.  The
    returned value is feasible.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    cap = model.c_cap
    ladder = cap * np.geomspace(1e-12, 1.0, n_scan)
    ladder[-1] = cap
    lams = np.array([big_lambda(c, model) for c in ladder])
    if np.any(np.diff(lams) < -1e-12 * np.abs(lams[1:])):
        raise NonMonotoneLambda("Lambda(c) is not nondecreasing on the scan ladder")
    ok = np.array([feasible(c, model, hawkes, law) for c in ladder])
    if ok.all():
        return cap
    first_bad = int(np.argmin(ok))
    if first_bad == 0:
        raise RuntimeError("no feasible exponent found on the scan ladder")
    if ok[first_bad:].any():
        raise NonMonotoneLambda("feasible set is not an interval on the scan ladder")
    lo, hi = float(ladder[first_bad - 1]), float(ladder[first_bad])
    while hi - lo > tol / 2:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if feasible(mid, model, hawkes, law):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class OdeContext:
    c: float
    D: float
    Lambda_c: float
    U: float
    x_p: float
    model: ModelParams
    hawkes: HawkesParams
    law: JumpLaw


def upper_bracket(U: float, hawkes: HawkesParams) -> float:
    """Minimiser of U exp(alpha x) - beta x - 1; the root (U - 1)/beta when alpha = 0."""
    if hawkes.alpha == 0:
        return (U - 1.0) / hawkes.beta
    return math.log(hawkes.beta / (hawkes.alpha * U)) / hawkes.alpha


def context(c: float, model: ModelParams, hawkes: HawkesParams, law: JumpLaw) -> OdeContext:
    d = discriminant(c, model)
    lam = big_lambda(c, model)
    U = jump_mgf.mgf(law, lam)
    return OdeContext(c, d, lam, U, upper_bracket(U, hawkes), model, hawkes, law)


@dataclass(frozen=True)
class OdeSolution:
    grid: TimeGrid
    G: np.ndarray
    H: np.ndarray
    F: np.ndarray
    bound_M0: float
    ctx: OdeContext

    def rows(self):
        return zip(self.grid.times, self.G, self.H, self.F)


def _check_admissible(c, model, hawkes, law, c_limit):
    if c > model.c_cap:
        raise CapExceeded(f"c = {c} exceeds kappa^2/(2 sigma^2) = {model.c_cap}")
    if c > 0:
        lim = compute_c_l(model, hawkes, law) if c_limit is None else c_limit
        if c >= lim:
            raise InadmissibleExponent(f"c = {c} >= c_l = {lim}")


def solve_G(c: float, grid: TimeGrid, model: ModelParams, c_limit: float | None = None) -> np.ndarray:
    if c_limit is not None and c >= c_limit and c > 0:
        raise InadmissibleExponent(f"c = {c} >= c_l = {c_limit}")
    g = riccati_g(c, model.horizon - grid.times, model)
    g = np.asarray(g, dtype=float)
    g[-1] = 0.0
    return g


def rk4(f, y0: float, s: np.ndarray) -> np.ndarray:
    """Classical fourth-order Runge-Kutta for scalar y' = f(s, y) on the nodes ``s``."""
    y = np.empty(s.size)
    y[0] = y0
    for i in range(s.size - 1):
        h = s[i + 1] - s[i]
        si, yi = s[i], y[i]
        k1 = f(si, yi)
        k2 = f(si + h / 2, yi + h / 2 * k1)
        k3 = f(si + h / 2, yi + h / 2 * k2)
        k4 = f(si + h, yi + h * k3)
        y[i + 1] = yi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def solve_h(c: float, grid: TimeGrid, model: ModelParams, hawkes: HawkesParams, law: JumpLaw) -> np.ndarray:
    """h(s) = H(T - s) on s = grid times (forward in s)."""
    s = grid.times - grid.t_start
    eta, alpha, beta = model.eta, hawkes.alpha, hawkes.beta

    def rhs(si, hi):
        return jump_mgf.mgf(law, eta * riccati_g(c, si, model)) * math.exp(alpha * hi) - beta * hi - 1.0

    return rk4(rhs, 0.0, s)


def envelopes(ctx: OdeContext, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """(h_m, h_M): pure decay from 0 in closed form, and the U-driven comparison ODE by RK4."""
    s = grid.times - grid.t_start
    beta, alpha, U = ctx.hawkes.beta, ctx.hawkes.alpha, ctx.U
    h_m = np.expm1(-beta * s) / beta
    h_M = rk4(lambda _s, x: U * math.exp(alpha * x) - beta * x - 1.0, 0.0, s)
    return h_m, h_M


def solve_H(
    c: float,
    grid: TimeGrid,
    G: np.ndarray | None,
    model: ModelParams,
    hawkes: HawkesParams,
    law: JumpLaw,
    tol: float = 1e-9,
) -> np.ndarray:
    """H on the grid, with the invariant bracket -1/beta <= h <= x_p enforced.

    ``G`` is accepted for interface symmetry; the stepper evaluates the
    closed form at the RK4 stages directly.
    """
    if G is not None and len(G) != len(grid):
        raise ValueError("G and grid differ in length")
    ctx = context(c, model, hawkes, law)
    h = solve_h(c, grid, model, hawkes, law)
    lo, hi = -1.0 / hawkes.beta - tol, ctx.x_p + tol
    if not (np.all(np.isfinite(h)) and h.min() >= lo and h.max() <= hi):
        raise BracketViolated(
            f"h in [{np.nanmin(h)}, {np.nanmax(h)}] leaves [{lo}, {hi}] at c = {c}"
        )
    return h[::-1].copy()


def solve_F(grid: TimeGrid, G: np.ndarray, H: np.ndarray, model: ModelParams, hawkes: HawkesParams) -> np.ndarray:
    """F(t) = int_t^T (kappa vbar G + beta lambda0 H) ds, cumulative Simpson from T backwards."""
    if len(G) != len(grid) or len(H) != len(grid):
        raise ValueError("G, H and grid differ in length")
    q = model.kappa * model.vbar * np.asarray(G) + hawkes.beta * hawkes.lambda0 * np.asarray(H)
    back = cumulative_simpson(q[::-1], dx=grid.dt, initial=0.0)
    return back[::-1].copy()


def supermartingale_bound(
    c: float,
    grid: TimeGrid,
    model: ModelParams,
    hawkes: HawkesParams,
    law: JumpLaw,
    c_limit: float | None = None,
) -> OdeSolution:
    _check_admissible(c, model, hawkes, law, c_limit)
    G = solve_G(c, grid, model)
    H = solve_H(c, grid, G, model, hawkes, law)
    F = solve_F(grid, G, H, model, hawkes)
    bound = math.exp(F[0] + G[0] * model.v0 + H[0] * hawkes.lambda0)
    return OdeSolution(grid, G, H, F, bound, context(c, model, hawkes, law))
