"""Arbitrage action of trading strategies.

For a deterministic strategy x_t over the market grid and a positive process
beta, the action along [t0, t1] is

    A = int [ Dlog(beta_t D^{x_t}_t) + r^{x_t}_t ] dt

whose integrand vanishes identically in an arbitrage-free market with beta
the state-price deflator.  Its endpoint form is

    A = log( beta_1 D^{x_1}_1 / (beta_0 D^{x_0}_0 * d01) ),
    d01 = exp( - int r^{x_u}_u du ),

so the two evaluations differ only by quadrature (left-Riemann vs trapezoid
on the rate integral); the gap shrinks linearly with the step.  The sign of A
classifies the strategy: positive means the self-financed position beats the
discounting benchmark (an arbitrage when almost sure), negative the reverse
(so -x is the arbitrage), zero is the no-free-lunch case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import MarketModel, StatePriceDeflator, portfolio_rate
from .paths import PathEnsemble, TimeGrid, _freeze


@dataclass(frozen=True, slots=True)
class Strategy:
    """Deterministic portfolio path x: (n_times, N) over a parameter grid.

    source_times, when present, maps the (reparameterized) grid back to the
    parameter values the strategy was originally sampled on.
    """

    grid: TimeGrid
    x: np.ndarray
    source_times: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2 or x.shape[0] != self.grid.n_times:
            raise ValueError("x must be (n_times, N)")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite strategy weights")
        object.__setattr__(self, "x", _freeze(x))

    @property
    def n_assets(self) -> int:
        return int(self.x.shape[1])

    @property
    def is_closed(self) -> bool:
        return bool(np.allclose(self.x[0], self.x[-1], atol=1e-12))


@dataclass(frozen=True, slots=True)
class ActionReport:
    """Per-scenario action values and the quadrature cross-check."""

    action: np.ndarray        # (S,) integral evaluation
    endpoint: np.ndarray      # (S,) endpoint evaluation
    d01: np.ndarray           # (S,) discount factor along the strategy
    gap: float                # max |action - endpoint|


def is_self_financing(s: Strategy, market: MarketModel,
                      tol: float = 1e-8) -> dict:
    """Check Dx . D = d[x, D]/dt along the strategy.

    For deterministic (finite-variation) x the covariation density vanishes
    in the limit, so the condition is x' . D = 0; the discrete covariation
    estimate is reported alongside for reference.  Residuals are normalized
    by the nominal portfolio value.
    """
    _check_alignment(s, market)
    D = market.deflators
    xp = np.gradient(s.x, market.grid.dt, axis=0)
    lhs = np.einsum("tn,stn->st", xp, D)
    bracket = np.zeros_like(lhs)
    bracket[:, :-1] = np.einsum("tn,stn->st", np.diff(s.x, axis=0),
                                np.diff(D, axis=1)) / market.grid.dt
    scale = np.abs(np.einsum("tn,stn->st", s.x, D)) + 1e-300
    resid = np.abs(lhs) / scale
    return {
        "is_self_financing": bool(np.max(resid) <= tol),
        "max_residual": float(np.max(resid)),
        "residual": lhs,
        "covariation_density": bracket,
    }


def arc_length_reparameterize(s: Strategy, n_points: Optional[int] = None,
                              normalize: bool = False) -> Strategy:
    """Resample the strategy at constant speed.

    The new parameter is arc length (speed 1); with normalize=True it is
    rescaled to [0, 1] (constant speed = total length).  Piecewise-linear
    interpolation; stationary strategies (zero length) are rejected.
    """
    seg = np.linalg.norm(np.diff(s.x, axis=0), axis=1)
    tau = np.concatenate([[0.0], np.cumsum(seg)])
    length = tau[-1]
    if length <= 0:
        raise ValueError("stationary strategy has no arc-length parameter")
    if n_points is None:
        n_points = s.grid.n_times
    # collapse zero-length segments so interpolation stays well defined
    keep = np.concatenate([[True], seg > 0])
    tau_k, x_k, t_k = tau[keep], s.x[keep], s.grid.times[keep]
    new_tau = np.linspace(0.0, length, n_points)
    x_new = np.column_stack([np.interp(new_tau, tau_k, x_k[:, j])
                             for j in range(s.n_assets)])
    src = np.interp(new_tau, tau_k, t_k)
    if normalize:
        new_tau = new_tau / length
    return Strategy(TimeGrid(new_tau), x_new, source_times=_freeze(src))


def _check_alignment(s: Strategy, market: MarketModel):
    if s.grid.n_times != market.grid.n_times or \
            not np.allclose(s.grid.times, market.grid.times, atol=1e-12):
        raise ValueError("strategy grid must coincide with the market grid")
    if s.n_assets != market.n_assets:
        raise ValueError("strategy dimension must match the market")


def _rate_along(s: Strategy, market: MarketModel) -> np.ndarray:
    """r^{x_t}_t per (scenario, t)."""
    D = market.deflators
    num = np.einsum("stn,tn->st", D * market.short_rates, s.x)
    den = np.einsum("stn,tn->st", D, s.x)
    return num / den


def arbitrage_action(s: Strategy, market: MarketModel,
                     beta: Optional[StatePriceDeflator] = None) -> ActionReport:
    """Evaluate the action of a strategy both ways.

    `action` accumulates per-step increments of log(beta D^x) plus left-point
    rate terms; `endpoint` uses the closed endpoint formula with a trapezoid
    d01.  beta=None means beta identically 1.
    """
    _check_alignment(s, market)
    D = market.deflators
    dt = market.grid.dt
    dx_val = np.einsum("stn,tn->st", D, s.x)
    if np.any(dx_val <= 0):
        raise ValueError("nominal portfolio value must stay positive along "
                         "the strategy")
    logb = np.log(beta.paths.values) if beta is not None else 0.0
    dens = np.log(dx_val) + logb
    rx = _rate_along(s, market)
    a_int = (dens[:, -1] - dens[:, 0]) + np.sum(rx[:, :-1], axis=1) * dt
    int_r_trap = 0.5 * (rx[:, :-1] + rx[:, 1:]).sum(axis=1) * dt
    d01 = np.exp(-int_r_trap)
    a_end = (dens[:, -1] - dens[:, 0]) + int_r_trap
    return ActionReport(action=_freeze(a_int), endpoint=_freeze(a_end),
                        d01=_freeze(d01),
                        gap=float(np.max(np.abs(a_int - a_end))))


def classify_arbitrage(report: ActionReport, tol: float = 1e-6) -> str:
    """'positive' / 'negative' / 'zero' when unanimous across scenarios,
    else 'mixed'."""
    a = report.action
    if np.all(a > tol):
        return "positive"
    if np.all(a < -tol):
        return "negative"
    if np.all(np.abs(a) <= tol):
        return "zero"
    return "mixed"


def discount_homotopy_check(market: MarketModel, s1: Strategy, s2: Strategy,
                            beta: Optional[StatePriceDeflator] = None) -> dict:
    """Compare two strategies with identical endpoints.

    In markets where the rate profile r^x does not depend on x along the
    homotopy, d01 (hence the action) is a function of the endpoints only.
    Reports the worst per-scenario discrepancies.
    """
    if not (np.allclose(s1.x[0], s2.x[0], atol=1e-12)
            and np.allclose(s1.x[-1], s2.x[-1], atol=1e-12)):
        raise ValueError("strategies must share both endpoints")
    if abs(s1.grid.times[0] - s2.grid.times[0]) > 1e-12 or \
            abs(s1.grid.times[-1] - s2.grid.times[-1]) > 1e-12:
        raise ValueError("strategies must share the time interval")
    r1 = arbitrage_action(s1, market, beta)
    r2 = arbitrage_action(s2, market, beta)
    return {
        "d01_max_diff": float(np.max(np.abs(r1.d01 - r2.d01))),
        "action_max_diff": float(np.max(np.abs(r1.endpoint - r2.endpoint))),
        "reports": (r1, r2),
    }


def utility_foc_residual(market: MarketModel, x: np.ndarray, wealth: float,
                         u_prime=None, mode: str = "auto") -> dict:
    """First-order-condition residuals of expected-utility optimality.

    At an interior optimum the total returns Dlog D^j + r^j must be pairwise
    equal across assets; the residual matrix reports the mean differences and
    their standard errors.  The budget D^x(0) = wealth is enforced by scaling
    x (projection onto the constraint set); u_prime, when given, is only
    sanity-checked for positivity (it cancels from the residuals).
    """
    from .geometry import dlog_deflator
    x = np.asarray(x, dtype=float)
    d0 = float(market.deflators[0, 0, :] @ x)
    if d0 <= 0:
        raise ValueError("portfolio has nonpositive initial value")
    x = x * (wealth / d0)
    if u_prime is not None:
        probe = np.linspace(0.5 * wealth, 2.0 * wealth, 7)
        if np.any(np.asarray(u_prime(probe)) <= 0):
            raise ValueError("u_prime must be positive (monotone utility)")
    n = market.n_assets
    nu = []
    for j in range(n):
        ej = np.zeros(n)
        ej[j] = 1.0
        nu.append(dlog_deflator(market, ej, mode=mode)
                  + market.short_rates[..., j])
    means = np.zeros((n, n))
    errs = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            diff = np.nanmean(nu[i] - nu[j], axis=1)   # per-scenario time mean
            means[i, j] = means[j, i] = diff.mean()
            errs[i, j] = errs[j, i] = diff.std(ddof=1) / np.sqrt(diff.size)
    off = ~np.eye(n, dtype=bool)
    worst = float(np.max(np.abs(means[off]))) if n > 1 else 0.0
    return {
        "x": x,
        "mean_residuals": means,
        "stderr": errs,
        "max_abs_residual": worst,
    }
