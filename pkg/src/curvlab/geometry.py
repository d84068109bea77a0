"""Market geometry: connection, parallel transport, curvature, no-arbitrage.

A market is a collection of gauges over a common scenario/time grid.  For a
portfolio x the nominal value is D^x = sum_j x_j D^j with short rate
r^x = sum_j (x_j D^j / D^x) r^j.  The connection acts on a fibre coordinate g
by

    Gamma(x, t, g) . (dx, dt) = g * (D^dx / D^x  -  r^x dt)

and its curvature is the 2-form with coefficients (per unit g)

    rho_j = (D^j / D^x) * [ (r^x + Dlog D^x) - (r^j + Dlog D^j) ]

where Dlog is the symmetric (two-sided) logarithmic drift.  The market is
free of arbitrage in the no-free-lunch sense iff rho vanishes for all x, in
which case some positive process beta makes beta * D^x a martingale for every
constant portfolio and the continuity residual Dlog(beta D^x) + r^x is zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gauges import Gauge
from .paths import KernelSpec, PathEnsemble, TimeGrid, _freeze, nelson_derivatives


@dataclass(frozen=True, slots=True)
class AnalyticCoefficients:
    """Constant SDE coefficients of a lognormal market, when known.

    dD^j = D^j (alpha_j dt + sigma_j . dW),  dr^j = a_j dt + b_j . dW.
    Carrying these enables closed-form symmetric drifts (the analytic fast
    path for curvature); estimators remain available without them.
    """

    alpha: np.ndarray    # (N,)
    sigma: np.ndarray    # (N, K)
    a: np.ndarray        # (N,)
    b: np.ndarray        # (N, K)

    def __post_init__(self):
        for name in ("alpha", "sigma", "a", "b"):
            object.__setattr__(self, name,
                               _freeze(np.asarray(getattr(self, name), dtype=float)))
        if self.sigma.ndim != 2 or self.b.shape != self.sigma.shape:
            raise ValueError("sigma and b must be (N, K)")
        if self.alpha.shape != (self.sigma.shape[0],) or self.a.shape != self.alpha.shape:
            raise ValueError("alpha and a must be (N,)")


@dataclass(frozen=True, slots=True)
class MarketModel:
    """Gauges on a shared grid, with short-rate paths and optional extras."""

    gauges: tuple
    short_rates: np.ndarray            # (n_scenarios, n_times, N)
    noise: Optional[PathEnsemble] = None      # driving Brownian motion (.., K)
    analytic: Optional[AnalyticCoefficients] = None

    def __post_init__(self):
        if not self.gauges:
            raise ValueError("a market needs at least one gauge")
        g0 = self.gauges[0]
        for g in self.gauges:
            if g.deflator.values.shape != g0.deflator.values.shape:
                raise ValueError("gauges must share the scenario/time grid")
        r = np.asarray(self.short_rates, dtype=float)
        if r.shape != g0.deflator.values.shape + (len(self.gauges),):
            raise ValueError("short_rates must be (n_scenarios, n_times, N)")
        object.__setattr__(self, "gauges", tuple(self.gauges))
        object.__setattr__(self, "short_rates", _freeze(r))

    @property
    def grid(self) -> TimeGrid:
        return self.gauges[0].deflator.grid

    @property
    def n_assets(self) -> int:
        return len(self.gauges)

    @property
    def n_scenarios(self) -> int:
        return self.gauges[0].deflator.n_scenarios

    @property
    def deflators(self) -> np.ndarray:
        """(n_scenarios, n_times, N) deflator matrix."""
        return np.stack([g.deflator.values for g in self.gauges], axis=-1)


@dataclass(frozen=True, slots=True)
class StatePriceDeflator:
    """Candidate positive process beta with beta * D^x a martingale."""

    paths: PathEnsemble
    label: str = ""

    def __post_init__(self):
        if np.any(self.paths.values <= 0):
            raise ValueError("state-price deflator must be strictly positive")


@dataclass(frozen=True, slots=True)
class CurvatureField:
    """Curvature coefficients rho_j(scenario, t) at a fixed portfolio x, g=1."""

    x: np.ndarray
    rho: np.ndarray        # (n_scenarios, n_times, N), NaN where undefined
    mode: str
    grid: TimeGrid


@dataclass(frozen=True, slots=True)
class ValueFlow:
    """Portfolio nominal-value current: density rho^beta and flux div J.

    The pair satisfies the continuity law D rho^beta + div J = 0 exactly when
    the market is arbitrage-free and beta is a true state-price deflator.
    """

    density: PathEnsemble       # log(beta * D^x)
    divergence: PathEnsemble    # r^x
    residual: PathEnsemble      # D density + divergence


# ---------------------------------------------------------------------------
# portfolio aggregates


def _as_weights(x: np.ndarray, n_assets: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n_assets,):
        raise ValueError(f"portfolio must have shape ({n_assets},)")
    return x


def portfolio_deflator(market: MarketModel, x: np.ndarray) -> np.ndarray:
    """D^x = sum_j x_j D^j, shape (n_scenarios, n_times)."""
    x = _as_weights(x, market.n_assets)
    return market.deflators @ x


def portfolio_rate(market: MarketModel, x: np.ndarray) -> np.ndarray:
    """r^x = sum_j (x_j D^j / D^x) r^j, shape (n_scenarios, n_times)."""
    x = _as_weights(x, market.n_assets)
    D = market.deflators
    dx = D @ x
    return ((D * market.short_rates) @ x) / dx


def _dlog_symmetric(values: np.ndarray, dt: float) -> np.ndarray:
    """Raw symmetric drift of log(values) per (scenario, t); NaN at the ends."""
    logv = np.log(np.abs(values))
    out = np.full(values.shape, np.nan)
    out[:, 1:-1] = (logv[:, 2:] - logv[:, :-2]) / (2.0 * dt)
    return out


def _dlog_analytic_portfolio(market: MarketModel, x: np.ndarray) -> np.ndarray:
    """Closed-form symmetric drift of log D^x from the SDE coefficients.

    Dlog D^x = sum w_j alpha_j - |sigma^x|^2 / 2 + sigma^x . W_t / (2 t)
    with deflator weights w_j = x_j D^j / D^x and sigma^x = sum w_j sigma_j.
    The Brownian term is taken as 0 at t = 0 (W_0 = 0).
    """
    if market.analytic is None or market.noise is None:
        raise ValueError("market carries no analytic coefficients")
    c = market.analytic
    D = market.deflators
    w = (D * x) / (D @ x)[..., None]                  # (S, T, N)
    alpha_x = w @ c.alpha
    sigma_x = np.einsum("stn,nk->stk", w, c.sigma)    # (S, T, K)
    W = market.noise.values
    if W.ndim == 2:
        W = W[:, :, None]
    t = market.grid.times
    with np.errstate(divide="ignore", invalid="ignore"):
        half_wt = np.where(t > 0, 1.0 / (2.0 * t), 0.0)
    brown = np.einsum("stk,stk->st", sigma_x, W) * half_wt
    return alpha_x - 0.5 * np.einsum("stk,stk->st", sigma_x, sigma_x) + brown


def dlog_deflator(market: MarketModel, x: np.ndarray, mode: str = "auto",
                  conditioning: KernelSpec = KernelSpec()) -> np.ndarray:
    """Symmetric drift Dlog D^x, shape (n_scenarios, n_times).

    mode: "analytic" uses the attached SDE coefficients; "increment" uses raw
    symmetric log-differences (noisy, unbiased per step); "nelson" runs the
    state-conditional kernel estimator; "auto" prefers analytic.
    """
    x = _as_weights(x, market.n_assets)
    if mode == "auto":
        mode = "analytic" if (market.analytic is not None
                              and market.noise is not None) else "increment"
    dx = portfolio_deflator(market, x)
    if mode == "analytic":
        return _dlog_analytic_portfolio(market, x)
    if mode == "increment":
        return _dlog_symmetric(dx, market.grid.dt)
    if mode == "nelson":
        est = nelson_derivatives(
            PathEnsemble(market.grid, np.log(dx), may_contain_nan=False),
            conditioning)
        return est.mean
    raise ValueError(f"unknown drift mode {mode!r}")


# ---------------------------------------------------------------------------
# connection and transport


def connection_eval(market: MarketModel, x: np.ndarray, t_index: int,
                    g: float, dx: np.ndarray, dt_leg: float) -> np.ndarray:
    """Gamma(x, t, g).(dx, dt) per scenario: g (D^dx / D^x - r^x dt)."""
    x = _as_weights(x, market.n_assets)
    dx = _as_weights(dx, market.n_assets)
    D = market.deflators[:, t_index, :]
    num = D @ dx
    den = D @ x
    r = ((D * market.short_rates[:, t_index, :]) @ x) / den
    return g * (num / den - r * dt_leg)


def _time_index(grid: TimeGrid, t: float) -> int:
    k = int(round((t - grid.times[0]) / grid.dt))
    if not (0 <= k < grid.n_times) or abs(grid.times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not on the market grid")
    return k


def parallel_transport(market: MarketModel, vertices: Sequence[tuple],
                       g1: float = 1.0) -> np.ndarray:
    """Transport the fibre value g1 along a polyline of (x, t) vertices.

    Horizontal lifts integrate the connection: a nominal leg (fixed t)
    multiplies by (x_a . D_t)/(x_b . D_t); a time leg (fixed x) multiplies by
    exp(integral of r^x dt); mixed legs are split into grid steps with the
    nominal factor applied at the left time of each step.  Returns the
    transported value per scenario.
    """
    if len(vertices) < 2:
        raise ValueError("need at least two vertices")
    g = np.full(market.n_scenarios, float(g1))
    D = market.deflators
    dt = market.grid.dt
    for (xa, ta), (xb, tb) in zip(vertices[:-1], vertices[1:]):
        xa = _as_weights(np.asarray(xa, float), market.n_assets)
        xb = _as_weights(np.asarray(xb, float), market.n_assets)
        ka, kb = _time_index(market.grid, ta), _time_index(market.grid, tb)
        if ka == kb:
            g = g * (D[:, ka, :] @ xa) / (D[:, ka, :] @ xb)
            continue
        step = 1 if kb > ka else -1
        ks = list(range(ka, kb, step))
        n_sub = len(ks)
        for i, k in enumerate(ks):
            x_lo = xa + (xb - xa) * (i / n_sub)
            x_hi = xa + (xb - xa) * ((i + 1) / n_sub)
            Dk = D[:, k, :]
            g = g * (Dk @ x_lo) / (Dk @ x_hi)
            r = ((Dk * market.short_rates[:, k, :]) @ x_hi) / (Dk @ x_hi)
            g = g * np.exp(r * dt * step)
    return g


def holonomy_loop(market: MarketModel, vertices: Sequence[tuple],
                  g1: float = 1.0) -> np.ndarray:
    """Transport around a closed polyline; trivial iff the loop encloses
    no curvature."""
    x0, t0 = vertices[0]
    xe, te = vertices[-1]
    if not (np.allclose(x0, xe) and abs(t0 - te) < 1e-12):
        raise ValueError("loop must close: first and last vertices must match")
    return parallel_transport(market, vertices, g1)


# ---------------------------------------------------------------------------
# curvature and no-arbitrage diagnostics


def curvature(market: MarketModel, x: np.ndarray, mode: str = "auto",
              g: float = 1.0,
              conditioning: KernelSpec = KernelSpec()) -> CurvatureField:
    """Curvature coefficients rho_j at portfolio x.

    rho_j = g (D^j / D^x) [(r^x + Dlog D^x) - (r^j + Dlog D^j)]; all zero
    simultaneously for every x exactly when no free lunch exists.
    """
    x = _as_weights(x, market.n_assets)
    if mode == "auto":
        mode = "analytic" if (market.analytic is not None
                              and market.noise is not None) else "increment"
    D = market.deflators
    dx = D @ x
    nu_x = dlog_deflator(market, x, mode=mode, conditioning=conditioning) \
        + portfolio_rate(market, x)
    rho = np.empty_like(market.short_rates)
    ej = np.zeros(market.n_assets)
    for j in range(market.n_assets):
        ej[:] = 0.0
        ej[j] = 1.0
        nu_j = dlog_deflator(market, ej, mode=mode, conditioning=conditioning) \
            + market.short_rates[..., j]
        rho[..., j] = g * (D[..., j] / dx) * (nu_x - nu_j)
    return CurvatureField(x=_freeze(x.copy()), rho=_freeze(rho), mode=mode,
                          grid=market.grid)


def curvature_fd_check(market: MarketModel, x: np.ndarray, eps: float = 1e-5,
                       mode: str = "auto") -> np.ndarray:
    """-d/dx_j (Dlog D^x + r^x) by central differences in x.

    Cross-check for the closed-form coefficients: equals rho_j when the
    diffusion row of D^x does not depend on x (e.g. common volatility rows).
    """
    x = _as_weights(x, market.n_assets)
    out = np.empty(market.short_rates.shape)
    for j in range(market.n_assets):
        xp, xm = x.copy(), x.copy()
        xp[j] += eps
        xm[j] -= eps
        fp = dlog_deflator(market, xp, mode=mode) + portfolio_rate(market, xp)
        fm = dlog_deflator(market, xm, mode=mode) + portfolio_rate(market, xm)
        out[..., j] = -(fp - fm) / (2.0 * eps)
    return out


def continuity_residual(market: MarketModel, x: np.ndarray,
                        beta: StatePriceDeflator) -> ValueFlow:
    """Value-current continuity check: Dlog(beta D^x) + r^x, per (scenario, t).

    Computed with forward increments of the density and left-point rates
    (NaN at the last grid point); identically ~0 for a true state-price
    deflator in an arbitrage-free market.
    """
    x = _as_weights(x, market.n_assets)
    dt = market.grid.dt
    dens = np.log(beta.paths.values * portfolio_deflator(market, x))
    rx = portfolio_rate(market, x)
    res = np.full(dens.shape, np.nan)
    res[:, :-1] = (dens[:, 1:] - dens[:, :-1]) / dt + rx[:, :-1]
    grid = market.grid
    return ValueFlow(
        density=PathEnsemble(grid, dens),
        divergence=PathEnsemble(grid, rx),
        residual=PathEnsemble(grid, res, may_contain_nan=True),
    )


def sample_portfolios(n_assets: int, n_random: int = 16, seed: int = 0) -> np.ndarray:
    """Evaluation set on the simplex: unit vectors, pairwise midpoints and
    random interior points."""
    pts = [np.eye(n_assets)[j] for j in range(n_assets)]
    for i in range(n_assets):
        for j in range(i + 1, n_assets):
            m = np.zeros(n_assets)
            m[i] = m[j] = 0.5
            pts.append(m)
    rng = np.random.default_rng(seed)
    pts.extend(rng.dirichlet(np.ones(n_assets), size=n_random))
    return np.array(pts)


def nflvr_report(market: MarketModel,
                 beta_candidates: Sequence[StatePriceDeflator] = (),
                 mode: str = "auto", threshold: float = 5.0,
                 seed: int = 0, n_random: int = 16,
                 atol: float = 1e-12) -> dict:
    """Aggregate no-free-lunch verdict over a sampled set of portfolios.

    For each sampled x and asset j the per-scenario time mean of rho_j is
    computed; scenario independence gives the standard error of its mean.
    The report aggregates these into an RMS curvature with a matched RMS
    stderr, a verdict at `threshold` standard errors, and (when candidates
    are supplied) the best continuity residual among them.  `atol` is an
    absolute floor under which curvature counts as zero regardless of the
    stderr (which itself collapses to rounding noise in exactly calibrated
    markets).
    """
    xs = sample_portfolios(market.n_assets, n_random=n_random, seed=seed)
    means, errs = [], []
    for x in xs:
        rho = curvature(market, x, mode=mode).rho
        per_scen = np.nanmean(rho, axis=1)            # (S, N)
        m = per_scen.mean(axis=0)
        s = per_scen.std(axis=0, ddof=1) / np.sqrt(per_scen.shape[0])
        means.append(m)
        errs.append(s)
    means = np.array(means)
    errs = np.array(errs)
    rms = float(np.sqrt(np.mean(means ** 2)))
    stderr = float(np.sqrt(np.mean(errs ** 2)))
    verdict = ("arbitrage" if rms > max(threshold * stderr, atol)
               else "no-arbitrage")
    beta_residual = None
    best = None
    for cand in beta_candidates:
        vals = []
        for x in xs:
            res = continuity_residual(market, x, cand).residual.values
            vals.append(np.nanmean(res))
        score = float(np.sqrt(np.mean(np.array(vals) ** 2)))
        if best is None or score < best:
            best = score
            beta_residual = score
    return {
        "curvature_rms": rms,
        "stderr": stderr,
        "verdict": verdict,
        "beta_residual": beta_residual,
        "per_portfolio_mean": means,
        "per_portfolio_stderr": errs,
        "portfolios": xs,
    }
