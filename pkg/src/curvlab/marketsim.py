"""Lognormal market generator with Gaussian short rates.

Asset j has nominal value and short rate

    dS^j = S^j (alpha_j dt + sigma_j . dW),    dr^j = a_j dt + b_j . dW

with constant coefficients, so r^j_t = r0_j + a_j t + b_j . W_t and the zero
curve is Gaussian-affine:

    P^j_{t,t+h} = exp(-r^j_t h - a_j h^2 / 2 + |b_j|^2 h^3 / 6).

Nominal values are simulated by Euler-Maruyama; rates use the exact affine
solution (identical to their Euler scheme for constant coefficients).

Zero curvature requires common volatility rows (sigma_j and b_j independent
of j), a common rate drift a, and a common total-return level alpha_j + r0_j.
`calibrate_arbitrage_free` enforces the drift conditions (and refuses
markets with inconsistent volatility structure), splits the common return
level into the deterministic part C1 and the Brownian part C2, and builds the
state-price deflator

    log beta_t = -int_0^t (C1_u + b . W_u) du - sigma . W_t

under which beta_t S^j_t P^j_{t,T} is a martingale for every asset and
horizon.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import AnalyticCoefficients, MarketModel, StatePriceDeflator
from .gauges import Gauge
from .paths import PathEnsemble, TimeGrid, _freeze, brownian_motion


@dataclass(frozen=True, slots=True)
class ItoModel:
    """Constant-coefficient market specification."""

    alpha: np.ndarray    # (N,)
    sigma: np.ndarray    # (N, K)
    a: np.ndarray        # (N,)
    b: np.ndarray        # (N, K)
    s0: np.ndarray       # (N,)
    r0: np.ndarray       # (N,)

    def __post_init__(self):
        for name in ("alpha", "sigma", "a", "b", "s0", "r0"):
            object.__setattr__(self, name,
                               _freeze(np.atleast_1d(np.asarray(getattr(self, name), float))))
        n = self.alpha.size
        sig = self.sigma if self.sigma.ndim == 2 else self.sigma[:, None]
        bb = self.b if self.b.ndim == 2 else self.b[:, None]
        object.__setattr__(self, "sigma", _freeze(sig))
        object.__setattr__(self, "b", _freeze(bb))
        if sig.shape[0] != n or bb.shape != sig.shape:
            raise ValueError("sigma and b must both be (N, K)")
        for name in ("a", "s0", "r0"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")
        if np.any(self.s0 <= 0):
            raise ValueError("initial nominal values must be positive")

    @property
    def n_assets(self) -> int:
        return int(self.alpha.size)

    @property
    def n_factors(self) -> int:
        return int(self.sigma.shape[1])


@dataclass(frozen=True, slots=True)
class CalibrationResult:
    """Calibrated model, its simulated market and the pricing kernel."""

    model: ItoModel
    market: MarketModel
    c_level: float                 # common alpha_j + r0_j
    c1: np.ndarray                 # deterministic return component, (n_times,)
    c2: PathEnsemble               # Brownian return component, (S, T)
    beta: StatePriceDeflator


@dataclass(frozen=True, slots=True)
class TotalReturn:
    """Instantaneous total return of a portfolio and its no-arbitrage dual."""

    ret: np.ndarray                # Dlog D^x
    dual: Optional[np.ndarray]     # -Dlog beta - r^x (None without a beta)
    gap: Optional[np.ndarray]


def _noise_matrix(noise: PathEnsemble) -> np.ndarray:
    w = noise.values
    return w if w.ndim == 3 else w[:, :, None]


def default_maturities(h_max: float = 5.0, dh: float = 0.25) -> np.ndarray:
    return np.arange(0.0, h_max + dh / 2, dh)


def affine_surface(model: ItoModel, rates: np.ndarray,
                   offsets: np.ndarray) -> np.ndarray:
    """Gaussian-affine zero curve per asset: rates (..., N) -> (..., N, M)."""
    h = np.asarray(offsets, float)
    b2 = np.einsum("nk,nk->n", model.b, model.b)
    expo = (-rates[..., None] * h
            - 0.5 * model.a[:, None] * h ** 2
            + b2[:, None] * h ** 3 / 6.0)
    return np.exp(expo)


def build_market(model: ItoModel, grid: TimeGrid, n_scenarios: int, seed: int,
                 maturities: Optional[np.ndarray] = None) -> MarketModel:
    """Simulate the model and assemble a MarketModel with affine zero curves."""
    if maturities is None:
        maturities = default_maturities()
    maturities = np.asarray(maturities, float)
    noise = brownian_motion(grid, n_scenarios, seed, dim=model.n_factors)
    W = _noise_matrix(noise)
    dt = grid.dt
    t = grid.times
    n, m = n_scenarios, grid.n_times
    N = model.n_assets
    S = np.empty((n, m, N))
    S[:, 0, :] = model.s0
    for k in range(m - 1):
        dW = W[:, k + 1, :] - W[:, k, :]
        S[:, k + 1, :] = S[:, k, :] * (1.0 + model.alpha * dt + dW @ model.sigma.T)
    if np.any(S <= 0):
        raise ValueError("nominal path hit zero; refine the grid or tame sigma")
    rates = model.r0 + model.a * t[None, :, None] + np.einsum(
        "stk,nk->stn", W, model.b)
    surf = affine_surface(model, rates, maturities)
    gauges = []
    for j in range(N):
        defl = PathEnsemble(grid, S[:, :, j], seed=seed)
        gauges.append(Gauge(defl, maturities, surf[:, :, j, :], label=f"asset{j}"))
    analytic = AnalyticCoefficients(model.alpha, model.sigma, model.a, model.b)
    return MarketModel(gauges=tuple(gauges), short_rates=rates,
                       noise=noise, analytic=analytic)


def bond_price(model: ItoModel, market: MarketModel, j: int,
               horizon: float) -> np.ndarray:
    """P^j_{t,T} for fixed T = horizon along the whole grid, (S, T_grid).

    Entries with t > T (bond already matured) are NaN.
    """
    h = horizon - market.grid.times
    h = np.where(h >= -1e-12, h, np.nan)
    r = market.short_rates[..., j]
    b2 = float(model.b[j] @ model.b[j])
    return np.exp(-r * h - 0.5 * model.a[j] * h ** 2 + b2 * h ** 3 / 6.0)


def term_structure(model: ItoModel, market: MarketModel, j: int, t_index: int,
                   offsets: Optional[np.ndarray] = None,
                   method: str = "closed_form", n_inner: int = 256,
                   n_steps: int = 64, seed: int = 20) -> np.ndarray:
    """Zero curve of asset j at one valuation date, (n_scenarios, M).

    method "closed_form" evaluates the affine formula; "nested_mc" prices
    E_t[exp(-int r)] by an inner antithetic Euler simulation of the rate,
    sharing inner noise across outer scenarios.
    """
    if offsets is None:
        offsets = market.gauges[j].offsets
    offsets = np.asarray(offsets, float)
    r_t = market.short_rates[:, t_index, j]
    if method == "closed_form":
        b2 = float(model.b[j] @ model.b[j])
        return np.exp(-r_t[:, None] * offsets
                      - 0.5 * model.a[j] * offsets ** 2
                      + b2 * offsets ** 3 / 6.0)
    if method != "nested_mc":
        raise ValueError(f"unknown term-structure method {method!r}")
    h_max = float(offsets[-1])
    if h_max == 0.0:
        return np.ones((r_t.size, offsets.size))
    dt_in = h_max / n_steps
    rng = np.random.default_rng(seed)
    half = n_inner // 2
    z = rng.standard_normal((half, n_steps, model.n_factors)) * np.sqrt(dt_in)
    z = np.concatenate([z, -z], axis=0)
    w_in = np.concatenate([np.zeros((n_inner, 1, model.n_factors)),
                           np.cumsum(z, axis=1)], axis=1)
    tau = np.arange(n_steps + 1) * dt_in
    # inner rate increment beyond r_t: a tau + b . W_in, left-point integral
    incr = model.a[j] * tau + w_in @ model.b[j]          # (n_inner, n_steps+1)
    int_incr = np.concatenate(
        [np.zeros((n_inner, 1)), np.cumsum(incr[:, :-1] * dt_in, axis=1)], axis=1)
    out = np.empty((r_t.size, offsets.size))
    for mi, h in enumerate(offsets):
        ki = int(round(h / dt_in))
        disc = np.exp(-int_incr[:, ki])[None, :] * np.exp(-r_t[:, None] * h)
        out[:, mi] = disc.mean(axis=1)
    return out


def inject_arbitrage(model: ItoModel, asset: int, delta: float) -> ItoModel:
    """Bump the nominal drift of one asset, creating curvature of known size."""
    alpha = np.array(model.alpha)
    alpha[asset] += delta
    return dataclasses.replace(model, alpha=alpha)


def calibrate_arbitrage_free(model: ItoModel, grid: TimeGrid, n_scenarios: int,
                             seed: int,
                             maturities: Optional[np.ndarray] = None,
                             ) -> CalibrationResult:
    """Flatten the market to zero curvature and build its pricing kernel.

    Requires common volatility rows across assets (both sigma and b); drifts
    are adjusted so alpha_j + r0_j and a_j are asset-independent.  Returns the
    calibrated model, a simulated market, the C1/C2 return split and the
    state-price deflator beta.
    """
    if not np.allclose(model.sigma, model.sigma[0], atol=1e-12) or \
       not np.allclose(model.b, model.b[0], atol=1e-12):
        raise ValueError("inconsistent volatility structure: zero curvature "
                         "needs common sigma and b rows across assets")
    c = float(np.mean(model.alpha + model.r0))
    a_bar = float(np.mean(model.a))
    calibrated = dataclasses.replace(
        model,
        alpha=c - model.r0,
        a=np.full(model.n_assets, a_bar),
    )
    market = build_market(calibrated, grid, n_scenarios, seed,
                          maturities=maturities)
    sigma = calibrated.sigma[0]
    b = calibrated.b[0]
    sig2 = float(sigma @ sigma)
    t = grid.times
    c1 = c - 0.5 * sig2 + a_bar * t
    W = _noise_matrix(market.noise)
    with np.errstate(divide="ignore", invalid="ignore"):
        half_wt = np.where(t > 0, 1.0 / (2.0 * t), 0.0)
    c2 = (W @ sigma) * half_wt + W @ b
    # log beta: left-point time integral of -(C1 + b.W), minus sigma.W
    integrand = -(c1[None, :] + W @ b)
    log_beta = np.zeros((n_scenarios, grid.n_times))
    np.cumsum(integrand[:, :-1] * grid.dt, axis=1, out=log_beta[:, 1:])
    log_beta -= W @ sigma
    beta = StatePriceDeflator(PathEnsemble(grid, np.exp(log_beta), seed=seed),
                              label="calibrated kernel")
    return CalibrationResult(model=calibrated, market=market, c_level=c,
                             c1=_freeze(c1),
                             c2=PathEnsemble(grid, c2, seed=seed),
                             beta=beta)


def instantaneous_total_return(market: MarketModel, x: np.ndarray,
                               beta: Optional[StatePriceDeflator] = None,
                               mode: str = "auto") -> TotalReturn:
    """Dlog D^x alongside its no-arbitrage dual -Dlog beta - r^x.

    The two agree (up to estimator noise) exactly when beta is a state-price
    deflator for the market.
    """
    from .geometry import dlog_deflator, portfolio_rate, _dlog_symmetric
    ret = dlog_deflator(market, x, mode=mode)
    if beta is None:
        return TotalReturn(ret=ret, dual=None, gap=None)
    dlb = _dlog_symmetric(beta.paths.values, market.grid.dt)
    dual = -dlb - portfolio_rate(market, x)
    return TotalReturn(ret=ret, dual=dual, gap=ret - dual)
