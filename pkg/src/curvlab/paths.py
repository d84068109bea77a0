"""Stochastic path ensembles, Ito/Stratonovich calculus and two-sided drifts.

Everything downstream works on discrete-time ensembles of sample paths over a
shared uniform time grid.  Integrals use the left-point (Ito) convention; the
Stratonovich variant is recovered from the exact discrete identity

    strat = ito + (1/2) * quadratic covariation

which holds summand by summand for the discretizations used here.  The
symmetric drift of a process is estimated by kernel regression of forward and
backward difference quotients on the current state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


# ---------------------------------------------------------------------------
# grids and ensembles


@dataclass(frozen=True, slots=True)
class TimeGrid:
    """Uniform time grid t0 = times[0] < ... < times[-1]."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("time grid needs at least two points")
        steps = np.diff(t)
        if np.any(steps <= 0):
            raise ValueError("time grid must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("time grid must be uniform")
        t = t.copy()
        t.flags.writeable = False
        object.__setattr__(self, "times", t)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def n_times(self) -> int:
        return int(self.times.size)

    def refine(self, factor: int = 2) -> "TimeGrid":
        """Same span with `factor` times smaller step."""
        n = (self.n_times - 1) * factor + 1
        return TimeGrid(np.linspace(self.times[0], self.times[-1], n))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, slots=True)
class PathEnsemble:
    """Sample paths on a grid.

    values has shape (n_scenarios, n_times) for scalar processes or
    (n_scenarios, n_times, dim) for vector ones.  Immutable; NaN is allowed
    only where an estimator is undefined (flagged by `may_contain_nan`).
    """

    grid: TimeGrid
    values: np.ndarray
    seed: Optional[int] = None
    may_contain_nan: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim not in (2, 3):
            raise ValueError("values must be (n_scenarios, n_times[, dim])")
        if v.shape[1] != self.grid.n_times:
            raise ValueError("values second axis must match the grid")
        if not self.may_contain_nan and not np.all(np.isfinite(v)):
            raise ValueError("non-finite path values")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def n_scenarios(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return 1 if self.values.ndim == 2 else int(self.values.shape[2])

    def with_values(self, values: np.ndarray, may_contain_nan: bool = False) -> "PathEnsemble":
        return PathEnsemble(self.grid, values, seed=self.seed,
                            may_contain_nan=may_contain_nan)


@dataclass(frozen=True, slots=True)
class KernelSpec:
    """Conditioning spec for two-sided drift estimation.

    bandwidth=None selects Silverman's rule per time slice, widened by
    bandwidth_scale: the difference-quotient responses are noise-dominated
    (variance ~ 1/dt), and the local-linear fit tolerates oversmoothing with
    only second-order bias, so trading bias for variance is the right
    default.  min_scenarios guards against meaningless regressions on tiny
    ensembles (deterministic ensembles are exempt: conditioning on a
    constant is the plain mean).
    """

    bandwidth: Optional[float] = None
    bandwidth_scale: float = 2.5
    min_scenarios: int = 1000
    n_bins: int = 512


@dataclass(frozen=True, slots=True)
class NelsonEstimate:
    """Forward/backward drift estimates conditioned on the current state.

    forward[:, k] estimates the forward drift at t_k (NaN at the last grid
    point), backward[:, k] the backward drift (NaN at the first point, and at
    t = 0 where the backward quotient does not exist).  mean is their average
    where both are defined.
    """

    grid: TimeGrid
    forward: np.ndarray
    backward: np.ndarray
    bandwidth: float
    window: int = 1

    @property
    def mean(self) -> np.ndarray:
        return 0.5 * (self.forward + self.backward)


# ---------------------------------------------------------------------------
# simulation


def brownian_motion(grid: TimeGrid, n_scenarios: int, seed: int,
                    dim: int = 1) -> PathEnsemble:
    """Standard Brownian motion started at 0, one column per component."""
    rng = np.random.default_rng(seed)
    dW = rng.standard_normal((n_scenarios, grid.n_times - 1, dim))
    dW *= np.sqrt(grid.dt)
    W = np.zeros((n_scenarios, grid.n_times, dim))
    np.cumsum(dW, axis=1, out=W[:, 1:, :])
    if dim == 1:
        W = W[:, :, 0]
    return PathEnsemble(grid, W, seed=seed)


def simulate_ito(drift: Callable[[np.ndarray, float], np.ndarray],
                 vol: Callable[[np.ndarray, float], np.ndarray],
                 x0: np.ndarray,
                 grid: TimeGrid,
                 n_scenarios: int,
                 seed: int,
                 n_factors: int = 1,
                 noise: Optional[PathEnsemble] = None,
                 ) -> PathEnsemble:
    """Euler-Maruyama for dX = drift(X,t) dt + vol(X,t) dW.

    x0 is scalar or (dim,); drift maps (n_scenarios, dim), t -> same shape;
    vol maps to (n_scenarios, dim, n_factors).  A pre-drawn Brownian ensemble
    can be passed to correlate several simulations on the same noise.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    dim = x0.size
    if noise is None:
        noise = brownian_motion(grid, n_scenarios, seed, dim=n_factors)
    Wv = noise.values if noise.values.ndim == 3 else noise.values[:, :, None]
    if Wv.shape[2] != n_factors or Wv.shape[0] != n_scenarios:
        raise ValueError("noise ensemble shape mismatch")
    dt = grid.dt
    X = np.empty((n_scenarios, grid.n_times, dim))
    X[:, 0, :] = x0
    for k in range(grid.n_times - 1):
        xk = X[:, k, :]
        t = float(grid.times[k])
        dW = Wv[:, k + 1, :] - Wv[:, k, :]
        mu = np.broadcast_to(np.asarray(drift(xk, t), dtype=float), xk.shape)
        sig = np.asarray(vol(xk, t), dtype=float)
        sig = np.broadcast_to(sig, (n_scenarios, dim, n_factors))
        X[:, k + 1, :] = xk + mu * dt + np.einsum("sjk,sk->sj", sig, dW)
    if dim == 1:
        X = X[:, :, 0]
    return PathEnsemble(grid, X, seed=seed)


# ---------------------------------------------------------------------------
# discrete stochastic calculus


def _pair(x: PathEnsemble, s: PathEnsemble):
    if x.grid.n_times != s.grid.n_times or not np.allclose(x.grid.times, s.grid.times):
        raise ValueError("integrand and integrator must share a grid")
    if x.n_scenarios != s.n_scenarios:
        raise ValueError("scenario count mismatch")
    xv, sv = x.values, s.values
    if xv.ndim != sv.ndim:
        raise ValueError("integrand/integrator dimension mismatch")
    return xv, sv


def ito_integral(x: PathEnsemble, s: PathEnsemble) -> PathEnsemble:
    """Left-point sums of x dS, cumulated along the grid.

    For vector ensembles the components are contracted (x . dS), so the
    result is always scalar, starting at 0.
    """
    xv, sv = _pair(x, s)
    incr = xv[:, :-1, ...] * np.diff(sv, axis=1)
    if incr.ndim == 3:
        incr = incr.sum(axis=2)
    out = np.zeros((x.n_scenarios, x.grid.n_times))
    np.cumsum(incr, axis=1, out=out[:, 1:])
    return PathEnsemble(x.grid, out, seed=x.seed)


def quadratic_covariation(x: PathEnsemble, s: PathEnsemble) -> PathEnsemble:
    """[x, S]_t as cumulative sums of increment products (contracted)."""
    xv, sv = _pair(x, s)
    prod = np.diff(xv, axis=1) * np.diff(sv, axis=1)
    if prod.ndim == 3:
        prod = prod.sum(axis=2)
    out = np.zeros((x.n_scenarios, x.grid.n_times))
    np.cumsum(prod, axis=1, out=out[:, 1:])
    return PathEnsemble(x.grid, out, seed=x.seed)


def stratonovich_integral(x: PathEnsemble, s: PathEnsemble) -> PathEnsemble:
    """Stratonovich integral via the exact discrete bridge ito + [x,S]/2."""
    ito = ito_integral(x, s)
    br = quadratic_covariation(x, s)
    return PathEnsemble(x.grid, ito.values + 0.5 * br.values, seed=x.seed)


# ---------------------------------------------------------------------------
# two-sided (Nelson) drift estimation


def _binned_kernel_regression(state: np.ndarray, y: np.ndarray,
                              bandwidth: float, n_bins: int) -> np.ndarray:
    """Gaussian local-linear fit of y on state, evaluated at each state.

    Linear-binning approximation on a regular grid: O(n + bins * kernel)
    instead of O(n^2), indistinguishable from the exact fit at this bin
    count.  Local-linear (rather than Nadaraya-Watson) kills the design
    bias, which matters because the conditional drifts being estimated are
    close to linear in the state.
    """
    lo, hi = state.min(), state.max()
    if hi - lo <= 0 or bandwidth <= 0:
        # degenerate state: conditioning on a constant is the plain mean
        return np.full_like(y, y.mean())
    pad = 4.0 * bandwidth
    edges = np.linspace(lo - pad, hi + pad, n_bins)
    step = edges[1] - edges[0]
    idx = np.clip(((state - edges[0]) / step).astype(int), 0, n_bins - 2)
    w_hi = (state - edges[idx]) / step
    w_lo = 1.0 - w_hi
    counts = (np.bincount(idx, weights=w_lo, minlength=n_bins)
              + np.bincount(idx + 1, weights=w_hi, minlength=n_bins))
    sums = (np.bincount(idx, weights=w_lo * y, minlength=n_bins)
            + np.bincount(idx + 1, weights=w_hi * y, minlength=n_bins))
    half = int(np.ceil(4.0 * bandwidth / step))
    u = np.arange(-half, half + 1) * step
    ker = np.exp(-0.5 * (u / bandwidth) ** 2)
    # weighted moments around each evaluation bin (convolutions flip u, so
    # S1/T1 pick up a sign that cancels in the estimator)
    s0 = np.convolve(counts, ker, mode="same")
    s1 = np.convolve(counts, u * ker, mode="same")
    s2 = np.convolve(counts, u * u * ker, mode="same")
    t0 = np.convolve(sums, ker, mode="same")
    t1 = np.convolve(sums, u * ker, mode="same")
    det = s0 * s2 - s1 ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.where(det > 0, (s2 * t0 - s1 * t1) / np.where(det > 0, det, 1.0),
                     t0 / np.where(s0 > 0, s0, 1.0))
    # backfill empty regions with the global mean (cannot occur at sample points)
    m = np.where(s0 > 0, m, y.mean())
    return m[idx] * w_lo + m[idx + 1] * w_hi


def _silverman(state: np.ndarray) -> float:
    n = state.size
    sd = state.std()
    q75, q25 = np.percentile(state, [75, 25])
    iqr = q75 - q25
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * n ** (-0.2)


def nelson_derivatives(q: PathEnsemble,
                       conditioning: KernelSpec = KernelSpec(),
                       window: int = 1) -> NelsonEstimate:
    """Forward and backward drift of q conditioned on the current value.

    At each interior time the difference quotients over `window` grid steps
    are regressed on q_t across scenarios (Gaussian kernel, Silverman
    bandwidth unless overridden) and read off at each scenario's own state.
    The symmetric drift is the average of the two fits.  A wider window
    divides the quotient variance by the window length at an O(window * dt)
    bias for state-dependent drifts (none for drifts linear in the state).
    """
    if q.values.ndim != 2:
        raise ValueError("two-sided drift estimation expects scalar ensembles")
    v = q.values
    n, m = v.shape
    slice_sd = v.std(axis=0)
    # tolerate the rounding noise np.std leaves on identical rows
    det_floor = 1e-12 * (1.0 + float(np.max(np.abs(v))))
    stochastic = bool(np.any(slice_sd > det_floor))
    if stochastic and n < conditioning.min_scenarios:
        raise ValueError(
            f"need at least {conditioning.min_scenarios} scenarios for "
            f"state-conditional drift estimation, got {n}")
    window = int(window)
    if window < 1 or window >= q.grid.n_times:
        raise ValueError("window must be >= 1 and smaller than the grid")
    h = window * q.grid.dt
    fwd = np.full((n, m), np.nan)
    bwd = np.full((n, m), np.nan)
    bws = []
    for k in range(m):
        state = v[:, k]
        if conditioning.bandwidth is not None:
            bw = conditioning.bandwidth
        else:
            bw = conditioning.bandwidth_scale * _silverman(state)
        bws.append(bw)
        if k + window < m:
            y = (v[:, k + window] - state) / h
            fwd[:, k] = _binned_kernel_regression(state, y, bw, conditioning.n_bins)
        if k - window >= 0:
            y = (state - v[:, k - window]) / h
            bwd[:, k] = _binned_kernel_regression(state, y, bw, conditioning.n_bins)
    return NelsonEstimate(q.grid, _freeze(fwd), _freeze(bwd),
                          bandwidth=float(np.mean(bws)), window=window)
