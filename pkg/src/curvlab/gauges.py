"""Deflator/term-structure pairs and cashflow-intensity transforms.

A gauge is a strictly positive deflator D together with a term-structure
surface P over maturity offsets, normalized so P at offset zero is 1.  A
cashflow intensity acts on a gauge by

    D^pi_t      = D_t * N_t(0)
    P^pi_{t,s}  = N_t(s - t) / N_t(0),       N_t(eta) = <pi, P_{t, t+eta+.}>

where the pairing <.,.> integrates sampled kernels and evaluates point atoms
(k, a, c) as c times the k-th maturity derivative of P at offset a.  The
integer "ladder" family is closed under this action: index -n differentiates
n times, index +n accumulates n times (perpetuity), index 0 is the identity,
and indices add under convolution.

Discrete design note: differentiation and accumulation are implemented as an
exact inverse pair (one-step differences against a reverse cumulative sum
with an exponential-tail boundary value), so differentiate-then-accumulate
and accumulate-then-differentiate round-trip at machine precision rather than
at finite-difference-versus-quadrature mismatch level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .paths import PathEnsemble, _freeze


# ---------------------------------------------------------------------------
# gauges


@dataclass(frozen=True, slots=True)
class Gauge:
    """Deflator paths + term-structure surface over maturity offsets.

    deflator.values: (n_scenarios, n_times); offsets: (M,) uniform from 0;
    surface: (n_scenarios, n_times, M) with surface[..., 0] == 1.
    """

    deflator: PathEnsemble
    offsets: np.ndarray
    surface: np.ndarray
    label: str = ""

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=float)
        if off.ndim != 1 or off.size < 3 or off[0] != 0.0:
            raise ValueError("offsets must be a 1-d grid starting at 0")
        dh = np.diff(off)
        if np.any(dh <= 0) or not np.allclose(dh, dh[0], rtol=1e-9):
            raise ValueError("offsets must be uniform and increasing")
        surf = np.asarray(self.surface, dtype=float)
        if surf.shape != (self.deflator.n_scenarios,
                          self.deflator.grid.n_times, off.size):
            raise ValueError("surface shape must be (n_scenarios, n_times, M)")
        if not np.all(np.isfinite(surf)):
            raise ValueError("non-finite surface values")
        if not np.allclose(surf[..., 0], 1.0, atol=1e-10):
            raise ValueError("surface at offset 0 must be 1")
        object.__setattr__(self, "offsets", _freeze(off))
        object.__setattr__(self, "surface", _freeze(surf))

    @property
    def dh(self) -> float:
        return float(self.offsets[1] - self.offsets[0])


@dataclass(frozen=True, slots=True)
class ForwardCurve:
    """Instantaneous forward rates f = -d/ds log P and short rates f(.,0)."""

    offsets: np.ndarray
    forwards: np.ndarray       # (n_scenarios, n_times, M)
    short_rate: np.ndarray     # (n_scenarios, n_times)


def make_gauge(deflator: PathEnsemble, offsets: np.ndarray, surface: np.ndarray,
               label: str = "", decay_cap: float = 0.95,
               require_positive: bool = True) -> Gauge:
    """Validated gauge constructor.

    Checks positivity of the deflator, positivity of the surface, the offset-0
    normalization (inside Gauge itself) and that the surface has decayed below
    `decay_cap` at the largest stored maturity.
    """
    if np.any(deflator.values <= 0):
        raise ValueError("deflator must be strictly positive")
    surf = np.asarray(surface, dtype=float)
    if require_positive and np.any(surf <= 0):
        raise ValueError("term-structure surface must be strictly positive")
    if np.any(surf[..., -1] >= decay_cap):
        raise ValueError(
            f"surface fails to decay: value at the largest maturity must be "
            f"< {decay_cap}")
    return Gauge(deflator, offsets, surf, label=label)


def forward_rates(g: Gauge) -> ForwardCurve:
    """Forward curve by central differencing of -log P along maturity."""
    f = -np.gradient(np.log(g.surface), g.offsets, axis=2, edge_order=2)
    return ForwardCurve(g.offsets, _freeze(f), _freeze(f[..., 0].copy()))


def is_positive_gauge(g: Gauge) -> bool:
    """Positive-interest predicate: P strictly decreasing in maturity."""
    return bool(np.all(np.diff(g.surface, axis=2) < 0))


def renormalize_to_numeraire(gauges: Sequence[Gauge], x_num: np.ndarray) -> list[Gauge]:
    """Divide every deflator by the portfolio deflator of x_num.

    Term structures are untouched (they are already expressed in units of the
    date-t deflator), so curvature/no-arbitrage verdicts are invariant.
    """
    x_num = np.asarray(x_num, dtype=float)
    if x_num.shape != (len(gauges),):
        raise ValueError("numeraire weights must have one entry per gauge")
    dnum = sum(x_num[j] * g.deflator.values for j, g in enumerate(gauges))
    if np.any(dnum <= 0):
        raise ValueError("numeraire portfolio deflator must stay positive")
    return [Gauge(g.deflator.with_values(g.deflator.values / dnum),
                  g.offsets, g.surface, label=g.label)
            for g in gauges]


# ---------------------------------------------------------------------------
# cashflow intensities


@dataclass(frozen=True, slots=True)
class CashflowIntensity:
    """Measure on maturities: point atoms + optional sampled kernel.

    atoms: tuple of (k, a, c) evaluated as c * d^k/dh^k P at offset a
    (derivative order k <= 4).  kernel: (offsets, values) sampled density on
    [0, h_max].  ladder: set when the intensity is scale * [n] for the integer
    ladder element [n]; such intensities compose symbolically and are the only
    ones with a closed-form inverse.
    """

    atoms: tuple = ()
    kernel: Optional[tuple] = None   # (offsets (L,), values (L,))
    ladder_index: Optional[int] = None
    scale: float = 1.0
    label: str = ""

    def __post_init__(self):
        for (k, a, c) in self.atoms:
            if not (0 <= int(k) <= 4):
                raise ValueError("atom derivative order must be in 0..4")
            if a < 0:
                raise ValueError("atom maturities must be nonnegative")
        if self.kernel is not None:
            off, val = self.kernel
            off = _freeze(off)
            val = _freeze(val)
            if off.shape != val.shape or off.ndim != 1 or off[0] != 0.0:
                raise ValueError("kernel must be sampled on a grid from 0")
            object.__setattr__(self, "kernel", (off, val))


def ladder(n: int, scale: float = 1.0) -> CashflowIntensity:
    """The integer ladder element scale * [n].

    [0] is the Dirac identity, [-n] the n-th derivative atom, [+n] the n-fold
    accumulation (kernel h^(n-1)/(n-1)! on the half-line, applied via exact
    iterated accumulation rather than quadrature).
    """
    n = int(n)
    atoms = ((abs(n), 0.0, scale),) if n <= 0 else ()
    return CashflowIntensity(atoms=atoms, ladder_index=n, scale=float(scale),
                             label=f"{scale:g}*[{n:+d}]" if scale != 1.0 else f"[{n:+d}]")


def coupon_bond_intensity(maturity: int, coupon: float) -> CashflowIntensity:
    """Unit-notional bond paying `coupon` at 1..maturity-1 and 1+coupon at maturity."""
    if maturity < 1:
        raise ValueError("maturity must be >= 1")
    atoms = tuple((0, float(s), coupon) for s in range(1, maturity)) \
        + ((0, float(maturity), 1.0 + coupon),)
    return CashflowIntensity(atoms=atoms, label=f"bond(T={maturity}, g={coupon:g})")


def invert(pi: CashflowIntensity) -> CashflowIntensity:
    """Convolution inverse, available only for scalar multiples of ladder elements."""
    if pi.ladder_index is None:
        raise ValueError("inversion is closed-form only for scalar multiples "
                         "of ladder elements")
    if pi.scale == 0:
        raise ValueError("cannot invert a zero intensity")
    return ladder(-pi.ladder_index, 1.0 / pi.scale)


def _resample_kernel(kernel, dh: float):
    """Kernel values on a uniform dh grid spanning its support."""
    off, val = kernel
    n = int(round(off[-1] / dh)) + 1
    grid = np.arange(n) * dh
    return grid, np.interp(grid, off, val)


def convolve(pi: CashflowIntensity, nu: CashflowIntensity) -> CashflowIntensity:
    """Convolution of intensities.

    Ladder elements compose symbolically ([m]*[n] = [m+n]); atom pairs add
    orders and maturities and multiply weights; sampled kernels convolve by
    quadrature; order-0 atoms shift/scale kernels.  Differentiating a sampled
    kernel (atom order > 0 against a kernel) is not supported.
    """
    if pi.ladder_index is not None and nu.ladder_index is not None:
        return ladder(pi.ladder_index + nu.ladder_index, pi.scale * nu.scale)
    if pi.kernel is None and nu.kernel is None:
        atoms = tuple((k1 + k2, a1 + a2, c1 * c2)
                      for (k1, a1, c1) in pi.atoms
                      for (k2, a2, c2) in nu.atoms)
        return CashflowIntensity(atoms=atoms)
    if pi.kernel is not None and nu.kernel is not None:
        if pi.atoms or nu.atoms:
            raise ValueError("mixed atom+kernel convolution is not supported")
        dh = min(pi.kernel[0][1] - pi.kernel[0][0],
                 nu.kernel[0][1] - nu.kernel[0][0])
        _, pv = _resample_kernel(pi.kernel, dh)
        _, nv = _resample_kernel(nu.kernel, dh)
        conv = np.convolve(pv, nv) * dh
        grid = np.arange(conv.size) * dh
        return CashflowIntensity(kernel=(grid, conv))
    # one kernel, one pure-atom intensity
    ker_side, atom_side = (pi, nu) if pi.kernel is not None else (nu, pi)
    if any(k > 0 for (k, _, _) in atom_side.atoms):
        raise ValueError("derivative atoms cannot be convolved with sampled kernels")
    off, val = ker_side.kernel
    dh = off[1] - off[0]
    a_max = max(a for (_, a, _) in atom_side.atoms)
    n = off.size + int(math.ceil(a_max / dh)) + 1
    out = np.zeros(n)
    for (_, a, c) in atom_side.atoms:
        sh = int(round(a / dh))
        out[sh:sh + val.size] += c * val
    return CashflowIntensity(kernel=(np.arange(n) * dh, out))


# ---------------------------------------------------------------------------
# applying an intensity to a gauge


def _tail_rate(surface: np.ndarray, dh: float, back: int = 1) -> np.ndarray:
    """Exponential decay rate at the last stored maturities, per (scenario, t).

    Estimated over one grid step ending `back` entries before the end (exact
    for surfaces with exponential tails); must come out positive.
    """
    s = np.abs(surface)
    f = (np.log(s[..., -1 - back]) - np.log(s[..., -back])) / dh
    if np.any(f <= 0):
        raise ValueError("surface tail is not decaying; cannot extrapolate")
    return f


def _extend_surface(surface: np.ndarray, dh: float, n_extra: int) -> np.ndarray:
    """Append n_extra maturities by exponential-tail extrapolation."""
    if n_extra <= 0:
        return surface
    f = _tail_rate(surface, dh)
    steps = np.arange(1, n_extra + 1) * dh
    tail = surface[..., -1:] * np.exp(-f[..., None] * steps)
    return np.concatenate([surface, tail], axis=-1)


def _diff_op(surface: np.ndarray, dh: float, order: int) -> np.ndarray:
    """order-fold one-step difference derivative along maturity.

    Forward differences except at the last maturity, which is filled by
    extrapolation from the well-determined interior rows so that it never
    amplifies boundary noise: geometric continuation where the tail decays
    like an exponential (exact there), quadratic continuation otherwise.
    Exact inverse of _accumulate_op.
    """
    out = surface
    if out.shape[-1] < 4:
        raise ValueError("need at least 4 maturities for derivative atoms")
    for _ in range(order):
        d = np.empty_like(out)
        d[..., :-1] = np.diff(out, axis=-1) / dh
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = d[..., -2] / d[..., -3]
        geo_ok = np.isfinite(ratio) & (ratio > 0) & (ratio < 1)
        quad = 3.0 * d[..., -2] - 3.0 * d[..., -3] + d[..., -4]
        d[..., -1] = np.where(geo_ok, d[..., -2] * np.where(geo_ok, ratio, 0.0),
                              quad)
        out = d
    return out


def _accumulate_op(surface: np.ndarray, dh: float) -> np.ndarray:
    """F with dF/d(eta) = -surface (exact discrete inverse of _diff_op).

    Reverse cumulative sum closed by an exponential-tail boundary value
    F[-1] = P[-1]/f_tail; by construction _diff_op(_accumulate_op(P)) == -P
    on every row but the (extrapolated) last, and
    _accumulate_op(_diff_op(P)) == -P + const with const controlled by the
    tail estimate.
    """
    f_tail = _tail_rate(surface, dh, back=2)
    # geometric continuation of the cumulative sum for an exponential tail,
    # = P[-1]/f_tail up to O(dh) but exactly consistent with the rectangle rule
    bc = surface[..., -1] * dh / -np.expm1(-f_tail * dh)
    rev = np.cumsum(surface[..., -2::-1] * dh, axis=-1)[..., ::-1]
    return np.concatenate([rev + bc[..., None], bc[..., None]], axis=-1)


def _ladder_numerator(g: Gauge, n: int, scale: float) -> np.ndarray:
    if n == 0:
        num = g.surface.copy()
    elif n < 0:
        num = _diff_op(g.surface, g.dh, -n)
    else:
        num = g.surface
        for _ in range(n):
            num = _accumulate_op(num, g.dh)
    return scale * num


def _general_numerator(g: Gauge, pi: CashflowIntensity) -> np.ndarray:
    dh = g.dh
    num = np.zeros_like(g.surface)
    if pi.atoms:
        a_max = max(a for (_, a, _) in pi.atoms)
        n_extra = int(math.ceil(a_max / dh + 1e-9))
        ext = _extend_surface(g.surface, dh, n_extra)
        for (k, a, c) in pi.atoms:
            sh = int(round(a / dh))
            if abs(sh * dh - a) > 1e-9 * max(1.0, a):
                raise ValueError("atom maturities must lie on the offset grid")
            dk = _diff_op(ext, dh, k) if k else ext
            num += c * dk[..., sh:sh + g.offsets.size]
    if pi.kernel is not None:
        koff, kval = _resample_kernel(pi.kernel, dh)
        lk = koff.size
        ext = _extend_surface(g.surface, dh, lk - 1)
        win = np.lib.stride_tricks.sliding_window_view(ext, lk, axis=-1)
        w = np.full(lk, dh)
        w[0] = w[-1] = 0.5 * dh     # trapezoid weights
        num += win @ (w * kval)
    return num


def apply_intensity(g: Gauge, pi: CashflowIntensity) -> Gauge:
    """Gauge transform of g by the intensity pi.

    The transformed deflator is D * N(0) and the transformed surface
    N(eta)/N(0), with N the pairing of pi against the maturity slices of P.
    The result need not be a positive gauge (e.g. a short-rate transform
    flips the deflator sign); positivity is the caller's predicate to check.
    """
    if pi.ladder_index is not None:
        num = _ladder_numerator(g, pi.ladder_index, pi.scale)
    else:
        num = _general_numerator(g, pi)
    n0 = num[..., 0]
    if np.any(n0 == 0) or not np.all(np.isfinite(num)):
        raise ValueError("intensity annihilates the term structure at offset 0")
    defl = g.deflator.with_values(g.deflator.values * n0)
    return Gauge(defl, g.offsets, num / n0[..., None],
                 label=(g.label + "^" + (pi.label or "pi")) if g.label else pi.label)
