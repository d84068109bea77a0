"""Variational market dynamics: Lagrangian, extremal flows, first integrals.

The Lagrangian of a market trajectory (x_t, D_t, r_t) is

    L = |Dx| * ( x . (DD + r o D) ) / (x . D)

(o = componentwise product).  Its extremals under the self-financing
constraint x' . D = 0 satisfy a coupled system whose closed-form solution
family keeps the portfolio frozen, sends the deflator along D_t = e^{-t} g
with

    g(x0, D0, D0') = D0 - (D0 . x0) x0/|x0|^2 + (D0' . x0) x0/|x0|^2,

and determines the rate level through the scalar w_t = x0 . (r_t o D_t)
solving the linear ODE

    (1 - m_t) w' + (3 + 2/m_t - m_t) w = 2 m_t - m_t^2,   m_t = (x0.D0) e^{-t},

with w_0 = x0 . (r0 o D0).  The solver evaluates w in closed form via an
explicit antiderivative of the integrating factor; an independent ODE
integration is available for cross-checks.  Initial data must satisfy the
consistency constraint x0 . (D0' + D0) = 0 and keep m_t away from 1.

Zero-mean structured perturbations (time-constant per scenario, antithetic)
decorate the deterministic cores without disturbing the conserved
quantities; symmetry first integrals (rotation, translations, dilation) are
estimated with their standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .paths import TimeGrid, _freeze


@dataclass(frozen=True, slots=True)
class LagrangianState:
    """Pointwise market state for Lagrangian evaluation."""

    x: np.ndarray
    dx: np.ndarray
    deflator: np.ndarray
    d_deflator: np.ndarray
    rate: np.ndarray


@dataclass(frozen=True, slots=True)
class DynamicsSolution:
    """Extremal-flow solution, deterministic core + perturbed ensemble.

    x, deflator, rate: (n_scenarios, n_times, N); the *_core fields hold the
    unperturbed deterministic trajectory; w and m are the scalar reductions
    of the rate equation.
    """

    grid: TimeGrid
    x: np.ndarray
    deflator: np.ndarray
    rate: np.ndarray
    x_core: np.ndarray
    deflator_core: np.ndarray
    rate_core: np.ndarray
    w: np.ndarray
    m: np.ndarray
    g: np.ndarray


@dataclass(frozen=True, slots=True)
class PerturbationSpec:
    """Scales of the structured zero-mean perturbations.

    mode "cond" applies the martingale conditions; "cond2" additionally makes
    the perturbed portfolio orthogonal to ones and to x-bar o D-bar.
    """

    scale_x: float = 0.0
    scale_deflator: float = 0.0
    scale_rate: float = 0.0
    mode: str = "cond"


@dataclass(frozen=True, slots=True)
class FirstIntegralReport:
    """Per-symmetry conserved-quantity estimates.

    entries: name -> dict(series, drift, stderr, defined); series are time
    series of the E0-estimates on the interior of the grid.
    """

    entries: dict


# ---------------------------------------------------------------------------
# Lagrangian and residuals


def lagrangian(state: LagrangianState) -> np.ndarray:
    """L = |dx| (x . (dD + r o D)) / (x . D), broadcast over leading axes."""
    x, dx = np.asarray(state.x, float), np.asarray(state.dx, float)
    D, dD = np.asarray(state.deflator, float), np.asarray(state.d_deflator, float)
    r = np.asarray(state.rate, float)
    speed = np.linalg.norm(dx, axis=-1)
    num = np.einsum("...n,...n->...", x, dD + r * D)
    den = np.einsum("...n,...n->...", x, D)
    return speed * num / den


def euler_lagrange_residual(x: np.ndarray, deflator: np.ndarray,
                            rate: np.ndarray, grid: TimeGrid) -> dict:
    """Residuals of the extremal-flow system on a deterministic trajectory.

    Inputs are (n_times, N); time derivatives are central differences.
    Returns the three equation residuals: the deflator equation (vector), the
    constraint-coupling equation (vector) and the self-financing scalar,
    plus interior RMS summaries (end rows excluded: their one-sided stencils
    are an order less accurate and would mask the interior convergence).
    """
    x = np.asarray(x, float)
    D = np.asarray(deflator, float)
    r = np.asarray(rate, float)
    dt = grid.dt
    xp = np.gradient(x, dt, axis=0)
    xpp = np.gradient(xp, dt, axis=0)
    Dp = np.gradient(D, dt, axis=0)
    Dpp = np.gradient(Dp, dt, axis=0)
    rp = np.gradient(r, dt, axis=0)

    def dot(u, v):
        return np.einsum("tn,tn->t", u, v)

    xD = dot(x, D)
    xDp = dot(x, Dp)
    xDr = dot(x, D * r)
    eq1 = (xDp[:, None] * D - xD[:, None] * Dp
           + (-xDr * xDp - xDp ** 2
              + xD * dot(x, r * Dp) + xD * dot(x, D * rp)
              + xD * dot(x, Dpp) + xD * dot(xp, D * r)
              + xD * dot(xp, Dp))[:, None] * xp
           + (xDr + xDp)[:, None] * xpp)
    eq2 = xD[:, None] * xp - (xD + xDp + dot(xp, D))[:, None] * x
    eq3 = dot(xp, D)

    def rms(a):
        return float(np.sqrt(np.mean(a[1:-1] ** 2)))

    return {"deflator_eq": eq1, "coupling_eq": eq2, "self_financing": eq3,
            "deflator_eq_rms": rms(eq1), "coupling_eq_rms": rms(eq2),
            "self_financing_rms": rms(eq3)}


# ---------------------------------------------------------------------------
# closed-form solution of the extremal flow


def g_operator(x0: np.ndarray, deflator0: np.ndarray,
               deflator0_prime: np.ndarray) -> np.ndarray:
    """Initial-direction operator g; reduces to D0 at x0 = 0."""
    x0 = np.asarray(x0, float)
    D0 = np.asarray(deflator0, float)
    D0p = np.asarray(deflator0_prime, float)
    n2 = float(x0 @ x0)
    if n2 == 0.0:
        return D0.copy()
    return D0 - (D0 @ x0) / n2 * x0 + (D0p @ x0) / n2 * x0


def _w_closed_form(m0: float, w0: float, times: np.ndarray,
                   gauss_order: int = 16) -> np.ndarray:
    """w_t via integrating factor with explicit antiderivative.

    With z = m0 e^{-t}, the homogeneous exponent integrates to
    Pi(z) = 5 ln z - 2/z - 4 ln(1 - z); the particular part is accumulated by
    per-step Gauss-Legendre quadrature of q e^{-E} with
    q = (2m - m^2)/(1 - m).
    """
    def pi_z(z):
        return 5.0 * np.log(np.abs(z)) - 2.0 / z - 4.0 * np.log(np.abs(1.0 - z))

    def big_e(t):
        z = m0 * np.exp(-t)
        return pi_z(z) - pi_z(m0 * np.exp(-times[0]))

    def q_exp(t):
        m = m0 * np.exp(-t)
        return (2.0 * m - m * m) / (1.0 - m) * np.exp(-big_e(t))

    nodes, weights = np.polynomial.legendre.leggauss(gauss_order)
    t_lo, t_hi = times[:-1], times[1:]
    half = 0.5 * (t_hi - t_lo)
    mid = 0.5 * (t_hi + t_lo)
    samples = mid[:, None] + half[:, None] * nodes[None, :]
    step_ints = (q_exp(samples) * weights[None, :]).sum(axis=1) * half
    cum = np.concatenate([[0.0], np.cumsum(step_ints)])
    return np.exp(big_e(times)) * (w0 + cum)


def _check_initial_data(x0, D0, D0p, t0: float, t1: float,
                        eq0_tol: float) -> float:
    scale = max(1.0, float(np.abs(x0 @ D0)))
    viol = abs(float(x0 @ (D0p + D0)))
    if viol > eq0_tol * scale:
        raise ValueError(
            f"initial data violate the consistency constraint "
            f"x0.(D0' + D0) = 0 (residual {viol:.3e})")
    m0 = float(x0 @ D0)
    if m0 == 0.0:
        raise ValueError("x0 . D0 must be nonzero")
    if m0 > 0 and t0 <= np.log(m0) <= t1:
        raise ValueError(
            f"rate equation is singular at t = {np.log(m0):.6f} "
            f"(m_t crosses 1 inside the integration range)")
    return m0


def solve_arbitrage_dynamics(x0, deflator0, deflator0_prime, rate0,
                             grid: TimeGrid,
                             perturbation: Optional[PerturbationSpec] = None,
                             n_scenarios: int = 1, seed: int = 0,
                             eq0_tol: float = 1e-9) -> DynamicsSolution:
    """Closed-form extremal flow with positive action (arbitrage branch).

    Core: x_t = x0, D_t = e^{-t} g(x0, D0, D0'), rate level w_t/m_t (the
    per-asset rate path is the common level implied by w; rate0 enters via
    w_0 = x0.(rate0 o D0)).  Structured zero-mean perturbations are added
    per scenario when a spec is given.
    """
    x0 = np.asarray(x0, float)
    D0 = np.asarray(deflator0, float)
    D0p = np.asarray(deflator0_prime, float)
    r0 = np.asarray(rate0, float)
    t = grid.times
    m0 = _check_initial_data(x0, D0, D0p, float(t[0]), float(t[-1]), eq0_tol)
    g = g_operator(x0, D0, D0p)
    m = m0 * np.exp(-t)
    w0 = float(x0 @ (r0 * D0))
    w = _w_closed_form(m0, w0, t)
    n = x0.size
    x_core = np.broadcast_to(x0, (t.size, n)).copy()
    d_core = np.exp(-t)[:, None] * g
    r_core = np.broadcast_to((w / m)[:, None], (t.size, n)).copy()
    if perturbation is None:
        dx = dD = dr = np.zeros((n_scenarios, n))
    else:
        dx, dD, dr = sample_perturbations(
            perturbation, x0, g, r_core[0], n_scenarios, seed)
    return DynamicsSolution(
        grid=grid,
        x=_freeze(x_core[None] + dx[:, None, :]),
        deflator=_freeze(d_core[None] + dD[:, None, :]),
        rate=_freeze(r_core[None] + dr[:, None, :]),
        x_core=_freeze(x_core), deflator_core=_freeze(d_core),
        rate_core=_freeze(r_core), w=_freeze(w), m=_freeze(m), g=_freeze(g))


def rate_ode_rhs(t: float, w: np.ndarray, m0: float) -> np.ndarray:
    """Right-hand side of the scalar rate equation, for external integrators."""
    m = m0 * np.exp(-t)
    return (2.0 * m - m * m - (3.0 + 2.0 / m - m) * w) / (1.0 - m)


def solve_noarb_dynamics(x0, deflator0, grid: TimeGrid,
                         perturbation: Optional[PerturbationSpec] = None,
                         rate0=None, n_scenarios: int = 1,
                         seed: int = 0) -> DynamicsSolution:
    """Stationary martingale solution: constants plus zero-mean perturbations.

    The nominal value of the perturbed portfolio has exactly constant
    ensemble mean: E0[(x0+dx).(D0+dD)] = x0.D0 by the orthogonality of the
    perturbation subspaces.
    """
    x0 = np.asarray(x0, float)
    D0 = np.asarray(deflator0, float)
    r0 = np.zeros_like(x0) if rate0 is None else np.asarray(rate0, float)
    t = grid.times
    n = x0.size
    x_core = np.broadcast_to(x0, (t.size, n)).copy()
    d_core = np.broadcast_to(D0, (t.size, n)).copy()
    r_core = np.broadcast_to(r0, (t.size, n)).copy()
    if perturbation is None:
        dx = dD = dr = np.zeros((n_scenarios, n))
    else:
        dx, dD, dr = sample_perturbations(
            perturbation, x0, D0, r0, n_scenarios, seed)
    m = np.full(t.size, float(x0 @ D0))
    return DynamicsSolution(
        grid=grid,
        x=_freeze(x_core[None] + dx[:, None, :]),
        deflator=_freeze(d_core[None] + dD[:, None, :]),
        rate=_freeze(r_core[None] + dr[:, None, :]),
        x_core=_freeze(x_core), deflator_core=_freeze(d_core),
        rate_core=_freeze(r_core), w=_freeze(x0 @ (r0 * D0) * np.ones(t.size)),
        m=_freeze(m), g=_freeze(D0.copy()))


# ---------------------------------------------------------------------------
# structured perturbations


def _null_direction(constraints: list, n: int) -> Optional[np.ndarray]:
    """A unit vector orthogonal to all constraint vectors, or None."""
    if not constraints:
        mat = np.zeros((1, n))
    else:
        mat = np.array(constraints, dtype=float)
    u, s, vt = np.linalg.svd(mat, full_matrices=True)
    rank = int(np.sum(s > 1e-12 * max(1.0, s[0] if s.size else 0.0)))
    if rank >= n:
        return None
    return vt[rank]


def sample_perturbations(spec: PerturbationSpec, x_bar, d_bar, r_bar,
                         n_scenarios: int, seed: int):
    """Time-constant antithetic perturbations (dx, dD, dr), each (S, N).

    Construction guarantees, exactly: zero ensemble mean, zero symmetric
    drift (time-constant), dx.dD = 0 pointwise, orthogonality of dx to the
    mean deflator direction(s), of dD to the portfolio, and of dr to both
    x-bar o dD and dx o dD directions.  Raises when a nonzero scale has no
    admissible direction (e.g. one-asset markets).
    """
    if spec.mode not in ("cond", "cond2"):
        raise ValueError(f"unknown perturbation mode {spec.mode!r}")
    x_bar = np.asarray(x_bar, float)
    d_bar = np.asarray(d_bar, float)
    r_bar = np.asarray(r_bar, float)
    n = x_bar.size
    cons_x = [d_bar, r_bar * d_bar]
    if spec.mode == "cond2":
        cons_x += [np.ones(n), x_bar * d_bar]
    u_x = _null_direction(cons_x, n)
    if spec.scale_x > 0 and u_x is None:
        raise ValueError("no admissible portfolio perturbation direction "
                         "under the stated constraints")
    if u_x is None or spec.scale_x == 0:
        u_x = np.zeros(n)
    cons_d = [x_bar]
    if np.any(u_x != 0):
        cons_d.append(u_x)
    u_d = _null_direction(cons_d, n)
    if spec.scale_deflator > 0 and u_d is None:
        raise ValueError("no admissible deflator perturbation direction")
    if u_d is None or spec.scale_deflator == 0:
        u_d = np.zeros(n)
    cons_r = []
    if np.any(u_d != 0):
        cons_r.append(x_bar * u_d)
        if np.any(u_x != 0):
            cons_r.append(u_x * u_d)
    u_r = _null_direction(cons_r, n)
    if spec.scale_rate > 0 and u_r is None:
        raise ValueError("no admissible rate perturbation direction")
    if u_r is None or spec.scale_rate == 0:
        u_r = np.zeros(n)
    rng = np.random.default_rng(seed)
    half = n_scenarios // 2
    amps = rng.standard_normal((half, 3))
    amps = np.concatenate([amps, -amps], axis=0)
    if amps.shape[0] < n_scenarios:     # odd count: one unperturbed scenario
        amps = np.concatenate([amps, np.zeros((1, 3))], axis=0)
    dx = spec.scale_x * amps[:, [0]] * u_x
    dD = spec.scale_deflator * amps[:, [1]] * u_d
    dr = spec.scale_rate * amps[:, [2]] * u_r
    return dx, dD, dr


# ---------------------------------------------------------------------------
# first integrals


def _pair_indices(n: int):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def noether_integrals(x: np.ndarray, deflator: np.ndarray, rate: np.ndarray,
                      grid: TimeGrid,
                      d_deflator: Optional[np.ndarray] = None,
                      speed_tol: float = 1e-12) -> FirstIntegralReport:
    """Symmetry first integrals of an ensemble trajectory.

    Inputs are (S, T, N).  Two families are reported:

    * true Noether currents, carrying the full dL/dq' weights (the return
      times the unit velocity direction on the x-side, the speed |Dx| on the
      D-side); these are conserved along every extremal flow.  When the
      portfolio is stationary the velocity direction is undefined, but the
      x-side factor still vanishes whenever the total return is identically
      zero (the no-free-lunch case), in which case the current is reported
      as exactly zero; otherwise it is marked undefined.
    * reduced display forms x_j/(x.D) and e.x/(x.D) (flagged reduced=True),
      which drop the speed weight and are first integrals of the reduced
      no-free-lunch system only.

    d_deflator overrides the default central-difference estimate of DD
    (e.g. with an analytic drift).  The dilation integral is the normalized
    trivial one, identically 1 by construction and reported exactly.
    """
    x = np.asarray(x, float)
    D = np.asarray(deflator, float)
    r = np.asarray(rate, float)
    dt = grid.dt
    dx = np.gradient(x, dt, axis=1)
    dD = np.gradient(D, dt, axis=1) if d_deflator is None \
        else np.asarray(d_deflator, float)
    sl = slice(1, -1)    # interior: one-sided end stencils excluded
    x, D, r, dx, dD = (a[:, sl] for a in (x, D, r, dx, dD))
    xD = np.einsum("stn,stn->st", x, D)
    ret = np.einsum("stn,stn->st", x, dD + r * D) / xD
    speed = np.linalg.norm(dx, axis=2)
    moving = bool(np.max(speed) > speed_tol)
    ret_vanishes = bool(np.max(np.abs(ret)) <= 1e-10)
    entries = {}

    def add(name, series_st, defined=True, reduced=False, note=None):
        if not defined:
            entries[name] = {"series": None, "drift": None, "stderr": None,
                             "defined": False, "reduced": reduced,
                             "note": "undefined (stationary strategy)"}
            return
        series = series_st.mean(axis=0)
        stderr = series_st.std(axis=0, ddof=1) / np.sqrt(series_st.shape[0]) \
            if series_st.shape[0] > 1 else np.zeros(series_st.shape[1])
        entry = {"series": series,
                 "drift": float(np.max(np.abs(series - series[0]))),
                 "stderr": float(np.max(stderr)),
                 "defined": True, "reduced": reduced}
        if note:
            entry["note"] = note
        entries[name] = entry

    unit = None
    if moving:
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(speed[..., None] > speed_tol,
                            dx / np.maximum(speed, speed_tol)[..., None], 0.0)

    def velocity_weighted(x_side):
        """ret * (x_side . unit velocity), with the stationary special case."""
        if moving:
            return ret * np.einsum("stn,stn->st", x_side, unit), True, None
        if ret_vanishes:
            return np.zeros_like(ret), True, \
                "zero return; direction-independent"
        return None, False, None

    n = x.shape[2]
    for (i, j) in _pair_indices(n):
        # xi = E_ij - E_ji:  (xi v) = e_i v_j - e_j v_i
        xi_x = np.zeros_like(x)
        xi_x[..., i] = x[..., j]
        xi_x[..., j] = -x[..., i]
        xi_D = np.zeros_like(D)
        xi_D[..., i] = D[..., j]
        xi_D[..., j] = -D[..., i]
        part1, ok, note = velocity_weighted(xi_x)
        if ok:
            part2 = speed * np.einsum("stn,stn->st", x, xi_D) / xD
            add(f"rotation[{i + 1},{j + 1}]", part1 + part2, note=note)
        else:
            add(f"rotation[{i + 1},{j + 1}]", None, defined=False)
        # reduced no-free-lunch form: rotated components of x / (x.D)
        add(f"rotation_position[{i + 1},{j + 1}]", x[..., j] / xD,
            reduced=True)
    part1, ok, note = velocity_weighted(np.ones_like(x))
    if ok:
        add("nominal_translation", part1, note=note)
    else:
        add("nominal_translation", None, defined=False)
    add("deflator_translation", speed * x.sum(axis=2) / xD)
    add("deflator_translation_reduced", x.sum(axis=2) / xD, reduced=True)
    add("dilation", np.ones_like(xD))
    return FirstIntegralReport(entries=entries)
