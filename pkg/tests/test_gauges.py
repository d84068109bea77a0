import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvlab.gauges import (CashflowIntensity, Gauge, apply_intensity,
                            convolve, coupon_bond_intensity, forward_rates,
                            invert, is_positive_gauge, ladder, make_gauge,
                            renormalize_to_numeraire)
from curvlab.paths import PathEnsemble, TimeGrid


def flat_gauge(rate, dh=0.01, h_max=30.0, n_scenarios=2, n_times=3,
               deflator=None):
    """Exponential zero curve exp(-rate*h); rate may vary per (s, t)."""
    off = np.arange(0.0, h_max + dh / 2, dh)
    rate = np.asarray(rate, float)
    if rate.ndim == 0:
        rate = np.full((n_scenarios, n_times), float(rate))
    surf = np.exp(-rate[..., None] * off)
    grid = TimeGrid(np.linspace(0.0, 1.0, rate.shape[1]))
    if deflator is None:
        deflator = np.ones(rate.shape)
    return make_gauge(PathEnsemble(grid, deflator), off, surf)


def ramp_gauge(rng, dh=0.01, h_max=30.0, n_scenarios=2, n_times=3):
    """Forward curve ramping between two random levels, flat past h=20."""
    off = np.arange(0.0, h_max + dh / 2, dh)
    f0 = rng.uniform(0.05, 0.5, size=(n_scenarios, n_times, 1))
    f1 = rng.uniform(0.05, 0.5, size=(n_scenarios, n_times, 1))
    f = f0 + (f1 - f0) * np.clip(off / 20.0, 0.0, 1.0)
    integral = np.concatenate(
        [np.zeros(f.shape[:-1] + (1,)),
         np.cumsum((f[..., :-1] + f[..., 1:]) / 2 * dh, axis=-1)], axis=-1)
    grid = TimeGrid(np.linspace(0.0, 1.0, n_times))
    defl = np.exp(0.1 * rng.normal(size=(n_scenarios, n_times)))
    return make_gauge(PathEnsemble(grid, defl), off, np.exp(-integral))


def high_rate_gauge(rng, dh=0.01, h_max=30.0):
    """Steep curves whose tails decay fast enough for repeated accumulation."""
    off = np.arange(0.0, h_max + dh / 2, dh)
    f = rng.uniform(0.35, 0.6, size=(2, 3, 1)) * np.ones(off.size)
    f = np.where(off >= 20.0, f[..., -1:], f)
    integral = np.concatenate(
        [np.zeros(f.shape[:-1] + (1,)),
         np.cumsum((f[..., :-1] + f[..., 1:]) / 2 * dh, axis=-1)], axis=-1)
    grid = TimeGrid(np.linspace(0.0, 1.0, 3))
    return make_gauge(PathEnsemble(grid, np.ones((2, 3))), off,
                      np.exp(-integral))


# ---------------------------------------------------------------------------
# construction and basic curves


def test_make_gauge_validation():
    off = np.arange(0.0, 30.01, 0.01)
    grid = TimeGrid(np.linspace(0.0, 1.0, 3))
    surf = np.exp(-0.04 * off) * np.ones((2, 3, 1))
    defl = PathEnsemble(grid, np.ones((2, 3)))
    make_gauge(defl, off, surf)
    with pytest.raises(ValueError):
        make_gauge(PathEnsemble(grid, -np.ones((2, 3))), off, surf)
    with pytest.raises(ValueError):
        make_gauge(defl, off, -surf)
    with pytest.raises(ValueError):
        make_gauge(defl, np.arange(0.0, 1.01, 0.01), surf[..., :101])
    bad = surf.copy()
    bad[..., 0] = 0.5
    with pytest.raises(ValueError):
        Gauge(defl, off, bad)


def test_forward_rates_flat_curve():
    g = flat_gauge(0.04)
    fc = forward_rates(g)
    assert np.max(np.abs(fc.forwards - 0.04)) < 1e-10
    assert np.max(np.abs(fc.short_rate - 0.04)) < 1e-10


def test_positive_gauge_predicate():
    assert is_positive_gauge(flat_gauge(0.04))
    off = np.arange(0.0, 30.01, 0.01)
    surf = np.exp(-0.04 * off) * np.ones((1, 3, 1))
    surf[..., 5] = surf[..., 3]          # local increase
    grid = TimeGrid(np.linspace(0.0, 1.0, 3))
    g = Gauge(PathEnsemble(grid, np.ones((1, 3))), off, surf)
    assert not is_positive_gauge(g)


def test_renormalize_to_numeraire():
    rng = np.random.default_rng(2)
    gauges = [ramp_gauge(rng), ramp_gauge(rng)]
    x = np.array([0.7, 0.3])
    out = renormalize_to_numeraire(gauges, x)
    dnum = sum(x[j] * out[j].deflator.values for j in range(2))
    assert np.allclose(dnum, 1.0, atol=1e-12)
    for before, after in zip(gauges, out):
        assert np.array_equal(before.surface, after.surface)
    with pytest.raises(ValueError):
        renormalize_to_numeraire(gauges, np.array([1.0, 0.0, 0.0]))


# ---------------------------------------------------------------------------
# intensity algebra


def test_ladder_algebra_is_symbolic():
    for m in range(-2, 3):
        for n in range(-2, 3):
            c = convolve(ladder(m), ladder(n))
            assert c.ladder_index == m + n
            assert c.scale == 1.0
    inv = invert(ladder(2, scale=4.0))
    assert inv.ladder_index == -2 and inv.scale == pytest.approx(0.25)
    with pytest.raises(ValueError):
        invert(coupon_bond_intensity(2, 0.05))
    with pytest.raises(ValueError):
        invert(ladder(1, scale=0.0))


def test_atom_convolution_adds_orders_and_maturities():
    pi = CashflowIntensity(atoms=((1, 0.5, 2.0),))
    nu = CashflowIntensity(atoms=((0, 1.0, 3.0), (2, 0.0, 1.0)))
    c = convolve(pi, nu)
    assert set(c.atoms) == {(1, 1.5, 6.0), (3, 0.5, 2.0)}


def test_intensity_validation():
    with pytest.raises(ValueError):
        CashflowIntensity(atoms=((5, 0.0, 1.0),))
    with pytest.raises(ValueError):
        CashflowIntensity(atoms=((0, -1.0, 1.0),))
    with pytest.raises(ValueError):
        coupon_bond_intensity(0, 0.05)


def test_short_rate_transform_on_flat_curve():
    r = 0.04
    g = flat_gauge(r)
    gm = apply_intensity(g, ladder(-1))
    # term structure is invariant; deflator becomes -r * D
    assert np.max(np.abs(gm.surface - g.surface)) < 1e-12
    assert np.max(np.abs(gm.deflator.values - (-r))) / r < 1e-3


def test_perpetuity_transform_on_flat_curve():
    r = 0.04
    g = flat_gauge(r)
    gp = apply_intensity(g, ladder(1))
    # integral of e^{-r h} is 1/r: deflator scales by ~1/r, curve unchanged
    assert np.max(np.abs(gp.surface - g.surface)) < 1e-12
    assert np.max(np.abs(gp.deflator.values - 1.0 / r)) * r < 1e-3


def test_coupon_bond_pricing():
    r = 0.04
    g = flat_gauge(r)
    bond = coupon_bond_intensity(3, 0.05)
    gb = apply_intensity(g, bond)
    price = (0.05 * np.exp(-r * 1.0) + 0.05 * np.exp(-r * 2.0)
             + 1.05 * np.exp(-r * 3.0))
    assert np.max(np.abs(gb.deflator.values - price)) < 1e-10


def test_offgrid_atom_rejected():
    g = flat_gauge(0.04)
    with pytest.raises(ValueError):
        apply_intensity(g, CashflowIntensity(atoms=((0, 0.0150001, 1.0),)))


def test_kernel_intensity_annuity():
    # uniform density on [0, 5]: deflator scales by integral of P
    r = 0.05
    g = flat_gauge(r)
    off = np.arange(0.0, 5.001, 0.01)
    pi = CashflowIntensity(kernel=(off, np.ones(off.size)))
    ga = apply_intensity(g, pi)
    exact = (1.0 - np.exp(-5 * r)) / r
    assert np.max(np.abs(ga.deflator.values - exact)) < 1e-4


def test_kernel_atom_mixing_rules():
    off = np.arange(0.0, 1.001, 0.01)
    ker = CashflowIntensity(kernel=(off, np.ones(off.size)))
    shifted = convolve(ker, CashflowIntensity(atoms=((0, 0.5, 2.0),)))
    assert shifted.kernel is not None
    koff, kval = shifted.kernel
    assert kval[np.searchsorted(koff, 0.75)] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        convolve(ker, CashflowIntensity(atoms=((1, 0.0, 1.0),)))


def test_kernel_kernel_convolution_mass():
    off = np.arange(0.0, 1.001, 0.01)
    ker = CashflowIntensity(kernel=(off, np.ones(off.size)))
    c = convolve(ker, ker)
    koff, kval = c.kernel
    # mass of the convolution is the product of the masses (same quadrature)
    mass = float(np.sum(np.ones(off.size)) * 0.01)
    assert float(np.sum(kval) * 0.01) == pytest.approx(mass ** 2, rel=1e-12)


# ---------------------------------------------------------------------------
# round trips and composition laws


@settings(max_examples=10, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_roundtrip_reproduces_term_structure(seed):
    rng = np.random.default_rng(seed)
    g = ramp_gauge(rng, n_scenarios=1, n_times=3)
    for order in ([+1, -1], [-1, +1]):
        gg = g
        for n in order:
            gg = apply_intensity(gg, ladder(n))
        assert np.max(np.abs(gg.surface - g.surface)) < 1e-9


def test_composition_law_on_ladder():
    rng = np.random.default_rng(3)
    g = high_rate_gauge(rng)
    worst = 0.0
    for m in range(-2, 3):
        for n in range(-2, 3):
            if not -2 <= m + n <= 2:
                continue
            lhs = apply_intensity(apply_intensity(g, ladder(m)), ladder(n))
            rhs = apply_intensity(g, ladder(m + n))
            worst = max(worst, float(np.max(np.abs(lhs.surface - rhs.surface))))
    assert worst < 1e-9


def test_accumulation_rejects_growing_tail():
    off = np.arange(0.0, 30.01, 0.01)
    surf = np.exp(-0.04 * off) * np.ones((1, 3, 1))
    surf[..., -2] = surf[..., -3] * 1.5       # tail turns upward
    grid = TimeGrid(np.linspace(0.0, 1.0, 3))
    g = Gauge(PathEnsemble(grid, np.ones((1, 3))), off, surf)
    with pytest.raises(ValueError):
        apply_intensity(g, ladder(1))
