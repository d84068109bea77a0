import dataclasses

import numpy as np
import pytest

from curvlab.marketsim import (ItoModel, bond_price, build_market,
                               calibrate_arbitrage_free, default_maturities,
                               inject_arbitrage, instantaneous_total_return,
                               term_structure)
from curvlab.paths import TimeGrid

from conftest import base_model


def test_model_validation():
    with pytest.raises(ValueError):
        ItoModel(alpha=np.zeros(2), sigma=np.zeros((3, 1)), a=np.zeros(2),
                 b=np.zeros((2, 1)), s0=np.ones(2), r0=np.zeros(2))
    with pytest.raises(ValueError):
        ItoModel(alpha=np.zeros(2), sigma=np.zeros((2, 1)), a=np.zeros(2),
                 b=np.zeros((2, 1)), s0=np.array([1.0, 0.0]), r0=np.zeros(2))
    m = base_model()
    assert m.n_assets == 3 and m.n_factors == 2


def test_build_market_shapes_and_determinism():
    model = base_model()
    grid = TimeGrid(np.linspace(0.0, 1.0, 51))
    mkt = build_market(model, grid, n_scenarios=20, seed=5)
    assert mkt.n_assets == 3 and mkt.n_scenarios == 20
    assert mkt.short_rates.shape == (20, 51, 3)
    off = default_maturities()
    for j, g in enumerate(mkt.gauges):
        assert np.array_equal(g.offsets, off)
        assert np.allclose(g.surface[..., 0], 1.0)
        assert np.allclose(g.deflator.values[:, 0], model.s0[j])
    again = build_market(model, grid, n_scenarios=20, seed=5)
    assert np.array_equal(mkt.deflators, again.deflators)
    assert np.array_equal(mkt.short_rates, again.short_rates)


def test_calibration_flattens_drifts(calib, model):
    cal = calib
    level = cal.model.alpha + cal.model.r0
    assert np.allclose(level, cal.c_level, atol=1e-15)
    assert cal.c_level == pytest.approx(float(np.mean(model.alpha + model.r0)))
    assert np.allclose(cal.model.a, np.mean(model.a), atol=1e-15)


def test_calibration_requires_common_vol_rows():
    model = base_model()
    sigma = np.array(model.sigma)
    sigma[1, 0] = 0.3
    skew = dataclasses.replace(model, sigma=sigma)
    grid = TimeGrid(np.linspace(0.0, 1.0, 11))
    with pytest.raises(ValueError):
        calibrate_arbitrage_free(skew, grid, n_scenarios=4, seed=0)


def test_inject_arbitrage_bumps_one_drift():
    model = base_model()
    bumped = inject_arbitrage(model, asset=1, delta=0.05)
    assert bumped.alpha[1] == pytest.approx(model.alpha[1] + 0.05)
    assert bumped.alpha[0] == model.alpha[0]
    assert bumped.alpha[2] == model.alpha[2]
    assert np.array_equal(bumped.sigma, model.sigma)


def test_bond_price_matches_surface_and_matures(calib):
    model, mkt = calib.model, calib.market
    horizon = 1.5
    p = bond_price(model, mkt, 0, horizon)
    # at t = 0 the bond is the gauge surface at offset = horizon
    gi = int(round(horizon / mkt.gauges[0].dh))
    assert np.allclose(p[:, 0], mkt.gauges[0].surface[:, 0, gi], rtol=1e-12)
    # price 1 at maturity, NaN afterwards
    ti = int(round(horizon / mkt.grid.dt))
    assert np.allclose(p[:, ti], 1.0, atol=1e-12)
    assert np.all(np.isnan(p[:, ti + 1:]))


def test_term_structure_closed_form_vs_nested_mc(calib):
    model, mkt = calib.model, calib.market
    off = np.array([0.25, 0.5, 1.0, 2.0])
    cf = term_structure(model, mkt, 0, 10, offsets=off, method="closed_form")
    mc = term_structure(model, mkt, 0, 10, offsets=off, method="nested_mc",
                        n_inner=4000, seed=3)
    assert np.max(np.abs(cf - mc) / cf) < 1e-3
    with pytest.raises(ValueError):
        term_structure(model, mkt, 0, 10, method="bogus")


def test_pricing_kernel_makes_discounted_bonds_martingales(calib):
    model, mkt, beta = calib.model, calib.market, calib.beta
    horizon = 1.5
    for j in range(mkt.n_assets):
        p = bond_price(model, mkt, j, horizon)
        v = beta.paths.values * mkt.gauges[j].deflator.values * p
        v0 = v[:, 0]
        for ti in (25, 50, 75):  # t = 0.5, 1.0, 1.5
            diff = v[:, ti] - v0
            stderr = diff.std(ddof=1) / np.sqrt(diff.size)
            assert abs(diff.mean()) <= 3 * stderr


def test_total_return_matches_pricing_kernel_dual(calib):
    mkt, beta = calib.market, calib.beta
    x = np.array([0.5, 0.3, 0.2])
    tr = instantaneous_total_return(mkt, x, beta=beta)
    per_scen = np.nanmean(tr.gap, axis=1)
    stderr = per_scen.std(ddof=1) / np.sqrt(per_scen.size)
    assert abs(per_scen.mean()) <= 5 * stderr
    bare = instantaneous_total_return(mkt, x)
    assert bare.dual is None and bare.gap is None
