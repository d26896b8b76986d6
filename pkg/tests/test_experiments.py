import math

import numpy as np
import pytest

from ustatlab.errors import ArityError, DomainError
from ustatlab.experiments import (
    UniformityConfig, chaos_gap, cold_start, decoupling_check, first_order_condition_scan,
    fit_decay, run_first_order, run_kinetic, run_uniformity_sweep,
)
from ustatlab.grids import Grid, GridMeasure, PhaseGridMeasure
from ustatlab.meanfield import kinetic_equilibrium, solve_fixed_point
from ustatlab.potentials import ConstantKernel, ModelSpec, ProductPair, QuadraticPair, quadratic


def test_fit_exact_exponential():
    t = np.linspace(0, 5, 51)
    fit = fit_decay(t, np.exp(-2 * t)).fit
    assert fit.rate == pytest.approx(2.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


def test_fit_constant_series():
    fit = fit_decay(np.linspace(0, 1, 20), np.full(20, 3.0)).fit
    assert fit.rate == pytest.approx(0.0, abs=1e-12)


def test_fit_noisy_exponential():
    t = np.linspace(0, 5, 101)
    noise = 1e-6 * np.random.default_rng(0).standard_normal(t.size)
    fit = fit_decay(t, np.exp(-t) + noise, (0.0, 5.0)).fit
    assert fit.rate == pytest.approx(1.0, abs=0.01)


def test_fit_rejects_short_or_nonpositive():
    with pytest.raises(DomainError):
        fit_decay(np.arange(5.0), np.ones(5))
    with pytest.raises(DomainError):
        fit_decay(np.arange(10.0), np.r_[np.ones(9), -1.0])


def test_first_order_from_equilibrium_is_flat(gaussian_model):
    g = Grid(-8, 8, 401)
    fp = solve_fixed_point(gaussian_model, g, tol=1e-12)
    rep = run_first_order(gaussian_model, g, fp.measure, 0.5, 2e-4, fixed_point=fp)
    assert np.max(np.abs(rep.entropy_series.values)) < 1e-10
    assert np.max(rep.w2_series.values) < 1e-6
    assert rep.energy_max_increase <= 1e-12


def test_kinetic_from_equilibrium_is_flat(gaussian_model):
    xg, vg = Grid(-6, 6, 61), Grid(-6, 6, 61)
    fp = solve_fixed_point(gaussian_model, xg, tol=1e-12)
    eq = kinetic_equilibrium(fp.measure, vg)
    rep = run_kinetic(gaussian_model, xg, vg, eq, 0.5, 0.01, record_every=5, fixed_point=fp)
    assert np.max(np.abs(rep.S_series.values)) < 1e-10


def test_cold_start_shape():
    mu = cold_start(Grid(-4, 4, 41), Grid(-3, 3, 31), v_var=0.1)
    assert isinstance(mu, PhaseGridMeasure)
    assert mu.v_marginal().var() == pytest.approx(0.1, rel=0.05)


def small_uniformity(**kw):
    base = dict(total_particles=2048, horizon=6.0, window=(1.0, 6.0), batches=16,
                grid=Grid(-12, 12, 601))
    base.update(kw)
    return UniformityConfig(**base)


def test_uniformity_free_model_rates_flat():
    model = ModelSpec(1, quadratic(0.1), [])
    table = run_uniformity_sweep(model, [16, 32, 64, 128], small_uniformity())
    rates = np.array([r.rate for r in table.rows])
    ses = np.array([r.rate_se for r in table.rows])
    assert np.ptp(rates) <= 4 * np.max(ses)
    assert [r.n for r in table.rows] == [16, 32, 64, 128]
    assert "observable" in table.proxy_note


def test_uniformity_needs_four_sizes(free_model):
    with pytest.raises(ArityError):
        run_uniformity_sweep(free_model, [8, 16, 32], small_uniformity())


def test_uniformity_jobs_do_not_change_results():
    model = ModelSpec(1, quadratic(0.1), [QuadraticPair(0.5)])
    cfg = small_uniformity(total_particles=512)
    a = run_uniformity_sweep(model, [8, 16, 32, 64], cfg, jobs=1)
    b = run_uniformity_sweep(model, [64, 32, 16, 8], cfg, jobs=3)
    assert [r.to_dict() for r in a.rows] == [r.to_dict() for r in b.rows]


def test_uniformity_standard_error_scaling():
    # twice the replicas shrinks the batch-means standard error by about 1/sqrt(2)
    model = ModelSpec(1, quadratic(0.1), [QuadraticPair(0.5)])
    se = []
    for R in (256, 512):
        cfg = small_uniformity(replicas=R, batches=32)
        table = run_uniformity_sweep(model, [32, 33, 34, 35], cfg)
        se.append(np.mean([r.rate_se for r in table.rows]))
    assert se[1] / se[0] == pytest.approx(1 / math.sqrt(2), rel=0.3)


def test_chaos_gap_at_time_zero(gaussian_model):
    g = Grid(-8, 8, 801)
    mu0 = GridMeasure.gaussian(g, 2.0, 1.0)
    n, R = 500, 4
    # the sampling bound holds for the expected distance; single seeds exceed it now and then
    runs = [chaos_gap(gaussian_model, n, 0.0, R, g, mu0, seed=s) for s in range(10)]
    assert np.mean([r.value for r in runs]) <= 2 / math.sqrt(n * R)
    assert all(r.per_replica_mean >= r.value for r in runs)


def test_decoupling_zero_kernel():
    res = decoupling_check(ConstantKernel(0.0, 2), "gaussian", "abs", 6, 100, 0, samples=20)
    assert res.lhs == 0.0 and res.rhs == 0.0 and res.passed


def test_decoupling_exp_small_runs():
    res = decoupling_check(ProductPair(1.0), "gaussian", "exp_small", 10, 100, 3, samples=100)
    assert res.lhs >= 1.0 and res.passed


def test_decoupling_validates_inputs():
    with pytest.raises(ArityError):
        decoupling_check(ProductPair(1.0), "gaussian", "abs", 1, 100, 0)
    with pytest.raises(ValueError):
        decoupling_check(ProductPair(1.0), "gaussian", "cube", 5, 100, 0)
    with pytest.raises(ValueError):
        decoupling_check(ProductPair(1.0), "gaussian", "abs", 5, 10, 0)


def test_first_order_condition_scan_finds_fixed_point(grid, gaussian_model):
    e, m, s = first_order_condition_scan(gaussian_model, grid, np.linspace(-1, 1, 11),
                                         np.linspace(0.4, 1.0, 13))
    assert m == pytest.approx(0.0, abs=1e-12)
    assert s == pytest.approx(2 / 3, abs=0.03)
