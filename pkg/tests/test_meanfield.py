import math

import numpy as np
import pytest

from ustatlab.errors import NoContraction, StabilityError
from ustatlab.grids import Grid, GridMeasure, PhaseGridMeasure
from ustatlab.measures import fisher_information, relative_entropy
from ustatlab.meanfield import (
    cesaro_entropy, cesaro_fisher, fokker_planck_flow, fokker_planck_step, gamma_map,
    kinetic_equilibrium, log_partition_mc, maxwellian, mean_field_energy, mean_field_entropy,
    mean_field_fisher, reference_measure, solve_fixed_point, vfp_free_energy, vfp_step,
)
from ustatlab.potentials import ModelSpec, ProductPair, QuadraticPair, double_well, quadratic


def pair(lam, a=0.5):
    return ModelSpec(1, quadratic(a), [QuadraticPair(lam)])


def test_energy_at_alpha(grid, free_model):
    alpha = reference_measure(free_model, grid)
    assert mean_field_energy(alpha, free_model).total == pytest.approx(0.0, abs=1e-14)
    m = pair(0.5)
    assert mean_field_energy(reference_measure(m, grid), m).total == pytest.approx(0.25, rel=1e-4)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_energy_gaussian_closed_form(grid, s):
    lam = 0.5
    mu = GridMeasure.gaussian(grid, 0.0, s)
    expected = 0.5 * (s - 1 - math.log(s)) + lam * s / 2
    assert mean_field_energy(mu, pair(lam)).total == pytest.approx(expected, abs=1e-4)


def test_gamma_map(grid, free_model):
    mu = GridMeasure.gaussian(grid, 1.5, 0.7)
    out = gamma_map(mu, free_model)
    assert np.allclose(out.weights, reference_measure(free_model, grid).weights)
    lam, m = 0.5, 1.5
    g = gamma_map(mu, pair(lam))
    assert g.masses.sum() == pytest.approx(1.0, abs=1e-10)
    assert g.mean() == pytest.approx(lam * m / (1 + lam), abs=1e-6)
    assert g.var() == pytest.approx(1 / (1 + lam), rel=1e-4)


def test_fixed_point_free(grid, free_model):
    fp = solve_fixed_point(free_model, grid)
    assert fp.iterations <= 2
    assert np.allclose(fp.measure.weights, reference_measure(free_model, grid).weights)


def test_fixed_point_pair(grid):
    fp = solve_fixed_point(pair(1.0), grid, init=GridMeasure.gaussian(grid, 2.0, 1.0))
    assert fp.final_residual <= 1e-10
    assert fp.measure.mean() == pytest.approx(0.0, abs=1e-9)
    assert fp.measure.var() == pytest.approx(0.5, rel=1e-4)
    assert fp.contraction_estimate == pytest.approx(0.5, abs=0.02)


def test_fixed_point_triple(grid, triple_model):
    fp = solve_fixed_point(triple_model, grid, init=GridMeasure.gaussian(grid, 2.0, 1.0))
    # the mean equation m = -3 eps m^2 has the root m = 0 near the data
    assert abs(fp.measure.mean()) <= 1e-6
    assert fp.contraction_estimate < 0.9


def test_fixed_point_no_contraction_reports(grid):
    with pytest.raises(NoContraction) as err:
        solve_fixed_point(ModelSpec(1, quadratic(0.5), [ProductPair(1.5)]), grid,
                          init=GridMeasure.gaussian(grid, 0.5, 1.0), max_iter=30)
    # the mean map m -> -3m overshoots into a two-cycle between the grid ends
    assert err.value.report["iterations"] == 30


def test_mean_field_entropy(grid, free_model, gaussian_model):
    fp = solve_fixed_point(gaussian_model, grid).measure
    assert mean_field_entropy(fp, gaussian_model, fp) == pytest.approx(0.0, abs=1e-12)
    alpha = reference_measure(free_model, grid)
    nu = GridMeasure.gaussian(grid, 1.0, 1.0)
    assert mean_field_entropy(nu, free_model, alpha) == pytest.approx(0.5, abs=1e-3)
    for m, v in [(2.0, 1.0), (-1.0, 0.3), (0.0, 3.0)]:
        assert mean_field_entropy(GridMeasure.gaussian(grid, m, v), gaussian_model, fp) >= 0


def test_mean_field_fisher(grid, free_model, gaussian_model):
    fp = solve_fixed_point(gaussian_model, grid).measure
    assert mean_field_fisher(fp, gaussian_model) <= 1e-6
    nu = GridMeasure.gaussian(grid, 0.8, 1.4)
    alpha = reference_measure(free_model, grid)
    assert mean_field_fisher(nu, free_model) == pytest.approx(fisher_information(nu, alpha), rel=1e-10)
    # the score of N(m, 1/(1+lam)) is the constant m, so the value is m^2/4
    lam, m = 0.5, 0.6
    mu = GridMeasure.gaussian(grid, m, 1 / (1 + lam))
    assert mean_field_fisher(mu, pair(lam)) == pytest.approx(m * m / 4, rel=1e-3)


def test_fp_step_conserves_mass(grid, gaussian_model):
    mu = GridMeasure.gaussian(grid, 2.0, 1.0)
    for _ in range(5):
        mu = fokker_planck_step(mu, gaussian_model, 1e-4)
        assert mu.masses.sum() == pytest.approx(1.0, abs=1e-12)


def test_fp_step_stationary_at_alpha(free_model):
    for m in (201, 401):
        g = Grid(-8, 8, m)
        alpha = reference_measure(free_model, g)
        after = fokker_planck_step(alpha, free_model, 1e-4)
        assert np.sum(np.abs(after.weights - alpha.weights)) * g.h <= 1e-12


def test_fp_step_rejects_large_dt(grid, gaussian_model):
    with pytest.raises(StabilityError) as err:
        fokker_planck_step(GridMeasure.gaussian(grid), gaussian_model, 0.1)
    assert 0 < err.value.admissible_dt < 0.1


def test_fp_flow_mean_decay_short(gaussian_model):
    g = Grid(-8, 8, 401)
    times, ms = fokker_planck_flow(GridMeasure.gaussian(g, 2.0, 1.0), gaussian_model, 2e-4, 1.0, 500)
    assert times[-1] == pytest.approx(1.0)
    assert ms[-1].mean() == pytest.approx(2 * math.exp(-1.0), rel=0.01)


# kinetic

@pytest.fixture
def phase():
    return Grid(-6, 6, 61), Grid(-6, 6, 61)


def test_vfp_equilibrium_is_stationary(phase, free_model):
    xg, vg = phase
    eq = kinetic_equilibrium(reference_measure(free_model, xg), vg)
    after = vfp_step(eq, free_model, 0.01)
    assert np.sum(np.abs(after.weights - eq.weights)) * eq.cell_area <= 1e-10


def test_vfp_mass_and_positivity(phase, gaussian_model):
    xg, vg = phase
    mu = PhaseGridMeasure.product(GridMeasure.gaussian(xg, 1.0, 0.5), GridMeasure.gaussian(vg, 0.0, 0.1))
    for _ in range(5):
        mu = vfp_step(mu, gaussian_model, 0.01)
    assert mu.masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(mu.weights >= 0)


def test_vfp_free_energy_identities(phase, gaussian_model):
    xg, vg = phase
    fp = solve_fixed_point(gaussian_model, xg, tol=1e-12).measure
    eq = kinetic_equilibrium(fp, vg)
    E, S, I = vfp_free_energy(eq, gaussian_model, eq)
    assert S == pytest.approx(0.0, abs=1e-12)
    assert I <= 1e-6
    gauss = maxwellian(vg)
    for m in (0.0, 1.0):
        mu_x = GridMeasure.gaussian(xg, m, 0.8)
        E_prod = vfp_free_energy(PhaseGridMeasure.product(mu_x, gauss), gaussian_model, eq)[0]
        assert E_prod == pytest.approx(mean_field_energy(mu_x, gaussian_model).total, abs=1e-10)
    rng = np.random.default_rng(0)
    for _ in range(10):
        Q = PhaseGridMeasure.from_density(xg, vg, rng.random((xg.m, vg.m)) * eq.weights + 1e-12)
        assert vfp_free_energy(Q, gaussian_model, eq)[1] >= -1e-10


def test_vfp_velocity_relaxes(gaussian_model):
    xg, vg = Grid(-8, 8, 81), Grid(-6, 6, 61)
    from ustatlab.experiments import cold_start
    from ustatlab.measures import wasserstein2_1d
    mu = cold_start(xg, vg)
    for _ in range(500):
        mu = vfp_step(mu, gaussian_model, 0.01)
    assert wasserstein2_1d(mu.v_marginal(), maxwellian(vg)) <= 0.02


# Monte Carlo functionals

def test_log_partition_free_is_zero(free_model):
    est = log_partition_mc(free_model, 8, 100, 0)
    assert est.value == 0.0 and est.stderr == 0.0


def test_log_partition_pair_exact(gaussian_model):
    n, lam = 8, 0.5
    exact = -(n - 1) / (2 * n) * math.log(1 + lam * n / (n - 1))
    est = log_partition_mc(gaussian_model, n, 50_000, 1, grid=Grid(-8, 8, 1601))
    assert abs(est.value - exact) <= 3 * est.stderr


def test_cesaro_free_collapses(grid, free_model):
    nu = GridMeasure.gaussian(grid, 1.0, 1.0)
    h = relative_entropy(nu, reference_measure(free_model, grid))
    for n in (4, 8):
        assert cesaro_entropy(nu, free_model, n, 1000, 0).value == pytest.approx(h, abs=1e-12)


def test_cesaro_fisher_exact(grid, gaussian_model):
    nu = GridMeasure.gaussian(grid, 1.0, 1.0)
    lam, n = 0.5, 8
    est = cesaro_fisher(nu, gaussian_model, n, 50_000, 2)
    exact = (1 + lam ** 2 * n / (n - 1)) / 4
    assert abs(est.value - exact) <= 4 * est.stderr + 1e-4


def test_double_well_fixed_point_symmetric():
    g = Grid(-4, 4, 401)
    m = ModelSpec(1, double_well(0.25, 0.5), [QuadraticPair(0.2)])
    fp = solve_fixed_point(m, g)
    assert abs(fp.measure.mean()) < 1e-8
