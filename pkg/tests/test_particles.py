import math

import numpy as np
import pytest

from ustatlab.errors import BlowUp, ConfigError, StabilityError
from ustatlab.grids import GridMeasure
from ustatlab.interaction import ParticleEnsemble
from ustatlab.measures import wasserstein2_1d
from ustatlab.particles import (
    KineticEnsemble, SimConfig, admissible_dt, sample_invariant, simulate, step_kinetic,
    step_overdamped,
)
from ustatlab.potentials import ModelSpec, QuadraticPair, custom_potential, quadratic
from ustatlab.rng import NoiseSource


def test_overdamped_deterministic_euler(free_model):
    out = step_overdamped(ParticleEnsemble([1.0]), free_model, 0.1, np.zeros((1, 1)))
    assert out.positions[0, 0] == pytest.approx(0.9)


def test_overdamped_pure_diffusion():
    m = ModelSpec(1, quadratic(0.0), [])
    z = np.array([[0.3], [-1.1]])
    out = step_overdamped(ParticleEnsemble([0.0, 5.0]), m, 1.0, z)
    assert np.allclose(out.positions, np.array([[0.0], [5.0]]) + math.sqrt(2) * z)


def test_overdamped_pair_pulls_together():
    # gradient is (-2, 2) at (0, 2), so each particle moves 0.2 with dt = 0.1
    m = ModelSpec(1, quadratic(0.0), [QuadraticPair(1.0)])
    out = step_overdamped(ParticleEnsemble([0.0, 2.0]), m, 0.1, np.zeros((2, 1)))
    assert out.positions[:, 0] == pytest.approx([0.2, 1.8])


def test_kinetic_zero_force_velocity_decay():
    m = ModelSpec(1, quadratic(0.0), [])
    ens = KineticEnsemble(np.zeros((3, 1)), np.array([[1.0], [-2.0], [0.5]]))
    out = step_kinetic(ens, m, 0.2, np.zeros((3, 1)))
    assert np.allclose(out.velocities, ens.velocities * math.exp(-0.2))


def test_kinetic_free_transport_small_dt():
    m = ModelSpec(1, quadratic(0.0), [])
    ens = KineticEnsemble(np.zeros((1, 1)), np.ones((1, 1)))
    for dt in (1e-2, 1e-3):
        out = step_kinetic(ens, m, dt, np.zeros((1, 1)))
        assert abs(out.positions[0, 0] - dt) <= dt * dt


def test_kinetic_velocity_variance_long_run(free_model):
    cfg = SimConfig(dt=0.1, horizon=60.0, n=1, replicas=2000, record_every=10,
                    scheme="kinetic_splitting", keep_snapshots=False)
    rec = simulate(free_model, cfg, {"type": "point", "x": 0.0, "v": 0.0})
    burn = rec.times >= 10
    assert np.mean(rec.series["velocity_var"][burn]) == pytest.approx(1.0, rel=0.02)


def test_simulate_zero_horizon_keeps_initial(gaussian_model):
    rec = simulate(gaussian_model, SimConfig(dt=0.1, horizon=0.0, n=5), {"type": "point", "x": 1.5})
    assert rec.times.tolist() == [0.0]
    assert np.all(rec.snapshots[0] == 1.5)


def test_simulate_gaussian_stationary_variance(gaussian_model):
    cfg = SimConfig(dt=0.01, horizon=5.0, n=1000, record_every=100, master_seed=3)
    rec = simulate(gaussian_model, cfg, {"type": "gaussian", "mean": 0.0, "var": 1.0})
    x = rec.snapshots[-1][0, :, 0]
    target = 1 / 1.5
    se = target * math.sqrt(2 / (x.size - 1))
    assert abs(x.var(ddof=1) - target) <= 3 * se


@pytest.mark.parametrize("scheme", ["euler_maruyama", "kinetic_splitting"])
def test_simulate_bit_identical(gaussian_model, scheme):
    cfg = SimConfig(dt=0.05, horizon=1.0, n=20, replicas=3, master_seed=11, scheme=scheme)
    a = simulate(gaussian_model, cfg, {"type": "gaussian", "mean": 1.0})
    b = simulate(gaussian_model, cfg, {"type": "gaussian", "mean": 1.0})
    assert all(np.array_equal(x, y) for x, y in zip(a.snapshots, b.snapshots))


def test_particle_noise_independent_of_population(free_model):
    # the first 10 particles follow the same paths whether or not 40 more exist
    small = simulate(free_model, SimConfig(dt=0.05, horizon=1.0, n=10, master_seed=5), {"type": "gaussian"})
    big = simulate(free_model, SimConfig(dt=0.05, horizon=1.0, n=50, master_seed=5), {"type": "gaussian"})
    assert np.array_equal(small.snapshots[-1][0], big.snapshots[-1][0, :10])


def test_relabelled_keys_relabel_paths(gaussian_model):
    cfg = SimConfig(dt=0.05, horizon=1.0, n=6, master_seed=2)
    perm = np.array([3, 0, 5, 1, 4, 2])
    a = simulate(gaussian_model, cfg, {"type": "gaussian"})
    b = simulate(gaussian_model, cfg, {"type": "gaussian"}, particle_keys=perm)
    # the pair interaction is exchangeable, so permuted keys give permuted trajectories
    assert np.allclose(b.snapshots[-1][0], a.snapshots[-1][0][perm], atol=1e-12)


def test_noise_source_blocks_are_consistent():
    a = NoiseSource(9, [0], [0, 1], 1, block_steps=4)
    b = NoiseSource(9, [0], [0, 1], 1, block_steps=4)
    seq_a = np.array([a.step(k) for k in range(10)])
    seq_b = np.array([b.step(k) for k in [9, 8, 7, 6, 5, 4, 3, 2, 1, 0]][::-1])
    assert np.array_equal(seq_a, seq_b)


def test_stability_guard_reports_admissible_dt(free_model):
    with pytest.raises(StabilityError) as err:
        simulate(free_model, SimConfig(dt=5.0, horizon=10.0, n=3), {"type": "point"})
    assert err.value.admissible_dt == pytest.approx(2.0)
    assert "admissible" in str(err.value)
    assert admissible_dt(free_model, np.zeros((1, 1)), kinetic=True) == pytest.approx(2.0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blowup_reports_time():
    pot = custom_potential(lambda x: np.sum(-x ** 4, axis=-1), grad=lambda x: -4 * x ** 3)
    m = ModelSpec(1, pot, [])
    with pytest.raises(BlowUp) as err:
        simulate(m, SimConfig(dt=0.002, horizon=10.0, n=2), {"type": "point", "x": 3.0})
    assert err.value.t > 0


def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(dt=-1, horizon=1, n=2)
    with pytest.raises(ConfigError):
        SimConfig(dt=0.1, horizon=1, n=2, scheme="leapfrog")


def test_initial_from_measure_follows_law(gaussian_model, grid):
    mu = GridMeasure.gaussian(grid, 2.0, 0.5)
    rec = simulate(gaussian_model, SimConfig(dt=0.01, horizon=0.0, n=4000), {"type": "measure", "measure": mu})
    assert wasserstein2_1d(rec.snapshots[0].ravel(), mu) < 0.05


def test_sample_invariant_free_marginal(free_model):
    snaps = sample_invariant(free_model, n=100, burn_in=5.0, n_samples=100, thin=2.0, seed=0, dt=0.01)
    pooled = np.concatenate([s.positions[:, 0] for s in snaps])
    assert pooled.size == 10_000

    class StdNormal:
        @staticmethod
        def ppf(u):
            from scipy.stats import norm
            return norm.ppf(u)

    assert wasserstein2_1d(pooled, StdNormal()) <= 0.02


def test_sample_invariant_pair_variance():
    n, lam = 20, 1.0
    m = ModelSpec(1, quadratic(0.5), [QuadraticPair(lam)])
    snaps = sample_invariant(m, n=n, burn_in=5.0, n_samples=400, thin=0.5, seed=1, dt=0.01)
    pooled = np.concatenate([s.positions[:, 0] for s in snaps])
    # exact Gibbs marginal variance: 1/n along the centre of mass, 1/(1 + lam n/(n-1)) across it
    exact = 1 / n + (n - 1) / n / (1 + lam * n / (n - 1))
    assert pooled.var() == pytest.approx(exact, rel=0.03)


def test_sample_invariant_deterministic(free_model):
    a = sample_invariant(free_model, 5, 1.0, 3, 0.5, seed=4)
    b = sample_invariant(free_model, 5, 1.0, 3, 0.5, seed=4)
    assert all(np.array_equal(x.positions, y.positions) for x, y in zip(a, b))
