import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad, trapezoid

from homotomo.fock import bernoulli_transform, ideal_projector
from homotomo.maxlik import ReconstructionConfig, probability
from homotomo.simulate import (
    ReplicaError,
    SimulationPlan,
    bootstrap_uncertainty,
    make_rng,
    quadrature_density,
    quadrature_scale,
    replica_seeds,
    sample_quadratures,
)
from homotomo import simulate
from homotomo.states import InvalidStateError, StateSpec, fock_dm, random_density_matrix

STATES = {
    "vacuum": StateSpec("vacuum", 3),
    "fock": StateSpec("fock", 4, {"n": 2}),
    "coherent": StateSpec("coherent", 16, {"alpha": 0.9 + 0.6j}),
    "superposition01": StateSpec("superposition01", 2, {"c0": math.sqrt(0.6), "c1": math.sqrt(0.4) * complex(math.cos(1.0), math.sin(1.0))}),
    "matrix": StateSpec("matrix", 3, {"rho": random_density_matrix(4, rng=17)}),
}


def chi_square_pvalue(xs, rho, theta, n_bins=30):
    """Chi-square p-value of samples against pr_theta(x) integrated over quantile bins."""
    edges = np.quantile(xs, np.linspace(0, 1, n_bins + 1))
    edges[0], edges[-1] = -np.inf, np.inf
    dim = rho.shape[0] - 1
    probs = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = quad(lambda x: probability(rho, ideal_projector(theta, x, dim)), max(lo, -12), min(hi, 12))
        probs.append(val)
    probs = np.asarray(probs)
    counts, _ = np.histogram(xs, edges)
    expected = probs / probs.sum() * counts.sum()
    return stats.chisquare(counts, expected).pvalue


def test_vacuum_variance():
    data = sample_quadratures(StateSpec("vacuum", 2), SimulationPlan(100000, seed=1))
    assert np.var(data.xs) == pytest.approx(0.25, rel=0.01)
    assert abs(np.mean(data.xs)) < 0.005


def test_single_photon_distribution():
    data = sample_quadratures(StateSpec("fock", 2, {"n": 1}), SimulationPlan(20000, seed=2, phases=[0.0]))
    assert chi_square_pvalue(data.xs, fock_dm(1, 2), 0.0) > 0.001


@pytest.mark.parametrize("kind", sorted(STATES))
@pytest.mark.parametrize("theta", [0.0, np.pi / 4, np.pi / 2])
def test_marginals_match_quadrature_probability(kind, theta):
    state = STATES[kind]
    data = sample_quadratures(state, SimulationPlan(8000, seed=11, phases=[theta]))
    assert chi_square_pvalue(data.xs, state.density_matrix(), theta) > 0.001


def test_lossy_samples_follow_degraded_state():
    rho = fock_dm(1, 3)
    data = sample_quadratures(rho, SimulationPlan(20000, eta=0.6, seed=5, phases=[0.3]))
    assert chi_square_pvalue(data.xs, bernoulli_transform(rho, 0.6), 0.3) > 0.001


def test_loss_of_tiny_amount_is_continuous():
    state = StateSpec("fock", 3, {"n": 1})
    a = sample_quadratures(state, SimulationPlan(20000, eta=1.0, seed=1))
    b = sample_quadratures(state, SimulationPlan(20000, eta=0.99999, seed=2))
    assert stats.ks_2samp(a.xs, b.xs).pvalue > 0.001


def test_uniform_phases():
    data = sample_quadratures(StateSpec("vacuum", 1), SimulationPlan(20000, seed=9))
    assert stats.kstest(data.thetas / (2 * np.pi), "uniform").pvalue > 0.001


def test_fixed_phases_cycle_in_order():
    phases = [0.0, 1.0, 2.0]
    data = sample_quadratures(StateSpec("vacuum", 1), SimulationPlan(9, seed=0, phases=phases))
    np.testing.assert_array_equal(data.thetas, phases * 3)


def test_explicit_phases_override_schedule():
    thetas = np.linspace(0, 3, 7)
    data = sample_quadratures(StateSpec("vacuum", 1), SimulationPlan(7, seed=0, phases=[5.0]), thetas=thetas)
    np.testing.assert_array_equal(data.thetas, thetas)
    with pytest.raises(ValueError):
        sample_quadratures(StateSpec("vacuum", 1), SimulationPlan(8, seed=0), thetas=thetas)


def test_determinism_and_seed_sensitivity():
    plan = SimulationPlan(500, seed=1234)
    a = sample_quadratures(STATES["coherent"], plan)
    b = sample_quadratures(STATES["coherent"], plan)
    c = sample_quadratures(STATES["coherent"], SimulationPlan(500, seed=1235))
    np.testing.assert_array_equal(a.xs, b.xs)
    np.testing.assert_array_equal(a.thetas, b.thetas)
    assert not np.array_equal(a.xs, c.xs)


def test_generator_is_philox():
    assert isinstance(make_rng(3).bit_generator, np.random.Philox)
    assert make_rng(3).random() == make_rng(3).random()


def test_density_is_normalized_and_matches_projector():
    rho = STATES["matrix"].density_matrix()
    x = np.linspace(-6, 6, 4001)
    for theta in (0.0, 1.1):
        pdf = quadrature_density(rho, theta, x)
        assert trapezoid(pdf, x) == pytest.approx(1.0, abs=1e-8)
        probe = [probability(rho, ideal_projector(theta, xi, 3)) for xi in (-0.8, 0.1, 1.7)]
        np.testing.assert_allclose(quadrature_density(rho, theta, np.array([-0.8, 0.1, 1.7])), probe, atol=1e-14)


def test_quadrature_scale():
    assert quadrature_scale(fock_dm(0, 3)) == pytest.approx(0.5)
    # coherent state: <X^2> peaks at (2 |alpha|^2 + 2 |alpha|^2 + 1) / 4
    rho = STATES["coherent"].density_matrix()
    a2 = abs(0.9 + 0.6j) ** 2
    assert quadrature_scale(rho) == pytest.approx(math.sqrt((4 * a2 + 1) / 4), rel=1e-6)


# --- state and plan validation --------------------------------------------------------


@pytest.mark.parametrize(
    "kind,n_max,params",
    [
        ("squeezed", 3, {}),
        ("coherent", 4, {"alpha": 2.0}),
        ("superposition01", 2, {"c0": 1.0, "c1": 1.0}),
        ("fock", 2, {"n": 5}),
        ("vacuum", -1, {}),
    ],
)
def test_state_spec_validation(kind, n_max, params):
    with pytest.raises(ValueError):
        StateSpec(kind, n_max, params)


def test_state_spec_rejects_unphysical_matrix():
    with pytest.raises(InvalidStateError):
        StateSpec("matrix", 1, {"rho": np.diag([1.2, -0.2])})


def test_state_spec_round_trip():
    for state in STATES.values():
        again = StateSpec.from_dict(state.to_dict())
        np.testing.assert_array_equal(again.density_matrix(), state.density_matrix())


def test_coherent_spec_accepts_pairs():
    assert StateSpec("coherent", 12, {"alpha": [0.5, -0.5]}).params["alpha"] == 0.5 - 0.5j


@pytest.mark.parametrize("kwargs", [{"n_samples": 0}, {"n_samples": 2.5}, {"n_samples": 5, "eta": 0.0},
                                    {"n_samples": 5, "seed": -1}, {"n_samples": 5, "phases": []}])
def test_plan_validation(kwargs):
    with pytest.raises(ValueError):
        SimulationPlan(**kwargs)


def test_plan_round_trip():
    plan = SimulationPlan(30, eta=0.8, seed=7, phases=[0.0, 0.5])
    assert SimulationPlan.from_dict(plan.to_dict()) == plan


# --- bootstrap -------------------------------------------------------------------------


def test_replica_seeds_are_distinct_and_reproducible():
    seeds = replica_seeds(42, 10)
    assert len(set(seeds)) == 10
    assert seeds == replica_seeds(42, 10)


def test_identical_seeds_give_zero_spread():
    rho = fock_dm(0, 2)
    data = sample_quadratures(rho, SimulationPlan(300, seed=3))
    cfg = ReconstructionConfig(n_max=2, max_iterations=30)
    result = bootstrap_uncertainty(rho, SimulationPlan(300, seed=3), n_replicas=3, recon_config=cfg,
                                   thetas=data.thetas, identical_seeds=True)
    np.testing.assert_array_equal(result.replicas[0], result.replicas[1])
    np.testing.assert_array_equal(result.replicas[0], result.replicas[2])
    np.testing.assert_allclose(result.std, 0.0, atol=1e-15)


def test_bootstrap_vacuum_is_tight():
    rho = fock_dm(0, 2)
    cfg = ReconstructionConfig(n_max=2)
    result = bootstrap_uncertainty(rho, SimulationPlan(4000, seed=8), n_replicas=5, recon_config=cfg)
    assert result.uncertainty.shape == (3, 3)
    # statistical spread scales as 1/sqrt(N)
    assert np.max(result.uncertainty) < 2 / math.sqrt(4000)
    assert 0 <= result.trace_distance < 4 / math.sqrt(4000)
    assert result.n_replicas == 5 and len(result.seeds) == 5


def test_bootstrap_reuses_phases():
    rho = fock_dm(0, 1)
    thetas = np.repeat(np.arange(8) * np.pi / 8, 25)
    seen = []
    original = simulate.sample_quadratures

    def spy(state, plan, thetas=None, source=None):
        seen.append(None if thetas is None else np.array(thetas))
        return original(state, plan, thetas=thetas, source=source)

    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(simulate, "sample_quadratures", spy)
        bootstrap_uncertainty(rho, SimulationPlan(200, seed=1), n_replicas=2,
                              recon_config=ReconstructionConfig(n_max=1, max_iterations=5), thetas=thetas)
        bootstrap_uncertainty(rho, SimulationPlan(200, seed=1), n_replicas=2,
                              recon_config=ReconstructionConfig(n_max=1, max_iterations=5), thetas=thetas,
                              redraw_phases=True)
    np.testing.assert_array_equal(seen[0], thetas)
    assert seen[2] is None


def test_bootstrap_threads_match_serial():
    rho = fock_dm(0, 2)
    cfg = ReconstructionConfig(n_max=2, max_iterations=40)
    a = bootstrap_uncertainty(rho, SimulationPlan(500, seed=2), n_replicas=4, recon_config=cfg)
    b = bootstrap_uncertainty(rho, SimulationPlan(500, seed=2), n_replicas=4, recon_config=cfg, threads=2)
    np.testing.assert_allclose(a.uncertainty, b.uncertainty, atol=1e-9)


def test_bootstrap_failure_names_replica(monkeypatch):
    original = simulate.reconstruct
    calls = []

    def flaky(data, config):
        calls.append(1)
        if len(calls) == 3:
            raise ArithmeticError("boom")
        return original(data, config)

    monkeypatch.setattr(simulate, "reconstruct", flaky)
    with pytest.raises(ReplicaError) as info:
        bootstrap_uncertainty(fock_dm(0, 1), SimulationPlan(100, seed=1), n_replicas=4,
                              recon_config=ReconstructionConfig(n_max=1, max_iterations=5))
    assert info.value.index == 2


def test_bootstrap_needs_two_replicas():
    with pytest.raises(ValueError):
        bootstrap_uncertainty(fock_dm(0, 1), SimulationPlan(10), n_replicas=1)
