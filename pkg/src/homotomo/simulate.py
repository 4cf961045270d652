"""Synthetic homodyne data and parametric-bootstrap error bars.

Random numbers come from numpy's Philox counter-based generator seeded
with the plan's 64-bit seed. Phases are drawn first (one uniform per
sample, if the schedule is random), then one uniform per sample for the
inverse-CDF quadrature draw.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import QuadratureDataset
from .fock import TWO_PI, bernoulli_transform, oscillator_wavefunctions, reduce_phase
from .maxlik import ReconstructionConfig, reconstruct
from .states import StateSpec, check_density_matrix

log = logging.getLogger(__name__)

GRID_POINTS = 4096
GRID_SIGMAS = 6.0
FIXED_PHASE_QUANTUM = 1e-9
UNIFORM_BUCKET = np.pi / 512


def make_rng(seed: int) -> np.random.Generator:
    """Philox-backed generator; the same seed gives the same stream everywhere."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass
class SimulationPlan:
    """How to draw a synthetic dataset.

    ``phases=None`` draws every phase uniformly from ``[0, 2*pi)``. A list of
    phases is cycled through in order, so ``n_samples = 12 * 2000`` with 12
    phases yields exactly 2000 samples per phase.
    """

    n_samples: int
    eta: float = 1.0
    seed: int = 0
    phases: list[float] | None = None

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ValueError(f"n_samples must be a positive integer, got {self.n_samples!r}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.phases is not None:
            if len(self.phases) == 0:
                raise ValueError("fixed phase set is empty")
            self.phases = [float(t) for t in self.phases]

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationPlan":
        return cls(
            n_samples=int(d["n_samples"]),
            eta=float(d.get("eta", 1.0)),
            seed=int(d.get("seed", 0)),
            phases=d.get("phases"),
        )

    def to_dict(self) -> dict:
        return {"n_samples": self.n_samples, "eta": self.eta, "seed": self.seed, "phases": self.phases}


def _fourier_components(rho: np.ndarray, psi: np.ndarray) -> list[np.ndarray]:
    """``c_d(x) = sum_{m - n = d} rho_nm psi_m psi_n`` for ``d = 0 .. n_max``."""
    d = rho.shape[0]
    comps = []
    for shift in range(d):
        m = np.arange(shift, d)
        n = m - shift
        comps.append(psi[:, m] * psi[:, n] @ rho[n, m])
    return comps


def quadrature_density(rho, theta, x) -> np.ndarray:
    """``pr_theta(x) = <theta,x| rho |theta,x>`` for one phase and many x."""
    rho = np.asarray(rho, dtype=complex)
    psi = oscillator_wavefunctions(np.asarray(x, dtype=float).ravel(), rho.shape[0] - 1)
    return _density_from_components(_fourier_components(rho, psi), float(theta)).reshape(np.shape(x))


def _density_from_components(comps: list[np.ndarray], theta: float) -> np.ndarray:
    # pr = Re sum_{m,n} rho_nm psi_m psi_n e^{i(m-n)theta}; the -d terms are conjugates
    out = comps[0].real.copy()
    for shift in range(1, len(comps)):
        out += 2.0 * np.real(comps[shift] * np.exp(1j * shift * theta))
    return np.maximum(out, 0.0)


def quadrature_scale(rho) -> float:
    """``max_theta sqrt(<X_theta^2>)`` for a Fock-basis density matrix."""
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    n = np.arange(d)
    mean_n = float(np.real(np.sum(n * np.diag(rho))))
    # <a^2> = sum_m sqrt(m (m-1)) rho[m-2, m]
    a2 = sum(np.sqrt(m * (m - 1)) * rho[m - 2, m] for m in range(2, d)) if d > 2 else 0.0
    return float(np.sqrt((2.0 * abs(a2) + 2.0 * mean_n + 1.0) / 4.0))


class _InverseCDF:
    """Tabulated inverse CDF of ``pr_theta(x)`` on a fixed x-grid."""

    def __init__(self, rho: np.ndarray, n_points: int = GRID_POINTS, n_sigmas: float = GRID_SIGMAS):
        half = n_sigmas * quadrature_scale(rho)
        self.grid = np.linspace(-half, half, n_points)
        psi = oscillator_wavefunctions(self.grid, rho.shape[0] - 1)
        self.comps = _fourier_components(rho, psi)

    def table(self, theta: float) -> tuple[np.ndarray, np.ndarray]:
        pdf = _density_from_components(self.comps, theta)
        dx = np.diff(self.grid)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * dx)])
        cdf /= cdf[-1]
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        return cdf[keep], self.grid[keep]

    def draw(self, theta: float, u: np.ndarray) -> np.ndarray:
        cdf, grid = self.table(theta)
        return np.interp(u, cdf, grid)


def _state_matrix(state) -> np.ndarray:
    if isinstance(state, StateSpec):
        return state.density_matrix()
    return check_density_matrix(state)


def sample_quadratures(state, plan: SimulationPlan, thetas=None, source: str | None = None) -> QuadratureDataset:
    """Draw a homodyne dataset from ``state`` as seen by a detector of efficiency ``plan.eta``.

    ``state`` is a :class:`StateSpec` or a density matrix. Passing ``thetas``
    fixes the phase of every sample and overrides the plan's schedule.
    Quadratures come from inverse-CDF lookup of ``pr_theta(x)`` of the
    loss-degraded state: exact phases for fixed sets, buckets of width
    pi/512 for uniformly random phases.
    """
    rho = _state_matrix(state)
    rho_eta = bernoulli_transform(rho, plan.eta)
    rng = make_rng(plan.seed)
    n = plan.n_samples

    if thetas is not None:
        thetas = reduce_phase(np.asarray(thetas, dtype=float).ravel())
        if thetas.size != n:
            raise ValueError(f"{thetas.size} phases supplied for {n} samples")
        exact = True
    elif plan.phases is None:
        thetas = rng.uniform(0.0, TWO_PI, size=n)
        exact = False
    else:
        thetas = reduce_phase(np.resize(np.asarray(plan.phases, dtype=float), n))
        exact = True
    u = rng.random(n)

    sampler = _InverseCDF(rho_eta)
    xs = np.empty(n)
    if exact:
        keys = np.round(thetas / FIXED_PHASE_QUANTUM).astype(np.int64)
    else:
        keys = np.minimum(np.floor(thetas / UNIFORM_BUCKET).astype(np.int64), int(round(TWO_PI / UNIFORM_BUCKET)) - 1)
    order = np.argsort(keys, kind="stable")
    uniq, starts = np.unique(keys[order], return_index=True)
    bounds = np.append(starts, n)
    for j, key in enumerate(uniq):
        idx = order[bounds[j] : bounds[j + 1]]
        theta_ref = key * FIXED_PHASE_QUANTUM if exact else (key + 0.5) * UNIFORM_BUCKET
        xs[idx] = sampler.draw(theta_ref, u[idx])

    if source is None:
        source = f"simulated: seed={plan.seed}, eta={plan.eta}, n={n}"
    return QuadratureDataset(thetas, xs, eta=plan.eta, source=source)


# ---------------------------------------------------------------------------
# Parametric bootstrap
# ---------------------------------------------------------------------------


class ReplicaError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"bootstrap replica {index} failed: {cause}")
        self.index = index


@dataclass
class BootstrapResult:
    """Spread of re-fitted matrices around the fitted state.

    ``uncertainty[m, n]`` is the mean over replicas of ``|rho_ml - rho'_k|``
    taken elementwise; ``std`` is the elementwise standard deviation of the
    replica matrices and ``trace_distance`` the mean trace norm of
    ``rho_ml - rho'_k``.
    """

    uncertainty: np.ndarray
    std: np.ndarray
    trace_distance: float
    n_replicas: int
    seeds: list[int]
    replicas: list[np.ndarray] = field(default_factory=list, repr=False)


def replica_seeds(seed: int, n_replicas: int) -> list[int]:
    """Child seeds spawned from ``seed`` with numpy's SeedSequence."""
    children = np.random.SeedSequence(int(seed)).spawn(n_replicas)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def bootstrap_uncertainty(
    rho_ml,
    template: SimulationPlan,
    n_replicas: int = 50,
    recon_config: ReconstructionConfig | None = None,
    thetas=None,
    redraw_phases: bool = False,
    threads: int = 1,
    identical_seeds: bool = False,
) -> BootstrapResult:
    """Monte-Carlo error bars for a reconstructed density matrix.

    Each replica simulates ``template.n_samples`` records from ``rho_ml``
    treated as the true state, reconstructs them with ``recon_config`` and is
    compared elementwise with ``rho_ml``. When ``thetas`` (the phases of the
    original data) are given they are reused by every replica unless
    ``redraw_phases`` is set. ``identical_seeds`` gives every replica the
    template seed, which is only useful for testing.
    """
    if n_replicas < 2:
        raise ValueError("need at least two replicas")
    rho_ml = check_density_matrix(rho_ml)
    recon_config = recon_config or ReconstructionConfig(n_max=rho_ml.shape[0] - 1)
    recon_config = replace(recon_config, eta=template.eta, threads=recon_config.threads or 1)
    if thetas is not None and not redraw_phases:
        thetas = np.asarray(thetas, dtype=float)
        template = replace(template, n_samples=thetas.size)
    else:
        thetas = None
    seeds = [int(template.seed)] * n_replicas if identical_seeds else replica_seeds(template.seed, n_replicas)

    def run(k: int) -> np.ndarray:
        try:
            data = sample_quadratures(rho_ml, replace(template, seed=seeds[k]), thetas=thetas)
            return reconstruct(data, recon_config).rho
        except Exception as exc:
            raise ReplicaError(k, exc) from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            replicas = list(pool.map(run, range(n_replicas)))
    else:
        replicas = [run(k) for k in range(n_replicas)]

    stack = np.stack(replicas)
    diff = rho_ml[None] - stack
    uncertainty = np.mean(np.abs(diff), axis=0)
    std = np.sqrt(np.mean(np.abs(stack - stack.mean(axis=0)) ** 2, axis=0))
    trace_distance = float(np.mean([np.abs(np.linalg.eigvalsh(dk)).sum() for dk in diff]))
    log.info("bootstrap: %d replicas, mean trace distance %.3g", n_replicas, trace_distance)
    return BootstrapResult(uncertainty, std, trace_distance, n_replicas, seeds, replicas)
