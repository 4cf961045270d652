"""Iterative maximum-likelihood (R rho R) reconstruction from homodyne data.

The update is ``rho -> N[R(rho) rho R(rho)]`` with
``R(rho) = sum_i w_i E_i / pr_i``, where ``E_i`` is the measurement operator
of record (or bin) ``i`` and ``pr_i = Tr[E_i rho]``. ``E_i`` is the ideal
quadrature projector for a perfect detector, or the loss POVM otherwise.
"""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

from .data import BinnedHistogram, QuadratureDataset, phase_coverage_gap
from .fock import (
    TruncationWarning,
    bernoulli_adjoint,
    bernoulli_transform,
    fock_overlap,
    povm_completeness_deficit,
)
from .states import check_density_matrix, maximally_mixed

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-300
DEGENERATE_RATIO = 1e-12
TRACE_FLOOR = 1e-300
MONOTONE_SLACK = 1e-12
BLOCK_SIZE = 4096
COVERAGE_GAP_WARN = np.pi / 4
THREADS_ENV = "HOMOTOMO_THREADS"


class DegenerateMeasurementError(ArithmeticError):
    """A record has (numerically) zero probability under the current state."""

    def __init__(self, message: str, indices=()):
        super().__init__(message)
        self.indices = [int(i) for i in indices]


class MonotonicityError(AssertionError):
    """The log-likelihood decreased between iterations (checked mode only)."""


class PhaseCoverageWarning(UserWarning):
    """Phases leave a large part of [0, pi) unsampled."""


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _blas_limit(threads: int):
    if threads != 1:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return nullcontext()
    return threadpool_limits(limits=1)


# ---------------------------------------------------------------------------
# Measurement operators
# ---------------------------------------------------------------------------


@dataclass
class MeasurementSet:
    """Measurement operators for a fixed list of (theta, x) points.

    Only the overlap vectors ``<n|theta_i,x_i>`` are stored. For a lossy
    detector the POVM is never materialized: ``Tr[E_i rho]`` is evaluated as
    the ideal probability of the loss-degraded state and ``sum_i c_i E_i`` as
    the adjoint loss map of ``sum_i c_i Pi_i``. With ``cache=False`` the
    overlaps are recomputed block by block on every pass instead.
    """

    thetas: np.ndarray
    xs: np.ndarray
    weights: np.ndarray
    n_max: int
    eta: float = 1.0
    k_max: int | None = None
    cache: bool = True
    block_size: int = BLOCK_SIZE
    _overlaps: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float)
        self.xs = np.asarray(self.xs, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if not (self.thetas.shape == self.xs.shape == self.weights.shape):
            raise ValueError("thetas, xs and weights must have equal length")
        if self.thetas.size == 0:
            raise ValueError("no measurements")
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta!r}")
        if self.k_max is not None and self.k_max < self.n_max:
            deficit = povm_completeness_deficit(self.eta, self.n_max, self.k_max)
            if deficit > 1e-6:
                warnings.warn(f"k_max={self.k_max} drops up to {deficit:.3g} of the POVM weight",
                              TruncationWarning, stacklevel=3)
        if self.cache:
            self._overlaps = fock_overlap(self.thetas, self.xs, self.n_max)

    @classmethod
    def from_dataset(cls, dataset: QuadratureDataset, n_max: int, eta: float | None = None, **kwargs):
        eta = dataset.eta if eta is None else eta
        return cls(dataset.thetas, dataset.xs, np.ones(len(dataset)), n_max, eta, **kwargs)

    @classmethod
    def from_histogram(cls, hist: BinnedHistogram, n_max: int, eta: float | None = None, **kwargs):
        thetas, xs, counts = hist.representative_points()
        eta = hist.eta if eta is None else eta
        return cls(thetas, xs, counts, n_max, eta, **kwargs)

    def __len__(self) -> int:
        return self.xs.size

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @property
    def n_samples(self) -> float:
        return float(self.weights.sum())

    def blocks(self) -> Iterator[tuple[slice, np.ndarray]]:
        """Yield ``(slice, overlaps)`` over consecutive fixed-size blocks."""
        for start in range(0, len(self), self.block_size):
            sl = slice(start, min(start + self.block_size, len(self)))
            if self._overlaps is not None:
                yield sl, self._overlaps[sl]
            else:
                yield sl, fock_overlap(self.thetas[sl], self.xs[sl], self.n_max)

    def to_detector(self, rho: np.ndarray) -> np.ndarray:
        """State whose ideal quadrature statistics equal ``Tr[E_i rho]``."""
        return bernoulli_transform(rho, self.eta, self.k_max)

    def from_detector(self, op: np.ndarray) -> np.ndarray:
        """Map ``sum_i c_i Pi_i`` to ``sum_i c_i E_i``."""
        return bernoulli_adjoint(op, self.eta, self.k_max)

    def operator(self, i: int) -> np.ndarray:
        """Dense matrix of measurement operator ``i``."""
        v = self._overlaps[i] if self._overlaps is not None else fock_overlap(self.thetas[i], self.xs[i], self.n_max)
        return self.from_detector(np.outer(v, v.conj()))


def _as_measurements(data, n_max: int, eta: float | None = None, k_max: int | None = None) -> MeasurementSet:
    if isinstance(data, MeasurementSet):
        return data
    if isinstance(data, BinnedHistogram):
        return MeasurementSet.from_histogram(data, n_max, eta, k_max=k_max)
    if isinstance(data, QuadratureDataset):
        if len(data) == 0:
            raise ValueError("empty dataset")
        return MeasurementSet.from_dataset(data, n_max, eta, k_max=k_max)
    raise TypeError(f"cannot build measurements from {type(data).__name__}")


# ---------------------------------------------------------------------------
# Elementary quantities
# ---------------------------------------------------------------------------


def probability(rho, op) -> float:
    """``Re Tr[op rho]`` clipped below at zero."""
    rho = np.asarray(rho)
    op = np.asarray(op)
    if rho.shape != op.shape:
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs operator {op.shape}")
    return max(float(np.real(np.sum(op * rho.T))), 0.0)


def _block_probabilities(rho: np.ndarray, v: np.ndarray) -> np.ndarray:
    # pr_i = v_i^dagger rho v_i
    return np.real(np.sum(v.conj() * (v @ rho.T), axis=1))


def _pairwise(items: list):
    """Combine partial results in a fixed binary-tree order."""
    items = list(items)
    while len(items) > 1:
        merged = [items[i] + items[i + 1] for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            merged.append(items[-1])
        items = merged
    return items[0]


@dataclass
class _PassResult:
    loglik: float
    R: np.ndarray | None
    pr: np.ndarray


def _evaluate(rho: np.ndarray, ms: MeasurementSet, with_r: bool, threads: int = 1,
              floor: float = PROB_FLOOR) -> _PassResult:
    """One sweep over the data: probabilities, log-likelihood and optionally R."""

    rho_det = ms.to_detector(rho)

    def work(item):
        sl, v = item
        pr = _block_probabilities(rho_det, v)
        w = ms.weights[sl]
        clamped = np.maximum(pr, floor)
        ll = float(np.sum(w * np.log(clamped)))
        R = v.T @ ((w / clamped)[:, None] * v.conj()) if with_r else None
        return pr, ll, R

    items = list(ms.blocks())
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, items))
    else:
        parts = [work(item) for item in items]
    pr = np.concatenate([p[0] for p in parts])
    loglik = _pairwise([p[1] for p in parts])
    R = None
    if with_r:
        R = ms.from_detector(_pairwise([p[2] for p in parts]))
        R = 0.5 * (R + R.conj().T)
    return _PassResult(loglik, R, pr)


def log_likelihood(rho, data, ops: MeasurementSet | None = None, threads: int = 1) -> float:
    """``sum_i w_i ln pr_i`` with probabilities clamped at ``PROB_FLOOR``.

    ``data`` may be a :class:`QuadratureDataset`, a :class:`BinnedHistogram`
    or a prepared :class:`MeasurementSet`; pass ``ops`` to reuse a cache.
    """
    rho = np.asarray(rho, dtype=complex)
    ms = ops if ops is not None else _as_measurements(data, rho.shape[0] - 1)
    if ms.dim != rho.shape[0]:
        raise ValueError("measurement operators and rho have different dimensions")
    return _evaluate(rho, ms, with_r=False, threads=threads).loglik


def _raise_if_degenerate(pr: np.ndarray, floor: float = PROB_FLOOR):
    bad = np.flatnonzero(pr < floor)
    if bad.size:
        raise DegenerateMeasurementError(
            f"{bad.size} record(s) have probability below {floor:g}, first at index {bad[0]}", bad
        )


def r_operator(rho, data, ops: MeasurementSet | None = None, threads: int = 1) -> np.ndarray:
    """Iteration operator ``R = sum_i w_i E_i / pr_i`` (Hermitian).

    Raises :class:`DegenerateMeasurementError` naming the offending records if
    any probability hits the floor.
    """
    rho = np.asarray(rho, dtype=complex)
    ms = ops if ops is not None else _as_measurements(data, rho.shape[0] - 1)
    if ms.dim != rho.shape[0]:
        raise ValueError("measurement operators and rho have different dimensions")
    res = _evaluate(rho, ms, with_r=True, threads=threads)
    _raise_if_degenerate(res.pr)
    return res.R


def r_operator_binned(rho, hist: BinnedHistogram, n_max: int, eta: float | None = None) -> np.ndarray:
    """``R = sum_j f_j E_j / pr_j`` over non-empty bins, evaluated at bin centers."""
    ms = MeasurementSet.from_histogram(hist, n_max, eta)
    return r_operator(rho, None, ops=ms)


def iterate_once(rho, R) -> np.ndarray:
    """``N[R rho R]``, re-Hermitized and trace-normalized."""
    rho = np.asarray(rho, dtype=complex)
    R = np.asarray(R, dtype=complex)
    M = R @ rho @ R
    M = 0.5 * (M + M.conj().T)
    tr = np.trace(M).real
    if not tr > TRACE_FLOOR:
        raise ArithmeticError(f"Tr[R rho R] = {tr!r}; the update is degenerate")
    return M / tr


# ---------------------------------------------------------------------------
# Reconstruction driver
# ---------------------------------------------------------------------------


@dataclass
class ReconstructionConfig:
    """Settings of :func:`reconstruct`.

    ``tolerance`` is per sample: iteration stops once the log-likelihood
    gain of a step drops below ``tolerance * N``. ``eta=None`` takes the
    efficiency from the dataset.
    """

    n_max: int = 10
    eta: float | None = None
    k_max: int | None = None
    max_iterations: int = 5000
    tolerance: float = 1e-10
    initial_rho: np.ndarray | None = None
    threads: int | None = None
    check_monotone: bool = False
    cache: bool = True

    def validate(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        if self.eta is not None and not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta!r}")
        if self.k_max is not None and self.k_max < 0:
            raise ValueError("k_max must be non-negative")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be an integer >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.threads is not None and self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.initial_rho is not None:
            rho0 = check_density_matrix(self.initial_rho)
            if rho0.shape[0] != self.n_max + 1:
                raise ValueError("initial_rho does not match n_max")

    def echo(self) -> dict:
        d = asdict(self)
        if self.initial_rho is not None:
            rho0 = np.asarray(self.initial_rho, dtype=complex)
            d["initial_rho"] = [[[z.real, z.imag] for z in row] for row in rho0]
        return d


@dataclass
class ReconstructionResult:
    rho: np.ndarray
    loglik_trace: np.ndarray
    iterations: int
    stop_reason: str
    config: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def loglik(self) -> float:
        return float(self.loglik_trace[-1])


def reconstruct(data, config: ReconstructionConfig | None = None, **overrides) -> ReconstructionResult:
    """Maximum-likelihood density matrix for a dataset or histogram.

    Starts from the maximally mixed state unless ``config.initial_rho`` is
    set and iterates ``rho -> N[R rho R]`` until the per-step log-likelihood
    gain falls below ``tolerance * N`` or ``max_iterations`` updates have
    been applied. The returned ``loglik_trace[k]`` is the log-likelihood of
    the k-th iterate, so its last entry belongs to ``result.rho``.
    """
    config = config or ReconstructionConfig()
    if overrides:
        config = ReconstructionConfig(**{**asdict(config), **overrides})
    config.validate()
    if isinstance(data, (QuadratureDataset, BinnedHistogram)) and len(data) == 0:
        raise ValueError("empty dataset")
    eta = config.eta if config.eta is not None else data.eta
    threads = config.threads or default_threads()
    diagnostics: dict = {"eta": eta, "threads": threads}

    if isinstance(data, QuadratureDataset):
        gap = phase_coverage_gap(data.thetas)
    else:
        thetas, _, _ = data.representative_points()
        gap = phase_coverage_gap(thetas)
    diagnostics["phase_coverage_gap"] = gap
    if gap > COVERAGE_GAP_WARN:
        diagnostics["phase_coverage_warning"] = True
        warnings.warn(f"phases leave a gap of {gap:.3f} rad in [0, pi)", PhaseCoverageWarning, stacklevel=2)

    with _blas_limit(threads):
        if isinstance(data, BinnedHistogram):
            ms = MeasurementSet.from_histogram(data, config.n_max, eta, k_max=config.k_max, cache=config.cache)
        else:
            ms = MeasurementSet.from_dataset(data, config.n_max, eta, k_max=config.k_max, cache=config.cache)
        n = ms.n_samples
        rho = maximally_mixed(config.n_max) if config.initial_rho is None else np.array(config.initial_rho, dtype=complex)

        trace: list[float] = []
        decreases: list[int] = []
        stop_reason = "max_iterations"
        iterations = 0
        while True:
            res = _evaluate(rho, ms, with_r=True, threads=threads)
            trace.append(res.loglik)
            if len(trace) > 1:
                gain = trace[-1] - trace[-2]
                if gain < -MONOTONE_SLACK * n:
                    decreases.append(len(trace) - 1)
                    if config.check_monotone and eta == 1.0:
                        raise MonotonicityError(
                            f"log-likelihood fell by {-gain:.3g} at iteration {len(trace) - 1}"
                        )
                if gain < config.tolerance * n:
                    stop_reason = "converged"
                    break
            if iterations >= config.max_iterations:
                break
            rho = iterate_once(rho, res.R)
            iterations += 1

    _raise_if_degenerate(res.pr)
    pmax = float(res.pr.max())
    degenerate = np.flatnonzero(res.pr < DEGENERATE_RATIO * pmax)
    diagnostics.update(
        n_samples=n,
        n_operators=len(ms),
        likelihood_decreases=decreases,
        degenerate_records=degenerate.tolist(),
        min_probability=float(res.pr.min()),
        max_probability=pmax,
    )
    if decreases:
        log.warning("log-likelihood decreased at %d iteration(s)", len(decreases))
    return ReconstructionResult(
        rho=rho,
        loglik_trace=np.asarray(trace),
        iterations=iterations,
        stop_reason=stop_reason,
        config=config.echo(),
        diagnostics=diagnostics,
    )
