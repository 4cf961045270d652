"""Quadrature datasets and their histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import TWO_PI, reduce_phase


@dataclass
class QuadratureDataset:
    """Homodyne samples ``(theta_i, x_i)`` in acquisition order.

    ``eta`` is the detector efficiency the data was taken with. It is
    metadata supplied by the user, never read from a data file.
    """

    thetas: np.ndarray
    xs: np.ndarray
    eta: float = 1.0
    source: str = ""

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float).ravel()
        xs = np.asarray(self.xs, dtype=float).ravel()
        if thetas.shape != xs.shape:
            raise ValueError(f"{thetas.size} phases but {xs.size} quadrature values")
        if not (np.all(np.isfinite(thetas)) and np.all(np.isfinite(xs))):
            raise ValueError("dataset contains non-finite values")
        if not 0.0 < float(self.eta) <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta!r}")
        self.thetas = reduce_phase(thetas)
        self.xs = xs
        self.eta = float(self.eta)

    def __len__(self) -> int:
        return self.xs.size

    @property
    def records(self) -> list[tuple[float, float]]:
        return list(zip(self.thetas.tolist(), self.xs.tolist()))

    def subset(self, index) -> "QuadratureDataset":
        return QuadratureDataset(self.thetas[index], self.xs[index], self.eta, self.source)

    def concatenate(self, other: "QuadratureDataset") -> "QuadratureDataset":
        return QuadratureDataset(
            np.concatenate([self.thetas, other.thetas]),
            np.concatenate([self.xs, other.xs]),
            self.eta,
            self.source,
        )


@dataclass
class BinnedHistogram:
    """Counts ``f[j_theta, j_x]`` on a rectangular (theta, x) grid.

    Each bin is represented by its center.
    """

    theta_edges: np.ndarray
    x_edges: np.ndarray
    counts: np.ndarray
    eta: float = 1.0

    def __post_init__(self):
        self.theta_edges = np.asarray(self.theta_edges, dtype=float)
        self.x_edges = np.asarray(self.x_edges, dtype=float)
        self.counts = np.asarray(self.counts)
        if np.any(np.diff(self.theta_edges) <= 0) or np.any(np.diff(self.x_edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        expected = (self.theta_edges.size - 1, self.x_edges.size - 1)
        if self.counts.shape != expected:
            raise ValueError(f"counts shape {self.counts.shape} does not match edges {expected}")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __len__(self) -> int:
        return self.total

    def representative_points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Centers and counts of the non-empty bins as flat arrays ``(theta, x, f)``."""
        tc = 0.5 * (self.theta_edges[:-1] + self.theta_edges[1:])
        xc = 0.5 * (self.x_edges[:-1] + self.x_edges[1:])
        jt, jx = np.nonzero(self.counts)
        return tc[jt], xc[jx], self.counts[jt, jx].astype(float)


def bin_dataset(
    dataset: QuadratureDataset,
    theta_bins: int | np.ndarray,
    x_bins: int | np.ndarray,
    x_range: tuple[float, float] | None = None,
) -> BinnedHistogram:
    """Histogram a dataset over ``[0, 2*pi) x x_range``.

    Integer bin arguments give uniform bins; arrays are used as edges. The
    default ``x_range`` is the data range widened by half a percent. Records
    outside ``x_range`` raise, because dropping them silently would bias
    the likelihood.
    """
    if np.ndim(theta_bins) == 0:
        theta_edges = np.linspace(0.0, TWO_PI, int(theta_bins) + 1)
    else:
        theta_edges = np.asarray(theta_bins, dtype=float)
    if np.ndim(x_bins) == 0:
        if x_range is None:
            lo, hi = float(dataset.xs.min()), float(dataset.xs.max())
            pad = 0.005 * (hi - lo) + 1e-9
            x_range = (lo - pad, hi + pad)
        x_edges = np.linspace(x_range[0], x_range[1], int(x_bins) + 1)
    else:
        x_edges = np.asarray(x_bins, dtype=float)
    outside = (dataset.xs < x_edges[0]) | (dataset.xs > x_edges[-1])
    if np.any(outside):
        raise ValueError(f"{int(outside.sum())} records fall outside the x binning range")
    counts, _, _ = np.histogram2d(dataset.thetas, dataset.xs, bins=[theta_edges, x_edges])
    return BinnedHistogram(theta_edges, x_edges, counts.astype(np.int64), eta=dataset.eta)


def phase_coverage_gap(thetas) -> float:
    """Largest circular gap between distinct phases folded into ``[0, pi)``.

    A quadrature at ``theta + pi`` is the mirror of the one at ``theta``, so
    only the folded coverage matters for the reconstruction.
    """
    folded = np.unique(np.mod(np.asarray(thetas, dtype=float), np.pi))
    if folded.size == 0:
        return np.pi
    gaps = np.diff(np.concatenate([folded, [folded[0] + np.pi]]))
    return float(gaps.max())
