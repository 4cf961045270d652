"""Wigner functions on rectangular phase-space grids.

Phase-space coordinates follow ``a = x + i p`` with ``[x, p] = i/2``; in
these units the vacuum is ``(2/pi) exp(-2 (x^2 + p^2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

FROM_DENSITY_MATRIX = "density_matrix"
FROM_BACK_PROJECTION = "back_projection"
WIGNER_BOUND = 2.0 / np.pi


@dataclass(frozen=True)
class WignerGridSpec:
    x_min: float = -4.0
    x_max: float = 4.0
    p_min: float = -4.0
    p_max: float = 4.0
    nx: int = 81
    n_p: int = 81

    def __post_init__(self):
        if self.nx < 2 or self.n_p < 2:
            raise ValueError("a Wigner grid needs at least two points per axis")
        if not (self.x_max > self.x_min and self.p_max > self.p_min):
            raise ValueError("grid bounds must satisfy min < max")
        if not all(math.isfinite(v) for v in (self.x_min, self.x_max, self.p_min, self.p_max)):
            raise ValueError("grid bounds must be finite")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def p(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_p)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``X, P`` arrays of shape ``(nx, n_p)``."""
        return np.meshgrid(self.x, self.p, indexing="ij")

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "p_min": self.p_min,
                "p_max": self.p_max, "nx": self.nx, "np": self.n_p}

    @classmethod
    def from_dict(cls, d: dict) -> "WignerGridSpec":
        return cls(float(d["x_min"]), float(d["x_max"]), float(d["p_min"]), float(d["p_max"]),
                   int(d["nx"]), int(d.get("np", d.get("n_p"))))

    @classmethod
    def square(cls, half_width: float, n: int) -> "WignerGridSpec":
        return cls(-half_width, half_width, -half_width, half_width, n, n)


@dataclass
class WignerGrid:
    """Real Wigner values with ``values[i, j] = W(x_i, p_j)``."""

    values: np.ndarray
    spec: WignerGridSpec
    provenance: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.spec.nx, self.spec.n_p):
            raise ValueError(f"values shape {self.values.shape} does not match the grid spec")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Wigner values must be finite")

    def integral(self) -> float:
        """Trapezoidal integral of W over the grid."""
        return float(trapezoid(trapezoid(self.values, self.spec.p, axis=1), self.spec.x))


def wigner_points(rho, x, p) -> np.ndarray:
    """Wigner function of ``rho`` at points ``(x, p)`` (broadcast together).

    ``W = sum_mn rho_mn A_nm`` with the Fock kernels
    ``A_{n,n+d} = (2/pi) (-1)^n sqrt(n!/(n+d)!) (2 conj(a))^d exp(-2|a|^2) L_n^d(4|a|^2)``
    and ``A_{n+d,n} = conj(A_{n,n+d})``. For each offset ``d`` the Laguerre
    factor is carried as ``sqrt(n! d!/(n+d)!) L_n^d`` through the upward
    three-term recurrence in ``n``, and ``(2 conj(a))^d exp(-2|a|^2)/sqrt(d!)``
    is built by repeated multiplication, so no factorial or power is formed
    explicitly.
    """
    rho = np.asarray(rho, dtype=complex)
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    a = x + 1j * p
    y = 4.0 * np.abs(a) ** 2
    dim = rho.shape[0]
    w = np.zeros(a.shape, dtype=complex)
    prefactor = (2.0 / np.pi) * np.exp(-0.5 * y).astype(complex)
    two_ac = 2.0 * np.conj(a)
    for d in range(dim):
        if d:
            prefactor = prefactor * two_ac / math.sqrt(d)
        lag_prev = np.zeros(a.shape)
        lag = np.ones(a.shape)
        acc = np.zeros(a.shape, dtype=complex)
        for n in range(dim - d):
            if n:
                lag, lag_prev = (
                    (2 * n - 1 + d - y) / math.sqrt(n * (n + d)) * lag
                    - math.sqrt((n - 1) * (n - 1 + d) / (n * (n + d))) * lag_prev,
                    lag,
                )
            kernel = (-1) ** n * lag
            if d:
                # rho_{n+d,n} A_{n,n+d} + rho_{n,n+d} A_{n+d,n}
                acc += kernel * (rho[n + d, n] * prefactor + rho[n, n + d] * np.conj(prefactor))
            else:
                acc += kernel * rho[n, n] * prefactor
        w += acc
    imag = np.max(np.abs(w.imag)) if w.size else 0.0
    if imag > 1e-10 * max(1.0, float(np.max(np.abs(w.real)))):
        raise ValueError(f"Wigner function has imaginary part {imag:.3g}; is rho Hermitian?")
    return w.real


def wigner_from_rho(rho, spec: WignerGridSpec) -> WignerGrid:
    """Evaluate the Wigner function of a density matrix on a grid."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("rho must be a square matrix")
    X, P = spec.mesh()
    return WignerGrid(wigner_points(rho, X, P), spec, FROM_DENSITY_MATRIX, {"n_max": rho.shape[0] - 1})
