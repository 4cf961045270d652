"""Density matrices in the truncated Fock basis."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import gammaln

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGEN_TOL = 1e-10


class InvalidStateError(ValueError):
    """A matrix that is not a valid density matrix."""


def check_density_matrix(
    rho,
    hermitian_tol: float = HERMITIAN_TOL,
    trace_tol: float = TRACE_TOL,
    eigen_tol: float = EIGEN_TOL,
) -> np.ndarray:
    """Return ``rho`` as a complex array after checking it is physical.

    Raises :class:`InvalidStateError` on non-square input, Hermiticity
    violations, a trace away from one, or a negative eigenvalue below
    ``-eigen_tol``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
        raise InvalidStateError(f"density matrix must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidStateError("density matrix has non-finite entries")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > hermitian_tol:
        raise InvalidStateError(f"density matrix not Hermitian (max deviation {herm:.3g})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise InvalidStateError(f"density matrix trace is {tr!r}, expected 1")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lam < -eigen_tol:
        raise InvalidStateError(f"density matrix has negative eigenvalue {lam:.3g}")
    return rho


def physicality_report(rho) -> dict[str, float]:
    """Trace error, Hermiticity error and smallest eigenvalue of ``rho``."""
    rho = np.asarray(rho, dtype=complex)
    return {
        "trace_error": float(abs(np.trace(rho).real - 1.0) + abs(np.trace(rho).imag)),
        "hermiticity_error": float(np.max(np.abs(rho - rho.conj().T))),
        "min_eigenvalue": float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]),
    }


def maximally_mixed(n_max: int) -> np.ndarray:
    d = n_max + 1
    return np.eye(d, dtype=complex) / d


def fock_dm(n: int, n_max: int) -> np.ndarray:
    if not 0 <= n <= n_max:
        raise ValueError(f"Fock index {n} outside 0..{n_max}")
    rho = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    rho[n, n] = 1.0
    return rho


def coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    """Fock amplitudes ``exp(-|a|^2/2) a^n / sqrt(n!)``, not renormalized."""
    n = np.arange(n_max + 1)
    alpha = complex(alpha)
    if alpha == 0:
        out = np.zeros(n_max + 1, dtype=complex)
        out[0] = 1.0
        return out
    log_mag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))


def coherent_tail_weight(alpha: complex, n_max: int) -> float:
    """Poisson weight of a coherent state above ``n_max``."""
    from scipy.stats import poisson

    return float(poisson.sf(n_max, abs(alpha) ** 2))


def pure_dm(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def fidelity_with_pure(rho, psi) -> float:
    """``<psi|rho|psi>`` for a normalized pure reference state."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return float(np.real(psi.conj() @ rho @ psi))


def embed(rho, n_max: int) -> np.ndarray:
    """Zero-pad (or crop) ``rho`` to dimension ``n_max + 1``."""
    rho = np.asarray(rho, dtype=complex)
    d = n_max + 1
    out = np.zeros((d, d), dtype=complex)
    m = min(d, rho.shape[0])
    out[:m, :m] = rho[:m, :m]
    return out


def random_density_matrix(dim: int, rank: int | None = None, rng=None, n_max: int | None = None) -> np.ndarray:
    """Random mixed state from a Ginibre ensemble, optionally embedded in a larger space."""
    rng = np.random.default_rng(rng)
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    rho = 0.5 * (rho + rho.conj().T)
    if n_max is not None:
        rho = embed(rho, n_max)
    return rho


STATE_KINDS = ("vacuum", "fock", "coherent", "superposition01", "matrix")


@dataclass
class StateSpec:
    """Description of a test ensemble.

    ``kind`` is one of ``vacuum``, ``fock`` (``params={"n": int}``),
    ``coherent`` (``{"alpha": complex}``), ``superposition01``
    (``{"c0": complex, "c1": complex}``) or ``matrix`` (``{"rho": array}``).
    """

    kind: str
    n_max: int
    params: dict[str, Any] = field(default_factory=dict)
    tail_tol: float = 1e-6

    def __post_init__(self):
        if self.kind not in STATE_KINDS:
            raise ValueError(f"unknown state kind {self.kind!r}; expected one of {STATE_KINDS}")
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")
        # complex parameters may be given as [re, im] pairs
        self.params = dict(self.params)
        for key in ("alpha", "c0", "c1"):
            if key in self.params:
                self.params[key] = _parse_complex(self.params[key])
        if "rho" in self.params:
            self.params["rho"] = _parse_complex_matrix(self.params["rho"])
        if self.kind == "coherent":
            tail = coherent_tail_weight(self.params["alpha"], self.n_max)
            if tail >= self.tail_tol:
                raise ValueError(
                    f"coherent amplitude {self.params['alpha']} leaves weight {tail:.3g} above n_max={self.n_max}"
                )
        elif self.kind == "superposition01":
            c0, c1 = complex(self.params["c0"]), complex(self.params["c1"])
            if abs(abs(c0) ** 2 + abs(c1) ** 2 - 1.0) > 1e-12:
                raise ValueError("superposition coefficients must satisfy |c0|^2 + |c1|^2 = 1")
            if self.n_max < 1:
                raise ValueError("superposition01 needs n_max >= 1")
        elif self.kind == "fock":
            if not 0 <= int(self.params["n"]) <= self.n_max:
                raise ValueError("Fock index outside the truncated space")
        elif self.kind == "matrix":
            rho = check_density_matrix(self.params["rho"])
            if rho.shape[0] != self.n_max + 1:
                raise ValueError("explicit matrix does not match n_max")

    def density_matrix(self) -> np.ndarray:
        if self.kind == "vacuum":
            return fock_dm(0, self.n_max)
        if self.kind == "fock":
            return fock_dm(int(self.params["n"]), self.n_max)
        if self.kind == "coherent":
            return pure_dm(coherent_amplitudes(self.params["alpha"], self.n_max))
        if self.kind == "superposition01":
            psi = np.zeros(self.n_max + 1, dtype=complex)
            psi[0], psi[1] = complex(self.params["c0"]), complex(self.params["c1"])
            return np.outer(psi, psi.conj())
        return np.array(self.params["rho"], dtype=complex)

    @classmethod
    def from_dict(cls, d: dict) -> "StateSpec":
        return cls(kind=d["kind"], n_max=int(d["n_max"]), params=dict(d.get("params", {})))

    def to_dict(self) -> dict:
        params = {}
        for key, val in self.params.items():
            if key == "rho":
                params[key] = [[[z.real, z.imag] for z in row] for row in np.asarray(val, dtype=complex)]
            elif isinstance(val, complex):
                params[key] = [val.real, val.imag]
            else:
                params[key] = val
        return {"kind": self.kind, "n_max": self.n_max, "params": params}


def _parse_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        re, im = value
        return complex(float(re), float(im))
    return complex(value)


def _parse_complex_matrix(value) -> np.ndarray:
    if np.iscomplexobj(value):
        return np.array(value, dtype=complex)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(complex)
