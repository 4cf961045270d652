"""Fock-basis building blocks: quadrature overlaps, projectors and detector loss.

Conventions: ``[x, p] = i/2`` so the vacuum quadrature variance is 1/4, and
the quadrature eigenstate at local-oscillator phase ``theta`` has Fock
components ``<n|theta,x> = exp(i n theta) psi_n(x)`` with real ``psi_n``.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.special import gammaln

TWO_PI = 2.0 * np.pi

# (2/pi)^(1/4), the vacuum wavefunction at x = 0
PSI0_AT_ORIGIN = (2.0 / np.pi) ** 0.25


class TruncationWarning(UserWarning):
    """Emitted when a truncated loss POVM visibly misses probability weight."""


def reduce_phase(theta):
    """Map phases into ``[0, 2*pi)``."""
    theta = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    return np.where(theta >= TWO_PI, 0.0, theta)


def _check_n_max(n_max: int) -> int:
    if int(n_max) != n_max or n_max < 0:
        raise ValueError(f"n_max must be a non-negative integer, got {n_max!r}")
    return int(n_max)


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"detector efficiency eta must lie in (0, 1], got {eta!r}")
    return eta


def oscillator_wavefunctions(x, n_max: int) -> np.ndarray:
    """Real harmonic-oscillator eigenfunctions ``psi_0 .. psi_n_max`` at ``x``.

    Uses the normalized three-term recurrence
    ``psi_{n+1} = 2x/sqrt(n+1) psi_n - sqrt(n/(n+1)) psi_{n-1}``, which never
    forms Hermite polynomials or factorials and so stays finite for large n.

    Returns an array of shape ``x.shape + (n_max + 1,)``.
    """
    n_max = _check_n_max(n_max)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("quadrature values must be finite")
    psi = np.empty(x.shape + (n_max + 1,), dtype=float)
    psi[..., 0] = PSI0_AT_ORIGIN * np.exp(-x * x)
    if n_max >= 1:
        psi[..., 1] = 2.0 * x * psi[..., 0]
    for n in range(1, n_max):
        psi[..., n + 1] = (2.0 * x * psi[..., n] - math.sqrt(n) * psi[..., n - 1]) / math.sqrt(n + 1)
    return psi


def fock_overlap(theta, x, n_max: int) -> np.ndarray:
    """Overlaps ``<n|theta,x>`` for ``n = 0 .. n_max``.

    ``theta`` and ``x`` broadcast against each other; the Fock index is the
    trailing axis of the result. The phase factor is applied after the real
    recurrence, so ``|entries|`` does not depend on ``theta``.
    """
    theta, x = np.broadcast_arrays(reduce_phase(theta), np.asarray(x, dtype=float))
    psi = oscillator_wavefunctions(x, n_max)
    n = np.arange(n_max + 1)
    return np.exp(1j * theta[..., None] * n) * psi


def ideal_projector(theta: float, x: float, n_max: int) -> np.ndarray:
    """Matrix ``Pi_mn = <m|theta,x><theta,x|n>`` of the quadrature projector."""
    v = fock_overlap(theta, x, n_max)
    if v.ndim != 1:
        raise ValueError("ideal_projector takes a single (theta, x) point")
    return np.outer(v, v.conj())


def log_bernoulli_coefficient(n, k, eta: float):
    """Natural log of ``B_{n+k,n}(eta)``; ``-inf`` where the coefficient is zero."""
    eta = _check_eta(eta)
    n = np.asarray(n)
    k = np.asarray(k)
    if np.any(n < 0) or np.any(k < 0):
        raise ValueError("Bernoulli indices must be non-negative")
    log_binom = gammaln(n + k + 1) - gammaln(n + 1) - gammaln(k + 1)
    if eta == 1.0:
        # (1 - eta)^k is 0^k: one for k == 0, zero otherwise
        return np.where(k == 0, 0.0, -np.inf) + 0.0 * log_binom
    return 0.5 * (log_binom + n * math.log(eta) + k * math.log1p(-eta))


def bernoulli_coefficient(n: int, k: int, eta: float) -> float:
    """Beam-splitter loss amplitude ``B_{n+k,n} = sqrt(C(n+k, n) eta^n (1-eta)^k)``.

    Evaluated in log space so large ``n + k`` does not overflow.
    """
    return float(np.exp(log_bernoulli_coefficient(n, k, eta)))


def bernoulli_matrix(eta: float, n_max: int, k_max: int | None = None) -> np.ndarray:
    """Table ``B[k, n] = B_{n+k,n}(eta)``, zeroed wherever ``n + k > n_max``."""
    n_max = _check_n_max(n_max)
    k_max = n_max if k_max is None else _check_n_max(k_max)
    k = np.arange(k_max + 1)[:, None]
    n = np.arange(n_max + 1)[None, :]
    table = np.exp(log_bernoulli_coefficient(n, k, eta))
    table[(n + k) > n_max] = 0.0
    return table


def povm_completeness_deficit(eta: float, n_max: int, k_max: int | None = None) -> float:
    """Largest missing weight ``1 - sum_n B_{N,n}^2`` over Fock rows ``N <= n_max``.

    Zero (up to roundoff) whenever ``k_max >= n_max``; grows when ``k_max``
    cuts off loss channels that the truncated space could still represent.
    """
    table = bernoulli_matrix(eta, n_max, k_max)
    k_max = table.shape[0] - 1
    deficit = 0.0
    for N in range(n_max + 1):
        kept = sum(table[k, N - k] ** 2 for k in range(min(k_max, N) + 1))
        deficit = max(deficit, 1.0 - kept)
    return deficit


def shifted_overlaps(overlaps: np.ndarray, eta: float, k_max: int | None = None) -> np.ndarray:
    """Rank-1 factors of the loss POVM.

    For every loss order ``k`` build ``u_k`` with ``u_k[n + k] = B_{n+k,n} <n|theta,x>``,
    so that ``E_eta(theta, x) = sum_k u_k u_k^dagger``. ``overlaps`` has the
    Fock index last; the result gains a leading ``k`` axis.
    """
    n_max = overlaps.shape[-1] - 1
    table = bernoulli_matrix(eta, n_max, k_max)
    out = np.zeros((table.shape[0],) + overlaps.shape, dtype=complex)
    for k in range(table.shape[0]):
        if k > n_max:
            break
        out[k, ..., k:] = overlaps[..., : n_max + 1 - k] * table[k, : n_max + 1 - k]
    return out


def loss_povm(
    theta: float,
    x: float,
    eta: float,
    n_max: int,
    k_max: int | None = None,
    warn_threshold: float = 1e-6,
) -> np.ndarray:
    """POVM element ``E_eta(theta, x)`` of a homodyne detector with efficiency ``eta``.

    Terms that would leave the truncated space (``n + k > n_max``) are
    dropped. ``k_max`` defaults to ``n_max``. A :class:`TruncationWarning`
    is emitted if a smaller ``k_max`` loses more than ``warn_threshold`` of
    the POVM completeness weight.
    """
    eta = _check_eta(eta)
    if eta == 1.0:
        return ideal_projector(theta, x, n_max)
    k_max = n_max if k_max is None else _check_n_max(k_max)
    if k_max < n_max:
        deficit = povm_completeness_deficit(eta, n_max, k_max)
        if deficit > warn_threshold:
            warnings.warn(
                f"k_max={k_max} drops up to {deficit:.3g} of the POVM weight",
                TruncationWarning,
                stacklevel=2,
            )
    v = fock_overlap(theta, x, n_max)
    if v.ndim != 1:
        raise ValueError("loss_povm takes a single (theta, x) point")
    u = shifted_overlaps(v, eta, k_max)
    return np.einsum("km,kn->mn", u, u.conj())


def bernoulli_transform(rho: np.ndarray, eta: float, k_max: int | None = None) -> np.ndarray:
    """Apply photon loss of transmission ``eta`` to a Fock-basis density matrix.

    ``rho_eta[m, n] = sum_k B_{m+k,m} B_{n+k,n} rho[m+k, n+k]`` with the sum
    clipped at the matrix edge.
    """
    rho = np.asarray(rho, dtype=complex)
    n_max = rho.shape[0] - 1
    eta = _check_eta(eta)
    if eta == 1.0:
        return rho.copy()
    table = bernoulli_matrix(eta, n_max, k_max)
    out = np.zeros_like(rho)
    for k in range(min(table.shape[0], n_max + 1)):
        b = table[k, : n_max + 1 - k]
        out[: n_max + 1 - k, : n_max + 1 - k] += np.outer(b, b) * rho[k:, k:]
    return out


def bernoulli_adjoint(op: np.ndarray, eta: float, k_max: int | None = None) -> np.ndarray:
    """Heisenberg-picture loss map, the adjoint of :func:`bernoulli_transform`.

    ``out[m+k, n+k] += B_{m+k,m} B_{n+k,n} op[m, n]``, so that
    ``Tr[op . bernoulli_transform(rho)] == Tr[bernoulli_adjoint(op) . rho]``.
    Applied to an ideal projector it yields the loss POVM element.
    """
    op = np.asarray(op, dtype=complex)
    n_max = op.shape[0] - 1
    eta = _check_eta(eta)
    if eta == 1.0:
        return op.copy()
    table = bernoulli_matrix(eta, n_max, k_max)
    out = np.zeros_like(op)
    for k in range(min(table.shape[0], n_max + 1)):
        b = table[k, : n_max + 1 - k]
        out[k:, k:] += np.outer(b, b) * op[: n_max + 1 - k, : n_max + 1 - k]
    return out
