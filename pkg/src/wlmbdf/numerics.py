"""Complex linear-algebra kernel and seeded randomness shared by all modules."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class NumericalError(RuntimeError):
    """Raised when a linear solve cannot meet its residual contract."""


class RidgeFallbackWarning(RuntimeWarning):
    """Emitted when a singular system was solved with ridge regularization."""


@dataclass(frozen=True)
class SeededRng:
    """Reproducible RNG stream: identical (master_seed, stream_id) gives an
    identical sample sequence across runs and platforms."""

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.master_seed,
                                     spawn_key=(self.stream_id,))
        return np.random.default_rng(seq)

    def child(self, stream_id: int) -> "SeededRng":
        return SeededRng(self.master_seed, stream_id)


def hermitian_tolerance_check(A: np.ndarray, tol: float = 1e-10) -> None:
    """Raise if A is not Hermitian within relative tolerance tol."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    dev = np.linalg.norm(A - A.conj().T)
    if dev > tol * (1.0 + np.linalg.norm(A)):
        raise ValueError(f"matrix is not Hermitian: deviation {dev:.3e}")


def hermitian_solve(A: np.ndarray, B: np.ndarray, *,
                    hermitian_tol: float = 1e-10,
                    residual_tol: float = 1e-8,
                    ridge_scale: float = 1e-10) -> np.ndarray:
    """Solve A X = B for Hermitian PSD A.

    Uses a Cholesky factorization; if A is (near-)singular the ridge system
    (A + eps*I) with eps = ridge_scale * trace(A)/n is solved instead and a
    RidgeFallbackWarning is emitted.  The result is verified against the
    residual contract ||A X - B||_F <= residual_tol * (1 + ||B||_F).
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    hermitian_tolerance_check(A, hermitian_tol)
    if B.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, B is {B.shape}")

    n = A.shape[0]
    b_norm = np.linalg.norm(B)

    def _try(M):
        try:
            cho = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
            X = scipy.linalg.cho_solve(cho, B, check_finite=False)
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError):
            return None
        if not np.all(np.isfinite(X)):
            return None
        if np.linalg.norm(A @ X - B) <= residual_tol * (1.0 + b_norm):
            return X
        return None

    X = _try(A)
    if X is not None:
        return X

    eps = ridge_scale * max(np.trace(A).real, np.finfo(float).tiny) / n
    warnings.warn("singular system, solving ridge-regularized (A + eps*I)",
                  RidgeFallbackWarning, stacklevel=2)
    X = _try(A + eps * np.eye(n))
    if X is None:
        # Last resort for badly conditioned stats: least-squares solution.
        X = np.linalg.lstsq(A + eps * np.eye(n), B, rcond=None)[0]
        if np.linalg.norm(A @ X - B) > residual_tol * (1.0 + b_norm):
            raise NumericalError("hermitian_solve could not meet the residual "
                                 "contract even with ridge regularization")
    return X


def pseudo_inverse(A: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudo-inverse (zero matrix maps to zero matrix)."""
    A = np.asarray(A, dtype=complex)
    if not np.any(A):
        return np.zeros((A.shape[1], A.shape[0]), dtype=complex)
    return np.linalg.pinv(A)


def complex_gaussian(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """i.i.d. circularly-symmetric complex Gaussian samples, E|x|^2 = variance."""
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    if variance == 0:
        return np.zeros(shape, dtype=complex)
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def complex_gaussian_sample(rng: SeededRng, n: int, variance: float) -> np.ndarray:
    """n i.i.d. CN(0, variance) samples from a reproducible stream."""
    return complex_gaussian(rng.generator(), n, variance)
