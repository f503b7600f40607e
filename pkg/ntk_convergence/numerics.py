"""Dense linear algebra shared by the trainers and the verification checks.

Every matrix is a float64 numpy array. Symmetric eigenvalues come from a cyclic
Jacobi method with round-robin (parallel) ordering, so each sweep is a sequence of
vectorized rotations over disjoint index pairs and the result does not depend on
the platform LAPACK.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Tuple

import numpy as np
import scipy.linalg

from .exceptions import NonFiniteError, SingularSystemError, ValidationError
from .interfaces import SpectrumSummary

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-9
JACOBI_TOL = 1e-12
MAX_SWEEPS = 60
FALLBACK_RIDGE_SCALE = 1e-12
FD_STEP = 1e-5
FD_SECOND_STEP = 1e-4


def as_dense(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite float64 2-D array or raise ValidationError."""
    x = np.asarray(a, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"{name} must be two-dimensional, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} has non-finite entries")
    return x


def _as_symmetric(a) -> np.ndarray:
    x = as_dense(a)
    if x.shape[0] != x.shape[1]:
        raise ValidationError(f"matrix must be square, got shape {x.shape}")
    scale = float(np.max(np.abs(x))) if x.size else 0.0
    asym = float(np.max(np.abs(x - x.T))) if x.size else 0.0
    if asym > SYMMETRY_TOL * max(scale, np.finfo(np.float64).tiny):
        raise ValidationError(
            f"matrix is not symmetric (max |A - A^T| = {asym:.3e}, scale {scale:.3e})"
        )
    return 0.5 * (x + x.T)


@lru_cache(maxsize=64)
def _round_robin(n: int) -> Tuple[Tuple[np.ndarray, np.ndarray], ...]:
    """Disjoint (p, q) pairings covering every off-diagonal pair once per sweep."""
    players: List[int] = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        pairs = [
            (min(players[i], players[size - 1 - i]), max(players[i], players[size - 1 - i]))
            for i in range(size // 2)
            if players[i] >= 0 and players[size - 1 - i] >= 0
        ]
        p = np.array([a for a, _ in pairs], dtype=np.intp)
        q = np.array([b for _, b in pairs], dtype=np.intp)
        p.setflags(write=False)
        q.setflags(write=False)
        rounds.append((p, q))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _off_diagonal_norm(a: np.ndarray) -> float:
    return float(np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0)))


def jacobi_eigenvalues(a) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending.

    Sweeps until the off-diagonal Frobenius mass drops below
    ``JACOBI_TOL * ||A||_F``.
    """
    work = _as_symmetric(a).copy()
    n = work.shape[0]
    if n <= 1:
        return np.diag(work).copy()
    target = JACOBI_TOL * float(np.linalg.norm(work))
    rounds = _round_robin(n)
    for sweep in range(MAX_SWEEPS):
        if _off_diagonal_norm(work) <= target:
            break
        for p, q in rounds:
            apq = work[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            app = work[p, p]
            aqq = work[q, q]
            theta = np.where(active, (aqq - app) / np.where(active, 2.0 * apq, 1.0), 0.0)
            t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            col_p = work[:, p].copy()
            col_q = work[:, q].copy()
            work[:, p] = c * col_p - s * col_q
            work[:, q] = s * col_p + c * col_q

            row_p = work[p, :].copy()
            row_q = work[q, :].copy()
            work[p, :] = c[:, None] * row_p - s[:, None] * row_q
            work[q, :] = s[:, None] * row_p + c[:, None] * row_q
    else:
        logger.warning(
            "Jacobi eigensolver hit %d sweeps (off-diagonal %.3e, target %.3e)",
            MAX_SWEEPS, _off_diagonal_norm(work), target,
        )
    return np.sort(np.diag(work))


def sym_eig_extremes(a) -> SpectrumSummary:
    """Smallest and largest eigenvalue of a symmetric matrix."""
    eigenvalues = jacobi_eigenvalues(a)
    if eigenvalues.size == 0:
        raise ValidationError("matrix must have at least one row")
    lo, hi = float(eigenvalues[0]), float(eigenvalues[-1])
    return SpectrumSummary(lambda_min=lo, lambda_max=hi, spectral_norm=max(abs(lo), abs(hi)))


def spectral_norm(a) -> float:
    """Largest singular value, via the eigenvalues of the smaller Gram product."""
    x = as_dense(a)
    if x.size == 0:
        return 0.0
    gram = x @ x.T if x.shape[0] <= x.shape[1] else x.T @ x
    gram = 0.5 * (gram + gram.T)
    return float(np.sqrt(max(jacobi_eigenvalues(gram)[-1], 0.0)))


def default_ridge(a: np.ndarray) -> float:
    n = a.shape[0]
    return FALLBACK_RIDGE_SCALE * float(np.trace(a)) / n if n else 0.0


@dataclass(frozen=True)
class SpdSolution:
    x: np.ndarray
    ridge: float
    fallback: bool
    residual_norm: float


def _cholesky_solve(a: np.ndarray, b: np.ndarray, ridge: float, refine: int = 2) -> np.ndarray:
    shifted = a + ridge * np.eye(a.shape[0])
    factor = scipy.linalg.cho_factor(shifted, lower=True, check_finite=False)
    x = scipy.linalg.cho_solve(factor, b, check_finite=False)
    for _ in range(refine):
        x = x + scipy.linalg.cho_solve(factor, b - shifted @ x, check_finite=False)
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("non-finite solution")
    return x


def solve_spd(a, b, ridge: float = 0.0) -> SpdSolution:
    """Solve ``(A + ridge I) x = b`` for symmetric positive semi-definite ``A``.

    A failed factorization at ``ridge == 0`` is retried once with
    ``default_ridge(A)`` and reported through ``SpdSolution.fallback``.
    """
    matrix = _as_symmetric(a)
    rhs = np.asarray(b, dtype=np.float64)
    if rhs.shape != (matrix.shape[0],):
        raise ValidationError(
            f"right-hand side has shape {rhs.shape}, expected ({matrix.shape[0]},)"
        )
    if ridge < 0:
        raise ValidationError("ridge must be non-negative")

    fallback = False
    try:
        x = _cholesky_solve(matrix, rhs, ridge)
    except np.linalg.LinAlgError:
        if ridge > 0:
            raise SingularSystemError(matrix.shape[0], ridge)
        ridge = default_ridge(matrix)
        fallback = True
        logger.warning("Cholesky failed at ridge 0; retrying with ridge %.3e", ridge)
        if ridge <= 0:
            raise SingularSystemError(matrix.shape[0], ridge)
        try:
            x = _cholesky_solve(matrix, rhs, ridge)
        except np.linalg.LinAlgError:
            raise SingularSystemError(matrix.shape[0], ridge)

    residual = float(np.linalg.norm(matrix @ x + ridge * x - rhs))
    return SpdSolution(x=x, ridge=ridge, fallback=fallback, residual_norm=residual)


def finite_diff_grad(f: Callable[[np.ndarray], float], w, h: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar function, same shape as ``w``."""
    if h <= 0:
        raise ValidationError("finite-difference step must be positive")
    w0 = np.asarray(w, dtype=np.float64)
    flat = w0.ravel()
    grad = np.empty_like(flat)
    for i in range(flat.size):
        shifted = flat.copy()
        shifted[i] = flat[i] + h
        f_plus = float(f(shifted.reshape(w0.shape)))
        shifted[i] = flat[i] - h
        f_minus = float(f(shifted.reshape(w0.shape)))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NonFiniteError(
                f"function is not finite at coordinate {i} +/- {h}",
                details={"coordinate": i, "step": h},
            )
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad.reshape(w0.shape)


def finite_diff_second(f: Callable[[np.ndarray], float], x, h: float = FD_SECOND_STEP) -> np.ndarray:
    """Second central differences of ``f`` along each coordinate of ``x``."""
    if h <= 0:
        raise ValidationError("finite-difference step must be positive")
    x0 = np.asarray(x, dtype=np.float64).ravel()
    center = float(f(x0.copy()))
    out = np.empty_like(x0)
    for i in range(x0.size):
        shifted = x0.copy()
        shifted[i] = x0[i] + h
        f_plus = float(f(shifted))
        shifted[i] = x0[i] - h
        f_minus = float(f(shifted))
        out[i] = (f_plus - 2.0 * center + f_minus) / (h * h)
    if not np.all(np.isfinite(out)) or not np.isfinite(center):
        raise NonFiniteError("function is not finite near the evaluation point")
    return out
