"""Dense symmetric-matrix kernels: Cholesky, SPD quadratic forms, symmetric root.

All functions operate on plain float64 numpy arrays. The symmetric square
root uses cyclic Jacobi rotations (accurate and simple for the symmetric
matrices up to ~2000x2000 this package needs); the rotation sweep has a
numba kernel and a slice-vectorized numpy fallback.
"""

from __future__ import annotations

import math

import numpy as np

from . import _backend
from .errors import InvalidInput, NotPSD, NotPositiveDefinite

__all__ = ["cholesky", "quad_form_inv", "sym_sqrt", "solve_lower"]

# Pivot threshold: a Cholesky pivot at or below PIVOT_RTOL * trace(S) means the
# sample scale matrix is numerically singular and tail calibration would be
# corrupted by pseudo-inversion, so we refuse instead.
PIVOT_RTOL = 1e-14

# Eigenvalues of a nominally PSD matrix are clamped to zero down to
# -PSD_CLAMP_RTOL * ||S||; anything below is treated as genuinely indefinite.
PSD_CLAMP_RTOL = 1e-10

_JACOBI_TOL_RTOL = 1e-12
_JACOBI_MAX_SWEEPS = 100


def _as_sym_matrix(s, name: str = "matrix") -> np.ndarray:
    a = np.asarray(s, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInput(f"{name} must be a square 2-d array, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise InvalidInput(f"{name} contains non-finite entries")
    scale = np.abs(a).max()
    if np.abs(a - a.T).max() > 1e-12 * max(scale, 1.0):
        raise InvalidInput(f"{name} is not symmetric")
    return a


def cholesky(s) -> np.ndarray:
    """Lower-triangular L with L @ L.T == s for symmetric positive definite s.

    Raises NotPositiveDefinite when a pivot falls at or below
    ``PIVOT_RTOL * trace(s)``, which signals a degenerate sample covariance
    (for example n too small relative to d).
    """
    a = _as_sym_matrix(s)
    dim = a.shape[0]
    tol = PIVOT_RTOL * float(np.trace(a))
    lower = np.zeros_like(a)
    for i in range(dim):
        for j in range(i + 1):
            acc = a[i, j]
            for k in range(j):
                acc -= lower[i, k] * lower[j, k]
            if i == j:
                if acc <= tol:
                    raise NotPositiveDefinite(
                        f"pivot {acc:.3e} at index {i} is not positive (tolerance {tol:.3e})"
                    )
                lower[i, i] = math.sqrt(acc)
            else:
                lower[i, j] = acc / lower[j, j]
    return lower


def solve_lower(lower: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Forward-substitute L w = rhs for lower-triangular L."""
    dim = lower.shape[0]
    w = np.empty(dim)
    for i in range(dim):
        acc = rhs[i]
        for k in range(i):
            acc -= lower[i, k] * w[k]
        w[i] = acc / lower[i, i]
    return w


def quad_form_inv(s, v) -> float:
    """Quadratic form v' S^{-1} v without forming S^{-1}.

    Computed as ||L^{-1} v||^2 from the Cholesky factor, so the result is
    nonnegative by construction.
    """
    a = _as_sym_matrix(s)
    vec = np.asarray(v, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != a.shape[0]:
        raise InvalidInput(
            f"vector length {vec.shape} does not match matrix dimension {a.shape[0]}"
        )
    lower = cholesky(a)
    w = solve_lower(lower, vec)
    return float(np.dot(w, w))


def _jacobi_sweeps_raw(a, v, tol, max_sweeps):
    # Cyclic Jacobi: repeatedly zero a[p, q] with Givens rotations until the
    # off-diagonal Frobenius norm falls below tol. a and v are updated in
    # place; on return a's diagonal holds eigenvalues and v's columns the
    # eigenvectors.
    dim = a.shape[0]
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(dim - 1):
            for q in range(p + 1, dim):
                off += a[p, q] * a[p, q]
        if math.sqrt(2.0 * off) <= tol:
            return True
        for p in range(dim - 1):
            for q in range(p + 1, dim):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s_ = t * c
                for k in range(dim):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s_ * akq
                    a[k, q] = s_ * akp + c * akq
                for k in range(dim):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s_ * aqk
                    a[q, k] = s_ * apk + c * aqk
                for k in range(dim):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s_ * vkq
                    v[k, q] = s_ * vkp + c * vkq
    off = 0.0
    for p in range(dim - 1):
        for q in range(p + 1, dim):
            off += a[p, q] * a[p, q]
    return math.sqrt(2.0 * off) <= tol


_jacobi_sweeps_loop = _backend.jit(_jacobi_sweeps_raw)


def _jacobi_sweeps_numpy(a, v, tol, max_sweeps):
    # Same rotation schedule as the loop kernel, with each rotation applied
    # through vectorized row/column updates.
    dim = a.shape[0]
    for _ in range(max_sweeps):
        off = a - np.diag(np.diag(a))
        if math.sqrt(float((off * off).sum())) <= tol:
            return True
        for p in range(dim - 1):
            for q in range(p + 1, dim):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s_ = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s_ * col_q
                a[:, q] = s_ * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s_ * row_q
                a[q, :] = s_ * row_p + c * row_q
                vcol_p = v[:, p].copy()
                vcol_q = v[:, q].copy()
                v[:, p] = c * vcol_p - s_ * vcol_q
                v[:, q] = s_ * vcol_p + c * vcol_q
    off = a - np.diag(np.diag(a))
    return math.sqrt(float((off * off).sum())) <= tol


def eigh_symmetric(s) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with ``s == v @ diag(w) @ v.T``; eigenvalues are not
    sorted. Convergence is declared when the off-diagonal Frobenius norm
    drops below ``1e-12 * ||s||_F``.
    """
    a = _as_sym_matrix(s).copy()
    dim = a.shape[0]
    v = np.eye(dim)
    fro = math.sqrt(float((a * a).sum()))
    if fro == 0.0:
        return np.zeros(dim), v
    tol = _JACOBI_TOL_RTOL * fro
    if _backend.USE_NUMBA:
        converged = _jacobi_sweeps_loop(a, v, tol, _JACOBI_MAX_SWEEPS)
    else:
        converged = _jacobi_sweeps_numpy(a, v, tol, _JACOBI_MAX_SWEEPS)
    if not converged:
        raise InvalidInput(
            f"Jacobi eigendecomposition did not converge in {_JACOBI_MAX_SWEEPS} sweeps"
        )
    return np.diag(a).copy(), v


def sym_sqrt(s) -> np.ndarray:
    """Symmetric PSD square root R with R @ R == s.

    Eigenvalues in ``[-PSD_CLAMP_RTOL * ||s||, 0)`` are treated as
    floating-point noise and clamped to zero; anything lower raises NotPSD.
    """
    a = _as_sym_matrix(s)
    w, v = eigh_symmetric(a)
    scale = float(np.abs(w).max()) if w.size else 0.0
    floor = -PSD_CLAMP_RTOL * scale
    if w.min(initial=0.0) < floor:
        raise NotPSD(
            f"eigenvalue {w.min():.6e} below the PSD tolerance {floor:.3e}"
        )
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.T
    return 0.5 * (root + root.T)
