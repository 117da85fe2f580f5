"""One- and two-sample Hotelling T-squared statistics and chi-squared p-values.

Sample covariances use the 1/n divisor throughout (not 1/(n-1)); the
Monte-Carlo null tables are built from the same statistic, so the
convention cancels in calibrated tests but must be uniform everywhere.

Besides the single-pair operations there are batch evaluators used by the
calibration and simulation loops: ``t2_batch`` over a stack of replicates
and ``t_batch_1d`` for scalar coordinates. Both have numba and vectorized
numpy implementations selected by the backend flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DimensionMismatch, InvalidInput, NotPositiveDefinite, SingularScale
from .linalg import PIVOT_RTOL, quad_form_inv
from .randdist import chisq_sf

__all__ = [
    "SampleBlock",
    "BlockPair",
    "sample_mean_cov",
    "two_sample_t2",
    "one_sample_t2",
    "univariate_t",
    "chisq_pvalue",
    "t2_batch",
    "t_batch_1d",
]


@dataclass(frozen=True)
class SampleBlock:
    """An (n, d) matrix of observations for one feature block of one group."""

    rows: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.rows, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInput(f"observations must form an (n, d) matrix, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise InvalidInput("observations contain non-finite values")
        object.__setattr__(self, "rows", arr)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class BlockPair:
    """The two groups of observations for one block hypothesis."""

    x: SampleBlock
    y: SampleBlock

    def __post_init__(self):
        if self.x.d != self.y.d:
            raise DimensionMismatch(
                f"group dimensions differ: {self.x.d} vs {self.y.d}"
            )
        if self.x.n < 2 or self.y.n < 2:
            raise InvalidInput("each group needs at least 2 observations")

    @property
    def d(self) -> int:
        return self.x.d


def sample_mean_cov(block: SampleBlock) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and the 1/n-divisor sample covariance (PSD by construction)."""
    rows = block.rows
    mean = rows.mean(axis=0)
    centered = rows - mean
    cov = centered.T @ centered / block.n
    return mean, 0.5 * (cov + cov.T)


def _check_two_sample_sizes(n1: int, n2: int, d: int) -> None:
    if n1 < 2 or n2 < 2 or n1 + n2 < d + 2:
        raise InvalidInput(
            f"need n1, n2 >= 2 and n1 + n2 >= d + 2; got n1={n1}, n2={n2}, d={d}"
        )


def two_sample_t2(pair: BlockPair) -> float:
    """Two-sample statistic (xbar - ybar)' (V1/n1 + V2/n2)^{-1} (xbar - ybar)."""
    n1, n2, d = pair.x.n, pair.y.n, pair.d
    _check_two_sample_sizes(n1, n2, d)
    mx, vx = sample_mean_cov(pair.x)
    my, vy = sample_mean_cov(pair.y)
    pooled = vx / n1 + vy / n2
    try:
        return quad_form_inv(pooled, mx - my)
    except NotPositiveDefinite as exc:
        raise SingularScale(f"pooled scale matrix is singular: {exc}") from exc


def one_sample_t2(block: SampleBlock, mu0) -> float:
    """One-sample statistic n (xbar - mu0)' V^{-1} (xbar - mu0)."""
    mu0 = np.asarray(mu0, dtype=np.float64)
    if mu0.shape != (block.d,):
        raise InvalidInput(f"mu0 must have length {block.d}, got shape {mu0.shape}")
    if block.n < 2:
        raise InvalidInput("need at least 2 observations")
    mean, cov = sample_mean_cov(block)
    try:
        return block.n * quad_form_inv(cov, mean - mu0)
    except NotPositiveDefinite as exc:
        raise SingularScale(f"sample covariance is singular: {exc}") from exc


def univariate_t(pair: BlockPair) -> float:
    """Signed two-sample t for d == 1; its square equals two_sample_t2."""
    if pair.d != 1:
        raise DimensionMismatch(f"univariate_t requires d == 1, got d={pair.d}")
    n1, n2 = pair.x.n, pair.y.n
    _check_two_sample_sizes(n1, n2, 1)
    x = pair.x.rows[:, 0]
    y = pair.y.rows[:, 0]
    mx = x.mean()
    my = y.mean()
    vx = float(np.mean((x - mx) ** 2))
    vy = float(np.mean((y - my) ** 2))
    scale = vx / n1 + vy / n2
    if scale <= 0.0:
        raise SingularScale("pooled scale is zero; both groups are constant")
    return float((mx - my) / math.sqrt(scale))


def chisq_pvalue(t2: float, d: int) -> float:
    """Chi-squared estimated p-value P(chi2(d) >= t2)."""
    return chisq_sf(d, t2)


# ---------------------------------------------------------------------------
# batch evaluators
# ---------------------------------------------------------------------------


def _t2_batch_raw(xs, ys, out):
    # xs (R, n1, d), ys (R, n2, d) -> out (R,); NaN marks a singular pooled
    # scale (pivot <= PIVOT_RTOL * trace).
    reps, n1, d = xs.shape
    n2 = ys.shape[1]
    mx = np.empty(d)
    my = np.empty(d)
    scale = np.empty((d, d))
    lower = np.empty((d, d))
    w = np.empty(d)
    for r in range(reps):
        for j in range(d):
            acc = 0.0
            for k in range(n1):
                acc += xs[r, k, j]
            mx[j] = acc / n1
        for j in range(d):
            acc = 0.0
            for k in range(n2):
                acc += ys[r, k, j]
            my[j] = acc / n2
        for i in range(d):
            for j in range(i + 1):
                accx = 0.0
                for k in range(n1):
                    accx += (xs[r, k, i] - mx[i]) * (xs[r, k, j] - mx[j])
                accy = 0.0
                for k in range(n2):
                    accy += (ys[r, k, i] - my[i]) * (ys[r, k, j] - my[j])
                scale[i, j] = accx / (n1 * n1) + accy / (n2 * n2)
        trace = 0.0
        for i in range(d):
            trace += scale[i, i]
        tol = PIVOT_RTOL * trace
        ok = True
        for i in range(d):
            if not ok:
                break
            for j in range(i + 1):
                acc = scale[i, j]
                for k in range(j):
                    acc -= lower[i, k] * lower[j, k]
                if i == j:
                    if acc <= tol:
                        ok = False
                        break
                    lower[i, i] = math.sqrt(acc)
                else:
                    lower[i, j] = acc / lower[j, j]
        if not ok:
            out[r] = np.nan
            continue
        for i in range(d):
            acc = mx[i] - my[i]
            for k in range(i):
                acc -= lower[i, k] * w[k]
            w[i] = acc / lower[i, i]
        t2 = 0.0
        for i in range(d):
            t2 += w[i] * w[i]
        out[r] = t2
    return out


_t2_batch_loop = _backend.jit(_t2_batch_raw)


def _batched_quad_form_numpy(scale: np.ndarray, diff: np.ndarray) -> np.ndarray:
    reps, d, _ = scale.shape
    tol = PIVOT_RTOL * np.trace(scale, axis1=1, axis2=2)
    lower = np.zeros_like(scale)
    ok = np.ones(reps, dtype=bool)
    for i in range(d):
        for j in range(i + 1):
            acc = scale[:, i, j].copy()
            for k in range(j):
                acc -= lower[:, i, k] * lower[:, j, k]
            if i == j:
                bad = acc <= tol
                ok &= ~bad
                lower[:, i, i] = np.sqrt(np.where(bad, 1.0, acc))
            else:
                lower[:, i, j] = acc / lower[:, j, j]
    w = np.zeros((reps, d))
    for i in range(d):
        acc = diff[:, i].copy()
        for k in range(i):
            acc -= lower[:, i, k] * w[:, k]
        w[:, i] = acc / lower[:, i, i]
    out = np.einsum("ri,ri->r", w, w)
    out[~ok] = np.nan
    return out


def _t2_batch_numpy(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    n1 = xs.shape[1]
    n2 = ys.shape[1]
    mx = xs.mean(axis=1)
    my = ys.mean(axis=1)
    xc = xs - mx[:, None, :]
    yc = ys - my[:, None, :]
    scale = np.einsum("rki,rkj->rij", xc, xc) / (n1 * n1)
    scale += np.einsum("rki,rkj->rij", yc, yc) / (n2 * n2)
    return _batched_quad_form_numpy(scale, mx - my)


def t2_batch(xs, ys) -> np.ndarray:
    """Two-sample T-squared for a stack of replicates.

    ``xs`` has shape (R, n1, d) and ``ys`` shape (R, n2, d); returns the
    (R,) statistics with NaN where the pooled scale was singular.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.ndim != 3 or ys.ndim != 3 or xs.shape[0] != ys.shape[0] or xs.shape[2] != ys.shape[2]:
        raise InvalidInput(
            f"expected shapes (R, n1, d) and (R, n2, d), got {xs.shape} and {ys.shape}"
        )
    _check_two_sample_sizes(xs.shape[1], ys.shape[1], xs.shape[2])
    if _backend.USE_NUMBA:
        out = np.empty(xs.shape[0])
        return _t2_batch_loop(xs, ys, out)
    return _t2_batch_numpy(xs, ys)


def _t_batch_1d_raw(x, y, out):
    # x (R, n1), y (R, n2) -> signed t per row; NaN where pooled scale <= 0.
    reps, n1 = x.shape
    n2 = y.shape[1]
    for r in range(reps):
        sx = 0.0
        for k in range(n1):
            sx += x[r, k]
        mx = sx / n1
        sy = 0.0
        for k in range(n2):
            sy += y[r, k]
        my = sy / n2
        vx = 0.0
        for k in range(n1):
            diff = x[r, k] - mx
            vx += diff * diff
        vx /= n1
        vy = 0.0
        for k in range(n2):
            diff = y[r, k] - my
            vy += diff * diff
        vy /= n2
        scale = vx / n1 + vy / n2
        if scale <= 0.0:
            out[r] = np.nan
        else:
            out[r] = (mx - my) / math.sqrt(scale)
    return out


_t_batch_1d_loop = _backend.jit(_t_batch_1d_raw)


def _t_batch_1d_numpy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    n1 = x.shape[1]
    n2 = y.shape[1]
    mx = x.mean(axis=1)
    my = y.mean(axis=1)
    vx = np.mean((x - mx[:, None]) ** 2, axis=1)
    vy = np.mean((y - my[:, None]) ** 2, axis=1)
    scale = vx / n1 + vy / n2
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (mx - my) / np.sqrt(scale)
    t[scale <= 0.0] = np.nan
    return t


def t_batch_1d(x, y) -> np.ndarray:
    """Signed univariate two-sample t over a stack of scalar coordinates.

    ``x`` has shape (R, n1) and ``y`` shape (R, n2); squared values match
    ``t2_batch`` at d == 1.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise InvalidInput(f"expected shapes (R, n1) and (R, n2), got {x.shape} and {y.shape}")
    _check_two_sample_sizes(x.shape[1], y.shape[1], 1)
    if _backend.USE_NUMBA:
        out = np.empty(x.shape[0])
        return _t_batch_1d_loop(x, y, out)
    return _t_batch_1d_numpy(x, y)
