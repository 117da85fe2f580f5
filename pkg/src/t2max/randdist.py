"""Chi-squared tail functions and seeded, reproducible samplers.

Random streams are built on numpy's Philox-4x64 counter-based generator.
The contract is fixed: a stream is keyed by ``(master_seed, stream_id)``
(the two 64-bit Philox key words) with the 256-bit counter starting at
``(counter, 0, 0, 0)``. Identical keys produce identical sequences on any
host and under any thread interleaving, because every consumer builds a
fresh generator from the key. Stream ids for named sub-streams are derived
with :func:`stream_id_for`, a blake2b-based 64-bit hash of tagged parts,
so they are stable across processes (unlike Python's builtin ``hash``).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DomainError, InvalidInput

__all__ = [
    "SeededStream",
    "InnovationLaw",
    "LAW_KINDS",
    "stream_id_for",
    "chisq_sf",
    "chisq_isf",
    "chisq_pdf",
    "log_gamma",
    "normal_two_sided_pvalues",
    "sample",
]

_U64 = 1 << 64


def stream_id_for(*parts) -> int:
    """Derive a stable 64-bit stream id from a sequence of ints and strings."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise InvalidInput(f"stream id parts must be int or str, got {part!r}")
        tag = b"i:" if isinstance(part, int) else b"s:"
        h.update(tag + str(part).encode("utf-8") + b"\x00")
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class SeededStream:
    """Address of one reproducible random stream.

    ``master_seed`` and ``stream_id`` form the Philox key; ``counter`` is
    the starting value of the first 64-bit counter word. Streams with
    distinct ids are statistically independent.
    """

    master_seed: int
    stream_id: int
    counter: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id", "counter"):
            value = getattr(self, name)
            if not isinstance(value, int) or not 0 <= value < _U64:
                raise InvalidInput(f"{name} must be a 64-bit unsigned integer")

    def generator(self) -> np.random.Generator:
        bitgen = np.random.Philox(
            key=np.array([self.master_seed, self.stream_id], dtype=np.uint64),
            counter=np.array([self.counter, 0, 0, 0], dtype=np.uint64),
        )
        return np.random.Generator(bitgen)

    def child(self, *parts) -> "SeededStream":
        """Sub-stream addressed by mixing ``parts`` into this stream's id."""
        return SeededStream(self.master_seed, stream_id_for(self.stream_id, *parts))


# ---------------------------------------------------------------------------
# chi-squared tail machinery
#
# The survival function is the regularized upper incomplete gamma
# Q(d/2, x/2), computed by a lower series for x < d + 2 and a continued
# fraction (modified Lentz) otherwise. Written as a scalar function so the
# same source runs under CPython and under numba.
# ---------------------------------------------------------------------------


def _gamma_q_raw(a: float, s: float) -> float:
    if s <= 0.0:
        return 1.0
    if s < a + 1.0:
        ap = a
        total = 1.0 / a
        term = total
        for _ in range(800):
            ap += 1.0
            term *= s / ap
            total += term
            if abs(term) < abs(total) * 1e-17:
                break
        p = total * math.exp(a * math.log(s) - s - math.lgamma(a))
        q = 1.0 - p
        return q if q > 0.0 else 0.0
    tiny = 1e-300
    b = s + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 800):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    logq = a * math.log(s) - s - math.lgamma(a)
    if logq < -745.0:
        return 0.0
    return math.exp(logq) * h


_gamma_q = _backend.jit(_gamma_q_raw)


def _gamma_q_batch_raw(a, xs, out):
    for i in range(xs.shape[0]):
        out[i] = _gamma_q(a, xs[i])
    return out


_gamma_q_batch_loop = _backend.jit(_gamma_q_batch_raw)


def _check_df(d: int) -> None:
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {d!r}")


def chisq_sf(d: int, x: float) -> float:
    """Upper-tail probability P(chi2(d) >= x)."""
    _check_df(d)
    x = float(x)
    if math.isnan(x) or x < 0.0:
        raise DomainError(f"chisq_sf requires x >= 0, got {x!r}")
    return _gamma_q(0.5 * d, 0.5 * x)


def chisq_sf_many(d: int, xs) -> np.ndarray:
    """Vectorized :func:`chisq_sf` over a 1-d array of quantiles."""
    _check_df(d)
    arr = np.ascontiguousarray(xs, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInput("chisq_sf_many expects a 1-d array")
    if arr.size and (np.isnan(arr).any() or arr.min() < 0.0):
        raise DomainError("chisq_sf_many requires all x >= 0")
    out = np.empty_like(arr)
    if _backend.USE_NUMBA:
        _gamma_q_batch_loop(0.5 * d, 0.5 * arr, out)
    else:
        half = 0.5 * arr
        a = 0.5 * d
        for i in range(arr.size):
            out[i] = _gamma_q_raw(a, half[i])
    return out


def chisq_pdf(d: int, x: float) -> float:
    """Density of chi2(d) at x (0 for x < 0; +inf at 0 when d == 1)."""
    _check_df(d)
    x = float(x)
    if x < 0.0:
        return 0.0
    a = 0.5 * d
    if x == 0.0:
        if d == 1:
            return math.inf
        return 0.5 if d == 2 else 0.0
    return math.exp((a - 1.0) * math.log(x) - 0.5 * x - a * math.log(2.0) - math.lgamma(a))


def chisq_isf(d: int, p: float) -> float:
    """Inverse survival function: x with chisq_sf(d, x) == p, for p in (0, 1]."""
    _check_df(d)
    p = float(p)
    if not 0.0 < p <= 1.0 or math.isnan(p):
        raise DomainError(f"chisq_isf requires p in (0, 1], got {p!r}")
    if p == 1.0:
        return 0.0
    lo, hi = 0.0, float(2 * d + 10)
    while chisq_sf(d, hi) > p:
        hi *= 2.0
        if hi > 1e9:
            raise DomainError(f"chisq_isf failed to bracket p={p!r}")
    x = 0.5 * (lo + hi)
    for _ in range(200):
        f = chisq_sf(d, x) - p
        if f > 0.0:
            lo = x
        else:
            hi = x
        dens = chisq_pdf(d, x)
        if dens > 0.0 and math.isfinite(dens):
            step = f / dens
            x_new = x + step
        else:
            x_new = 0.5 * (lo + hi)
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-13 * (1.0 + x_new):
            x = x_new
            break
        x = x_new
    return x


def log_gamma(z: float) -> float:
    """Natural log of the gamma function for z > 0."""
    z = float(z)
    if not z > 0.0 or math.isnan(z):
        raise DomainError(f"log_gamma requires z > 0, got {z!r}")
    return math.lgamma(z)


def normal_two_sided_pvalues(t) -> np.ndarray:
    """P(|N(0,1)| >= |t|) elementwise, via the chi-squared(1) identity t^2 ~ chi2(1)."""
    arr = np.asarray(t, dtype=np.float64)
    return chisq_sf_many(1, np.square(arr.ravel())).reshape(arr.shape)


# ---------------------------------------------------------------------------
# innovation laws
# ---------------------------------------------------------------------------

LAW_KINDS = ("normal", "t5", "exp1", "gamma22")

_LAW_VARIANCE = {"normal": 1.0, "t5": 5.0 / 3.0, "exp1": 1.0, "gamma22": 8.0}
_LAW_RAW_MEAN = {"normal": 0.0, "t5": 0.0, "exp1": 1.0, "gamma22": 4.0}


@dataclass(frozen=True)
class InnovationLaw:
    """One of the i.i.d. innovation distributions used for data generation.

    ``t5`` is Student t with 5 df, ``exp1`` is exponential with rate 1,
    ``gamma22`` is gamma with shape 2 and scale 2. When ``centered`` the
    theoretical mean is subtracted so draws have mean zero; the variance
    (1, 5/3, 1, 8 respectively) is never rescaled.
    """

    kind: str
    centered: bool = True

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise InvalidInput(f"unknown innovation law {self.kind!r}; expected one of {LAW_KINDS}")

    @property
    def variance(self) -> float:
        return _LAW_VARIANCE[self.kind]

    @property
    def raw_mean(self) -> float:
        return _LAW_RAW_MEAN[self.kind]


def sample(law: InnovationLaw, stream: SeededStream, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. values from ``law``; deterministic given ``stream``.

    Student t(5) is generated as N(0,1)/sqrt(chi2(5)/5), consuming the
    normal block first. Exp(1) and Gamma(2,2) subtract their means (1 and 4)
    when the law is centered.
    """
    if not isinstance(count, (int, np.integer)) or count < 0:
        raise InvalidInput(f"count must be a nonnegative integer, got {count!r}")
    g = stream.generator()
    kind = law.kind
    if kind == "normal":
        values = g.standard_normal(count)
    elif kind == "t5":
        numer = g.standard_normal(count)
        denom = g.chisquare(5, count) if count else np.empty(0)
        values = numer / np.sqrt(denom / 5.0) if count else numer
    elif kind == "exp1":
        values = g.standard_exponential(count)
    else:
        values = g.gamma(2.0, 2.0, count)
    if law.centered and law.raw_mean != 0.0:
        values = values - law.raw_mean
    return values
