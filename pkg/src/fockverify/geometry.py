"""Momentum-space coordinates.

Photon momenta that live on the doubly exponential shells cannot be stored as
Cartesian doubles, so every photon coordinate is kept log-radially as a unit
direction together with ``log|k|``.  The fermion momentum is kept symbolically:
a finite residual ``q`` plus integer multiples of the photon momenta,

    p = q + sum_i shift[i] * k_i .

Linear combinations of coordinates are evaluated through :meth:`PointBatch.affine`,
which cancels the symbolic parts exactly before touching any huge number.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Beyond this log-radius a Cartesian representation would lose everything that
# matters (and eventually overflow), so a combination that still carries such a
# coordinate after symbolic cancellation is flagged as "huge".
LINEAR_LOG_MAX = 300.0


def make_rng(seed: int, *stream: int | str) -> np.random.Generator:
    """Philox generator keyed by ``seed`` and a tuple of stream identifiers.

    String identifiers are hashed with CRC32 so that stream names are stable
    across interpreter runs.
    """
    keys = [int(seed) & 0xFFFFFFFF]
    for s in stream:
        if isinstance(s, str):
            keys.append(zlib.crc32(s.encode()))
        else:
            keys.append(int(s) & 0xFFFFFFFF)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(keys)))


@dataclass(frozen=True)
class MomentumVector:
    """A Cartesian 3-vector for moderate magnitudes."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def to_log_radial(self) -> "LogRadialVector":
        r = self.norm()
        if r == 0.0:
            return LogRadialVector((1.0, 0.0, 0.0), -math.inf)
        return LogRadialVector((self.x / r, self.y / r, self.z / r), math.log(r))


@dataclass(frozen=True)
class LogRadialVector:
    """A 3-vector stored as a unit direction and the logarithm of its length."""

    direction: tuple[float, float, float]
    logr: float

    def norm(self) -> float:
        return math.exp(self.logr)

    def log_norm(self) -> float:
        return self.logr

    def to_cartesian(self) -> MomentumVector:
        r = math.exp(self.logr)
        d = self.direction
        return MomentumVector(d[0] * r, d[1] * r, d[2] * r)


@dataclass(frozen=True)
class ConfigPoint:
    """One point of the n-photon sector: photons plus a fermion momentum."""

    photons: tuple[LogRadialVector, ...]
    fermion: MomentumVector = MomentumVector(0.0, 0.0, 0.0)

    @property
    def n(self) -> int:
        return len(self.photons)

    @classmethod
    def from_cartesian(cls, photons: Sequence[Sequence[float]], fermion: Sequence[float] = (0.0, 0.0, 0.0)) -> "ConfigPoint":
        ph = tuple(MomentumVector(*map(float, k)).to_log_radial() for k in photons)
        return cls(ph, MomentumVector(*map(float, fermion)))


def norm(v) -> float:
    """Euclidean length of a MomentumVector, LogRadialVector or array."""
    if isinstance(v, (MomentumVector, LogRadialVector)):
        return v.norm()
    return float(np.linalg.norm(np.asarray(v, dtype=float)))


def log_norm(v) -> float:
    """Logarithm of the Euclidean length; the zero vector is rejected."""
    if isinstance(v, LogRadialVector):
        return v.logr
    r = norm(v)
    if r == 0.0:
        raise ValueError("log_norm of the zero vector")
    return math.log(r)


@dataclass
class PointBatch:
    """A batch of ``N`` points of the ``n``-photon sector.

    ``dirs`` has shape (N, n, 3), ``logr`` (N, n), ``q`` (N, 3) and ``shift``
    (N, n) with small integer entries.
    """

    dirs: np.ndarray
    logr: np.ndarray
    q: np.ndarray
    shift: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.logr = np.asarray(self.logr, dtype=float)
        if self.logr.ndim != 2:
            raise ValueError("logr must have shape (N, n)")
        N, n = self.logr.shape
        self.dirs = np.asarray(self.dirs, dtype=float).reshape(N, n, 3)
        self.q = np.asarray(self.q, dtype=float).reshape(N, 3)
        if self.shift is None:
            self.shift = np.zeros((N, n), dtype=np.int64)
        else:
            self.shift = np.asarray(self.shift, dtype=np.int64).reshape(N, n)

    @property
    def size(self) -> int:
        return self.logr.shape[0]

    @property
    def n(self) -> int:
        return self.logr.shape[1]

    def __len__(self) -> int:
        return self.size

    # construction -----------------------------------------------------

    @classmethod
    def empty(cls, n: int) -> "PointBatch":
        return cls(np.zeros((0, n, 3)), np.zeros((0, n)), np.zeros((0, 3)))

    @classmethod
    def from_cartesian(cls, photons: np.ndarray, fermion: np.ndarray) -> "PointBatch":
        """Build from Cartesian arrays of shape (N, n, 3) and (N, 3)."""
        photons = np.asarray(photons, dtype=float)
        N, n = photons.shape[:2]
        r = np.linalg.norm(photons, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            dirs = np.where(r[..., None] > 0, photons / r[..., None], np.array([1.0, 0.0, 0.0]))
            logr = np.log(r)
        return cls(dirs, logr, np.asarray(fermion, dtype=float).reshape(N, 3))

    @classmethod
    def from_points(cls, points: Sequence[ConfigPoint]) -> "PointBatch":
        if not points:
            raise ValueError("need at least one point")
        n = points[0].n
        dirs = np.array([[ph.direction for ph in pt.photons] for pt in points], dtype=float).reshape(len(points), n, 3)
        logr = np.array([[ph.logr for ph in pt.photons] for pt in points], dtype=float).reshape(len(points), n)
        q = np.array([pt.fermion.as_array() for pt in points])
        return cls(dirs, logr, q)

    def point(self, i: int) -> ConfigPoint:
        """Materialise point ``i``; a fermion that is huge after cancellation becomes inf."""
        vec, _ = self.affine(np.zeros(self.n, dtype=np.int64), 1)
        f = vec[i] if np.isfinite(vec[i]).all() else np.full(3, math.inf)
        photons = tuple(LogRadialVector(tuple(self.dirs[i, s]), float(self.logr[i, s])) for s in range(self.n))
        return ConfigPoint(photons, MomentumVector(*f))

    def subset(self, idx) -> "PointBatch":
        return PointBatch(self.dirs[idx], self.logr[idx], self.q[idx], self.shift[idx])

    def repeat(self, k: int) -> "PointBatch":
        """Each point repeated ``k`` times consecutively."""
        return PointBatch(
            np.repeat(self.dirs, k, axis=0),
            np.repeat(self.logr, k, axis=0),
            np.repeat(self.q, k, axis=0),
            np.repeat(self.shift, k, axis=0),
        )

    @staticmethod
    def concat(batches: Sequence["PointBatch"]) -> "PointBatch":
        return PointBatch(
            np.concatenate([b.dirs for b in batches]),
            np.concatenate([b.logr for b in batches]),
            np.concatenate([b.q for b in batches]),
            np.concatenate([b.shift for b in batches]),
        )

    def append_photon(self, dirs: np.ndarray, logr: np.ndarray) -> "PointBatch":
        """Return a batch with one more photon slot at the end (no fermion shift on it)."""
        return PointBatch(
            np.concatenate([self.dirs, np.asarray(dirs).reshape(self.size, 1, 3)], axis=1),
            np.concatenate([self.logr, np.asarray(logr).reshape(self.size, 1)], axis=1),
            self.q,
            np.concatenate([self.shift, np.zeros((self.size, 1), dtype=np.int64)], axis=1),
        )

    def permute(self, order: Sequence[int]) -> "PointBatch":
        """Reorder photon slots: new slot ``s`` holds old slot ``order[s]``."""
        order = list(order)
        return PointBatch(self.dirs[:, order], self.logr[:, order], self.q, self.shift[:, order])

    # linear algebra ---------------------------------------------------

    def photon_cartesian(self) -> np.ndarray:
        """Cartesian photons (N, n, 3); coordinates beyond the linear range become inf."""
        with np.errstate(over="ignore", invalid="ignore"):
            r = np.exp(self.logr)
            out = self.dirs * r[..., None]
        out[np.isneginf(self.logr)] = 0.0
        return out

    def affine(self, photon_coeffs, fermion_coeff: int) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate ``fermion_coeff * p + sum_i photon_coeffs[i] * k_i``.

        Returns ``(vec, log_norm)``.  ``vec`` has shape (N, 3) and is NaN for
        rows where a huge photon survives the symbolic cancellation; for those
        rows ``log_norm`` is the log-radius of the largest surviving photon,
        which is accurate to relative order exp(-gap) between the two largest.
        """
        c = np.asarray(photon_coeffs, dtype=np.int64).reshape(1, self.n)
        net = c + fermion_coeff * self.shift  # (N, n)
        active = net != 0
        finite_r = np.isfinite(self.logr) | np.isneginf(self.logr)
        if not finite_r.all():
            raise ValueError("photon log-radii must be finite or -inf")
        big = active & (self.logr > LINEAR_LOG_MAX)
        huge = big.any(axis=1)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            r = np.where(active & ~big, np.exp(np.minimum(self.logr, LINEAR_LOG_MAX)), 0.0)
            r = np.where(np.isneginf(self.logr), 0.0, r)
            vec = fermion_coeff * self.q + np.einsum("ni,nij->nj", net * r, self.dirs)
            nrm = np.linalg.norm(vec, axis=1)
            lg = np.log(nrm)
        if huge.any():
            lg_huge = np.max(np.where(big, self.logr, -np.inf), axis=1)
            lg = np.where(huge, lg_huge, lg)
            vec = np.where(huge[:, None], np.nan, vec)
        return vec, lg

    def slot_log_norm(self, coeffs, fermion_coeff: int) -> np.ndarray:
        """log-length of a linear combination, with exact shortcut for a bare photon."""
        c = np.asarray(coeffs, dtype=np.int64)
        if fermion_coeff == 0 and np.count_nonzero(c) == 1 and abs(c[np.flatnonzero(c)[0]]) == 1:
            return self.logr[:, int(np.flatnonzero(c)[0])].copy()
        return self.affine(c, fermion_coeff)[1]


# samplers -----------------------------------------------------------------


def random_directions(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform unit vectors with shape ``size + (3,)``."""
    size = (size,) if np.isscalar(size) else tuple(size)
    v = rng.standard_normal(size + (3,))
    nrm = np.linalg.norm(v, axis=-1, keepdims=True)
    nrm[nrm == 0] = 1.0
    return v / nrm


def log_tilted_interval(rng: np.random.Generator, lo, hi, tilt: float, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``t`` on (lo, hi) with density proportional to ``exp(tilt * t)``.

    ``hi`` may be ``+inf`` when ``tilt < 0``.  Returns ``(t, log_density)``.
    """
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (size,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (size,))
    u = rng.random(size)
    t, logd = _tilted_inverse(u, lo, hi, tilt)
    return t, logd


def _tilted_inverse(u, lo, hi, tilt):
    width = hi - lo
    if tilt == 0.0:
        if not np.all(np.isfinite(width)):
            raise ValueError("flat law needs a bounded interval")
        return lo + u * width, -np.log(width)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if tilt < 0:
            # anchored at lo: span is -1 for an infinite tail
            span = np.expm1(tilt * width)
            t = lo + np.log1p(u * span) / tilt
        else:
            # anchored at hi so that wide intervals do not overflow
            span = -np.expm1(-tilt * width)
            t = hi + np.log1p(-u * span) / tilt
    return t, _tilted_log_density(t, lo, hi, tilt)


def _tilted_log_density(t, lo, hi, tilt: float):
    width = hi - lo
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if tilt == 0.0:
            return -np.log(width)
        if tilt < 0:
            logz = np.log(-np.expm1(tilt * width)) - math.log(-tilt)
            return tilt * (t - lo) - logz
        logz = np.log(-np.expm1(-tilt * width)) - math.log(tilt)
        return tilt * (t - hi) - logz


def tilted_log_density(t, lo, hi, tilt: float) -> np.ndarray:
    """Log density of :func:`log_tilted_interval` at ``t`` (``-inf`` outside)."""
    t = np.asarray(t, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), t.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), t.shape)
    out = _tilted_log_density(t, lo, hi, tilt)
    inside = (t > lo) & (t < hi)
    return np.where(inside, out, -np.inf)


def sample_log_shell(rng: np.random.Generator, log_lo, log_hi, size: int, tilt: float = 0.0):
    """Sample photons with ``log|k|`` in (log_lo, log_hi).

    Returns ``(dirs, logr, log_weight)`` where ``exp(log_weight)`` is the
    reciprocal of the proposal density with respect to d^3k.  For the flat law
    this is ``4 pi r^3 (log_hi - log_lo)``.
    """
    if not np.all(np.asarray(log_lo) < np.asarray(log_hi)):
        raise ValueError("sample_log_shell needs log_lo < log_hi")
    t, logd = log_tilted_interval(rng, log_lo, log_hi, tilt, size)
    dirs = random_directions(rng, size)
    logw = math.log(4 * math.pi) + 3 * t - logd
    return dirs, t, logw


def sample_ball(rng: np.random.Generator, radius: float, size: int):
    """Uniform photons in the ball of given radius: ``(dirs, logr, log_weight)``."""
    if not radius > 0:
        raise ValueError("ball radius must be positive")
    u = rng.random(size)
    dirs = random_directions(rng, size)
    with np.errstate(divide="ignore"):
        logr = math.log(radius) + np.log(u) / 3.0
    logw = np.full(size, math.log(4.0 / 3.0 * math.pi * radius**3))
    return dirs, logr, logw
