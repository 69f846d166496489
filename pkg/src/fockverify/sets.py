"""Momentum-space regions and their membership predicates.

All regions used here depend only on the lengths of the photon momenta, so the
predicates take an array of log-radii with shape (N, k).  The shell weight

    p_n(k_1, ..., k_{n-1}) = e^n * prod_i (|k_i|^2 + 1)^2

is handled through its logarithm; when ``p_n`` itself exceeds the double range
the shell lies beyond every representable log-radius and membership is false.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import make_rng, random_directions, sample_ball

_LOG_DBL_MAX = math.log(np.finfo(float).max)


def log1p_sq(logr: np.ndarray) -> np.ndarray:
    """``log(|k|^2 + 1)`` from ``log|k|``, stable for huge and tiny radii."""
    return np.logaddexp(2.0 * np.asarray(logr, dtype=float), 0.0)


def log_p_n(logr_rest: np.ndarray) -> np.ndarray:
    """``log p_n`` for rows of the (n-1) non-shell log-radii; ``n = k + 1``."""
    logr_rest = np.atleast_2d(np.asarray(logr_rest, dtype=float))
    n = logr_rest.shape[1] + 1
    # summing in sorted order makes the result independent of the slot order
    return n + 2.0 * np.sort(log1p_sq(logr_rest), axis=1).sum(axis=1)


def p_n(logr_rest: np.ndarray) -> np.ndarray:
    """``p_n`` itself; ``inf`` when it overflows."""
    with np.errstate(over="ignore"):
        return np.exp(log_p_n(logr_rest))


def p_n_point(rest_norms: Sequence[float]) -> float:
    """Scalar ``p_n`` from ordinary lengths, for tests and reporting."""
    out = math.exp(len(rest_norms) + 1)
    for r in rest_norms:
        out *= (r * r + 1.0) ** 2
    return out


def shell_bounds(logr_rest: np.ndarray, exponent_scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Open interval of ``log|k_n|`` for the E shell (``p/2``, ``p``) times a scale."""
    p = p_n(logr_rest) * exponent_scale
    return 0.5 * p, p


def in_E(logr: np.ndarray, exponent_scale: float = 1.0) -> np.ndarray:
    """Shell membership with the last column as the shell coordinate."""
    logr = np.atleast_2d(np.asarray(logr, dtype=float))
    lo, hi = shell_bounds(logr[:, :-1], exponent_scale)
    t = logr[:, -1]
    return (lo < t) & (t < hi) & np.isfinite(hi)


def in_F(logr: np.ndarray, exponent_scale: float = 1.0) -> np.ndarray:
    """Membership in the symmetric set F_n for rows of n log-radii.

    F_1 is empty.  For n >= 2 a point belongs to F_n exactly when its unique
    longest photon lies on the shell defined by the others and the others do
    not belong to F_{n-1}.  A tie for the longest photon means no ordering can
    satisfy the strict shell inequality, so the answer is false.
    ``exponent_scale`` perturbs the top-level shell only and exists to build
    deliberately broken predicates for mutation tests.
    """
    logr = np.atleast_2d(np.asarray(logr, dtype=float))
    N, n = logr.shape
    out = np.zeros(N, dtype=bool)
    if n <= 1 or N == 0:
        return out
    imax = np.argmax(logr, axis=1)
    top = logr[np.arange(N), imax]
    unique = (logr == top[:, None]).sum(axis=1) == 1
    keep = np.ones((N, n), dtype=bool)
    keep[np.arange(N), imax] = False
    rest = logr[keep].reshape(N, n - 1)
    shell = in_E(np.column_stack([rest, top]), exponent_scale) & unique
    if shell.any():
        idx = np.flatnonzero(shell)
        out[idx] = ~in_F(rest[idx])
    return out


def in_F_bruteforce(logr_row: Sequence[float]) -> bool:
    """Reference membership for one point by trying every ordering (n <= 4 intended)."""
    return bool(in_F_bruteforce_batch(np.asarray(logr_row, dtype=float)[None, :])[0])


def in_F_bruteforce_batch(logr: np.ndarray) -> np.ndarray:
    """Reference membership straight from the recursive definition.

    A point is in F_n when some ordering puts its last photon on the E shell
    of the others while the others are not in F_{n-1}.  Every ordering is
    tried, so the cost grows like n!.
    """
    logr = np.atleast_2d(np.asarray(logr, dtype=float))
    N, n = logr.shape
    out = np.zeros(N, dtype=bool)
    if n <= 1:
        return out
    for perm in itertools.permutations(range(n)):
        ordered = logr[:, list(perm)]
        out |= in_E(ordered) & ~in_F_bruteforce_batch(ordered[:, :-1])
    return out


# predicate objects used inside indicator factors ---------------------------


@dataclass(frozen=True)
class Region:
    """Base class for regions referenced by indicator factors."""

    def contains(self, logr: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def arity(self) -> int | None:
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class EShell(Region):
    """Shell E_n: last argument on the shell defined by the previous ones."""

    n: int
    exponent_scale: float = 1.0

    @property
    def arity(self) -> int:
        return self.n

    def contains(self, logr):
        return in_E(logr, self.exponent_scale)

    def to_dict(self):
        return {"kind": "E", "n": self.n, "exponent_scale": self.exponent_scale}


@dataclass(frozen=True)
class FSet(Region):
    n: int

    @property
    def arity(self) -> int:
        return self.n

    def contains(self, logr):
        return in_F(logr)

    def to_dict(self):
        return {"kind": "F", "n": self.n}


@dataclass(frozen=True)
class BallProduct(Region):
    """Every argument strictly inside the ball of given radius."""

    radius: float

    def contains(self, logr):
        return np.all(np.asarray(logr) < math.log(self.radius), axis=1)

    def to_dict(self):
        return {"kind": "ball", "radius": self.radius}


@dataclass(frozen=True)
class AnnulusIndex(Region):
    """Product of unit annuli ``i_l <= |k_l| < i_l + 1``."""

    index: tuple[int, ...]

    @property
    def arity(self) -> int:
        return len(self.index)

    def contains(self, logr):
        r = np.exp(np.asarray(logr, dtype=float))
        i = np.asarray(self.index, dtype=float)
        return np.all((r >= i) & (r < i + 1), axis=1)

    def to_dict(self):
        return {"kind": "annulus_index", "index": list(self.index)}


@dataclass(frozen=True)
class EPrime(Region):
    """E'_{N,j}: the arguments reordered with slot ``j`` last lie in E_N."""

    N: int
    j: int

    @property
    def arity(self) -> int:
        return self.N

    def contains(self, logr):
        logr = np.asarray(logr, dtype=float)
        order = [i for i in range(self.N) if i != self.j] + [self.j]
        return in_E(logr[:, order])

    def to_dict(self):
        return {"kind": "E_prime", "N": self.N, "j": self.j}


@dataclass(frozen=True)
class FMax(Region):
    """F_{N,j} = F_N intersected with E'_{N,j}."""

    N: int
    j: int

    @property
    def arity(self) -> int:
        return self.N

    def contains(self, logr):
        return in_F(logr) & EPrime(self.N, self.j).contains(logr)

    def to_dict(self):
        return {"kind": "F_max", "N": self.N, "j": self.j}


def region_from_dict(d: dict) -> Region:
    kind = d["kind"]
    if kind == "E":
        return EShell(int(d["n"]), float(d.get("exponent_scale", 1.0)))
    if kind == "F":
        return FSet(int(d["n"]))
    if kind == "ball":
        return BallProduct(float(d["radius"]))
    if kind == "annulus_index":
        return AnnulusIndex(tuple(int(i) for i in d["index"]))
    if kind == "E_prime":
        return EPrime(int(d["N"]), int(d["j"]))
    if kind == "F_max":
        return FMax(int(d["N"]), int(d["j"]))
    raise ValueError(f"unknown region kind {kind!r}")


def in_E_prime(logr: np.ndarray, j: int) -> np.ndarray:
    logr = np.atleast_2d(logr)
    return EPrime(logr.shape[1], j).contains(logr)


def in_F_max(logr: np.ndarray, j: int) -> np.ndarray:
    logr = np.atleast_2d(logr)
    return FMax(logr.shape[1], j).contains(logr)


def in_X(logr: np.ndarray, index: Sequence[int]) -> np.ndarray:
    return AnnulusIndex(tuple(index)).contains(np.atleast_2d(logr))


def in_ball_product(logr: np.ndarray, radius: float) -> np.ndarray:
    return BallProduct(radius).contains(np.atleast_2d(logr))


# samplers -----------------------------------------------------------------


def sample_F_n(rng: np.random.Generator, n: int, base_radius: float, size: int):
    """Constructive sample of F_n with importance weights.

    The first ``n-1`` photons are uniform in the ball of ``base_radius`` and
    rows that land in F_{n-1} are discarded; the last photon is drawn flat in
    ``log|k|`` over its E shell.  Returns ``(dirs, logr, log_weight)`` with the
    weight relative to d^3k on each photon (discarded rows are removed, so the
    weight refers to the sub-region reachable by this construction).
    """
    if n < 2:
        raise ValueError("F_1 is empty")
    dirs_all, logr_all, logw_all = [], [], []
    got = 0
    while got < size:
        m = max(size - got, 16)
        dirs = np.empty((m, n, 3))
        logr = np.empty((m, n))
        logw = np.zeros(m)
        for s in range(n - 1):
            d, t, w = sample_ball(rng, base_radius, m)
            dirs[:, s], logr[:, s] = d, t
            logw += w
        ok = ~in_F(logr[:, : n - 1])
        lo, hi = shell_bounds(logr[:, : n - 1])
        ok &= np.isfinite(hi)
        lo, hi = np.where(ok, lo, 1.0), np.where(ok, hi, 2.0)
        t = lo + rng.random(m) * (hi - lo)
        dirs[:, n - 1] = random_directions(rng, m)
        logr[:, n - 1] = t
        # flat in t = log|k|, and d^3k = 4 pi e^{3t} dt dOmega / (4 pi)
        logw += math.log(4 * math.pi) + 3 * t + np.log(hi - lo)
        dirs_all.append(dirs[ok])
        logr_all.append(logr[ok])
        logw_all.append(logw[ok])
        got += int(ok.sum())
    dirs = np.concatenate(dirs_all)[:size]
    logr = np.concatenate(logr_all)[:size]
    logw = np.concatenate(logw_all)[:size]
    return dirs, logr, logw


def sample_F_rich(rng: np.random.Generator, n: int, size: int, base_radius: float = 2.0) -> np.ndarray:
    """Log-radii of points in F_n drawn from a nested construction (no weights).

    The non-shell photons are either small or themselves an F_{n-2} point plus
    one extra photon, which reaches the nested corners of F_n that a plain ball
    construction misses.  Rows are randomly permuted since F_n is symmetric.
    """
    if n < 2:
        return np.zeros((0, n))
    rows = []
    got = 0
    while got < size:
        m = max(2 * (size - got), 32)
        rest = _sample_complement_rest(rng, n - 1, m, base_radius)
        lo, hi = shell_bounds(rest)
        ok = np.isfinite(hi) & (hi > 0)
        if not ok.any():
            continue
        rest, lo, hi = rest[ok], lo[ok], hi[ok]
        u = rng.random(len(rest))
        top = lo + u * (hi - lo)
        pts = np.column_stack([rest, top])
        pts = _shuffle_rows(rng, pts)
        good = in_F(pts)
        rows.append(pts[good])
        got += int(good.sum())
    return np.concatenate(rows)[:size]


def _sample_complement_rest(rng, k: int, m: int, base_radius: float) -> np.ndarray:
    """Rows of k log-radii outside F_k, mixing small balls and nested F points."""
    _, small, _ = sample_ball(rng, base_radius, m * k)
    small = small.reshape(m, k)
    if k >= 3:
        nested = sample_F_rich(rng, k - 1, m, base_radius)
        extra = _extra_photon(rng, nested)
        cand = _shuffle_rows(rng, np.column_stack([nested, extra]))
        pick = rng.random(m) < 0.5
        small[pick] = cand[pick]
    return small[~in_F(small)]


def _extra_photon(rng, logr_rest: np.ndarray) -> np.ndarray:
    """Log-radius of an added photon: small, log-uniform, or near the next shell."""
    m = len(logr_rest)
    choice = rng.integers(0, 3, m)
    _, small, _ = sample_ball(rng, 2.0, m)
    top = np.max(logr_rest, axis=1) if logr_rest.shape[1] else np.zeros(m)
    lo, hi = shell_bounds(logr_rest)
    with np.errstate(invalid="ignore", over="ignore"):
        loguni = rng.uniform(-3.0, 1.0, m) * np.maximum(np.abs(top), 1.0)
        near = rng.uniform(0.25, 2.0, m) * np.where(np.isfinite(hi), hi, 1.0)
    return np.where(choice == 0, small, np.where(choice == 1, loguni, near))


def _shuffle_rows(rng, a: np.ndarray) -> np.ndarray:
    keys = rng.random(a.shape)
    order = np.argsort(keys, axis=1)
    return np.take_along_axis(a, order, axis=1)


@dataclass
class WitnessScan:
    n: int
    trials: int
    violations: int
    witnesses: np.ndarray
    mutated_violations: int


def disjointness_witness_scan(seed: int, n: int, trials: int, mutation_scale: float = 0.5) -> WitnessScan:
    """Search for points of (F_{n-1} x R^3) that also lie in F_n.

    Candidate points take an F_{n-1} point from the nested sampler and add one
    photon that is small, log-uniform, or placed near the F_n shell of the
    others.  The same candidates are also tested against a mutated predicate
    whose top-level shell is rescaled by ``mutation_scale``; a sound scan must
    find violations there.
    """
    rng = make_rng(seed, "witness", n)
    base = sample_F_rich(rng, n - 1, trials)
    extra = _extra_photon(rng, base)
    pts = np.column_stack([base, extra])
    hit = in_F(pts)
    mutated = in_F(pts, exponent_scale=mutation_scale)
    return WitnessScan(n, trials, int(hit.sum()), pts[hit][:10], int(mutated.sum()))
