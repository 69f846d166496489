"""Deterministic integration over one photon momentum.

The integration variable is the last photon slot of an integrand term.  The
radial part is done with composite Gauss-Legendre panels in ``t = log|k|`` on
an interval assembled from the factors (cutoffs, shells, Gaussian reach), so
that indicator jumps sit on panel ends wherever a factor can say where they are.

When every factor touching the photon depends on it only through ``|k|``,
except for Gaussians of ``+-k + a``, the angular integral is done in closed
form: the Gaussians combine into one quadratic form and
``int dOmega exp(-r n.b) = 4 pi sinh(r|b|) / (r|b|)``.  Otherwise a product
rule (Gauss-Legendre in cos(theta), uniform in phi) is used.
"""

from __future__ import annotations

import math
import warnings
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .geometry import PointBatch
from .states import Gaussian, QuadratureSpec, Term

_NEAR_WIDTH = 6.0  # log-radius span resolved uniformly below the upper end


class TruncationWarning(UserWarning):
    """An integrand had no factor bounding the integration variable from above."""


@lru_cache(maxsize=None)
def _gl(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def radial_nodes(lo: np.ndarray, hi: np.ndarray, spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-point nodes and weights in ``t`` on (lo, hi), shape (N, Q).

    Half of the panels cover the last ``_NEAR_WIDTH`` units below ``hi``
    uniformly; the rest cover what remains with geometrically growing panels.
    """
    x, w = _gl(spec.radial_order)
    half = max(spec.radial_panels // 2, 1)
    width = np.maximum(hi - lo, 0.0)
    near = np.minimum(width, _NEAR_WIDTH)
    far = width - near
    fr_near = np.linspace(0.0, 1.0, half + 1)
    k = max(spec.radial_panels - half, 1)
    fr_far = (2.0 ** np.arange(k + 1) - 1.0) / (2.0**k - 1.0)
    edges = np.concatenate(
        [hi[:, None] - near[:, None] * fr_near[None, :], (hi - near)[:, None] - far[:, None] * fr_far[None, 1:]],
        axis=1,
    )  # decreasing
    a, b = edges[:, 1:], edges[:, :-1]
    t = a[:, :, None] + (b - a)[:, :, None] * x[None, None, :]
    wt = (b - a)[:, :, None] * w[None, None, :]
    N = len(lo)
    return t.reshape(N, -1), wt.reshape(N, -1)


@lru_cache(maxsize=None)
def angular_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors and weights summing to 4 pi."""
    x, w = np.polynomial.legendre.leggauss(order)
    nphi = 2 * order
    phi = 2 * math.pi * (np.arange(nphi) + 0.5) / nphi
    ct = np.repeat(x, nphi)
    st = np.sqrt(1.0 - ct**2)
    ph = np.tile(phi, order)
    dirs = np.column_stack([st * np.cos(ph), st * np.sin(ph), ct])
    wts = np.repeat(w, nphi) * (2 * math.pi / nphi)
    return dirs, wts


def _log_sinhc(x: np.ndarray) -> np.ndarray:
    """log(sinh(x)/x) for x >= 0."""
    x = np.abs(x)
    small = x < 1e-3
    xs = np.where(small, 1.0, x)
    big = xs - math.log(2.0) + np.log1p(-np.exp(-2.0 * xs)) - np.log(xs)
    return np.where(small, x * x / 6.0, big)


def _involves(f, inner: int) -> bool:
    return inner in f.slots()


def _analytic_angle_ok(f, inner: int) -> bool:
    if isinstance(f, Gaussian):
        return abs(f.coord.photon[inner]) == 1
    return f.radial_only()


def integrate_last_photon(term: Term, outer: PointBatch, spec: QuadratureSpec) -> np.ndarray:
    """Log of ``int prod(term.factors) d^3k`` over the last slot, per outer point.

    The term coefficient is not included.
    """
    n = outer.n
    inner = n
    N = outer.size
    if N == 0:
        return np.zeros(0)
    ext0 = outer.append_photon(np.tile([0.0, 0.0, 1.0], (N, 1)), np.zeros(N))
    fixed = [f for f in term.factors if not _involves(f, inner)]
    moving = [f for f in term.factors if _involves(f, inner)]

    base = np.zeros(N)
    for f in fixed:
        base = base + f.log_value(ext0)

    lo = np.full(N, -np.inf)
    hi = np.full(N, np.inf)
    for f in moving:
        b = f.radial_bounds(ext0, inner)
        if b is not None:
            lo = np.maximum(lo, b[0])
            hi = np.minimum(hi, b[1])
    unbounded = np.isposinf(hi)
    if unbounded.any():
        warnings.warn(
            f"no factor bounds the integration variable; truncating at |k| < {spec.trunc_radius}",
            TruncationWarning,
            stacklevel=3,
        )
    hi = np.where(unbounded, math.log(spec.trunc_radius), hi)
    lo = np.maximum(lo, math.log(spec.r_min))
    live = (hi > lo) & ~np.isneginf(base) & ~np.isnan(base)
    out = np.full(N, -np.inf)
    if not live.any():
        return out
    idx = np.flatnonzero(live)
    analytic = all(_analytic_angle_ok(f, inner) for f in moving)
    res = _integrate(term, moving, outer.subset(idx), ext0.subset(idx), lo[idx], hi[idx], spec, analytic)
    out[idx] = base[idx] + res
    return out


def _integrate(term, moving, outer, ext0, lo, hi, spec, analytic):
    inner = outer.n
    t, wt = radial_nodes(lo, hi, spec)
    N, Q = t.shape
    gauss = [f for f in moving if isinstance(f, Gaussian)] if analytic else []
    radial = [f for f in moving if not (analytic and isinstance(f, Gaussian))]

    if analytic:
        W = 0.0
        bvec = np.zeros((N, 3))
        C = np.zeros(N)
        bad = np.zeros(N, dtype=bool)
        for g in gauss:
            c = g.coord.photon[inner]
            ph = list(g.coord.photon)
            ph[inner] = 0
            vec, _ = ext0.affine(ph, g.coord.fermion)
            bad |= np.isnan(vec[:, 0])
            vec = np.nan_to_num(vec)
            s2 = g.sigma**2
            W += 1.0 / s2
            bvec += c * vec / s2
            C += np.einsum("ij,ij->i", vec, vec) / (2.0 * s2)
        bnorm = np.linalg.norm(bvec, axis=1)
        dirs = np.array([[0.0, 0.0, 1.0]])
        awts = np.array([4 * math.pi])
    else:
        dirs, awts = angular_rule(spec.angular_order)
    A = len(awts)

    out = np.empty(N)
    rows_per_point = Q * A
    step = max(1, spec.chunk // max(rows_per_point, 1))
    for s in range(0, N, step):
        sl = slice(s, min(N, s + step))
        m = sl.stop - sl.start
        tt = t[sl]  # (m, Q)
        sub = outer.subset(np.arange(sl.start, sl.stop))
        rep = sub.repeat(Q * A)
        tl = np.repeat(tt, A, axis=1).reshape(-1)
        dl = np.tile(dirs, (m * Q, 1))
        ext = rep.append_photon(dl, tl)
        logf = np.zeros(m * Q * A)
        with np.errstate(invalid="ignore", over="ignore"):
            for f in radial:
                logf = logf + f.log_value(ext)
            logf = logf.reshape(m, Q, A)
            logf = logf + np.log(awts)[None, None, :]
            logf = logf + (3.0 * tt + np.log(np.maximum(wt[sl], 1e-300)))[:, :, None]
            logf = np.where(wt[sl][:, :, None] > 0, logf, -np.inf)
            if analytic:
                r = np.exp(tt)
                extra = -0.5 * W * r * r - C[sl, None] + _log_sinhc(r * bnorm[sl, None])
                extra = np.where(bad[sl, None], -np.inf, extra)
                logf = logf + extra[:, :, None]
        logf = np.where(np.isnan(logf), -np.inf, logf)
        out[sl] = logsumexp(logf.reshape(m, -1), axis=1)
    return out
