"""Closed-form radial integrals and Monte Carlo inner products.

Monte Carlo estimates are accumulated in the log domain: every sample carries
a log scale and a complex mantissa, and a batch is reduced after shifting by
its largest log scale.  The estimate is therefore ``mean * exp(log_scale)``,
which keeps norms of order ``exp(-1e8)`` representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
from scipy import integrate as spi

from .geometry import make_rng
from .proposals import MixtureProposal, proposal_for
from .states import FockState, SectorFunction

BATCH_SIZE = 8192


# closed forms -------------------------------------------------------------


def closed_shell_integral(p: float) -> float:
    """``int 1_{e^{p/2} < |k| < e^p} |k|^{-3} d^3k = 2 pi p``."""
    if not math.isfinite(p):
        raise ValueError("shell weight must be finite")
    if p < 0:
        raise ValueError("shell weight must be non-negative")
    return 2.0 * math.pi * p


def shell_integral_quadrature(p: float) -> float:
    """Independent evaluation of the shell integral.

    For moderate ``p`` the radial integral ``int 4 pi r^{-1} dr`` over
    ``(e^{p/2}, e^p)`` is done adaptively; beyond that it is done in
    ``t = log r`` where the integrand ``4 pi r^3 r^{-3}`` is evaluated in logs.
    """
    if p <= 60.0:
        val, _ = spi.quad(lambda r: 4 * math.pi / r, math.exp(0.5 * p), math.exp(p), epsabs=0.0, epsrel=1e-13, limit=400)
        return float(val)
    x, w = np.polynomial.legendre.leggauss(16)
    a, b = 0.5 * p, p
    t = 0.5 * (b - a) * x + 0.5 * (a + b)
    # measure r^3 dt times integrand r^-3; the exponents cancel before the
    # constant is added so that nothing is absorbed when t is huge
    logvals = math.log(4 * math.pi) + (3 * t - 3 * t)
    return float(0.5 * (b - a) * np.dot(w, np.exp(logvals)))


@dataclass(frozen=True)
class RadialIntegral:
    name: str
    closed_form: float
    quadrature: float
    abs_error: float
    bound: float | None = None

    @property
    def rel_error(self) -> float:
        return abs(self.quadrature - self.closed_form) / abs(self.closed_form)


def reference_radial_integrals() -> dict[str, RadialIntegral]:
    """The three radial integrals behind the norm bounds, by adaptive quadrature.

    * ``k5``: ``int_{|k| >= 1} |k|^{-5} d^3k = 2 pi``
    * ``k4_1``: ``int (k^2 + 1)^{-4} |k|^{-1} d^3k = 2 pi / 3``
    * ``k4_2``: ``int_0^inf 4 pi (k^2 + 1)^{-4} dk = 5 pi^2 / 8``, bounded by ``5 pi``
    """
    kw = dict(epsabs=0.0, epsrel=1e-13, limit=200)
    q1, e1 = spi.quad(lambda k: 4 * math.pi * k**-3, 1.0, np.inf, **kw)
    q2, e2 = spi.quad(lambda k: 4 * math.pi * k * (k * k + 1) ** -4, 0.0, np.inf, **kw)
    q3, e3 = spi.quad(lambda k: 4 * math.pi * (k * k + 1) ** -4, 0.0, np.inf, **kw)
    return {
        "k5": RadialIntegral("k5", 2 * math.pi, q1, e1),
        "k4_1": RadialIntegral("k4_1", 2 * math.pi / 3, q2, e2),
        "k4_2": RadialIntegral("k4_2", 5 * math.pi**2 / 8, q3, e3, bound=5 * math.pi),
    }


def annulus_integral(i: int) -> float:
    """``int_{i <= |k| <= i+1} |k|^{-1} d^3k = 2 pi (2i + 1)``."""
    return 2 * math.pi * (2 * i + 1)


def shell_difference_parts(p: float) -> tuple[float, float]:
    """``(2p, log(2 pi (1 - e^{-p})))`` so that the sum is ``log(2 pi (e^{2p} - e^p))``.

    Keeping the exponent apart preserves the relative accuracy of the
    mantissa when ``2p`` is far larger than one.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    return 2.0 * p, math.log(2 * math.pi) + math.log(-math.expm1(-p))


def log_shell_difference(p: float) -> float:
    """``log(2 pi (e^{2p} - e^p))`` without overflow (``p > 0``)."""
    e, m = shell_difference_parts(p)
    return e + m


# Monte Carlo ---------------------------------------------------------------


@dataclass(frozen=True)
class MCEstimate:
    """``mean * exp(log_scale)`` with standard error ``std_error * exp(log_scale)``."""

    mean: complex
    std_error: float
    n_samples: int
    log_scale: float = 0.0
    coverage_ok: bool = True
    log_resolution: float = 0.0

    # ``log_resolution`` bounds the absolute rounding error of the sample logs.
    # It is negligible for ordinary integrands and becomes large only when
    # photons sit on shells with log-radii near or beyond 2^52.

    @property
    def log_scaled(self) -> bool:
        return self.log_scale != 0.0

    @property
    def value(self) -> complex:
        with np.errstate(over="ignore", under="ignore"):
            return complex(self.mean) * math.exp(self.log_scale) if self.mean != 0 else 0j

    @property
    def se(self) -> float:
        return self.std_error * math.exp(self.log_scale) if self.std_error else 0.0

    @property
    def real(self) -> "MCEstimate":
        return replace(self, mean=complex(self.mean).real)

    @property
    def rel_se(self) -> float:
        m = abs(complex(self.mean))
        return self.std_error / m if m > 0 else (0.0 if self.std_error == 0 else math.inf)

    def log_abs(self) -> float:
        m = abs(complex(self.mean))
        return math.log(m) + self.log_scale if m > 0 else -math.inf

    def rescaled(self, log_scale: float) -> "MCEstimate":
        """Same quantity expressed relative to another log scale."""
        if self.mean == 0 and self.std_error == 0:
            return replace(self, log_scale=log_scale)
        f = math.exp(self.log_scale - log_scale)
        return replace(self, mean=complex(self.mean) * f, std_error=self.std_error * f, log_scale=log_scale)

    def __add__(self, other: "MCEstimate") -> "MCEstimate":
        L = max(self.log_scale if self.mean or self.std_error else -math.inf, other.log_scale if other.mean or other.std_error else -math.inf)
        if not math.isfinite(L):
            L = 0.0
        a, b = self.rescaled(L), other.rescaled(L)
        return MCEstimate(
            complex(a.mean) + complex(b.mean),
            math.hypot(a.std_error, b.std_error),
            a.n_samples + b.n_samples,
            L,
            a.coverage_ok and b.coverage_ok,
            max(a.log_resolution, b.log_resolution),
        )

    def __sub__(self, other: "MCEstimate") -> "MCEstimate":
        return self + replace(other, mean=-complex(other.mean))

    def to_dict(self) -> dict:
        m = complex(self.mean)
        return {
            "mean_re": m.real,
            "mean_im": m.imag,
            "std_error": self.std_error,
            "log_scale": self.log_scale,
            "log_resolution": self.log_resolution,
            "n_samples": self.n_samples,
        }


def log_ratio(num: MCEstimate, den: MCEstimate) -> tuple[float, float]:
    """``(ratio, se)`` of two real estimates, with ratio relative error from both."""
    a, b = complex(num.mean).real, complex(den.mean).real
    if b <= 0:
        return math.nan, math.inf
    if a == 0:
        return 0.0, 0.0 if num.std_error == 0 else num.std_error / b * math.exp(num.log_scale - den.log_scale)
    with np.errstate(over="ignore", under="ignore"):
        ratio = a / b * math.exp(num.log_scale - den.log_scale) if num.log_scale - den.log_scale < 700 else math.inf
    rel = math.hypot(num.std_error / abs(a), den.std_error / b)
    return ratio, abs(ratio) * rel


def _reduce(logc: np.ndarray, mant: np.ndarray, n: int, coverage: bool, logr_abs: np.ndarray | None = None) -> MCEstimate:
    live = mant != 0
    if not live.any():
        return MCEstimate(0.0, 0.0, n, 0.0, coverage)
    L = float(np.max(logc[live]))
    # rounding in a sample's log grows with the size of the logs involved;
    # only samples that can matter at double precision are counted
    scale = np.abs(logc) if logr_abs is None else np.maximum(np.abs(logc), logr_abs)
    r = 64.0 * np.finfo(float).eps * scale
    relevant = live & (logc + r >= L - 40.0)
    res = float(np.max(r[relevant]))
    with np.errstate(under="ignore"):
        c = np.where(live, mant * np.exp(np.where(live, logc - L, 0.0)), 0.0)
    mean = c.sum() / n
    var = (np.abs(c - mean) ** 2).sum() / (n - 1)
    return MCEstimate(complex(mean), float(math.sqrt(var / n)), n, L, coverage, res)


def _batches(n_samples: int, batch_size: int):
    b = 0
    done = 0
    while done < n_samples:
        m = min(batch_size, n_samples - done)
        yield b, m
        b += 1
        done += m


def mc_inner(
    f: SectorFunction,
    g: SectorFunction,
    proposal: MixtureProposal | None = None,
    seed: int = 0,
    n_samples: int = 10_000,
    stream: str = "inner",
    batch_size: int = BATCH_SIZE,
    return_samples: bool = False,
):
    """Importance-sampled ``<f|g> = int conj(f) g``.

    Batch ``b`` draws from the generator keyed by ``(seed, stream, b)``, so the
    sample set does not depend on how batches are scheduled.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    if f.n != g.n:
        raise ValueError("functions live on different sectors")
    if f.is_zero() or g.is_zero():
        est = MCEstimate(0.0, 0.0, n_samples)
        return (est, None) if return_samples else est
    proposal = proposal or proposal_for(f, g)
    logs, mants = [], []
    coverage = True
    logr_abs = []
    for b, m in _batches(n_samples, batch_size):
        rng = make_rng(seed, stream, b)
        x, logq = proposal.sample(rng, m)
        Lf, mf = f.evaluate_log(x)
        Lg, mg = g.evaluate_log(x) if g is not f else (Lf, mf)
        mant = np.conj(mf) * mg
        if x.n:
            logr_abs.append(np.max(np.abs(np.where(np.isfinite(x.logr), x.logr, 0.0)), axis=1))
        else:
            logr_abs.append(np.zeros(x.size))
        bad = ~np.isfinite(logq) & (mant != 0)
        if bad.any():
            coverage = False
            mant = np.where(bad, 0.0, mant)
        logs.append(np.where(np.isfinite(logq), Lf + Lg - logq, -np.inf))
        mants.append(mant)
    logc = np.concatenate(logs)
    mant = np.concatenate(mants)
    est = _reduce(logc, mant, n_samples, coverage, np.concatenate(logr_abs))
    return (est, (logc, mant)) if return_samples else est


def mc_norm_sq(f: SectorFunction, proposal: MixtureProposal | None = None, seed: int = 0, n_samples: int = 10_000, stream: str = "norm") -> MCEstimate:
    """Importance-sampled ``||f||^2``."""
    if f.is_zero():
        return MCEstimate(0.0, 0.0, n_samples)
    proposal = proposal or proposal_for(f)
    return mc_inner(f, f, proposal, seed, n_samples, stream).real


def fock_norm_sq(
    state: FockState,
    proposals: Mapping[int, MixtureProposal] | None = None,
    seed: int = 0,
    n_samples: int = 10_000,
) -> MCEstimate:
    """Sum of the sector norms with errors combined in quadrature."""
    total = MCEstimate(0.0, 0.0, 0)
    for n in state.photon_numbers():
        prop = (proposals or {}).get(n)
        total = total + mc_norm_sq(state.sector(n), prop, seed, n_samples, stream=f"sector{n}")
    return total
