"""Importance-sampling proposals assembled from the factors of a function.

Every term of a sector function suggests one mixture component: Gaussian
factors become Gaussian laws, cutoffs become ball laws, a shell indicator
becomes a log-radial law on that shell (tilted to follow the radial power of
the integrand), and the fermion is drawn as the argument of its Gaussian, so
that symbolic shifts such as ``p + k_j + k_n`` are sampled exactly.  The
mixture density is evaluated for every point against every component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .geometry import PointBatch, random_directions, tilted_log_density, _tilted_inverse
from .sets import BallProduct, EShell, log1p_sq
from .states import (
    BallCutoff,
    Factor,
    Gaussian,
    IntegratedTerm,
    RadialPower,
    SectorFunction,
    SetIndicator,
    Term,
)

_LOG_4PI = math.log(4 * math.pi)
_SHELL_CAP = 1e300  # shells beyond this are numerically empty; keep the law finite


# one-slot laws ------------------------------------------------------------


class SlotLaw:
    def dependencies(self) -> tuple[int, ...]:
        return getattr(self, "deps", ())

    def sample(self, rng, logr_so_far: np.ndarray, size: int) -> np.ndarray:
        raise NotImplementedError

    def log_density(self, logr_all: np.ndarray, slot: int) -> np.ndarray:
        """Log density with respect to d^3k at the slot's value."""
        raise NotImplementedError


@dataclass(frozen=True)
class GaussLaw(SlotLaw):
    sigma: float

    def sample(self, rng, logr_so_far, size):
        r = np.linalg.norm(rng.standard_normal((size, 3)), axis=1) * self.sigma
        with np.errstate(divide="ignore"):
            return np.log(r)

    def log_density(self, logr_all, slot):
        with np.errstate(over="ignore"):
            r2 = np.exp(2.0 * logr_all[:, slot])
        return -r2 / (2 * self.sigma**2) - 1.5 * math.log(2 * math.pi * self.sigma**2)


@dataclass(frozen=True)
class BallLaw(SlotLaw):
    radius: float

    def sample(self, rng, logr_so_far, size):
        with np.errstate(divide="ignore"):
            return math.log(self.radius) + np.log(rng.random(size)) / 3.0

    def log_density(self, logr_all, slot):
        inside = logr_all[:, slot] < math.log(self.radius)
        return np.where(inside, -math.log(4.0 / 3.0 * math.pi * self.radius**3), -np.inf)


@dataclass(frozen=True)
class HeavyLaw(SlotLaw):
    """Density ``1 / (2 pi |k| (1 + |k|^2)^2)`` (scaled), with tail ``|k|^{-5}``."""

    scale: float = 1.0

    def sample(self, rng, logr_so_far, size):
        u = rng.random(size)
        with np.errstate(divide="ignore"):
            return math.log(self.scale) + 0.5 * (np.log(u) - np.log1p(-u))

    def log_density(self, logr_all, slot):
        t = logr_all[:, slot] - math.log(self.scale)
        return -math.log(2 * math.pi) - t - 2.0 * log1p_sq(t) - 3.0 * math.log(self.scale)


@dataclass(frozen=True)
class ParetoLaw(SlotLaw):
    """Density ``3 r0^3 / (4 pi |k|^6)`` on ``|k| >= r0``."""

    r0: float

    def sample(self, rng, logr_so_far, size):
        return math.log(self.r0) - np.log(rng.random(size)) / 3.0

    def log_density(self, logr_all, slot):
        t = logr_all[:, slot]
        val = math.log(3.0) + 3 * math.log(self.r0) - _LOG_4PI - 6.0 * t
        return np.where(t >= math.log(self.r0), val, -np.inf)


@dataclass(frozen=True)
class ShellLaw(SlotLaw):
    """``log|k|`` on the shell (P/2, P) defined by the dependency slots.

    ``arity`` is the n of the shell, so that ``log P`` includes the ``e^n``
    prefactor even when some arguments are missing.  With ``tail=True`` the
    upper end is dropped (used when a shell argument has been integrated out,
    which can only enlarge ``P``).  ``log_floor`` adds the known minimum of
    ``log P`` contributed by such integrated arguments.
    """

    arity: int
    deps: tuple[int, ...]
    tilt: float
    tail: bool = False
    log_floor: float = 0.0

    def _bounds(self, logr):
        logp = self.arity + self.log_floor + 2.0 * log1p_sq(logr[:, list(self.deps)]).sum(axis=1)
        P = np.exp(np.minimum(logp, math.log(_SHELL_CAP)))
        hi = np.full_like(P, np.inf) if self.tail else P
        return 0.5 * P, hi

    def sample(self, rng, logr_so_far, size):
        lo, hi = self._bounds(logr_so_far)
        t, _ = _tilted_inverse(rng.random(size), lo, hi, self.tilt)
        # far out on a shell the O(1) offset from the lower end is below the
        # float spacing; keep samples strictly inside the open interval
        return np.clip(t, np.nextafter(lo, np.inf), np.nextafter(hi, -np.inf))

    def log_density(self, logr_all, slot):
        lo, hi = self._bounds(logr_all)
        t = logr_all[:, slot]
        return tilted_log_density(t, lo, hi, self.tilt) - _LOG_4PI - 3.0 * t


@dataclass(frozen=True)
class ShellFloorLaw(SlotLaw):
    """``|k| >= r0`` with density proportional to ``exp(-rate * P)`` in ``P``.

    ``P = e^arity prod_deps (1 + |k_d|^2)^2 (1 + |k|^2)^2`` is the shell weight
    this slot feeds.  Once the shell photon is integrated with a decreasing
    law the remaining weight falls off like ``exp(-rate * P)``, which for a
    large floor ``r0`` confines ``|k|`` to a sliver just above ``r0`` that no
    power law resolves.
    """

    arity: int
    deps: tuple[int, ...]
    rate: float
    r0: float

    def _log_a(self, logr):
        return self.arity + 2.0 * log1p_sq(logr[:, list(self.deps)]).sum(axis=1)

    def sample(self, rng, logr_so_far, size):
        with np.errstate(over="ignore"):
            a = np.exp(self._log_a(logr_so_far))
        y = rng.standard_exponential(size) / (self.rate * a)
        c = 1.0 + self.r0**2
        # k^2 - r0^2 = sqrt(c^2 + y) - c, written without cancellation
        with np.errstate(over="ignore", invalid="ignore"):
            k2 = self.r0**2 + y / (np.sqrt(c * c + y) + c)
        return np.maximum(0.5 * np.log(k2), math.log(self.r0))

    def log_density(self, logr_all, slot):
        t = logr_all[:, slot]
        log_a = self._log_a(logr_all)
        with np.errstate(over="ignore", invalid="ignore"):
            k2 = np.exp(2.0 * t)
            y = (k2 - self.r0**2) * (2.0 + k2 + self.r0**2)
            out = math.log(self.rate) + math.log(4.0) + log_a - self.rate * np.exp(log_a) * y + log1p_sq(t) - _LOG_4PI - t
        out = np.where(np.isnan(out), -np.inf, out)
        return np.where(t >= math.log(self.r0), out, -np.inf)


@dataclass(frozen=True)
class FermionLaw:
    """The fermion chosen so that ``p + sum_i coeffs[i] k_i ~ N(0, sigma^2)``."""

    sigma: float
    coeffs: tuple[int, ...]

    def log_density(self, batch: PointBatch) -> np.ndarray:
        vec, _ = batch.affine(self.coeffs, 1)
        huge = np.isnan(vec[:, 0])
        r2 = np.einsum("ij,ij->i", np.nan_to_num(vec), np.nan_to_num(vec))
        out = -r2 / (2 * self.sigma**2) - 1.5 * math.log(2 * math.pi * self.sigma**2)
        return np.where(huge, -np.inf, out)


@dataclass(frozen=True)
class Component:
    laws: tuple[SlotLaw, ...]
    order: tuple[int, ...]
    fermion: FermionLaw

    @property
    def n(self) -> int:
        return len(self.laws)

    def sample(self, rng, size: int) -> PointBatch:
        n = self.n
        logr = np.zeros((size, n))
        for s in self.order:
            logr[:, s] = self.laws[s].sample(rng, logr, size)
        dirs = random_directions(rng, (size, n))
        q = rng.standard_normal((size, 3)) * self.fermion.sigma
        shift = np.tile(-np.asarray(self.fermion.coeffs, dtype=np.int64), (size, 1))
        return PointBatch(dirs, logr, q, shift)

    def log_density(self, batch: PointBatch) -> np.ndarray:
        out = self.fermion.log_density(batch)
        with np.errstate(invalid="ignore"):
            for s, law in enumerate(self.laws):
                out = out + law.log_density(batch.logr, s)
        return np.where(np.isnan(out), -np.inf, out)


@dataclass(frozen=True)
class MixtureProposal:
    components: tuple[Component, ...]

    @property
    def n(self) -> int:
        return self.components[0].n

    def sample(self, rng, size: int) -> tuple[PointBatch, np.ndarray]:
        k = len(self.components)
        counts = rng.multinomial(size, [1.0 / k] * k)
        parts = [c.sample(rng, int(m)) for c, m in zip(self.components, counts) if m > 0]
        batch = PointBatch.concat(parts) if parts else PointBatch.empty(self.n)
        return batch, self.log_density(batch)

    def log_density(self, batch: PointBatch) -> np.ndarray:
        k = len(self.components)
        dens = np.stack([c.log_density(batch) for c in self.components])
        return logsumexp(dens, axis=0) - math.log(k)


# construction from factors --------------------------------------------------


def _radial_power_on(factors: Sequence[Factor], s: int) -> float:
    return sum(f.power for f in factors if isinstance(f, RadialPower) and f.coord.single_slot() == s)


def _lower_radius(factors: Sequence[Factor], s: int) -> float:
    """Largest known lower bound on ``|k_s|`` from single-slot factors."""
    out = 0.0
    for f in factors:
        if isinstance(f, BallCutoff) and f.coord.single_slot() == s:
            out = max(out, f.lo)
        elif isinstance(f, SetIndicator) and isinstance(f.region, BallProduct) and f.complement and f.slot_list == (s,):
            out = max(out, f.region.radius)
    return out


def component_from_factors(factors: Sequence[Factor], n: int, power: float, dropped: int | None = None) -> Component:
    """Build one component on ``n`` slots for the integrand ``prod(factors)^power``.

    ``factors`` may refer to one extra slot ``dropped`` (an integrated photon);
    its influence is removed conservatively (tail shells, wider fermion law).
    """
    laws: list[SlotLaw | None] = [None] * n
    shell_slots: set[int] = set()
    shell_info: dict[int, tuple[int, tuple[int, ...], float]] = {}
    for s in range(n):
        shells = [
            f
            for f in factors
            if isinstance(f, SetIndicator) and isinstance(f.region, EShell) and not f.complement and f.slot_list[-1] == s
        ]
        if shells:
            sh = shells[0]
            tilt = power * _radial_power_on(factors, s) + 3.0
            deps = tuple(d for d in sh.slot_list[:-1] if d != dropped)
            tail = len(deps) < len(sh.slot_list) - 1
            if tail and tilt >= -0.25:
                tilt = -1.0
            floor = 0.0
            if tail and dropped is not None:
                rmin = _lower_radius(factors, dropped)
                if rmin > 0:
                    floor = 2.0 * float(log1p_sq(math.log(rmin)))
            laws[s] = ShellLaw(sh.region.n, deps, tilt, tail, floor)
            shell_slots.add(s)
            if not tail and tilt < 0:
                shell_info[s] = (sh.region.n, deps, tilt)
            continue
        inv = sum(1.0 / f.sigma**2 for f in factors if isinstance(f, Gaussian) and f.coord.single_slot() == s)
        if inv > 0:
            laws[s] = GaussLaw(1.0 / math.sqrt(power * inv))
            continue
        balls = [f.hi for f in factors if isinstance(f, BallCutoff) and f.coord.single_slot() == s and math.isfinite(f.hi)]
        balls += [
            f.region.radius
            for f in factors
            if isinstance(f, SetIndicator) and isinstance(f.region, BallProduct) and not f.complement and s in f.slot_list
        ]
        if balls:
            laws[s] = BallLaw(min(balls))
            continue
        outside = [
            f.region.radius
            for f in factors
            if isinstance(f, SetIndicator) and isinstance(f.region, BallProduct) and f.complement and f.slot_list == (s,)
        ]
        if outside:
            laws[s] = ParetoLaw(max(outside))
            continue
        laws[s] = HeavyLaw(1.0)

    # a floored slot that sets the scale of a decreasing shell law
    for s in range(n):
        if not isinstance(laws[s], ParetoLaw):
            continue
        for arity, deps, tilt in shell_info.values():
            if s in deps:
                laws[s] = ShellFloorLaw(arity, tuple(d for d in deps if d != s), -0.5 * tilt, laws[s].r0)  # type: ignore[union-attr]
                shell_slots.add(s)
                break

    # dependency order: plain laws first, then shells whose inputs are ready
    order = [s for s in range(n) if s not in shell_slots]
    pending = [s for s in range(n) if s in shell_slots]
    while pending:
        ready = [s for s in pending if all(d in order for d in laws[s].dependencies())]  # type: ignore[union-attr]
        if not ready:
            s = pending[0]
            laws[s] = HeavyLaw(1.0)
            ready = [s]
        for s in ready:
            order.append(s)
            pending.remove(s)

    fermion = FermionLaw(1.5, (0,) * n)
    for f in factors:
        if isinstance(f, Gaussian) and f.coord.fermion == 1:
            coeffs = list(f.coord.photon)
            sigma = f.sigma / math.sqrt(power)
            if dropped is not None and len(coeffs) > n:
                if coeffs[dropped] != 0:
                    sigma = 2.0 * sigma + 1.0
                coeffs = [c for i, c in enumerate(coeffs) if i != dropped]
            fermion = FermionLaw(sigma, tuple(coeffs[:n]))
            break
    return Component(tuple(laws), tuple(order), fermion)  # type: ignore[arg-type]


def term_component(t, n: int, power: float = 2.0) -> Component:
    """Component for one term; an integrated term drops its inner photon (slot ``n``)."""
    if isinstance(t, IntegratedTerm):
        return component_from_factors(tuple(t.outer) + tuple(t.integrand.factors), n, power, dropped=n)
    return component_from_factors(tuple(t.factors), n, power)


def proposal_for(f: SectorFunction, g: SectorFunction | None = None, max_components: int = 96) -> MixtureProposal:
    """Mixture proposal for ``|f|^2`` or, with ``g``, for ``f* g``.

    For a pairing the components are the products of plain term pairs plus
    the ``|f|^2`` and ``|g|^2`` components of both functions.
    """
    n = f.n
    comps: list[Component] = []
    seen: set = set()

    def add(c: Component):
        if c not in seen:
            seen.add(c)
            comps.append(c)

    for t in f.terms:
        add(term_component(t, n, 2.0))
    if g is not None:
        if g.n != n:
            raise ValueError("pairing of different sectors")
        for t in g.terms:
            add(term_component(t, n, 2.0))
        for a in f.terms:
            for b in g.terms:
                if isinstance(a, Term) and isinstance(b, Term):
                    add(component_from_factors(a.factors + b.factors, n, 1.0))
    if not comps:
        comps.append(component_from_factors((), n, 2.0))
    if len(comps) > max_components:
        comps = comps[:max_components]
    return MixtureProposal(tuple(comps))
