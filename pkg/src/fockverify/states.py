"""Symbolic Fock-space states.

A sector function is a finite sum of terms.  Each term is a complex
coefficient times a product of non-negative factors (Gaussians, radial powers,
indicators, powers of the shell weight), so it is evaluated in the log domain
and only the final combination of terms is done with complex mantissas.  Terms
produced by the annihilation operator carry an unevaluated integral over one
photon and are represented by :class:`IntegratedTerm`.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .geometry import PointBatch
from .sets import BallProduct, EShell, Region, log1p_sq, log_p_n, region_from_dict

MAX_SYMMETRIZE_N = 6


# coordinates --------------------------------------------------------------


@dataclass(frozen=True)
class CoordMap:
    """The vector ``fermion * p + sum_s photon[s] * k_s``."""

    photon: tuple[int, ...]
    fermion: int = 0

    @classmethod
    def slot(cls, s: int, n: int) -> "CoordMap":
        c = [0] * n
        c[s] = 1
        return cls(tuple(c), 0)

    @classmethod
    def fermion_only(cls, n: int) -> "CoordMap":
        return cls((0,) * n, 1)

    def single_slot(self) -> int | None:
        if self.fermion != 0:
            return None
        nz = [s for s, c in enumerate(self.photon) if c != 0]
        if len(nz) == 1 and abs(self.photon[nz[0]]) == 1:
            return nz[0]
        return None

    def slots(self) -> frozenset[int]:
        return frozenset(s for s, c in enumerate(self.photon) if c != 0)

    def remap(self, sm: "SlotMap") -> "CoordMap":
        new = [0] * sm.n_new
        for s, c in enumerate(self.photon):
            if c:
                t = sm.target[s]
                if t < 0:
                    raise ValueError("coordinate refers to a dropped slot")
                new[t] += c
        if self.fermion:
            for i, a in enumerate(sm.fermion_shift):
                new[i] += self.fermion * a
        return CoordMap(tuple(new), self.fermion)

    def log_norm(self, batch: PointBatch) -> np.ndarray:
        return batch.slot_log_norm(self.photon, self.fermion)

    def vector(self, batch: PointBatch) -> tuple[np.ndarray, np.ndarray]:
        return batch.affine(self.photon, self.fermion)

    def to_list(self) -> list:
        return [list(self.photon), self.fermion]

    @classmethod
    def from_list(cls, v) -> "CoordMap":
        return cls(tuple(int(c) for c in v[0]), int(v[1]))


@dataclass(frozen=True)
class SlotMap:
    """Change of variables between sectors.

    Old photon slot ``s`` moves to new slot ``target[s]`` (``-1`` drops it, which
    is only legal when nothing refers to it) and the old fermion momentum is
    replaced by ``p + sum_i fermion_shift[i] * k_i`` in the new variables.
    """

    target: tuple[int, ...]
    n_new: int
    fermion_shift: tuple[int, ...]

    @classmethod
    def permutation(cls, target: Sequence[int]) -> "SlotMap":
        return cls(tuple(target), len(target), (0,) * len(target))

    def map_slots(self, slots: Sequence[int]) -> tuple[int, ...]:
        out = tuple(self.target[s] for s in slots)
        if any(t < 0 for t in out):
            raise ValueError("indicator refers to a dropped slot")
        return out


# factors ------------------------------------------------------------------

_GAUSS_CUT = 40.0  # exp(-40) is negligible against any retained contribution


class Factor:
    """A non-negative function of a sector point, evaluated as its logarithm."""

    def log_value(self, batch: PointBatch) -> np.ndarray:
        raise NotImplementedError

    def slots(self) -> frozenset[int]:
        """Photon slots the factor depends on."""
        raise NotImplementedError

    def uses_fermion(self) -> bool:
        return False

    def radial_only(self) -> bool:
        """True if the dependence on each photon slot is through its length only."""
        return True

    def remap(self, sm: SlotMap) -> "Factor":
        raise NotImplementedError

    def radial_bounds(self, ext: PointBatch, inner: int):
        """Bounds ``(lo, hi)`` on ``log|k_inner|`` outside which the factor vanishes."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Gaussian(Factor):
    """``exp(-|x|^2 / (2 sigma^2))`` of a linear coordinate (unnormalised)."""

    sigma: float
    coord: CoordMap

    def log_value(self, batch):
        s = self.coord.single_slot()
        with np.errstate(over="ignore"):
            if s is not None:
                r2 = np.exp(2.0 * batch.logr[:, s])
            else:
                vec, lg = self.coord.vector(batch)
                r2 = np.where(np.isnan(vec[:, 0]), np.inf, np.einsum("ij,ij->i", np.nan_to_num(vec), np.nan_to_num(vec)))
        return -r2 / (2.0 * self.sigma**2)

    def slots(self):
        return self.coord.slots()

    def uses_fermion(self):
        return self.coord.fermion != 0

    def radial_only(self):
        return self.coord.single_slot() is not None

    def remap(self, sm):
        return Gaussian(self.sigma, self.coord.remap(sm))

    def radial_bounds(self, ext, inner):
        c = self.coord.photon[inner]
        if c == 0:
            return None
        reach = self.sigma * math.sqrt(2.0 * _GAUSS_CUT)
        if self.coord.single_slot() == inner:
            return np.full(ext.size, -np.inf), np.full(ext.size, math.log(reach))
        if abs(c) != 1:
            return None
        ph = list(self.coord.photon)
        ph[inner] = 0
        vec, lg = ext.affine(ph, self.coord.fermion)
        huge = np.isnan(vec[:, 0])
        a = np.where(huge, 0.0, np.exp(np.where(huge, 0.0, lg)))
        with np.errstate(divide="ignore"):
            lo = np.where(a > reach, np.log(np.maximum(a - reach, 1e-300)), -np.inf)
            hi = np.log(a + reach)
        lo = np.where(huge, np.inf, lo)
        hi = np.where(huge, -np.inf, hi)
        return lo, hi

    def to_dict(self):
        return {"type": "gaussian", "sigma": self.sigma, "coord": self.coord.to_list()}


@dataclass(frozen=True)
class RadialPower(Factor):
    """``|x|^power`` of a linear coordinate."""

    power: float
    coord: CoordMap

    def log_value(self, batch):
        with np.errstate(invalid="ignore"):
            return self.power * self.coord.log_norm(batch)

    def slots(self):
        return self.coord.slots()

    def uses_fermion(self):
        return self.coord.fermion != 0

    def radial_only(self):
        return self.coord.single_slot() is not None

    def remap(self, sm):
        return RadialPower(self.power, self.coord.remap(sm))

    def to_dict(self):
        return {"type": "radial_power", "power": self.power, "coord": self.coord.to_list()}


@dataclass(frozen=True)
class BallCutoff(Factor):
    """Indicator of ``lo <= |x| < hi`` for a linear coordinate."""

    lo: float
    hi: float
    coord: CoordMap

    def log_value(self, batch):
        lg = self.coord.log_norm(batch)
        ok = lg < math.log(self.hi) if math.isfinite(self.hi) else np.ones_like(lg, dtype=bool)
        if self.lo > 0:
            ok &= lg >= math.log(self.lo)
        return np.where(ok, 0.0, -np.inf)

    def slots(self):
        return self.coord.slots()

    def uses_fermion(self):
        return self.coord.fermion != 0

    def radial_only(self):
        return self.coord.single_slot() is not None

    def remap(self, sm):
        return BallCutoff(self.lo, self.hi, self.coord.remap(sm))

    def radial_bounds(self, ext, inner):
        if self.coord.single_slot() != inner:
            return None
        lo = math.log(self.lo) if self.lo > 0 else -math.inf
        hi = math.log(self.hi) if math.isfinite(self.hi) else math.inf
        return np.full(ext.size, lo), np.full(ext.size, hi)

    def to_dict(self):
        return {"type": "ball_cutoff", "lo": self.lo, "hi": self.hi, "coord": self.coord.to_list()}


@dataclass(frozen=True)
class SetIndicator(Factor):
    """Indicator of a region evaluated on the lengths of the listed photon slots."""

    region: Region
    slot_list: tuple[int, ...]
    complement: bool = False

    def log_value(self, batch):
        inside = self.region.contains(batch.logr[:, list(self.slot_list)])
        if self.complement:
            inside = ~inside
        return np.where(inside, 0.0, -np.inf)

    def slots(self):
        return frozenset(self.slot_list)

    def remap(self, sm):
        return SetIndicator(self.region, sm.map_slots(self.slot_list), self.complement)

    def radial_bounds(self, ext, inner):
        if inner not in self.slot_list:
            return None
        reg = self.region
        pos = self.slot_list.index(inner)
        others = [s for s in self.slot_list if s != inner]
        if isinstance(reg, EShell) and not self.complement and reg.exponent_scale == 1.0:
            if pos == len(self.slot_list) - 1:
                with np.errstate(over="ignore"):
                    p = np.exp(log_p_n(ext.logr[:, others]))
                return 0.5 * p, p
            # shell coordinate known; solve for the allowed (|k|^2 + 1)^2 range
            last = self.slot_list[-1]
            rest = [s for s in self.slot_list[:-1] if s != inner]
            t = ext.logr[:, last]
            with np.errstate(divide="ignore", invalid="ignore"):
                logt = np.log(t)
                base = len(self.slot_list) + 2.0 * log1p_sq(ext.logr[:, rest]).sum(axis=1)
                a_lo = 0.5 * (logt - base)
                a_hi = 0.5 * (logt + math.log(2.0) - base)
                lo = np.where(a_lo > 0, 0.5 * np.log(np.expm1(np.maximum(a_lo, 1e-300))), -np.inf)
                hi = np.where(a_hi > 0, 0.5 * np.log(np.expm1(np.maximum(a_hi, 1e-300))), -np.inf)
            bad = ~(t > 0)
            return np.where(bad, np.inf, lo), np.where(bad, -np.inf, hi)
        if isinstance(reg, BallProduct):
            R = math.log(reg.radius)
            if not self.complement:
                return np.full(ext.size, -np.inf), np.full(ext.size, R)
            all_in = np.all(ext.logr[:, others] < R, axis=1) if others else np.ones(ext.size, bool)
            return np.where(all_in, R, -np.inf), np.full(ext.size, np.inf)
        return None

    def to_dict(self):
        return {"type": "set", "region": self.region.to_dict(), "slots": list(self.slot_list), "complement": self.complement}


@dataclass(frozen=True)
class PnPower(Factor):
    """``p_n(k_slots)^power`` where ``n = len(slots) + 1``."""

    power: float
    slot_list: tuple[int, ...]

    def log_value(self, batch):
        return self.power * log_p_n(batch.logr[:, list(self.slot_list)])

    def slots(self):
        return frozenset(self.slot_list)

    def remap(self, sm):
        return PnPower(self.power, sm.map_slots(self.slot_list))

    def to_dict(self):
        return {"type": "pn_power", "power": self.power, "slots": list(self.slot_list)}


@dataclass(frozen=True)
class KineticSum(Factor):
    """``sum_i |x_i|`` over a list of coordinates (the free energy)."""

    coords: tuple[CoordMap, ...]

    def log_value(self, batch):
        logs = np.stack([c.log_norm(batch) for c in self.coords])
        from scipy.special import logsumexp

        return logsumexp(logs, axis=0)

    def slots(self):
        out: frozenset[int] = frozenset()
        for c in self.coords:
            out |= c.slots()
        return out

    def uses_fermion(self):
        return any(c.fermion for c in self.coords)

    def radial_only(self):
        return False

    def remap(self, sm):
        return KineticSum(tuple(c.remap(sm) for c in self.coords))

    def to_dict(self):
        return {"type": "kinetic", "coords": [c.to_list() for c in self.coords]}


def factor_from_dict(d: dict) -> Factor:
    t = d["type"]
    if t == "gaussian":
        return Gaussian(float(d["sigma"]), CoordMap.from_list(d["coord"]))
    if t == "radial_power":
        return RadialPower(float(d["power"]), CoordMap.from_list(d["coord"]))
    if t == "ball_cutoff":
        return BallCutoff(float(d["lo"]), float(d["hi"]), CoordMap.from_list(d["coord"]))
    if t == "set":
        return SetIndicator(region_from_dict(d["region"]), tuple(int(s) for s in d["slots"]), bool(d["complement"]))
    if t == "pn_power":
        return PnPower(float(d["power"]), tuple(int(s) for s in d["slots"]))
    if t == "kinetic":
        return KineticSum(tuple(CoordMap.from_list(c) for c in d["coords"]))
    raise ValueError(f"unknown factor type {t!r}")


def _factor_key(f: Factor) -> str:
    return json.dumps(f.to_dict(), sort_keys=True)


def canonical_factors(factors: Iterable[Factor]) -> tuple[Factor, ...]:
    """Merge radial powers of the same coordinate and shell-weight powers of the
    same slot set, drop trivial ones, and sort into a canonical order."""
    radial: dict[CoordMap, float] = {}
    pn: dict[frozenset, tuple[tuple[int, ...], float]] = {}
    rest: list[Factor] = []
    for f in factors:
        if isinstance(f, RadialPower):
            radial[f.coord] = radial.get(f.coord, 0.0) + f.power
        elif isinstance(f, PnPower):
            key = frozenset(f.slot_list)
            slots, pw = pn.get(key, (tuple(sorted(f.slot_list)), 0.0))
            pn[key] = (slots, pw + f.power)
        else:
            rest.append(f)
    out = list(rest)
    out += [RadialPower(p, c) for c, p in radial.items() if p != 0.0]
    out += [PnPower(p, s) for s, p in pn.values() if p != 0.0]
    return tuple(sorted(out, key=_factor_key))


# terms --------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    """Settings for the one-photon integrals inside :class:`IntegratedTerm`."""

    radial_panels: int = 12
    radial_order: int = 20
    angular_order: int = 12
    trunc_radius: float = 16.0
    r_min: float = 1e-12
    chunk: int = 400_000

    def to_dict(self) -> dict:
        return {
            "radial_panels": self.radial_panels,
            "radial_order": self.radial_order,
            "angular_order": self.angular_order,
            "trunc_radius": self.trunc_radius,
            "r_min": self.r_min,
        }


@dataclass(frozen=True)
class Term:
    """``coefficient * prod(factors)`` on one sector."""

    coefficient: complex
    factors: tuple[Factor, ...]
    label: tuple[int, ...] = ()

    def log_value(self, batch: PointBatch) -> np.ndarray:
        out = np.zeros(batch.size)
        with np.errstate(invalid="ignore"):
            for f in self.factors:
                out = out + f.log_value(batch)
                if np.all(np.isneginf(out)):
                    break
        return np.where(np.isnan(out), -np.inf, out)

    def remap(self, sm: SlotMap) -> "Term":
        return Term(self.coefficient, canonical_factors(f.remap(sm) for f in self.factors), self.label)

    def scaled(self, c: complex) -> "Term":
        return replace(self, coefficient=self.coefficient * c)

    def times(self, *factors: Factor) -> "Term":
        return Term(self.coefficient, canonical_factors(self.factors + tuple(factors)), self.label)

    def with_label(self, label: tuple[int, ...]) -> "Term":
        return replace(self, label=label)

    def shape_key(self) -> str:
        return "T" + json.dumps([f.to_dict() for f in self.factors], sort_keys=True)

    def to_dict(self) -> dict:
        c = complex(self.coefficient)
        return {"kind": "term", "coefficient": [c.real, c.imag], "label": list(self.label), "factors": [f.to_dict() for f in self.factors]}


@dataclass(frozen=True)
class IntegratedTerm:
    """``coefficient * prod(outer) * integral of integrand over the last photon``.

    The integrand lives on the sector with one more photon than the term; its
    last slot is the integration variable.
    """

    coefficient: complex
    integrand: Term
    outer: tuple[Factor, ...] = ()
    label: tuple[int, ...] = ()
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def log_value(self, batch: PointBatch) -> np.ndarray:
        from .quadrature import integrate_last_photon

        out = np.zeros(batch.size)
        for f in self.outer:
            out = out + f.log_value(batch)
        live = ~np.isneginf(out)
        if live.any():
            idx = np.flatnonzero(live)
            inner = integrate_last_photon(self.integrand, batch.subset(idx), self.quad)
            out[idx] = out[idx] + inner
        return np.where(np.isnan(out), -np.inf, out)

    def remap(self, sm: SlotMap) -> "IntegratedTerm":
        inner = sm.n_new
        ext = SlotMap(sm.target + (inner,), sm.n_new + 1, sm.fermion_shift + (0,))
        return IntegratedTerm(
            self.coefficient,
            self.integrand.remap(ext),
            canonical_factors(f.remap(sm) for f in self.outer),
            self.label,
            self.quad,
        )

    def scaled(self, c: complex) -> "IntegratedTerm":
        return replace(self, coefficient=self.coefficient * c)

    def times(self, *factors: Factor) -> "IntegratedTerm":
        return replace(self, outer=canonical_factors(self.outer + tuple(factors)))

    def with_label(self, label):
        return replace(self, label=label)

    def shape_key(self) -> str:
        return "I" + json.dumps(
            {"outer": [f.to_dict() for f in self.outer], "inner": self.integrand.to_dict()["factors"], "c": [complex(self.integrand.coefficient).real, complex(self.integrand.coefficient).imag]},
            sort_keys=True,
        )

    def to_dict(self) -> dict:
        c = complex(self.coefficient)
        return {
            "kind": "integrated",
            "coefficient": [c.real, c.imag],
            "label": list(self.label),
            "outer": [f.to_dict() for f in self.outer],
            "integrand": self.integrand.to_dict(),
            "quad": self.quad.to_dict(),
        }


AnyTerm = Term | IntegratedTerm


def effective_coefficient(t: AnyTerm) -> complex:
    """Overall complex prefactor, including that of an integrand."""
    if isinstance(t, IntegratedTerm):
        return complex(t.coefficient) * complex(t.integrand.coefficient)
    return complex(t.coefficient)


def term_from_dict(d: dict) -> AnyTerm:
    c = complex(d["coefficient"][0], d["coefficient"][1])
    label = tuple(int(x) for x in d.get("label", []))
    if d["kind"] == "term":
        return Term(c, tuple(factor_from_dict(f) for f in d["factors"]), label)
    if d["kind"] == "integrated":
        return IntegratedTerm(
            c,
            term_from_dict(d["integrand"]),  # type: ignore[arg-type]
            tuple(factor_from_dict(f) for f in d["outer"]),
            label,
            QuadratureSpec(**d.get("quad", {})),
        )
    raise ValueError(f"unknown term kind {d['kind']!r}")


# sector functions and states -----------------------------------------------


@dataclass(frozen=True)
class SectorFunction:
    """A function on the n-photon sector given as a sum of terms."""

    n: int
    terms: tuple[AnyTerm, ...] = ()

    def __add__(self, other: "SectorFunction") -> "SectorFunction":
        if other.n != self.n:
            raise ValueError("sector mismatch")
        return SectorFunction(self.n, self.terms + other.terms)

    def __neg__(self) -> "SectorFunction":
        return self.scaled(-1.0)

    def __sub__(self, other: "SectorFunction") -> "SectorFunction":
        return self + (-other)

    def scaled(self, c: complex) -> "SectorFunction":
        return SectorFunction(self.n, tuple(t.scaled(c) for t in self.terms))

    def times(self, *factors: Factor) -> "SectorFunction":
        return SectorFunction(self.n, tuple(t.times(*factors) for t in self.terms))

    def is_zero(self) -> bool:
        return not self.terms

    def evaluate_log(self, batch: PointBatch) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(log_scale, mantissa)`` with value ``mantissa * exp(log_scale)``."""
        if batch.n != self.n:
            raise ValueError(f"batch has {batch.n} photons, function lives on sector {self.n}")
        N = batch.size
        if not self.terms:
            return np.zeros(N), np.zeros(N, dtype=complex)
        logs = np.stack([t.log_value(batch) for t in self.terms])
        coef = np.array([effective_coefficient(t) for t in self.terms])
        top = np.max(logs, axis=0)
        scale = np.where(np.isneginf(top), 0.0, top)
        with np.errstate(invalid="ignore", under="ignore"):
            w = np.exp(logs - scale)
        w = np.where(np.isneginf(logs), 0.0, w)
        mant = (coef[:, None] * w).sum(axis=0)
        return scale, mant

    def evaluate(self, batch: PointBatch) -> np.ndarray:
        scale, mant = self.evaluate_log(batch)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            return np.where(mant == 0, 0.0, mant * np.exp(scale))

    def simplify(self, rtol: float = 1e-13) -> "SectorFunction":
        """Collect terms with identical factor content and drop cancelled ones."""
        groups: dict[str, list[AnyTerm]] = {}
        for t in self.terms:
            groups.setdefault(t.shape_key(), []).append(t)
        out = []
        for ts in groups.values():
            total = sum(complex(t.coefficient) for t in ts)
            size = max(abs(complex(t.coefficient)) for t in ts)
            if abs(total) <= rtol * size:
                continue
            out.append(replace(ts[0], coefficient=total))
        return SectorFunction(self.n, tuple(out))

    def labelled(self, prefix: tuple[int, ...]) -> "SectorFunction":
        """Terms whose label starts with ``prefix``."""
        k = len(prefix)
        return SectorFunction(self.n, tuple(t for t in self.terms if t.label[:k] == prefix))

    def remap(self, sm: SlotMap) -> "SectorFunction":
        return SectorFunction(sm.n_new, tuple(t.remap(sm) for t in self.terms))

    def to_dict(self) -> dict:
        return {"n": self.n, "terms": [t.to_dict() for t in self.terms]}

    @classmethod
    def from_dict(cls, d: dict) -> "SectorFunction":
        return cls(int(d["n"]), tuple(term_from_dict(t) for t in d["terms"]))


@dataclass(frozen=True)
class FockState:
    """Finitely many non-zero sectors, keyed by photon number."""

    sectors: dict[int, SectorFunction]

    def __post_init__(self):
        for n, f in self.sectors.items():
            if f.n != n:
                raise ValueError("sector key does not match function")

    def sector(self, n: int) -> SectorFunction:
        return self.sectors.get(n, SectorFunction(n))

    def photon_numbers(self) -> list[int]:
        return sorted(n for n, f in self.sectors.items() if f.terms)

    def __add__(self, other: "FockState") -> "FockState":
        keys = set(self.sectors) | set(other.sectors)
        return FockState({n: self.sector(n) + other.sector(n) for n in sorted(keys)})

    def scaled(self, c: complex) -> "FockState":
        return FockState({n: f.scaled(c) for n, f in self.sectors.items()})

    def __sub__(self, other: "FockState") -> "FockState":
        return self + other.scaled(-1.0)

    def truncate(self, n_max: int) -> "FockState":
        return FockState({n: f for n, f in self.sectors.items() if n <= n_max})

    def to_json(self) -> str:
        return json.dumps({"sectors": [self.sectors[n].to_dict() for n in sorted(self.sectors)]}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FockState":
        d = json.loads(text)
        secs = [SectorFunction.from_dict(s) for s in d["sectors"]]
        return cls({s.n: s for s in secs})


# constructors -------------------------------------------------------------


def gaussian_sector(n: int, sigmas: Sequence[float], fermion_sigma: float, coefficient: complex = 1.0, label=()) -> SectorFunction:
    """Product of Gaussians in every photon and in the fermion momentum."""
    factors = [Gaussian(float(s), CoordMap.slot(i, n)) for i, s in enumerate(sigmas)]
    factors.append(Gaussian(float(fermion_sigma), CoordMap.fermion_only(n)))
    return SectorFunction(n, (Term(complex(coefficient), canonical_factors(factors), tuple(label)),))


def make_base_chi(m: int, sigma: float = 1.0, support_radius: float | None = 3.0) -> SectorFunction:
    """Starting function of the recursion on sector ``m``.

    A Gaussian of width ``sigma`` in every photon and in the fermion momentum,
    optionally cut off to the ball of ``support_radius`` in every coordinate
    so that it has compact support.
    """
    f = gaussian_sector(m, [sigma] * m, sigma)
    if support_radius is not None:
        cut = [BallCutoff(0.0, support_radius, CoordMap.slot(i, m)) for i in range(m)]
        cut.append(BallCutoff(0.0, support_radius, CoordMap.fermion_only(m)))
        f = f.times(*cut)
    return f


def symmetrize(f: SectorFunction) -> SectorFunction:
    """Average over all permutations of the photon arguments (``n <= 6``)."""
    n = f.n
    if n > MAX_SYMMETRIZE_N:
        raise ValueError(f"symmetrisation over {n}! permutations refused (limit n <= {MAX_SYMMETRIZE_N})")
    if n <= 1:
        return f
    w = 1.0 / math.factorial(n)
    terms = []
    for perm in itertools.permutations(range(n)):
        sm = SlotMap.permutation(perm)
        terms.extend(t.remap(sm).scaled(w) for t in f.terms)
    return SectorFunction(n, tuple(terms)).simplify()


def permute(f: SectorFunction, perm: Sequence[int]) -> SectorFunction:
    """The function ``x -> f(x with slot s moved to perm[s])``.

    Evaluating the result at a batch equals evaluating ``f`` at the batch
    whose slot ``s`` holds the value of slot ``perm[s]``.
    """
    return f.remap(SlotMap.permutation(perm))
