"""Operator actions on symbolic sector functions.

Sector convention: slot ``s`` of an n-photon function holds ``k_{s+1}``; the
fermion momentum is ``p``.  All actions are exact rewrites of the term algebra
except the annihilation part, which wraps its argument in an
:class:`~fockverify.states.IntegratedTerm` unless the one-photon integral has a
closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .sets import BallProduct, EShell, FSet, Region
from .states import (
    BallCutoff,
    CoordMap,
    FockState,
    IntegratedTerm,
    KineticSum,
    PnPower,
    QuadratureSpec,
    RadialPower,
    SectorFunction,
    SetIndicator,
    SlotMap,
    Term,
    canonical_factors,
)

MAX_TERMS = 100_000


# creation part ------------------------------------------------------------


def _insert_map(n_old: int, i: int, n_new: int, shift: dict[int, int]) -> SlotMap:
    """Old slots fill the new slots except ``i`` in order; p_old = p + sum shift."""
    target = tuple(s if s < i else s + 1 for s in range(n_old))
    fs = [0] * n_new
    for k, v in shift.items():
        fs[k] += v
    return SlotMap(target, n_new, tuple(fs))


def apply_A_plus(f: SectorFunction) -> SectorFunction:
    """Creation part from sector ``n-1`` into sector ``n``.

    ``(1/sqrt(n)) sum_i |k_i|^{-1/2} f(k without k_i; p + k_i)``.
    """
    n = f.n + 1
    c = 1.0 / math.sqrt(n)
    terms = []
    for t in f.terms:
        for i in range(n):
            sm = _insert_map(f.n, i, n, {i: 1})
            terms.append(t.remap(sm).times(RadialPower(-0.5, CoordMap.slot(i, n))).scaled(c))
    return SectorFunction(n, tuple(terms))


# annihilation part --------------------------------------------------------


def _closed_shell_candidate(integrand: Term, inner: int):
    """Return the shell indicator if the inner photon enters only through
    ``|k|^{-3}`` and an E shell on which it is the last argument."""
    power = 0.0
    shell = None
    for f in integrand.factors:
        if inner not in f.slots():
            continue
        if isinstance(f, RadialPower) and f.coord.single_slot() == inner:
            power += f.power
        elif (
            isinstance(f, SetIndicator)
            and isinstance(f.region, EShell)
            and not f.complement
            and f.region.exponent_scale == 1.0
            and f.slot_list[-1] == inner
            and shell is None
        ):
            shell = f
        else:
            return None
    if shell is None or power != -3.0:
        return None
    return shell


def apply_A_minus_term(f: SectorFunction, l: int, quad: QuadratureSpec | None = None, fast: bool = True) -> SectorFunction:
    """Single-slot annihilation ``(1/sqrt(n)) int |k_l|^{-1/2} f(..., k_l, ...; p - k_l) dk_l``.

    ``l`` is 1-based as in the usual notation.  The result lives on sector
    ``n-1``.  When the integrand has the form shell indicator times
    ``|k_l|^{-3}`` with ``k_l`` the shell coordinate, the integral is replaced by
    its closed form ``2 pi p_n`` (which cancels a ``1/p_n`` factor exactly).
    """
    n = f.n
    if not 1 <= l <= n:
        raise ValueError(f"l must be in 1..{n}")
    quad = quad or QuadratureSpec()
    s_l = l - 1
    inner = n - 1
    target = tuple(inner if s == s_l else (s if s < s_l else s - 1) for s in range(n))
    shift = [0] * n
    shift[inner] = -1
    sm = SlotMap(target, n, tuple(shift))
    c = 1.0 / math.sqrt(n)
    terms = []
    for t in f.terms:
        if isinstance(t, IntegratedTerm):
            raise NotImplementedError("annihilation of an already integrated term")
        integrand = t.remap(sm).times(RadialPower(-0.5, CoordMap.slot(inner, n)))
        shell = _closed_shell_candidate(integrand, inner) if fast else None
        if shell is not None:
            others = tuple(s for s in shell.slot_list if s != inner)
            keep = [g for g in integrand.factors if inner not in g.slots()]
            drop = SlotMap(tuple(range(n - 1)) + (-1,), n - 1, (0,) * (n - 1))
            factors = [g.remap(drop) for g in keep] + [PnPower(1.0, others)]
            terms.append(Term(t.coefficient * c * 2 * math.pi, canonical_factors(factors), t.label))
        else:
            terms.append(IntegratedTerm(t.coefficient * c, replace(integrand, coefficient=1.0), (), t.label, quad))
    return SectorFunction(n - 1, tuple(terms))


def apply_A_minus(f: SectorFunction, quad: QuadratureSpec | None = None, fast: bool = True) -> SectorFunction:
    """Full annihilation part ``sum_l`` of the single-slot terms; zero on sector 0."""
    if f.n == 0:
        return SectorFunction(0)
    out = SectorFunction(f.n - 1)
    for l in range(1, f.n + 1):
        out = out + apply_A_minus_term(f, l, quad, fast)
    return out


def apply_A(state: FockState, quad: QuadratureSpec | None = None) -> FockState:
    """Sector n of the result is the creation image of sector n-1 plus the
    annihilation image of sector n+1."""
    out: dict[int, SectorFunction] = {}
    for n, f in state.sectors.items():
        if f.is_zero():
            continue
        up = apply_A_plus(f)
        out[up.n] = out.get(up.n, SectorFunction(up.n)) + up
        if n > 0:
            down = apply_A_minus(f, quad)
            out[down.n] = out.get(down.n, SectorFunction(down.n)) + down
    return FockState(dict(sorted(out.items())))


# cutoffs ------------------------------------------------------------------


@dataclass(frozen=True)
class CutoffSpec:
    """Photon momenta restricted to ``R^{-a} <= |k| < R``."""

    R: float
    a: float = 1.0

    def __post_init__(self):
        if self.R < 1.0 or self.a < 1.0:
            raise ValueError("cutoff needs R >= 1 and a >= 1")

    @property
    def lower(self) -> float:
        return self.R ** (-self.a)

    def indicators(self, n: int, slots=None) -> list[BallCutoff]:
        slots = range(n) if slots is None else slots
        return [BallCutoff(self.lower, self.R, CoordMap.slot(s, n)) for s in slots]


def apply_cutoff_A_plus(f: SectorFunction, spec: CutoffSpec) -> SectorFunction:
    g = apply_A_plus(f)
    return g.times(*spec.indicators(g.n))


def apply_cutoff_A_minus(f: SectorFunction, spec: CutoffSpec, quad: QuadratureSpec | None = None) -> SectorFunction:
    if f.n == 0:
        return SectorFunction(0)
    inside = f.times(*spec.indicators(f.n))
    g = apply_A_minus(inside, quad)
    return g.times(*spec.indicators(g.n))


# projections and the free part --------------------------------------------


def project_T(state: FockState) -> FockState:
    """Multiply sector n by the indicator of F_n (sector 0 is mapped to zero)."""
    out = {}
    for n, f in state.sectors.items():
        if n == 0:
            out[n] = SectorFunction(0)
        else:
            out[n] = f.times(SetIndicator(FSet(n), tuple(range(n))))
    return FockState(out)


def project_T_complement(state: FockState) -> FockState:
    out = {}
    for n, f in state.sectors.items():
        if n == 0:
            out[n] = f
        else:
            out[n] = f.times(SetIndicator(FSet(n), tuple(range(n)), complement=True))
    return FockState(out)


def apply_H0(state: FockState) -> FockState:
    """Multiply sector n by ``|k_1| + ... + |k_n| + |p|``."""
    out = {}
    for n, f in state.sectors.items():
        coords = tuple(CoordMap.slot(s, n) for s in range(n)) + (CoordMap.fermion_only(n),)
        out[n] = f.times(KineticSum(coords))
    return FockState(out)


# the recursive states -----------------------------------------------------


@dataclass(frozen=True)
class ChiRecursionSpec:
    """Inputs of the recursion.

    ``d_radius`` selects the ball product of that radius as the set D_{m+1}
    that is removed from the first generated sector; ``None`` selects F_{m+1}.
    """

    m: int
    base: SectorFunction
    n_max: int
    d_radius: float | None = None

    def __post_init__(self):
        if self.base.n != self.m:
            raise ValueError("base function must live on sector m")
        if self.n_max < self.m or (self.n_max - self.m) % 2:
            raise ValueError("n_max must be m plus an even non-negative number")

    def d_region(self) -> Region:
        return FSet(self.m + 1) if self.d_radius is None else BallProduct(self.d_radius)


def chi_term_count(m: int, n: int) -> int:
    """(n-1)(n-3)...(m+1) terms per base term in sector n."""
    out = 1
    for k in range(n - 1, m, -2):
        out *= k
    return out


def chi_step(prev: SectorFunction, spec: ChiRecursionSpec) -> SectorFunction:
    """One step of the recursion from sector n-2 to sector n."""
    n = prev.n + 2
    coef = -math.sqrt(n) / (2 * math.pi * math.sqrt(n - 1))
    common = [
        RadialPower(-2.5, CoordMap.slot(n - 1, n)),
        PnPower(-1.0, tuple(range(n - 1))),
        SetIndicator(EShell(n), tuple(range(n))),
    ]
    if n == spec.m + 2:
        common.append(SetIndicator(spec.d_region(), tuple(range(n - 1)), complement=True))
    terms = []
    for t in prev.terms:
        for j in range(n - 1):
            sm = _insert_map(prev.n, j, n, {j: 1, n - 1: 1})
            # the inserted photon is k_j, so old slots skip j and the last slot
            new = t.remap(sm).times(RadialPower(-0.5, CoordMap.slot(j, n)), *common)
            terms.append(new.scaled(coef).with_label(t.label + (j + 1,)))
            if len(terms) > MAX_TERMS:
                raise OverflowError(f"sector {n} exceeds {MAX_TERMS} terms")
    return SectorFunction(n, tuple(terms))


def build_chi_sequence(spec: ChiRecursionSpec) -> FockState:
    """Sectors m, m+2, ..., n_max of the recursive state."""
    total = sum(chi_term_count(spec.m, n) for n in range(spec.m, spec.n_max + 1, 2)) * max(len(spec.base.terms), 1)
    if total > MAX_TERMS:
        raise OverflowError(f"recursion up to sector {spec.n_max} needs {total} terms (limit {MAX_TERMS})")
    sectors = {spec.m: SectorFunction(spec.m, tuple(t.with_label(()) for t in spec.base.terms))}
    cur = sectors[spec.m]
    for n in range(spec.m + 2, spec.n_max + 1, 2):
        cur = chi_step(cur, spec)
        sectors[n] = cur
    return FockState(sectors)
