"""Scalar analysis of the iris system.

Each large square carries the nondimensional saddle flow ``ds/dt = -lam*s``,
``du/dt = u``.  A trajectory entering at ``(1, u)`` leaves at ``(u**lam, 1)``
after ``log(1/u)`` time units and enters the next square at
``u**lam + a``.  Limit cycles are fixed points of that entry map.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class IrisError(Exception):
    """Base class for errors raised by this package."""


class DomainError(IrisError, ValueError):
    """An argument lies outside the domain of the operation."""


class NoCycleError(IrisError):
    """The requested parameters admit no stable limit cycle."""


# a below this would underflow u**lam for moderate lam
A_MIN = 1e-300
FOLD_TOL = 1e-9


@dataclass(frozen=True)
class IrisParams:
    """Saddle ratio ``lam`` and inter-square offset ``a`` (units of the half-side)."""

    lam: float
    a: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"lambda must be positive, got {self.lam!r}")
        if not (math.isfinite(self.a) and 0 <= self.a < 1):
            raise DomainError(f"a must lie in [0, 1), got {self.a!r}")
        if 0 < self.a < A_MIN:
            raise DomainError(f"a={self.a!r} is below double-precision range")


@dataclass(frozen=True)
class IrisCycle:
    """Stable and unstable entry positions of the limit cycles."""

    u_dag: float
    u_ddag: float
    lam: float

    @property
    def s_dag(self) -> float:
        return self.u_dag**self.lam

    @property
    def s_ddag(self) -> float:
        return self.u_ddag**self.lam

    @property
    def transit(self) -> float:
        """Time spent in one square, a quarter of the period."""
        return math.log(1.0 / self.u_dag)

    @property
    def period(self) -> float:
        return 4.0 * self.transit

    @property
    def contraction(self) -> float:
        """Slope of the entry map at the stable fixed point."""
        return self.lam * self.u_dag ** (self.lam - 1.0)

    @property
    def margin(self) -> float:
        """``u_dag - lam*s_dag``; positive iff the cycle is strictly stable."""
        return self.u_dag - self.lam * self.s_dag


class Regime(enum.Enum):
    STABLE_AND_UNSTABLE_CYCLE = "StableAndUnstableCycle"
    FOLD_POINT = "FoldPoint"
    NO_CYCLE_SPIRAL = "NoCycleSpiral"
    HETEROCLINIC_BOUNDARY = "HeteroclinicBoundary"
    NEUTRAL_ORBITS = "NeutralOrbits"

    def __str__(self):
        return self.value


def _check_unit(u: float, name: str = "u") -> None:
    if not (0.0 < u < 1.0):
        raise DomainError(f"{name} must lie in (0, 1), got {u!r}")


def rho(u: float, p: IrisParams) -> float:
    """Fixed-point residual ``u**lam - u + a`` of the entry map."""
    _check_unit(u)
    return u**p.lam - u + p.a


def u_min(lam: float) -> float:
    """Location of the minimum of ``rho`` (where the entry map has slope one)."""
    if lam <= 1:
        raise DomainError(f"lambda must exceed 1, got {lam!r}")
    return lam ** (1.0 / (1.0 - lam))


def fold_offset(lam: float) -> float:
    """Offset at which the stable and unstable cycles merge."""
    if not lam > 1:
        raise DomainError(f"lambda must exceed 1, got {lam!r}")
    return lam ** (1.0 / (1.0 - lam)) - lam ** (lam / (1.0 - lam))


def existence_test(p: IrisParams) -> bool:
    """True iff the entry map has fixed points in (0, 1)."""
    if p.lam <= 1:
        return False
    return p.lam ** (p.lam / (1.0 - p.lam)) - p.lam ** (1.0 / (1.0 - p.lam)) + p.a <= 0


def classify_regime(p: IrisParams) -> Regime:
    if p.a == 0:
        if p.lam == 1:
            return Regime.NEUTRAL_ORBITS
        if p.lam > 1:
            return Regime.HETEROCLINIC_BOUNDARY
        return Regime.NO_CYCLE_SPIRAL
    if p.lam <= 1:
        return Regime.NO_CYCLE_SPIRAL
    if abs(p.a - fold_offset(p.lam)) < FOLD_TOL:
        return Regime.FOLD_POINT
    if existence_test(p):
        return Regime.STABLE_AND_UNSTABLE_CYCLE
    return Regime.NO_CYCLE_SPIRAL


def _bracket_root(p: IrisParams, lo: float, hi: float, left: bool) -> float:
    """Root of the convex ``rho`` in [lo, hi] where it changes sign once.

    Bisection down to a 1e-6 bracket, then Newton kept inside the bracket.
    """
    lam, a = p.lam, p.a

    def f(u):
        return u**lam - u + a

    def df(u):
        return lam * u ** (lam - 1.0) - 1.0

    flo = f(lo)
    while hi - lo > 1e-6 * max(hi, 1e-300) and hi - lo > 1e-300:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    # start on the side where Newton on a convex function is monotone
    u = lo if left else hi
    for _ in range(100):
        d = df(u)
        if d == 0:
            break
        step = f(u) / d
        nxt = u - step
        if not (lo <= nxt <= hi):
            nxt = 0.5 * (lo + hi)
        if nxt == u or abs(step) <= 4e-16 * abs(u):
            u = nxt
            break
        u = nxt
    return u


def find_roots(p: IrisParams) -> tuple[float, float] | None:
    """Both fixed points ``(u_dag, u_ddag)`` of the entry map, or None.

    Returns None for lambda <= 1, for a = 0 (the heteroclinic and neutral
    cases report a regime instead) and beyond the fold.
    """
    if p.lam <= 1 or p.a == 0:
        return None
    if not existence_test(p):
        return None
    um = u_min(p.lam)
    if abs(p.a - fold_offset(p.lam)) < FOLD_TOL and rho(um, p) >= -1e-15:
        return um, um
    u_dag = _bracket_root(p, 0.0, um, left=True)
    u_ddag = _bracket_root(p, um, 1.0, left=False)
    return u_dag, u_ddag


def iris_cycle(p: IrisParams) -> IrisCycle:
    """Limit-cycle geometry for ``p``; raises NoCycleError when there is none."""
    roots = find_roots(p)
    if roots is None:
        raise NoCycleError(
            f"no limit cycle for lambda={p.lam}, a={p.a} ({classify_regime(p)})"
        )
    return IrisCycle(roots[0], roots[1], p.lam)


def stable_cycle(p: IrisParams) -> IrisCycle:
    """Like iris_cycle, but also rejects the semi-stable fold cycle."""
    cyc = iris_cycle(p)
    if not cyc.u_dag < cyc.u_ddag or cyc.margin <= 0:
        raise NoCycleError(f"cycle at lambda={p.lam}, a={p.a} is not strictly stable")
    return cyc


def stability_derivative(u: float, p: IrisParams) -> float:
    """Slope ``lam*u**(lam-1)`` of the entry map; < 1 means stable."""
    _check_unit(u)
    return p.lam * u ** (p.lam - 1.0)


def map_fl(u_i: float, p: IrisParams) -> tuple[float, float]:
    """Exit position and transit time for entry at ``(1, u_i)``."""
    _check_unit(u_i, "u_i")
    return u_i**p.lam, math.log(1.0 / u_i)


def map_h(u_i: float, p: IrisParams) -> float:
    """Entry position in the next square."""
    s_f, _ = map_fl(u_i, p)
    return s_f + p.a


@dataclass(frozen=True)
class Approach:
    t_closest: float
    t_slowest: float
    phi_closest: float
    phi_slowest: float
    u_closest: float
    s_closest: float
    u_slowest: float
    s_slowest: float


def closest_slowest(u_i: float, p: IrisParams) -> Approach:
    """Times (and fractions of the transit) of closest approach and minimum speed.

    The fractions are relative to the transit time ``log(1/u_i)``, which is a
    quarter period when ``u_i`` is the stable entry position.
    """
    _check_unit(u_i, "u_i")
    lam = p.lam
    log_lam, log_u = math.log(lam), math.log(u_i)
    t_c = (log_lam - 2.0 * log_u) / (2.0 * (lam + 1.0))
    t_s = (3.0 * log_lam - 2.0 * log_u) / (2.0 * (lam + 1.0))
    transit = -log_u
    return Approach(
        t_closest=t_c,
        t_slowest=t_s,
        phi_closest=t_c / transit,
        phi_slowest=t_s / transit,
        u_closest=u_i * math.exp(t_c),
        s_closest=math.exp(-lam * t_c),
        u_slowest=u_i * math.exp(t_s),
        s_slowest=math.exp(-lam * t_s),
    )
