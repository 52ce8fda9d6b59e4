"""The smooth toroidal system with four saddles and its limit cycles.

Vector field on the torus [0, 2pi)^2::

    f = cos(y1) sin(y2) + alpha sin(2 y1)
    g = -sin(y1) cos(y2) + alpha sin(2 y2)
    dy/dt = (f + mu g, g - mu f)

Integration is fixed-step RK4 compiled with numba.  The limit cycle used
throughout is the one around the spiral at (pi, pi); its Poincare section is
the ray ``y2 = pi, y1 in (pi, 2 pi)`` crossed downward, and phase zero is the
cycle's point on that ray.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import DomainError, IrisError, NoCycleError

TWO_PI = 2.0 * math.pi
H_DEFAULT = 1e-3
SECTION_TOL = 1e-10
ESCAPE_TOL = 1e-6


class SmoothEscapeError(IrisError):
    """A perturbed trajectory failed to return to the section."""


@dataclass(frozen=True)
class SmoothParams:
    alpha: float
    mu: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 0.5):
            raise DomainError(f"alpha must lie in (0, 1/2), got {self.alpha!r}")
        if not (0.0 <= self.mu < 1.0):
            raise DomainError(f"mu must lie in [0, 1), got {self.mu!r}")

    @property
    def lam_u(self) -> float:
        return 1.0 - 2.0 * self.alpha

    @property
    def lam_s(self) -> float:
        return -1.0 - 2.0 * self.alpha

    @property
    def saddle_value(self) -> float:
        return ((1.0 + 2.0 * self.alpha) / (1.0 - 2.0 * self.alpha)) ** 4


@njit(cache=True)
def _field(y1, y2, alpha, mu):
    f = math.cos(y1) * math.sin(y2) + alpha * math.sin(2.0 * y1)
    g = -math.sin(y1) * math.cos(y2) + alpha * math.sin(2.0 * y2)
    return f + mu * g, g - mu * f


@njit(cache=True)
def _rk4(y1, y2, h, alpha, mu):
    k11, k12 = _field(y1, y2, alpha, mu)
    k21, k22 = _field(y1 + 0.5 * h * k11, y2 + 0.5 * h * k12, alpha, mu)
    k31, k32 = _field(y1 + 0.5 * h * k21, y2 + 0.5 * h * k22, alpha, mu)
    k41, k42 = _field(y1 + h * k31, y2 + h * k32, alpha, mu)
    return (
        y1 + h / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41),
        y2 + h / 6.0 * (k12 + 2.0 * k22 + 2.0 * k32 + k42),
    )


@njit(cache=True)
def _hermite(a, b, fa, fb, h, x):
    # cubic Hermite on [0, h] evaluated at fraction x
    x2 = x * x
    x3 = x2 * x
    return (
        (2 * x3 - 3 * x2 + 1) * a
        + (x3 - 2 * x2 + x) * h * fa
        + (-2 * x3 + 3 * x2) * b
        + (x3 - x2) * h * fb
    )


@njit(cache=True)
def _section_hit(a1, a2, b1, b2, h, alpha, mu):
    """Fraction of the step at which y2 falls through pi on the section ray, or -1."""
    shift2 = TWO_PI * math.floor(a2 / TWO_PI)
    pa, pb = a2 - shift2 - math.pi, b2 - shift2 - math.pi
    if not (pa > 0.0 and pb <= 0.0):
        return -1.0, 0.0
    fa1, fa2 = _field(a1, a2, alpha, mu)
    fb1, fb2 = _field(b1, b2, alpha, mu)
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        v = _hermite(a2, b2, fa2, fb2, h, mid) - shift2 - math.pi
        if v > 0.0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    y1 = _hermite(a1, b1, fa1, fb1, h, x)
    y1w = y1 - TWO_PI * math.floor(y1 / TWO_PI)
    if not (math.pi < y1w < TWO_PI):
        return -1.0, 0.0
    return x, y1w


@njit(cache=True)
def _advance(y1, y2, t, h, alpha, mu):
    """RK4 over duration ``t`` in steps of ``h`` with a short final step."""
    n = int(t / h)
    for _ in range(n):
        y1, y2 = _rk4(y1, y2, h, alpha, mu)
    rem = t - n * h
    if rem > 0.0:
        y1, y2 = _rk4(y1, y2, rem, alpha, mu)
    return y1, y2


@njit(cache=True)
def _crossings(y1, y2, h, alpha, mu, n_max, t_max):
    """Times and y1 values of the first ``n_max`` section crossings."""
    times = np.empty(n_max)
    where = np.empty(n_max)
    count = 0
    t = 0.0
    while count < n_max and t < t_max:
        b1, b2 = _rk4(y1, y2, h, alpha, mu)
        x, yc = _section_hit(y1, y2, b1, b2, h, alpha, mu)
        if x >= 0.0:
            times[count] = t + x * h
            where[count] = yc
            count += 1
        y1, y2 = b1, b2
        t += h
    return times[:count], where[:count]


@njit(cache=True)
def _path(y1, y2, h, alpha, mu, n_steps, stride):
    m = n_steps // stride + 1
    out = np.empty((m, 2))
    out[0, 0], out[0, 1] = y1, y2
    j = 1
    for i in range(1, n_steps + 1):
        y1, y2 = _rk4(y1, y2, h, alpha, mu)
        if i % stride == 0:
            out[j, 0], out[j, 1] = y1, y2
            j += 1
    return out[:j]


@njit(cache=True)
def _pair_offset(r1, r2, p1, p2, h, alpha, mu, period, min_cross, max_cross, tol):
    """Asymptotic crossing-time offset of (p1, p2) relative to (r1, r2).

    Both trajectories are stepped together.  Stops once the change in offset
    and its extrapolated geometric tail are both below ``tol``.  Offsets are
    wrapped into (-T/2, T/2] so that a start on opposite sides of the section pairs the
    right crossings.  Returns (offset, crossings used, converged flag, y1 of
    the perturbed trajectory's last crossing).
    """
    tr = np.empty(max_cross)
    tp = np.empty(max_cross)
    y_last = np.nan
    nr = 0
    npp = 0
    t = 0.0
    prev = np.nan
    prev_step = np.nan
    last_n = 0
    t_max = (max_cross + 2) * period
    while t < t_max:
        b1, b2 = _rk4(r1, r2, h, alpha, mu)
        x, _ = _section_hit(r1, r2, b1, b2, h, alpha, mu)
        if x >= 0.0 and nr < max_cross:
            tr[nr] = t + x * h
            nr += 1
        r1, r2 = b1, b2
        c1, c2 = _rk4(p1, p2, h, alpha, mu)
        x, yc = _section_hit(p1, p2, c1, c2, h, alpha, mu)
        if x >= 0.0 and npp < max_cross:
            tp[npp] = t + x * h
            y_last = yc
            npp += 1
        p1, p2 = c1, c2
        t += h
        n = min(nr, npp)
        if n > last_n:
            last_n = n
            d = tp[n - 1] - tr[n - 1]
            d = d - period * math.floor(d / period + 0.5)
            step = d - prev
            if n >= min_cross and abs(step) < tol:
                # geometric tail left after this crossing, from the ratio of
                # successive steps
                q = abs(step / prev_step) if prev_step != 0.0 else 0.0
                if q < 1.0 and abs(step) * q / (1.0 - q) < tol:
                    return d, n, True, y_last
            if n >= max_cross:
                return d, n, False, y_last
            prev_step = step
            prev = d
        if npp == 0 and t > 3.0 * period:
            return np.nan, 0, False, y_last
    return np.nan, min(nr, npp), False, y_last


def vector_field(y1, y2, p: SmoothParams):
    f = np.cos(y1) * np.sin(y2) + p.alpha * np.sin(2.0 * y1)
    g = -np.sin(y1) * np.cos(y2) + p.alpha * np.sin(2.0 * y2)
    return f + p.mu * g, g - p.mu * f


def jacobian(y1: float, y2: float, p: SmoothParams) -> np.ndarray:
    a, mu = p.alpha, p.mu
    f1 = -math.sin(y1) * math.sin(y2) + 2 * a * math.cos(2 * y1)
    f2 = math.cos(y1) * math.cos(y2)
    g1 = -math.cos(y1) * math.cos(y2)
    g2 = math.sin(y1) * math.sin(y2) + 2 * a * math.cos(2 * y2)
    return np.array([[f1 + mu * g1, f2 + mu * g2], [g1 - mu * f1, g2 - mu * f2]])


SADDLE_GUESSES = [
    (0.5 * math.pi, 0.5 * math.pi),
    (0.5 * math.pi, 1.5 * math.pi),
    (1.5 * math.pi, 1.5 * math.pi),
    (1.5 * math.pi, 0.5 * math.pi),
]


def saddles(p: SmoothParams, tol: float = 1e-14) -> list[tuple[float, float]]:
    """Saddle points of the rotated field, by Newton from the unrotated ones."""
    out = []
    for guess in SADDLE_GUESSES:
        y = np.array(guess)
        for _ in range(50):
            fx = np.array(vector_field(y[0], y[1], p))
            if np.max(np.abs(fx)) < tol:
                break
            y = y - np.linalg.solve(jacobian(y[0], y[1], p), fx)
        out.append((float(y[0]), float(y[1])))
    return out


@dataclass
class SmoothPath:
    t: np.ndarray
    y: np.ndarray  # unwrapped states, shape (n, 2)
    params: SmoothParams

    @property
    def wrapped(self) -> np.ndarray:
        return np.mod(self.y, TWO_PI)

    def at(self, t: float) -> np.ndarray:
        """Cubic Hermite interpolation between stored states."""
        i = int(np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, self.t.size - 2))
        h = self.t[i + 1] - self.t[i]
        x = (t - self.t[i]) / h
        fa = vector_field(self.y[i, 0], self.y[i, 1], self.params)
        fb = vector_field(self.y[i + 1, 0], self.y[i + 1, 1], self.params)
        return np.array(
            [_hermite(self.y[i, c], self.y[i + 1, c], fa[c], fb[c], h, x) for c in range(2)]
        )


def integrate(start, t_end: float, p: SmoothParams, h_step: float = H_DEFAULT, stride: int = 1) -> SmoothPath:
    """RK4 path from ``start`` over ``[0, t_end]``, keeping every ``stride``-th step."""
    if h_step <= 0:
        raise DomainError("h_step must be positive")
    n = int(round(t_end / h_step))
    y = _path(float(start[0]), float(start[1]), h_step, p.alpha, p.mu, n, max(1, int(stride)))
    t = np.arange(y.shape[0]) * h_step * max(1, int(stride))
    return SmoothPath(t, y, p)


def advance(start, t: float, p: SmoothParams, h_step: float = H_DEFAULT) -> tuple[float, float]:
    return _advance(float(start[0]), float(start[1]), float(t), h_step, p.alpha, p.mu)


@dataclass
class SmoothCycle:
    params: SmoothParams
    anchor: tuple[float, float]
    period: float
    orbit: SmoothPath
    h: float = H_DEFAULT

    def state_at(self, theta: float) -> tuple[float, float]:
        """Point of the cycle at phase ``theta`` in [0, 4)."""
        return advance(self.anchor, theta * self.period / 4.0, self.params, self.h)


def _return(y1: float, p: SmoothParams, h: float, t_max: float):
    times, where = _crossings(y1, math.pi, h, p.alpha, p.mu, 1, t_max)
    if times.size == 0:
        raise NoCycleError(f"no return to the section within t={t_max} (mu={p.mu})")
    return float(where[0]), float(times[0])


def find_cycle(
    p: SmoothParams,
    h_step: float = H_DEFAULT,
    tol: float = SECTION_TOL,
    y1_start: float = 1.25 * math.pi,
    max_iter: int = 200,
    t_return_max: float = 2000.0,
    orbit_stride: int = 10,
) -> SmoothCycle:
    """Stable cycle around (pi, pi) via a fixed point of the section return map."""
    if not (0.0 < p.mu < 2.0 * p.alpha):
        raise NoCycleError(f"need 0 < mu < 2*alpha for a limit cycle, got mu={p.mu}")
    x0 = y1_start
    x1, _ = _return(x0, p, h_step, t_return_max)
    g0 = x1 - x0
    for _ in range(max_iter):
        x2, period = _return(x1, p, h_step, t_return_max)
        g1 = x2 - x1
        if abs(g1) < tol:
            break
        if g1 != g0 and abs(g1) < 0.1:
            nxt = x1 - g1 * (x1 - x0) / (g1 - g0)
            if not (math.pi < nxt < TWO_PI):
                nxt = x2
        else:
            nxt = x2
        x0, g0, x1 = x1, g1, nxt
    else:
        raise NoCycleError(f"section map did not converge for mu={p.mu}")
    orbit = integrate((x1, math.pi), period, p, h_step, stride=orbit_stride)
    return SmoothCycle(p, (x1, math.pi), period, orbit, h_step)


def numeric_iprc_smooth(
    eta,
    theta: float,
    p: SmoothParams,
    r: float = 1e-4,
    cycle: SmoothCycle | None = None,
    min_periods: int = 20,
    max_periods: int = 2000,
    tol: float = 1e-9,
) -> float:
    """Finite-perturbation phase response (advance positive, ``eta`` normalized in L1)."""
    cyc = find_cycle(p) if cycle is None else cycle
    if not (0.0 <= theta < 4.0):
        raise DomainError(f"theta must lie in [0, 4), got {theta!r}")
    ex, ey = map(float, eta)
    norm = abs(ex) + abs(ey)
    if norm == 0:
        raise DomainError("perturbation direction must be non-zero")
    y1, y2 = cyc.state_at(theta)
    d, _, _, y_last = _pair_offset(
        y1, y2, y1 + r * ex / norm, y2 + r * ey / norm,
        cyc.h, p.alpha, p.mu, cyc.period, min_periods, max_periods, tol,
    )
    # a kick into a neighbouring cell can still cross the outer part of the ray
    if not np.isfinite(d) or abs(y_last - cyc.anchor[0]) > ESCAPE_TOL:
        raise SmoothEscapeError(f"perturbation at theta={theta} did not return to the cycle")
    return -4.0 * d / (cyc.period * r)


def smooth_prc(
    p: SmoothParams,
    n_samples: int = 64,
    r: float = 1e-4,
    cycle: SmoothCycle | None = None,
    directions=((1.0, 0.0), (0.0, 1.0)),
    **kw,
) -> tuple[np.ndarray, np.ndarray]:
    """Phase grid and responses, one column per direction."""
    cyc = find_cycle(p) if cycle is None else cycle
    thetas = 4.0 * np.arange(n_samples) / n_samples
    z = np.array(
        [[numeric_iprc_smooth(eta, th, p, r, cyc, **kw) for eta in directions] for th in thetas]
    )
    return thetas, z


def timeplot(p: SmoothParams, t_end: float | None = None, cycle: SmoothCycle | None = None,
             h_step: float = H_DEFAULT, stride: int = 10) -> SmoothPath:
    """Settled cycle from the phase-zero anchor, by default over one period."""
    cyc = find_cycle(p, h_step) if cycle is None else cycle
    return integrate(cyc.anchor, cyc.period if t_end is None else t_end, p, h_step, stride)


def dwell_fraction(path: SmoothPath, threshold: float = 0.1) -> float:
    """Fraction of samples whose speed is below ``threshold`` times the maximum."""
    v = np.column_stack(vector_field(path.y[:, 0], path.y[:, 1], path.params))
    speed = np.abs(v).sum(axis=1)
    return float(np.mean(speed < threshold * speed.max()))
