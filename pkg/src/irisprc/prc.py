"""Closed-form infinitesimal phase response of the iris limit cycle.

Phases run over [0, 4), one unit per square; ``theta = k + phi`` with ``k``
the number of squares already traversed since the cycle entered square 1.
Positive response means the perturbed trajectory crosses square boundaries
earlier (phase advance).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import DomainError, IrisCycle, IrisParams, stable_cycle

# quarter turn taking a global-frame direction to the local (s, u) frame of
# the square k squares further along the cycle
ROT = np.array([[0.0, -1.0], [1.0, 0.0]])
THETA_MAX = 4.0


class Direction(enum.Enum):
    GLOBAL_X = "x"
    GLOBAL_Y = "y"
    LOCAL_S = "s"
    LOCAL_U = "u"


class Asymptotic(enum.Enum):
    DIVERGES = "Diverges"
    CONVERGES_TO_ZERO = "ConvergesToZero"


@dataclass(frozen=True)
class PerturbDirection:
    """Unit direction (L1 norm) in the frame of square 1.

    Square 1 has its stable axis along global +x and its unstable axis along
    global +y, so ``(eta_s, eta_u)`` doubles as a global ``(x, y)`` direction.
    """

    eta_s: float
    eta_u: float

    def __post_init__(self):
        if not math.isclose(abs(self.eta_s) + abs(self.eta_u), 1.0, rel_tol=1e-12):
            raise DomainError("perturbation direction must have unit L1 norm")

    @classmethod
    def normalized(cls, eta_s: float, eta_u: float) -> "PerturbDirection":
        norm = abs(eta_s) + abs(eta_u)
        if norm == 0:
            raise DomainError("perturbation direction must be non-zero")
        return cls(eta_s / norm, eta_u / norm)

    def as_array(self) -> np.ndarray:
        return np.array([self.eta_s, self.eta_u])


@dataclass(frozen=True)
class PrcSample:
    theta: float
    z_x: float
    z_y: float
    z_s: float
    z_u: float


@dataclass(frozen=True)
class HomoclinicParams:
    nu_x: float
    big_delta: float
    epsilon_reinject: float

    def __post_init__(self):
        if not (0 < self.epsilon_reinject < self.big_delta):
            raise DomainError("need 0 < epsilon_reinject < big_delta")

    @property
    def u(self) -> float:
        return self.epsilon_reinject / self.big_delta


def split_phase(theta: float) -> tuple[int, float]:
    """``theta -> (k, phi)`` with ``k`` in 0..3 and ``phi`` in [0, 1)."""
    if not (0.0 <= theta < THETA_MAX):
        raise DomainError(f"theta must lie in [0, 4), got {theta!r}")
    k = int(math.floor(theta))
    return k, theta - k


def _cycle(params: IrisParams, cycle: IrisCycle | None) -> IrisCycle:
    return stable_cycle(params) if cycle is None else cycle


def beta(phi: float, cycle: IrisCycle) -> tuple[float, float]:
    """Local-frame sensitivity vector ``(s_dag**(1-phi), u_dag**phi)``."""
    if not (0.0 <= phi < 1.0):
        raise DomainError(f"phi must lie in [0, 1), got {phi!r}")
    return cycle.s_dag ** (1.0 - phi), cycle.u_dag**phi


def denominator(cycle: IrisCycle) -> float:
    """``log(1/u_dag) * (u_dag - lam*s_dag)``."""
    return cycle.transit * cycle.margin


def local_direction(eta, k: int) -> np.ndarray:
    """Rotate a square-1 frame direction into the frame of square ``k+1``."""
    eta = eta.as_array() if isinstance(eta, PerturbDirection) else np.asarray(eta, float)
    return np.linalg.matrix_power(ROT, k) @ eta


def iprc(
    eta: PerturbDirection,
    theta: float,
    params: IrisParams,
    cycle: IrisCycle | None = None,
) -> float:
    """Phase response per unit perturbation in direction ``eta`` at phase ``theta``."""
    cyc = _cycle(params, cycle)
    k, phi = split_phase(theta)
    eta_local = local_direction(eta, k)
    b = beta(phi, cyc)
    return float(eta_local[0] * b[0] + eta_local[1] * b[1]) / denominator(cyc)


def global_beta(theta: float, cycle: IrisCycle) -> tuple[float, float]:
    """``(beta_x, beta_y)`` over the full cycle."""
    k, phi = split_phase(theta)
    bs, bu = beta(phi, cycle)
    return (
        (bs, bu),
        (bu, -bs),
        (-bs, -bu),
        (-bu, bs),
    )[k]


def prc_curve(
    direction: Direction | str,
    n_samples: int,
    params: IrisParams,
    cycle: IrisCycle | None = None,
) -> list[PrcSample]:
    """Samples on the uniform grid ``theta = 4*i/n``.

    Every sample carries all four components; ``direction`` only selects
    which one :func:`curve_values` reports.
    """
    Direction(direction)
    if n_samples < 4:
        raise DomainError("need at least 4 samples")
    cyc = _cycle(params, cycle)
    d = denominator(cyc)
    out = []
    for i in range(n_samples):
        theta = THETA_MAX * i / n_samples
        _, phi = split_phase(theta)
        bx, by = global_beta(theta, cyc)
        bs, bu = beta(phi, cyc)
        out.append(PrcSample(theta, bx / d, by / d, bs / d, bu / d))
    return out


def curve_values(samples: list[PrcSample], direction: Direction | str) -> np.ndarray:
    attr = "z_" + Direction(direction).value
    return np.array([getattr(smp, attr) for smp in samples])


def jumps(params: IrisParams, cycle: IrisCycle | None = None) -> dict[str, list[float]]:
    """Step in ``beta_x`` and ``beta_y`` across each integer phase.

    Entry ``i`` is ``beta(i) - beta(i-)``, the left limit taken on the
    closed-form segment of the preceding square.
    """
    cyc = _cycle(params, cycle)
    out = {"x": [], "y": []}
    for i in range(4):
        right = global_beta(float(i), cyc)
        # phi -> 1 in the previous square: beta -> (1, u_dag)
        bs, bu = 1.0, cyc.u_dag
        left = ((bs, bu), (bu, -bs), (-bs, -bu), (-bu, bs))[(i - 1) % 4]
        out["x"].append(right[0] - left[0])
        out["y"].append(right[1] - left[1])
    return out


def v_integral(params: IrisParams, cycle: IrisCycle | None = None) -> float:
    """Area under the positive lobe of ``beta_x`` on [0, 2)."""
    cyc = _cycle(params, cycle)
    lam, u = params.lam, cyc.u_dag
    return (1.0 + lam - lam * u - cyc.s_dag) / (lam * cyc.transit)


def alpha(theta: float, params: IrisParams, cycle: IrisCycle | None = None):
    """Normalized response ``beta/V`` in the global frame."""
    cyc = _cycle(params, cycle)
    v = v_integral(params, cyc)
    bx, by = global_beta(theta, cyc)
    return bx / v, by / v


def alpha_l1_integral(params: IrisParams, cycle: IrisCycle | None = None) -> float:
    """Quadrature of ``|alpha_x| + |alpha_y|`` over [0, 4); equals 4."""
    cyc = _cycle(params, cycle)
    total = 0.0
    for k in range(4):
        for comp in (0, 1):
            val, _ = integrate.quad(
                lambda th: abs(alpha(th, params, cyc)[comp]),
                k,
                k + 1,
                epsabs=1e-13,
                epsrel=1e-12,
                limit=200,
            )
            total += val
    return total


def magnitude_m(params: IrisParams, cycle: IrisCycle | None = None) -> float:
    """Overall magnitude ``M`` with ``Z = (eta . alpha) * M``."""
    cyc = _cycle(params, cycle)
    lam, u = params.lam, cyc.u_dag
    return (1.0 + lam - lam * u - u**lam) / (lam * cyc.transit**2 * (u - lam * u**lam))


def critical_phase(lam: float) -> float:
    """Phase beyond which the stable-direction response diverges as a -> 0."""
    if not lam > 1:
        raise DomainError(f"lambda must exceed 1, got {lam!r}")
    return 1.0 - 1.0 / lam


def asymptotic_class(direction: str, phi: float, lam: float) -> Asymptotic:
    """Limit of the response as a -> 0 for a perturbation along an eigendirection.

    ``direction`` is ``"stable"`` or ``"unstable"``.
    """
    if direction not in ("stable", "unstable"):
        raise DomainError(f"unknown eigendirection {direction!r}")
    if direction == "unstable":
        return Asymptotic.DIVERGES
    if phi <= critical_phase(lam):
        return Asymptotic.CONVERGES_TO_ZERO
    return Asymptotic.DIVERGES


def u_dag_small_a(a: float, lam: float) -> tuple[float, float]:
    """Exact stable entry position and its relative deviation ``(u_dag - a)/a``."""
    cyc = stable_cycle(IrisParams(lam, a))
    return cyc.u_dag, (cyc.u_dag - a) / a


def homoclinic_iprc(phi: float, hp: HomoclinicParams) -> tuple[float, float]:
    """``(Z_u, Z_s)`` for the reinjection model near a homoclinic orbit."""
    if not (0.0 <= phi <= 1.0):
        raise DomainError(f"phi must lie in [0, 1], got {phi!r}")
    u = hp.u
    z_u = (hp.nu_x / hp.big_delta) * u**phi / (u * math.log(1.0 / u))
    return z_u, 0.0


def iris_table_row(phi: float, u: float, lam: float) -> tuple[float, float]:
    """``(Z_u, Z_s)`` of the iris system written in terms of its entry position ``u``."""
    if not (0.0 <= phi <= 1.0):
        raise DomainError(f"phi must lie in [0, 1], got {phi!r}")
    if not (0.0 < u < 1.0):
        raise DomainError(f"u must lie in (0, 1), got {u!r}")
    s = u**lam
    d = (u - lam * s) * math.log(1.0 / u)
    return u**phi / d, s ** (1.0 - phi) / d
