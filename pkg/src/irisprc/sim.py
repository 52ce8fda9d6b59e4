"""Event-exact simulation of the four-square iris system.

The flow inside each large square is linear, so trajectories are advanced
in closed form and boundary crossings happen at exact logarithmic times.
No ODE integration is involved.

Geometry (half-side b = 1): square 1 is the south-west square, centred at
``(-1 + a/2, -1 - a/2)``, with its stable axis along global +x and its
unstable axis along global +y.  Squares 2-4 follow by successive quarter
turns clockwise about the origin.  Internally squares are indexed 0..3.

Binary isochron format (little endian)::

    8s   magic  b"IRISOCH1"
    u32  nx, u32 ny
    f64  xmin, xmax, ymin, ymax
    f64  lambda, a
    f64  theta[ny][nx]   row-major, row j is y_j, NaN marks no phase
"""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core import DomainError, IrisCycle, IrisError, IrisParams, find_roots, iris_cycle, stable_cycle
from .prc import PerturbDirection, split_phase

CONVERGE_TOL = 1e-10
MAX_CROSSINGS = 10_000

# termination flags
CONVERGED = "converged"
ABSORBED = "absorbed"
ESCAPED = "escaped"
MAX_TIME = "max-time"

S_AXES = np.array([(1.0, 0.0), (0.0, -1.0), (-1.0, 0.0), (0.0, 1.0)])
U_AXES = np.array([(0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0)])


class EscapeError(IrisError):
    """A perturbed state left the basin of the stable cycle."""


@dataclass(frozen=True)
class SquareFrame:
    index: int  # 1..4
    center: tuple[float, float]
    s_axis: tuple[float, float]
    u_axis: tuple[float, float]

    def to_local(self, x, y):
        dx, dy = x - self.center[0], y - self.center[1]
        return (
            dx * self.s_axis[0] + dy * self.s_axis[1],
            dx * self.u_axis[0] + dy * self.u_axis[1],
        )

    def to_global(self, s, u):
        return (
            self.center[0] + s * self.s_axis[0] + u * self.u_axis[0],
            self.center[1] + s * self.s_axis[1] + u * self.u_axis[1],
        )


def square_centers(a: float) -> np.ndarray:
    # real/imag parts of sqrt(2) (-i)^k (e^{-i pi/4} + (a/2) e^{i pi/4})
    h = 0.5 * a
    return np.array(
        [(-1 + h, -1 - h), (-1 - h, 1 - h), (1 - h, 1 + h), (1 + h, -1 + h)]
    )


def frames(a: float) -> list[SquareFrame]:
    return [
        SquareFrame(k + 1, tuple(c), tuple(S_AXES[k]), tuple(U_AXES[k]))
        for k, c in enumerate(square_centers(a))
    ]


def rotate_quarter(x, y):
    """Quarter turn clockwise about the origin; maps square k onto square k+1."""
    return y, -x


def locate(x, y, a: float):
    """Index (0..3) of the large square holding each point, -1 if none.

    Points on a shared edge belong to the square the flow enters.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    owner = np.full(np.broadcast(x, y).shape, -1, dtype=int)
    for k, (cx, cy) in enumerate(square_centers(a)):
        inside = (np.abs(x - cx) <= 1.0) & (np.abs(y - cy) <= 1.0)
        take = inside & ((owner == -1) | (owner == (k - 1) % 4))
        owner[take] = k
    return owner


def to_local(k, x, y, a: float):
    c = square_centers(a)[k]
    sa, ua = S_AXES[k], U_AXES[k]
    dx, dy = x - c[..., 0], y - c[..., 1]
    return dx * sa[..., 0] + dy * sa[..., 1], dx * ua[..., 0] + dy * ua[..., 1]


def to_global(k, s, u, a: float):
    c = square_centers(a)[k]
    sa, ua = S_AXES[k], U_AXES[k]
    return (
        c[..., 0] + s * sa[..., 0] + u * ua[..., 0],
        c[..., 1] + s * sa[..., 1] + u * ua[..., 1],
    )


def flow_in_square(s: float, u: float, dt: float, lam: float) -> tuple[float, float]:
    return s * math.exp(-lam * dt), u * math.exp(dt)


def time_to_exit(s: float, u: float) -> float:
    """Time until the trajectory through ``(s, u)`` reaches the edge ``|u| = 1``."""
    if u == 0:
        raise DomainError("point on the stable manifold never leaves the square")
    return math.log(1.0 / abs(u))


@dataclass(frozen=True)
class Segment:
    square: int  # 1..4
    s_in: float
    u_in: float
    t_in: float
    s_out: float
    u_out: float
    t_out: float


@dataclass
class Trajectory:
    params: IrisParams
    segments: list[Segment] = field(default_factory=list)
    status: str = MAX_TIME

    @property
    def entry_positions(self) -> list[float]:
        return [seg.u_in for seg in self.segments if seg.s_in == 1.0]

    @property
    def crossing_times(self) -> list[float]:
        return [seg.t_out for seg in self.segments]

    def state_at(self, t: float) -> tuple[int, float, float]:
        """``(square index 1..4, x, y)`` at time ``t``."""
        for seg in self.segments:
            if seg.t_in <= t <= seg.t_out:
                dt = t - seg.t_in
                s, u = flow_in_square(seg.s_in, seg.u_in, dt, self.params.lam)
                x, y = to_global(seg.square - 1, s, u, self.params.a)
                return seg.square, float(x), float(y)
        raise DomainError(f"t={t} outside the simulated interval")

    def sample(self, n_per_segment: int = 50):
        """Rows ``(t, x, y, square)`` sampled uniformly in time within each segment."""
        rows = []
        lam, a = self.params.lam, self.params.a
        for seg in self.segments:
            ts = np.linspace(seg.t_in, seg.t_out, n_per_segment, endpoint=False)
            dt = ts - seg.t_in
            s = seg.s_in * np.exp(-lam * dt)
            u = seg.u_in * np.exp(dt)
            x, y = to_global(seg.square - 1, s, u, a)
            rows.extend(zip(ts, x, y, [seg.square] * len(ts)))
        if self.segments:
            seg = self.segments[-1]
            x, y = to_global(seg.square - 1, seg.s_out, seg.u_out, a)
            rows.append((seg.t_out, x, y, seg.square))
        return [(float(t), float(x), float(y), int(k)) for t, x, y, k in rows]


def _maybe_cycle(params: IrisParams) -> IrisCycle | None:
    roots = find_roots(params)
    if roots is None or not roots[0] < roots[1]:
        return None
    return IrisCycle(roots[0], roots[1], params.lam)


def _start_local(start, params: IrisParams):
    """Normalize a start given as a global point or ``(square 1..4, (s, u))``."""
    a = params.a
    if len(start) == 2 and isinstance(start[1], (tuple, list, np.ndarray)):
        k = int(start[0]) - 1
        if not 0 <= k < 4:
            raise DomainError(f"square index must be 1..4, got {start[0]!r}")
        s, u = map(float, start[1])
        if abs(u) <= 1.0:
            return k, s, u
        # beyond the exit edge: hand off to whichever square holds the point
        x, y = to_global(k, s, u, a)
    else:
        x, y = map(float, start)
    k = int(locate(x, y, a))
    if k < 0:
        raise DomainError(f"({x}, {y}) lies outside the large squares")
    s, u = to_local(k, x, y, a)
    return k, float(s), float(u)


def simulate(
    start,
    params: IrisParams,
    max_time: float = math.inf,
    *,
    t0: float = 0.0,
    max_crossings: int = MAX_CROSSINGS,
    stop_on_converge: bool = True,
) -> Trajectory:
    """Advance a trajectory square by square until it converges, leaves or times out.

    ``start`` is a global point ``(x, y)`` or ``(square, (s, u))`` in local
    coordinates.  A local start may have ``s`` slightly above 1; the flow of
    the named square is used there (the field is continuous from the square
    being entered).
    """
    lam, a = params.lam, params.a
    cyc = _maybe_cycle(params)
    k, s, u = _start_local(start, params)
    traj = Trajectory(params)
    t = t0
    for _ in range(max_crossings):
        if u == 0:
            traj.status = MAX_TIME
            return traj
        if t - t0 >= max_time:
            traj.status = MAX_TIME
            return traj
        dt = math.log(1.0 / abs(u))
        if t + dt - t0 > max_time:
            end = t0 + max_time
            s_end, u_end = flow_in_square(s, u, end - t, lam)
            traj.segments.append(Segment(k + 1, s, u, t, s_end, u_end, end))
            traj.status = MAX_TIME
            return traj
        s_f = s * abs(u) ** lam
        u_f = math.copysign(1.0, u)
        traj.segments.append(Segment(k + 1, s, u, t, s_f, u_f, t + dt))
        t += dt
        if u < 0:
            # leaves through the outer edge toward the other cycle's basin
            traj.status = ESCAPED
            return traj
        if s_f > 1.0 - a:
            traj.status = ABSORBED
            return traj
        k, s, u = (k + 1) % 4, 1.0, s_f + a
        if stop_on_converge and cyc is not None and abs(u - cyc.u_dag) < CONVERGE_TOL:
            traj.status = CONVERGED
            # zero-length marker segment for the converged entry point
            traj.segments.append(Segment(k + 1, s, u, t, s, u, t))
            return traj
    traj.status = MAX_TIME
    return traj


def _phase_batch(k, s, u, params: IrisParams, cyc: IrisCycle, max_crossings=MAX_CROSSINGS):
    """Asymptotic phase for arrays of local starts; NaN where there is none.

    Returns ``(theta, status)`` with status codes 0 converged, 1 absorbed,
    2 escaped, 3 max-time.
    """
    lam, a = params.lam, params.a
    k = np.array(k, dtype=np.int64, copy=True).ravel()
    s = np.array(s, dtype=float, copy=True).ravel()
    u = np.array(u, dtype=float, copy=True).ravel()
    n = u.size
    theta = np.full(n, np.nan)
    status = np.full(n, 3, dtype=np.int8)
    t = np.zeros(n)

    escaped = u < 0
    status[escaped] = 2
    stalled = u == 0
    live = ~(escaped | stalled)

    # first, possibly partial, transit
    uu = u[live]
    t[live] = -np.log(uu)
    s_f = s[live] * uu**lam
    idx = np.flatnonzero(live)
    absorbed = s_f > 1.0 - a
    u_next = s_f + a
    status[idx[absorbed]] = 1
    bad = ~absorbed & (u_next < 0)
    status[idx[bad]] = 2
    ok = ~absorbed & ~bad & (u_next > 0)
    idx = idx[ok]
    u[idx] = u_next[ok]
    k[idx] += 1

    active = idx
    u_dag, transit, margin = cyc.u_dag, cyc.transit, cyc.margin
    for _ in range(max_crossings):
        if active.size == 0:
            break
        ua = u[active]
        done = np.abs(ua - u_dag) < CONVERGE_TOL
        if done.any():
            fin = active[done]
            # remaining shift of all later crossings, linearized about the cycle
            dc = -(u[fin] - u_dag) / margin
            th = ((k[fin] % 4) * transit - t[fin] - dc) / transit
            th = np.mod(th, 4.0)
            th[th >= 4.0] = 0.0
            theta[fin] = th
            status[fin] = 0
            active = active[~done]
            ua = ua[~done]
        t[active] += -np.log(ua)
        un = ua**lam + a
        out = un > 1.0
        status[active[out]] = 1
        u[active] = un
        k[active] += 1
        active = active[~out]
    return theta, status


def asymptotic_phase(start, params: IrisParams, cycle: IrisCycle | None = None) -> float:
    """Phase in [0, 4) that ``start`` settles onto, or NaN if it has none.

    Phase zero is the point where the stable cycle enters square 1.
    """
    cyc = stable_cycle(params) if cycle is None else cycle
    k, s, u = _start_local(start, params)
    theta, _ = _phase_batch([k], [s], [u], params, cyc)
    return float(theta[0])


def cycle_point(theta: float, cycle: IrisCycle) -> tuple[int, float, float]:
    """``(square 0..3, s, u)`` of the stable cycle at phase ``theta``."""
    k, phi = split_phase(theta)
    return k, cycle.s_dag**phi, cycle.u_dag ** (1.0 - phi)


def _wrap(d: float) -> float:
    return (d + 2.0) % 4.0 - 2.0


def numeric_iprc(
    eta,
    theta: float,
    params: IrisParams,
    r: float = 1e-4,
    cycle: IrisCycle | None = None,
) -> float:
    """Finite-perturbation estimate of the phase response (advance positive).

    ``eta`` is a global-frame ``(x, y)`` direction, normalized here in L1.
    The displacement is applied in the local frame of the square the cycle
    point belongs to.
    """
    cyc = stable_cycle(params) if cycle is None else cycle
    if isinstance(eta, PerturbDirection):
        eta = (eta.eta_s, eta.eta_u)
    ex, ey = eta
    norm = abs(ex) + abs(ey)
    if norm == 0:
        raise DomainError("perturbation direction must be non-zero")
    ex, ey = ex / norm, ey / norm
    k, s, u = cycle_point(theta, cyc)
    ds = r * (ex * S_AXES[k][0] + ey * S_AXES[k][1])
    du = r * (ex * U_AXES[k][0] + ey * U_AXES[k][1])
    ref = asymptotic_phase((k + 1, (s, u)), params, cyc)
    moved = asymptotic_phase((k + 1, (s + ds, u + du)), params, cyc)
    if math.isnan(moved):
        raise EscapeError(f"perturbation of size {r} at theta={theta} left the basin")
    return _wrap(moved - ref) / r


def cycle_trajectory(params: IrisParams, which: str = "stable", n_periods: int = 1) -> Trajectory:
    """Closed-form trajectory along the stable or unstable cycle from square 1's entry."""
    if which not in ("stable", "unstable"):
        raise DomainError(f"which must be 'stable' or 'unstable', got {which!r}")
    cyc = stable_cycle(params) if which == "stable" else iris_cycle(params)
    u0 = cyc.u_dag if which == "stable" else cyc.u_ddag
    s_out = u0**params.lam
    dt = math.log(1.0 / u0)
    traj = Trajectory(params, status=CONVERGED if which == "stable" else MAX_TIME)
    for n in range(4 * n_periods):
        traj.segments.append(Segment(n % 4 + 1, 1.0, u0, n * dt, s_out, 1.0, (n + 1) * dt))
    return traj


@dataclass(frozen=True)
class UnstableCycle:
    u_ddag: float
    s_ddag: float
    period: float
    trajectory: Trajectory


def unstable_cycle(params: IrisParams) -> UnstableCycle:
    """Geometry of the unstable cycle; at the fold it coincides with the stable one."""
    cyc = iris_cycle(params)
    traj = cycle_trajectory(params, "unstable")
    return UnstableCycle(cyc.u_ddag, cyc.s_ddag, 4.0 * math.log(1.0 / cyc.u_ddag), traj)


@dataclass
class IsochronField:
    params: IrisParams
    xs: np.ndarray  # cell centres, length nx
    ys: np.ndarray  # cell centres, length ny
    theta: np.ndarray  # (ny, nx), NaN = no phase
    square: np.ndarray  # (ny, nx), 0..3 or -1 outside the large squares

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        hx = 0.5 * (self.xs[1] - self.xs[0])
        hy = 0.5 * (self.ys[1] - self.ys[0])
        return (self.xs[0] - hx, self.xs[-1] + hx, self.ys[0] - hy, self.ys[-1] + hy)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# lambda={self.params.lam!r} a={self.params.a!r} nx={self.xs.size} ny={self.ys.size}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "theta"])
        for j, y in enumerate(self.ys):
            for i, x in enumerate(self.xs):
                th = self.theta[j, i]
                w.writerow([repr(float(x)), repr(float(y)), "NaN" if np.isnan(th) else repr(float(th))])
        return buf.getvalue()

    def to_bytes(self) -> bytes:
        head = struct.pack(
            "<8sII6d",
            b"IRISOCH1",
            self.xs.size,
            self.ys.size,
            *self.bbox,
            self.params.lam,
            self.params.a,
        )
        return head + np.ascontiguousarray(self.theta, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "IsochronField":
        magic, nx, ny, x0, x1, y0, y1, lam, a = struct.unpack_from("<8sII6d", data)
        if magic != b"IRISOCH1":
            raise DomainError("not an isochron field")
        off = struct.calcsize("<8sII6d")
        theta = np.frombuffer(data, dtype="<f8", offset=off, count=nx * ny).reshape(ny, nx).copy()
        hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
        xs = x0 + (np.arange(nx) + 0.5) * hx
        ys = y0 + (np.arange(ny) + 0.5) * hy
        params = IrisParams(lam, a)
        yy, xx = np.meshgrid(ys, xs, indexing="ij")
        return cls(params, xs, ys, theta, locate(xx, yy, a))


def grid_axis(n: int, half_width: float) -> np.ndarray:
    # exactly antisymmetric, so a quarter turn maps cell centres onto cell centres
    h = 2.0 * half_width / n
    return (np.arange(n) + 0.5 - 0.5 * n) * h


def isochron_field(grid_n: int, params: IrisParams, cycle: IrisCycle | None = None) -> IsochronField:
    """Asymptotic phase on a ``grid_n x grid_n`` mesh covering the four squares."""
    if grid_n < 2:
        raise DomainError("grid_n must be at least 2")
    cyc = stable_cycle(params) if cycle is None else cycle
    a = params.a
    axis = grid_axis(grid_n, 2.0 + 0.5 * a)
    yy, xx = np.meshgrid(axis, axis, indexing="ij")
    owner = locate(xx, yy, a)
    theta = np.full(xx.shape, np.nan)
    inside = owner >= 0
    k = owner[inside]
    s, u = to_local(k, xx[inside], yy[inside], a)
    # inside the unstable cycle every trajectory ends in the central small square
    hole = (s > 0) & (u > 0) & (s * u**params.lam > cyc.s_ddag)
    th = np.full(k.shape, np.nan)
    keep = ~hole
    th[keep], _ = _phase_batch(k[keep], s[keep], u[keep], params, cyc)
    theta[inside] = th
    return IsochronField(params, axis.copy(), axis.copy(), theta, owner)


def cycle_polyline(params: IrisParams, n_per_square: int = 2000, which: str = "stable") -> np.ndarray:
    """Points ``(x, y)`` along a limit cycle, ``4 * n_per_square`` of them."""
    cyc = stable_cycle(params) if which == "stable" else iris_cycle(params)
    u0 = cyc.u_dag if which == "stable" else cyc.u_ddag
    t = np.linspace(0.0, math.log(1.0 / u0), n_per_square, endpoint=False)
    s = np.exp(-params.lam * t)
    u = u0 * np.exp(t)
    pts = [np.column_stack(to_global(k, s, u, params.a)) for k in range(4)]
    return np.vstack(pts)


def phase_gradient(field: IsochronField) -> np.ndarray:
    """Central-difference ``|grad theta|`` with phase differences taken mod 4.

    Differences are only formed between phased cells of the same square;
    other cells get NaN.
    """
    th, sq = field.theta, field.square
    hx = field.xs[1] - field.xs[0]
    hy = field.ys[1] - field.ys[0]

    def diff(axis, h):
        out = np.full(th.shape, np.nan)
        fwd = [slice(None)] * 2
        bwd = [slice(None)] * 2
        mid = [slice(None)] * 2
        fwd[axis], bwd[axis], mid[axis] = slice(2, None), slice(None, -2), slice(1, -1)
        fwd, bwd, mid = tuple(fwd), tuple(bwd), tuple(mid)
        d = (th[fwd] - th[bwd] + 2.0) % 4.0 - 2.0
        same = (sq[fwd] == sq[mid]) & (sq[bwd] == sq[mid])
        out[mid] = np.where(same, d / (2.0 * h), np.nan)
        return out

    gx = diff(1, hx)
    gy = diff(0, hy)
    return np.hypot(gx, gy)


def distance_to_edge(field: IsochronField) -> np.ndarray:
    """Distance from each cell centre to the nearest edge of its own square."""
    yy, xx = np.meshgrid(field.ys, field.xs, indexing="ij")
    c = square_centers(field.params.a)
    sq = field.square
    out = np.full(sq.shape, np.nan)
    ok = sq >= 0
    dx = np.abs(xx[ok] - c[sq[ok], 0])
    dy = np.abs(yy[ok] - c[sq[ok], 1])
    out[ok] = np.minimum(1.0 - dx, 1.0 - dy)
    return out


def distance_to_cycle(field: IsochronField) -> np.ndarray:
    pts = cycle_polyline(field.params)
    yy, xx = np.meshgrid(field.ys, field.xs, indexing="ij")
    d, _ = cKDTree(pts).query(np.column_stack([xx.ravel(), yy.ravel()]))
    return d.reshape(xx.shape)
