"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test records a one-line PASS/FAIL verdict that is repeated in the
terminal summary.
"""
import math
import time

import numpy as np
from scipy.ndimage import binary_dilation

from irisprc.core import IrisParams, existence_test, fold_offset, stable_cycle
from irisprc.prc import (
    HomoclinicParams,
    PerturbDirection,
    alpha_l1_integral,
    curve_values,
    homoclinic_iprc,
    iprc,
    iris_table_row,
    jumps,
    prc_curve,
    u_dag_small_a,
)
from irisprc.sim import (
    _phase_batch,
    distance_to_edge,
    flow_in_square,
    isochron_field,
    numeric_iprc,
    phase_gradient,
    simulate,
    to_local,
)
from irisprc.smooth import SmoothParams, find_cycle, numeric_iprc_smooth, smooth_prc, vector_field

RNG_SEED = 20240611


def random_params(n, rng):
    out = []
    for _ in range(n):
        lam = rng.uniform(1.2, 8.0)
        out.append(IrisParams(lam, rng.uniform(0.02, 0.98) * fold_offset(lam)))
    return out


def test_01_fold_boundary(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for lam in (1.5, 2.0, 3.0, 5.0):
        lo, hi = 0.0, 0.999
        while hi - lo > 1e-15:
            mid = 0.5 * (lo + hi)
            if existence_test(IrisParams(lam, mid)):
                lo = mid
            else:
                hi = mid
        worst = max(worst, abs(fold_offset(lam) - lo))
    exact = fold_offset(2.0) == 0.25
    dt = time.perf_counter() - t0
    ok = worst < 1e-9 and exact and dt < 1.0
    acceptance(1, "fold boundary closed form vs bisection", ok,
               f"max |da|={worst:.2e}, a_fold(2)={fold_offset(2.0)!r}, {dt:.3f}s")
    assert ok


def test_02_analytic_vs_numeric(acceptance):
    t0 = time.perf_counter()
    worst_rel = worst_abs = 0.0
    for a in (0.1, 0.2, 0.24):
        p = IrisParams(2.0, a)
        cyc = stable_cycle(p)
        samples = prc_curve("x", 64, p, cyc)
        for comp, eta in (("x", (1.0, 0.0)), ("y", (0.0, 1.0))):
            for smp in samples:
                z = getattr(smp, "z_" + comp)
                zn = numeric_iprc(eta, smp.theta, p, 1e-4, cyc)
                if abs(z) > 0.1:
                    worst_rel = max(worst_rel, abs(zn - z) / abs(z))
                else:
                    worst_abs = max(worst_abs, abs(zn - z))
    dt = time.perf_counter() - t0
    ok = worst_rel < 1e-2 and worst_abs < 1e-3 and dt < 30
    acceptance(2, "analytic vs numerical iPRC", ok,
               f"max rel={worst_rel:.2e}, max abs={worst_abs:.2e}, {dt:.2f}s")
    assert ok


def test_03_period(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for p in random_params(20, np.random.default_rng(RNG_SEED)):
        cyc = stable_cycle(p)
        traj = simulate((1, (1.0, cyc.u_dag)), p, stop_on_converge=False, max_crossings=4)
        worst = max(worst, abs(traj.crossing_times[3] - 4 * math.log(1 / cyc.u_dag)))
    dt = time.perf_counter() - t0
    ok = worst < 1e-12 and dt < 1.0
    acceptance(3, "simulated period equals 4 log(1/u_dag)", ok, f"max err={worst:.2e}, {dt:.3f}s")
    assert ok


def test_04_cumulative_shift(acceptance):
    t0 = time.perf_counter()
    p = IrisParams(2.0, 0.2)
    cyc = stable_cycle(p)
    r, n = 1e-6, 60
    traj = simulate((1, (1.0, cyc.u_dag + r)), p, stop_on_converge=False, max_crossings=n)
    measured = traj.crossing_times[n - 1] - n * cyc.transit
    expected = -r / cyc.margin
    rel = abs(measured - expected) / abs(expected)
    dt = time.perf_counter() - t0
    ok = rel < 1e-3 and dt < 1.0
    acceptance(4, "cumulative crossing-time shift", ok,
               f"measured={measured:.6e}, closed form={expected:.6e}, rel={rel:.2e}, {dt:.3f}s")
    assert ok


def test_05_small_offset_scaling(acceptance):
    t0 = time.perf_counter()
    devs = {a: u_dag_small_a(a, 2.0)[1] for a in (1e-2, 1e-3, 1e-4, 1e-5)}
    dt = time.perf_counter() - t0
    ok = all(d < 2 * a for a, d in devs.items()) and dt < 1.0
    acceptance(5, "u_dag = a + o(a)", ok,
               ", ".join(f"a={a:g}: {d:.3e}" for a, d in devs.items()) + f", {dt:.3f}s")
    assert ok


def test_06_critical_phase(acceptance):
    t0 = time.perf_counter()
    offs = (1e-2, 1e-3, 1e-4)
    ex, ey = PerturbDirection(1.0, 0.0), PerturbDirection(0.0, 1.0)
    early = [iprc(ex, 0.25, IrisParams(2.0, a)) for a in offs]
    late = [iprc(ex, 0.75, IrisParams(2.0, a)) for a in offs]
    unstable = [iprc(ey, 0.5, IrisParams(2.0, a)) for a in offs]
    dt = time.perf_counter() - t0
    ok = (
        early[0] > early[1] > early[2] > 0
        and late[0] < late[1] < late[2]
        and unstable[0] < unstable[1] < unstable[2]
        and dt < 1.0
    )
    acceptance(6, "critical-phase dichotomy", ok,
               f"Zs(0.25)={np.round(early, 4).tolist()}, Zs(0.75)={np.round(late, 2).tolist()}, "
               f"Zu(0.5)={np.round(unstable, 2).tolist()}, {dt:.3f}s")
    assert ok


def test_07_normalization(acceptance):
    t0 = time.perf_counter()
    worst = max(abs(alpha_l1_integral(p) - 4.0) for p in random_params(10, np.random.default_rng(RNG_SEED + 1)))
    dt = time.perf_counter() - t0
    ok = worst < 1e-8 and dt < 1.0
    acceptance(7, "integral of |alpha|_1 equals 4", ok, f"max err={worst:.2e}, {dt:.3f}s")
    assert ok


def test_08_jump_heights(acceptance):
    # steps measured on beta, the numerator of the response; the response
    # itself steps by (u_dag + s_dag) divided by the constant denominator
    t0 = time.perf_counter()
    worst = 0.0
    count_ok = True
    for p in random_params(20, np.random.default_rng(RNG_SEED + 2)) + [IrisParams(2.0, 0.2)]:
        cyc = stable_cycle(p)
        h = cyc.u_dag + cyc.s_dag
        for steps in jumps(p, cyc).values():
            nonzero = [abs(v) for v in steps if abs(v) > 1e-12]
            count_ok &= len(nonzero) == 2
            worst = max([worst] + [abs(v - h) for v in nonzero])
    dt = time.perf_counter() - t0
    ok = worst < 1e-10 and count_ok and dt < 1.0
    acceptance(8, "jump heights u_dag + s_dag", ok,
               f"max err={worst:.2e}, two steps per component={count_ok}, {dt:.3f}s")
    assert ok


def test_09_isochrons(acceptance):
    t0 = time.perf_counter()
    p = IrisParams(2.0, 0.2)
    cyc = stable_cycle(p)
    field = isochron_field(100, p, cyc)
    th, n = field.theta, field.xs.size

    # unstable-cycle interior: every cell is NoPhase and really ends absorbed
    yy, xx = np.meshgrid(field.ys, field.xs, indexing="ij")
    inside = field.square >= 0
    k = field.square[inside]
    s, u = to_local(k, xx[inside], yy[inside], p.a)
    hole = (s > 0) & (u > 0) & (s * u**p.lam > cyc.s_ddag)
    _, status = _phase_batch(k[hole], s[hole], u[hole], p, cyc)
    hole_ok = hole.any() and np.all(np.isnan(th[inside][hole])) and np.all(status == 1)

    # quarter turn (x, y) -> (y, -x) sends cell (j, i) to (n-1-i, j)
    rot = np.empty_like(th)
    jj, ii = np.indices(th.shape)
    rot[jj, ii] = th[n - 1 - ii, jj]
    same_nan = np.array_equal(np.isnan(rot), np.isnan(th))
    both = np.isfinite(rot) & np.isfinite(th)
    equiv_err = np.max(np.abs((rot[both] - th[both] - 1.0 + 2.0) % 4.0 - 2.0))

    # steepest phase gradient, away from the basin boundary where it is unbounded
    g = phase_gradient(field)
    near_boundary = binary_dilation(np.isnan(th), iterations=2)
    g[near_boundary] = np.nan
    idx = np.nanargmax(g)
    edge_dist = distance_to_edge(field).flat[idx]
    dt = time.perf_counter() - t0
    ok = hole_ok and same_nan and equiv_err < 1e-6 and edge_dist < 0.05 * 2.0 and dt < 60
    acceptance(9, "isochron structure", ok,
               f"hole NoPhase={bool(hole_ok)}, equivariance err={equiv_err:.1e}, same NoPhase set={same_nan}, "
               f"max |grad| {g.flat[idx]:.1f} at {edge_dist:.3f} from edge, {dt:.2f}s")
    assert ok


def test_10_smooth_system(acceptance):
    t0 = time.perf_counter()
    alpha = 7 / 30
    cycles = {mu: find_cycle(SmoothParams(alpha, mu)) for mu in (1e-3, 0.1, 0.3, 0.45)}
    periods = [cycles[mu].period for mu in (1e-3, 0.1, 0.3, 0.45)]
    order_ok = periods[0] > periods[1] > periods[2] > periods[3]
    ratios, tangent_err = {}, 0.0
    for mu in (1e-3, 0.45):
        cyc = cycles[mu]
        _, z = smooth_prc(cyc.params, 64, 1e-4, cyc, directions=((1.0, 0.0),))
        mag = np.abs(z[:, 0])
        ratios[mu] = mag.max() / np.median(mag)
        for theta in (0.5, 2.3):
            v = vector_field(*cyc.state_at(theta), cyc.params)
            zt = numeric_iprc_smooth(v, theta, cyc.params, cycle=cyc)
            expected = (4 / cyc.period) / (abs(v[0]) + abs(v[1]))
            tangent_err = max(tangent_err, abs(zt - expected) / expected)
    dt = time.perf_counter() - t0
    ok = order_ok and ratios[1e-3] > 10 and ratios[0.45] < 3 and tangent_err < 0.02 and dt < 300
    acceptance(10, "smooth-system qualitative reproduction", ok,
               f"periods={np.round(periods, 3).tolist()}, peak/median={ratios[1e-3]:.1f} (mu=1e-3), "
               f"{ratios[0.45]:.2f} (mu=0.45), tangent err={tangent_err:.1e}, {dt:.1f}s")
    assert ok


def test_11_homoclinic_coincidence(acceptance):
    t0 = time.perf_counter()
    hp = HomoclinicParams(1.0, 1.0, 0.1)
    lam, u = 50.0, 0.1
    zu_err = max(
        abs(iris_table_row(phi, u, lam)[0] - homoclinic_iprc(phi, hp)[0]) / homoclinic_iprc(phi, hp)[0]
        for phi in np.linspace(0.0, 0.95, 96)
    )
    zs_max = max(iris_table_row(phi, u, lam)[1] for phi in np.linspace(0.0, 0.9, 91))
    dt = time.perf_counter() - t0
    ok = zu_err < 1e-2 and zs_max < 1e-10 and dt < 1.0
    acceptance(11, "homoclinic coincidence at lambda=50", ok,
               f"max rel Z_u err={zu_err:.2e}, max Z_s on [0,0.9]={zs_max:.2e} (bound 1e-10), {dt:.3f}s")
    assert ok
