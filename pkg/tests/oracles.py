"""Independent reference computations used to freeze expected values.

Nothing here imports the package under test.
"""
import math

from scipy import integrate, optimize


def quadratic_roots(a):
    """Roots of u**2 - u + a, i.e. the lambda = 2 fixed points."""
    d = math.sqrt(1.0 - 4.0 * a)
    return (1.0 - d) / 2.0, (1.0 + d) / 2.0


def brent_roots(lam, a):
    um = lam ** (1.0 / (1.0 - lam))
    f = lambda u: u**lam - u + a
    return (
        optimize.brentq(f, 1e-300, um, xtol=1e-300, rtol=1e-15),
        optimize.brentq(f, um, 1.0, xtol=1e-300, rtol=1e-15),
    )


def beta_x(theta, u, lam):
    s = u**lam
    k = int(theta)
    phi = theta - k
    bs, bu = s ** (1 - phi), u**phi
    return (bs, bu, -bs, -bu)[k]


def v_quadrature(u, lam):
    total = 0.0
    for k in (0, 1):
        val, _ = integrate.quad(lambda th: beta_x(th, u, lam), k, k + 1, epsabs=1e-14, epsrel=1e-13)
        total += val
    return total


def entry_sequence(u0, lam, a, n):
    out = [u0]
    for _ in range(n):
        out.append(out[-1] ** lam + a)
    return out
