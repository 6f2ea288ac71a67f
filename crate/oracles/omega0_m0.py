"""Rotationally symmetric eigenvalues of the gamma = 0.7 polyblend Omega_0.

-(1/f)(f u')' = lam u on (0, 4). f = gamma r on [0, 2] and f = 4 - r on
[3, 4], so the regular solutions there are J0(k r) and J0(k (4 - r)).
Both are carried into the blend [2, 3] with DOP853 and matched by the
Wronskian f (uL uR' - uL' uR) at r = 2.5.
"""
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import j0, j1

GAMMA, W, RHO = 0.7, 1.0, 1.0
A, TOP = 2.0, 2.0 + W + RHO


def smooth7(x):
    x = np.clip(x, 0.0, 1.0)
    s = x**4 * (35 - 84 * x + 70 * x**2 - 20 * x**3)
    d = 140 * x**3 * (1 - x) ** 3
    return s, d


def warp(r):
    s, d = smooth7((r - A) / W)
    c, p = GAMMA * r, TOP - r
    return (1 - s) * c + s * p, (1 - s) * GAMMA - s + d / W * (p - c)


def rhs(lam):
    def f(r, y):
        fv, df = warp(r)
        u, v = y  # v = f u'
        return [v / fv, -lam * fv * u]
    return f


def wronskian(lam, mid=2.5):
    k = np.sqrt(lam)
    fa = warp(A)[0]
    yl = [j0(k * A), fa * (-k * j1(k * A))]
    yr = [j0(k * 1.0), warp(3.0)[0] * (k * j1(k * 1.0))]
    opts = dict(method="DOP853", rtol=1e-13, atol=1e-15)
    L = solve_ivp(rhs(lam), (A, mid), yl, **opts).y[:, -1]
    R = solve_ivp(rhs(lam), (3.0, mid), yr, **opts).y[:, -1]
    return L[0] * R[1] - L[1] * R[0]


def eigenvalues(n, lam_max=200.0):
    grid = np.linspace(0.05, lam_max, 4000)
    vals = [wronskian(x) for x in grid]
    out = []
    for a, b, fa, fb in zip(grid, grid[1:], vals, vals[1:]):
        if fa * fb < 0:
            out.append(brentq(wronskian, a, b, xtol=1e-14, rtol=1e-15))
            if len(out) == n:
                break
    return out


if __name__ == "__main__":
    for lam in eigenvalues(6):
        print(f"{lam:.12f}")
