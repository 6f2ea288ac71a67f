"""Zeta data of the Laplacian on the round unit sphere.

Writes (k(k+1))^{-s} = (k+1/2)^{-2s} (1 - (k+1/2)^{-2}/4)^{-s}, expands
binomially and sums over k with Hurwitz zeta functions, giving the
continuation of sum_k (2k+1) (k(k+1))^{-s} to s = 0.

    python3 oracles/sphere_zeta.py
"""
import mpmath as mp

mp.mp.dps = 40
TERMS = 60


def zeta_sphere(s):
    total = mp.mpf(0)
    for j in range(TERMS):
        c = mp.binomial(-s, j) * (-mp.mpf(1) / 4) ** j
        total += c * 2 * mp.zeta(2 * s + 2 * j - 1, mp.mpf(3) / 2)
    return total


def main():
    # the j = 1 term is 0·pole at s = 0; approach along the real axis
    with mp.workdps(80):
        z0 = zeta_sphere(mp.mpf("1e-35"))
    zp0 = mp.diff(zeta_sphere, mp.mpf(0))
    z2 = zeta_sphere(mp.mpf(2))
    direct2 = mp.nsum(lambda k: (2 * k + 1) / (k * (k + 1)) ** 2, [1, mp.inf])
    closed = mp.mpf(1) / 2 - 4 * mp.zeta(-1, derivative=1)
    print(f"zeta(0)   = {mp.nstr(z0, 30)}")
    print(f"zeta'(0)  = {mp.nstr(zp0, 30)}")
    print(f"log det   = {mp.nstr(-zp0, 30)}")
    print(f"zeta(2)   = {mp.nstr(z2, 30)}  direct {mp.nstr(direct2, 30)}")
    print(f"1/2 - 4 zeta_R'(-1) = {mp.nstr(closed, 30)}")


if __name__ == "__main__":
    main()
