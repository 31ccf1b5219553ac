"""Reference values of the Langevin function and its derivatives.

Evaluated with mpmath at 50 significant digits by symbolic-free numerical
differentiation of coth(x) - 1/x.  The printed table is frozen into
tests/unit/test_langevin.cpp.
"""
import mpmath as mp

mp.mp.dps = 50


def langevin(x):
    x = mp.mpf(x)
    return mp.coth(x) - 1 / x


def deriv(x, k):
    if k == 0:
        return langevin(x)
    return mp.diff(langevin, mp.mpf(x), k)


points = ["0.05", "0.3", "0.5", "1.0", "1.9", "2.0", "2.1", "3.7", "8.0", "-1.3"]
for xs in points:
    for k in range(0, 9):
        v = deriv(mp.mpf(xs), k)
        print("    {%s, %d, %s}," % (xs, k, mp.nstr(v, 20)))
