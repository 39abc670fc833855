"""Regenerate reference.json with mpmath at 60 digits.

Nothing here imports fdesolve: every value is computed from its defining
formula (series, closed form or quadrature) in extended precision.

    python tests/fixtures/make_reference.py
"""

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 60

ALPHA = mp.mpf("0.8")
LAM = mp.mpf(-2)
Y0 = mp.mpf(2)
H = mp.mpf(1) / 16


def ml_series(z, alpha, terms=400):
    return mp.fsum(z**k / mp.gamma(alpha * k + 1) for k in range(terms))


def y_exact(t):
    return Y0 * ml_series(LAM * t**ALPHA, ALPHA)


def two_point_step(alpha, h, n, f_nm1, f_n, y_n):
    """Integrate the line through (t_{n-1}, f_nm1), (t_n, f_n) against both kernels."""
    t_nm1, t_n, t_np1 = (n - 1) * h, n * h, (n + 1) * h

    def line(s):
        return f_n * (s - t_nm1) / h - f_nm1 * (s - t_n) / h

    # u = (T - s)**alpha removes the kernel singularity at s = T
    def weighted(T, brk):
        pts = [0] + [(T - b) ** alpha for b in brk] + [T**alpha]
        return mp.quad(lambda u: line(T - u ** (1 / alpha)), sorted(pts)) / alpha

    upper = weighted(t_np1, [t_n])
    lower = weighted(t_n, [])
    return y_n + (upper - lower) / mp.gamma(alpha)


def main():
    ref = {}
    ref["ml_m2_a08"] = mp.nstr(ml_series(mp.mpf(-2), ALPHA), 30)
    ref["exact_t1"] = mp.nstr(y_exact(mp.mpf(1)), 30)

    y1 = y_exact(H)
    f0, f1 = LAM * Y0, LAM * y1
    ref["flawed_step_n1"] = {
        "y1_exact": mp.nstr(y1, 30),
        "f0": mp.nstr(f0, 30),
        "f1": mp.nstr(f1, 30),
        "y2": mp.nstr(two_point_step(ALPHA, H, 1, f0, f1, y1), 30),
    }

    g1 = mp.gamma(ALPHA + 1)
    g2 = mp.gamma(ALPHA + 2)
    ref["b_a08"] = [mp.nstr(((k + 1) ** ALPHA - mp.mpf(k) ** ALPHA) / g1, 30) for k in range(5)]
    a = [1 / g2] + [
        ((k + 1) ** (ALPHA + 1) - 2 * mp.mpf(k) ** (ALPHA + 1) + (k - 1) ** (ALPHA + 1)) / g2 for k in range(1, 5)
    ]
    ref["a_a08"] = [mp.nstr(v, 30) for v in a]
    ref["a_tilde_a08"] = [
        mp.nstr((mp.mpf(n) ** (ALPHA + 1) - (n - ALPHA) * (n + 1) ** ALPHA) / g2, 30) for n in range(5)
    ]
    ref["claimed_bound_n0"] = mp.nstr(H ** (3 + ALPHA) * 4 * 1 / (12 * g1), 30)

    out = Path(__file__).with_name("reference.json")
    out.write_text(json.dumps(ref, indent=2) + "\n")
    print(out)


if __name__ == "__main__":
    main()
