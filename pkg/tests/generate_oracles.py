"""Regenerate the frozen reference values used by the tests.

Independent of the package: plain mpmath at 40 digits, straight from the
defining integrals.  Run ``python tests/generate_oracles.py`` and compare
with the constants in the test modules.
"""

import mpmath as mp

mp.mp.dps = 40
half = mp.mpf(1) / 2


def C(H):
    H = mp.mpf(H)
    return mp.sqrt(2 * H * mp.gamma(1.5 - H) * mp.gamma(H + 0.5) / mp.gamma(2 - 2 * H))


def K(H, t, s):
    H, t, s = mp.mpf(H), mp.mpf(t), mp.mpf(s)
    c = H - half
    if H > half:
        # subtract the (u - s)^(c-1) singularity before integrating
        inner = s**c * (t - s) ** c / c + mp.quad(lambda u: (u**c - s**c) * (u - s) ** (c - 1), [s, t])
        return C(H) / mp.gamma(c) * s ** (-c) * inner
    inner = mp.quad(lambda u: u ** (H - 1.5) * (u - s) ** c, [s, t])
    return C(H) / mp.gamma(H + half) * ((t * (t - s) / s) ** c + (half - H) * s ** (-c) * inner)


def kernel_mass(H):
    # int_0^1 K_H(1, u) du in closed form
    H = mp.mpf(H)
    return C(H) * mp.gamma(1.5 - H) / (H + half)


def rl_cov(H, s, t):
    H = mp.mpf(H)
    b = H - half
    return mp.quad(lambda u: (t - u) ** b * (s - u) ** b, [0, min(s, t)])


def ifbm_var(H):
    H = mp.mpf(H)
    f = lambda u, v: (u ** (2 * H) + v ** (2 * H) - abs(u - v) ** (2 * H)) / 2
    return mp.quad(lambda u: mp.quad(lambda v: f(u, v), [0, u, 1]), [0, 1])


def h1_tilde(alpha, x0, tau):
    alpha = mp.mpf(alpha)
    # split at every half period so each piece is non-oscillatory
    n = int(tau * x0 / mp.pi) + 1
    pts = [0] + [k * mp.pi / tau for k in range(1, n)] + [x0]
    return 2 * mp.quad(lambda x: x ** (-alpha) * mp.cos(tau * x), pts)


if __name__ == "__main__":
    print("C(0.75)", C(0.75))
    print("C(0.25)", C(0.25))
    print("K(0.7, 2, 1)", K(0.7, 2, 1))
    print("K(0.3, 2, 1)", K(0.3, 2, 1))
    print("int K_0.7(1, u) du", kernel_mass(0.7))
    print("ccm var a=b=1 H=0.7 K=0.5 t=1", 2 + 2 * kernel_mass(0.7))
    print("rl_cov(0.8, 1, 3)", rl_cov(0.8, 1, 3))
    print("ifbm var H=0.75 t=1", ifbm_var(0.75))
    print("c0(0.25)", 2 * mp.gamma(0.75) * mp.sin(mp.pi / 8))
    e = mp.e
    print("Lamperti FBM(0.75) r(2)", half * (e**1.5 + e**-1.5 - (e - 1 / e) ** 1.5))
    print("fGn H=0.75 lag 1", half * (mp.mpf(2) ** 1.5 - 2))
    print("h1_tilde(0.25, 1, 1000)", h1_tilde(0.25, 1, 1000))
