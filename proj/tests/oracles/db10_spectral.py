"""Independent db10 generator: Daubechies spectral factorization in mpmath.

Prints the 20 minimum-phase low-pass coefficients (sum = sqrt(2)) in the
order used by the C++ table (h[0] = smallest leading tap of the
reconstruction filter).  Output is frozen into tests/test_wavelet.cpp.
"""
import mpmath as mp

mp.mp.dps = 60
N = 10

# P(y) = sum_{k<N} C(N-1+k, k) y^k, y = sin^2(w/2) = (2 - z - 1/z)/4
P = [mp.binomial(N - 1 + k, k) for k in range(N)]
roots_y = mp.polyroots(list(reversed(P)), maxsteps=500, extraprec=400)

# each y-root gives z^2 - (2 - 4y) z + 1 = 0; keep the root inside the unit circle
zs = []
for y in roots_y:
    b = 2 - 4 * y
    disc = mp.sqrt(b * b - 4)
    z1, z2 = (b + disc) / 2, (b - disc) / 2
    zs.append(z1 if abs(z1) < 1 else z2)

# H(z) = (1 + z)^N * prod (z - z_k), real coefficients
poly = [mp.mpc(1)]
def mulpoly(a, b):
    out = [mp.mpc(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out
for _ in range(N):
    poly = mulpoly(poly, [mp.mpc(1), mp.mpc(1)])
for z in zs:
    poly = mulpoly(poly, [-z, mp.mpc(1)])
h = [mp.re(c) for c in poly]
s = sum(h)
h = [c * mp.sqrt(2) / s for c in h]
# ascending power order gives the minimum-phase filter; print largest-last convention check
for c in h:
    print(mp.nstr(c, 20))
