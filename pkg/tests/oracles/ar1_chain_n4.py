"""Standalone oracle for the 4-point AR(1) chain at the dividend-growth estimates.

Uses the closed-form roots of the physicists' Hermite polynomial
H_4(z) = 16 z^4 - 48 z^2 + 12 and the textbook Gauss-Hermite weight formula,
evaluated in mpmath at 40 digits.  Shares no code with the package.
"""
import mpmath as mp

mp.mp.dps = 40

rho = mp.mpf("0.64079")
c = mp.mpf("0.01520")

# roots of H_4: z^2 = (3 +- sqrt(6)) / 2
z_small = mp.sqrt((3 - mp.sqrt(6)) / 2)
z_large = mp.sqrt((3 + mp.sqrt(6)) / 2)
z = [-z_large, -z_small, z_small, z_large]


def hermite3(t):
    return 8 * t**3 - 12 * t


# w_i = 2^(n-1) n! sqrt(pi) / (n^2 H_{n-1}(z_i)^2), n = 4
w_gh = [2**3 * 24 * mp.sqrt(mp.pi) / (16 * hermite3(t) ** 2) for t in z]

sig = c / mp.sqrt(1 - rho**2)
nodes = [mp.sqrt(2) * sig * t for t in z]
weights = [w / mp.sqrt(mp.pi) for w in w_gh]


def npdf(x, mu, s):
    return mp.exp(-((x - mu) ** 2) / (2 * s**2)) / (s * mp.sqrt(2 * mp.pi))


rows = []
for xj in nodes:
    raw = [npdf(yk, rho * xj, c) / npdf(yk, 0, sig) * wk for yk, wk in zip(nodes, weights)]
    s = sum(raw)
    rows.append([r / s for r in raw])

if __name__ == "__main__":
    print("nodes =", [mp.nstr(x, 20) for x in nodes])
    print("weights =", [mp.nstr(x, 20) for x in weights])
    for r in rows:
        print([mp.nstr(v, 20) for v in r])
