"""Oracles for the stationary vector, Perron pair and 8-state CRRA solve.

Stationary vector: row of the 10^6-th matrix power.  Perron pair: full
eigendecomposition.  Pricing solve: explicit loops over the mpmath chain and a
40-digit LU solve.  None of this touches the package.
"""
import mpmath as mp
import numpy as np

from ar1_chain_n4 import nodes, rows

mp.mp.dps = 40


def stationary_seed42():
    p = np.random.default_rng(42).random((3, 3))
    p /= p.sum(axis=1, keepdims=True)
    return p, np.linalg.matrix_power(p, 10**6)[0]


def perron_seed7():
    k = np.random.default_rng(7).random((8, 8)) + 0.05
    vals, vecs = np.linalg.eig(k)
    i = int(np.argmax(np.abs(vals)))
    v = np.real(vecs[:, i])
    v = v / np.linalg.norm(v)
    return k, float(np.real(vals[i])), v * np.sign(v.sum())


def crra_g10_solve():
    a, b = mp.mpf("0.01037"), mp.mpf("0.03630")
    a0, a1, xi = mp.mpf("-0.8974"), mp.mpf("1.2038"), -b * 10
    signs = [1, -1]
    n = 8
    A = mp.matrix(n, n)
    rhs = mp.matrix(n, 1)
    for i in range(4):
        for s in range(2):
            r = 2 * i + s
            for j in range(4):
                for t in range(2):
                    col = 2 * j + t
                    h = mp.exp(a + nodes[i]) * mp.exp(signs[t] * b)
                    m = mp.exp(a0 + a1 * nodes[i]) * mp.exp(signs[t] * xi)
                    val = h * m * rows[i][j] / 2
                    A[r, col] = (1 if r == col else 0) - val
                    rhs[r] += val
    return mp.lu_solve(A, rhs)


if __name__ == "__main__":
    p, pi = stationary_seed42()
    print("P =", p.tolist())
    print("stationary =", pi.tolist())
    k, lam, v = perron_seed7()
    print("perron =", repr(lam), v.tolist())
    print("nu_crra_g10 =", [mp.nstr(x, 20) for x in crra_g10_solve()])
