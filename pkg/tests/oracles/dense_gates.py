"""Full-matrix construction of a k-qubit gate embedded in n qubits.

Works basis state by basis state with explicit bit arithmetic (qubit 0 is the
least significant bit; ``targets[0]`` is the least significant bit of the
gate's own index), so it shares no code with the reshape-based engine.
"""

import numpy as np


def full_operator(U, targets, n_qubits):
    U = np.asarray(U, dtype=complex)
    dim = 2**n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    mask = sum(1 << t for t in targets)
    for col in range(dim):
        sub_in = sum(((col >> t) & 1) << i for i, t in enumerate(targets))
        rest = col & ~mask
        for sub_out in range(2 ** len(targets)):
            row = rest | sum(((sub_out >> i) & 1) << t for i, t in enumerate(targets))
            out[row, col] += U[sub_out, sub_in]
    return out


def dft_matrix(size):
    k = np.arange(size)
    return np.exp(2j * np.pi * np.outer(k, k) / size) / np.sqrt(size)


def random_unitary(dim, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
