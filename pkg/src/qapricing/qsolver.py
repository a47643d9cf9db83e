"""Dense statevector simulation of HHL on Hermitian-embedded pricing systems.

Qubit 0 is the least significant bit of the amplitude index.  HHL registers
are laid out as: solution qubits ``0 .. n_b-1``, clock qubits
``n_b .. n_b+m-1``, ancilla ``n_b+m``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateStateError,
    DimensionError,
    IllConditionedError,
    InvalidParameterError,
    PhaseAliasingError,
    PostSelectionError,
    SingularityError,
    UnitarityError,
)

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=float)


@dataclass(frozen=True, eq=False)
class QuantumState:
    amplitudes: np.ndarray
    n_qubits: int
    logical_dim: int

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).ravel()
        if amp.size != 2**self.n_qubits:
            raise DimensionError(f"{amp.size} amplitudes for {self.n_qubits} qubits")
        if not 1 <= self.logical_dim <= amp.size:
            raise DimensionError(f"logical_dim {self.logical_dim} outside [1, {amp.size}]")
        if abs(np.linalg.norm(amp) - 1.0) > NORM_TOL:
            raise DegenerateStateError(f"state norm {np.linalg.norm(amp)!r} differs from 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def logical(self) -> np.ndarray:
        return self.amplitudes[: self.logical_dim]

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "logical_dim": self.logical_dim,
            "qubit_order": "qubit 0 = least significant index bit",
            "re": self.amplitudes.real.tolist(),
            "im": self.amplitudes.imag.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "QuantumState":
        doc = json.loads(text)
        amp = np.array(doc["re"]) + 1j * np.array(doc["im"])
        return cls(amp, int(doc["n_qubits"]), int(doc["logical_dim"]))


def _renormalised(amp, n_qubits, logical_dim) -> QuantumState:
    amp = np.asarray(amp, dtype=complex)
    return QuantumState(amp / np.linalg.norm(amp), n_qubits, logical_dim)


def prepare_state(v) -> QuantumState:
    """Zero-pad ``v`` to a power of two and normalise it."""
    v = np.asarray(v).ravel()
    if v.size == 0:
        raise DegenerateStateError("empty vector")
    if not np.all(np.isfinite(v)):
        raise InvalidParameterError("state vector has non-finite entries")
    norm = np.linalg.norm(v)
    if not norm > 0:
        raise DegenerateStateError("cannot prepare the zero vector")
    n_qubits = max(1, math.ceil(math.log2(v.size)))
    amp = np.zeros(2**n_qubits, dtype=complex)
    amp[: v.size] = v / norm
    return QuantumState(amp, n_qubits, v.size)


def basis_state(index: int, n_qubits: int) -> QuantumState:
    amp = np.zeros(2**n_qubits, dtype=complex)
    amp[index] = 1.0
    return QuantumState(amp, n_qubits, 2**n_qubits)


def _check_targets(targets, n_qubits):
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise DimensionError(f"repeated target qubits {targets}")
    if any(not 0 <= t < n_qubits for t in targets):
        raise IndexError(f"target qubits {targets} out of range for {n_qubits} qubits")
    return targets


def _apply(amp: np.ndarray, n_qubits: int, U: np.ndarray, targets) -> np.ndarray:
    """Apply ``U`` to ``targets`` (``targets[0]`` = least significant bit of U's index)."""
    k = len(targets)
    psi = amp.reshape((2,) * n_qubits)
    # C-order reshape: qubit q lives on axis n-1-q
    axes = [n_qubits - 1 - t for t in reversed(targets)]
    psi = np.moveaxis(psi, axes, range(n_qubits - k, n_qubits))
    shape = psi.shape
    psi = psi.reshape(-1, 2**k) @ U.T
    psi = np.moveaxis(psi.reshape(shape), range(n_qubits - k, n_qubits), axes)
    return psi.reshape(-1)


def apply_unitary(state: QuantumState, U, target_qubits) -> QuantumState:
    """New state with ``U`` acting on ``target_qubits`` and identity elsewhere."""
    targets = _check_targets(target_qubits, state.n_qubits)
    U = np.asarray(U, dtype=complex)
    if U.shape != (2 ** len(targets),) * 2:
        raise DimensionError(f"unitary of shape {U.shape} on {len(targets)} qubits")
    if np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) > UNITARY_TOL:
        raise UnitarityError("matrix is not unitary")
    amp = _apply(state.amplitudes.copy(), state.n_qubits, U, targets)
    return QuantumState(amp, state.n_qubits, state.logical_dim)


def controlled(U) -> np.ndarray:
    """``|0><0| (x) I + |1><1| (x) U`` with the control as the most significant bit."""
    U = np.asarray(U, dtype=complex)
    d = U.shape[0]
    out = np.eye(2 * d, dtype=complex)
    out[d:, d:] = U
    return out


def phase_gate(theta: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * theta)])


def _qft_gates(qubits, inverse: bool):
    """Gate list (matrix, targets) for the register QFT with final swaps."""
    q = list(qubits)
    k = len(q)
    sign = -1.0 if inverse else 1.0
    gates = []
    for j in reversed(range(k)):
        gates.append((HADAMARD, [q[j]]))
        for l in reversed(range(j)):
            gates.append((controlled(phase_gate(sign * math.pi / 2 ** (j - l))), [q[j], q[l]]))
    for i in range(k // 2):
        gates.append((SWAP, [q[i], q[k - 1 - i]]))
    if inverse:
        gates.reverse()
    return gates


def _register(state: QuantumState, qubits) -> list[int]:
    qubits = list(qubits)
    if not qubits:
        raise IndexError("empty register")
    if qubits != list(range(qubits[0], qubits[0] + len(qubits))):
        raise IndexError("QFT register must be contiguous")
    return _check_targets(qubits, state.n_qubits)


def qft(state: QuantumState, qubits) -> QuantumState:
    """``|x> -> M^-1/2 sum_y exp(2 pi i x y / M) |y>`` on a contiguous register."""
    for gate, targets in _qft_gates(_register(state, qubits), inverse=False):
        state = apply_unitary(state, gate, targets)
    return state


def inverse_qft(state: QuantumState, qubits) -> QuantumState:
    for gate, targets in _qft_gates(_register(state, qubits), inverse=True):
        state = apply_unitary(state, gate, targets)
    return state


def fidelity(a: QuantumState, b: QuantumState) -> float:
    """``|<a|b>|^2``."""
    if a.dim != b.dim:
        raise DimensionError(f"states of dimension {a.dim} and {b.dim}")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


@dataclass(frozen=True, eq=False)
class HermitianSystem:
    """Symmetric system ``matrix x = rhs``.

    For an embedding (``embedded=True``) the matrix is ``2N x 2N`` with zero
    diagonal blocks and ``original_dim = N``; otherwise the matrix is used as
    given and ``original_dim`` is its size.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    original_dim: int
    embedded: bool = True

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        n = self.original_dim
        d = 2 * n if self.embedded else n
        if m.shape != (d, d) or np.asarray(self.rhs).shape != (d,):
            raise DimensionError(f"matrix {m.shape} and rhs do not match dimension {d}")
        if np.max(np.abs(m - m.T)) > 1e-14:
            raise InvalidParameterError("matrix is not symmetric")
        if self.embedded and (np.any(m[:n, :n] != 0) or np.any(m[n:, n:] != 0)):
            raise InvalidParameterError("embedding must have zero diagonal blocks")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "rhs", np.asarray(self.rhs, dtype=float))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "matrix": self.matrix.tolist(),
                "rhs": self.rhs.tolist(),
                "original_dim": self.original_dim,
                "embedded": self.embedded,
            }
        )


def symmetric_system(matrix, rhs) -> HermitianSystem:
    """Wrap an already symmetric system without embedding it."""
    m = np.asarray(matrix, dtype=float)
    return HermitianSystem(m, np.asarray(rhs, dtype=float).ravel(), m.shape[0], embedded=False)


def hermitian_embed(A, b) -> HermitianSystem:
    """``[[0, A], [A^T, 0]]`` with right-hand side ``(b, 0)``; the solution is ``(0, x)``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
        raise DimensionError(f"need square A and matching b, got {A.shape} and {b.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise InvalidParameterError("non-finite system")
    n = A.shape[0]
    m = np.zeros((2 * n, 2 * n))
    m[:n, n:] = A
    m[n:, :n] = A.T
    return HermitianSystem(m, np.concatenate([b, np.zeros(n)]), n)


def _padded(sys: HermitianSystem):
    """Embedding padded to a power of two with ``lambda_max I`` on the padding."""
    d = sys.matrix.shape[0]
    n_b = max(1, math.ceil(math.log2(d)))
    size = 2**n_b
    vals = np.linalg.eigvalsh(sys.matrix)
    lam_max = float(np.max(np.abs(vals)))
    mat = np.zeros((size, size))
    mat[:d, :d] = sys.matrix
    mat[d:, d:] = lam_max * np.eye(size - d)
    rhs = np.zeros(size)
    rhs[:d] = sys.rhs
    return mat, rhs, n_b


def ideal_hhl(sys: HermitianSystem) -> QuantumState:
    """Exact ``sum_i beta_i / lambda_i |a_i>`` normalised, from a full eigendecomposition."""
    mat, rhs, n_b = _padded(sys)
    vals, vecs = np.linalg.eigh(mat)
    amax = np.max(np.abs(vals))
    if not amax > 0 or np.min(np.abs(vals)) < 1e-12 * amax:
        raise IllConditionedError("embedded matrix is numerically singular")
    if not np.linalg.norm(rhs) > 0:
        raise DegenerateStateError("zero right-hand side")
    beta = vecs.T @ (rhs / np.linalg.norm(rhs))
    x = vecs @ (beta / vals)
    return QuantumState(x / np.linalg.norm(x), n_b, sys.dim)


@dataclass(frozen=True)
class HhlConfig:
    """Circuit hyperparameters; ``None`` picks the defaults described below.

    Default ``evolution_time`` puts the largest eigenphase at ``1/2 - 2^-m`` for
    signed decoding (``1 - 2^-m`` for unsigned); default ``rotation_constant`` is
    ``0.9 min|lambda|``.  ``signed_phases=None`` decodes two's complement
    whenever the spectrum has a negative eigenvalue.
    """

    clock_qubits: int = 4
    evolution_time: float | None = None
    rotation_constant: float | None = None
    shots: int | None = None
    signed_phases: bool | None = None

    def __post_init__(self):
        if self.clock_qubits < 1:
            raise InvalidParameterError("clock_qubits must be >= 1")
        if self.evolution_time is not None and not self.evolution_time > 0:
            raise InvalidParameterError("evolution_time must be > 0")
        if self.rotation_constant is not None and not self.rotation_constant > 0:
            raise InvalidParameterError("rotation_constant must be > 0")
        if self.shots is not None and self.shots < 1:
            raise InvalidParameterError("shots must be positive")


@dataclass(frozen=True)
class ResolvedHhl:
    clock_qubits: int
    evolution_time: float
    rotation_constant: float
    signed: bool


def resolve_config(sys: HermitianSystem, cfg: HhlConfig) -> ResolvedHhl:
    vals = np.linalg.eigvalsh(sys.matrix)
    lam_max = float(np.max(np.abs(vals)))
    lam_min = float(np.min(np.abs(vals)))
    if not lam_min > 0:
        raise SingularityError("embedded matrix is singular")
    signed = bool(np.min(vals) < 0) if cfg.signed_phases is None else cfg.signed_phases
    m = cfg.clock_qubits
    top = (0.5 if signed else 1.0) - 2.0**-m
    if cfg.evolution_time is None:
        if top <= 0:
            raise PhaseAliasingError("one signed clock qubit cannot resolve any nonzero eigenvalue")
        t = 2.0 * math.pi * top / lam_max
    else:
        t = cfg.evolution_time
    c = 0.9 * lam_min if cfg.rotation_constant is None else cfg.rotation_constant
    return ResolvedHhl(m, t, c, signed)


def decoded_eigenvalues(clock_qubits: int, t: float, signed: bool) -> np.ndarray:
    """Eigenvalue estimate attached to each clock basis value."""
    M = 2**clock_qubits
    k = np.arange(M, dtype=float)
    if signed:
        k = np.where(k >= M / 2, k - M, k)
    return 2.0 * math.pi * k / (M * t)


def circuit_hhl(sys: HermitianSystem, cfg: HhlConfig) -> tuple[QuantumState, float]:
    """Run HHL gate by gate on the statevector engine.

    Returns the solution-register state post-selected on ancilla = 1 and
    clock = 0, and the probability of measuring ancilla = 1.
    """
    res = resolve_config(sys, cfg)
    mat, rhs, n_b = _padded(sys)
    m = res.clock_qubits
    M = 2**m
    t = res.evolution_time
    vals, vecs = np.linalg.eigh(mat)
    phases = vals * t / (2.0 * math.pi)
    limit = 0.5 if res.signed else 1.0
    lo = -0.5 if res.signed else 0.0
    if np.any(phases >= limit) or np.any(phases < lo):
        raise PhaseAliasingError(
            f"eigenphases {phases.min():.4f}..{phases.max():.4f} outside [{lo}, {limit}); reduce evolution_time"
        )

    sol = list(range(n_b))
    clock = list(range(n_b, n_b + m))
    anc = n_b + m
    n = n_b + m + 1

    amp = np.zeros(2**n, dtype=complex)
    amp[: 2**n_b] = rhs / np.linalg.norm(rhs)
    psi = amp

    def run(gates):
        nonlocal psi
        for gate, targets in gates:
            psi = _apply(psi, n, gate, targets)

    powers = []
    for j in range(m):
        u = (vecs * np.exp(1j * vals * t * 2**j)) @ vecs.conj().T
        powers.append(controlled(u))
    qpe = [(HADAMARD, [q]) for q in clock]
    qpe += [(powers[j], sol + [clock[j]]) for j in range(m)]
    qpe += _qft_gates(clock, inverse=True)
    run(qpe)

    # eigenvalue inversion: rotate the ancilla by C / lambda on each clock value
    lam = decoded_eigenvalues(m, t, res.signed)
    rot = np.zeros((2 * M, 2 * M), dtype=complex)
    for k in range(M):
        s = 0.0 if lam[k] == 0 else float(np.clip(res.rotation_constant / lam[k], -1.0, 1.0))
        cth = math.sqrt(1.0 - s * s)
        rot[k, k] = cth
        rot[k + M, k] = s
        rot[k, k + M] = -s
        rot[k + M, k + M] = cth
    run([(rot, clock + [anc])])

    # uncompute phase estimation
    run([(g.conj().T, tg) for g, tg in reversed(qpe)])

    full = psi.reshape(2, M, 2**n_b)
    p_anc = float(np.sum(np.abs(full[1]) ** 2))
    branch = full[1, 0]
    p_branch = float(np.sum(np.abs(branch) ** 2))
    if p_anc < 1e-12 or p_branch < 1e-12:
        raise PostSelectionError(f"post-selection probability {min(p_anc, p_branch):.3e} too small")
    return _renormalised(branch, n_b, sys.dim), p_anc


def sample_counts(state: QuantumState, shots: int, seed: int) -> np.ndarray:
    """Measurement counts per basis state from ``shots`` samples."""
    rng = np.random.Generator(np.random.Philox(seed))
    p = state.probabilities()
    return rng.multinomial(shots, p / p.sum())


def sparsity(A, threshold: float = 1e-5) -> int:
    """Largest number of entries above ``threshold`` in absolute value in any row."""
    A = np.asarray(A)
    if A.ndim != 2 or A.size == 0:
        raise DimensionError("sparsity needs a non-empty matrix")
    return int(np.max(np.sum(np.abs(A) > threshold, axis=1)))


def condition_number(A) -> float:
    """``sigma_max / sigma_min``."""
    s = np.linalg.svd(np.asarray(A, dtype=complex), compute_uv=False)
    if not s[0] > 0:
        raise SingularityError("zero matrix")
    if not s[-1] > 0:
        raise SingularityError("matrix is singular")
    return float(s[0] / s[-1])
