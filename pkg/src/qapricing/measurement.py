"""Data and pricing-error states, measurement operators and ambiguity scans."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CancellationError,
    DegenerateDataError,
    DimensionError,
    DomainError,
    InvalidDistributionError,
    InvalidParameterError,
    NumericalIntegrityError,
    PerfectFitError,
)
from .qsolver import QuantumState, prepare_state

# Coefficient of the interference term.  Expanding |<S|e>|^2 for
# S = a|d> + e^{i delta} sqrt(1 - a^2)|B> gives the cross term twice.
INTERFERENCE_COEFF = 2.0
HERMITIAN_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DataState:
    state: QuantumState
    grid: np.ndarray
    source_min: float
    source_max: float

    @property
    def n(self) -> int:
        return self.grid.size

    @property
    def amplitudes(self) -> np.ndarray:
        return self.state.logical.real


def data_state(observations, n_points: int) -> DataState:
    """Equally spaced grid from the sample min to max, normalised as amplitudes."""
    obs = np.asarray(observations, dtype=float).ravel()
    if n_points < 2:
        raise DomainError("n_points must be >= 2")
    if obs.size < 2 or not np.all(np.isfinite(obs)):
        raise DegenerateDataError("need at least two finite observations")
    lo, hi = float(obs.min()), float(obs.max())
    if not hi > lo:
        raise DegenerateDataError("observations have zero range")
    grid = np.linspace(lo, hi, n_points)
    return DataState(prepare_state(grid), grid, lo, hi)


def data_state_cdf(observations, n_points: int) -> DataState:
    """Alternative reading: amplitudes are the empirical CDF at the grid points."""
    obs = np.sort(np.asarray(observations, dtype=float).ravel())
    base = data_state(obs, n_points)
    cdf = np.searchsorted(obs, base.grid, side="right") / obs.size
    return DataState(prepare_state(cdf), base.grid, base.source_min, base.source_max)


@dataclass(frozen=True, eq=False)
class PricingErrorState:
    state: QuantumState
    raw_norm: float

    def __post_init__(self):
        if not self.raw_norm > 0:
            raise PerfectFitError("pricing error has zero norm")


def model_state(nu) -> QuantumState:
    """Unit-norm model state with price-dividend ratios sorted low to high."""
    return prepare_state(np.sort(np.asarray(nu, dtype=float).ravel()))


def pricing_error_state(d: DataState, nu) -> PricingErrorState:
    """Normalised difference of the unit data and unit model amplitudes."""
    nu = np.asarray(nu, dtype=float).ravel()
    if nu.size != d.n:
        raise DimensionError(f"model has {nu.size} states, data grid has {d.n}")
    diff = d.state.amplitudes - model_state(nu).amplitudes
    raw = float(np.linalg.norm(diff))
    if raw < 1e-14:
        raise PerfectFitError("model state coincides with the data state")
    return PricingErrorState(QuantumState(diff / raw, d.state.n_qubits, d.n), raw)


class OperatorKind(enum.Enum):
    PROJECTOR = "projector"
    MIXTURE = "mixture"
    TAIL = "tail"
    PHASE_UNITARY = "phase_unitary"
    AMBIGUITY_PROJECTOR = "ambiguity_projector"
    DENSITY_MIXTURE = "density_mixture"


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    matrix: np.ndarray
    kind: OperatorKind

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        kind = OperatorKind(self.kind)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError("operator must be square")
        eye = np.eye(m.shape[0])
        if kind is OperatorKind.PHASE_UNITARY:
            if np.max(np.abs(m.conj().T @ m - eye)) > HERMITIAN_TOL:
                raise InvalidParameterError("phase operator is not unitary")
        elif np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise InvalidParameterError(f"{kind.value} operator is not Hermitian")
        if kind in (OperatorKind.PROJECTOR, OperatorKind.AMBIGUITY_PROJECTOR):
            # an unnormalised superposition gives a scaled projector
            scale = np.trace(m).real if kind is OperatorKind.AMBIGUITY_PROJECTOR else 1.0
            if scale > 0 and np.max(np.abs(m @ m - scale * m)) > HERMITIAN_TOL * max(1.0, scale**2):
                raise InvalidParameterError("operator is not idempotent")
        if kind is OperatorKind.DENSITY_MIXTURE:
            if abs(np.trace(m).real - 1.0) > HERMITIAN_TOL or np.min(np.linalg.eigvalsh(m)) < -HERMITIAN_TOL:
                raise InvalidParameterError("density operator must be PSD with unit trace")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "kind", kind)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _vector(state) -> np.ndarray:
    if isinstance(state, QuantumState):
        return state.amplitudes
    if isinstance(state, PricingErrorState):
        return state.state.amplitudes
    if isinstance(state, DataState):
        return state.state.amplitudes
    return np.asarray(state, dtype=complex).ravel()


def projector(state) -> MeasurementOperator:
    v = _vector(state)
    v = v / np.linalg.norm(v)
    return MeasurementOperator(np.outer(v, v.conj()), OperatorKind.PROJECTOR)


def basis_projector(index: int, dim: int) -> MeasurementOperator:
    """``|u_i><u_i|``."""
    m = np.zeros((dim, dim))
    m[index, index] = 1.0
    return MeasurementOperator(m, OperatorKind.PROJECTOR)


def expectation(op: MeasurementOperator, target):
    """``<phi|A|phi>`` for a state, ``tr(A rho)`` for a density matrix.

    Real for Hermitian operators (imaginary residue checked); complex for the
    phase unitary.
    """
    if isinstance(target, np.ndarray) and target.ndim == 2:
        if target.shape != op.matrix.shape:
            raise DimensionError("density matrix and operator differ in size")
        val = np.trace(op.matrix @ target)
    else:
        v = _vector(target)
        if v.size != op.dim:
            raise DimensionError(f"state of size {v.size} for operator of size {op.dim}")
        val = np.vdot(v, op.matrix @ v)
    if op.kind is OperatorKind.PHASE_UNITARY:
        return complex(val)
    if abs(val.imag) > HERMITIAN_TOL:
        raise NumericalIntegrityError(f"imaginary residue {val.imag:.3e} on a Hermitian expectation")
    return float(val.real)


def cvm_loss(d: DataState, nu) -> float:
    """``|<d|e>|^2``: squared length of the error projected on the data state."""
    e = pricing_error_state(d, nu).state.amplitudes
    return float(abs(np.vdot(d.state.amplitudes, e)) ** 2)


def mixture_operator(p: float, P_d: MeasurementOperator, P_B: MeasurementOperator) -> MeasurementOperator:
    """``(1 - p) P_d + p P_B``."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"mixing weight must lie in [0, 1], got {p}")
    if P_d.dim != P_B.dim:
        raise DimensionError("projectors differ in size")
    if p == 0.0:
        return MeasurementOperator(P_d.matrix, OperatorKind.MIXTURE)
    if p == 1.0:
        return MeasurementOperator(P_B.matrix, OperatorKind.MIXTURE)
    return MeasurementOperator((1.0 - p) * P_d.matrix + p * P_B.matrix, OperatorKind.MIXTURE)


def tail_operator(d: DataState, bad_indices, unit_weights: bool = False) -> MeasurementOperator:
    """``sum_{i in bad} delta_i |u_i><u_i|`` (weight 1 per index with ``unit_weights``)."""
    idx = sorted({int(i) for i in bad_indices})
    if not idx:
        raise DomainError("tail operator needs at least one index")
    if idx[0] < 0 or idx[-1] >= d.n:
        raise DimensionError(f"tail indices {idx} outside the logical dimension {d.n}")
    dim = d.state.dim
    diag = np.zeros(dim)
    amps = d.state.amplitudes.real
    for i in idx:
        diag[i] = 1.0 if unit_weights else amps[i]
    return MeasurementOperator(np.diag(diag), OperatorKind.TAIL)


def worst_outcome_operator(dim: int) -> MeasurementOperator:
    """``P_0 = |u_0><u_0|``."""
    m = np.zeros((dim, dim))
    m[0, 0] = 1.0
    return MeasurementOperator(m, OperatorKind.TAIL)


def phase_operator(theta: float, P_B: MeasurementOperator) -> MeasurementOperator:
    """``e^{i theta} P_B + (I - P_B)``."""
    eye = np.eye(P_B.dim)
    return MeasurementOperator(np.exp(1j * theta) * P_B.matrix + (eye - P_B.matrix), OperatorKind.PHASE_UNITARY)


def superposition_state(alpha: float, delta: float, d, benchmark) -> tuple[np.ndarray, float]:
    """Unnormalised ``alpha |d> + e^{i delta} sqrt(1 - alpha^2) |B>`` and its norm."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    dv, bv = _vector(d), _vector(benchmark)
    if dv.size != bv.size:
        raise DimensionError("data and benchmark states differ in size")
    s = alpha * dv + np.exp(1j * delta) * math.sqrt(1.0 - alpha * alpha) * bv
    return s, float(np.linalg.norm(s))


def ambiguity_projector(alpha: float, delta: float, d, benchmark, normalise: bool = False) -> MeasurementOperator:
    s, norm = superposition_state(alpha, delta, d, benchmark)
    if normalise:
        if not norm > 0:
            raise CancellationError("superposition vanishes")
        s = s / norm
    return MeasurementOperator(np.outer(s, s.conj()), OperatorKind.AMBIGUITY_PROJECTOR)


@dataclass(frozen=True)
class AmbiguityDecomposition:
    total: float
    classical_part: float
    quantum_part: float
    r_d: float
    r_B: float
    phase_gap: float


def overlaps(error, d, benchmark) -> tuple[float, float, float]:
    """``r_d``, ``r_B`` and the phase gap ``alpha_B - alpha_d`` of the error state."""
    e = _vector(error)
    od = np.vdot(e, _vector(d))
    ob = np.vdot(e, _vector(benchmark))
    return float(abs(od)), float(abs(ob)), float(np.angle(ob) - np.angle(od))


def ambiguity_decomposition(alpha, delta, d, benchmark, error, coeff: float = INTERFERENCE_COEFF):
    """Split ``<e|P_S|e>`` into classical and interference parts."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    r_d, r_b, gap = overlaps(error, d, benchmark)
    beta2 = 1.0 - alpha * alpha
    classical = alpha * alpha * r_d * r_d + beta2 * r_b * r_b
    quantum = coeff * alpha * math.sqrt(beta2) * r_d * r_b * math.cos(delta + gap)
    return AmbiguityDecomposition(classical + quantum, classical, quantum, r_d, r_b, gap)


class MixMode(enum.Enum):
    DENSITY = "density"
    SUPERPOSED = "superposed"


def mixed_state(states, weights, mode="density"):
    """Density operator ``sum p_j |phi_j><phi_j|`` or renormalised ``sum p_j |phi_j>``."""
    mode = MixMode(mode)
    vecs = [_vector(s) for s in states]
    w = np.asarray(weights, dtype=float).ravel()
    if len(vecs) != w.size or not vecs:
        raise DimensionError("one weight per state required")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise InvalidDistributionError("weights must be a probability vector")
    dim = vecs[0].size
    if any(v.size != dim for v in vecs):
        raise DimensionError("states differ in size")
    V = np.vstack(vecs)
    if mode is MixMode.DENSITY:
        rho = (V.T * w) @ V.conj()
        return 0.5 * (rho + rho.conj().T)
    s = w @ V
    norm = np.linalg.norm(s)
    if norm < 1e-14:
        raise CancellationError("weighted superposition cancels to zero")
    first = states[0]
    logical = first.logical_dim if isinstance(first, QuantumState) else dim
    n_qubits = int(round(math.log2(dim)))
    return QuantumState(s / norm, n_qubits, logical)


def cos_range(delta_range, gap: float) -> tuple[float, float]:
    """Min and max of ``cos(delta + gap)`` for ``delta`` in the closed range."""
    if delta_range is None:
        return -1.0, 1.0
    lo, hi = (float(v) for v in delta_range)
    if hi < lo:
        raise DomainError("delta_range must be (lo, hi) with lo <= hi")
    if hi - lo >= 2.0 * math.pi:
        return -1.0, 1.0
    a, b = lo + gap, hi + gap
    vals = [math.cos(a), math.cos(b)]
    # interior extrema at multiples of pi
    k = math.ceil(a / math.pi)
    while k * math.pi <= b:
        vals.append(1.0 if k % 2 == 0 else -1.0)
        k += 1
    return min(vals), max(vals)


@dataclass(frozen=True, eq=False)
class AmbiguityScan:
    p_grid: np.ndarray
    classical_loss: np.ndarray
    envelope_low: np.ndarray
    envelope_high: np.ndarray
    reference_level: float
    p_L: float
    p_C: float | None
    p_U: float
    delta_range: tuple[float, float] | None = None
    clamped_low: bool = False
    clamped_high: bool = False
    empty: bool = False
    multiple: bool = False
    crossings: tuple = field(default=())
    r_d: float = 0.0
    r_B: float = 0.0
    phase_gap: float = 0.0

    def summary(self) -> dict:
        return {
            "p_L": self.p_L,
            "p_C": self.p_C,
            "p_U": self.p_U,
            "delta_range": None if self.delta_range is None else list(self.delta_range),
            "reference_level": self.reference_level,
            "clamped_low": self.clamped_low,
            "clamped_high": self.clamped_high,
            "empty": self.empty,
            "multiple_crossings": self.multiple,
            "crossings": list(self.crossings),
            "r_d": self.r_d,
            "r_B": self.r_B,
            "phase_gap": self.phase_gap,
        }


def _roots(p: np.ndarray, f: np.ndarray) -> list[float]:
    """Sign changes of ``f`` on the grid, located by linear interpolation."""
    out = []
    for i in range(p.size - 1):
        a, b = f[i], f[i + 1]
        if a == 0.0:
            out.append(float(p[i]))
        elif a * b < 0.0:
            out.append(float(p[i] - a * (p[i + 1] - p[i]) / (b - a)))
    if f[-1] == 0.0:
        out.append(float(p[-1]))
    return out


def ambiguity_scan(
    target_error,
    d,
    benchmark,
    reference_p: float = 0.5,
    grid_points: int = 2001,
    delta_range=None,
    coeff: float = INTERFERENCE_COEFF,
) -> AmbiguityScan:
    """Classical loss and quantum-ambiguity envelope of the target over ``p``.

    ``alpha^2 = 1 - p`` maps the mixture weight onto the superposition.  The
    reference is ``(1 - reference_p) tr(P_d P_B) + reference_p``.  The
    inconclusive set is where the envelope straddles the reference; ``p_L``
    and ``p_U`` are its ends.
    """
    if not 0.0 <= reference_p <= 1.0:
        raise DomainError("reference_p must lie in [0, 1]")
    if grid_points < 3:
        raise DomainError("grid_points must be >= 3")
    dv, bv = _vector(d), _vector(benchmark)
    r_d, r_b, gap = overlaps(target_error, d, benchmark)
    r_db = float(abs(np.vdot(dv, bv)) ** 2)
    p = np.linspace(0.0, 1.0, grid_points)
    classical = (1.0 - p) * r_d * r_d + p * r_b * r_b
    amp = coeff * np.sqrt(np.clip(p * (1.0 - p), 0.0, None)) * r_d * r_b
    cmin, cmax = cos_range(delta_range, gap)
    low = classical + amp * cmin
    high = classical + amp * cmax
    ref = (1.0 - reference_p) * r_db + reference_p

    c_roots = _roots(p, classical - ref)
    p_c = c_roots[0] if c_roots else None

    inside = (low <= ref) & (ref <= high)
    crossings = sorted(set(_roots(p, high - ref) + _roots(p, low - ref)))
    empty = not inside.any()
    if empty:
        p_l, p_u = (p_c, p_c) if p_c is not None else (math.nan, math.nan)
        clamped_low = clamped_high = False
    else:
        clamped_low = bool(inside[0])
        clamped_high = bool(inside[-1])
        interior = [c for c in crossings if 0.0 < c < 1.0]
        p_l = 0.0 if clamped_low else min(interior)
        p_u = 1.0 if clamped_high else max(interior)
    runs = np.count_nonzero(np.diff(inside.astype(int)) == 1) + int(inside[0])
    return AmbiguityScan(
        p_grid=p,
        classical_loss=classical,
        envelope_low=low,
        envelope_high=high,
        reference_level=float(ref),
        p_L=float(p_l),
        p_C=p_c,
        p_U=float(p_u),
        delta_range=None if delta_range is None else (float(delta_range[0]), float(delta_range[1])),
        clamped_low=clamped_low,
        clamped_high=clamped_high,
        empty=empty,
        multiple=runs > 1,
        crossings=tuple(crossings),
        r_d=r_d,
        r_B=r_b,
        phase_gap=gap,
    )
