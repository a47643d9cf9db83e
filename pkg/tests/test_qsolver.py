import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dense_gates import dft_matrix, full_operator, random_unitary
from qapricing.errors import (
    DegenerateStateError,
    DimensionError,
    IllConditionedError,
    InvalidParameterError,
    PhaseAliasingError,
    PostSelectionError,
    SingularityError,
    UnitarityError,
)
from qapricing.markov import TABLE_AR1
from qapricing.models import UtilityKind, UtilitySpec, build_system, constant_vol_chain, sdf_spec, solve_classical
from qapricing.qsolver import (
    HADAMARD,
    PAULI_X,
    HermitianSystem,
    HhlConfig,
    QuantumState,
    apply_unitary,
    basis_state,
    circuit_hhl,
    condition_number,
    decoded_eigenvalues,
    fidelity,
    hermitian_embed,
    ideal_hhl,
    inverse_qft,
    prepare_state,
    qft,
    resolve_config,
    sample_counts,
    sparsity,
    symmetric_system,
)


def random_state(n_qubits, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal(2**n_qubits) + 1j * rng.standard_normal(2**n_qubits)
    return prepare_state(v)


def crra_system():
    chain = constant_vol_chain(TABLE_AR1, 4)
    return build_system(chain, TABLE_AR1, sdf_spec(UtilitySpec(UtilityKind.CRRA, 10.0), TABLE_AR1))


# --- states ------------------------------------------------------------------------


def test_prepare_state_normalises():
    s = prepare_state([3.0, 4.0])
    assert np.allclose(s.amplitudes, [0.6, 0.8]) and s.n_qubits == 1 and s.logical_dim == 2


def test_prepare_state_pads():
    s = prepare_state([1.0, 1.0, 1.0])
    assert s.n_qubits == 2 and s.logical_dim == 3
    assert np.allclose(s.amplitudes, [1 / math.sqrt(3)] * 3 + [0.0])
    assert s.amplitudes[3] == 0.0


def test_prepare_state_rejects_zero():
    with pytest.raises(DegenerateStateError):
        prepare_state([0.0, 0.0])
    with pytest.raises(InvalidParameterError):
        prepare_state([1.0, np.nan])


def test_pricing_rhs_is_uniform():
    iota = crra_system().iota
    assert np.allclose(iota, 1.0 / math.sqrt(iota.size), atol=1e-15)
    assert np.allclose(prepare_state(iota).amplitudes, 1.0 / math.sqrt(8))


def test_state_json_round_trip():
    s = random_state(3, 1)
    back = QuantumState.from_json(s.to_json())
    assert np.array_equal(back.amplitudes, s.amplitudes)
    assert (back.n_qubits, back.logical_dim) == (3, 8)
    assert "least significant" in s.to_dict()["qubit_order"]


def test_state_validation():
    with pytest.raises(DimensionError):
        QuantumState(np.ones(3) / math.sqrt(3), 2, 3)
    with pytest.raises(DegenerateStateError):
        QuantumState(np.ones(4), 2, 4)
    with pytest.raises(DimensionError):
        QuantumState(np.array([1.0, 0.0]), 1, 3)


# --- gates -------------------------------------------------------------------------


def test_hadamard_on_zero():
    s = apply_unitary(basis_state(0, 1), HADAMARD, [0])
    assert np.allclose(s.amplitudes, [1 / math.sqrt(2)] * 2)


def test_x_on_qubit_one_flips_bit_two():
    s = apply_unitary(basis_state(0, 2), PAULI_X, [1])
    assert np.argmax(np.abs(s.amplitudes)) == 2


@pytest.mark.parametrize("targets", [[0], [2], [1, 3], [3, 0], [2, 0, 3]])
def test_random_unitary_matches_dense_oracle(targets):
    U = random_unitary(2 ** len(targets), seed=9)
    s = random_state(4, 2)
    got = apply_unitary(s, U, targets).amplitudes
    want = full_operator(U, targets, 4) @ s.amplitudes
    assert np.max(np.abs(got - want)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 5), data=st.data())
def test_gates_preserve_norm(seed, n, data):
    k = data.draw(st.integers(1, n))
    targets = data.draw(st.permutations(range(n)))[:k]
    out = apply_unitary(random_state(n, seed), random_unitary(2**k, seed + 1), targets)
    assert abs(np.linalg.norm(out.amplitudes) - 1.0) < 1e-12


def test_gate_errors():
    s = basis_state(0, 2)
    with pytest.raises(UnitarityError):
        apply_unitary(s, np.array([[1.0, 1.0], [0.0, 1.0]]), [0])
    with pytest.raises(IndexError):
        apply_unitary(s, PAULI_X, [2])
    with pytest.raises(DimensionError):
        apply_unitary(s, PAULI_X, [0, 1])
    with pytest.raises(DimensionError):
        apply_unitary(s, np.eye(4), [1, 1])


# --- Fourier transform -----------------------------------------------------------------


def test_qft_of_zero_is_uniform():
    s = qft(basis_state(0, 3), range(3))
    assert np.allclose(s.amplitudes, 1 / math.sqrt(8))


def test_qft_inverse_round_trip():
    s = random_state(4, 11)
    back = inverse_qft(qft(s, range(4)), range(4))
    assert np.max(np.abs(back.amplitudes - s.amplitudes)) < 1e-12


def test_three_qubit_qft_is_the_dft():
    cols = [qft(basis_state(j, 3), range(3)).amplitudes for j in range(8)]
    assert np.max(np.abs(np.column_stack(cols) - dft_matrix(8))) < 1e-12


def test_qft_on_subregister_matches_kron_oracle():
    s = random_state(5, 3)
    got = qft(s, [1, 2, 3]).amplitudes
    want = full_operator(dft_matrix(8), [1, 2, 3], 5) @ s.amplitudes
    assert np.max(np.abs(got - want)) < 1e-12
    back = inverse_qft(qft(s, [1, 2, 3]), [1, 2, 3])
    assert np.max(np.abs(back.amplitudes - s.amplitudes)) < 1e-12


def test_qft_register_errors():
    s = basis_state(0, 3)
    with pytest.raises(IndexError):
        qft(s, [0, 2])
    with pytest.raises(IndexError):
        qft(s, range(2, 5))


# --- fidelity and diagnostics -----------------------------------------------------------


def test_fidelity_examples():
    a = prepare_state([1.0, 0.0])
    assert fidelity(a, a) == 1.0
    assert fidelity(a, prepare_state([0.0, 1.0])) == 0.0
    assert fidelity(a, prepare_state([1.0, 1.0])) == pytest.approx(0.5)
    with pytest.raises(DimensionError):
        fidelity(a, basis_state(0, 2))


def test_sparsity_and_condition_examples():
    assert sparsity(np.eye(6)) == 1
    assert sparsity(np.full((4, 4), 0.3)) == 4
    assert sparsity(np.array([[1.0, 1e-6], [0.0, 1.0]])) == 1
    assert condition_number(np.eye(5)) == pytest.approx(1.0)
    assert condition_number(np.diag([1.0, 10.0])) == pytest.approx(10.0)
    with pytest.raises(SingularityError):
        condition_number(np.diag([1.0, 0.0]))
    with pytest.raises(SingularityError):
        condition_number(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        sparsity(np.zeros(3))


# --- embedding ----------------------------------------------------------------------------


def test_identity_embedding_solution():
    s = ideal_hhl(hermitian_embed(np.eye(2), [1.0, 0.0]))
    assert np.allclose(np.abs(s.amplitudes), [0.0, 0.0, 1.0, 0.0])


def test_embedding_spectrum_is_signed_singular_values():
    rng = np.random.Generator(np.random.Philox(21))
    A = rng.standard_normal((4, 4))
    vals = np.sort(np.linalg.eigvalsh(hermitian_embed(A, np.ones(4)).matrix))
    sv = np.linalg.svd(A, compute_uv=False)
    assert np.allclose(vals, np.sort(np.concatenate([sv, -sv])), atol=1e-12)
    S = A + A.T
    ev = np.sort(np.linalg.eigvalsh(hermitian_embed(S, np.ones(4)).matrix))
    assert np.allclose(ev, -ev[::-1], atol=1e-12)


def test_pricing_embedding_is_sixteen_dimensional():
    sysm = crra_system()
    h = hermitian_embed(sysm.C, sysm.iota)
    assert h.dim == 16 and h.original_dim == 8
    assert np.all(h.matrix[:8, :8] == 0) and np.all(h.matrix[8:, 8:] == 0)


def test_hermitian_system_validation():
    with pytest.raises(InvalidParameterError):
        HermitianSystem(np.array([[0.0, 1.0], [2.0, 0.0]]), np.ones(2), 1)
    with pytest.raises(InvalidParameterError):
        HermitianSystem(np.eye(2), np.ones(2), 1)
    with pytest.raises(DimensionError):
        hermitian_embed(np.ones((2, 3)), np.ones(2))
    with pytest.raises(InvalidParameterError):
        hermitian_embed(np.array([[np.inf]]), np.ones(1))


# --- ideal HHL ---------------------------------------------------------------------------------


def test_ideal_diagonal_inversion():
    s = ideal_hhl(symmetric_system(np.diag([1.0, 2.0]), np.ones(2) / math.sqrt(2)))
    want = np.array([1.0, 0.5]) / np.linalg.norm([1.0, 0.5])
    assert np.allclose(s.amplitudes, want)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(1, 6))
def test_ideal_matches_classical_solve(seed, n):
    rng = np.random.Generator(np.random.Philox(seed))
    A = rng.standard_normal((n, n)) + n * np.eye(n)
    b = rng.standard_normal(n) + 0.1
    x = np.linalg.solve(A, b)
    ref = prepare_state(np.concatenate([np.zeros(n), x]))
    got = ideal_hhl(hermitian_embed(A, b))
    if got.dim != ref.dim:
        ref = prepare_state(np.concatenate([np.zeros(n), x, np.zeros(got.dim - 2 * n)]))
    assert fidelity(got, ref) >= 1 - 1e-12


def test_ideal_reproduces_crra_solution():
    sysm = crra_system()
    nu = solve_classical(sysm)
    got = ideal_hhl(hermitian_embed(sysm.C, sysm.iota))
    want = np.concatenate([np.zeros(8), nu]) / np.linalg.norm(nu)
    sign = np.sign(got.amplitudes[8].real)
    assert np.max(np.abs(sign * got.amplitudes - want)) < 1e-12


def test_ideal_rejects_singular():
    with pytest.raises(IllConditionedError):
        ideal_hhl(hermitian_embed(np.array([[1.0, 1.0], [1.0, 1.0]]), np.ones(2)))


# --- circuit HHL ------------------------------------------------------------------------------

DYADIC = np.diag([0.25, 0.75])


def dyadic_run(m, rhs=(1.0, 1.0)):
    sysd = symmetric_system(DYADIC, np.array(rhs))
    state, p = circuit_hhl(sysd, HhlConfig(clock_qubits=m, evolution_time=2 * math.pi))
    return fidelity(state, ideal_hhl(sysd)), p


def test_exactly_representable_fixture():
    f, p = dyadic_run(2)
    assert f >= 1 - 1e-9
    assert 0 < p <= 1


def test_fidelity_non_decreasing_in_clock_size():
    fids = [dyadic_run(m)[0] for m in range(1, 6)]
    assert all(b >= a - 1e-12 for a, b in zip(fids, fids[1:]))
    assert fids[0] < fids[1]
    assert fids[0] == pytest.approx(0.8, abs=1e-12)


def test_eigenvector_rhs_is_exact_at_every_clock_size():
    # b = (1, 0) is an eigenvector, so no resolution is ever lost
    assert all(dyadic_run(m, (1.0, 0.0))[0] == pytest.approx(1.0, abs=1e-12) for m in range(1, 6))


def test_signed_phases_exact_on_embedding():
    sysd = hermitian_embed(DYADIC, np.array([1.0, 1.0]))
    cfg = HhlConfig(clock_qubits=3, evolution_time=math.pi)
    assert resolve_config(sysd, cfg).signed
    state, p = circuit_hhl(sysd, cfg)
    assert fidelity(state, ideal_hhl(sysd)) >= 1 - 1e-9


def test_phase_aliasing_detected():
    sysd = symmetric_system(DYADIC, np.ones(2))
    with pytest.raises(PhaseAliasingError):
        circuit_hhl(sysd, HhlConfig(clock_qubits=3, evolution_time=4 * math.pi))


def test_post_selection_failure():
    sysd = symmetric_system(DYADIC, np.ones(2))
    with pytest.raises(PostSelectionError):
        circuit_hhl(sysd, HhlConfig(clock_qubits=2, evolution_time=2 * math.pi, rotation_constant=1e-9))


def test_default_configuration():
    sysd = hermitian_embed(crra_system().C, crra_system().iota)
    res = resolve_config(sysd, HhlConfig())
    lam = np.abs(np.linalg.eigvalsh(sysd.matrix))
    assert res.signed
    assert res.evolution_time == pytest.approx(2 * math.pi * (0.5 - 2**-4) / lam.max())
    assert res.rotation_constant == pytest.approx(0.9 * lam.min())
    pos = resolve_config(symmetric_system(DYADIC, np.ones(2)), HhlConfig(clock_qubits=3))
    assert not pos.signed
    assert pos.evolution_time == pytest.approx(2 * math.pi * (1 - 2**-3) / 0.75)


def test_decoded_eigenvalues_two_complement():
    lam = decoded_eigenvalues(2, 2 * math.pi, signed=True)
    assert np.allclose(lam, [0.0, 0.25, -0.5, -0.25])
    assert np.allclose(decoded_eigenvalues(2, 2 * math.pi, signed=False), [0.0, 0.25, 0.5, 0.75])


def test_config_validation():
    for bad in ({"clock_qubits": 0}, {"evolution_time": -1.0}, {"rotation_constant": 0.0}, {"shots": 0}):
        with pytest.raises(InvalidParameterError):
            HhlConfig(**bad)


def test_sampling_is_seeded():
    s = prepare_state([1.0, 2.0, 3.0, 4.0])
    a = sample_counts(s, 1000, seed=4)
    assert a.sum() == 1000
    assert np.array_equal(a, sample_counts(s, 1000, seed=4))
    assert not np.array_equal(a, sample_counts(s, 1000, seed=5))


def test_circuit_state_norm_and_register():
    sysm = crra_system()
    state, p = circuit_hhl(hermitian_embed(sysm.C, sysm.iota), HhlConfig())
    assert state.n_qubits == 4 and state.logical_dim == 16
    assert abs(np.linalg.norm(state.amplitudes) - 1.0) < 1e-12
    assert 0 < p <= 1
