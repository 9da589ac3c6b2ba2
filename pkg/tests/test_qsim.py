import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state
from qcdo.errors import QubitError, ValidationError
from qcdo.qsim import (
    Circuit,
    Gate,
    QuantumState,
    apply_gate,
    apply_inverse_qft,
    apply_qft,
    controlled,
    marginal_prob_one,
    register_distribution,
    run_circuit,
    sample_register,
)

# Dense matrix oracle, written independently of the tensor kernels: build the
# full 2**n unitary column by column from the basis-index bit rules.
_H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]])
_Z = np.diag([1, -1])


def _ry(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


def dense(gate: Gate, n: int) -> np.ndarray:
    U = np.zeros((1 << n, 1 << n), dtype=complex)
    for i in range(1 << n):
        bit = lambda q: (i >> q) & 1
        if not all(bit(c) for c in gate.controls):
            U[i, i] = 1
            continue
        if gate.kind == "PHASE0":
            U[i, i] = -1 if all(bit(t) == 0 for t in gate.targets) else 1
            continue
        if gate.kind == "SWAP":
            a, b = gate.targets
            j = i & ~(1 << a) & ~(1 << b) | (bit(a) << b) | (bit(b) << a)
            U[j, i] = 1
            continue
        (t,) = gate.targets
        m = {"H": _H, "X": _X, "Z": _Z}.get(gate.kind)
        if m is None:
            m = _ry(gate.angle)
        for out in (0, 1):
            j = i & ~(1 << t) | (out << t)
            U[j, i] += m[out, bit(t)]
    return U


def _random_gate(rng, n):
    kind = rng.choice(["H", "X", "Z", "RY", "SWAP", "PHASE0"])
    qubits = [int(q) for q in rng.permutation(n)]
    n_t = 2 if kind == "SWAP" else (int(rng.integers(1, n)) if kind == "PHASE0" else 1)
    targets = tuple(qubits[:n_t])
    n_c = int(rng.integers(0, n - n_t + 1))
    controls = tuple(qubits[n_t : n_t + n_c])
    angle = float(rng.uniform(-2 * math.pi, 2 * math.pi)) if kind == "RY" else None
    return Gate(str(kind), targets, controls, angle)


def test_hadamard_on_zero():
    s = run_circuit(Circuit(1).h(0))
    np.testing.assert_allclose(s.probabilities(), [0.5, 0.5], atol=1e-15)


def test_ry_half_angle_convention():
    theta = 0.77
    s = run_circuit(Circuit(1).ry(theta, 0))
    np.testing.assert_allclose(s.amplitudes, [math.cos(theta / 2), math.sin(theta / 2)], atol=1e-15)
    assert marginal_prob_one(run_circuit(Circuit(1).ry(math.pi / 2, 0)), 0) == pytest.approx(0.5)


def test_controlled_ry_with_control_off_is_identity():
    s = run_circuit(Circuit(2).ry(1.1, 0, (1,)))
    np.testing.assert_array_equal(s.amplitudes, QuantumState.zero(2).amplitudes)


def test_empty_and_involution():
    np.testing.assert_array_equal(run_circuit(Circuit(3)).amplitudes, QuantumState.zero(3).amplitudes)
    np.testing.assert_allclose(run_circuit(Circuit(1).h(0).h(0)).amplitudes, [1, 0], atol=1e-15)


def test_cnot_and_toffoli_truth_tables():
    # |10> in little-endian order: qubit 1 (control) set, index 2
    cx = controlled(Gate("X", (0,)), [1])
    s = apply_gate(QuantumState.basis(2, 0b10), cx)
    assert s.probabilities()[0b11] == 1
    ccx = controlled(Gate("X", (0,)), [1, 2])
    for i in range(8):
        out = apply_gate(QuantumState.basis(3, i), ccx)
        expected = i ^ 1 if (i >> 1) & 1 and (i >> 2) & 1 else i
        assert out.probabilities()[expected] == 1


def test_controlled_ry_marginal():
    theta = 1.3
    on = run_circuit(Circuit(2).x(1).ry(theta, 0, (1,)))
    off = run_circuit(Circuit(2).ry(theta, 0, (1,)))
    assert marginal_prob_one(on, 0) == pytest.approx(math.sin(theta / 2) ** 2, abs=1e-15)
    assert marginal_prob_one(off, 0) == 0


def test_x_gate_basis_ordering():
    for n in (1, 2, 3, 4):
        for q in range(n):
            s = run_circuit(Circuit(n).x(q))
            assert s.probabilities()[1 << q] == 1


@pytest.mark.parametrize("seed", range(40))
def test_kernels_match_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    gate = _random_gate(rng, n)
    psi = random_state(n, rng)
    expected = dense(gate, n) @ psi.amplitudes
    np.testing.assert_allclose(apply_gate(psi.copy(), gate).amplitudes, expected, atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_gate_then_inverse_restores_state(seed):
    rng = np.random.default_rng(100 + seed)
    gate = _random_gate(rng, 4)
    psi = random_state(4, rng)
    out = apply_gate(apply_gate(psi.copy(), gate), gate.inverse())
    np.testing.assert_allclose(out.amplitudes, psi.amplitudes, atol=1e-10)


def test_control_semantics_exhaustive():
    n = 5
    for kind in ("H", "X", "Z", "RY"):
        gate = Gate(kind, (0,), (2, 4), 0.9 if kind == "RY" else None)
        for i in range(1 << n):
            out = apply_gate(QuantumState.basis(n, i), gate)
            if not ((i >> 2) & 1 and (i >> 4) & 1):
                assert out.probabilities()[i] == 1


def test_circuit_inverse_and_controlled():
    rng = np.random.default_rng(5)
    circ = Circuit(3, [_random_gate(rng, 3) for _ in range(12)])
    psi = random_state(3, rng)
    back = run_circuit(circ.inverse(), run_circuit(circ, psi))
    np.testing.assert_allclose(back.amplitudes, psi.amplitudes, atol=1e-10)
    wide = circ.controlled([3], 4)
    off = run_circuit(wide, QuantumState(np.concatenate([psi.amplitudes, np.zeros(8)]), 4))
    np.testing.assert_allclose(off.amplitudes[:8], psi.amplitudes, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_norm_preserved_after_every_gate(seed, n):
    rng = np.random.default_rng(seed)
    psi = random_state(n, rng) if n > 1 else QuantumState.zero(1)
    for _ in range(25):
        gate = _random_gate(rng, n) if n > 1 else Gate("RY", (0,), (), float(rng.normal()))
        apply_gate(psi, gate)
        assert abs(psi.norm_sq() - 1) < 1e-9


def test_qft_roundtrip_and_known_cases():
    rng = np.random.default_rng(7)
    for _ in range(10):
        psi = random_state(3, rng)
        out = apply_inverse_qft(apply_qft(psi.copy(), [0, 1, 2]), [0, 1, 2])
        np.testing.assert_allclose(out.amplitudes, psi.amplitudes, atol=1e-10)
    uniform = run_circuit(Circuit(3).h(0).h(1).h(2))
    out = apply_inverse_qft(uniform, [0, 1, 2])
    np.testing.assert_allclose(out.amplitudes, QuantumState.zero(3).amplitudes, atol=1e-12)
    for i in (0, 1):
        a = apply_inverse_qft(QuantumState.basis(1, i), [0]).amplitudes
        b = run_circuit(Circuit(1).h(0), QuantumState.basis(1, i)).amplitudes
        np.testing.assert_allclose(a, b, atol=1e-15)


def test_qft_matches_dft_matrix_on_subregister():
    # register (2, 0) inside 3 qubits: qubit 2 is the low bit of the register
    rng = np.random.default_rng(11)
    psi = random_state(3, rng)
    out = apply_qft(psi.copy(), [2, 0]).amplitudes
    M = 4
    F = np.exp(2j * np.pi * np.outer(range(M), range(M)) / M) / 2
    expected = np.zeros(8, complex)
    for i in range(8):
        x = ((i >> 2) & 1) | ((i & 1) << 1)
        rest = i & 0b010
        for y in range(M):
            j = rest | ((y & 1) << 2) | (y >> 1)
            expected[j] += F[y, x] * psi.amplitudes[i]
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_qft_rejects_duplicates():
    with pytest.raises(QubitError):
        apply_inverse_qft(QuantumState.zero(2), [0, 0])


def test_marginals():
    assert marginal_prob_one(QuantumState.zero(1), 0) == 0
    s = run_circuit(Circuit(1).ry(2 * math.asin(math.sqrt(0.3)), 0))
    assert abs(marginal_prob_one(s, 0) - 0.3) < 1e-12
    bell = run_circuit(Circuit(2).h(0).x(1, (0,)))
    assert marginal_prob_one(bell, 0) == pytest.approx(0.5)
    assert marginal_prob_one(bell, 1) == pytest.approx(0.5)


def test_register_distribution_order():
    # qubit 2 = 1, qubit 0 = 0: register [0, 2] reads 0b10 = 2, register [2, 0] reads 1
    s = run_circuit(Circuit(3).x(2))
    assert register_distribution(s, [0, 2])[2] == 1
    assert register_distribution(s, [2, 0])[1] == 1


def test_sampling():
    assert sample_register(QuantumState.zero(3), [0, 1, 2], 50, 1) == {0: 50}
    uniform = run_circuit(Circuit(2).h(0).h(1))
    hist = sample_register(uniform, [0, 1], 100_000, 3)
    for k in range(4):
        assert abs(hist[k] / 100_000 - 0.25) < 0.01
    assert sample_register(uniform, [0, 1], 1000, 42) == sample_register(uniform, [0, 1], 1000, 42)
    with pytest.raises(QubitError):
        sample_register(uniform, [], 10, 1)


def test_validation_errors():
    with pytest.raises(QubitError):
        Gate("X", (0,), (0,))
    with pytest.raises(ValidationError):
        Gate("RY", (0,), (), float("nan"))
    with pytest.raises(QubitError):
        Circuit(2).x(2)
    with pytest.raises(QubitError):
        apply_gate(QuantumState.zero(2), Gate("X", (3,)))
    with pytest.raises(ValidationError):
        QuantumState([1, 1])
    with pytest.raises(QubitError):
        controlled(Gate("X", (0,)), [0])


def test_dumps_is_stable():
    c = Circuit(2).h(0).ry(0.5, 1, (0,))
    assert c.dumps() == Circuit(2).h(0).ry(0.5, 1, (0,)).dumps()
    assert len(c) == 2


def test_phase0_flips_only_all_zero():
    s = run_circuit(Circuit(3).h(0).h(1).h(2))
    apply_gate(s, Gate("PHASE0", (0, 1, 2)))
    signs = np.sign(s.amplitudes.real)
    assert signs[0] == -1 and np.all(signs[1:] == 1)
