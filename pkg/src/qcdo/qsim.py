"""Minimal statevector simulator.

Basis ordering is little-endian: qubit ``q`` is bit ``(i >> q) & 1`` of the
basis index ``i``. ``RY(theta)`` uses the half-angle convention,
``RY(theta)|0> = cos(theta/2)|0> + sin(theta/2)|1>``.

Gates are applied in place on an ``(2,) * n`` tensor view of the amplitude
array. Control qubits are fixed to 1 with length-1 basic slices, so a gate
with ``k`` controls only touches ``2**(n - k)`` amplitudes and never copies
the full vector.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import QubitError, ValidationError

QubitId = int

GATE_KINDS = ("H", "X", "Z", "RY", "SWAP", "PHASE0")

NORM_TOL = 1e-9


@dataclass(frozen=True)
class Gate:
    """A single gate.

    ``PHASE0`` flips the sign of the amplitudes in which every target qubit is
    0 (a reflection about the all-zeros state of ``targets``). ``SWAP`` takes
    exactly two targets; all other kinds except ``PHASE0`` take one.
    """

    kind: str
    targets: tuple[QubitId, ...]
    controls: tuple[QubitId, ...] = ()
    angle: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(q) for q in self.targets))
        object.__setattr__(self, "controls", tuple(int(q) for q in self.controls))
        if self.kind not in GATE_KINDS:
            raise ValidationError(f"unknown gate kind {self.kind!r}")
        n_targets = len(self.targets)
        if self.kind == "SWAP" and n_targets != 2:
            raise QubitError("SWAP needs exactly two targets")
        if self.kind == "PHASE0" and n_targets < 1:
            raise QubitError("PHASE0 needs at least one target")
        if self.kind not in ("SWAP", "PHASE0") and n_targets != 1:
            raise QubitError(f"{self.kind} takes exactly one target")
        qubits = self.targets + self.controls
        if any(q < 0 for q in qubits):
            raise QubitError(f"negative qubit index in {qubits}")
        if len(set(qubits)) != len(qubits):
            raise QubitError(f"targets {self.targets} and controls {self.controls} overlap")
        if self.kind == "RY":
            if self.angle is None or not math.isfinite(self.angle):
                raise ValidationError(f"RY angle must be finite, got {self.angle}")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise ValidationError(f"{self.kind} takes no angle")

    @property
    def qubits(self) -> tuple[QubitId, ...]:
        return self.targets + self.controls

    def inverse(self) -> Gate:
        if self.kind == "RY":
            return Gate("RY", self.targets, self.controls, -self.angle)
        return self

    def describe(self) -> str:
        angle = "-" if self.angle is None else repr(self.angle)
        targets = ",".join(map(str, self.targets))
        controls = ",".join(map(str, self.controls)) or "-"
        return f"{self.kind} {angle} {targets} {controls}"


def controlled(gate: Gate, extra_controls: Iterable[QubitId]) -> Gate:
    """Return ``gate`` acting only where every qubit of ``extra_controls`` is 1."""
    extra = tuple(int(q) for q in extra_controls)
    if set(extra) & set(gate.qubits):
        raise QubitError(f"controls {extra} overlap gate qubits {gate.qubits}")
    return Gate(gate.kind, gate.targets, gate.controls + extra, gate.angle)


@dataclass
class Circuit:
    """An ordered gate list over ``n_qubits`` qubits.

    The builder methods append and return ``self`` so small circuits can be
    written fluently; builders elsewhere in the package hand out finished
    circuits and never mutate them afterwards.
    """

    n_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        if self.n_qubits < 0:
            raise QubitError("n_qubits must be non-negative")
        gates, self.gates = list(self.gates), []
        for g in gates:
            self.append(g)

    def append(self, gate: Gate) -> Circuit:
        bad = [q for q in gate.qubits if q >= self.n_qubits]
        if bad:
            raise QubitError(f"{gate.kind} uses qubits {bad} outside a {self.n_qubits}-qubit circuit")
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> Circuit:
        for g in gates:
            self.append(g)
        return self

    def h(self, q, controls=()):
        return self.append(Gate("H", (q,), tuple(controls)))

    def x(self, q, controls=()):
        return self.append(Gate("X", (q,), tuple(controls)))

    def z(self, q, controls=()):
        return self.append(Gate("Z", (q,), tuple(controls)))

    def ry(self, theta, q, controls=()):
        return self.append(Gate("RY", (q,), tuple(controls), theta))

    def swap(self, q1, q2, controls=()):
        return self.append(Gate("SWAP", (q1, q2), tuple(controls)))

    def phase0(self, register, controls=()):
        return self.append(Gate("PHASE0", tuple(register), tuple(controls)))

    def compose(self, other: Circuit) -> Circuit:
        if other.n_qubits > self.n_qubits:
            raise QubitError("cannot compose a wider circuit into a narrower one")
        return self.extend(other.gates)

    def inverse(self) -> Circuit:
        return Circuit(self.n_qubits, [g.inverse() for g in reversed(self.gates)])

    def controlled(self, extra_controls: Sequence[QubitId], n_qubits: int | None = None) -> Circuit:
        width = self.n_qubits if n_qubits is None else n_qubits
        return Circuit(width, [controlled(g, extra_controls) for g in self.gates])

    def widened(self, n_qubits: int) -> Circuit:
        return Circuit(n_qubits, self.gates)

    def dumps(self) -> str:
        """Plain-text listing, one gate per line: kind, angle, targets, controls."""
        return "\n".join(g.describe() for g in self.gates)

    def __len__(self):
        return len(self.gates)


class QuantumState:
    """Complex amplitude vector over ``n_qubits`` little-endian qubits."""

    def __init__(self, amplitudes, n_qubits: int | None = None):
        amps = np.ascontiguousarray(amplitudes, dtype=np.complex128).ravel()
        n = int(round(math.log2(amps.size))) if n_qubits is None else n_qubits
        if amps.size != 1 << n:
            raise ValidationError(f"amplitude vector length {amps.size} is not 2**{n}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"state norm {norm} differs from 1")
        self.n_qubits = n
        self.amplitudes = amps

    @classmethod
    def zero(cls, n_qubits: int) -> QuantumState:
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps, n_qubits)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> QuantumState:
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(amps, n_qubits)

    def copy(self) -> QuantumState:
        return QuantumState(self.amplitudes.copy(), self.n_qubits)

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def tensor(self) -> np.ndarray:
        """View with one length-2 axis per qubit; axis ``n - 1 - q`` is qubit ``q``."""
        return self.amplitudes.reshape((2,) * self.n_qubits)

    def check_qubits(self, qubits: Iterable[QubitId]) -> None:
        bad = [q for q in qubits if not 0 <= q < self.n_qubits]
        if bad:
            raise QubitError(f"qubits {bad} invalid for a {self.n_qubits}-qubit state")


def _index(n: int, fixed: dict[int, int]) -> tuple:
    idx = [slice(None)] * n
    for q, bit in fixed.items():
        # a length-1 slice rather than an integer keeps the result a view
        # even when every axis is fixed
        idx[n - 1 - q] = slice(bit, bit + 1)
    return tuple(idx)


def apply_gate(state: QuantumState, gate: Gate) -> QuantumState:
    """Apply ``gate`` to ``state`` in place and return the same state."""
    state.check_qubits(gate.qubits)
    n = state.n_qubits
    psi = state.tensor()
    ctrl = {c: 1 for c in gate.controls}
    kind = gate.kind

    if kind == "PHASE0":
        psi[_index(n, {**ctrl, **{t: 0 for t in gate.targets}})] *= -1
        return state
    if kind == "SWAP":
        t1, t2 = gate.targets
        a = psi[_index(n, {**ctrl, t1: 0, t2: 1})]
        b = psi[_index(n, {**ctrl, t1: 1, t2: 0})]
        a0 = a.copy()
        a[...] = b
        b[...] = a0
        return state

    (t,) = gate.targets
    a = psi[_index(n, {**ctrl, t: 0})]
    b = psi[_index(n, {**ctrl, t: 1})]
    if kind == "Z":
        b *= -1
        return state
    a0 = a.copy()
    if kind == "X":
        a[...] = b
        b[...] = a0
    elif kind == "H":
        r = 1.0 / math.sqrt(2.0)
        a[...] = r * (a0 + b)
        b[...] = r * (a0 - b)
    elif kind == "RY":
        c, s = math.cos(gate.angle / 2), math.sin(gate.angle / 2)
        a[...] = c * a0 - s * b
        b[...] = s * a0 + c * b
    return state


def run_circuit(circuit: Circuit, initial: QuantumState | None = None) -> QuantumState:
    """Run ``circuit`` from ``initial`` (default ``|0...0>``); ``initial`` is not modified."""
    state = QuantumState.zero(circuit.n_qubits) if initial is None else initial.copy()
    if state.n_qubits != circuit.n_qubits:
        raise QubitError(f"circuit has {circuit.n_qubits} qubits, state has {state.n_qubits}")
    for gate in circuit.gates:
        apply_gate(state, gate)
    return state


def _fourier(state: QuantumState, register: Sequence[QubitId], inverse: bool) -> QuantumState:
    reg = [int(q) for q in register]
    if not reg:
        raise QubitError("empty register")
    if len(set(reg)) != len(reg):
        raise QubitError(f"duplicate qubits in register {reg}")
    state.check_qubits(reg)
    n = state.n_qubits
    psi = state.tensor()
    # register[0] is the least significant bit, so it must be the last axis
    axes = [n - 1 - q for q in reversed(reg)]
    moved = np.moveaxis(psi, axes, range(n - len(reg), n))
    shape = moved.shape
    flat = moved.reshape(shape[: n - len(reg)] + (1 << len(reg),))
    # QFT|x> = sum_y exp(+2 pi i x y / M)|y> / sqrt(M); numpy's fft uses the minus sign
    if inverse:
        out = np.fft.fft(flat, axis=-1, norm="ortho")
    else:
        out = np.fft.ifft(flat, axis=-1, norm="ortho")
    psi[...] = np.moveaxis(out.reshape(shape), range(n - len(reg), n), axes)
    return state


def apply_qft(state: QuantumState, register: Sequence[QubitId]) -> QuantumState:
    """Apply the quantum Fourier transform on ``register`` (first qubit least significant)."""
    return _fourier(state, register, inverse=False)


def apply_inverse_qft(state: QuantumState, register: Sequence[QubitId]) -> QuantumState:
    """Apply the inverse quantum Fourier transform on ``register``, in place."""
    return _fourier(state, register, inverse=True)


def marginal_prob_one(state: QuantumState, qubit: QubitId) -> float:
    state.check_qubits([qubit])
    probs = state.probabilities().reshape((2,) * state.n_qubits)
    p = float(probs[_index(state.n_qubits, {qubit: 1})].sum())
    return min(max(p, 0.0), 1.0)


def register_distribution(state: QuantumState, register: Sequence[QubitId]) -> np.ndarray:
    """Exact outcome distribution of ``register`` read as an integer (register[0] = bit 0)."""
    reg = [int(q) for q in register]
    if not reg:
        raise QubitError("empty register")
    if len(set(reg)) != len(reg):
        raise QubitError(f"duplicate qubits in register {reg}")
    state.check_qubits(reg)
    n = state.n_qubits
    probs = state.probabilities().reshape((2,) * n)
    keep = [n - 1 - q for q in reversed(reg)]
    other = tuple(ax for ax in range(n) if ax not in keep)
    marg = probs.sum(axis=other) if other else probs
    # remaining axes are in ascending axis order; reorder to (msb ... lsb) of the register
    order = sorted(keep)
    marg = np.transpose(marg, [order.index(ax) for ax in keep])
    return marg.reshape(-1)


def sample_distribution(probs: np.ndarray, n: int, seed: int) -> dict[int, int]:
    """Inverse-CDF sampling from ``probs`` with a counter-based (Philox) generator."""
    if n < 1:
        raise ValidationError(f"sample count must be >= 1, got {n}")
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    u = np.random.Generator(np.random.Philox(seed)).random(n)
    outcomes = np.searchsorted(cdf, u, side="right")
    outcomes = np.minimum(outcomes, len(probs) - 1)
    counts = Counter(outcomes.tolist())
    return dict(sorted(counts.items()))


def sample_register(state: QuantumState, register: Sequence[QubitId], n: int, seed: int) -> dict[int, int]:
    """Histogram of ``n`` simulated measurements of ``register``; deterministic in ``seed``."""
    return sample_distribution(register_distribution(state, register), n, seed)
