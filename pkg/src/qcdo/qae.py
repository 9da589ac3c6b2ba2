"""Canonical quantum amplitude estimation (phase estimation on the Grover operator).

Two engines produce the same final statevector:

* ``"circuit"`` builds the whole ``n + m`` qubit circuit (Hadamards, the
  controlled-``Q**(2**j)`` ladder as repeated controlled-``Q`` gates, inverse
  QFT) and runs it gate by gate.
* ``"blocks"`` uses that after the Hadamards and the controlled ladder the
  ancilla value ``y`` tags the work-register block ``Q**y A|0>`` / sqrt(M).
  It computes those ``M`` blocks with uncontrolled ``Q`` on the work register
  and applies the inverse QFT across them. This is the default because it
  avoids dragging every gate over the ancilla dimension.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import QubitBudgetError, ValidationError
from .loaders import MAX_QUBITS
from .qsim import (
    Circuit,
    QuantumState,
    QubitId,
    apply_gate,
    apply_inverse_qft,
    marginal_prob_one,
    register_distribution,
    run_circuit,
    sample_distribution,
)

MAX_M = 6


@dataclass(frozen=True)
class QaeConfig:
    m: int = 4
    shots: int = 1000
    seed: int = 42

    def __post_init__(self):
        if not 1 <= self.m <= MAX_M:
            raise ValidationError(f"m must lie in 1..{MAX_M}, got {self.m}", "m")
        if self.shots < 1:
            raise ValidationError(f"shots must be >= 1, got {self.shots}", "shots")

    @property
    def M(self) -> int:
        return 1 << self.m


@dataclass
class QaeResult:
    histogram: dict[int, int]
    y_mode: int | None
    a_estimate: float
    theta: float
    error_bound: float
    exact_p1: float
    m: int
    shots: int
    seed: int
    a_mean: float
    notice: str | None = None
    probabilities: list[float] = field(default_factory=list, repr=False)

    @property
    def frequencies(self) -> dict[int, float]:
        total = sum(self.histogram.values())
        return {y: n / total for y, n in self.histogram.items()}

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("probabilities")
        out["histogram"] = {str(k): v for k, v in self.histogram.items()}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> QaeResult:
        data = dict(data)
        data["histogram"] = {int(k): v for k, v in data["histogram"].items()}
        return cls(**data)


def qae_error_bound(m: int) -> float:
    """``pi/M + pi**2/M**2`` with ``M = 2**m``."""
    if m < 1:
        raise ValidationError(f"m must be >= 1, got {m}", "m")
    M = 2.0**m
    return math.pi / M + math.pi**2 / M**2


def grid_estimate(y: int, m: int) -> float:
    return math.sin(y * math.pi / (1 << m)) ** 2


def build_grover_operator(A: Circuit, objective: QubitId) -> Circuit:
    """``Q = -A S0 A^dagger S_good`` as a gate list (first gate applied first).

    ``S_good`` flips the sign of objective-|1> states and ``S0`` that of the
    all-zeros state. The overall minus sign matters once ``Q`` is controlled,
    so the good-state reflection is emitted as ``X Z X`` (a sign flip on
    objective-|0>), which equals ``-S_good``.
    """
    if not 0 <= objective < A.n_qubits:
        raise ValidationError(f"objective qubit {objective} outside the {A.n_qubits}-qubit register")
    Q = Circuit(A.n_qubits)
    Q.x(objective).z(objective).x(objective)
    Q.compose(A.inverse())
    Q.phase0(range(A.n_qubits))
    Q.compose(A)
    return Q


def exact_p1(A: Circuit, objective: QubitId) -> float:
    """Probability that the objective qubit of ``A|0...0>`` reads 1."""
    return marginal_prob_one(run_circuit(A), objective)


def qpe_circuit(A: Circuit, objective: QubitId, m: int) -> tuple[Circuit, list[QubitId]]:
    """Whole phase-estimation circuit, ancillas above the work register (QFT^-1 excluded)."""
    n = A.n_qubits
    width = n + m
    ancillas = list(range(n, width))
    Q = build_grover_operator(A, objective)
    circ = A.widened(width)
    for a in ancillas:
        circ.h(a)
    for j, a in enumerate(ancillas):
        cq = Q.controlled([a], width)
        for _ in range(1 << j):
            circ.compose(cq)
    return circ, ancillas


def _final_state_circuit(A: Circuit, objective: QubitId, m: int) -> QuantumState:
    circ, ancillas = qpe_circuit(A, objective, m)
    state = run_circuit(circ)
    return apply_inverse_qft(state, ancillas)


def _final_state_blocks(A: Circuit, objective: QubitId, m: int) -> QuantumState:
    M = 1 << m
    Q = build_grover_operator(A, objective)
    psi = run_circuit(A)
    blocks = np.empty((M, psi.amplitudes.size), dtype=np.complex128)
    blocks[0] = psi.amplitudes
    for y in range(1, M):
        for gate in Q.gates:
            apply_gate(psi, gate)
        blocks[y] = psi.amplitudes
    # sum_y |y> Q^y psi / sqrt(M), then QFT^-1 over y: both 1/sqrt(M) factors give 1/M
    out = np.fft.fft(blocks, axis=0) / M
    return QuantumState(out.ravel(), A.n_qubits + m)


def qpe_state(A: Circuit, objective: QubitId, m: int, engine: str = "blocks") -> QuantumState:
    """Statevector after phase estimation; ancilla ``j`` is qubit ``A.n_qubits + j``."""
    if engine == "blocks":
        return _final_state_blocks(A, objective, m)
    if engine == "circuit":
        return _final_state_circuit(A, objective, m)
    raise ValidationError(f"unknown engine {engine!r}", "engine")


def _modal_outcome(histogram: dict[int, int], m: int) -> int:
    # highest count; ties toward smaller estimate, then smaller y
    return min(histogram, key=lambda y: (-histogram[y], grid_estimate(y, m), y))


def run_qae(
    A: Circuit,
    objective: QubitId,
    config: QaeConfig,
    engine: str = "blocks",
    max_qubits: int = MAX_QUBITS,
) -> QaeResult:
    """Estimate the objective-|1> probability of ``A|0>`` with ``config.m`` ancillas."""
    n = A.n_qubits
    if n + config.m > max_qubits:
        raise QubitBudgetError(n + config.m, max_qubits, "amplitude estimation")
    state = qpe_state(A, objective, config.m, engine)
    ancillas = list(range(n, n + config.m))
    probs = register_distribution(state, ancillas)
    histogram = sample_distribution(probs, config.shots, config.seed)
    y_star = _modal_outcome(histogram, config.m)
    theta = y_star * math.pi / config.M
    mean = sum(cnt * grid_estimate(y, config.m) for y, cnt in histogram.items()) / config.shots
    return QaeResult(
        histogram=histogram,
        y_mode=y_star,
        a_estimate=grid_estimate(y_star, config.m),
        theta=theta,
        error_bound=qae_error_bound(config.m),
        exact_p1=exact_p1(A, objective),
        m=config.m,
        shots=config.shots,
        seed=config.seed,
        a_mean=mean,
        probabilities=probs.tolist(),
    )


def oracle_result(A: Circuit, objective: QubitId, config: QaeConfig, reason: str) -> QaeResult:
    """Result carrying the exact amplitude in place of a sampled estimate."""
    a = exact_p1(A, objective)
    return QaeResult(
        histogram={},
        y_mode=None,
        a_estimate=a,
        theta=math.asin(math.sqrt(a)),
        error_bound=0.0,
        exact_p1=a,
        m=config.m,
        shots=config.shots,
        seed=config.seed,
        a_mean=a,
        notice=f"exact amplitude used instead of phase estimation: {reason}",
    )
