"""Circuit builders for the tranche-loss pipeline.

Pipeline order: load the factor distribution on the z register, rotate every
asset qubit by its z-dependent default angle, add the losses of defaulted
assets into the sum register, flag the loss against each interior
breakpoint, rotate the objective qubit by the piecewise-linear tranche
payoff, then uncompute the flags.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .copula import Asset, Distribution, RotationCoeffs, affine_grid_angles, linearization_coeffs
from .dist import DiscreteDistribution
from .errors import QubitBudgetError, ValidationError
from .qsim import Circuit, Gate, QubitId
from .tranche import PiecewiseSpec, Tranche, tranche_to_piecewise

MAX_QUBITS = 24


@dataclass(frozen=True)
class RegisterLayout:
    z_register: tuple[QubitId, ...]
    asset_register: tuple[QubitId, ...]
    sum_register: tuple[QubitId, ...]
    carry_ancillas: tuple[QubitId, ...]
    comparator_ancillas: tuple[QubitId, ...]
    objective: QubitId

    def __post_init__(self):
        ids = self.all_qubits
        if len(set(ids)) != len(ids):
            raise ValidationError("register layout reuses a qubit")
        if len(self.carry_ancillas) < max(len(self.sum_register) - 1, 0):
            raise ValidationError("need at least n_s - 1 carry ancillas")

    @property
    def all_qubits(self) -> tuple[QubitId, ...]:
        return (
            self.z_register
            + self.asset_register
            + self.sum_register
            + self.carry_ancillas
            + self.comparator_ancillas
            + (self.objective,)
        )

    @property
    def n_qubits(self) -> int:
        return max(self.all_qubits) + 1

    @property
    def ancillas(self) -> tuple[QubitId, ...]:
        return self.carry_ancillas + self.comparator_ancillas

    @classmethod
    def allocate(cls, n_z: int, n_x: int, n_s: int, n_comparators: int) -> RegisterLayout:
        counter = itertools.count()
        take = lambda k: tuple(next(counter) for _ in range(k))
        return cls(
            z_register=take(n_z),
            asset_register=take(n_x),
            sum_register=take(n_s),
            carry_ancillas=take(max(n_s - 1, 0)),
            comparator_ancillas=take(n_comparators),
            objective=next(counter),
        )


def sum_register_size(losses: Sequence[float]) -> int:
    total = int(sum(losses))
    return max(1, total.bit_length())


def _integer_losses(assets: Sequence[Asset]) -> list[int]:
    out = []
    for i, a in enumerate(assets):
        lam = a.loss_given_default
        if abs(lam - round(lam)) > 1e-9:
            raise ValidationError(
                f"circuit encoding needs integer losses, got {lam}", f"assets[{i}].loss_given_default"
            )
        out.append(int(round(lam)))
    return out


def _controls_on(circ: Circuit, qubits, values):
    """X-conjugation turning control-on-1 into control-on-``values``."""
    flips = [q for q, v in zip(qubits, values) if v == 0]
    for q in flips:
        circ.x(q)
    return flips


def build_distribution_loader(dist: DiscreteDistribution, layout: RegisterLayout) -> Circuit:
    """Exact amplitude preparation ``sum_i sqrt(probs[i]) |i>`` on the z register.

    Multiplexed RY tree, most significant qubit first. A level whose angles
    agree for every prefix collapses to one uncontrolled rotation.
    """
    n = dist.n_z
    if len(layout.z_register) != n:
        raise ValidationError(f"layout has {len(layout.z_register)} z qubits, distribution needs {n}")
    circ = Circuit(layout.n_qubits)
    # axis k of the tensor is bit n-1-k of the grid index
    tensor = np.asarray(dist.probs, dtype=float).reshape((2,) * n)
    for level in range(n):
        target = layout.z_register[n - 1 - level]
        prefix_qubits = [layout.z_register[n - 1 - k] for k in range(level)]
        marg = tensor.sum(axis=tuple(range(level + 1, n))) if level + 1 < n else tensor
        angles = {}
        for prefix in itertools.product((0, 1), repeat=level):
            p0, p1 = marg[prefix + (0,)], marg[prefix + (1,)]
            if p0 + p1 <= 0:
                continue
            angles[prefix] = 2 * math.atan2(math.sqrt(p1), math.sqrt(p0))
        values = list(angles.values())
        if values and np.allclose(values, values[0], rtol=0, atol=1e-15) and len(values) == 1 << level:
            theta = values[0]
            if abs(theta - math.pi / 2) < 1e-15:
                circ.h(target)
            elif theta != 0:
                circ.ry(theta, target)
            continue
        for prefix, theta in angles.items():
            if theta == 0:
                continue
            flips = _controls_on(circ, prefix_qubits, prefix)
            circ.ry(theta, target, prefix_qubits)
            for q in flips:
                circ.x(q)
    return circ


def build_lx_lz(
    assets: Sequence[Asset],
    coeffs: Sequence[RotationCoeffs],
    dist: DiscreteDistribution,
    layout: RegisterLayout,
) -> Circuit:
    """Per asset: a base RY plus one z-controlled RY per z qubit (affine mapping)."""
    if len(assets) != len(layout.asset_register) or len(coeffs) != len(assets):
        raise ValidationError(
            f"{len(assets)} assets, {len(coeffs)} coefficient sets, "
            f"{len(layout.asset_register)} asset qubits"
        )
    if len(layout.z_register) != dist.n_z:
        raise ValidationError("z register size does not match the distribution")
    circ = Circuit(layout.n_qubits)
    for qubit, cf in zip(layout.asset_register, coeffs):
        base, per_qubit = affine_grid_angles(cf, dist)
        circ.ry(base, qubit)
        for zq, theta in zip(layout.z_register, per_qubit):
            if theta != 0:
                circ.ry(float(theta), qubit, (zq,))
    return circ


def _carry_gates(j: int, bit: int, s, carries, target, control=None) -> list[Gate]:
    """Gates XOR-ing the carry out of position ``j`` into ``target``.

    ``bit`` is the constant addend's bit ``j``; the carry into ``j`` lives in
    ``carries[j - 1]``. With ``control`` set the addend is ``control * bit``,
    which still gives a zero carry chain when ``control`` is 0.
    """
    gates: list[Gate] = []
    ctl = () if control is None else (control,)
    if bit == 0:
        if j > 0:
            gates.append(Gate("X", (target,), (s[j], carries[j - 1])))
        return gates
    gates.append(Gate("X", (target,), ctl + (s[j],)))
    if j > 0:
        gates.append(Gate("X", (target,), (carries[j - 1],)))
        gates.append(Gate("X", (target,), (s[j], carries[j - 1])))
    return gates


def _controlled_add_constant(circ: Circuit, value: int, control: QubitId, s, carries) -> None:
    """Ripple-carry ``s += value`` when ``control`` is 1; carries return to 0.

    Carries are computed upwards, then released top-down: at each position the
    carry out is uncomputed while the sum bit still holds its old value, and
    only then is the sum bit updated.
    """
    n = len(s)
    bits = [(value >> j) & 1 for j in range(n)]
    if value >> n:
        raise ValidationError(f"constant {value} does not fit in {n} bits")
    computed = []
    for j in range(n - 1):
        gs = _carry_gates(j, bits[j], s, carries, carries[j], control)
        circ.extend(gs)
        computed.append(gs)
    for j in reversed(range(n)):
        if j < n - 1:
            circ.extend(reversed(computed[j]))
        if bits[j]:
            circ.x(s[j], (control,))
        if j > 0:
            circ.x(s[j], (carries[j - 1],))


def build_weighted_sum(assets: Sequence[Asset], layout: RegisterLayout) -> Circuit:
    """Add ``loss_given_default`` into the sum register for every defaulted asset."""
    losses = _integer_losses(assets)
    n_s = len(layout.sum_register)
    if sum(losses) > (1 << n_s) - 1:
        raise ValidationError(
            f"total loss {sum(losses)} exceeds the {n_s}-qubit sum register capacity {(1 << n_s) - 1}",
            "sum_register",
        )
    if len(assets) != len(layout.asset_register):
        raise ValidationError("asset count does not match the asset register")
    circ = Circuit(layout.n_qubits)
    for qubit, lam in zip(layout.asset_register, losses):
        if lam:
            _controlled_add_constant(circ, lam, qubit, layout.sum_register, layout.carry_ancillas)
    return circ


def comparator_gates(s, carries, flag: QubitId, threshold: int) -> list[Gate]:
    """Gates flipping ``flag`` iff the integer in ``s`` is >= ``threshold``.

    Computes the carry out of ``s + (2**n - threshold)``; intermediate carries
    are uncomputed so only ``flag`` changes.
    """
    n = len(s)
    if not 0 <= threshold <= (1 << n) - 1:
        raise ValidationError(f"threshold {threshold} outside 0..{(1 << n) - 1}", "threshold")
    if threshold == 0:
        return [Gate("X", (flag,))]
    t = (1 << n) - threshold
    compute: list[list[Gate]] = []
    for j in range(n):
        target = carries[j] if j < n - 1 else flag
        compute.append(_carry_gates(j, (t >> j) & 1, s, carries, target))
    gates = [g for gs in compute for g in gs]
    for gs in reversed(compute[:-1]):
        gates.extend(reversed(gs))
    return gates


def build_comparator(layout: RegisterLayout, threshold: int, flag: QubitId | None = None) -> Circuit:
    flag = layout.comparator_ancillas[0] if flag is None else flag
    circ = Circuit(layout.n_qubits)
    return circ.extend(comparator_gates(layout.sum_register, layout.carry_ancillas, flag, threshold))


def build_piecewise_objective(spec: PiecewiseSpec, layout: RegisterLayout) -> Circuit:
    """Comparators, objective rotations, then comparator uncomputation.

    The objective ends with amplitude angle ``spec.rotation(L)`` for sum
    register value ``L``. Segment 0 is a linear rotation on the sum bits;
    each later breakpoint adds, under its flag, the slope change measured
    from that breakpoint. RY angles are twice the amplitude angles.
    """
    n_flags = len(spec.breakpoints) - 1
    if len(layout.comparator_ancillas) < n_flags:
        raise ValidationError(
            f"{n_flags} comparator ancillas needed, layout has {len(layout.comparator_ancillas)}"
        )
    s, obj = layout.sum_register, layout.objective
    flags = layout.comparator_ancillas[:n_flags]
    scale = 2 * spec.c / (spec.f_max - spec.f_min)
    b, sl, off = spec.breakpoints, spec.slopes, spec.offsets

    compare: list[Gate] = []
    for k in range(1, n_flags + 1):
        compare.extend(comparator_gates(s, layout.carry_ancillas, flags[k - 1], b[k]))

    circ = Circuit(layout.n_qubits).extend(compare)
    g0 = math.pi / 4 - spec.c
    circ.ry(2 * (g0 + scale * (off[0] - sl[0] * b[0] - spec.f_min)), obj)
    for j, q in enumerate(s):
        if sl[0]:
            circ.ry(2 * scale * sl[0] * 2**j, obj, (q,))
    for k in range(1, n_flags + 1):
        flag = flags[k - 1]
        d_slope = sl[k] - sl[k - 1]
        base = spec.jump(k) - d_slope * b[k]
        if base:
            circ.ry(2 * scale * base, obj, (flag,))
        if d_slope:
            for j, q in enumerate(s):
                circ.ry(2 * scale * d_slope * 2**j, obj, (flag, q))
    return circ.extend(reversed(compare))


@dataclass(frozen=True)
class Pipeline:
    circuit: Circuit
    layout: RegisterLayout
    objective_spec: PiecewiseSpec
    coeffs: tuple[RotationCoeffs, ...]

    @property
    def n_qubits(self) -> int:
        return self.layout.n_qubits


def assemble_pipeline(
    assets: Sequence[Asset],
    dist: DiscreteDistribution,
    law: Distribution,
    tranche: Tranche,
    c: float = 0.25,
    max_qubits: int = MAX_QUBITS,
) -> Pipeline:
    """Full state-preparation circuit whose objective marginal encodes the tranche loss."""
    if not assets:
        raise ValidationError("portfolio has no assets", "assets")
    losses = _integer_losses(assets)
    n_s = sum_register_size(losses)
    spec = tranche_to_piecewise(tranche, sum(losses), c)
    layout = RegisterLayout.allocate(dist.n_z, len(assets), n_s, len(spec.breakpoints) - 1)
    if layout.n_qubits > max_qubits:
        raise QubitBudgetError(layout.n_qubits, max_qubits, "pipeline")
    coeffs = tuple(linearization_coeffs(a, law) for a in assets)
    circ = Circuit(layout.n_qubits)
    circ.compose(build_distribution_loader(dist, layout))
    circ.compose(build_lx_lz(assets, coeffs, dist, layout))
    circ.compose(build_weighted_sum(assets, layout))
    circ.compose(build_piecewise_objective(spec, layout))
    return Pipeline(circ, layout, spec, coeffs)
