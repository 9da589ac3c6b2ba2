"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a single PASS/FAIL line that is echoed in the pytest
terminal summary (and printed directly when run with ``-s``). All inputs
come from the bundled reference configurations.
"""

import itertools
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_state
from qcdo.config import parse_config, reference_path
from qcdo.copula import conditional_default_prob, linearization_coeffs
from qcdo.dist import NigSpec, quadrature_moments
from qcdo.loaders import (
    RegisterLayout,
    assemble_pipeline,
    build_comparator,
    build_piecewise_objective,
    build_weighted_sum,
    sum_register_size,
)
from qcdo.pricing import (
    exact_expected_tranche_loss,
    exact_expected_total_loss,
    price_portfolio,
    price_via_qae,
    taylor_budget,
)
from qcdo.qae import QaeConfig, build_grover_operator, grid_estimate, qae_error_bound, run_qae
from qcdo.qsim import (
    Circuit,
    QuantumState,
    apply_gate,
    apply_inverse_qft,
    apply_qft,
    marginal_prob_one,
    register_distribution,
    run_circuit,
)
from qcdo.tranche import tranche_to_piecewise


def record(k: int, ok: bool, detail: str) -> None:
    line = f"[criterion {k}] {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[k] = line
    print(line)


@pytest.fixture(scope="module")
def nig_cfg():
    return parse_config(reference_path("nig"))


@pytest.fixture(scope="module")
def gauss_cfg():
    return parse_config(reference_path("gaussian"))


def test_criterion_1_reference_spreads(nig_cfg):
    target = {"Equity": 0.499, "Mezzanine": 0.481, "Senior": 0.018}
    start = time.perf_counter()
    report = price_portfolio(nig_cfg.portfolio, nig_cfg.distribution(), nig_cfg.law, ("exact",))
    elapsed = time.perf_counter() - start
    gaps = {e.name: 100 * (e.spread - target[e.name]) for e in report.entries}
    ok = all(abs(g) <= 2.0 for g in gaps.values()) and elapsed < 1.0
    got = ", ".join(f"{e.name} {100 * e.spread:.2f}% ({gaps[e.name]:+.2f}pp)" for e in report.entries)
    record(1, ok, f"{got}; tolerance 2.0pp; runtime {elapsed:.3f}s")
    assert elapsed < 1.0
    for name, gap in gaps.items():
        assert abs(gap) <= 2.0, f"{name} spread off by {gap:+.2f}pp"


def test_criterion_2_gaussian_consistency(gauss_cfg):
    pf, law, c = gauss_cfg.portfolio, gauss_cfg.law, gauss_cfg.c
    dist = gauss_cfg.distribution()
    rep = price_portfolio(pf, dist, law, ("exact", "mc"), mc_samples=10_000, mc_seed=gauss_cfg.mc_seed)
    exact = {e.name: e.expected_loss for e in rep.by_method("exact")}
    problems = []
    for e in rep.by_method("mc"):
        se = e.diagnostics["standard_error"]
        if abs(e.expected_loss - exact[e.name]) > 3 * se:
            problems.append(f"mc {e.name}")
    start = time.perf_counter()
    worst = 0.0
    for m in (4, 5):
        cfg = QaeConfig(m=m, shots=gauss_cfg.qae.shots, seed=gauss_cfg.qae.seed)
        for t in pf.tranches:
            r = price_via_qae(pf, dist, law, t, c, cfg)
            budget = t.notional / (2 * c) * (qae_error_bound(m) + taylor_budget(c))
            err = abs(r.expected_loss - exact[t.name])
            worst = max(worst, err / budget)
            if err > budget:
                problems.append(f"qae m={m} {t.name}")
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed < 120
    record(2, ok, f"worst |QAE-exact|/budget {worst:.3f}; MC within 3SE; QAE sweep {elapsed:.1f}s"
           + (f"; failures {problems}" if problems else ""))
    assert not problems
    assert elapsed < 120


def test_criterion_3_qae_soundness():
    # Per run: the modal estimate is inside the bound and the exact (statevector)
    # in-bound probability is at least 8/pi^2. Across the suite: the sampled
    # in-bound frequency is at least 0.81. A single 200-shot run tested against
    # the theoretical floor itself would fail by sampling noise alone, so its
    # minimum is reported but not asserted.
    floor = 8 / math.pi**2
    rng = np.random.default_rng(20240601)
    angles = rng.uniform(0, math.pi, 20)
    modal_misses, good_shots, total_shots = 0, 0, 0
    worst_exact, worst_run = 1.0, 1.0
    for i, theta in enumerate(angles):
        A = Circuit(1).ry(float(theta), 0)
        a = math.sin(theta / 2) ** 2
        for m in (3, 4, 5):
            eps = qae_error_bound(m)
            r = run_qae(A, 0, QaeConfig(m=m, shots=200, seed=1000 + 10 * i + m))
            inside = [abs(grid_estimate(y, m) - a) <= eps for y in range(1 << m)]
            modal_misses += not inside[r.y_mode]
            worst_exact = min(worst_exact, sum(p for p, ok in zip(r.probabilities, inside) if ok))
            good = sum(n for y, n in r.histogram.items() if inside[y])
            worst_run = min(worst_run, good / r.shots)
            good_shots += good
            total_shots += r.shots
    pooled = good_shots / total_shots
    ok = modal_misses == 0 and worst_exact >= floor and pooled >= 0.81
    record(3, ok, f"60 runs; modal outside bound {modal_misses}; in-bound frequency {pooled:.3f} over "
           f"{total_shots} shots (>= 0.81); min exact in-bound probability {worst_exact:.4f} (>= 8/pi^2); "
           f"min single-run frequency {worst_run:.3f}")
    assert modal_misses == 0
    assert worst_exact >= floor
    assert pooled >= 0.81


def test_criterion_4_nig_moments(nig_cfg):
    spec = nig_cfg.law
    m = quadrature_moments(spec.pdf, spec.mu, 40 * spec.delta)
    ref_ok = (
        abs(m.mean) < 1e-3 and abs(m.variance - 1) < 1e-3
        and abs(m.skewness - 1) < 5e-3 and abs(m.kurtosis - 6) < 2e-2
    )
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(3):
        alpha = rng.uniform(0.8, 3.0)
        s = NigSpec(alpha, rng.uniform(-0.6, 0.6) * alpha, rng.uniform(-1, 1), rng.uniform(0.5, 2.0))
        quad = quadrature_moments(s.pdf, s.mu, 60 * s.delta + 60 / (s.alpha - abs(s.beta)))
        worst = max(worst, float(np.max(np.abs(np.array(s.moments()) - np.array(quad)))))
    ok = ref_ok and worst < 1e-3
    record(4, ok, f"reference moments ({m.mean:.5f}, {m.variance:.5f}, {m.skewness:.5f}, {m.kurtosis:.4f}); "
           f"closed form vs quadrature max gap {worst:.2e}")
    assert ref_ok
    assert worst < 1e-3


def _basis(n, bits):
    return QuantumState.basis(n, sum(v << q for q, v in bits.items()))


def test_criterion_5_reversible_arithmetic(nig_cfg):
    assets = nig_cfg.portfolio.assets
    lams = [int(a.loss_given_default) for a in assets]
    n_s = sum_register_size(lams)
    failures = 0
    checks = 0
    worst_ancilla = 0.0

    layout = RegisterLayout.allocate(0, len(assets), n_s, 0)
    circ = build_weighted_sum(assets, layout)
    for pattern in itertools.product((0, 1), repeat=len(assets)):
        out = run_circuit(circ, _basis(layout.n_qubits, dict(zip(layout.asset_register, pattern))))
        probs = register_distribution(out, layout.sum_register)
        failures += probs[sum(p * l for p, l in zip(pattern, lams))] < 1 - 1e-9
        worst_ancilla = max([worst_ancilla] + [marginal_prob_one(out, q) for q in layout.ancillas])
        checks += 1

    layout = RegisterLayout.allocate(0, 0, n_s, 1)
    flag = layout.comparator_ancillas[0]
    for K in range(1 << n_s):
        circ = build_comparator(layout, K)
        for s in range(1 << n_s):
            bits = {q: (s >> j) & 1 for j, q in enumerate(layout.sum_register)}
            out = run_circuit(circ, _basis(layout.n_qubits, bits))
            failures += abs(marginal_prob_one(out, flag) - (s >= K)) > 1e-9
            failures += register_distribution(out, layout.sum_register)[s] < 1 - 1e-9
            worst_ancilla = max([worst_ancilla] + [marginal_prob_one(out, q) for q in layout.carry_ancillas])
            checks += 1

    # comparator flags are uncomputed by the objective stage for every sum value
    for t in nig_cfg.portfolio.tranches:
        spec = tranche_to_piecewise(t, sum(lams))
        layout = RegisterLayout.allocate(0, 0, n_s, len(spec.breakpoints) - 1)
        circ = build_piecewise_objective(spec, layout)
        for s in range(1 << n_s):
            bits = {q: (s >> j) & 1 for j, q in enumerate(layout.sum_register)}
            out = run_circuit(circ, _basis(layout.n_qubits, bits))
            worst_ancilla = max([worst_ancilla] + [marginal_prob_one(out, q) for q in layout.ancillas])
            checks += 1

    ok = failures == 0 and worst_ancilla < 1e-9
    record(5, ok, f"{checks} basis-input checks, {failures} wrong; max ancilla |1> probability {worst_ancilla:.1e}")
    assert failures == 0
    assert worst_ancilla < 1e-9


def test_criterion_6_linearization_fidelity(nig_cfg, gauss_cfg):
    worst, worst_at, worst_zero = 0.0, "", 0.0
    for cfg in (gauss_cfg, nig_cfg):
        grid = cfg.distribution().grid
        kind = type(cfg.law).__name__
        for i, a in enumerate(cfg.portfolio.assets):
            cf = linearization_coeffs(a, cfg.law)
            dev = np.abs(np.sin(cf.angle(grid) / 2) ** 2 - conditional_default_prob(a, grid, cfg.law))
            if dev.max() > worst:
                worst, worst_at = float(dev.max()), f"asset {i + 1} {kind} z={grid[int(dev.argmax())]:+.1f}"
            zero_gap = abs(math.sin(cf.angle(0.0) / 2) ** 2 - conditional_default_prob(a, 0.0, cfg.law))
            worst_zero = max(worst_zero, zero_gap)
    ok = worst < 0.01 and worst_zero < 1e-12
    record(6, ok, f"max grid deviation {worst:.4f} at {worst_at} (limit 0.01); gap at z=0 {worst_zero:.1e}")
    assert worst_zero < 1e-12
    assert worst < 0.01


def test_criterion_7_conservation(nig_cfg, gauss_cfg):
    worst = 0.0
    for cfg in (gauss_cfg, nig_cfg):
        dist = cfg.distribution()
        parts = sum(exact_expected_tranche_loss(cfg.portfolio, dist, t, cfg.law) for t in cfg.portfolio.tranches)
        worst = max(worst, abs(parts - exact_expected_total_loss(cfg.portfolio, dist, cfg.law)))
    record(7, worst < 1e-12, f"max |sum of tranche losses - total loss| {worst:.1e}")
    assert worst < 1e-12


def test_criterion_8_simulator_hygiene(nig_cfg):
    worst_norm = 0.0
    dist = nig_cfg.distribution()
    circuits = []
    for t in nig_cfg.portfolio.tranches:
        pipe = assemble_pipeline(nig_cfg.portfolio.assets, dist, nig_cfg.law, t, nig_cfg.c)
        circuits.append(pipe.circuit)
    circuits.append(build_grover_operator(circuits[0], circuits[0].n_qubits - 1))
    for circ in circuits:
        state = QuantumState.zero(circ.n_qubits)
        for g in circ.gates:
            apply_gate(state, g)
            worst_norm = max(worst_norm, abs(state.norm_sq() - 1))

    rng = np.random.default_rng(8)
    worst_qft = 0.0
    for n in (1, 2, 3, 4, 5, 6):
        psi = random_state(n, rng)
        reg = [int(q) for q in rng.permutation(n)]
        back = apply_inverse_qft(apply_qft(psi.copy(), reg), reg)
        worst_qft = max(worst_qft, float(np.max(np.abs(back.amplitudes - psi.amplitudes))))

    def report():
        return price_portfolio(
            nig_cfg.portfolio, dist, nig_cfg.law, ("exact", "mc", "qae"),
            mc_samples=nig_cfg.mc_samples, mc_seed=nig_cfg.mc_seed, c=nig_cfg.c, qae_config=nig_cfg.qae,
        ).to_json()

    stable = report() == report()
    ok = worst_norm < 1e-9 and worst_qft < 1e-10 and stable
    record(8, ok, f"max norm drift {worst_norm:.1e}; QFT round trip {worst_qft:.1e}; reports bitwise stable: {stable}")
    assert worst_norm < 1e-9
    assert worst_qft < 1e-10
    assert stable
