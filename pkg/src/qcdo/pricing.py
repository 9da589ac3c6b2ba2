"""Tranche pricing: exact enumeration, Monte Carlo and amplitude estimation.

All three methods share one model: the factor takes the values of the
discretised grid with its probabilities, and given ``z`` the defaults are
independent Bernoulli draws with ``conditional_default_prob``.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .copula import Asset, Distribution, conditional_default_prob
from .dist import DiscreteDistribution
from .errors import QubitBudgetError, ValidationError
from .loaders import MAX_QUBITS, assemble_pipeline
from .qae import QaeConfig, oracle_result, run_qae
from .tranche import PiecewiseSpec, Tranche, tranche_loss, tranche_to_piecewise

__all__ = [
    "Portfolio",
    "PricingReport",
    "TrancheResult",
    "Tranche",
    "PiecewiseSpec",
    "apply_recovery",
    "exact_expected_tranche_loss",
    "exact_expected_total_loss",
    "fair_spread",
    "loss_distribution",
    "monte_carlo_expected_loss",
    "price_portfolio",
    "price_via_qae",
    "qae_inversion",
    "tranche_loss",
    "tranche_to_piecewise",
]

MAX_ENUMERATED_ASSETS = 20
MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class Portfolio:
    assets: tuple[Asset, ...]
    tranches: tuple[Tranche, ...]
    recovery: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        object.__setattr__(self, "tranches", tuple(self.tranches))
        if not self.assets:
            raise ValidationError("at least one asset is required", "assets")
        if not self.tranches:
            raise ValidationError("at least one tranche is required", "tranches")
        if not 0 <= self.recovery <= 1:
            raise ValidationError(f"must lie in [0, 1], got {self.recovery}", "recovery")
        if self.tranches[0].lower != 0:
            raise ValidationError("first tranche must attach at 0", "tranches[0].lower")
        for k in range(1, len(self.tranches)):
            if self.tranches[k].lower != self.tranches[k - 1].upper:
                raise ValidationError(
                    "tranches must be contiguous and ordered", f"tranches[{k}].lower"
                )
        names = [t.name for t in self.tranches]
        if len(set(names)) != len(names):
            raise ValidationError("tranche names must be unique", "tranches")
        if self.tranches[-1].upper > self.max_loss + 1e-12:
            warnings.warn(
                f"top attachment {self.tranches[-1].upper} exceeds the maximum pool loss {self.max_loss}",
                stacklevel=2,
            )

    @property
    def losses(self) -> np.ndarray:
        """Loss given default net of recovery."""
        return np.array([a.loss_given_default for a in self.assets], dtype=float) * (1 - self.recovery)

    @property
    def max_loss(self) -> float:
        return float(self.losses.sum())

    def loss_assets(self) -> tuple[Asset, ...]:
        return tuple(
            replace(a, loss_given_default=float(lam)) for a, lam in zip(self.assets, self.losses)
        )

    def tranche(self, name: str) -> Tranche:
        for t in self.tranches:
            if t.name == name:
                return t
        raise ValidationError(
            f"unknown tranche {name!r}; available: {', '.join(t.name for t in self.tranches)}",
            "tranche",
        )


def apply_recovery(portfolio: Portfolio, eta: float) -> Portfolio:
    """Scale every loss given default by ``1 - eta``; attachment points are kept."""
    if not 0 <= eta <= 1:
        raise ValidationError(f"recovery must lie in [0, 1], got {eta}", "recovery")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assets = tuple(
            replace(a, loss_given_default=a.loss_given_default * (1 - eta))
            for a in portfolio.loss_assets()
        )
        return replace(portfolio, assets=assets, recovery=0.0)


def conditional_matrix(assets: Sequence[Asset], dist: DiscreteDistribution, law: Distribution) -> np.ndarray:
    """``P[k, i]``: default probability of asset ``i`` at grid point ``k``."""
    return np.column_stack([conditional_default_prob(a, dist.grid, law) for a in assets])


def loss_distribution(portfolio: Portfolio, dist: DiscreteDistribution, law: Distribution):
    """Exact distribution of the total pool loss by enumerating default patterns.

    Returns ``(values, probs)`` with one entry per distinct loss value.
    """
    n_x = len(portfolio.assets)
    if n_x > MAX_ENUMERATED_ASSETS:
        raise ValidationError(
            f"exact enumeration supports at most {MAX_ENUMERATED_ASSETS} assets, got {n_x}", "assets"
        )
    P = conditional_matrix(portfolio.assets, dist, law)
    patterns = (np.arange(1 << n_x)[:, None] >> np.arange(n_x)[None, :]) & 1
    # weight[k, a] = prod_i P[k,i]^a_i (1 - P[k,i])^(1 - a_i)
    weight = np.where(patterns[None, :, :] == 1, P[:, None, :], 1 - P[:, None, :]).prod(axis=2)
    pattern_prob = dist.probs @ weight
    pattern_loss = patterns @ portfolio.losses
    values, inverse = np.unique(np.round(pattern_loss, 12), return_inverse=True)
    probs = np.bincount(inverse, weights=pattern_prob, minlength=len(values))
    return values, probs


def exact_expected_tranche_loss(
    portfolio: Portfolio, dist: DiscreteDistribution, tranche: Tranche, law: Distribution
) -> float:
    values, probs = loss_distribution(portfolio, dist, law)
    return float(probs @ tranche_loss(values, tranche))


def exact_expected_total_loss(portfolio: Portfolio, dist: DiscreteDistribution, law: Distribution) -> float:
    values, probs = loss_distribution(portfolio, dist, law)
    return float(probs @ values)


def _mc_chunk(seed: int, chunk: int, size: int, cdf_z: np.ndarray, P: np.ndarray, losses: np.ndarray):
    rng = np.random.Generator(np.random.Philox(seed).jumped(chunk))
    k = np.minimum(np.searchsorted(cdf_z, rng.random(size), side="right"), len(cdf_z) - 1)
    defaults = rng.random((size, P.shape[1])) < P[k]
    return defaults @ losses


def simulate_total_losses(
    portfolio: Portfolio, dist: DiscreteDistribution, law: Distribution, n: int, seed: int
) -> np.ndarray:
    """Total pool loss for ``n`` scenarios; identical for a given ``(seed, n)``.

    Scenarios are drawn in fixed-size chunks, each from its own jump of a
    Philox stream, so the result does not depend on the worker count
    (``CDO_QAE_THREADS``).
    """
    if n < 1:
        raise ValidationError(f"sample count must be >= 1, got {n}", "samples")
    P = conditional_matrix(portfolio.assets, dist, law)
    cdf_z = np.cumsum(dist.probs)
    cdf_z /= cdf_z[-1]
    sizes = [min(MC_CHUNK, n - start) for start in range(0, n, MC_CHUNK)]
    workers = max(1, int(os.environ.get("CDO_QAE_THREADS", "1") or 1))
    args = [(seed, c, size, cdf_z, P, portfolio.losses) for c, size in enumerate(sizes)]
    if workers == 1 or len(sizes) == 1:
        parts = [_mc_chunk(*a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _mc_chunk(*a), args))
    return np.concatenate(parts)


def monte_carlo_expected_loss(
    portfolio: Portfolio,
    dist: DiscreteDistribution,
    tranche: Tranche,
    law: Distribution,
    n: int = 10_000,
    seed: int = 42,
) -> tuple[float, float]:
    """Sample mean of the tranche loss and its standard error."""
    payoff = tranche_loss(simulate_total_losses(portfolio, dist, law, n, seed), tranche)
    payoff = np.atleast_1d(payoff)
    se = float(payoff.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return float(payoff.mean()), se


def fair_spread(expected_loss: float, tranche: Tranche) -> float:
    if not -1e-12 <= expected_loss <= tranche.notional + 1e-12:
        raise ValidationError(
            f"expected loss {expected_loss} outside [0, {tranche.notional}]", "expected_loss"
        )
    return min(max(expected_loss, 0.0), tranche.notional) / tranche.notional


def qae_inversion(p1: float, tranche: Tranche, c: float) -> float:
    """Expected tranche loss implied by an objective probability ``p1``."""
    return (p1 - 0.5 + c) * tranche.notional / (2 * c)


def taylor_budget(c: float) -> float:
    """Objective-rotation cubic error plus the default-loading linearisation allowance."""
    return 2 * c**3 / 3 + 0.01


def _quantize(portfolio: Portfolio, tranche: Tranche, factor: int | None):
    losses = portfolio.losses
    if factor is None:
        factor = 1 if np.allclose(losses, np.round(losses), atol=1e-9) else 5
    scaled = losses * factor
    bounds = np.array([tranche.lower, tranche.upper]) * factor
    for what, vals in (("losses", scaled), ("attachment points", bounds)):
        if not np.allclose(vals, np.round(vals), atol=1e-9):
            raise ValidationError(
                f"quantization factor {factor} leaves non-integer {what}: {vals.tolist()}",
                "qae.quantization",
            )
    assets = tuple(
        replace(a, loss_given_default=float(round(lam))) for a, lam in zip(portfolio.assets, scaled)
    )
    return assets, tranche.scaled(factor), factor


@dataclass
class TrancheResult:
    name: str
    lower: float
    upper: float
    method: str
    expected_loss: float
    spread: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def notional(self) -> float:
        return self.upper - self.lower


def price_via_qae(
    portfolio: Portfolio,
    dist: DiscreteDistribution,
    law: Distribution,
    tranche: Tranche,
    c: float = 0.25,
    config: QaeConfig = QaeConfig(),
    estimator: str = "mode",
    quantization: int | None = None,
    engine: str = "blocks",
    oracle_fallback: bool = True,
    max_qubits: int = MAX_QUBITS,
) -> TrancheResult:
    """Build the pipeline, estimate its objective probability, invert to a tranche loss.

    Fractional losses (after recovery) are scaled to integers together with
    the attachment points; the loss is scaled back afterwards. If the
    estimation circuit would not fit in ``max_qubits`` and ``oracle_fallback``
    is set, the exact amplitude is used and the result carries a notice.
    """
    if estimator not in ("mode", "mean"):
        raise ValidationError(f"estimator must be 'mode' or 'mean', got {estimator!r}", "estimator")
    assets, scaled, factor = _quantize(portfolio, tranche, quantization)
    pipe = assemble_pipeline(assets, dist, law, scaled, c, max_qubits)
    objective = pipe.layout.objective
    try:
        result = run_qae(pipe.circuit, objective, config, engine=engine, max_qubits=max_qubits)
    except QubitBudgetError as exc:
        if not oracle_fallback:
            raise
        result = oracle_result(pipe.circuit, objective, config, str(exc))
    p_hat = result.a_estimate if estimator == "mode" else result.a_mean
    raw = qae_inversion(p_hat, scaled, c) / factor
    loss = min(max(raw, 0.0), tranche.notional)
    diagnostics = {
        "p1_estimate": p_hat,
        "p1_exact": result.exact_p1,
        "a_mode": result.a_estimate,
        "a_mean": result.a_mean,
        "y_mode": result.y_mode,
        "error_bound": result.error_bound,
        "raw_expected_loss": raw,
        "loss_from_exact_p1": qae_inversion(result.exact_p1, scaled, c) / factor,
        "qubits": pipe.n_qubits + (config.m if result.y_mode is not None else 0),
        "quantization": factor,
        "m": config.m,
        "shots": config.shots,
        "seed": config.seed,
        "c": c,
    }
    if result.notice:
        diagnostics["notice"] = result.notice
    return TrancheResult(
        tranche.name, tranche.lower, tranche.upper, "qae", loss, loss / tranche.notional, diagnostics
    )


@dataclass
class PricingReport:
    entries: list[TrancheResult]

    def to_dict(self) -> dict:
        return {"tranches": [asdict(e) for e in self.entries]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> PricingReport:
        return cls([TrancheResult(**e) for e in data["tranches"]])

    def by_method(self, method: str) -> list[TrancheResult]:
        return [e for e in self.entries if e.method == method]

    def table(self) -> str:
        header = f"{'tranche':<12}{'K_L':>6}{'K_U':>6}{'method':>8}{'E[L]':>12}{'spread':>9}  detail"
        lines = [header, "-" * len(header)]
        for e in self.entries:
            d = e.diagnostics
            if e.method == "mc":
                detail = f"+/- {d['standard_error']:.4f} (n={d['samples']})"
            elif e.method == "qae":
                detail = f"P1~{d['p1_estimate']:.4f} exact {d['p1_exact']:.4f} eps {d['error_bound']:.4f}"
                if "notice" in d:
                    detail += " [oracle]"
            else:
                detail = ""
            lines.append(
                f"{e.name:<12}{e.lower:>6g}{e.upper:>6g}{e.method:>8}"
                f"{e.expected_loss:>12.6f}{100 * e.spread:>8.1f}%  {detail}"
            )
        return "\n".join(lines)


def price_portfolio(
    portfolio: Portfolio,
    dist: DiscreteDistribution,
    law: Distribution,
    methods: Sequence[str] = ("exact",),
    mc_samples: int = 10_000,
    mc_seed: int = 42,
    c: float = 0.25,
    qae_config: QaeConfig = QaeConfig(),
    **qae_kwargs,
) -> PricingReport:
    """Price every tranche with each requested method (exact, mc, qae)."""
    unknown = set(methods) - {"exact", "mc", "qae"}
    if unknown:
        raise ValidationError(f"unknown methods {sorted(unknown)}", "method")
    entries: list[TrancheResult] = []
    if "exact" in methods:
        values, probs = loss_distribution(portfolio, dist, law)
        for t in portfolio.tranches:
            el = float(probs @ tranche_loss(values, t))
            entries.append(TrancheResult(t.name, t.lower, t.upper, "exact", el, fair_spread(el, t)))
    if "mc" in methods:
        sims = simulate_total_losses(portfolio, dist, law, mc_samples, mc_seed)
        for t in portfolio.tranches:
            payoff = np.atleast_1d(tranche_loss(sims, t))
            mean = float(payoff.mean())
            se = float(payoff.std(ddof=1) / math.sqrt(mc_samples)) if mc_samples > 1 else float("inf")
            entries.append(
                TrancheResult(
                    t.name, t.lower, t.upper, "mc", mean, fair_spread(mean, t),
                    {"standard_error": se, "samples": mc_samples, "seed": mc_seed},
                )
            )
    if "qae" in methods:
        for t in portfolio.tranches:
            entries.append(price_via_qae(portfolio, dist, law, t, c, qae_config, **qae_kwargs))
    return PricingReport(entries)
