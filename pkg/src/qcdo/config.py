"""JSON run configuration.

Schema (defaults in brackets)::

    {
      "portfolio": {
        "assets": [{"loss_given_default": 2, "default_prob": 0.3, "correlation": 0.05}, ...],
        "tranches": [{"name": "Equity", "lower": 0, "upper": 1}, ...],
        "recovery": [0.0]
      },
      "distribution": {
        "kind": "gaussian" | "nig",
        "mean", "variance"                      (gaussian) [0, 1]
        "alpha", "beta", "mu", "delta"          (nig)
        "n_z": [4], "low", "high"               [mean -/+ 3 standard deviations]
      },
      "method": "exact" | "mc" | "qae" | "all"  [exact]
      "mc": {"samples": [10000], "seed": [42]},
      "qae": {"m": [4], "shots": [1000], "seed": [42], "c": [0.25],
              "estimator": ["mode"], "quantization": [auto], "oracle_fallback": [true]},
      "output": {"format": "table" | "json" | "csv", "path": [null]}
    }
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .copula import Asset
from .dist import DiscreteDistribution, GaussianSpec, NigSpec, default_range, discretize
from .errors import ValidationError
from .pricing import Portfolio
from .qae import QaeConfig
from .tranche import Tranche

METHODS = ("exact", "mc", "qae", "all")
FORMATS = ("table", "json", "csv")


@dataclass(frozen=True)
class RunConfig:
    portfolio: Portfolio
    law: GaussianSpec | NigSpec
    n_z: int
    low: float
    high: float
    method: str
    mc_samples: int
    mc_seed: int
    qae: QaeConfig
    c: float
    estimator: str
    quantization: int | None
    oracle_fallback: bool
    output_format: str
    output_path: str | None

    @property
    def methods(self) -> tuple[str, ...]:
        return ("exact", "mc", "qae") if self.method == "all" else (self.method,)

    def distribution(self) -> DiscreteDistribution:
        return discretize(self.law.pdf, self.n_z, self.low, self.high)


def reference_path(kind: str = "nig") -> Path:
    name = "reference.json" if kind == "nig" else "reference_gaussian.json"
    return Path(str(resources.files("qcdo") / "data" / name))


def _section(doc: dict, key: str, path: str, required: bool = True) -> Any:
    if key not in doc:
        if required:
            raise ValidationError("missing required field", f"{path}{key}")
        return None
    return doc[key]


def _number(doc: dict, key: str, path: str, default=None, kind=float):
    if key not in doc or doc[key] is None:
        if default is None:
            raise ValidationError("missing required field", f"{path}{key}")
        return default
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"expected a number, got {value!r}", f"{path}{key}")
    if kind is int:
        if int(value) != value:
            raise ValidationError(f"expected an integer, got {value!r}", f"{path}{key}")
        return int(value)
    return float(value)


def _build(path: str, factory, *args):
    try:
        return factory(*args)
    except ValidationError as exc:
        field = f"{path}.{exc.field}" if exc.field else path
        raise ValidationError(exc.message, field) from None


def _portfolio(doc: dict) -> Portfolio:
    if not isinstance(doc, dict):
        raise ValidationError("expected an object", "portfolio")
    raw_assets = _section(doc, "assets", "portfolio.")
    if not isinstance(raw_assets, list) or not raw_assets:
        raise ValidationError("at least one asset is required", "portfolio.assets")
    assets = []
    for i, a in enumerate(raw_assets):
        p = f"portfolio.assets[{i}]"
        if not isinstance(a, dict):
            raise ValidationError("expected an object", p)
        assets.append(
            _build(
                p,
                Asset,
                _number(a, "loss_given_default", p + "."),
                _number(a, "default_prob", p + "."),
                _number(a, "correlation", p + "."),
            )
        )
    raw_tranches = _section(doc, "tranches", "portfolio.")
    if not isinstance(raw_tranches, list) or not raw_tranches:
        raise ValidationError("at least one tranche is required", "portfolio.tranches")
    tranches = []
    for k, t in enumerate(raw_tranches):
        p = f"portfolio.tranches[{k}]"
        if not isinstance(t, dict) or not isinstance(t.get("name"), str):
            raise ValidationError("expected an object with a string name", p)
        tranches.append(
            _build(p, Tranche, t["name"], _number(t, "lower", p + "."), _number(t, "upper", p + "."))
        )
    recovery = _number(doc, "recovery", "portfolio.", 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return _build("portfolio", Portfolio, tuple(assets), tuple(tranches), recovery)


def _law(doc: dict):
    p = "distribution."
    kind = doc.get("kind")
    if kind == "gaussian":
        return _build(
            "distribution", GaussianSpec, _number(doc, "mean", p, 0.0), _number(doc, "variance", p, 1.0)
        )
    if kind == "nig":
        return _build(
            "distribution",
            NigSpec,
            _number(doc, "alpha", p),
            _number(doc, "beta", p),
            _number(doc, "mu", p),
            _number(doc, "delta", p),
        )
    raise ValidationError(f"expected 'gaussian' or 'nig', got {kind!r}", "distribution.kind")


def from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ValidationError("top level must be a JSON object")
    portfolio = _portfolio(_section(doc, "portfolio", ""))
    dist_doc = _section(doc, "distribution", "")
    if not isinstance(dist_doc, dict):
        raise ValidationError("expected an object", "distribution")
    law = _law(dist_doc)
    lo_default, hi_default = default_range(law)
    n_z = _number(dist_doc, "n_z", "distribution.", 4, int)
    if not 1 <= n_z <= 12:
        raise ValidationError(f"must lie in 1..12, got {n_z}", "distribution.n_z")
    low = _number(dist_doc, "low", "distribution.", lo_default)
    high = _number(dist_doc, "high", "distribution.", hi_default)
    if not low < high:
        raise ValidationError(f"low ({low}) must be below high ({high})", "distribution.low")

    method = doc.get("method", "exact")
    if method not in METHODS:
        raise ValidationError(f"expected one of {METHODS}, got {method!r}", "method")

    mc = doc.get("mc") or {}
    samples = _number(mc, "samples", "mc.", 10_000, int)
    if samples < 1:
        raise ValidationError(f"must be >= 1, got {samples}", "mc.samples")
    mc_seed = _number(mc, "seed", "mc.", 42, int)

    q = doc.get("qae") or {}
    qae = _build(
        "qae",
        QaeConfig,
        _number(q, "m", "qae.", 4, int),
        _number(q, "shots", "qae.", 1000, int),
        _number(q, "seed", "qae.", 42, int),
    )
    c = _number(q, "c", "qae.", 0.25)
    if not 0 < c < 0.5:
        raise ValidationError(f"must lie in (0, 0.5), got {c}", "qae.c")
    estimator = q.get("estimator", "mode")
    if estimator not in ("mode", "mean"):
        raise ValidationError(f"expected 'mode' or 'mean', got {estimator!r}", "qae.estimator")
    quantization = q.get("quantization")
    if quantization is not None:
        quantization = _number(q, "quantization", "qae.", kind=int)
        if quantization < 1:
            raise ValidationError("must be a positive integer", "qae.quantization")
    oracle_fallback = bool(q.get("oracle_fallback", True))

    out = doc.get("output") or {}
    fmt = out.get("format", "table")
    if fmt not in FORMATS:
        raise ValidationError(f"expected one of {FORMATS}, got {fmt!r}", "output.format")
    return RunConfig(
        portfolio, law, n_z, low, high, method, samples, mc_seed, qae, c, estimator,
        quantization, oracle_fallback, fmt, out.get("path"),
    )


def parse_config(path: str | Path) -> RunConfig:
    """Load and validate a JSON run configuration."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}", "config")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", "config") from None
    return from_dict(doc)
