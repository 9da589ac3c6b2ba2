"""Command-line front end: ``qcdo price | dist | payoff``.

Exit codes: 0 success, 2 configuration error, 3 qubit budget exceeded,
4 any other runtime failure. Numeric disagreement between methods is
reported, never turned into a failure status.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from pathlib import Path

from .config import FORMATS, METHODS, RunConfig, parse_config, reference_path
from .errors import QubitBudgetError, ValidationError
from .pricing import PricingReport, price_portfolio
from .qae import QaeConfig
from .tranche import tranche_loss, tranche_to_piecewise

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_RUNTIME = 0, 2, 3, 4


def _with_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    changes = {}
    if getattr(args, "method", None):
        changes["method"] = args.method
    if getattr(args, "samples", None) is not None:
        changes["mc_samples"] = args.samples
    if getattr(args, "c", None) is not None:
        if not 0 < args.c < 0.5:
            raise ValidationError(f"must lie in (0, 0.5), got {args.c}", "--c")
        changes["c"] = args.c
    if getattr(args, "format", None):
        changes["output_format"] = args.format
    if getattr(args, "out", None):
        changes["output_path"] = args.out
    qae = cfg.qae
    m = getattr(args, "m", None)
    shots = getattr(args, "shots", None)
    seed = getattr(args, "seed", None)
    if m is not None or shots is not None or seed is not None:
        qae = QaeConfig(
            qae.m if m is None else m,
            qae.shots if shots is None else shots,
            qae.seed if seed is None else seed,
        )
        changes["qae"] = qae
    if seed is not None:
        changes["mc_seed"] = seed
    return dataclasses.replace(cfg, **changes)


def cmd_price(cfg: RunConfig) -> tuple[str, PricingReport]:
    report = price_portfolio(
        cfg.portfolio,
        cfg.distribution(),
        cfg.law,
        methods=cfg.methods,
        mc_samples=cfg.mc_samples,
        mc_seed=cfg.mc_seed,
        c=cfg.c,
        qae_config=cfg.qae,
        estimator=cfg.estimator,
        quantization=cfg.quantization,
        oracle_fallback=cfg.oracle_fallback,
    )
    if cfg.output_format == "json":
        text = report.to_json() + "\n"
    elif cfg.output_format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tranche", "lower", "upper", "method", "expected_loss", "spread"])
        for e in report.entries:
            w.writerow([e.name, e.lower, e.upper, e.method, repr(e.expected_loss), repr(e.spread)])
        text = buf.getvalue()
    else:
        text = report.table() + "\n"
    return text, report


def cmd_dist(cfg: RunConfig) -> str:
    dist = cfg.distribution()
    if cfg.output_format == "json":
        return json.dumps({"z": dist.grid.tolist(), "probability": dist.probs.tolist()}) + "\n"
    return dist.to_csv()


def cmd_payoff(cfg: RunConfig, tranche_name: str) -> str:
    tranche = cfg.portfolio.tranche(tranche_name)
    max_loss = int(math.floor(cfg.portfolio.max_loss + 1e-9))
    spec = tranche_to_piecewise(tranche, max_loss, cfg.c)
    rows = [(L, tranche_loss(L, tranche)) for L in range(max_loss + 1)]
    if cfg.output_format == "json":
        return json.dumps(
            {
                "tranche": tranche.name,
                "loss": [r[0] for r in rows],
                "tranche_loss": [r[1] for r in rows],
                "breakpoints": list(spec.breakpoints),
                "slopes": list(spec.slopes),
                "offsets": list(spec.offsets),
            }
        ) + "\n"
    buf = io.StringIO()
    buf.write(f"# breakpoints={list(spec.breakpoints)}\n")
    buf.write(f"# slopes={[float(s) for s in spec.slopes]}\n")
    buf.write(f"# offsets={[float(o) for o in spec.offsets]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["L", "tranche_loss"])
    for L, v in rows:
        w.writerow([L, repr(float(v))])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcdo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration (default: bundled reference)")
        p.add_argument("--out", help="write output to this path instead of stdout")
        p.add_argument("--format", choices=FORMATS)

    price = sub.add_parser("price", help="price every tranche")
    common(price)
    price.add_argument("--method", choices=METHODS)
    price.add_argument("--seed", type=int, help="seed for both Monte Carlo and QAE sampling")
    price.add_argument("--shots", type=int)
    price.add_argument("--m", type=int, help="phase-estimation ancilla count")
    price.add_argument("--c", type=float, help="objective scaling factor")
    price.add_argument("--samples", type=int, help="Monte Carlo sample count")

    dist = sub.add_parser("dist", help="discretised factor distribution as CSV")
    common(dist)

    payoff = sub.add_parser("payoff", help="tranche payoff table and breakpoint arrays")
    common(payoff)
    payoff.add_argument("--tranche", required=True)
    payoff.add_argument("--c", type=float)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config or reference_path())
        cfg = _with_overrides(cfg, args)
        if args.command == "price":
            text, _ = cmd_price(cfg)
        elif args.command == "dist":
            text = cmd_dist(cfg)
        else:
            text = cmd_payoff(cfg, args.tranche)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QubitBudgetError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if cfg.output_path:
        Path(cfg.output_path).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
