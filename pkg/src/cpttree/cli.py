"""Command-line entry point wiring the library, with reproducible artifacts.

Every run writes its artifacts plus a manifest naming the subcommand, the
resolved parameters, the seed, input checksums and output checksums.
Identical inputs produce byte-identical artifacts: floats are printed with
17 significant digits and nothing time-dependent is emitted.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .arbitrage import marche_certificate, validate_certificate
from .choquet import cpt_value
from .errors import ValidationError
from .optimize import SearchConfig, ladder, optimize_pure, optimize_randomized
from .preferences import (
    DistortionPair,
    Distortion,
    PreferenceSpec,
    UtilityPair,
    check_conditions,
    coin_model_preferences,
    parse_preferences,
)
from .randtools import SELF_TEST_SEED, toolkit_self_test
from .tree import PureStrategy, ReferenceSpec, parse_market
from .wellposed import illposed_demo


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(inner + _dumps(v, indent + 1) for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f"{inner}{json.dumps(str(k))}: {_dumps(v, indent + 1)}" for k, v in sorted(obj.items())
        )
        return "{\n" + items + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class _Run:
    """Collects artifacts and writes them with a manifest."""

    def __init__(self, subcommand: str, out_dir: str, parameters: dict, fmt: str):
        self.subcommand = subcommand
        self.out = Path(out_dir)
        self.parameters = parameters
        self.fmt = fmt
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self.seed = parameters.get("seed")

    def read_input(self, path: str) -> str:
        data = Path(path).read_bytes()
        self.inputs[path] = _sha256_bytes(data)
        return data.decode("utf-8")

    def write(self, name: str, text: str) -> None:
        if self.fmt != "both" and not name.endswith(f".{self.fmt}"):
            return
        self.out.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        (self.out / name).write_bytes(data)
        self.outputs[name] = _sha256_bytes(data)

    def write_json(self, name: str, obj) -> None:
        self.write(name, _dumps(obj) + "\n")

    def finish(self) -> None:
        manifest = {
            "subcommand": self.subcommand,
            "parameters": self.parameters,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "version": __version__,
        }
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "manifest.json").write_bytes((_dumps(manifest) + "\n").encode("utf-8"))


def _load_preferences(run: _Run, path: str | None, overrides: list[str]) -> PreferenceSpec:
    kv = {}
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        kv[k.strip()] = v.strip()
    if path is None:
        if kv:
            raise ValidationError("--set requires --pref")
        return coin_model_preferences()
    return parse_preferences(run.read_input(path), overrides=kv)


def _strategy_from_args(run: _Run, tree, args) -> PureStrategy:
    if (args.theta is None) == (args.strategy is None):
        raise ValidationError("provide exactly one of --theta or --strategy")
    if args.theta is not None:
        return PureStrategy.constant(tree, args.theta)
    payload = json.loads(run.read_input(args.strategy))
    if "constant" in payload:
        return PureStrategy.constant(tree, payload["constant"])
    alloc = {int(k): tuple(float(x) for x in v) for k, v in payload["allocations"].items()}
    return PureStrategy(alloc)


def _strategy_json(strategy: PureStrategy) -> list[dict]:
    return [
        {"node": node, "allocation": list(vec)}
        for node, vec in sorted(strategy.allocations.items())
    ]


def _parse_levels(text: str) -> float | list[float]:
    parts = [p for p in text.split(",") if p]
    vals = [float(p) for p in parts]
    return vals[0] if len(vals) == 1 else vals


def _cmd_value(args) -> int:
    params = {
        "market": args.market, "pref": args.pref, "theta": args.theta,
        "strategy": args.strategy, "x0": args.x0, "benchmark": args.benchmark,
        "set": list(args.set),
    }
    run = _Run("value", args.out, params, args.format)
    tree = parse_market(run.read_input(args.market))
    pref = _load_preferences(run, args.pref, args.set)
    strategy = _strategy_from_args(run, tree, args)
    ref = ReferenceSpec.constant(tree, args.benchmark)
    value = cpt_value(tree, strategy, args.x0, ref, pref)
    run.write_json("value.json", value.to_json_dict())
    run.finish()
    return 0


def _cmd_optimize(args) -> int:
    params = {
        "market": args.market, "pref": args.pref, "x0": args.x0,
        "benchmark": args.benchmark, "seed": args.seed, "box": args.box,
        "multistart": args.multistart, "atoms": args.atoms, "set": list(args.set),
    }
    run = _Run("optimize", args.out, params, args.format)
    tree = parse_market(run.read_input(args.market))
    pref = _load_preferences(run, args.pref, args.set)
    ref = ReferenceSpec.constant(tree, args.benchmark)
    cfg = SearchConfig(box_radius=args.box, multistart=args.multistart, seed=args.seed)
    if args.atoms > 1:
        strategy, value = optimize_randomized(tree, pref, args.x0, ref, args.atoms, cfg)
        payload = {
            "value": value.to_json_dict(),
            "n_atoms": args.atoms,
            "atoms": [
                {"weight": w, "strategy": _strategy_json(s)} for w, s in strategy.atoms
            ],
        }
    else:
        strategy, value = optimize_pure(tree, pref, args.x0, ref, cfg)
        payload = {
            "value": value.to_json_dict(),
            "n_atoms": 1,
            "strategy": _strategy_json(strategy),
        }
    run.write_json("optimize.json", payload)
    run.finish()
    return 0


def _cmd_ladder(args) -> int:
    params = {
        "n": args.n, "seed": args.seed, "multistart": args.multistart, "box": args.box,
    }
    run = _Run("randomization-ladder", args.out, params, args.format)
    cfg = SearchConfig(box_radius=args.box, multistart=args.multistart, seed=args.seed)
    result = ladder(args.n, cfg)
    csv = "n,M_n\n" + "".join(f"{k},{_fmt(v)}\n" for k, v in enumerate(result.values))
    run.write("ladder.csv", csv)
    run.write_json(
        "ladder.json",
        {"values": list(result.values), "argmax": [list(a) for a in result.argmax]},
    )
    run.finish()
    return 0


def _cmd_illposed(args) -> int:
    params = {
        "alpha_plus": args.alpha_plus, "gamma_plus": args.gamma_plus,
        "alpha_minus": args.alpha_minus, "gamma_minus": args.gamma_minus,
        "k_minus": args.k_minus, "ell": args.ell, "scan": args.scan,
    }
    run = _Run("illposed-demo", args.out, params, args.format)
    pref = PreferenceSpec(
        utility=UtilityPair.power(args.alpha_plus, args.alpha_minus, k=args.k_minus),
        distortion=DistortionPair(
            Distortion.power(args.gamma_plus), Distortion.power(args.gamma_minus)
        ),
    )
    n_list = [float(s) for s in args.scan.split(",") if s]
    report, rows = illposed_demo(pref, args.ell, n_list)
    run.write_json("report.json", report.to_json_dict())
    csv = "n,v_plus,v_minus,v\n" + "".join(
        f"{_fmt(r.n)},{_fmt(r.v_plus)},{_fmt(r.v_minus)},{_fmt(r.v)}\n" for r in rows
    )
    run.write("scan.csv", csv)
    run.finish()
    return 0


def _cmd_check_wellposed(args) -> int:
    params = {"pref": args.pref, "set": list(args.set)}
    run = _Run("check-wellposed", args.out, params, args.format)
    pref = _load_preferences(run, args.pref, args.set)
    run.write_json("report.json", check_conditions(pref).to_json_dict())
    run.finish()
    return 0


def _cmd_marche(args) -> int:
    params = {
        "market": args.market, "pi": args.pi, "direction_samples": args.direction_samples,
        "validate_kappa": args.validate_kappa, "validate_pi": args.validate_pi,
    }
    run = _Run("marche-check", args.out, params, args.format)
    tree = parse_market(run.read_input(args.market))
    cert = marche_certificate(tree, _parse_levels(args.pi), args.direction_samples)
    payload: dict = {
        "sampled": cert.sampled,
        "direction_samples": cert.direction_samples,
        "entries": [
            {"node": n, "kappa": kp, "pi": pp} for n, (kp, pp) in sorted(cert.entries.items())
        ],
    }
    if (args.validate_kappa is None) != (args.validate_pi is None):
        raise ValidationError("--validate-kappa and --validate-pi go together")
    if args.validate_kappa is not None:
        ok, node = validate_certificate(
            tree,
            _parse_levels(args.validate_kappa),
            _parse_levels(args.validate_pi),
            args.direction_samples,
        )
        payload["validation"] = {
            "kappa": args.validate_kappa, "pi": args.validate_pi,
            "valid": ok, "witness_node": node,
        }
    run.write_json("certificate.json", payload)
    run.finish()
    return 0


def _cmd_toolkit(args) -> int:
    if args.action != "self-test":
        raise ValidationError(f"unknown toolkit action {args.action!r}")
    params = {"seed": args.seed}
    run = _Run("toolkit self-test", args.out, params, args.format)
    report = toolkit_self_test(args.seed)
    run.write_json("selftest.json", report)
    run.finish()
    return 0 if report["all_passed"] else 1


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--out", default=".", help="artifact directory")
    sp.add_argument("--format", choices=["json", "csv", "both"], default="both")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpttree",
        description="Evaluate, diagnose and optimize CPT objectives on finite scenario-tree markets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("value", help="CPT value of a strategy on a market")
    sp.add_argument("--market", required=True)
    sp.add_argument("--pref", default=None)
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sp.add_argument("--theta", type=float, default=None, help="constant allocation")
    sp.add_argument("--strategy", default=None, help="JSON strategy file")
    sp.add_argument("--x0", type=float, default=0.0)
    sp.add_argument("--benchmark", type=float, default=0.0)
    _add_common(sp)
    sp.set_defaults(func=_cmd_value)

    sp = sub.add_parser("optimize", help="search for the best (randomized) strategy")
    sp.add_argument("--market", required=True)
    sp.add_argument("--pref", default=None)
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sp.add_argument("--x0", type=float, default=0.0)
    sp.add_argument("--benchmark", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--box", type=float, default=None)
    sp.add_argument("--multistart", type=int, default=4)
    sp.add_argument("--atoms", type=int, default=1)
    _add_common(sp)
    sp.set_defaults(func=_cmd_optimize)

    sp = sub.add_parser("randomization-ladder", help="coin-model values over external coins")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--multistart", type=int, default=4)
    sp.add_argument("--box", type=float, default=None)
    _add_common(sp)
    sp.set_defaults(func=_cmd_ladder)

    sp = sub.add_parser("illposed-demo", help="closed-form two-step divergence demo")
    sp.add_argument("--alpha-plus", type=float, required=True)
    sp.add_argument("--gamma-plus", type=float, required=True)
    sp.add_argument("--alpha-minus", type=float, required=True)
    sp.add_argument("--gamma-minus", type=float, required=True)
    sp.add_argument("--k-minus", type=float, default=1.0)
    sp.add_argument("--ell", type=float, required=True)
    sp.add_argument("--scan", default="10,1000,1000000")
    _add_common(sp)
    sp.set_defaults(func=_cmd_illposed)

    sp = sub.add_parser("check-wellposed", help="parameter gates and lambda interval")
    sp.add_argument("--pref", required=True)
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    _add_common(sp)
    sp.set_defaults(func=_cmd_check_wellposed)

    sp = sub.add_parser("marche-check", help="quantitative no-arbitrage certificate")
    sp.add_argument("--market", required=True)
    sp.add_argument("--pi", default="0.25")
    sp.add_argument("--direction-samples", type=int, default=128)
    sp.add_argument("--validate-kappa", default=None)
    sp.add_argument("--validate-pi", default=None)
    _add_common(sp)
    sp.set_defaults(func=_cmd_marche)

    sp = sub.add_parser("toolkit", help="probability toolkit utilities")
    sp.add_argument("action", choices=["self-test"])
    sp.add_argument("--seed", type=int, default=SELF_TEST_SEED)
    _add_common(sp)
    sp.set_defaults(func=_cmd_toolkit)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv if argv is not None else sys.argv[1:])
    try:
        return args.func(args)
    except (ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
