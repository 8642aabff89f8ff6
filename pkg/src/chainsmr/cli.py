"""Command-line front door: validate configs, run scenarios, check properties.

Exit codes are a stable contract: 0 success, 1 property violation or trace
mismatch, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .checks import (
    Verdict,
    check_consistency,
    check_delivery,
    check_safety,
    check_timing,
    compare_optimistic,
    run_checks,
)
from .config import ConfigError, parse_scenario
from .replica import InvariantViolation
from .sim import run_scenario
from .trace import dump_trace, read_trace, write_trace

SUITES = ("delivery", "safety", "consistency", "timing", "optimistic", "all")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


def builtin_scenarios() -> dict[str, dict]:
    """Shipped demo configurations, keyed by name."""
    out = {}
    root = resources.files("chainsmr") / "scenarios"
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = json.loads(entry.read_text())
    return out


def _load_data(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def _parse_with_overrides(data: dict, seed: int | None, mode: str | None):
    data = dict(data)
    if seed is not None:
        data["seed"] = seed
    if mode is not None:
        data["mode"] = mode
    return parse_scenario(data)


def _print_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True, separators=(",", ":")))


# -- commands -----------------------------------------------------------------


def cmd_validate(args) -> int:
    cfg = parse_scenario(_load_data(args.config))
    _print_json(
        {
            "ok": True,
            "name": cfg.name,
            "mode": cfg.mode,
            "delta": cfg.delta,
            "seed": cfg.seed,
            "agents": cfg.n_agents,
            "assets": list(cfg.asset_names),
            "game": cfg.game["kind"],
            "strategies": [spec.strategy.get("kind", "compliant") for spec in cfg.agents],
        }
    )
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _parse_with_overrides(_load_data(args.config), args.seed, args.mode)
    try:
        result = run_scenario(cfg)
    except InvariantViolation as exc:
        _print_json({"ok": False, "error": "invariant", "detail": str(exc)})
        return EXIT_VIOLATION
    if args.out:
        write_trace(args.out, result.trace, result.header_extra())
    _print_json(result.summary)
    return EXIT_OK


def _report(verdicts: list[Verdict], context: dict | None = None) -> int:
    failures = [v for v in verdicts if not v.ok]
    report = {
        "checks": len(verdicts),
        "failed": len(failures),
        "verdicts": [v.as_dict() for v in (failures if failures else verdicts)],
    }
    if context:
        report.update(context)
    _print_json(report)
    return EXIT_VIOLATION if failures else EXIT_OK


def cmd_check(args) -> int:
    if args.target in SUITES:
        return _run_suite(args.target, runs=args.runs, base_seed=args.seed or 0)
    data = _load_data(args.target)
    cfg = _parse_with_overrides(data, args.seed, args.mode)
    if args.replay:
        return _check_replay(cfg, args.replay)
    try:
        result = run_scenario(cfg)
    except InvariantViolation as exc:
        return _report([Verdict("invariant", False, details=str(exc))])
    return _report(run_checks(result), {"scenario": cfg.name, "seed": cfg.seed})


def _check_replay(cfg, trace_path: str) -> int:
    saved_text = Path(trace_path).read_text(encoding="utf-8")
    try:
        _, saved_events = read_trace(trace_path)
    except (ValueError, json.JSONDecodeError) as exc:
        return _report([Verdict("replay", False, details=f"unreadable trace: {exc}")])
    result = run_scenario(cfg)
    fresh_text = dump_trace(result.trace, result.header_extra())
    verdicts = [check_consistency(saved_events)]
    if fresh_text != saved_text:
        line = next(
            (
                i + 1
                for i, (a, b) in enumerate(
                    zip(saved_text.splitlines(), fresh_text.splitlines())
                )
                if a != b
            ),
            min(len(saved_text.splitlines()), len(fresh_text.splitlines())) + 1,
        )
        verdicts.append(
            Verdict(
                "replay",
                False,
                details=f"stored trace differs from a fresh run at line {line}",
                witness={"line": line},
            )
        )
    else:
        verdicts.append(Verdict("replay", True, details="stored trace matches a fresh run byte for byte"))
    return _report(verdicts, {"scenario": cfg.name, "trace": trace_path})


def cmd_replay(args) -> int:
    cfg = _parse_with_overrides(_load_data(args.config), args.seed, args.mode)
    return _check_replay(cfg, args.trace)


# -- suites ---------------------------------------------------------------------


def _run_with(data: dict, seed: int, mode: str | None = None):
    return run_scenario(_parse_with_overrides(data, seed, mode))


def _run_suite(name: str, runs: int, base_seed: int) -> int:
    scenarios = builtin_scenarios()
    verdicts: list[Verdict] = []

    def add(v: Verdict, scenario: str, seed: int):
        if not v.ok:
            v.details = f"[{scenario} seed={seed}] {v.details}"
        verdicts.append(v)

    pessimistic = {k: v for k, v in scenarios.items() if v.get("mode", "pessimistic") == "pessimistic"}
    equivocators = {k: v for k, v in pessimistic.items() if "equivocator" in k}
    compliant_only = {
        k: v
        for k, v in pessimistic.items()
        if all(a.get("strategy", {}).get("kind", "compliant") == "compliant" for a in v["agents"])
    }

    if name in ("delivery", "all"):
        data = scenarios["auction_nonrelayer"]
        for seed in range(base_seed, base_seed + runs):
            add(check_delivery(_run_with(data, seed)), "auction_nonrelayer", seed)
    if name in ("timing", "all"):
        data = scenarios["swap_gauntlet"]
        for seed in range(base_seed, base_seed + runs):
            add(check_timing(_run_with(data, seed)), "swap_gauntlet", seed)
    if name in ("consistency", "all"):
        for key, data in sorted(equivocators.items()):
            for seed in range(base_seed, base_seed + runs):
                add(check_consistency(_run_with(data, seed).trace), key, seed)
    if name in ("safety", "all"):
        for key, data in sorted(pessimistic.items()):
            for seed in range(base_seed, base_seed + runs):
                result = _run_with(data, seed)
                add(check_safety(result), key, seed)
                if name == "all":
                    add(check_consistency(result.trace), key, seed)
    if name in ("optimistic", "all"):
        for key, data in sorted(compliant_only.items()):
            for seed in range(base_seed, base_seed + runs):
                cfg = _parse_with_overrides(data, seed, None)
                add(compare_optimistic(cfg), key, seed)

    return _report(verdicts, {"suite": name, "runs": runs})


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainsmr",
        description="Simulate replicated exchange machines and check their guarantees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a scenario config")
    p.add_argument("config")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("run", help="run a scenario")
    p.add_argument("config")
    p.add_argument("--out", help="write the trace (JSON Lines) here")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--mode", choices=("pessimistic", "optimistic"), help="override the mode")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("check", help="run property checkers on a config or suite")
    p.add_argument("target", help=f"config path or one of {', '.join(SUITES)}")
    p.add_argument("--runs", type=int, default=25, help="seeds per scenario for suites")
    p.add_argument("--seed", type=int, help="base seed / config seed override")
    p.add_argument("--mode", choices=("pessimistic", "optimistic"))
    p.add_argument("--replay", metavar="TRACE", help="vet a stored trace against this config")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("replay", help="re-run a config and compare against a stored trace")
    p.add_argument("trace")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("pessimistic", "optimistic"))
    p.set_defaults(fn=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
