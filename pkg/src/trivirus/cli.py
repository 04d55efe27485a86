"""Command-line entry point: ``trivirus run|preset|list-presets|check|enumerate``.

The default output directory is taken from ``TRIVIRUS_OUT`` (falling back
to ``./trivirus-out``); each run writes into a subdirectory named after
the scenario.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .presets import get_preset, list_presets
from .scenario import ScenarioError, default_output_dir, load_config, run_scenario

log = logging.getLogger("trivirus")

EXIT_OK = 0
EXIT_EXPECTATION_FAILED = 1
EXIT_CONFIG_ERROR = 2


def _out_dir(args, name: str) -> Path:
    base = Path(args.out) if args.out else default_output_dir()
    return base / name


def _print_summary(result) -> int:
    for line in result.summary:
        mark = "PASS" if line["passed"] else "FAIL"
        print(f"{mark}  {line['name']}: {line['key']} {line['op']} {line['expected']!r} "
              f"(actual {line['actual']!r}, tol {line['tolerance']!r})")
    if result.summary:
        n_pass = sum(line["passed"] for line in result.summary)
        print(f"{n_pass}/{len(result.summary)} expectations passed")
    return EXIT_OK if result.passed else EXIT_EXPECTATION_FAILED


def _run_config(config: dict, args, name: str) -> int:
    out = _out_dir(args, name)
    result = run_scenario(config, out=out, parallel=getattr(args, "parallel", False), seed=getattr(args, "seed", None))
    print(f"outputs written to {out}")
    return _print_summary(result)


def cmd_run(args) -> int:
    config = load_config(args.config)
    return _run_config(config, args, config.get("name") or Path(args.config).stem)


def cmd_preset(args) -> int:
    try:
        config = get_preset(args.name)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if args.dump:
        json.dump(config, sys.stdout, indent=2)
        print()
        return EXIT_OK
    return _run_config(config, args, args.name)


def cmd_list_presets(args) -> int:
    for name, description in list_presets():
        print(f"{name:10s} {description}")
    return EXIT_OK


def _restricted(args, actions: list) -> int:
    config = load_config(args.config)
    config["plan"] = actions
    config["expectations"] = []
    name = config.get("name") or Path(args.config).stem
    out = _out_dir(args, name)
    result = run_scenario(config, out=out, seed=getattr(args, "seed", None))
    if result.report is not None:
        for c in result.report.checks:
            print(f"{c.name:28s} {c.verdict}")
    if result.enumeration is not None:
        for e in result.enumeration.equilibria:
            flags = ("stable" if e.is_stable else "unstable") + (", saturated" if e.is_saturated else "")
            print(f"{e.describe():24s} index {e.index!s:>4}  {flags}")
        if result.enumeration.continuum_suspected:
            print("continuum of equilibria suspected")
    print(f"outputs written to {out}")
    return EXIT_OK


def cmd_check(args) -> int:
    return _restricted(args, [{"action": "check"}])


def cmd_enumerate(args) -> int:
    return _restricted(args, [{"action": "enumerate", "starts": args.starts}])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trivirus", description="Competitive tri-virus SIS laboratory.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario config")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (default: $TRIVIRUS_OUT)")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--parallel", action="store_true", help="integrate trajectories concurrently")
    run.set_defaults(func=cmd_run)

    pre = sub.add_parser("preset", help="run one of the built-in examples")
    pre.add_argument("name")
    pre.add_argument("--out", help="output directory (default: $TRIVIRUS_OUT)")
    pre.add_argument("--seed", type=int, help="offset added to every random initial-condition seed")
    pre.add_argument("--parallel", action="store_true", help="integrate trajectories concurrently")
    pre.add_argument("--dump", action="store_true", help="print the preset config instead of running it")
    pre.set_defaults(func=cmd_preset)

    lst = sub.add_parser("list-presets", help="list built-in examples")
    lst.set_defaults(func=cmd_list_presets)

    chk = sub.add_parser("check", help="run only the condition checks of a config")
    chk.add_argument("config")
    chk.add_argument("--out")
    chk.set_defaults(func=cmd_check)

    enum = sub.add_parser("enumerate", help="run only the equilibrium enumeration of a config")
    enum.add_argument("config")
    enum.add_argument("--out")
    enum.add_argument("--starts", type=int, default=50, help="random Newton starts per support pattern")
    enum.set_defaults(func=cmd_enumerate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
