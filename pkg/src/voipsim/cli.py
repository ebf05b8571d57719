"""Command line: ``voipsim run | compare | validate``.

Exit codes: 0 run ok (and, for ``compare``, every expected PHY ordering held),
1 run ok but an ordering was violated, 2 any error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ScenarioError, load_scenario, paper_scenario_path
from .engine import US_PER_S, SimulationFault
from .report import compare, emit_outputs, format_comparison
from .runner import run_scenario

EXIT_OK, EXIT_ORDERING, EXIT_ERROR = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="voipsim", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default=None,
                        help="scenario file (default: the bundled two-subnet scenario)")
    sub = p.add_subparsers(dest="command", required=True)

    sim = argparse.ArgumentParser(add_help=False, parents=[common])
    sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sim.add_argument("--duration", type=float, default=None, metavar="SECONDS",
                     help="override the simulated horizon")
    sim.add_argument("--out", default=None, metavar="DIR", help="write CSV outputs here")

    run = sub.add_parser("run", parents=[sim], help="simulate one PHY")
    run.add_argument("--phy", type=str.upper, choices=("A", "B"), default=None)
    sub.add_parser("compare", parents=[sim], help="simulate both PHYs and compare")
    sub.add_parser("validate", parents=[common], help="check a scenario file and exit")
    return p


def _duration(args) -> int | None:
    if args.duration is None:
        return None
    if args.duration <= 0:
        raise ValueError("--duration must be positive")
    return round(args.duration * US_PER_S)


def _summary(rep) -> str:
    lines = [f"phy {rep.phy}  seed {rep.seed}  {rep.duration / US_PER_S:g} s  "
             f"{rep.events_fired} events"]
    lines += [f"  {k:<22}{v:.4f}" for k, v in rep.headline().items()]
    return "\n".join(lines)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_scenario(args.scenario or paper_scenario_path())
        if args.command == "validate":
            print(f"{args.scenario or paper_scenario_path()}: ok "
                  f"({len(cfg.nodes)} nodes, {len(cfg.flows)} flows, {len(cfg.channels)} channels)")
            return EXIT_OK
        duration = _duration(args)
        if args.command == "run":
            rep = run_scenario(cfg, args.phy, args.seed, duration)
            print(_summary(rep))
            if args.out:
                emit_outputs(args.out, [rep])
            return EXIT_OK
        a = run_scenario(cfg, "A", args.seed, duration)
        b = run_scenario(cfg, "B", args.seed, duration)
        cmp = compare(a, b)
        if args.out:
            emit_outputs(args.out, [a, b], cmp)
        print(format_comparison(cmp), end="")
        return cmp.exit_code()
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (SimulationFault, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
