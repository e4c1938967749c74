"""Command line entry point: ``dqarls design-quantizer | run | power-report``.

Exit codes: 0 success, 1 validation error, 2 runtime divergence.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

from .adaptive import DivergenceError
from .config import ConfigError, RunConfig, config_dict, dump_yaml, load_config, manifest_dict
from .network import TopologyError
from .power import PowerModel, power_table
from .quantizer import MAX_BITS, QuantizerDesignError, design_quantizer
from .simulation import build_scenario, bits_label, curves_csv, run_ensemble

EXIT_OK, EXIT_VALIDATION, EXIT_DIVERGENCE = 0, 1, 2

log = logging.getLogger("dqarls")


def cmd_design_quantizer(args) -> int:
    if not 1 <= args.bits <= MAX_BITS:
        print(f"error: bits must be in 1..{MAX_BITS}, got {args.bits}", file=sys.stderr)
        return EXIT_VALIDATION
    spec = design_quantizer(args.bits, max_iterations=args.max_iterations, tolerance=args.tolerance)
    table = spec.table()
    if args.out:
        out = Path(args.out)
        if out.is_dir():
            out = out / f"quantizer_{args.bits}bit.txt"
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(table)
        print(f"wrote {out}")
    else:
        sys.stdout.write(table)
    print(f"alpha = {spec.alpha:.12f}")
    print(f"output power for unit-power complex input = {spec.complex_power():.12f}")
    return EXIT_OK


def cmd_run(args) -> int:
    run = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        run = dataclasses.replace(run, experiment=dataclasses.replace(run.experiment, master_seed=args.seed))
    if args.trials is not None:
        run = dataclasses.replace(run, experiment=dataclasses.replace(run.experiment, trials=args.trials))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    scenario = build_scenario(run.experiment)
    curves = run_ensemble(run.experiment, threads=args.threads, scenario=scenario)
    (out / "msd.csv").write_text(curves_csv(curves))
    (out / "topology.txt").write_text(scenario.topology.export_text())
    model = run.power.model(run.experiment.node_count)
    depths = sorted({b for b in run.experiment.bit_depths if b is not None} | {run.power.reference_bits})
    (out / "power.csv").write_text(power_table(model, depths, run.power.reference_bits))
    steady = {f"{c.algorithm}/{bits_label(c.bits)}": round(c.steady_state_db(), 4) for c in curves}
    extra = {"threads": args.threads, "elapsed_seconds": round(time.time() - started, 3), "steady_state_msd_db": steady}
    (out / "manifest.yaml").write_text(dump_yaml(manifest_dict(run, scenario, extra)))
    for name, value in steady.items():
        print(f"{name:>16}: steady-state MSD {value:8.2f} dB")
    print(f"wrote {out / 'msd.csv'} and {out / 'manifest.yaml'}")
    return EXIT_OK


def cmd_power_report(args) -> int:
    if not args.bits:
        print("error: at least one bit depth is required", file=sys.stderr)
        return EXIT_VALIDATION
    model = PowerModel(args.bandwidth, args.conversion_energy, args.nodes, args.adcs_per_node)
    if args.reference < max(args.bits):
        print(
            f"warning: reference {args.reference} bits is below the largest bit depth {max(args.bits)}",
            file=sys.stderr,
        )
    table = power_table(model, args.bits, args.reference)
    if args.out:
        out = Path(args.out)
        if out.is_dir():
            out = out / "power.csv"
        out.write_text(table)
        print(f"wrote {out}", file=sys.stderr)
    else:
        sys.stdout.write(table)
    return EXIT_OK


def cmd_show_config(args) -> int:
    run = load_config(args.config) if args.config else RunConfig()
    sys.stdout.write(dump_yaml(config_dict(run)))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are validation failures; 2 is reserved for divergence
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dqarls", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design-quantizer", help="Lloyd-Max design with unit-power label rescale")
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--out", help="output file (or directory); stdout if omitted")
    p.add_argument("--max-iterations", type=int, default=10_000)
    p.add_argument("--tolerance", type=float, default=1e-12)
    p.set_defaults(func=cmd_design_quantizer)

    p = sub.add_parser("run", help="ensemble MSD simulation")
    p.add_argument("--config", help="YAML config or a previous manifest.yaml")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, help="override experiment.master_seed")
    p.add_argument("--trials", type=int, help="override experiment.trials")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("power-report", help="ADC power per bit depth")
    p.add_argument("--bits", type=int, nargs="*", default=list(range(1, 13)))
    p.add_argument("--reference", type=int, default=12)
    p.add_argument("--bandwidth", type=float, default=200e3, help="hertz")
    p.add_argument("--conversion-energy", type=float, default=494e-15, help="joules per conversion step")
    p.add_argument("--nodes", type=int, default=20)
    p.add_argument("--adcs-per-node", type=int, default=2)
    p.add_argument("--out", help="output CSV file; stdout if omitted")
    p.set_defaults(func=cmd_power_report)

    p = sub.add_parser("show-config", help="print the resolved config with every default")
    p.add_argument("--config")
    p.set_defaults(func=cmd_show_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except (ConfigError, TopologyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DivergenceError, QuantizerDesignError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    raise SystemExit(main())
