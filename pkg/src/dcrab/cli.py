"""Command-line interface: sweeps, single runs and landscape verification.

Every configuration key can live in a flat key-value file (``key = value``
per line, ``#`` comments) passed with ``--config``; a CLI flag of the same
name overrides the file. Exit status 0 on a completed run, 1 when a
verification property fails, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import sys

from .engine import record_to_text, save_record
from .harness import (
    SINGLE_RUN,
    SWEEP_KINDS,
    VERIFY_LANDSCAPE,
    ExperimentConfig,
    emit_csv,
    emit_plot,
    run_single,
    run_sweep,
)
from .pulses import save_pulse
from .verify import render_report, run_landscape_verification

# flag/config-file key -> (ExperimentConfig field, parser)
_FLOAT = float
_INT = int
_STR = str


def _parse_grid(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.replace(" ", "").split(",") if part)


_KEYS = {
    "qubits": ("n_qubits", _INT),
    "time": ("total_time", _FLOAT),
    "omega-max": ("omega_max", _FLOAT),
    "nc": ("n_coefficients", _INT),
    "method": ("method", _STR),
    "constraint": ("constraint", _STR),
    "constraint-value": ("constraint_value", _FLOAT),
    "instances": ("n_instances", _INT),
    "restarts": ("n_restarts", _INT),
    "seed": ("master_seed", _INT),
    "eta": ("eta", _FLOAT),
    "budget": ("max_total_evaluations", _INT),
    "super-iterations": ("n_super_iterations", _INT),
    "steps": ("n_steps", _INT),
    "workers": ("workers", _INT),
    "grid": ("grid", _parse_grid),
    "out-csv": ("out_csv", _STR),
    "out-plot": ("out_plot", _STR),
}


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key-value configuration file")
    parser.add_argument("--qubits", type=int, help="system size N")
    parser.add_argument("--time", type=float, help="total evolution time T")
    parser.add_argument(
        "--omega-max", type=float, help="bandwidth limit in rad per unit time"
    )
    parser.add_argument("--nc", type=int, help="basis functions per super-iteration")
    parser.add_argument("--method", choices=("crab", "dcrab"))
    parser.add_argument("--constraint", choices=("none", "penalty", "hardwall"))
    parser.add_argument(
        "--constraint-value",
        type=float,
        help="penalty weight or hard-wall height for non-sweep constraint use",
    )
    parser.add_argument("--instances", type=int, help="random instances per value")
    parser.add_argument("--restarts", type=int, help="restarts per instance")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--eta", type=float, help="success threshold on infidelity")
    parser.add_argument("--budget", type=int, help="total objective evaluations")
    parser.add_argument(
        "--super-iterations", type=int, help="dressing cap per optimization"
    )
    parser.add_argument("--steps", type=int, help="propagation steps override")
    parser.add_argument("--workers", type=int, help="parallel trial workers")
    parser.add_argument(
        "--grid", type=str, help="comma-separated swept values (kind specific)"
    )
    parser.add_argument("--out-csv", help="sweep table destination")
    parser.add_argument("--out-plot", help="vector-graphic figure destination")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcrab",
        description="CRAB / dressed-CRAB optimal control experiments on random "
        "spin systems",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind, text in (
        ("sweep-nc", "success probability vs number of basis functions"),
        ("sweep-bandwidth", "success vs bandwidth limit (grid in units of 2*pi/T)"),
        ("sweep-fmax", "success vs pulse-height constraint"),
        ("single-run", "one optimization, emitting the record and pulse"),
        ("verify-landscape", "numerical landscape certificates"),
    ):
        p = sub.add_parser(kind, help=text)
        _add_common_flags(p)
        if kind == "single-run":
            p.add_argument("--out-record", help="optimization record destination")
            p.add_argument("--out-pulse", help="optimal pulse destination")
        if kind == "verify-landscape":
            p.add_argument("--out-report", help="verification report destination")
            p.add_argument(
                "--span-repetitions",
                type=int,
                default=100,
                help="repetitions of the tangent-span check",
            )
    return parser


def _load_config_file(path: str) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line (need 'key = value'): {raw!r}")
            key, _, value = line.partition("=")
            values[key.strip().replace("_", "-")] = value.strip()
    return values


def _build_experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    fields: dict = {"kind": args.kind}
    if args.config:
        for key, raw in _load_config_file(args.config).items():
            if key not in _KEYS:
                raise ValueError(f"unknown configuration key {key!r}")
            field_name, parse = _KEYS[key]
            fields[field_name] = parse(raw)
    for key, (field_name, _) in _KEYS.items():
        flag_value = getattr(args, key.replace("-", "_"), None)
        if flag_value is not None:
            fields[field_name] = flag_value
    if isinstance(fields.get("grid"), str):
        fields["grid"] = _parse_grid(fields["grid"])
    return ExperimentConfig(**fields)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _build_experiment_config(args)
    except (ValueError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if config.kind in SWEEP_KINDS:
        table = run_sweep(config)
        if config.out_csv:
            emit_csv(table, config.out_csv)
        if config.out_plot:
            emit_plot(table, config.out_plot)
        print(",".join(("swept_value", "p", "p_std", "effort", "effort_logstd", "n_trials")))
        for row in table.rows:
            print(
                f"{row.swept_value:g},{row.p:g},{row.p_std:g},"
                f"{row.effort:g},{row.effort_logstd:g},{row.n_trials}"
            )
        return 0

    if config.kind == SINGLE_RUN:
        record = run_single(config)
        print(record_to_text(record), end="")
        if getattr(args, "out_record", None):
            save_record(record, args.out_record)
        if getattr(args, "out_pulse", None):
            save_pulse(record.pulse, config.total_time, args.out_pulse)
        return 0

    if config.kind == VERIFY_LANDSCAPE:
        checks = run_landscape_verification(
            n_qubits=config.n_qubits,
            total_time=config.total_time,
            omega_max=config.omega_max,
            master_seed=config.master_seed,
            n_steps=config.n_steps or 2048,
            span_repetitions=getattr(args, "span_repetitions", 100),
        )
        report = render_report(checks)
        print(report, end="")
        if getattr(args, "out_report", None):
            with open(args.out_report, "w", encoding="utf-8") as fh:
                fh.write(report)
        return 0 if all(c.passed for c in checks) else 1

    raise AssertionError(f"unhandled kind {config.kind!r}")


if __name__ == "__main__":
    sys.exit(main())
