"""Command-line front end.

Subcommands:

    run       one experiment -> report.json, indices.csv, errors.csv
    sweep     one experiment per qubit count -> sweep.csv (qubits, order,
              variant, epsilon, gates), directly plottable
    indices   sensitivity stages only -> indices.csv
    validate  re-check an emitted report directory's invariants

Configuration comes from an optional JSON file (--config) whose keys mirror
the flags 1:1; inline flags override file values.  The effective config is
embedded in every output.  Exit codes: 0 success, 1 runtime failure, 2
configuration failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from .hamiltonian import ConfigError
from .pipeline import (
    ExperimentConfig,
    PipelineError,
    errors_csv,
    indices_csv,
    run_experiment,
    run_sensitivity,
    validate_report_dir,
    write_report,
)

OUTDIR_ENV = "TROTTERPRUNE_OUTDIR"


def _default_outdir() -> str:
    return os.environ.get(OUTDIR_ENV, "trotterprune-results")


def _parse_floats(values: list[str]) -> tuple[float, ...]:
    out: list[float] = []
    for chunk in values:
        out.extend(float(x) for x in chunk.split(",") if x)
    return tuple(out)


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x)


def _add_experiment_flags(p: argparse.ArgumentParser, qubits_list: bool) -> None:
    # Defaults are None so that "flag was provided" is detectable; unset
    # fields fall back to the config file, then to ExperimentConfig defaults.
    if qubits_list:
        p.add_argument("--qubits", type=_parse_ints, default=None,
                       help="comma-separated qubit counts, e.g. 5,7,9")
    else:
        p.add_argument("--qubits", type=int, default=None, help="number of qubits")
    p.add_argument("--terms", type=int, default=None, help="number of Hamiltonian terms")
    p.add_argument("--density", type=float, default=None,
                   help="fill probability per upper-triangle entry (1.0 = dense)")
    p.add_argument("--weaken-count", type=int, default=None,
                   help="how many terms to weaken")
    p.add_argument("--weaken-factor", type=float, default=None,
                   help="multiplier applied to weakened terms")
    p.add_argument("--samples", type=int, default=None,
                   help="Saltelli base sample count N (power of two)")
    p.add_argument("--threshold-ratio", type=float, default=None,
                   help="remove terms with S_i below mean(S)/ratio")
    p.add_argument("--seed", type=int, default=None, help="ensemble seed")
    p.add_argument("--time", action="append", default=None,
                   help="evolution time(s); repeatable or comma-separated")
    p.add_argument("--steps", type=int, default=None, help="product-formula step count")
    p.add_argument("--orders", type=_parse_ints, default=None,
                   help="product-formula orders, e.g. 1,2")
    p.add_argument("--direction-numbers", default=None, metavar="PATH",
                   help="override the bundled Sobol direction-number table")
    p.add_argument("--config", default=None, metavar="PATH",
                   help="JSON config file; inline flags override its values")
    p.add_argument("--out", default=None, metavar="DIR",
                   help=f"output directory (default ${OUTDIR_ENV} or ./{_default_outdir()})")
    p.add_argument("--threads", type=int, default=None,
                   help="cap BLAS/native worker threads")


# flag destinations -> ExperimentConfig field names
_FLAG_FIELDS = {
    "qubits": "qubits",
    "terms": "n_terms",
    "density": "density",
    "weaken_count": "weaken_count",
    "weaken_factor": "weaken_factor",
    "samples": "samples",
    "threshold_ratio": "threshold_ratio",
    "seed": "seed",
    "time": "times",
    "steps": "steps",
    "orders": "orders",
    "direction_numbers": "direction_numbers",
}


def _build_config(args: argparse.Namespace, qubits_override: int | None = None) -> ExperimentConfig:
    base: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            base = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
    for dest, field_name in _FLAG_FIELDS.items():
        value = getattr(args, dest)
        if value is not None:
            base[field_name] = _parse_floats(value) if dest == "time" else value
    if qubits_override is not None:
        base["qubits"] = qubits_override
    cfg = ExperimentConfig.from_dict(base)
    cfg.validate()
    return cfg


def _limits(args: argparse.Namespace):
    return threadpool_limits(limits=args.threads)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    outdir = Path(args.out or _default_outdir())
    with _limits(args):
        report = run_experiment(cfg)
    paths = write_report(report, outdir)
    print(f"removed {len(report.removed)} of {cfg.n_terms} terms "
          f"(subset of weakened: {report.removed_is_subset_of_weakened})")
    for row in report.error_rows:
        print(f"order {row.order} t={row.time:g} {row.variant}: "
              f"epsilon={row.epsilon:.6e} gates={row.gate_count}")
    print(f"report written to {paths['report'].parent}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.qubits is None and not (args.config and "qubits" in json.loads(Path(args.config).read_text() or "{}")):
        raise ConfigError("sweep requires --qubits (comma-separated list)")
    probe = _build_config(args, qubits_override=2)  # shared-field validation
    if len(probe.times) != 1:
        raise ConfigError(f"sweep uses a single time point, got {probe.times}")
    qubit_counts = args.qubits if args.qubits is not None else (probe.qubits,)
    if isinstance(qubit_counts, int):
        qubit_counts = (qubit_counts,)

    outdir = Path(args.out or _default_outdir())
    outdir.mkdir(parents=True, exist_ok=True)
    sweep_cfg = {**probe.to_dict(), "qubits": list(qubit_counts)}
    lines = [
        "# config=" + json.dumps(sweep_cfg, sort_keys=True, separators=(",", ":")),
        "qubits,order,variant,epsilon,gates",
    ]
    failed: list[str] = []
    for q in qubit_counts:
        cfg = _build_config(args, qubits_override=q)
        try:
            with _limits(args):
                report = run_experiment(cfg)
        except PipelineError as exc:
            failed.append(f"qubits={q}: {exc}")
            continue
        for row in report.error_rows:
            lines.append(
                f"{q},{row.order},{row.variant},{float(row.epsilon)!r},{row.gate_count}"
            )
        print(f"qubits={q}: removed {len(report.removed)}, "
              f"reduced terms {report.reduced_term_count}")
    path = outdir / "sweep.csv"
    path.write_text("\n".join(lines) + "\n")
    print(f"sweep written to {path}")
    if failed:
        print("sweep points failed:\n  " + "\n  ".join(failed), file=sys.stderr)
        return 1
    return 0


def cmd_indices(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    with _limits(args):
        ts, _, sens, removed = run_sensitivity(cfg)
    outdir = Path(args.out or _default_outdir())
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "indices.csv"
    path.write_text(indices_csv(cfg, sens, ts.weakened, removed))
    print(f"{len(removed)} of {cfg.n_terms} terms below mean/{cfg.threshold_ratio:g}")
    print(f"indices written to {path}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    failures = validate_report_dir(args.report_dir)
    if failures:
        for f in failures:
            print(f"FAIL: {f}", file=sys.stderr)
        return 1
    print(f"{args.report_dir}: all report invariants hold")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trotterprune",
        description="Sensitivity-guided truncation of Trotter-Suzuki product formulas.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment and write its report")
    _add_experiment_flags(p_run, qubits_list=False)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run one experiment per qubit count")
    _add_experiment_flags(p_sweep, qubits_list=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_idx = sub.add_parser("indices", help="sensitivity indices only (no error metrics)")
    _add_experiment_flags(p_idx, qubits_list=False)
    p_idx.set_defaults(func=cmd_indices)

    p_val = sub.add_parser("validate", help="re-check an emitted report directory")
    p_val.add_argument("report_dir", help="directory holding report.json and CSVs")
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
