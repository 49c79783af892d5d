"""Command-line front end: config ingestion, dispatch, and report emission.

Config files are strict-schema JSON: unknown keys are rejected so a typo can
never silently corrupt a study.  CSV is the primary tabular output (one row
per report row plus a long-format curves file); a JSON sidecar carries the
seed, the config echo, and versions needed to re-run.

Exit codes: 0 all pass flags true, 1 some bound violated, 2 operational
error, 64 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
from scipy import special

from . import __version__
from .errors import IoError, SchemaError, SubgaussError, ValidationError
from .experiments import (
    CorollaryConfig,
    ExperimentReport,
    TheoremConfig,
    merge_reports,
    run_corollary_experiment,
    run_counterexample,
    run_theorem_experiment,
    run_wishart_conditioning,
)
from .gaussian_core import CovarianceSpec, split_covariance, substream
from .nonlinearity import get_map, smoothed_mean_quadrature
from .psi2_estimation import psi2_scalar

DEFAULT_SEED = 42
EXPERIMENTS = ("theorem", "corollary", "wishart", "counterexample", "all")

DEFAULTS = {
    "theorem": {"dims": [16, 64, 256], "kappas": [1, 4, 16], "maps": ["sgn", "clamp"],
                "samples": 100_000, "directions": 64},
    "corollary": {"dims": [32, 64, 128], "w_draws": 50, "samples": 100_000,
                  "directions": 32},
    "wishart": {"dims": [64, 128, 256], "trials": 1000, "threshold": 100.0},
    "counterexample": {"dims": [16, 64, 256], "samples": 100_000},
    "all": {},
}

_SCHEMA = {
    "theorem": {"dims": list, "kappas": list, "maps": list, "samples": int,
                "directions": int},
    "corollary": {"dims": list, "w_draws": int, "samples": int, "directions": int},
    "wishart": {"dims": list, "trials": int, "threshold": (int, float)},
    "counterexample": {"dims": list, "samples": int},
    "all": {},
}
_COMMON_KEYS = {"experiment": str, "seed": int, "format": str, "output_dir": str}

SCHEMA_HELP = """\
Config file schema (strict JSON object; unknown keys are errors):
  common:          experiment (one of %s), seed (int),
                   format ("csv" | "json"), output_dir (str)
  theorem:         dims [int], kappas [num >= 1], maps [str], samples (int >= 1e4),
                   directions (int)
  corollary:       dims [int], w_draws (int >= 20), samples (int >= 1e4),
                   directions (int)
  wishart:         dims [int], trials (int >= 100), threshold (num)
  counterexample:  dims [>= 3 ints spanning a factor >= 8], samples (int)
""" % (", ".join(EXPERIMENTS))


def _env_seed() -> int:
    raw = os.environ.get("SUBGAUSS_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError as exc:
        raise ValidationError(f"SUBGAUSS_SEED must be an integer, got {raw!r}") from exc


def _env_threads() -> int:
    raw = os.environ.get("SUBGAUSS_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ValidationError(f"SUBGAUSS_THREADS must be an integer, got {raw!r}") from exc


class RunConfig:
    """Validated run description: experiment, parameters, output options."""

    def __init__(self, experiment: str, parameters: dict, output_dir: str = "out",
                 seed: int | None = None, format: str = "csv"):
        if experiment not in EXPERIMENTS:
            raise ValidationError(
                f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
        if format not in ("csv", "json"):
            raise ValidationError(f"format must be 'csv' or 'json', got {format!r}")
        self.experiment = experiment
        self.parameters = dict(parameters)
        self.output_dir = str(output_dir)
        self.seed = _env_seed() if seed is None else int(seed)
        self.format = format
        build_experiment_configs(self)  # eager precondition check

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.echo() == other.echo()

    def echo(self) -> dict:
        return {"experiment": self.experiment, **self.parameters,
                "seed": self.seed, "format": self.format,
                "output_dir": self.output_dir}


def parse_config(file_contents: str) -> RunConfig:
    """Parse a strict-schema JSON config into a validated RunConfig."""
    try:
        doc = json.loads(file_contents)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"config must be a JSON object, got {type(doc).__name__}")
    experiment = doc.get("experiment")
    if experiment is None:
        raise SchemaError("missing required key 'experiment'")
    if not isinstance(experiment, str) or experiment not in EXPERIMENTS:
        raise ValidationError(
            f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    allowed = dict(_SCHEMA[experiment])
    allowed.update({k: (int,) if k == "seed" else str for k in _COMMON_KEYS})
    params = {}
    common = {}
    for key, value in doc.items():
        if key == "experiment":
            continue
        if key not in allowed:
            raise SchemaError(f"unknown key {key!r} for experiment {experiment!r}")
        expected = allowed[key]
        if key == "seed":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError(f"key 'seed' must be an integer, got {value!r}")
            common[key] = value
        elif key in ("format", "output_dir"):
            if not isinstance(value, str):
                raise ValidationError(f"key {key!r} must be a string, got {value!r}")
            common[key] = value
        else:
            if not isinstance(value, expected if isinstance(expected, tuple) else (expected,)):
                raise ValidationError(
                    f"key {key!r} has wrong type: expected {expected}, got {value!r}")
            params[key] = value
    return RunConfig(experiment, params,
                     output_dir=common.get("output_dir", "out"),
                     seed=common.get("seed"),
                     format=common.get("format", "csv"))


def _params_with_defaults(experiment: str, params: dict) -> dict:
    merged = dict(DEFAULTS[experiment])
    merged.update({k: v for k, v in params.items() if v is not None})
    return merged


def build_experiment_configs(run: RunConfig) -> dict:
    """Expand a RunConfig into the module-level config objects, validating
    every precondition eagerly."""
    out = {}
    names = EXPERIMENTS[:-1] if run.experiment == "all" else (run.experiment,)
    for name in names:
        p = _params_with_defaults(name, run.parameters if run.experiment != "all" else {})
        if name == "theorem":
            out[name] = tuple(
                TheoremConfig(dims=tuple(int(n) for n in p["dims"]),
                              kappas=tuple(float(k) for k in p["kappas"]),
                              map_name=str(m), samples_per_cell=int(p["samples"]),
                              directions=int(p["directions"]), seed=run.seed)
                for m in p["maps"])
        elif name == "corollary":
            out[name] = CorollaryConfig(dims=tuple(int(n) for n in p["dims"]),
                                        w_draws=int(p["w_draws"]),
                                        samples_per_w=int(p["samples"]),
                                        directions=int(p["directions"]), seed=run.seed)
        elif name == "wishart":
            if int(p["trials"]) < 100:
                raise ValidationError(f"trials must be >= 100, got {p['trials']}")
            out[name] = p
        elif name == "counterexample":
            dims = [int(n) for n in p["dims"]]
            if len(dims) < 3 or max(dims) < 8 * min(dims):
                raise ValidationError(
                    f"counterexample dims need >= 3 values spanning a factor >= 8, got {dims}")
            out[name] = p
    return out


def run_experiments(run: RunConfig, *, threads: int = 1) -> list[ExperimentReport]:
    configs = build_experiment_configs(run)
    reports = []
    for name, cfg in configs.items():
        if name == "theorem":
            reports.append(merge_reports(
                [run_theorem_experiment(c, threads=threads) for c in cfg]))
        elif name == "corollary":
            reports.append(run_corollary_experiment(cfg, threads=threads))
        elif name == "wishart":
            reports.append(run_wishart_conditioning(
                cfg["dims"], int(cfg["trials"]), run.seed,
                threshold=float(cfg["threshold"])))
        elif name == "counterexample":
            reports.append(run_counterexample(
                cfg["dims"], int(cfg["samples"]), run.seed, threads=threads))
    return reports


# Report emission --------------------------------------------------------------

_CSV_COLUMNS = ("experiment", "n", "kappa", "estimator", "value",
                "ci_low", "ci_high", "bound", "pass")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _prepare_target(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise IoError(f"refusing to overwrite {path} without --force")


def emit_report(report: ExperimentReport, format: str, output_dir, *,
                force: bool = False, run_config_echo: dict | None = None) -> list[Path]:
    """Write the report and return the created paths.

    csv format: <experiment>.csv (one row per report row), <experiment>.json
    sidecar with full metadata, and <experiment>_curves.csv in long format for
    value-vs-n plots.  json format: a single file that also embeds the rows.
    """
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output dir {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise IoError(f"output dir {out} is not writable")

    sidecar = {
        "experiment": report.experiment,
        "all_passed": report.all_passed,
        "row_count": len(report.rows),
        "metadata": report.metadata,
        "versions": {"subgauss": __version__, "numpy": np.__version__},
    }
    if run_config_echo is not None:
        sidecar["run_config"] = run_config_echo

    paths = []
    try:
        if format == "json":
            target = out / f"{report.experiment}.json"
            _prepare_target(target, force)
            sidecar["rows"] = [r.as_dict() for r in report.rows]
            target.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
            return [target]

        csv_path = out / f"{report.experiment}.csv"
        json_path = out / f"{report.experiment}.json"
        curves_path = out / f"{report.experiment}_curves.csv"
        for target in (csv_path, json_path, curves_path):
            _prepare_target(target, force)
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_COLUMNS)
            for r in report.rows:
                writer.writerow([_fmt(v) for v in
                                 (r.experiment, r.n, r.kappa, r.estimator, r.value,
                                  r.ci_low, r.ci_high, r.bound, r.passed)])
        paths.append(csv_path)
        json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        paths.append(json_path)
        with open(curves_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("experiment", "series", "n", "value"))
            for r in report.rows:
                if r.n is not None:
                    writer.writerow([_fmt(v) for v in
                                     (r.experiment, r.estimator, r.n, r.value)])
        paths.append(curves_path)
    except OSError as exc:
        raise IoError(f"failed writing report files in {out}: {exc}") from exc
    return paths


# Self test ----------------------------------------------------------------------

def run_selftest() -> int:
    """Closed-form oracle suite; returns 0 when every check passes."""
    t_start = time.time()
    checks = []

    sgn = get_map("sgn")
    worst = 0.0
    for a in (0.25, 1.0, 4.0):
        for x in np.arange(-5.0, 5.0 + 1e-9, 0.1):
            dev = abs(smoothed_mean_quadrature(sgn, a, x)
                      - special.erf(x / math.sqrt(2.0 * a)))
            worst = max(worst, dev)
    checks.append(("smoothed_mean(sgn) vs erf on grid", worst <= 1e-6,
                   f"max dev {worst:.2e} (tol 1e-06)"))

    gauss = substream(DEFAULT_SEED, "selftest-gaussian").standard_normal(10**6)
    est = psi2_scalar(gauss)
    target = math.sqrt(8.0 / 3.0)
    checks.append(("psi2 of 1e6 gaussian draws", abs(est.value - target) <= 0.03,
                   f"value {est.value:.4f} vs {target:.4f} (tol 0.03)"))

    rad = np.where(substream(DEFAULT_SEED, "selftest-rademacher").random(10**6) < 0.5,
                   -1.0, 1.0)
    est = psi2_scalar(rad)
    target = 1.0 / math.sqrt(math.log(2.0))
    checks.append(("psi2 of 1e6 rademacher draws", abs(est.value - target) <= 0.02,
                   f"value {est.value:.4f} vs {target:.4f} (tol 0.02)"))

    w = substream(DEFAULT_SEED, "selftest-wishart").standard_normal((8, 16))
    cov = CovarianceSpec.wishart_of(w)
    split = split_covariance(cov)
    resid = float(np.max(np.abs(split.a * np.eye(8) + split.residual.matrix - cov.matrix)))
    checks.append(("covariance split reconstruction", resid <= 1e-10,
                   f"max residual {resid:.2e} (tol 1e-10)"))

    ok = True
    for name, passed, detail in checks:
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        ok = ok and passed
    print(f"selftest finished in {time.time() - t_start:.1f}s")
    return 0 if ok else 1


# CLI ------------------------------------------------------------------------------

class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok]


def _str_list(text: str) -> list[str]:
    return [tok for tok in text.split(",") if tok]


def build_parser() -> _Parser:
    parser = _Parser(prog="subgauss", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (default: SUBGAUSS_SEED or 42)")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--force", action="store_true",
                       help="allow overwriting existing output files")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (speed only, never results)")

    p = sub.add_parser("theorem", help="bounded-map concentration grid")
    add_common(p)
    p.add_argument("--dims", type=_int_list, default=None)
    p.add_argument("--kappas", type=_float_list, default=None)
    p.add_argument("--maps", type=_str_list, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--directions", type=int, default=None)

    p = sub.add_parser("corollary", help="sign-quantized square maps, row partition")
    add_common(p)
    p.add_argument("--dims", type=_int_list, default=None)
    p.add_argument("--w-draws", dest="w_draws", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--directions", type=int, default=None)

    p = sub.add_parser("wishart", help="half-block conditioning statistics")
    add_common(p)
    p.add_argument("--dims", type=_int_list, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)

    p = sub.add_parser("counterexample", help="rank-one all-ones covariance growth")
    add_common(p)
    p.add_argument("--dims", type=_int_list, default=None)
    p.add_argument("--samples", type=int, default=None)

    p = sub.add_parser("all", help="run all four studies with defaults")
    add_common(p)

    sub.add_parser("selftest", help="closed-form oracle suite")
    return parser


_FLAG_PARAMS = {
    "theorem": ("dims", "kappas", "maps", "samples", "directions"),
    "corollary": ("dims", "w_draws", "samples", "directions"),
    "wishart": ("dims", "trials", "threshold"),
    "counterexample": ("dims", "samples"),
    "all": (),
}


def _assemble_run_config(args) -> RunConfig:
    if args.config is not None:
        try:
            contents = Path(args.config).read_text()
        except OSError as exc:
            raise IoError(f"cannot read config file {args.config}: {exc}") from exc
        run = parse_config(contents)
        if run.experiment != args.command:
            raise ValidationError(
                f"config is for experiment {run.experiment!r} but the "
                f"{args.command!r} subcommand was invoked")
        params = dict(run.parameters)
        seed, fmt, out = run.seed, run.format, run.output_dir
    else:
        params, seed, fmt, out = {}, None, "csv", "out"
    for key in _FLAG_PARAMS[args.command]:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    if args.seed is not None:
        seed = args.seed
    if args.format is not None:
        fmt = args.format
    if args.out is not None:
        out = args.out
    return RunConfig(args.command, params, output_dir=out, seed=seed, format=fmt)


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        print(SCHEMA_HELP, file=sys.stderr)
        return 64

    if args.command == "selftest":
        return run_selftest()

    try:
        run = _assemble_run_config(args)
        threads = args.threads if args.threads is not None else _env_threads()
    except (SchemaError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        print(SCHEMA_HELP, file=sys.stderr)
        return 64
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        reports = run_experiments(run, threads=max(1, threads))
        all_passed = True
        for report in reports:
            paths = emit_report(report, run.format, run.output_dir,
                                force=args.force, run_config_echo=run.echo())
            for path in paths:
                print(f"wrote {path}")
            n_fail = sum(1 for r in report.rows if not r.passed)
            print(f"{report.experiment}: {len(report.rows)} rows, "
                  f"{n_fail} bound violations")
            all_passed = all_passed and report.all_passed
        return 0 if all_passed else 1
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SubgaussError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
