"""Command line front end.

Three modes over the same deterministic engine:

* ``verify``: run noiseless trials, require exact decoding and all
  structural certificates.
* ``dof_sweep``: fit the sum-rate slope over an SNR grid and compare it
  against the exact symbols-per-slot count.
* ``audit``: run trials only to collect the transmitter information-access
  log; report which slots had their channel states fed back and whether
  output feedback stayed within its association.

Outputs are schema-stable: JSON is rendered with sorted keys and floats at
17 significant digits, so identical configs produce byte-identical files.
Exit codes: 0 all assertions passed, 1 an assertion failed, 2 usage error,
3 a scheme invariant broke (certificate or causality failure).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from fractions import Fraction

from .channel import CausalityViolation
from .evaluate import SchemeFailure, dof_by_counting, estimate_dof, run_trials
from .numerics import Tolerances
from .registry import SCHEMES, get_scheme

__all__ = ["UsageError", "RunConfig", "parse_config", "run", "main"]

MODES = ("verify", "dof_sweep", "audit")
FORMATS = ("json", "csv")

#: Acceptance bands for dof_sweep mode.
DOF_SLOPE_TOL = 0.05
DOF_R2_MIN = 0.999


class UsageError(Exception):
    """Bad flags or config file; maps to exit code 2."""


@dataclass
class RunConfig:
    """Fully resolved run description (flags override config file values)."""

    scheme: str
    mode: str = "verify"
    trials: int = 100
    seed: int = 0
    snr_grid_db: list[float] | None = None
    tol_rank: float = 1e-8
    tol_residual: float = 1e-8
    out: str | None = None
    format: str = "json"
    threads: int = 0  # 0 resolves to the machine's available parallelism

    def tolerances(self) -> Tolerances:
        try:
            return Tolerances(rank_rel=self.tol_rank, residual_rel=self.tol_residual)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def resolved_threads(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alignsim",
        description="Simulate and verify delayed-feedback interference alignment schemes.",
    )
    parser.add_argument("--scheme", choices=sorted(SCHEMES), help="scheme identifier")
    parser.add_argument("--mode", choices=MODES, help="what to run (default verify)")
    parser.add_argument("--trials", type=int, help="number of Monte Carlo trials")
    parser.add_argument("--seed", type=int, help="base seed for the trial tree")
    parser.add_argument(
        "--snr-grid",
        help="comma-separated SNR grid in dB (dof_sweep mode only), e.g. 40,50,60,70",
    )
    parser.add_argument("--tol-rank", type=float, help="relative rank decision cutoff")
    parser.add_argument("--tol-residual", type=float, help="relative residual acceptance cutoff")
    parser.add_argument("--out", help="output file path (default: stdout)")
    parser.add_argument("--format", choices=FORMATS, help="output format (default json)")
    parser.add_argument("--threads", type=int, help="parallel workers (default: all cores)")
    parser.add_argument("--config", help="JSON config file; explicit flags override it")
    return parser


def _parse_snr_grid(text: str) -> list[float]:
    try:
        grid = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"bad SNR grid {text!r}: {exc}") from None
    if not grid:
        raise UsageError("SNR grid is empty")
    return grid


def parse_config(argv: list[str] | None = None) -> RunConfig:
    """Merge defaults, config file and command line flags into a RunConfig."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    values: dict[str, object] = {}
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                file_values = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(file_values, dict):
            raise UsageError("config file must hold a JSON object")
        known = {f.name for f in fields(RunConfig)}
        for key in file_values:
            if key not in known:
                raise UsageError(f"unknown config key {key!r}")
        values.update(file_values)
    flag_map = {
        "scheme": args.scheme,
        "mode": args.mode,
        "trials": args.trials,
        "seed": args.seed,
        "snr_grid_db": _parse_snr_grid(args.snr_grid) if args.snr_grid is not None else None,
        "tol_rank": args.tol_rank,
        "tol_residual": args.tol_residual,
        "out": args.out,
        "format": args.format,
        "threads": args.threads,
    }
    for key, value in flag_map.items():
        if value is not None:
            values[key] = value
    if "scheme" not in values:
        raise UsageError("a scheme must be given (--scheme or config file)")
    try:
        config = RunConfig(**values)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    if config.scheme not in SCHEMES:
        known = ", ".join(sorted(SCHEMES))
        raise UsageError(f"unknown scheme {config.scheme!r}; known schemes: {known}")
    if config.mode not in MODES:
        raise UsageError(f"unknown mode {config.mode!r}; choose from {', '.join(MODES)}")
    if config.format not in FORMATS:
        raise UsageError(f"unknown format {config.format!r}")
    if config.trials < 1:
        raise UsageError("trials must be at least 1")
    if config.mode == "dof_sweep":
        if not config.snr_grid_db:
            raise UsageError("dof_sweep mode requires an SNR grid (--snr-grid)")
        if len(config.snr_grid_db) < 2:
            raise UsageError("the SNR grid needs at least two points")
    elif config.snr_grid_db:
        raise UsageError(f"mode {config.mode!r} does not take an SNR grid")
    if config.format == "csv" and config.mode != "dof_sweep":
        raise UsageError("csv output is only available in dof_sweep mode")
    config.tolerances()


# -- stable serialization ---------------------------------------------------


def _render_json(obj) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"cannot serialize non-finite float {obj!r}")
        return "%.17g" % obj
    if isinstance(obj, Fraction):
        return json.dumps(str(obj))
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_render_json(item) for item in obj) + "]"
    if isinstance(obj, dict):
        parts = []
        for key in sorted(obj):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            parts.append(json.dumps(key) + ":" + _render_json(obj[key]))
        return "{" + ",".join(parts) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _config_echo(config: RunConfig) -> dict:
    return {
        "scheme": config.scheme,
        "mode": config.mode,
        "trials": config.trials,
        "seed": config.seed,
        "snr_grid_db": config.snr_grid_db,
        "tol_rank": config.tol_rank,
        "tol_residual": config.tol_residual,
        "out": config.out,
        "format": config.format,
        "threads": config.threads,
    }


# -- modes -------------------------------------------------------------------


def _certificate_extrema(results) -> dict[str, list[float]]:
    extrema: dict[str, list[float]] = {}
    for result in results:
        for key, value in result.certificates.items():
            value = float(value)
            if key not in extrema:
                extrema[key] = [value, value]
            else:
                extrema[key][0] = min(extrema[key][0], value)
                extrema[key][1] = max(extrema[key][1], value)
    return extrema


def _mode_verify(config: RunConfig) -> tuple[dict, bool]:
    scheme = get_scheme(config.scheme)
    report = run_trials(
        config.scheme,
        config.trials,
        config.seed,
        tol=config.tolerances(),
        threads=config.resolved_threads(),
    )
    decode_ok = sum(1 for r in report.results if r.decode_ok)
    ranks_observed = sorted({rank for r in report.results for rank in r.interference_ranks})
    csi_slots = report.csi_slots_union()
    fraction = Fraction(len(csi_slots), scheme.num_slots)
    results = {
        "trials": config.trials,
        "decode_ok": decode_ok,
        "discards": len(report.discards),
        "max_rel_symbol_error": report.max_rel_symbol_error,
        "interference_ranks_observed": ranks_observed,
        "certificate_extrema": _certificate_extrema(report.results),
        "csi_slot_indices": csi_slots,
        "csi_slot_fraction": fraction,
        "outputs_own_receiver_only": all(
            r.outputs_own_receiver_only for r in report.results
        ),
    }
    passed = decode_ok == config.trials
    return results, passed


def _mode_audit(config: RunConfig) -> tuple[dict, bool]:
    scheme = get_scheme(config.scheme)
    report = run_trials(
        config.scheme,
        config.trials,
        config.seed,
        tol=config.tolerances(),
        threads=config.resolved_threads(),
    )
    csi_slots = report.csi_slots_union()
    fraction = Fraction(len(csi_slots), scheme.num_slots)
    own_only = all(r.outputs_own_receiver_only for r in report.results)
    results = {
        "trials": config.trials,
        "feedback_kind": scheme.feedback.kind.value,
        "csi_slot_indices": csi_slots,
        "csi_slot_fraction": fraction,
        "csi_slot_fraction_float": float(fraction),
        "csi_slot_budget": scheme.csi_slot_budget,
        "outputs_own_receiver_only": own_only,
        "discards": len(report.discards),
    }
    passed = fraction <= scheme.csi_slot_budget
    if config.scheme == "ic3_output_fb":
        passed = passed and own_only
    return results, passed


def _mode_dof_sweep(config: RunConfig) -> tuple[dict, bool]:
    scheme = get_scheme(config.scheme)
    estimate = estimate_dof(
        config.scheme,
        config.snr_grid_db,
        config.trials,
        config.seed,
        tol=config.tolerances(),
        threads=config.resolved_threads(),
    )
    counting = dof_by_counting(scheme)
    leakage_ratio = estimate.max_rel_symbol_error**2
    results = {
        "snr_grid_db": estimate.snr_grid_db,
        "sum_rates": estimate.sum_rates,
        "slope": estimate.slope,
        "intercept": estimate.intercept,
        "r_squared": estimate.r_squared,
        "dof_counting": counting,
        "dof_counting_float": float(counting),
        "trials_per_point": estimate.trials_per_point,
        "discards": estimate.discards,
        "max_rel_symbol_error": estimate.max_rel_symbol_error,
        "leakage_power_ratio": leakage_ratio,
    }
    passed = (
        abs(estimate.slope - float(counting)) <= DOF_SLOPE_TOL
        and estimate.r_squared >= DOF_R2_MIN
        # leaked power relative to desired is amplitude-invariant, so one
        # noiseless figure bounds it across the whole grid
        and leakage_ratio < 1e-12
    )
    return results, passed


def _render_csv(config: RunConfig, results: dict) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["snr_db", "sum_rate", "trials", "discards"])
    for snr_db, rate in zip(results["snr_grid_db"], results["sum_rates"]):
        writer.writerow(
            [
                "%.17g" % snr_db,
                "%.17g" % rate,
                results["trials_per_point"],
                results["discards"],
            ]
        )
    return buffer.getvalue()


def _emit(config: RunConfig, text: str) -> None:
    if config.out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(text)


def run(config: RunConfig) -> int:
    """Execute one configured run; returns the process exit code."""
    mode_fn = {
        "verify": _mode_verify,
        "audit": _mode_audit,
        "dof_sweep": _mode_dof_sweep,
    }[config.mode]
    try:
        results, passed = mode_fn(config)
    except (SchemeFailure, CausalityViolation) as exc:
        error_doc = {
            "config": _config_echo(config),
            "error": {"type": type(exc).__name__, "message": str(exc)},
            "pass": False,
        }
        _emit(config, _render_json(error_doc))
        return 3
    if config.format == "csv":
        _emit(config, _render_csv(config, results))
    else:
        document = {
            "config": _config_echo(config),
            "results": results,
            "pass": passed,
        }
        _emit(config, _render_json(document))
    return 0 if passed else 1


def main(argv: list[str] | None = None) -> int:
    try:
        config = parse_config(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
