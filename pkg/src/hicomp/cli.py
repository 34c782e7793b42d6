"""Command-line entry point: batch pipelines over a JSON configuration.

Exit codes: 0 success, 1 validation failure (bad config/input), 2 runtime
failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .analysis import diagnostics, write_diagnostics_csv
from .cns import cns_solve_to, well_prepared_init, write_cns_snapshot
from .config import StudyConfig, build_initial_datum, config_hash, load_config, parse_config
from .grid import _fmt
from .pme import PmeState, pme_solve_to, write_pme_snapshot
from .study import run_certificates, run_rate_study, smoothing_decay_study, support_growth_study
from .validate import run_validation

COMMANDS = ("simulate", "pme", "rate-study", "support-study", "certify", "validate")

USAGE = """usage: hicomp COMMAND [--config PATH] [--output DIR] [--jobs N] [--verbose]

commands:
  simulate       one flow run (first eps value); snapshots + diagnostics CSV
  pme            limit-equation run; snapshot CSVs
  rate-study     eps sweep with slope fits; JSON + CSV tables
  support-study  interface growth and peak decay exponents; JSON
  certify        duality certificates over the eps sweep; JSON
  validate       built-in invariant suite; prints a pass/fail table
"""


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hicomp", add_help=False)
    p.add_argument("--config", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--verbose", action="store_true")
    return p


def dispatch(argv: list[str]) -> int:
    if not argv:
        sys.stderr.write(USAGE)
        return 64
    cmd, rest = argv[0], argv[1:]
    if cmd in ("-h", "--help"):
        sys.stdout.write(USAGE)
        return 0
    if cmd not in COMMANDS:
        sys.stderr.write(f"unknown command: {cmd}\n{USAGE}")
        return 64
    try:
        args = _build_parser().parse_args(rest)
    except SystemExit:
        sys.stderr.write(USAGE)
        return 64

    try:
        config = load_config(args.config) if args.config else parse_config("{}")
        if args.output is not None:
            config = dataclasses.replace(config, output_dir=args.output)
        jobs = args.jobs
        if jobs is None:
            jobs = int(os.environ.get("HICOMP_JOBS", "1"))
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        runner = {
            "simulate": _cmd_simulate,
            "pme": _cmd_pme,
            "rate-study": _cmd_rate_study,
            "support-study": _cmd_support_study,
            "certify": _cmd_certify,
            "validate": _cmd_validate,
        }[cmd]
        return runner(config, out, jobs, args.verbose)
    except ValueError as e:
        sys.stderr.write(f"error: {e}\n")
        return 1
    except Exception as e:  # solver blow-ups, I/O failures
        sys.stderr.write(f"runtime failure: {type(e).__name__}: {e}\n")
        return 2


def _cmd_simulate(config: StudyConfig, out: Path, jobs: int, verbose: bool) -> int:
    if not config.eps_values:
        raise ValueError("simulate needs at least one eps value")
    eps = config.eps_values[0]
    params = config.params(eps)
    chash = config_hash(config)
    rho0 = build_initial_datum(config)
    state = well_prepared_init(rho0, params, config.floor_frac)
    records = []
    state, snaps = cns_solve_to(
        state, params, config.t_end, snapshot_times=config.snapshot_times,
        on_step=lambda s, dt: records.append((diagnostics(s, params), dt)))
    for snap in snaps:
        write_cns_snapshot(snap, params, out / f"cns_t{snap.t:g}.csv",
                           extra_comments=(f"config_hash={chash}",))
    write_diagnostics_csv(records, out / "diagnostics.csv",
                          extra_comments=(f"config_hash={chash}", f"epsilon={_fmt(eps)}"))
    if verbose:
        print(f"simulate: {len(records)} steps to t={state.t:g}, eps={eps:g}")
    return 0


def _cmd_pme(config: StudyConfig, out: Path, jobs: int, verbose: bool) -> int:
    params = config.params(0.0)
    chash = config_hash(config)
    state = PmeState(t=0.0, rho=build_initial_datum(config))
    times = list(config.snapshot_times) or [config.t_end]
    for t_snap in times:
        state = pme_solve_to(state, params, t_snap)
        write_pme_snapshot(state, params, out / f"pme_t{state.t:g}.csv",
                           extra_comments=(f"config_hash={chash}",))
    if verbose:
        print(f"pme: reached t={state.t:g}")
    return 0


def _write_error_table(path: Path, t_snapshots, eps_values, matrix, chash: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# config_hash={chash}\n")
        fh.write("t," + ",".join(f"eps={_fmt(e)}" for e in eps_values) + "\n")
        for t, row in zip(t_snapshots, matrix):
            fh.write(_fmt(t) + "," + ",".join(_fmt(v) for v in row) + "\n")


def _cmd_rate_study(config: StudyConfig, out: Path, jobs: int, verbose: bool) -> int:
    result = run_rate_study(config, jobs=jobs)
    chash = config_hash(config)
    doc = result.to_dict()
    doc["config_hash"] = chash
    with open(out / "rate_study.json", "w") as fh:
        json.dump(doc, fh, indent=2)
    for name, matrix in (("errors_h1", result.errors_h1),
                         ("errors_l2", result.errors_l2),
                         ("mass_outside", result.mass_outside)):
        _write_error_table(out / f"{name}.csv", result.t_snapshots,
                           result.eps_values, matrix, chash)
    if verbose or not result.gate_passed:
        print(f"rate-study: slope_h1={result.slope_h1:.3f} "
              f"slope_l2={result.slope_l2:.3f} slope_mass={result.slope_mass:.3f} "
              f"grid_ratio={result.grid_convergence_ratio:.3g}")
    return 0


def _cmd_support_study(config: StudyConfig, out: Path, jobs: int, verbose: bool) -> int:
    growth, growth_r2 = support_growth_study(config)
    decay, decay_r2 = smoothing_decay_study(config)
    doc = {
        "support_growth_exponent": growth,
        "support_growth_r2": growth_r2,
        "smoothing_decay_exponent": decay,
        "smoothing_decay_r2": decay_r2,
        "expected_growth": 1.0 / (config.alpha + 1.0),
        "expected_decay": -1.0 / (config.alpha + 1.0),
        "config_hash": config_hash(config),
    }
    with open(out / "support_study.json", "w") as fh:
        json.dump(doc, fh, indent=2)
    if verbose:
        print(f"support-study: growth={growth:.4f} decay={decay:.4f}")
    return 0


def _cmd_certify(config: StudyConfig, out: Path, jobs: int, verbose: bool) -> int:
    entries = run_certificates(config)
    with open(out / "certificates.json", "w") as fh:
        json.dump({"config_hash": config_hash(config), "certificates": entries},
                  fh, indent=2)
    if verbose:
        for e in entries:
            print(f"certify: eps={e['epsilon']:g} lhs={e['lhs']:+.3e} "
                  f"bound={e['bound']:.3e} C={e['measured_c']:.3f}")
    return 0


def _cmd_validate(config: StudyConfig, out: Path, jobs: int, verbose: bool) -> int:
    rows = run_validation(seed=config.seed)
    width = max(len(name) for name, _, _ in rows)
    all_ok = True
    for name, ok, detail in rows:
        all_ok &= ok
        print(f"{name:<{width}}  {'pass' if ok else 'FAIL'}  {detail}")
    return 0 if all_ok else 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
