"""Command-line interface: ``vdsim <command> ...``.

Exit codes: 0 success, 2 user error (bad config, missing file, malformed
input), 3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .agents import Side
from .engine import OffenseClass, StrikeSheet, replay_strike_sheet
from .errors import InvariantViolation, VdsimError
from .experiment import (
    PRESETS, ExperimentConfig, balance_table, dataset_to_csv, estimate, load_preset, read_dataset,
    run_experiment,
)
from .oracle import gamma_limit_oracle
from .stats import SPECS

log = logging.getLogger("vdsim")

EXIT_OK, EXIT_USER, EXIT_INVARIANT = 0, 2, 3


class UserError(Exception):
    pass


def _load_config(ref, seed_override=None) -> ExperimentConfig:
    """``ref`` is a JSON path or the name of a shipped preset."""
    if ref is None:
        raise UserError("a config is required (-c PATH or preset name)")
    if not os.path.exists(ref) and ref in PRESETS:
        config = load_preset(ref)
    else:
        config = ExperimentConfig.from_json(ref)
    if seed_override is not None:
        config = config.with_(master_seed=seed_override)
    return config


def _write_manifest(config, outputs, started, out_path):
    manifest = {
        "config_hash": config.config_hash(),
        "master_seed": config.master_seed,
        "tool_version": __version__,
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "outputs": [str(p) for p in outputs],
    }
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def cmd_simulate(args):
    started = _now()
    config = _load_config(args.config, args.seed_override)
    if args.n_cases is not None:
        config = config.with_(n_cases=args.n_cases)
    log.info("simulating %d cases (config %s)", config.n_cases, config.config_hash()[:12])
    df = run_experiment(config, workers=args.workers, oracle=args.oracle)
    comment = f"config_hash={config.config_hash()}"
    if args.out:
        dataset_to_csv(df, args.out, comment)
        manifest = _write_manifest(config, [args.out], started, args.out)
        print(f"wrote {len(df)} cases to {args.out} (manifest {manifest})")
    else:
        sys.stdout.write(dataset_to_csv(df, None, comment))
    return EXIT_OK


def _dataset_hash(path):
    with open(path) as fh:
        first = fh.readline().strip()
    return first[2:] if first.startswith("# ") else "config_hash=unknown"


def cmd_estimate(args, spec_name=None):
    spec_name = spec_name or args.spec
    df = read_dataset(args.dataset)
    spec = SPECS[spec_name](args.side)
    fit = estimate(df, spec)
    print(fit.summary(title=spec.name))
    if args.out:
        fit.to_csv(args.out, _dataset_hash(args.dataset))
    return EXIT_OK


def cmd_placebo(args):
    return cmd_estimate(args, "placebo")


def cmd_balance(args):
    df = read_dataset(args.dataset)
    table = balance_table(df, args.side)
    with_width = table[["mean_n", "mean_n1", "mean_n2", "diff", "t", "pvalue"]]
    print(with_width.to_string(float_format=lambda x: f"{x:.4f}"))
    for cov in table.index[~table["testable"].astype(bool)]:
        print(f"note: {cov} is untestable (group too small or zero variance)")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(f"# {_dataset_hash(args.dataset)}\n")
            table.to_csv(fh, float_format="%.10g", lineterminator="\n")
    return EXIT_OK


def cmd_replay(args):
    sheet = StrikeSheet.from_csv(args.sheet)
    result = replay_strike_sheet(sheet)
    print(result.summary(OffenseClass(args.offense).strike_limit))
    return EXIT_OK


def cmd_oracle_gamma(args):
    config = _load_config(args.config, args.seed_override)
    res = gamma_limit_oracle(config, args.n_oracle, args.side)
    print(f"gamma_limit[{args.side}] = {res.gamma:.6f} (se {res.se:.6f}; "
          f"n-group {res.count_n}, n-1 group {res.count_n1}, draws {res.n_oracle})")
    return EXIT_OK


def _side(value):
    try:
        return Side.parse(value).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(value):
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="vdsim", description="Voir dire strike simulator and exhaustion harness.")
    p.add_argument("--version", action="version", version=f"vdsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a case-level dataset")
    s.add_argument("-c", "--config", required=True, help="config JSON path or preset name")
    s.add_argument("-o", "--out", help="output CSV (stdout if omitted)")
    s.add_argument("--workers", type=_positive, default=1)
    s.add_argument("--oracle", action="store_true", help="include the fact_index column")
    s.add_argument("--seed-override", type=int)
    s.add_argument("--n-cases", type=int, help="override n_cases")
    s.set_defaults(func=cmd_simulate)

    for name, func, help_ in (("estimate", cmd_estimate, "fit a regression specification"),
                              ("placebo", cmd_placebo, "fit the placebo specification")):
        e = sub.add_parser(name, help=help_)
        e.add_argument("dataset")
        if name == "estimate":
            e.add_argument("--spec", choices=sorted(SPECS), default="primary")
        e.add_argument("--side", type=_side, default="defense")
        e.add_argument("-o", "--out", help="write the fit table as CSV")
        e.set_defaults(func=func)

    b = sub.add_parser("balance", help="covariate balance across strike groups")
    b.add_argument("dataset")
    b.add_argument("--side", type=_side, default="defense")
    b.add_argument("-o", "--out")
    b.set_defaults(func=cmd_balance)

    r = sub.add_parser("replay", help="replay a strike sheet")
    r.add_argument("sheet")
    r.add_argument("--offense", choices=[o.value for o in OffenseClass], default="felony")
    r.set_defaults(func=cmd_replay)

    o = sub.add_parser("oracle-gamma", help="limit of the exhaustion contrast by brute-force conditioning")
    o.add_argument("-c", "--config", required=True)
    o.add_argument("--side", type=_side, default="defense")
    o.add_argument("--n-oracle", type=_positive, default=1_000_000)
    o.add_argument("--seed-override", type=int)
    o.set_defaults(func=cmd_oracle_gamma)
    return p


def main(argv=None):
    logging.basicConfig(level=os.environ.get("VDSIM_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"vdsim: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (VdsimError, UserError, OSError, ValueError) as exc:
        print(f"vdsim: error: {exc}", file=sys.stderr)
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
