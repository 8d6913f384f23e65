"""Command-line entry point.

Subcommands: ``simulate`` runs a sweep and writes ccdf.csv / prr.csv /
run_meta.json; ``validate`` compares analytical tail slopes against a
completed simulate output; ``analytic`` and ``oracle`` emit tail curves from
the closed-form model and its Monte Carlo counterpart. Exit codes: 0 ok,
2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import runio, tail_model

SEED_ENV_VAR = "CV2XSIM_SEED"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to the JSON config file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help=f"seed override (also via ${SEED_ENV_VAR})")
    parser.add_argument("--replications", type=int, default=None,
                        help="replication count override")
    parser.add_argument("--desk-scale", action="store_true",
                        help="apply the config's desk_scale overrides")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel replication workers (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cv2xsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "validate", "analytic", "oracle"):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "validate":
            p.add_argument("--sim-dir", default=None,
                           help="directory with simulate outputs (default: --out)")
        if name == "oracle":
            p.add_argument("--trials", type=int, default=None,
                           help="Monte Carlo trials override")
    return parser


def _resolve(args) -> dict:
    seed = args.seed
    if seed is None and os.environ.get(SEED_ENV_VAR):
        seed = int(os.environ[SEED_ENV_VAR])
    raw = runio.load_config(args.config)
    return runio.resolve_config(
        raw,
        desk_scale=args.desk_scale,
        seed_override=seed,
        replications_override=args.replications,
    )


def _cmd_simulate(args) -> int:
    cfg = _resolve(args)
    out_dir = Path(args.out)
    results = runio.run_sweep(cfg, jobs=max(1, args.jobs), log=_log)
    runio.write_outputs(results, cfg, out_dir)
    _log(f"wrote {out_dir / 'ccdf.csv'}, {out_dir / 'prr.csv'}, {out_dir / 'run_meta.json'}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = _resolve(args)
    out_dir = Path(args.out)
    sim_dir = Path(args.sim_dir) if args.sim_dir else out_dir
    rows = runio.run_validation(cfg, sim_dir, out_dir)
    for row in rows:
        _log(
            f"density={row[0]:g} bw={row[1]} oneshot={row[2]} mode={row[4]}: "
            f"slope_analytic={row[7]:.4f} slope_sim={row[8]:.4f} gap={row[9]:.3f}"
        )
    _log(f"wrote {out_dir / 'validation.csv'}")
    return EXIT_OK


def _cmd_analytic(args) -> int:
    cfg = _resolve(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_hash = runio.config_hash(cfg)
    for label, model in runio.model_specs(cfg):
        curve = tail_model.tail(model)
        path = out_dir / f"tail_{label}.csv"
        runio.write_tail_csv(path, curve, cfg_hash)
        _log(f"wrote {path}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    cfg = _resolve(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_hash = runio.config_hash(cfg)
    trials = args.trials or int(cfg.get("oracle", {}).get("trials", 10**6))
    seed = int(cfg["scenario"]["seed"]) if "scenario" in cfg else 0
    for i, (label, model) in enumerate(runio.model_specs(cfg)):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        curve = tail_model.oracle_tail(model, trials, rng)
        path = out_dir / f"oracle_{label}.csv"
        runio.write_tail_csv(path, curve, cfg_hash)
        _log(f"wrote {path}")
    return EXIT_OK


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


_COMMANDS = {
    "simulate": _cmd_simulate,
    "validate": _cmd_validate,
    "analytic": _cmd_analytic,
    "oracle": _cmd_oracle,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except runio.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
