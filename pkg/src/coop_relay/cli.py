"""Command-line front end: experiment orchestration and result files.

Subcommands::

    coop-relay-prd sim        --config FILE   one Monte Carlo PRD estimate
    coop-relay-prd analytic   --config FILE   closed-form surrogate stack
    coop-relay-prd optimize   --config FILE   both maximizers over (R, p)
    coop-relay-prd sweep      --config FILE --axis p|alpha|M --values ...
    coop-relay-prd contention --config FILE   contention-scheme statistics

Every run writes ``<subcommand>.csv`` plus ``<subcommand>.manifest.json``
into ``--out`` (default: current directory). The manifest embeds the full
resolved configuration and a git-style blob hash of the CSV, and can be
passed back as ``--config`` to reproduce the run byte for byte.

PRD-type CSVs share one fixed schema::

    experiment,mode,M,lambda,p,alpha,R,d_prev,d_cur,prd,prd_stderr,trials,seed

with numbers printed to 9 significant digits. The ``contention`` command
writes its own schema (see ``CONTENTION_HEADER``). Exit codes: 0 success,
2 configuration error, 3 module/runtime error. ``COOP_RELAY_THREADS``
caps worker processes.
"""

import argparse
import hashlib
import json
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import seeds
from .analytic import AREA_NUMERIC, dm_tilde
from .config import SimConfig, config_to_mapping, parse_config
from .errors import ConfigError, CoopRelayError
from .optimizer import maximize_analytic, maximize_mc, sweep
from .protocol import contention_winner, estimate_prd

CSV_HEADER = "experiment,mode,M,lambda,p,alpha,R,d_prev,d_cur,prd,prd_stderr,trials,seed"
CONTENTION_HEADER = "experiment,instances,P,d_max,agreement_rate,tie_rate,seed"


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    return f"{value:.9g}"


def write_csv(path: str, header: str, rows: List[Dict[str, object]]) -> bytes:
    cols = header.split(",")
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in cols))
    data = ("\n".join(lines) + "\n").encode()
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def git_blob_hash(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\x00" % len(data) + data).hexdigest()


def write_manifest(path: str, command: str, cfg: SimConfig, csv_name: str, csv_bytes: bytes, extra=None):
    manifest = {
        "command": command,
        "config": config_to_mapping(cfg),
        "seed": cfg.seed,
        "csv": csv_name,
        "content_hash": git_blob_hash(csv_bytes),
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _estimate_row(experiment: str, est) -> Dict[str, object]:
    return {
        "experiment": experiment,
        "mode": est.mode,
        "M": est.M,
        "lambda": est.lam,
        "p": est.p,
        "alpha": est.alpha,
        "R": est.R,
        "d_prev": est.d_prev,
        "d_cur": est.d_cur,
        "prd": est.prd,
        "prd_stderr": est.prd_stderr,
        "trials": est.valid_trials,
        "seed": est.seed,
    }


def _cmd_sim(cfg: SimConfig, args) -> List[Dict[str, object]]:
    return [_estimate_row("sim", estimate_prd(cfg))]


def _cmd_analytic(cfg: SimConfig, args) -> List[Dict[str, object]]:
    res = dm_tilde(cfg.analytic_params(), cfg.M, cfg.mode, area_source=cfg.area_source)
    return [
        {
            "experiment": "analytic",
            "mode": cfg.mode,
            "M": cfg.M,
            "lambda": cfg.lam,
            "p": cfg.p,
            "alpha": cfg.alpha,
            "R": cfg.R,
            "d_prev": res.d_prev,
            "d_cur": res.d_cur,
            "prd": res.prd,
            "prd_stderr": 0.0,
            "trials": 0,
            "seed": cfg.seed,
        }
    ]


def _cmd_optimize(cfg: SimConfig, args) -> List[Dict[str, object]]:
    ana = maximize_analytic(cfg.lam, cfg.alpha, cfg.M, cfg.mode, area_source=cfg.area_source)
    mc = maximize_mc(
        cfg.lam, cfg.alpha, cfg.M, cfg.mode,
        budget=cfg.budget, seed=cfg.seed, workers=cfg.workers,
        config_kwargs={
            "margin_cells": cfg.margin_cells,
            "cand_radius_cells": cfg.cand_radius_cells,
            "trials": cfg.trials,
        },
    )
    ana_row = {
        "experiment": "optimize_analytic",
        "mode": cfg.mode,
        "M": cfg.M,
        "lambda": cfg.lam,
        "p": ana.p,
        "alpha": cfg.alpha,
        "R": ana.R,
        "d_prev": 0.0,
        "d_cur": 0.0,
        "prd": ana.value,
        "prd_stderr": 0.0,
        "trials": 0,
        "seed": cfg.seed,
    }
    mc_row = _estimate_row("optimize_mc", mc.diagnostics["final_estimate"])
    return [ana_row, mc_row]


def _cmd_sweep(cfg: SimConfig, args) -> List[Dict[str, object]]:
    if not args.axis:
        raise ConfigError("axis", "sweep requires --axis p|alpha|M")
    if not args.values:
        raise ConfigError("values", "sweep requires --values v1,v2,...")
    values = [float(v) for v in args.values.split(",") if v.strip()]
    modes = args.mode.split(",") if args.mode else [cfg.mode]
    optimize = None if args.axis == "p" else (args.optimize or "mc")
    if optimize == "none":
        optimize = None
    return sweep(args.axis, values, cfg, modes=modes, optimize=optimize, budget=cfg.budget)


def _cmd_contention(cfg: SimConfig, args) -> List[Dict[str, object]]:
    rng = seeds.substream(cfg.seed, seeds.SELECT)
    agree = 0
    ties = 0
    n = cfg.trials
    levels = 2 ** cfg.contention_bits - 1
    for _ in range(n):
        k = int(rng.integers(1, 13))
        prog = rng.random(k) * cfg.contention_d_max
        entries = list(zip(range(k), prog))
        winner = contention_winner(entries, cfg.contention_bits, cfg.contention_d_max, rng)
        codes = np.floor(prog / cfg.contention_d_max * levels).astype(int)
        top = codes.max()
        if np.count_nonzero(codes == top) > 1:
            ties += 1
        if codes[winner] == top:
            agree += 1
    return [
        {
            "experiment": "contention",
            "instances": n,
            "P": cfg.contention_bits,
            "d_max": cfg.contention_d_max,
            "agreement_rate": agree / n,
            "tie_rate": ties / n,
            "seed": cfg.seed,
        }
    ]


_COMMANDS = {
    "sim": (_cmd_sim, CSV_HEADER),
    "analytic": (_cmd_analytic, CSV_HEADER),
    "optimize": (_cmd_optimize, CSV_HEADER),
    "sweep": (_cmd_sweep, CSV_HEADER),
    "contention": (_cmd_contention, CONTENTION_HEADER),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coop-relay-prd",
        description="Progress rate density of cooperative multihop relaying in a Poisson network",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key=value config file or a previous run manifest")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        sp.add_argument("--mode", help="NC|IRC|RC (comma list allowed for sweep)")
        sp.add_argument("--M", type=int, dest="M")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
        if name == "sweep":
            sp.add_argument("--axis", choices=["p", "alpha", "M"])
            sp.add_argument("--values", help="comma-separated sweep values")
            sp.add_argument("--optimize", choices=["mc", "analytic", "none"])
    return parser


def _collect_overrides(args) -> Dict[str, str]:
    overrides: Dict[str, str] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError("set", f"expected KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        overrides[key.strip()] = val
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.trials is not None:
        overrides["trials"] = str(args.trials)
    if args.M is not None:
        overrides["M"] = str(args.M)
    # sweep interprets a comma list in --mode itself
    if args.mode and not (args.command == "sweep" and "," in args.mode):
        overrides["mode"] = args.mode
    return overrides


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, _collect_overrides(args))
        handler, header = _COMMANDS[args.command]
        rows = handler(cfg, args)
        os.makedirs(args.out, exist_ok=True)
        csv_name = f"{args.command}.csv"
        csv_path = os.path.join(args.out, csv_name)
        data = write_csv(csv_path, header, rows)
        write_manifest(
            os.path.join(args.out, f"{args.command}.manifest.json"),
            args.command, cfg, csv_name, data,
        )
        print(f"wrote {csv_path} ({len(rows)} row{'s' if len(rows) != 1 else ''})")
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except CoopRelayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
