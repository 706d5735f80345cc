"""Command line: ``iwkrr-lab {sweep,plot,check}``.

Exit codes: 0 success, 1 invalid configuration or usage, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from .. import bounds as bd
from .. import kernelcore as kc
from .. import synthdata as sd
from ..errors import ConfigurationError, IWKRRError
from .config import PRESETS, SweepConfig, parse_document, validate_config
from .output import emit_csv, emit_errors, emit_plots, read_csv
from .sweep import group_seed, run_sweep


EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _add_config_args(p):
    p.add_argument("config", nargs="?", help="key = value config file (defaults: full protocol)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named preset applied before the file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iwkrr-lab", description="Importance-weighted KRR sweep harness.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sw = sub.add_parser("sweep", help="run a sweep and write CSV + SVG")
    _add_config_args(sw)
    sw.add_argument("--out", help="output directory (default: output_dir from the config)")
    sw.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    sw.add_argument("--seed", type=int, help="override master_seed")
    sw.add_argument("--no-plots", action="store_true", help="skip the SVG panels")
    sw.add_argument("--quiet", action="store_true", help="no progress output")

    pl = sub.add_parser("plot", help="render SVG panels from a sweep CSV")
    pl.add_argument("csv", help="sweep CSV produced by 'sweep'")
    pl.add_argument("--out", help="path prefix for the SVG files (default: <csv dir>/fig)")

    ck = sub.add_parser("check", help="linearization gaps and shift admissibility")
    _add_config_args(ck)
    ck.add_argument("--n", type=int, help="training size (default: the n_list entry closest to d)")
    return parser


def _load(args, extra=None) -> SweepConfig:
    doc = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigurationError(f"cannot read config file {args.config}: {exc}") from exc
        doc = parse_document(text, args.config)
    if args.preset:
        doc["preset"] = args.preset
    doc.update(extra or {})
    return validate_config(doc)


def _cmd_sweep(args) -> int:
    if args.threads < 1:
        raise ConfigurationError(f"--threads must be >= 1, got {args.threads}")
    cfg = _load(args, {"master_seed": args.seed} if args.seed is not None else None)
    out = Path(args.out or cfg.output_dir)

    def progress(done, total, item):
        if not args.quiet:
            print(f"\r[{done}/{total}] a={item.decay_a:g} n={item.n} seed={item.seed_index}",
                  end="" if done < total else "\n", file=sys.stderr, flush=True)

    result = run_sweep(cfg, progress, threads=args.threads)
    emit_errors(result.errors, out / "errors.csv")
    if not result.records:
        print(f"all {len(result.errors)} cells failed; see {out / 'errors.csv'}", file=sys.stderr)
        return EXIT_RUNTIME
    emit_csv(result.records, out / "sweep.csv")
    print(f"wrote {len(result.records)} records to {out / 'sweep.csv'} ({len(result.errors)} error rows)")
    if not args.no_plots and len(cfg.n_list) >= 2:
        paths = emit_plots(result.records, out / "fig")
        print(f"wrote {len(paths)} SVG panels under {out}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    records = read_csv(args.csv)
    prefix = args.out or str(Path(args.csv).parent / "fig")
    paths = emit_plots(records, prefix)
    for p in paths:
        print(p)
    return EXIT_OK


def _cmd_check(args) -> int:
    cfg = _load(args)
    n = args.n if args.n is not None else min(cfg.n_list, key=lambda v: (abs(v - cfg.d), v))
    if n < 1:
        raise ConfigurationError(f"--n must be >= 1, got {n}")
    bc = cfg.bound_constants
    print(f"kernel={cfg.kernel.describe()} d={cfg.d} n={n} n_test={cfg.n_test} m_p={bc.m_p:g} m_q={bc.m_q:g}")
    for i, a in enumerate(cfg.decay_list):
        g = group_seed(cfg.master_seed, i, 0, cfg.seeds)
        ens = sd.gen_dataset(cfg.d, n, cfg.n_test, a, cfg.sigma_eps, sd.mix64(g, n),
                             normalize=cfg.normalize_covariance, cov_seed=g,
                             perturb=cfg.perturb_covariance)
        pair = ens.covariances
        diag = bd.shift_diagnostics(pair.sigma_p, pair.sigma_q, bc.m_p, bc.m_q)
        lin = kc.linearize_params(cfg.kernel, pair.sigma_p, strict=False)
        gap_gram, gap_cross = kc.linearization_gap(cfg.kernel, pair.sigma_p, pair.sigma_q,
                                                   ens.X_train, ens.X_test, form=cfg.cross_form)
        verdict = "admissible" if diag.admissible else "inadmissible"
        print(f"a={a:g} c_pq={diag.c_pq:g} theta_q={diag.theta_q:g} {verdict} "
              f"gamma={lin.gamma:.6g} gamma/beta={kc.implicit_ridge_ratio(lin):.6g} "
              f"gap_gram={gap_gram:.6g} gap_cross={gap_cross:.6g}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    handlers = {"sweep": _cmd_sweep, "plot": _cmd_plot, "check": _cmd_check}
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (IWKRRError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
