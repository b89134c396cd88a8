"""Command-line front end: ``geoqkd {channel,keyrate,scan,reproduce}``.

Exit codes: 0 success, 2 config error, 3 numeric error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import RunConfig
from .errors import ModelError, NearFieldWarning, NumericError, ParameterError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run config (defaults apply when omitted)")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
    common.add_argument("--format", choices=("csv", "json", "svg"), default="csv",
                        help="csv: CSV+JSON; json: JSON only for reports; svg: CSV+JSON+SVG")
    p = argparse.ArgumentParser(prog="geoqkd", description="GEO untrusted-node TF/MP-QKD simulator")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("channel", parents=[common], help="build the PDTE of one channel")
    k = sub.add_parser("keyrate", parents=[common], help="optimize the key rate over PDTE files")
    k.add_argument("--pdte", nargs="+", required=True, metavar="CSV", help="one file (both arms) or two")
    s = sub.add_parser("scan", parents=[common], help="channel plus key rate along one axis")
    s.add_argument("--axis", choices=("mu", "lmax", "aperture"), default="mu")
    r = sub.add_parser("reproduce", parents=[common], help="regenerate one figure's data")
    r.add_argument("figure", nargs="?", help="recipe id, e.g. fig6")
    return p


def _load(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig.default()
    if args.seed is not None:
        cfg = cfg.replace("run", seed=args.seed)
    if args.threads < 1:
        raise ParameterError("--threads must be >= 1")
    return cfg


def _print_paths(paths):
    for p in paths:
        print(p)


def _run(args) -> int:
    from . import workflow as wf
    cfg = _load(args)
    out = Path(args.out)
    D = cfg["geometry"]["ogs_diameter_m"]
    if args.command == "channel":
        res = wf.channel_from_config(cfg, args.threads)
        _print_paths(wf.write_channel(cfg, res, out, args.format))
        print(f"channel {D:.2f} mean_db={res.info['pdte_mean_db']:.3f}")
    elif args.command == "keyrate":
        if len(args.pdte) > 2:
            raise ParameterError("--pdte takes one or two files")
        a = wf.load_pdte(args.pdte[0], cfg)
        b = wf.load_pdte(args.pdte[-1], cfg)
        res = wf.keyrate_from_pdte(cfg, a, b, args.threads)
        wf.write_keyrate(cfg, res, out, args.format)
        print(res.summary_line(D))
    elif args.command == "scan":
        proto = cfg["protocol"]["name"]
        if args.axis == "aperture":
            rep = wf.aperture_sweep(cfg, args.threads)
            wf.write_scan(cfg, proto, rep, out / f"scan_{proto}_aperture", args.format, "D_OGS (m)", logx=False)
            for v, p in zip(rep.values, rep.points):
                print(f"{proto} {v:.2f} {p.rate_per_pulse:.4g} {p.mu:.4g}")
            return EXIT_OK
        res = wf.channel_from_config(cfg, args.threads)
        wf.write_channel(cfg, res, out, args.format)
        if args.axis == "lmax":
            if proto != "mp":
                raise ParameterError("--axis lmax needs [protocol] name = mp")
            kr = wf.keyrate_from_pdte(cfg.replace("scan", optimize_lmax=True), res.pdte, res.pdte, args.threads)
            wf.write_scan(cfg, proto, kr.lmax_scan, out / "scan_mp_lmax", args.format, "L_max")
        else:
            kr = wf.keyrate_from_pdte(cfg, res.pdte, res.pdte, args.threads)
            wf.write_keyrate(cfg, kr, out, args.format)
        print(kr.summary_line(D))
    else:
        from .reproduce import RECIPES, run_reproduce
        if args.figure not in RECIPES:
            print(f"unknown figure {args.figure!r}; available: {' '.join(RECIPES)}", file=sys.stderr)
            return EXIT_CONFIG
        _print_paths(run_reproduce(args.figure, cfg, out, args.threads))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except (ParameterError, ModelError, NearFieldWarning) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
