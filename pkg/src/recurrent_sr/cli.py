"""``rts`` command line: run, enhance, metrics, fixedpoint.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

from . import fixed_point
from .config import ConfigError, load_config
from .data import PPMError, read_ppm, to_float, to_u8, write_ppm
from .metrics import image_difference_ratio, mse, psnr, sharpness_proxy
from .net import CheckpointError, load_checkpoint
from .rts import RTSAbort, enhance, run_rts
from .tensor import NonFiniteError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"rts: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    records = run_rts(cfg, record_time=not args.no_timing)
    for r in records:
        print(f"stage {r.stage}: loss {r.loss:.6g}  DR {r.diff_ratio_pct:.4f}%  "
              f"delta {r.delta_pct:.4f}  alpha {r.alpha_hat:.3f}")
    if len(records) >= 3:
        fixed_point.write_theory_csv(records, f"{cfg.out_dir}/theory.csv")
    print(f"reports written to {cfg.out_dir}")
    return EXIT_OK


def cmd_enhance(args) -> int:
    params, meta = load_checkpoint(args.checkpoint)
    img = to_float(read_ppm(args.input))
    out = enhance(params, img, tap=args.tap)
    write_ppm(to_u8(out), args.output)
    print(f"enhanced with stage {meta['stage']} network -> {args.output}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    a = to_float(read_ppm(args.a), dtype="float64")
    b = to_float(read_ppm(args.b), dtype="float64")
    p = psnr(a, b)
    print(f"diff_ratio_pct {image_difference_ratio(a, b):.6f}")
    print(f"mse {mse(a, b):.8g}")
    print("psnr identical" if math.isinf(p) else f"psnr {p:.4f}")
    print(f"sharpness_a {sharpness_proxy(a):.8g}")
    print(f"sharpness_b {sharpness_proxy(b):.8g}")
    return EXIT_OK


def cmd_fixedpoint(args) -> int:
    print("stage,increment,cumulative")
    for k, inc, cum in fixed_point.trajectory(args.alpha, args.n, args.detail):
        print(f"{k},{inc:.10g},{cum:.10g}")
    print(f"limit,,{args.alpha / (1 - args.alpha) * args.detail:.10g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rts", description="Recurrently trained super-resolution enhancement")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run the stage loop from a config file")
    p.add_argument("config")
    p.add_argument("--no-timing", action="store_true", help="write 0 in the seconds column (reproducible reports)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("enhance", help="one-shot d(SR(x)) enhancement of a PPM image")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--tap", choices=("sr", "blue"), default="sr")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("metrics", help="difference ratio, MSE, PSNR and sharpness of two PPM images")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("fixedpoint", help="geometric-series trajectory for a contraction alpha")
    p.add_argument("alpha", type=float)
    p.add_argument("n", type=int)
    p.add_argument("--detail", type=float, default=1.0, help="y - y_bar magnitude")
    p.set_defaults(func=cmd_fixedpoint)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.cmd == "fixedpoint" and (not 0 <= args.alpha < 1 or args.n < 0):
            raise ValueError("fixedpoint needs 0 <= alpha < 1 and n >= 0")
        return args.func(args)
    except (RTSAbort, NonFiniteError) as exc:
        print(f"rts: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as exc:
        print(f"rts: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, PPMError, CheckpointError, ValueError) as exc:
        print(f"rts: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
