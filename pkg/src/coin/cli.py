"""``coin`` command line: encode, decode, info, archs, bench.

Exit codes: 0 success, 1 usage error, 2 I/O or format error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import zlib
from dataclasses import fields
from pathlib import Path

from . import arch_search, bench
from .decoder import decode_file
from .encoder import EncodeDivergedError, TrainConfig, encode
from .image_plane import ImageError, load_image, save_image
from .siren import Architecture, ContractError
from .storage import CoinFormatError, bpp, quantize, read_coin, write_coin

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("coin")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# Keys accepted in --config files, with their types.
CONFIG_KEYS = {
    "iterations": int, "lr": float, "seed": int, "log_every": int,
    "beta1": float, "beta2": float, "epsilon": float, "workers": int,
}


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; blank lines and ``#`` comments ignored."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{n}: unrecognized config line {line!r}")
        try:
            out[key] = CONFIG_KEYS[key](value.strip())
        except ValueError as exc:
            raise UsageError(f"{path}:{n}: bad value for {key}: {value.strip()!r}") from exc
    return out


def train_config(args) -> TrainConfig:
    """CLI flags override the config file, which overrides the defaults."""
    values = read_config(args.config) if getattr(args, "config", None) else {}
    for f in fields(TrainConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    values.pop("workers", None)
    return TrainConfig(**values)


def workers(args) -> int | None:
    if args.workers is not None:
        return args.workers
    if getattr(args, "config", None):
        return read_config(args.config).get("workers")
    return None


def parse_arch(text: str) -> Architecture:
    try:
        layers, width = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LAYERS,WIDTH, got {text!r}")
    return Architecture(layers, width)


def parse_region(text: str) -> tuple[int, int, int, int]:
    try:
        x, y, w, h = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y,W,H, got {text!r}")
    return x, y, w, h


def _add_train_flags(p):
    p.add_argument("--iters", dest="iterations", type=int, help="Adam iterations (default 50000)")
    p.add_argument("--lr", type=float, help="learning rate (default 2e-4)")
    p.add_argument("--seed", type=int, help="initialization seed (default 0)")
    p.add_argument("--log-every", dest="log_every", type=int, help="PSNR evaluation cadence (default 50)")
    p.add_argument("--config", help="key = value file with training defaults")
    p.add_argument("--workers", type=int, help="parallel workers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coin", description="Image compression with sine-activated MLPs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="compress an image to a .coin file")
    p.add_argument("image")
    rate = p.add_mutually_exclusive_group(required=True)
    rate.add_argument("--bpp", type=float, help="preset label: 0.07, 0.15, 0.3, 0.6 or 1.2")
    rate.add_argument("--arch", type=parse_arch, help="explicit LAYERS,WIDTH")
    rate.add_argument("--search", type=float, metavar="BPP", help="search architectures for this budget")
    p.add_argument("--search-top", type=int, default=4, help="candidates tried by --search")
    p.add_argument("--search-iters", type=int, help="iterations per --search trial")
    p.add_argument("--freq-scale", type=float, default=30.0)
    p.add_argument("--precision", type=int, choices=(16, 32), default=16)
    p.add_argument("-o", "--out", help="output .coin path (default: IMAGE.coin)")
    p.add_argument("--metrics", help="metrics CSV path (default: OUT.metrics.csv)")
    _add_train_flags(p)

    p = sub.add_parser("decode", help="reconstruct an image from a .coin file")
    p.add_argument("coin")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--region", type=parse_region, help="X,Y,W,H in source pixels")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("info", help="print a .coin header")
    p.add_argument("coin")

    p = sub.add_parser("archs", help="list architectures for a bpp budget")
    p.add_argument("bpp", type=float)
    p.add_argument("--dims", default="768,512", help="W,H")
    p.add_argument("--precision", type=int, choices=(16, 32), default=16)
    p.add_argument("--tolerance", type=float, default=0.05)

    p = sub.add_parser("bench", help="rate-distortion benchmark over an image directory")
    p.add_argument("corpus")
    p.add_argument("--bpp", dest="labels", type=float, nargs="+", default=sorted(arch_search.PRESETS))
    p.add_argument("-o", "--out", default="bench.csv")
    _add_train_flags(p)
    return parser


def cmd_encode(args) -> int:
    cfg = train_config(args)
    image = load_image(args.image)
    if args.bpp is not None:
        try:
            arch = arch_search.preset(args.bpp, args.freq_scale)
        except KeyError as exc:
            raise UsageError(str(exc.args[0]))
    elif args.arch is not None:
        arch = Architecture(args.arch.hidden_layers, args.arch.width, args.freq_scale)
    else:
        arch, rows = arch_search.search(
            image, args.search, cfg, top_k=args.search_top,
            search_iterations=args.search_iters, precision_bits=args.precision,
            workers=workers(args) or 1,
        )
        for r in rows:
            print(f"  candidate {r.arch}: {r.best_psnr:.3f} dB")
    out = Path(args.out or Path(args.image).with_suffix(".coin"))
    metrics_path = Path(args.metrics or f"{out}.metrics.csv")

    net, metrics = encode(image, arch, cfg)
    q = quantize(net, args.precision)
    size = write_coin(q, image.dims, out)
    metrics.write_csv(metrics_path)
    final = metrics.trace[-1]
    print(f"arch        {arch}  ({arch.param_count} params)")
    print(f"final psnr  {final.psnr:.3f} dB @ iter {final.iteration}")
    print(f"best psnr   {metrics.best_psnr:.3f} dB @ iter {metrics.best_iteration}")
    print(f"bpp         {bpp(arch, args.precision, *image.dims):.4f}")
    print(f"file        {out} ({size} bytes)")
    return EXIT_OK


def cmd_decode(args) -> int:
    image = decode_file(args.coin, args.scale, args.region, args.workers)
    save_image(image, args.out)
    print(f"wrote {args.out} ({image.width}x{image.height})")
    return EXIT_OK


def cmd_info(args) -> int:
    q, (w, h) = read_coin(args.coin)
    a = q.arch
    print(f"hidden_layers  {a.hidden_layers}")
    print(f"width          {a.width}")
    print(f"freq_scale     {a.freq_scale:g}")
    print(f"precision      {q.precision_bits}")
    print(f"image          {w}x{h}")
    print(f"param_count    {a.param_count}")
    print(f"bpp            {bpp(a, q.precision_bits, w, h):.6f}")
    print(f"crc32          {zlib.crc32(q.payload.tobytes()):08x}")
    return EXIT_OK


def cmd_archs(args) -> int:
    try:
        w, h = (int(v) for v in args.dims.split(","))
    except ValueError:
        raise UsageError(f"--dims expects W,H, got {args.dims!r}")
    archs = arch_search.valid_architectures(args.bpp, (w, h), args.precision, args.tolerance)
    print("hidden_layers,width,param_count,bpp")
    for a in archs:
        print(f"{a.hidden_layers},{a.width},{a.param_count},{bpp(a, args.precision, w, h):.6f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = train_config(args)
    for label in args.labels:
        try:
            arch_search.preset(label)
        except KeyError as exc:
            raise UsageError(str(exc.args[0]))
    rows = bench.run_bench(args.corpus, args.labels, cfg, workers(args))
    bench.write_bench_csv(rows, args.out)
    if not rows:
        print(f"warning: no images in {args.corpus}; wrote header only to {args.out}", file=sys.stderr)
    else:
        print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


COMMANDS = {
    "encode": cmd_encode, "decode": cmd_decode, "info": cmd_info,
    "archs": cmd_archs, "bench": cmd_bench,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ContractError) as exc:
        print(f"coin: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ImageError, CoinFormatError) as exc:
        print(f"coin: {exc}", file=sys.stderr)
        return EXIT_IO
    except (EncodeDivergedError, FloatingPointError) as exc:
        print(f"coin: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
