"""Command-line entry point: ``cdbin <subcommand> ...``.

Exit codes: 0 success, 1 usage error (help goes to stderr), 2 runtime failure.
Every flag can also come from a JSON config file (``--config`` or the
CDBIN_CONFIG environment variable); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

CONFIG_ENV = "CDBIN_CONFIG"
THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
# Config keys holding nested training options rather than flags.
NESTED_KEYS = ("model", "weights")


class UsageError(Exception):
    def __init__(self, message, parser=None):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self)


def _common(p: argparse.ArgumentParser, seed=True):
    g = p.add_argument_group("common options")
    if seed:
        g.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    g.add_argument("--threads", type=int, default=None,
                   help="cap on worker/BLAS threads; applied before numerical libraries load")
    g.add_argument("--config", default=None,
                   help=f"JSON config mirroring the flags (default: ${CONFIG_ENV}); flags override it")


def _train_flags(p):
    p.add_argument("--epochs", type=int, default=1, help="passes over the training split (default 1)")
    p.add_argument("--batch-size", type=int, default=4, help="tiles per batch (default 4)")
    p.add_argument("--lr", type=float, default=2e-4, help="Adam learning rate (default 2e-4)")
    p.add_argument("--beta1", type=float, default=0.5, help="Adam beta1 (default 0.5)")
    p.add_argument("--beta2", type=float, default=0.999, help="Adam beta2 (default 0.999)")
    p.add_argument("--max-steps", type=int, default=None, help="stop after this many steps")
    p.add_argument("--focal-alpha", type=float, default=0.25, help="focal loss alpha (default 0.25)")
    p.add_argument("--focal-gamma", type=float, default=2.0, help="focal loss gamma (default 2)")
    p.add_argument("--disc-lr", type=float, default=None,
                   help="discriminator learning rate (default: same as --lr)")
    p.add_argument("--mu", type=float, default=None, help="adversarial weight mu (default 0.5)")
    p.add_argument("--sigma", type=float, default=None, help="local-over-global weight sigma (default 5)")
    p.add_argument("--lam", type=float, default=None, help="focal-loss weight lambda (default 75)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cdbin", description="JPEG compressed-domain document binarization.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("encode", help="encode a PGM/PPM image as baseline JFIF")
    p.add_argument("input", help="input raster (PGM/PPM; other Pillow formats accepted)")
    p.add_argument("--out", default=None, help="output .jpg path (required)")
    p.add_argument("--quality", type=int, default=50, help="IJG quality 1-100 (default 50)")
    p.add_argument("--restart-interval", type=int, default=0, help="MCUs between restart markers (0 = none)")
    _common(p, seed=False)

    p = sub.add_parser("decode", help="fully decode a baseline JFIF file to PGM/PPM")
    p.add_argument("input", help="input .jpg")
    p.add_argument("--out", default=None, help="output .pgm (gray) or .ppm (color) path (required)")
    _common(p, seed=False)

    p = sub.add_parser("coeffs", help="partial decode: dump quantized DCT coefficients")
    p.add_argument("input", help="input .jpg")
    p.add_argument("--out", default=None, help="output text dump path (required)")
    _common(p, seed=False)

    p = sub.add_parser("prepare", help="build a tiled, split dataset with a manifest")
    p.add_argument("--docs", default=None, help="directory of document rasters")
    p.add_argument("--gt", default=None, help="directory of ground-truth rasters matched by file name")
    p.add_argument("--synthetic", type=int, default=None,
                   help="instead of --docs/--gt, generate this many synthetic documents")
    p.add_argument("--size", type=int, nargs=2, default=(512, 512), metavar=("H", "W"),
                   help="synthetic document height and width (default 512 512)")
    p.add_argument("--out", default=None, help="dataset directory (manifest.json plus tile store) (required)")
    p.add_argument("--quality", type=int, default=50, help="JPEG quality of document tiles (default 50)")
    p.add_argument("--train-fraction", type=float, default=0.8, help="share of documents used for training")
    p.add_argument("--border", type=int, default=128, help="black border width in pixels (default 128)")
    _common(p)

    p = sub.add_parser("train", help="train the dual-discriminator GAN on a prepared dataset")
    p.add_argument("--manifest", default=None, help="dataset manifest (file or its directory) (required)")
    p.add_argument("--out", default=None, help="output directory for checkpoint and logs (required)")
    p.add_argument("--split", default="train", help="split to train on (default train)")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    _train_flags(p)
    _common(p)

    p = sub.add_parser("binarize", help="binarize a JFIF document in the compressed domain")
    p.add_argument("input", help="input .jpg")
    p.add_argument("--ckpt", default=None, help="trained checkpoint (required)")
    p.add_argument("--out", default=None, help="output binary .pgm (required)")
    p.add_argument("--reencode", default=None, help="also write the binary result as JFIF here")
    p.add_argument("--quality", type=int, default=50, help="quality for --reencode (default 50)")
    p.add_argument("--border", type=int, default=128, help="black border width in pixels (default 128)")
    _common(p, seed=False)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset split")
    p.add_argument("--manifest", default=None, help="dataset manifest (file or its directory) (required)")
    p.add_argument("--ckpt", default=None, help="trained checkpoint (required)")
    p.add_argument("--out", default=None, help="output directory for reports (required)")
    p.add_argument("--split", default="test", help="split to evaluate (default test)")
    _common(p)

    p = sub.add_parser("bench", help="time compressed-input against pixel-input training")
    p.add_argument("--manifest", default=None, help="dataset manifest (file or its directory) (required)")
    p.add_argument("--out", default=None, help="output directory for reports (required)")
    p.add_argument("--split", default="train", help="split whose tiles are used (default train)")
    p.add_argument("--sizes", type=int, nargs="+", default=None,
                   help="corpus sizes in tiles to time (default: the whole split)")
    _train_flags(p)
    _common(p)
    return parser


# -- configuration ------------------------------------------------------------

def _load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return data


REQUIRED = {
    "encode": ("out",), "decode": ("out",), "coeffs": ("out",), "prepare": ("out",),
    "train": ("manifest", "out"), "binarize": ("ckpt", "out"), "eval": ("manifest", "ckpt", "out"),
    "bench": ("manifest", "out"),
}


def parse(argv):
    """Parse ``argv`` with config-file values as defaults; returns (args, nested config)."""
    parser = build_parser()
    argv = list(argv)
    commands = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if not a.startswith("-")), None)
    nested = {}
    if command in commands:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config", default=None)
        config_path = pre.parse_known_args(argv)[0].config or os.environ.get(CONFIG_ENV)
        if config_path:
            nested = _apply_config(_load_config(config_path), commands, command)
    args = parser.parse_args(argv)
    if not args.command:
        raise UsageError("a subcommand is required", parser)
    missing = [f"--{d.replace('_', '-')}" for d in REQUIRED[args.command] if getattr(args, d) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}", commands[args.command])
    return args, nested


def _apply_config(data: dict, commands, command) -> dict:
    """Install config values as the subcommand's defaults; returns the nested training options."""
    sp = commands[command]
    dests = {name: {a.dest for a in c._actions} - {"help"} for name, c in commands.items()}
    anywhere = set().union(*dests.values())
    values, nested = {}, {}
    for k, v in data.items():
        key = k.replace("-", "_")
        if k in commands:
            if not isinstance(v, dict):
                raise UsageError(f"config section {k!r} must be an object", sp)
        elif k in NESTED_KEYS:
            nested[k] = v
        elif key in anywhere:
            values[key] = v
        else:
            raise UsageError(f"unknown config key {k!r}", sp)
    for k, v in data.get(command, {}).items():
        key = k.replace("-", "_")
        if k in NESTED_KEYS:
            nested[k] = v
        elif key in dests[command]:
            values[key] = v
        else:
            raise UsageError(f"unknown config key {k!r} for {command}", sp)
    sp.set_defaults(**{k: v for k, v in values.items() if k in dests[command]})
    return nested


def _train_config(args, nested):
    from .ddgan.config import TrainConfig

    base = {
        "epochs": args.epochs, "batch_size": args.batch_size, "seed": args.seed, "lr": args.lr,
        "beta1": args.beta1, "beta2": args.beta2, "max_steps": args.max_steps,
        "focal_alpha": args.focal_alpha, "focal_gamma": args.focal_gamma, "disc_lr": args.disc_lr,
    }
    base.update({k: dict(v) for k, v in nested.items()})
    weights = {k: getattr(args, k) for k in ("mu", "sigma", "lam") if getattr(args, k) is not None}
    if weights:
        base["weights"] = {**base.get("weights", {}), **weights}
    return TrainConfig.from_dict(base)


def _echo_config(out: Path, args, nested, extra=None):
    out.mkdir(parents=True, exist_ok=True)
    effective = {k: v for k, v in vars(args).items() if k not in ("config",)}
    effective.update(nested)
    if extra:
        effective.update(extra)
    (out / "config.json").write_text(json.dumps(effective, indent=2, sort_keys=True, default=list) + "\n")


# -- commands -------------------------------------------------------------------

def cmd_encode(args, nested):
    import numpy as np
    from PIL import Image

    from .codec import PixelImage, encode_any_size

    with Image.open(args.input) as im:
        color = im.mode in ("RGB", "RGBA", "P", "CMYK", "YCbCr", "LAB", "HSV")
        arr = np.asarray(im.convert("RGB" if color else "L"))
    data = encode_any_size(PixelImage(arr), args.quality, restart_interval=args.restart_interval)
    Path(args.out).write_bytes(data)
    print(f"{args.out}: {arr.shape[1]}x{arr.shape[0]}, {len(data)} bytes")


def cmd_decode(args, nested):
    from PIL import Image

    from .codec import decode_image

    img = decode_image(Path(args.input).read_bytes())
    mode = "L" if img.components == 1 else "RGB"
    arr = img.samples[:, :, 0] if mode == "L" else img.samples
    Image.fromarray(arr, mode).save(args.out, format="PPM")
    print(f"{args.out}: {img.width}x{img.height}")


def cmd_coeffs(args, nested):
    from .codec import format_dump, partial_decode

    jc = partial_decode(Path(args.input).read_bytes())
    Path(args.out).write_text(format_dump(jc))
    print(f"{args.out}: {len(jc.components)} component(s)")


def cmd_prepare(args, nested):
    from .data.manifest import prepare_dataset
    from .data.pipeline import write_pgm
    from .data.synthetic import synthetic_document

    out = Path(args.out)
    if args.synthetic is not None:
        if args.docs or args.gt:
            raise UsageError("--synthetic excludes --docs/--gt")
        if args.synthetic < 1:
            raise UsageError("--synthetic needs a positive document count")
        src = out / "source"
        (src / "docs").mkdir(parents=True, exist_ok=True)
        (src / "gt").mkdir(parents=True, exist_ok=True)
        h, w = args.size
        for i in range(args.synthetic):
            doc, gt = synthetic_document(h, w, seed=args.seed * 1000 + i)
            write_pgm(src / "docs" / f"doc{i:03d}.pgm", doc)
            write_pgm(src / "gt" / f"doc{i:03d}.pgm", gt)
        docs, gts = src / "docs", src / "gt"
    else:
        if not args.docs or not args.gt:
            raise UsageError("prepare needs --docs and --gt (or --synthetic N)")
        docs, gts = Path(args.docs), Path(args.gt)
    m = prepare_dataset(docs, gts, out, args.quality, args.train_fraction, args.seed, args.border)
    _echo_config(out, args, nested)
    counts = {s: len(m.split_ids(s)) for s in ("train", "test")}
    print(f"{out / 'manifest.json'}: {len(m.documents)} documents ({counts['train']} train, "
          f"{counts['test']} test), {len(m.tiles)} tiles")


def _load_split(manifest_path, split, domain):
    import numpy as np

    from .data.manifest import load_manifest, load_tiles
    from .ddgan.model import stream_to_input

    m = load_manifest(manifest_path)
    samples = load_tiles(m, manifest_path, split)
    if not samples:
        raise RuntimeError(f"split {split!r} of {manifest_path} has no tiles")
    x = np.stack([stream_to_input(s.stream, domain) for s in samples])
    y = np.stack([(s.ground_truth / 255.0)[None] for s in samples])
    return m, samples, x, y


def cmd_train(args, nested):
    from .ddgan.model import DdganModel, train, write_jsonl

    cfg = _train_config(args, nested)
    m, _, x, y = _load_split(args.manifest, args.split, cfg.model.input_domain)
    if m.quality != cfg.quality:
        cfg = type(cfg).from_dict({**cfg.to_dict(), "quality": m.quality})
    out = Path(args.out)
    _echo_config(out, args, nested, {"train_config": cfg.to_dict()})
    if args.resume:
        model = DdganModel.load(args.resume)
        if model.config.model != cfg.model:
            raise RuntimeError("checkpoint architecture differs from the requested configuration")
        model.config = cfg
    else:
        model = DdganModel(cfg)
    with open(out / "metrics.jsonl", "w") as log, open(out / "timing.jsonl", "w") as timing:
        history = train(model, x, y, log=write_jsonl(log), timing=write_jsonl(timing))
    ckpt = out / "checkpoint.ckpt"
    model.save(ckpt)
    last = history[-1] if history else {}
    print(f"{ckpt}: {model.step} steps, last l_gen {last.get('l_gen', float('nan')):.6f}")


def cmd_binarize(args, nested):
    from .codec import encode_any_size
    from .data.pipeline import write_pgm
    from .ddgan.infer import binarize
    from .ddgan.model import DdganModel

    model = DdganModel.load(args.ckpt)
    img = binarize(Path(args.input).read_bytes(), model, pad=args.border)
    write_pgm(args.out, img.gray())
    if args.reencode:
        Path(args.reencode).write_bytes(encode_any_size(img, args.quality))
    print(f"{args.out}: {img.width}x{img.height}")


def cmd_eval(args, nested):
    from .data.manifest import load_manifest
    from .ddgan.model import DdganModel
    from .evaluation.harness import evaluate_corpus, model_predictor
    from .evaluation.report import metric_table, plot_psnr, write_jsonl

    m = load_manifest(args.manifest)
    model = DdganModel.load(args.ckpt)
    report = evaluate_corpus(m, args.manifest, model_predictor(model, m), args.split)
    out = Path(args.out)
    _echo_config(out, args, nested)
    write_jsonl(out / "metrics.jsonl", report.records())
    table = metric_table(report)
    (out / "metrics.txt").write_text(table)
    plot_psnr(out / "psnr.png", report)
    print(table, end="")


def cmd_bench(args, nested):
    import numpy as np

    from .data.manifest import load_manifest, load_tiles
    from .evaluation.harness import benchmark
    from .evaluation.report import benchmark_table, plot_time_vs_size, write_jsonl, write_time_vs_size

    cfg = _train_config(args, nested)
    m = load_manifest(args.manifest)
    samples = load_tiles(m, args.manifest, args.split)
    if not samples:
        raise RuntimeError(f"split {args.split!r} has no tiles")
    report = benchmark([s.stream for s in samples], np.stack([s.ground_truth for s in samples]), cfg,
                       cfg.epochs, args.sizes)
    out = Path(args.out)
    _echo_config(out, args, nested, {"train_config": cfg.to_dict()})
    write_jsonl(out / "bench.jsonl", report.records())
    write_time_vs_size(out, report)
    plot_time_vs_size(out / "time_vs_size.png", report)
    table = benchmark_table(report)
    (out / "bench.txt").write_text(table)
    print(table, end="")


COMMANDS = {
    "encode": cmd_encode, "decode": cmd_decode, "coeffs": cmd_coeffs, "prepare": cmd_prepare,
    "train": cmd_train, "binarize": cmd_binarize, "eval": cmd_eval, "bench": cmd_bench,
}


def _apply_threads(n):
    if n is None:
        return
    if n < 1:
        raise UsageError("--threads must be positive")
    for var in THREAD_ENV_VARS:
        os.environ[var] = str(n)


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args, nested = parse(argv)
        _apply_threads(args.threads)
        COMMANDS[args.command](args, nested)
    except UsageError as e:
        parser = e.parser or build_parser()
        parser.print_help(sys.stderr)
        print(f"\nerror: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return 0 if e.code in (0, None) else 1
    except Exception as e:  # noqa: BLE001 - every runtime failure maps to exit code 2
        print(f"cdbin: error: {e}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
