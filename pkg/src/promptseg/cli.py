"""
Command-line entry point: ``promptseg {validate,retrieve,predict,sweep}``.

Exit codes: 0 success, 1 validation failure, 2 usage or parse error,
3 runtime failure (including failed sweep cells), 4 connection error,
5 timeout, 6 protocol error, 7 server error.
"""

import argparse
import logging
import os
from pathlib import Path
import sys
import tempfile

import numpy as np
from PIL import Image

from . import errors
from .backends import BackendSpec, binarize, segment
from .dataset import (Dataset, Manifest, cache_key, dataset_digest, load_example, load_examples,
                      load_manifest, manifest_problems)
from .evaluation import compute_distances, emit_report, report_filename, sweep
from .imaging import PreprocessConfig, encode_png
from .patchmatch import AGGREGATIONS, PatchMatchParams
from .prompt import LAYOUT_VERSION, build_prompt
from .similarity import METRICS, DistanceMatrix, SsimParams

log = logging.getLogger("promptseg")

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
_BACKEND_EXIT = [
    (errors.ConnectError, 4),
    (errors.Timeout, 5),
    (errors.ProtocolError, 6),
    (errors.ServerError, 7),
]
_VALIDATION_ERRORS = (errors.ManifestError, errors.UnknownTestId, errors.KTooLarge,
                      errors.EntryLoadError)


class UsageError(Exception):
    pass


def write_atomic(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _threshold(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("threshold must lie in [0, 1]")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="promptseg",
                                     description="Retrieval-prompted few-shot segmentation toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_k=True):
        p.add_argument("--manifest", required=True, help="dataset manifest JSON")
        p.add_argument("--side", type=_positive_int, default=448,
                       help="panel side images are resized to (default 448)")
        p.add_argument("--parallelism", type=_positive_int, default=1)
        p.add_argument("--cache-dir", default=None,
                       help="distance matrix cache (falls back to $PROMPTSEG_CACHE_DIR)")
        p.add_argument("--ssim-window", type=int, default=11)
        p.add_argument("--ssim-sigma", type=float, default=1.5)
        if with_k:
            p.add_argument("--k", type=_positive_int, default=2, help="number of exemplars (default 2)")
            p.add_argument("--metric", choices=METRICS, default="ssim")

    def backend_flags(p):
        p.add_argument("--backend", choices=("reference", "remote"), default="reference")
        p.add_argument("--endpoint", default=None, help="remote server base URL")
        p.add_argument("--timeout-secs", type=float, default=60.0)
        p.add_argument("--patch-side", type=int, default=7)
        p.add_argument("--stride", type=_positive_int, default=2)
        p.add_argument("--search-stride", type=_positive_int, default=1)
        p.add_argument("--aggregation", choices=AGGREGATIONS, default="patch-vote")
        p.add_argument("--threshold", type=_threshold, default=0.5)

    p = sub.add_parser("validate", help="check a manifest and report split counts")
    p.add_argument("--manifest", required=True)

    p = sub.add_parser("retrieve", help="list the k nearest exemplars of a test image")
    common(p)
    p.add_argument("--test-id", required=True)
    p.add_argument("--dump-canvas", default=None, help="write the prompt canvas PNG here")

    p = sub.add_parser("predict", help="segment one test image and write its mask PNG")
    common(p)
    backend_flags(p)
    p.add_argument("--test-id", required=True)
    p.add_argument("--out", required=True, help="output mask PNG")
    p.add_argument("--save-soft", action="store_true",
                   help="also write the soft mask as <out>.soft.png")
    p.add_argument("--dump-canvas", default=None)

    p = sub.add_parser("sweep", help="evaluate mIoU over a k range and metrics")
    common(p, with_k=False)
    backend_flags(p)
    p.add_argument("--metric", choices=METRICS, action="append", default=None,
                   help="repeatable; default: all metrics")
    p.add_argument("--k-min", type=_positive_int, default=1)
    p.add_argument("--k-max", type=_positive_int, default=15)
    p.add_argument("--out", required=True, help="report file, or a directory for an auto-named file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _ssim_params(args):
    return SsimParams(window_side=args.ssim_window, gaussian_sigma=args.ssim_sigma)


def _backend_spec(args):
    if args.backend == "remote":
        if not args.endpoint:
            raise UsageError("--endpoint is required with --backend remote")
        return BackendSpec("remote", endpoint=args.endpoint, timeout=args.timeout_secs)
    patch = PatchMatchParams(args.patch_side, args.stride, args.aggregation, args.search_stride)
    return BackendSpec("reference", timeout=args.timeout_secs, patch=patch)


def _cache_dir(args):
    d = args.cache_dir or os.environ.get("PROMPTSEG_CACHE_DIR")
    return Path(d) if d else None


def _distance_matrix(manifest, dataset, cfg, metric, ssim_params, args):
    """Distance matrix for the loaded dataset, read from / written to the cache dir."""
    extra = ssim_params.to_dict() if metric == "ssim" else None
    cache = _cache_dir(args)
    path = cache / f"{cache_key(manifest, cfg, metric, extra)}.csv" if cache else None
    if path is not None and path.is_file():
        log.info("cache hit %s", path)
        return DistanceMatrix.from_csv(path.read_text(), metric)
    matrix = compute_distances(dataset, metric, ssim_params, args.parallelism)
    if path is not None:
        write_atomic(path, matrix.to_csv().encode())
        log.info("cached %s", path)
    return matrix


def _load_for_test(manifest, cfg, test_id, parallelism):
    """Train split plus the single requested test example."""
    entries = {e.id: e for e in manifest.test}
    if test_id not in entries:
        raise errors.UnknownTestId(f"no test entry with id {test_id!r}")
    train_only = Manifest(tuple(manifest.train), manifest.version, manifest.path)
    train = load_examples(train_only, cfg, parallelism).train
    return Dataset(train, [load_example(entries[test_id], cfg)])


def _neighbors(manifest, cfg, args):
    if args.k > len(manifest.train):
        raise errors.KTooLarge(f"k={args.k} exceeds the {len(manifest.train)} training exemplars")
    dataset = _load_for_test(manifest, cfg, args.test_id, args.parallelism)
    matrix = compute_distances(dataset, args.metric, _ssim_params(args), args.parallelism)
    result = matrix.retrieve(args.test_id, args.k)
    return dataset, result


def cmd_validate(args, out):
    try:
        manifest, problems = manifest_problems(args.manifest)
    except errors.ParseError as exc:
        print(f"parse error: {exc}", file=out)
        return EXIT_USAGE
    except errors.MissingFile as exc:
        print(f"error: {exc}", file=out)
        return EXIT_VALIDATION
    counts = manifest.counts()
    print(f"train: {counts['train']}, test: {counts['test']}", file=out)

    sizes = []
    for e in manifest.entries:
        for p in (e.image_path, e.mask_path):
            if not p.is_file():
                continue
            try:
                with Image.open(p) as im:
                    size = im.size
            except Exception as exc:  # any unreadable header is a per-entry diagnostic
                problems.append(errors.DecodeError(f"entry {e.id!r}: cannot read {p}: {exc}"))
                continue
            if p == e.image_path:
                sizes.append(size)
    if sizes:
        w = np.array([s[0] for s in sizes])
        h = np.array([s[1] for s in sizes])
        print(f"image sizes: width {w.min()}..{w.max()}, height {h.min()}..{h.max()} "
              f"({len(sizes)} images)", file=out)
    for split in ("train", "test"):
        if counts[split] == 0:
            problems.append(errors.ManifestError(f"no {split} entries"))
    for prob in problems:
        print(f"error: {prob}", file=out)
    return EXIT_VALIDATION if problems else EXIT_OK


def cmd_retrieve(args, out):
    manifest = load_manifest(args.manifest)
    cfg = PreprocessConfig(target_side=args.side)
    dataset, result = _neighbors(manifest, cfg, args)
    for rank, (ex_id, dist) in enumerate(result.neighbors, start=1):
        print(f"{rank}\t{ex_id}\t{dist:.6f}", file=out)
    if args.dump_canvas:
        train = dataset.train_by_id()
        canvas = build_prompt([train[i] for i in result.ids], dataset.test[0].image)
        write_atomic(args.dump_canvas, canvas.to_png())
    return EXIT_OK


def cmd_predict(args, out):
    spec = _backend_spec(args)
    manifest = load_manifest(args.manifest)
    cfg = PreprocessConfig(target_side=args.side)
    dataset, result = _neighbors(manifest, cfg, args)
    train = dataset.train_by_id()
    exemplars = [train[i] for i in result.ids]
    test = dataset.test[0]
    if args.dump_canvas:
        write_atomic(args.dump_canvas, build_prompt(exemplars, test.image).to_png())
    soft = segment(exemplars, test.image, spec)
    mask = binarize(soft, args.threshold)
    write_atomic(args.out, encode_png(mask))
    if args.save_soft:
        write_atomic(str(args.out) + ".soft.png", encode_png(soft))
    print(f"wrote {args.out} ({int(mask.sum())} foreground pixels; exemplars: "
          f"{', '.join(result.ids)})", file=out)
    return EXIT_OK


def cmd_sweep(args, out):
    spec = _backend_spec(args)
    if args.k_max < args.k_min:
        raise UsageError(f"--k-max ({args.k_max}) is below --k-min ({args.k_min})")
    metrics = sorted(set(args.metric or METRICS))
    manifest = load_manifest(args.manifest)
    n_train = len(manifest.train)
    if args.k_max > n_train:
        raise errors.KTooLarge(f"cell (k={args.k_max}, metric={metrics[0]}): "
                               f"k exceeds the {n_train} training exemplars")
    if not manifest.test:
        raise errors.ManifestError("manifest has no test entries")

    cfg = PreprocessConfig(target_side=args.side)
    ssim_params = _ssim_params(args)
    dataset = load_examples(manifest, cfg, args.parallelism)
    matrices = {m: _distance_matrix(manifest, dataset, cfg, m, ssim_params, args) for m in metrics}
    digest = dataset_digest(manifest)
    report = sweep(dataset, (args.k_min, args.k_max), metrics, spec, ssim_params=ssim_params,
                   threshold=args.threshold, parallelism=args.parallelism,
                   distance_matrices=matrices, preprocess=cfg,
                   extra_config={"dataset_digest": digest})

    target = Path(args.out)
    if target.is_dir() or args.out.endswith(os.sep):
        target = target / report_filename(digest, spec.tag, LAYOUT_VERSION, args.format)
    write_atomic(target, emit_report(report, args.format))
    print(f"wrote {target} ({len(report.cells)} cells)", file=out)
    for f in report.failures:
        print(f"failed cell k={f['k']} metric={f['metric']} at {f['test_id']}: {f['error']}", file=out)
    return EXIT_OK if report.ok else EXIT_RUNTIME


COMMANDS = {
    "validate": cmd_validate,
    "retrieve": cmd_retrieve,
    "predict": cmd_predict,
    "sweep": cmd_sweep,
}


def _exit_code(exc):
    cause = exc
    while isinstance(cause, (errors.PipelineError, errors.EntryLoadError)):
        if isinstance(cause, errors.EntryLoadError):
            return EXIT_VALIDATION
        cause = cause.cause
    for cls, code in _BACKEND_EXIT:
        if isinstance(cause, cls):
            return code
    if isinstance(cause, errors.ParseError):
        return EXIT_USAGE
    if isinstance(cause, _VALIDATION_ERRORS):
        return EXIT_VALIDATION
    return EXIT_RUNTIME


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"promptseg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (errors.PromptSegError, ValueError) as exc:
        print(f"promptseg {args.command}: error: {exc}", file=sys.stderr)
        if isinstance(exc, errors.PromptSegError):
            return _exit_code(exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
