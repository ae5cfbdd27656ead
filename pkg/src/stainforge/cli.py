"""Command line entry points: fit, apply, export-style, bench.

Output convention: human-readable lines first, then a line containing
only ``---``, then machine-parseable ``key=value`` lines.  Warnings go
to standard error.  Exit codes: 0 success, 1 unexpected failure, 2
unusable input (missing directory, missing or invalid stats, bad
config), 3 too few usable images, 4 unwritable output.
"""
from __future__ import annotations

import argparse
import os
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import colorspace, stats, statsfile
from .imageio import find_images, load_rgb, save_png
from .pipeline import (
    FIXED,
    MODES,
    SN,
    STATS_MODES,
    MissingDistribution,
    PipelineConfig,
    plan_shared_template,
    transform,
    transform_batch,
)
from .normalizer import normalize_to_template
from .sampler import derive_rng
from .stats import EmptyCorpus, FAMILY_KINDS, DistributionFamily, InsufficientSamples

THREADS_ENV = "STAINFORGE_THREADS"

_BENCH_SPACE = {FIXED: colorspace.LAB, SN: colorspace.LAB}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _emit(human: list[str], machine: dict) -> None:
    for line in human:
        print(line)
    print("---")
    for key, value in machine.items():
        print(f"{key}={value}")


def _vec(values) -> str:
    return "[" + ", ".join(format(float(v), ".4g") for v in values) + "]"


def _spaces_arg(text: str) -> tuple[str, ...]:
    spaces = tuple(s.strip() for s in text.split(",") if s.strip())
    for s in spaces:
        if s not in colorspace.COLOR_SPACES:
            raise argparse.ArgumentTypeError(f"unknown color space {s!r}")
    if not spaces:
        raise argparse.ArgumentTypeError("need at least one color space")
    return spaces


def _per_class_arg(text: str):
    if text == "all":
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected an integer or "all", got {text!r}') from None
    if value < 1:
        raise argparse.ArgumentTypeError("per-class cap must be >= 1")
    return value


def _probs_arg(text: str) -> dict[str, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated probabilities (lab,hsv,hed order)")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"probabilities must be numbers, got {text!r}") from None
    return dict(zip(colorspace.COLOR_SPACES, values))


def _workers_for(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            _warn(f"ignoring non-integer {THREADS_ENV}={env!r}")
    return 1


def _checked_dir(path_text: str) -> Path:
    path = Path(path_text)
    if not path.is_dir():
        raise CliError(2, f"input directory not found: {path}")
    return path


def _collect(args, input_dir: Path) -> list[Path]:
    paths = find_images(input_dir)
    if args.per_class is not None:
        try:
            paths = stats.subsample_corpus(paths, args.per_class, args.seed)
        except EmptyCorpus as exc:
            raise CliError(3, str(exc)) from exc
    return paths


def cmd_fit(args) -> None:
    input_dir = _checked_dir(args.input_dir)
    paths = _collect(args, input_dir)
    skipped = 0

    def decoded():
        nonlocal skipped
        for p in paths:
            try:
                yield load_rgb(p)
            except Exception as exc:
                skipped += 1
                _warn(f"skipping unreadable image {p}: {exc}")

    family = DistributionFamily(args.family)
    try:
        dists = stats.fit_arrays(decoded(), args.spaces, family)
    except InsufficientSamples as exc:
        raise CliError(3, str(exc)) from exc
    out = Path(args.out)
    try:
        if out.parent != Path(""):
            out.parent.mkdir(parents=True, exist_ok=True)
        statsfile.write_stats_file(out, dists)
    except OSError as exc:
        raise CliError(4, f"cannot write stats file {out}: {exc}") from exc
    n = dists[args.spaces[0]].n_samples
    human = [f"fitted {len(args.spaces)} color space(s) from {n} images ({args.family} family)"]
    for space in args.spaces:
        d = dists[space]
        human.append(f"  {space}: avg mean {_vec(d.mean_of_avg)}, std mean {_vec(d.mean_of_std)}")
    _emit(
        human,
        {
            "n_images": n,
            "skipped": skipped,
            "spaces": ",".join(args.spaces),
            "family": args.family,
            "out": out,
        },
    )


def cmd_apply(args) -> None:
    input_dir = _checked_dir(args.input_dir)
    output_dir = Path(args.output_dir)
    dists = {}
    if args.mode in STATS_MODES:
        if not args.stats:
            raise CliError(2, f"mode {args.mode!r} needs --stats")
        try:
            dists = statsfile.read_stats_file(args.stats)
        except statsfile.StatsFileError as exc:
            raise CliError(2, str(exc)) from exc
    config = PipelineConfig(
        mode=args.mode,
        distributions=dists,
        space_probs=args.space_probs,
        space=args.space,
        strength=args.strength,
        family_override=DistributionFamily(args.family) if args.family else None,
        seed=args.seed,
        shared_template=args.shared_template,
    )
    try:
        config.validate()
    except (MissingDistribution, ValueError) as exc:
        raise CliError(2, str(exc)) from exc

    files = find_images(input_dir)
    workers = _workers_for(args)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(4, f"cannot create output directory {output_dir}: {exc}") from exc

    shared = plan_shared_template(config)
    written: list[Path] = []
    lock = threading.Lock()
    totals = {"clamped": 0.0, "pixels": 0}

    def work(index: int, src: Path) -> None:
        rel = src.relative_to(input_dir).with_suffix(".png")
        dst = output_dir / rel
        try:
            image = load_rgb(src)
        except Exception as exc:
            raise CliError(1, f"cannot decode {src}: {exc}") from exc
        if shared is not None:
            outcome = normalize_to_template(image, shared)
        else:
            outcome = transform(image, config, derive_rng(config.seed, index))
        try:
            dst.parent.mkdir(parents=True, exist_ok=True)
            save_png(dst, outcome.image)
        except OSError as exc:
            dst.unlink(missing_ok=True)
            raise CliError(4, f"cannot write {dst}: {exc}") from exc
        pixels = outcome.image.shape[0] * outcome.image.shape[1]
        with lock:
            written.append(dst)
            totals["clamped"] += outcome.clamped_fraction * pixels
            totals["pixels"] += pixels

    try:
        if workers == 1:
            for i, src in enumerate(files):
                work(i, src)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(work, i, src) for i, src in enumerate(files)]
                try:
                    for fut in futures:
                        fut.result()
                except BaseException:
                    for fut in futures:
                        fut.cancel()
                    raise
    except CliError:
        _remove_all(written)
        raise
    except Exception as exc:
        _remove_all(written)
        raise CliError(1, f"transform failed: {exc}") from exc

    clamped = totals["clamped"] / totals["pixels"] if totals["pixels"] else 0.0
    human = [
        f"transformed {len(files)} image(s) -> {output_dir} (mode {args.mode}, {workers} worker(s))"
    ]
    _emit(
        human,
        {
            "count": len(files),
            "clamped_fraction": format(clamped, ".6g"),
            "mode": args.mode,
            "workers": workers,
            "seed": args.seed,
            "output_dir": output_dir,
        },
    )


def _remove_all(paths: list[Path]) -> None:
    for p in paths:
        try:
            p.unlink(missing_ok=True)
        except OSError:
            pass


def cmd_export_style(args) -> None:
    input_dir = _checked_dir(args.input_dir)
    paths = _collect(args, input_dir)
    space = args.space

    def rows():
        for p in paths:
            try:
                image = load_rgb(p)
            except Exception as exc:
                _warn(f"skipping unreadable image {p}: {exc}")
                continue
            planes = colorspace.from_rgb(image, space)
            yield p.relative_to(input_dir).as_posix(), stats.channel_stats(planes, space)

    out = Path(args.out)
    try:
        if out.parent != Path(""):
            out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as sink:
            count = stats.export_style_csv(rows(), sink)
    except InsufficientSamples as exc:
        out.unlink(missing_ok=True)
        raise CliError(3, str(exc)) from exc
    except (OSError, stats.SinkWriteError) as exc:
        out.unlink(missing_ok=True)
        raise CliError(4, f"cannot write style export {out}: {exc}") from exc
    _emit(
        [f"exported per-image style of {count} image(s) in {space} -> {out}"],
        {"count": count, "space": space, "out": out},
    )


def cmd_bench(args) -> None:
    rng = np.random.default_rng(args.seed)
    images = [
        rng.integers(0, 256, size=(args.size, args.size, 3), dtype=np.uint8)
        for _ in range(args.count)
    ]
    dists = stats.fit_arrays(images, colorspace.COLOR_SPACES, stats.GAUSSIAN)
    worker_counts = []
    for part in args.workers.split(","):
        try:
            worker_counts.append(max(1, int(part)))
        except ValueError:
            raise CliError(2, f"bad worker count {part!r}") from None
    modes = args.modes.split(",") if args.modes else list(MODES)
    human = [f"throughput on {args.count} synthetic {args.size}x{args.size} tiles"]
    machine: dict = {"size": args.size, "count": args.count}
    for mode in modes:
        if mode not in MODES:
            raise CliError(2, f"unknown mode {mode!r}; expected one of {MODES}")
        config = PipelineConfig(
            mode=mode, distributions=dists, space=_BENCH_SPACE.get(mode), seed=args.seed
        )
        transform(images[0], config)  # warm up codec-independent paths
        for workers in worker_counts:
            start = time.perf_counter()
            transform_batch(images, config, workers=workers)
            elapsed = time.perf_counter() - start
            ips = args.count / elapsed if elapsed > 0 else float("inf")
            human.append(f"  {mode:<12} workers={workers}: {ips:9.2f} images/s")
            machine[f"ips_{mode}_w{workers}"] = format(ips, ".2f")
    _emit(human, machine)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stainforge",
        description="Stain-style fitting, normalization, and augmentation for histology tiles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit stain-style statistics over an image directory")
    fit.add_argument("--input-dir", required=True)
    fit.add_argument("--out", required=True, help="stats file to write")
    fit.add_argument("--spaces", default=colorspace.COLOR_SPACES, type=_spaces_arg)
    fit.add_argument("--family", default="gaussian", choices=FAMILY_KINDS)
    fit.add_argument("--per-class", default=None, type=_per_class_arg, help='cap per class directory, or "all"')
    fit.add_argument("--seed", default=0, type=int)
    fit.set_defaults(func=cmd_fit)

    apply_p = sub.add_parser("apply", help="transform a directory of images")
    apply_p.add_argument("--input-dir", required=True)
    apply_p.add_argument("--output-dir", required=True)
    apply_p.add_argument("--mode", default="random", choices=MODES)
    apply_p.add_argument("--stats", default=None, help="stats file from fit")
    apply_p.add_argument("--space", default=None, choices=colorspace.COLOR_SPACES)
    apply_p.add_argument("--space-probs", default=None, type=_probs_arg, help="lab,hsv,hed probabilities")
    apply_p.add_argument("--strength", default="light", choices=("light", "strong"))
    apply_p.add_argument("--family", default=None, choices=FAMILY_KINDS, help="override the sampling family")
    apply_p.add_argument("--seed", default=0, type=int)
    apply_p.add_argument("--workers", default=None, type=int, help=f"thread count (default ${THREADS_ENV} or 1)")
    apply_p.add_argument("--shared-template", action="store_true", help="draw one template for the whole batch")
    apply_p.set_defaults(func=cmd_apply)

    export = sub.add_parser("export-style", help="dump per-image channel stats as csv")
    export.add_argument("--input-dir", required=True)
    export.add_argument("--out", required=True)
    export.add_argument("--space", default=colorspace.LAB, choices=colorspace.COLOR_SPACES)
    export.add_argument("--per-class", default=None, type=_per_class_arg)
    export.add_argument("--seed", default=0, type=int)
    export.set_defaults(func=cmd_export_style)

    bench = sub.add_parser("bench", help="measure transform throughput on synthetic tiles")
    bench.add_argument("--size", default=224, type=int)
    bench.add_argument("--count", default=48, type=int)
    bench.add_argument("--modes", default=None, help="comma-separated subset of modes")
    bench.add_argument("--workers", default="1,2", help="comma-separated worker counts")
    bench.add_argument("--seed", default=0, type=int)
    bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CliError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
