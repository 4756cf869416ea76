"""Command line entry point: ``pastesynth <subcommand> ...``.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime error.
Diagnostics go to stderr; tables go to stdout as tab-separated lines.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import PastesynthError

logger = logging.getLogger("pastesynth")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pastesynth", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pastesynth {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path)
    src.add_argument("--preset", choices=["gmu-instance", "cdnet-foreground"])
    s.add_argument("--seed", type=int)
    s.add_argument("--num-images", type=_positive_int)
    s.add_argument("--background-dir")
    s.add_argument("--cutout-dir")
    s.add_argument("--output-dir")
    s.add_argument("--workers", type=_positive_int, help="worker processes (default: all CPUs)")
    s.add_argument("--dry-run", action="store_true", help="validate config and assets only")

    b = sub.add_parser("bgmedian", help="median background of a frame directory")
    b.add_argument("--frames", type=Path, required=True)
    b.add_argument("--out", type=Path, required=True)
    b.add_argument("--window", type=_positive_int, default=50)

    g = sub.add_parser("gapmask", help="blending-gap mask of an object mask")
    g.add_argument("--mask", type=Path, required=True)
    g.add_argument("--mode", choices=["instance", "foreground"], required=True)
    g.add_argument("--r-out", type=_positive_int, default=3)
    g.add_argument("--r-in", type=_positive_int, default=3)
    g.add_argument("--shape", choices=["square", "disc"], default="square")
    g.add_argument("--out", type=Path, help="default: <mask stem>.gap.png next to the mask")

    i = sub.add_parser("inpaint", help="fill the masked pixels of an image")
    i.add_argument("--image", type=Path, required=True)
    i.add_argument("--mask", type=Path, required=True)
    i.add_argument("--backend", choices=["patchmatch", "service"], default="patchmatch")
    i.add_argument("--endpoint")
    i.add_argument("--timeout-ms", type=_positive_int, default=30000)
    i.add_argument("--retries", type=int, default=2)
    i.add_argument("--patch-size", type=int, default=7)
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out", type=Path, required=True)

    f = sub.add_parser("freeform", help="random free-form hole masks for inpainting training")
    f.add_argument("--width", type=_positive_int, required=True)
    f.add_argument("--height", type=_positive_int, required=True)
    f.add_argument("--seed", type=int, required=True)
    f.add_argument("--count", type=_positive_int, default=1)
    f.add_argument("--out", type=Path, required=True, help="output directory")

    e = sub.add_parser("eval", help="evaluation metrics")
    esub = e.add_subparsers(dest="eval_command", required=True, parser_class=_Parser)
    d = esub.add_parser("detect", help="AP at an IoU threshold per category, and mAP")
    d.add_argument("--gt", type=Path, required=True, help="ground truth JSON (a manifest works)")
    d.add_argument("--pred", type=Path, required=True, help="detections JSON")
    d.add_argument("--ap-mode", choices=["all-points", "11-point"], default="all-points")
    d.add_argument("--iou", type=float, default=0.5)
    d.add_argument("--report-dir", type=Path, help="write detect.csv and pr_curves.png here")
    fs = esub.add_parser("fgseg", help="pixel precision/recall/F-measure")
    fs.add_argument("--pred", type=Path, required=True)
    fs.add_argument("--gt", type=Path, required=True)
    fs.add_argument("--ignore", type=Path)
    fs.add_argument("--report-dir", type=Path, help="write fgseg.csv and fmeasure.png here")

    v = sub.add_parser("preview", help="side-by-side strip of one scene's blend variants")
    v.add_argument("--group", required=True)
    v.add_argument("--dataset", type=Path, required=True, help="dataset directory holding manifest.json")
    v.add_argument("--out", type=Path, required=True)

    st = sub.add_parser("stub-server", help="serve the test inpainting protocol")
    st.add_argument("--port", type=int, default=8080)
    st.add_argument("--host", default="127.0.0.1")
    st.add_argument("--fill", choices=["gray", "echo", "blur"], default="gray")
    return p


# Subcommands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    from .config import load_config, preset_path
    from .synthesis import MANIFEST_NAME, generate_dataset

    cfg = load_config(args.config if args.config else preset_path(args.preset))
    cwd = Path.cwd()
    overrides = {
        "seed": args.seed,
        "num_images": args.num_images,
        "background_dir": str(cwd / args.background_dir) if args.background_dir else None,
        "cutout_dir": str(cwd / args.cutout_dir) if args.cutout_dir else None,
        "output_dir": str(cwd / args.output_dir) if args.output_dir else None,
    }
    cfg = cfg.with_overrides(**overrides)
    manifest = generate_dataset(cfg, workers=args.workers, dry_run=args.dry_run)
    if args.dry_run:
        print(f"config and assets OK ({cfg.mode} mode, {cfg.num_images} scenes)", file=sys.stderr)
        return 0
    out = cfg.resolve(cfg.output_dir) / MANIFEST_NAME
    print(
        f"wrote {len(manifest['images'])} images, {len(manifest['annotations'])} annotations, "
        f"{len(manifest['errors'])} errors",
        file=sys.stderr,
    )
    print(out)
    return 0


def cmd_bgmedian(args) -> int:
    from .background import background_from_dir
    from .imaging import save_image

    save_image(background_from_dir(args.frames, args.window), args.out)
    return 0


def cmd_gapmask(args) -> int:
    from .imaging import load_mask, save_mask
    from .morphology import StructElem, gap_mask

    m = load_mask(args.mask)
    gap = gap_mask(m, args.mode, StructElem(args.shape, args.r_out), StructElem(args.shape, args.r_in))
    out = args.out or args.mask.with_name(args.mask.name.split(".")[0] + ".gap.png")
    save_mask(gap, out)
    print(out)
    return 0


def cmd_inpaint(args) -> int:
    from .imaging import load_image, load_mask, save_image
    from .inpaint import PatchMatchParams, ServiceEndpoint, inpaint_image

    img = load_image(args.image)
    hole = load_mask(args.mask)
    if args.backend == "service":
        if not args.endpoint:
            raise UsageError("inpaint: --endpoint is required with --backend service")
        backend = ServiceEndpoint(args.endpoint, timeout_ms=args.timeout_ms, retries=args.retries)
    else:
        backend = PatchMatchParams(patch_size=args.patch_size, seed=args.seed)
    save_image(inpaint_image(img, hole, backend), args.out)
    return 0


def cmd_freeform(args) -> int:
    from .imaging import save_mask
    from .inpaint import generate_freeform_mask

    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    for k in range(args.count):
        path = args.out / f"hole_{k:05d}.png"
        save_mask(generate_freeform_mask(args.width, args.height, rng=rng), path)
        print(path)
    return 0


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_eval_detect(args) -> int:
    from .evaluation import average_precision, parse_detections, parse_ground_truth

    gts = parse_ground_truth(json.loads(args.gt.read_text()))
    dets = parse_detections(json.loads(args.pred.read_text()))
    report = average_precision(dets, gts, iou_thresh=args.iou, mode=args.ap_mode)
    rows = [(cat, f"{ap:.6f}") for cat, ap in report.ap.items()]
    rows.append(("mAP", f"{report.mean_ap:.6f}"))
    for cat, val in rows:
        print(f"{cat}\t{val}")
    for cat in report.unknown_categories:
        print(f"warning: detections for unknown category {cat!r}", file=sys.stderr)
    if args.report_dir:
        from .plotting import plot_pr_curves

        args.report_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(args.report_dir / "detect.csv", ("category", "ap"), rows)
        plot_pr_curves(report, args.report_dir / "pr_curves.png")
    return 0


def _scene_dirs(root: Path) -> list[tuple[str, Path]]:
    subdirs = sorted(p for p in root.iterdir() if p.is_dir())
    return [(p.name, p) for p in subdirs] if subdirs else [(root.name, root)]


def cmd_eval_fgseg(args) -> int:
    from .errors import ImageIOError
    from .evaluation import SegCounts, seg_counts
    from .imaging import load_mask

    rows = []
    total = SegCounts(0, 0, 0)
    for scene, pdir in _scene_dirs(args.pred):
        rel = pdir.relative_to(args.pred)
        counts = SegCounts(0, 0, 0)
        files = sorted(pdir.glob("*.png"))
        if not files:
            raise ImageIOError(f"no prediction PNGs in {pdir}")
        for pf in files:
            gt = load_mask(args.gt / rel / pf.name)
            ign = None
            if args.ignore is not None and (args.ignore / rel / pf.name).is_file():
                ign = load_mask(args.ignore / rel / pf.name)
            counts = counts + seg_counts(load_mask(pf), gt, ign)
        total = total + counts
        rows.append((scene, counts))
    rows.append(("aggregate", total))
    table = [
        (name, c.tp, c.fp, c.fn, f"{c.precision:.6f}", f"{c.recall:.6f}", f"{c.f_measure:.6f}")
        for name, c in rows
    ]
    header = ("scene", "tp", "fp", "fn", "precision", "recall", "f_measure")
    print("\t".join(header))
    for r in table:
        print("\t".join(str(v) for v in r))
    if args.report_dir:
        from .plotting import plot_fmeasure

        args.report_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(args.report_dir / "fgseg.csv", header, table)
        plot_fmeasure([(n, c.precision, c.recall, c.f_measure) for n, c in rows], args.report_dir / "fmeasure.png")
    return 0


def cmd_preview(args) -> int:
    from .plotting import preview_group
    from .synthesis import load_manifest

    manifest = load_manifest(args.dataset)
    try:
        preview_group(manifest, args.dataset, args.group, args.out)
    except KeyError as exc:
        raise UsageError(f"preview: {exc.args[0]}") from exc
    print(args.out)
    return 0


def cmd_stub_server(args) -> int:
    from .inpaint.stub_server import StubServer

    server = StubServer(args.host, args.port, fill=args.fill)
    print(f"stub inpainting service on {server.url}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "bgmedian": cmd_bgmedian,
    "gapmask": cmd_gapmask,
    "inpaint": cmd_inpaint,
    "freeform": cmd_freeform,
    "preview": cmd_preview,
    "stub-server": cmd_stub_server,
}


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "eval":
        handler = cmd_eval_detect if args.eval_command == "detect" else cmd_eval_fgseg
    else:
        handler = COMMANDS[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (PastesynthError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"pastesynth {args.command}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
