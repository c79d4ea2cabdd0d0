"""Command line entry point: ``drmanifold {preprocess,run,report,inspect-image}``."""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import imaging
from .config import load_config
from .dataset import read_manifest
from .eval import CvReport, format_table, run_experiment, save_fold_artifacts
from .store import ImageLoadError, build_store, load_store, save_store, store_path

log = logging.getLogger("drmanifold")


def _config(args):
    cfg = load_config(args.config, manifest=args.manifest, out=args.out)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "grid_row", None):
        cfg = cfg.select_rows(args.grid_row)
    return cfg


def _preps(cfg):
    return sorted({row.prep for row in cfg.grid})


def preprocess_all(cfg, preps=None):
    """Build and persist one feature store per preprocessing kind."""
    rows = read_manifest(cfg.manifest)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for prep in preps or _preps(cfg) or ["GRH"]:
        store = build_store(rows, prep, cfg.height, cfg.width, cfg.equalize)
        paths[prep] = store_path(cfg.out_dir, prep)
        save_store(store, paths[prep])
        log.info("%s: %d images -> %s (%d features each)", prep, store.n, paths[prep], store.feature_length)
    return paths


def cmd_preprocess(args):
    cfg = _config(args)
    preprocess_all(cfg, args.prep or None)
    return 0


def run_grid(cfg, jobs=1, save_models=False):
    """Run every grid row; returns ``(reports, n_failed)``. Failures do not stop later rows."""
    stores = {}
    for prep in _preps(cfg):
        path = store_path(cfg.out_dir, prep)
        if not path.exists():
            preprocess_all(cfg, [prep])
        stores[prep] = load_store(path)

    report_dir = cfg.out_dir / "reports"
    report_dir.mkdir(parents=True, exist_ok=True)
    reports, timings, failed = [], {}, 0
    for i, row in enumerate(cfg.grid):
        stem = f"row{i:02d}_{row.name}"
        try:
            rep = run_experiment(row, stores[row.prep], cfg.plan, jobs=jobs, keep_artifacts=save_models)
            if save_models:
                for fold, art in enumerate(rep.artifacts):
                    save_fold_artifacts(art, cfg.out_dir / "models" / stem / f"fold{fold}")
            log.info("%s: mean accuracy %.4f", stem, rep.mean_accuracy)
        except Exception as exc:  # noqa: BLE001 - recorded per row, the grid continues
            failed += 1
            log.error("%s failed: %s", stem, exc)
            rep = CvReport(config=row.to_dict(), folds=[], mean_accuracy=None, n_samples=0,
                           n_augmented=0, error=str(exc))
        data = rep.to_dict()
        (report_dir / f"{stem}.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        timings[stem] = {"total": rep.wall_time, "folds": [f.wall_time for f in rep.folds]}
        reports.append(data)

    write_summary(cfg.out_dir, reports)
    (cfg.out_dir / "timings.json").write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n")
    return reports, failed


def write_summary(out_dir, reports):
    rows = [{"name": r["config"].get("name"), "mean_accuracy": r.get("mean_accuracy"),
             "error": r.get("error")} for r in reports]
    (Path(out_dir) / "summary.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    table = format_table(reports)
    (Path(out_dir) / "summary.txt").write_text(table)
    return table


def cmd_run(args):
    cfg = _config(args)
    reports, failed = run_grid(cfg, jobs=args.jobs, save_models=args.save_models)
    sys.stdout.write(format_table(reports))
    return 1 if failed else 0


def cmd_report(args):
    out = Path(args.out) if args.out else load_config(args.config, manifest=args.manifest).out_dir
    files = sorted((out / "reports").glob("*.json"))
    reports = [json.loads(f.read_text()) for f in files]
    sys.stdout.write(write_summary(out, reports))
    return 1 if any(r.get("error") for r in reports) else 0


def cmd_inspect_image(args):
    """Write the preprocessing stages of one photograph as PNG panels."""
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.image).stem
    rgb = imaging.resize_to_canvas(imaging.load_image(args.image), args.height, args.width)
    green = imaging.extract_green_channel(rgb)
    panels = {
        "gray": imaging.to_grayscale(rgb),
        "green": green,
        "green_eq": imaging.equalize_histogram(green),
    }
    for angle in args.angle or []:
        panels[f"green_eq_rot{angle}"] = imaging.rotate(panels["green_eq"], angle)
    from PIL import Image
    Image.fromarray(np.ascontiguousarray(rgb)).save(out / f"{stem}_resized.png")
    for name, img in panels.items():
        imaging.save_gray_png(img, out / f"{stem}_{name}.png")
        print(out / f"{stem}_{name}.png")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="drmanifold", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--manifest", help="CSV manifest with header path,label")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("preprocess", help="build the cached feature stores")
    common(sp)
    sp.add_argument("--prep", action="append", choices=["GRH", "GRAY"],
                    help="preprocessing kind (repeatable; default: whatever the grid needs)")
    sp.set_defaults(func=cmd_preprocess)

    sp = sub.add_parser("run", help="cross-validate the experiment grid")
    common(sp)
    sp.add_argument("--seed", type=int, help="override every seed")
    sp.add_argument("--grid-row", type=int, action="append", help="run only this row index (repeatable)")
    sp.add_argument("--jobs", type=int, default=1, help="folds evaluated in parallel")
    sp.add_argument("--save-models", action="store_true", help="write fitted fold artifacts under OUT/models")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("report", help="rebuild the summary table from saved reports")
    common(sp)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("inspect-image", help="write preprocessing stages of one image as PNGs")
    sp.add_argument("image")
    sp.add_argument("--out", help="output directory (default: current)")
    sp.add_argument("--height", type=int, default=imaging.CANVAS_H)
    sp.add_argument("--width", type=int, default=imaging.CANVAS_W)
    sp.add_argument("--angle", type=int, action="append", choices=imaging.ROTATION_ANGLES)
    sp.set_defaults(func=cmd_inspect_image)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, ImageLoadError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
