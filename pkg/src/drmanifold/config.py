"""Run configuration: one YAML file, overridable from the command line.

Recognised keys (all optional except ``manifest``)::

    manifest: data/manifest.csv      # CSV with header path,label
    out: runs/                       # output directory
    preprocess:
      height: 256
      width: 388
      equalize: true                 # histogram equalization for GRH
    augmentation:
      additions: {1: 100, 2: 20, 3: 100, 4: 100}
      angles: [45, 90, 135, 180, 225, 270]
    seeds:
      augment: 0
      folds: 0
      init: 0
    defaults:                        # applied to every grid row
      target_dim: 40
      pre_dim: 40
    grid: reference                    # or a list of rows, e.g.
      # - {prep: GRH, augment: true, reducer: NPE, model: MLP, hidden: 160}

Relative paths resolve against the directory holding the config file.
"""
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .dataset import AugmentationPlan
from .eval import ExperimentConfig, reference_grid
from .imaging import CANVAS_H, CANVAS_W

KNOWN_KEYS = {"manifest", "out", "preprocess", "augmentation", "seeds", "defaults", "grid"}


@dataclass
class RunConfig:
    manifest: Path
    out_dir: Path
    grid: list = field(default_factory=reference_grid)
    height: int = CANVAS_H
    width: int = CANVAS_W
    equalize: bool = True
    plan: AugmentationPlan = field(default_factory=AugmentationPlan.reference)

    def with_seed(self, seed):
        return replace(self, grid=[row.with_seed(seed) for row in self.grid], plan=replace(self.plan, seed=seed))

    def select_rows(self, rows):
        bad = [r for r in rows if not 0 <= r < len(self.grid)]
        if bad:
            raise ValueError(f"grid rows {bad} out of range 0..{len(self.grid) - 1}")
        return replace(self, grid=[self.grid[r] for r in rows])


def _rows(grid, defaults, seeds):
    seed_kw = {
        "augment_seed": int(seeds.get("augment", 0)),
        "fold_seed": int(seeds.get("folds", 0)),
        "init_seed": int(seeds.get("init", 0)),
    }
    if grid is None or grid == "reference":
        return reference_grid(**defaults, **seed_kw)
    if not isinstance(grid, list):
        raise ValueError("grid must be 'reference' or a list of rows")
    return [ExperimentConfig(**{**defaults, **seed_kw, **row}) for row in grid]


def load_config(path=None, manifest=None, out=None):
    """Build a :class:`RunConfig` from a YAML file and/or explicit overrides."""
    raw = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        raw = yaml.safe_load(path.read_text()) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        unknown = set(raw) - KNOWN_KEYS
        if unknown:
            raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
        base = path.parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    manifest = Path(manifest) if manifest is not None else (resolve(raw["manifest"]) if "manifest" in raw else None)
    if manifest is None:
        raise ValueError("no manifest given (config key 'manifest' or --manifest)")
    if not manifest.exists():
        raise FileNotFoundError(f"manifest {manifest} does not exist")
    out_dir = Path(out) if out is not None else resolve(raw.get("out", "runs"))

    prep = raw.get("preprocess") or {}
    aug = raw.get("augmentation") or {}
    seeds = raw.get("seeds") or {}
    plan = AugmentationPlan(
        aug.get("additions", AugmentationPlan.reference().additions),
        tuple(aug.get("angles", AugmentationPlan().angles)),
        int(seeds.get("augment", 0)),
    )
    return RunConfig(
        manifest=manifest,
        out_dir=out_dir,
        grid=_rows(raw.get("grid"), raw.get("defaults") or {}, seeds),
        height=int(prep.get("height", CANVAS_H)),
        width=int(prep.get("width", CANVAS_W)),
        equalize=bool(prep.get("equalize", True)),
        plan=plan,
    )
