"""Write-once cache of preprocessed images."""
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import CANVAS_H, CANVAS_W, load_image, preprocess


@dataclass(frozen=True, eq=False)
class FeatureStore:
    """Preprocessed ``(N, H, W)`` uint8 images with labels and group ids.

    Group ids are the manifest row indices, so every source photograph is its
    own group until augmentation adds rotated copies.
    """
    images: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    paths: tuple
    prep: str

    @property
    def n(self):
        return self.images.shape[0]

    @property
    def feature_length(self):
        return self.images.shape[1] * self.images.shape[2]


class ImageLoadError(RuntimeError):
    pass


def build_store(rows, prep="GRH", target_h=CANVAS_H, target_w=CANVAS_W, equalize=True):
    """Preprocess every ``(path, label)`` row of a manifest."""
    images = []
    for path, _ in rows:
        try:
            images.append(preprocess(load_image(path), prep, target_h, target_w, equalize))
        except (OSError, ValueError) as exc:
            raise ImageLoadError(f"cannot preprocess {path}: {exc}") from exc
    images = np.stack(images) if images else np.zeros((0, target_h, target_w), np.uint8)
    labels = np.array([lab for _, lab in rows], dtype=np.int64)
    return FeatureStore(images, labels, np.arange(len(rows), dtype=np.int64),
                        tuple(str(p) for p, _ in rows), prep)


def save_store(store, path):
    np.savez(path, images=store.images, labels=store.labels, groups=store.groups,
             paths=np.array(store.paths, dtype=str), prep=np.array(store.prep))


def load_store(path):
    with np.load(path, allow_pickle=False) as z:
        return FeatureStore(z["images"], z["labels"], z["groups"],
                            tuple(str(p) for p in z["paths"]), str(z["prep"]))


def store_path(out_dir, prep):
    return Path(out_dir) / f"features_{prep.lower()}.npz"
