"""Procedural fundus-like photographs for end-to-end checks.

Each image is an orange-red retinal disc on a black background with a bright
optic disc, a smooth illumination falloff and sensor noise. Lesions are round
blobs scattered in an annulus around the disc center: dark ones (hemorrhages)
and bright ones (exudates). The number of lesions grows with the class label,
so the grade is recoverable from lesion coverage but not from any single
pixel.
"""
from pathlib import Path

import numpy as np
from PIL import Image

DARK_PER_CLASS = 6
BRIGHT_PER_CLASS = 2


def fundus_image(label, rng, height=256, width=388):
    """One RGB uint8 image of the given grade."""
    rr, cc = np.mgrid[0:height, 0:width].astype(np.float64)
    cy, cx = (height - 1) / 2, (width - 1) / 2
    radius = 0.46 * height
    dist = np.hypot(rr - cy, cc - cx)
    disc = dist <= radius

    falloff = 1.0 - 0.45 * (dist / radius) ** 2
    base = np.stack([200 * falloff, 95 * falloff, 40 * falloff], axis=-1)

    theta = rng.uniform(0, 2 * np.pi)
    oy = cy + 0.55 * radius * np.sin(theta)
    ox = cx + 0.55 * radius * np.cos(theta)
    optic = np.exp(-((rr - oy) ** 2 + (cc - ox) ** 2) / (2 * (0.09 * radius) ** 2))
    base += optic[..., None] * np.array([50.0, 120.0, 90.0])

    def blobs(count, color, rmin, rmax):
        for _ in range(count):
            ang = rng.uniform(0, 2 * np.pi)
            rad = radius * np.sqrt(rng.uniform(0.04, 0.55))
            by, bx = cy + rad * np.sin(ang), cx + rad * np.cos(ang)
            size = rng.uniform(rmin, rmax)
            r0, r1 = max(int(by - 4 * size), 0), min(int(by + 4 * size) + 1, height)
            c0, c1 = max(int(bx - 4 * size), 0), min(int(bx + 4 * size) + 1, width)
            win = base[r0:r1, c0:c1]
            mask = np.exp(-((rr[r0:r1, c0:c1] - by) ** 2 + (cc[r0:r1, c0:c1] - bx) ** 2) / (2 * size ** 2))
            win[:] = win * (1 - mask[..., None]) + mask[..., None] * np.asarray(color)

    n_dark = DARK_PER_CLASS * label + int(rng.integers(0, 3))
    n_bright = BRIGHT_PER_CLASS * label + int(rng.integers(0, 2))
    blobs(n_dark, (90.0, 15.0, 10.0), 0.03 * radius, 0.06 * radius)
    blobs(n_bright, (235.0, 215.0, 120.0), 0.025 * radius, 0.05 * radius)

    base += rng.normal(0, 4.0, size=base.shape)
    base[~disc] = 0.0
    return np.clip(np.rint(base), 0, 255).astype(np.uint8)


def write_corpus(out_dir, per_class=60, n_classes=5, seed=0, height=256, width=388, fmt="png"):
    """Write ``per_class`` images of every grade plus a ``manifest.csv``.

    Returns the manifest path.
    """
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    lines = ["path,label"]
    for label in range(n_classes):
        for i in range(per_class):
            name = f"c{label}_{i:03d}.{fmt}"
            img = fundus_image(label, rng, height, width)
            Image.fromarray(img).save(img_dir / name, format="PNG" if fmt == "png" else "JPEG")
            lines.append(f"images/{name},{label}")
    manifest = out_dir / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest
