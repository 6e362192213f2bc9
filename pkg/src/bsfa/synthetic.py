"""Procedural fine-grained "species" and textured-blob images.

Every species shares one body plan (an elliptical body with a head disc and a
tail wedge); species differ in body colour, stripe pattern and the colour and
shape of a small head motif. Instances are placed at random position, scale and
orientation on a cluttered background, and their ground-truth box is recorded.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .bas import BBox
from .data import Image, SplitSpec, write_split_files

MOTIFS = ("dot", "bar", "ring", "cross")


@dataclass(frozen=True)
class Species:
    body: tuple[float, float, float]
    stripe: tuple[float, float, float]
    head: tuple[float, float, float]
    stripe_freq: float
    stripe_angle: float
    motif: str


def make_species(rng: np.random.Generator) -> Species:
    return Species(
        body=tuple(rng.uniform(0.15, 0.95, 3)),
        stripe=tuple(rng.uniform(0.0, 1.0, 3)),
        head=tuple(rng.uniform(0.0, 1.0, 3)),
        stripe_freq=float(rng.uniform(0.15, 0.6)),
        stripe_angle=float(rng.uniform(0, np.pi)),
        motif=MOTIFS[int(rng.integers(len(MOTIFS)))],
    )


def _background(rng, size):
    yy, xx = np.mgrid[0:size, 0:size] / size
    bg = np.empty((size, size, 3))
    base = rng.uniform(0.25, 0.75, 3)
    for ch in range(3):
        fx, fy = rng.uniform(0.5, 3.0, 2)
        px, py = rng.uniform(0, 2 * np.pi, 2)
        bg[..., ch] = base[ch] + 0.12 * np.sin(2 * np.pi * fx * xx + px) * np.cos(2 * np.pi * fy * yy + py)
    # clutter: a few low-contrast strokes and specks
    for _ in range(int(rng.integers(3, 7))):
        y0, x0 = rng.uniform(0, size, 2)
        ang = rng.uniform(0, np.pi)
        length = rng.uniform(0.2, 0.6) * size
        t = np.linspace(0, length, int(length) * 2)
        ys = np.clip((y0 + t * np.sin(ang)).astype(int), 0, size - 1)
        xs = np.clip((x0 + t * np.cos(ang)).astype(int), 0, size - 1)
        bg[ys, xs] = 0.7 * bg[ys, xs] + 0.3 * rng.uniform(0, 1, 3)
    bg += rng.normal(0, 0.02, bg.shape)
    return bg


def render_instance(species: Species, rng: np.random.Generator, size: int = 84):
    """Return (pixels, box) for one randomly posed instance of ``species``."""
    img = _background(rng, size)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    scale = rng.uniform(0.22, 0.38) * size
    a, b = scale, scale * rng.uniform(0.5, 0.7)
    margin = a + 0.25 * scale
    cy, cx = rng.uniform(margin * 0.8, size - margin * 0.8, 2)
    theta = rng.uniform(0, 2 * np.pi)
    ct, st = np.cos(theta), np.sin(theta)
    u = (xx - cx) * ct + (yy - cy) * st  # along the body axis
    v = -(xx - cx) * st + (yy - cy) * ct
    jitter = rng.normal(0, 0.04, 3)

    body = (u / a) ** 2 + (v / b) ** 2 <= 1.0
    su = u * np.cos(species.stripe_angle) + v * np.sin(species.stripe_angle)
    stripes = np.sin(2 * np.pi * species.stripe_freq * su / (size / 84)) > 0.3
    colour = np.where(stripes[..., None], np.array(species.stripe), np.array(species.body))
    img[body] = np.clip(colour[body] + jitter, 0, 1)

    tail = (u < -0.8 * a) & (u > -1.25 * a) & (np.abs(v) < (-u - 0.8 * a) * 0.9)
    img[tail] = np.clip(np.array(species.body) * 0.7 + jitter, 0, 1)

    hr = 0.35 * b
    hy, hx = cy + 0.95 * a * st, cx + 0.95 * a * ct
    du, dv = xx - hx, yy - hy
    dist = np.hypot(du, dv)
    head = dist <= hr
    img[head] = np.clip(np.array(species.body) * 0.85 + jitter, 0, 1)
    mr = 0.6 * hr
    if species.motif == "dot":
        motif = dist <= mr
    elif species.motif == "ring":
        motif = (dist <= mr) & (dist >= 0.5 * mr)
    elif species.motif == "bar":
        motif = head & (np.abs(du * st - dv * ct) <= 0.3 * hr)
    else:
        motif = head & ((np.abs(du) <= 0.25 * hr) | (np.abs(dv) <= 0.25 * hr))
    img[motif] = np.array(species.head)

    fg = body | tail | head
    rows, cols = np.nonzero(fg)
    box = BBox(int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max()))
    return np.clip(img, 0, 1).astype(np.float32), box


def synthetic_pools(n_classes: int = 15, images_per_class: int = 60, size: int = 84,
                    seed: int = 0) -> dict[str, list[Image]]:
    """In-memory dataset: class name -> images (no global labels assigned)."""
    rng = np.random.default_rng(seed)
    pools = {}
    for k in range(n_classes):
        species = make_species(rng)
        name = f"species_{k:03d}"
        pools[name] = []
        for _ in range(images_per_class):
            pixels, box = render_instance(species, rng, size)
            pools[name].append(Image(pixels, gt_box=box, class_name=name))
    return pools


def make_synthetic(root, n_classes: int = 15, images_per_class: int = 60, size: int = 84,
                   seed: int = 0, split_counts: tuple[int, int, int] | None = None) -> SplitSpec:
    """Write the synthetic dataset in the standard directory layout.

    The default split keeps a third of the classes as novel and has no
    validation classes (10/0/5 for 15 classes).
    """
    if split_counts is None:
        split_counts = (n_classes - n_classes // 3, 0, n_classes // 3)
    if sum(split_counts) > n_classes:
        raise ValueError(f"split {split_counts} needs more than {n_classes} classes")
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    pools = synthetic_pools(n_classes, images_per_class, size, seed)
    lines = []
    for name, images in pools.items():
        (root / name).mkdir(exist_ok=True)
        for i, im in enumerate(images):
            fname = f"{i:04d}.png"
            PILImage.fromarray(np.round(im.pixels * 255).astype(np.uint8)).save(root / name / fname)
            b = im.gt_box
            lines.append(f"{name}/{fname} {b.col_min} {b.row_min} {b.width} {b.height}\n")
    (root / "boxes.txt").write_text("".join(lines))
    names = sorted(pools)
    n_base, n_val, n_novel = split_counts
    split = SplitSpec(
        "synthetic",
        tuple(names[:n_base]),
        tuple(names[n_base:n_base + n_val]),
        tuple(names[n_base + n_val:n_base + n_val + n_novel]),
    )
    write_split_files(split, root / "splits")
    return split


def blob_image(rng: np.random.Generator, size: int = 84):
    """A single noise-textured disc on a flat background.

    Returns (pixels, (centroid_row, centroid_col)).
    """
    img = np.empty((size, size, 3))
    img[:] = rng.uniform(0.2, 0.8, 3)
    radius = rng.uniform(0.08, 0.2) * size
    cy, cx = rng.uniform(radius, size - radius, 2)
    yy, xx = np.mgrid[0:size, 0:size]
    disc = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2
    img[disc] = rng.uniform(0, 1, (int(disc.sum()), 3))
    rows, cols = np.nonzero(disc)
    return img.astype(np.float32), (float(rows.mean()), float(cols.mean()))
