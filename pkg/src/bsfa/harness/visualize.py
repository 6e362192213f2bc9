"""PNG panels of the foreground estimate for individual images.

Per input image ``<name>`` six files are written::

    <name>_1_raw_box.png            raw image with the BAS box outlined
    <name>_2_activation.png         channel-summed activation, colour-mapped
    <name>_3_mask.png               above-mean mask
    <name>_4_component.png          largest connected component
    <name>_5_refined.png            cropped and zoomed image
    <name>_6_refined_activation.png activation of the refined image

``with_erase=True`` adds ``<name>_7_erased.png``: the raw activation with the
attentive-erasing cells blacked out.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from matplotlib import colormaps
from PIL import Image as PILImage

from ..backbone import extract, load_checkpoint
from ..bas import BBox, crop_and_zoom, estimate_foreground, resize_bilinear
from ..data import Image, PreprocessConfig, decode_image, preprocess
from ..erasing import erase_mask

PANELS = ("raw_box", "activation", "mask", "component", "refined", "refined_activation")


def _to_png(arr: np.ndarray, path: Path) -> None:
    PILImage.fromarray(np.round(np.clip(arr, 0, 1) * 255).astype(np.uint8)).save(path)


def heatmap(A: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    span = A.max() - A.min()
    norm = (A - A.min()) / span if span > 0 else np.zeros_like(A)
    return colormaps["jet"](resize_bilinear(norm, size).clip(0, 1))[..., :3]


def _nearest(mask: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    H, W = size
    rows = (np.arange(H) * mask.shape[0]) // H
    cols = (np.arange(W) * mask.shape[1]) // W
    return np.repeat(mask[rows][:, cols][..., None].astype(np.float64), 3, axis=2)


def draw_box(x: np.ndarray, b: BBox, colour=(1.0, 0.0, 0.0)) -> np.ndarray:
    out = np.array(x, dtype=np.float64, copy=True)
    out[b.row_min, b.col_min:b.col_max + 1] = colour
    out[b.row_max, b.col_min:b.col_max + 1] = colour
    out[b.row_min:b.row_max + 1, b.col_min] = colour
    out[b.row_min:b.row_max + 1, b.col_max] = colour
    return out


def visualize_arrays(feature_fn, images, names, out_dir, with_erase: bool = False,
                     gamma: float = 0.85) -> list[dict]:
    """Write panels for H x W x 3 ``images`` using ``feature_fn(image) -> (c, h, w)``.

    Returns one record per image with its feature and image boxes and file paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for x, name in zip(images, names):
        x = np.asarray(x, dtype=np.float32)
        size = x.shape[:2]
        F = np.asarray(feature_fn(x))
        est = estimate_foreground(F, size)
        refined = crop_and_zoom(x, est.image_box, size)
        F_ref = np.asarray(feature_fn(refined))
        panels = {
            "raw_box": draw_box(x, est.image_box),
            "activation": heatmap(est.activation, size),
            "mask": _nearest(est.mask, size),
            "component": _nearest(est.component_mask, size),
            "refined": refined,
            "refined_activation": heatmap(F_ref.sum(axis=0), size),
        }
        paths = []
        for i, key in enumerate(PANELS, start=1):
            path = out_dir / f"{name}_{i}_{key}.png"
            _to_png(panels[key], path)
            paths.append(path)
        if with_erase:
            M = erase_mask(torch.as_tensor(F), gamma).numpy()
            erased = heatmap(est.activation, size) * (1 - _nearest(M, size))
            path = out_dir / f"{name}_7_erased.png"
            _to_png(erased, path)
            paths.append(path)
        records.append({"name": name, "feature_box": est.feature_box.as_tuple(),
                        "image_box": est.image_box.as_tuple(), "files": [str(p) for p in paths]})
    return records


def visualize(checkpoint, image_paths, out_dir, with_erase: bool = False,
              gamma: float = 0.85) -> list[dict]:
    """Load a checkpoint and write the panels for each image file."""
    net, _ = load_checkpoint(checkpoint)
    net.eval()
    pre = PreprocessConfig(target_size=net.config.input_size)
    images, names = [], []
    for p in image_paths:
        p = Path(p)
        images.append(preprocess(Image(decode_image(p), path=str(p)), pre).pixels)
        names.append(p.stem)

    @torch.no_grad()
    def feature_fn(x):
        return extract(x, net)[0].numpy()

    return visualize_arrays(feature_fn, images, names, out_dir, with_erase, gamma)
