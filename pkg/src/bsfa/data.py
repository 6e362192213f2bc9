"""Dataset layout, class splits and image preprocessing.

On-disk layout::

    root/
      <class_name>/<image files>
      boxes.txt            optional; "<class>/<file> x y w h" per line, pixels,
                           origin top-left
      splits/base.txt      optional; one class name per line
      splits/val.txt
      splits/novel.txt

Without split files, a named preset (cub, dogs, cars, synthetic) splits the
sorted class folders at random with a fixed seed using the preset's counts.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .bas import BBox, crop_and_zoom, resize_bilinear

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}

# base / val / novel class counts
PRESETS = {
    "cub": (100, 50, 50),
    "dogs": (70, 20, 30),
    "cars": (130, 17, 49),
    "synthetic": (10, 0, 5),
}


class DatasetError(ValueError):
    pass


@dataclass
class Image:
    pixels: np.ndarray  # H x W x 3, float32 in [0, 1]
    global_label: int | None = None
    gt_box: BBox | None = None
    class_name: str = ""
    path: str | None = None


Pool = dict[str, list[Image]]


@dataclass(frozen=True)
class SplitSpec:
    dataset_id: str
    base_classes: tuple[str, ...]
    val_classes: tuple[str, ...] = ()
    novel_classes: tuple[str, ...] = ()

    def __post_init__(self):
        seen: dict[str, str] = {}
        for part in ("base_classes", "val_classes", "novel_classes"):
            names = tuple(getattr(self, part))
            object.__setattr__(self, part, names)
            for name in names:
                if name in seen:
                    raise DatasetError(
                        f"class {name!r} appears in both {seen[name]} and {part}"
                    )
                seen[name] = part

    @property
    def counts(self) -> tuple[int, int, int]:
        return len(self.base_classes), len(self.val_classes), len(self.novel_classes)

    def base_label_map(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(sorted(self.base_classes))}


def preset_split(preset: str, class_names, seed: int = 0) -> SplitSpec:
    if preset not in PRESETS:
        raise DatasetError(f"unknown split preset {preset!r}; known: {sorted(PRESETS)}")
    n_base, n_val, n_novel = PRESETS[preset]
    names = sorted(class_names)
    if len(names) < n_base + n_val + n_novel:
        raise DatasetError(
            f"preset {preset!r} needs {n_base + n_val + n_novel} classes, found {len(names)}"
        )
    order = np.random.default_rng(seed).permutation(len(names))
    picked = [names[i] for i in order]
    return SplitSpec(
        preset,
        tuple(sorted(picked[:n_base])),
        tuple(sorted(picked[n_base:n_base + n_val])),
        tuple(sorted(picked[n_base + n_val:n_base + n_val + n_novel])),
    )


def read_split_files(directory, dataset_id: str = "custom") -> SplitSpec:
    directory = Path(directory)
    parts = []
    for name in ("base", "val", "novel"):
        path = directory / f"{name}.txt"
        if not path.exists():
            raise DatasetError(f"missing split file {path}")
        parts.append(tuple(l.strip() for l in path.read_text().splitlines() if l.strip()))
    return SplitSpec(dataset_id, *parts)


def write_split_files(split: SplitSpec, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, classes in zip(("base", "val", "novel"),
                             (split.base_classes, split.val_classes, split.novel_classes)):
        (directory / f"{name}.txt").write_text("".join(f"{c}\n" for c in classes))


def resolve_split(root, preset: str | None = None, seed: int = 0) -> SplitSpec:
    """Split files under ``root/splits`` win; otherwise apply ``preset``."""
    root = Path(root)
    if (root / "splits" / "base.txt").exists():
        return read_split_files(root / "splits", preset or root.name)
    if preset is None:
        raise DatasetError(f"{root} has no splits/ directory and no preset was given")
    classes = [p.name for p in root.iterdir() if p.is_dir() and p.name != "splits"]
    return preset_split(preset, classes, seed)


def read_boxes(path) -> dict[str, BBox]:
    """Parse ``<relpath> x y w h`` lines into inclusive pixel boxes."""
    boxes = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 5:
            raise DatasetError(f"{path}:{lineno}: expected 'file x y w h'")
        x, y, w, h = (float(v) for v in parts[1:])
        boxes[parts[0]] = BBox(int(round(y)), int(round(x)),
                               int(round(y + h)) - 1, int(round(x + w)) - 1)
    return boxes


def decode_image(path) -> np.ndarray:
    try:
        with PILImage.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except (OSError, ValueError) as exc:
        raise DatasetError(f"cannot read image {path}: {exc}") from exc


def load_dataset(root, split: SplitSpec) -> tuple[Pool, Pool, Pool]:
    """Decode every image of the three splits; base images get global labels."""
    root = Path(root)
    boxes = read_boxes(root / "boxes.txt") if (root / "boxes.txt").exists() else {}
    labels = split.base_label_map()
    pools = []
    for classes in (split.base_classes, split.val_classes, split.novel_classes):
        pool: Pool = {}
        for name in classes:
            folder = root / name
            if not folder.is_dir():
                raise DatasetError(f"class folder missing: {folder}")
            files = sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
            pool[name] = [
                Image(
                    decode_image(p),
                    global_label=labels.get(name),
                    gt_box=boxes.get(f"{name}/{p.name}"),
                    class_name=name,
                    path=str(p),
                )
                for p in files
            ]
        pools.append(pool)
    return tuple(pools)


@dataclass
class PreprocessConfig:
    target_size: int = 84
    random_crop: bool = True
    horizontal_flip: bool = True
    use_gt_box: bool = False
    crop_scale: tuple[float, float] = field(default=(0.7, 1.0))

    def __post_init__(self):
        if self.target_size <= 0:
            raise ValueError("target_size must be positive")


def hflip(pixels: np.ndarray) -> np.ndarray:
    return pixels[:, ::-1]


def random_resized_crop(pixels: np.ndarray, scale, size: int, rng) -> np.ndarray:
    H, W = pixels.shape[:2]
    frac = rng.uniform(*scale)
    ch, cw = max(1, int(round(H * np.sqrt(frac)))), max(1, int(round(W * np.sqrt(frac))))
    r0 = int(rng.integers(0, H - ch + 1))
    c0 = int(rng.integers(0, W - cw + 1))
    return crop_and_zoom(pixels, BBox(r0, c0, r0 + ch - 1, c0 + cw - 1), size)


def preprocess(image: Image, cfg: PreprocessConfig, rng=None, train: bool = False) -> Image:
    """Optional ground-truth crop, then augmentation (train) or plain resize (eval)."""
    pixels = np.asarray(image.pixels, dtype=np.float32)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise DatasetError(f"expected an H x W x 3 image, got {pixels.shape} ({image.path})")
    if cfg.use_gt_box and image.gt_box is not None:
        b = image.gt_box
        pixels = crop_and_zoom(pixels, b, (b.height, b.width))
    size = cfg.target_size
    if train:
        rng = rng if rng is not None else np.random.default_rng()
        if cfg.random_crop:
            pixels = random_resized_crop(pixels, cfg.crop_scale, size, rng)
        else:
            pixels = resize_bilinear(pixels, size)
        if cfg.horizontal_flip and rng.random() < 0.5:
            pixels = hflip(pixels)
    elif pixels.shape[:2] != (size, size):
        pixels = resize_bilinear(pixels, size)
    pixels = np.clip(pixels, 0.0, 1.0).astype(np.float32)
    return replace(image, pixels=pixels, gt_box=None)
