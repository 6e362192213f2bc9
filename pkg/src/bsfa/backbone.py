"""Shared feature extractors and the two global classifier heads.

The same extractor parameters serve the raw and the refined image; the only
stage-specific parameters are the two bias-free linear heads.
"""
from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

ARCHITECTURES = ("conv64", "resnet12", "resnet18-like", "tiny-test")


class ConfigurationError(ValueError):
    pass


@dataclass
class BackboneConfig:
    architecture: str = "resnet12"
    input_size: int = 84
    drop_last_pool: bool = True

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigurationError(
                f"unknown architecture {self.architecture!r}; expected one of {ARCHITECTURES}"
            )
        if self.input_size <= 0:
            raise ConfigurationError("input_size must be positive")

    @property
    def output_shape(self) -> tuple[int, int, int]:
        """(c, h, w) produced for an input of ``input_size`` pixels."""
        return _probe_shape(build_extractor(self), self.input_size)

    @property
    def output_channels(self) -> int:
        return self.output_shape[0]


def _conv_bn(cin, cout, stride=1):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(cout),
    )


class TinyExtractor(nn.Module):
    """Two conv layers, 8 channels, 11x11 output on 84x84 input. For tests."""

    def __init__(self, channels=8):
        super().__init__()
        self.conv1 = nn.Conv2d(3, channels, 3, stride=2, padding=1)
        self.bn1 = nn.BatchNorm2d(channels)
        self.pool = nn.MaxPool2d(2)
        self.conv2 = nn.Conv2d(channels, channels, 3, stride=2, padding=1)
        self.bn2 = nn.BatchNorm2d(channels)
        self.relu = nn.ReLU()

    def forward(self, x):
        x = self.pool(self.relu(self.bn1(self.conv1(x))))
        return self.relu(self.bn2(self.conv2(x)))


class Conv64(nn.Module):
    def __init__(self, drop_last_pool=True):
        super().__init__()
        layers = []
        cin = 3
        for i in range(4):
            layers += [_conv_bn(cin, 64), nn.ReLU()]
            if i < 3 or not drop_last_pool:
                layers.append(nn.MaxPool2d(2))
            cin = 64
        self.encoder = nn.Sequential(*layers)

    def forward(self, x):
        return self.encoder(x)


class ResNet12Block(nn.Module):
    def __init__(self, cin, cout, pool=True):
        super().__init__()
        self.conv1 = _conv_bn(cin, cout)
        self.conv2 = _conv_bn(cout, cout)
        self.conv3 = _conv_bn(cout, cout)
        self.shortcut = nn.Sequential(nn.Conv2d(cin, cout, 1, bias=False), nn.BatchNorm2d(cout))
        self.relu = nn.ReLU()
        # ceil_mode keeps 21 -> 11 so the last kept block lands on 11x11
        self.pool = nn.MaxPool2d(2, ceil_mode=True) if pool else nn.Identity()

    def forward(self, x):
        out = self.relu(self.conv1(x))
        out = self.relu(self.conv2(out))
        out = self.conv3(out)
        return self.pool(self.relu(out + self.shortcut(x)))


class ResNet12(nn.Module):
    def __init__(self, widths=(64, 128, 256, 512), drop_last_pool=True):
        super().__init__()
        blocks = []
        cin = 3
        for i, w in enumerate(widths):
            last = i == len(widths) - 1
            blocks.append(ResNet12Block(cin, w, pool=not (last and drop_last_pool)))
            cin = w
        self.blocks = nn.Sequential(*blocks)

    def forward(self, x):
        return self.blocks(x)


class BasicBlock(nn.Module):
    def __init__(self, cin, cout, stride=1):
        super().__init__()
        self.conv1 = _conv_bn(cin, cout, stride)
        self.conv2 = _conv_bn(cout, cout)
        self.relu = nn.ReLU()
        self.shortcut = nn.Identity()
        if stride != 1 or cin != cout:
            self.shortcut = nn.Sequential(
                nn.Conv2d(cin, cout, 1, stride=stride, bias=False), nn.BatchNorm2d(cout)
            )

    def forward(self, x):
        out = self.relu(self.conv1(x))
        return self.relu(self.conv2(out) + self.shortcut(x))


class ResNet18Like(nn.Module):
    """ResNet-18 layout with a small-image stem; last stage keeps resolution."""

    def __init__(self, drop_last_pool=True):
        super().__init__()
        self.stem = nn.Sequential(_conv_bn(3, 64, stride=2), nn.ReLU())
        strides = (1, 2, 2, 1 if drop_last_pool else 2)
        layers = []
        cin = 64
        for w, s in zip((64, 128, 256, 512), strides):
            layers += [BasicBlock(cin, w, s), BasicBlock(w, w)]
            cin = w
        self.layers = nn.Sequential(*layers)

    def forward(self, x):
        return self.layers(self.stem(x))


def _probe_shape(extractor: nn.Module, size: int) -> tuple[int, int, int]:
    was_training = extractor.training
    extractor.eval()
    with torch.no_grad():
        out = extractor(torch.zeros(1, 3, size, size))
    extractor.train(was_training)
    return tuple(out.shape[1:])


def build_extractor(cfg: BackboneConfig) -> nn.Module:
    if cfg.architecture == "tiny-test":
        return TinyExtractor()
    if cfg.architecture == "conv64":
        return Conv64(cfg.drop_last_pool)
    if cfg.architecture == "resnet12":
        return ResNet12(drop_last_pool=cfg.drop_last_pool)
    return ResNet18Like(cfg.drop_last_pool)


class TwoStageNet(nn.Module):
    """Shared extractor plus the raw-stage and refined-stage classifier heads."""

    def __init__(self, cfg: BackboneConfig, n_base_classes: int):
        super().__init__()
        self.config = cfg
        self.n_base_classes = n_base_classes
        self.extractor = build_extractor(cfg)
        c = _probe_shape(self.extractor, cfg.input_size)[0]
        self.head_raw = nn.Linear(c, n_base_classes, bias=False)
        self.head_refined = nn.Linear(c, n_base_classes, bias=False)

    def forward(self, x):
        return extract(x, self)

    def head(self, stage: str) -> nn.Linear:
        return self.head_raw if stage == "raw" else self.head_refined


def as_batch(images) -> torch.Tensor:
    """Stack H x W x 3 arrays (or one such array) into a B x 3 x H x W float tensor."""
    if isinstance(images, torch.Tensor):
        return images if images.dim() == 4 else images.unsqueeze(0)
    arr = np.asarray(images, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2)))


def extract(images, net: TwoStageNet) -> torch.Tensor:
    """Run the shared extractor. Accepts B x 3 x S x S tensors or S x S x 3 arrays."""
    x = as_batch(images)
    s = net.config.input_size
    if x.dim() != 4 or x.shape[1] != 3 or x.shape[2] != s or x.shape[3] != s:
        raise ConfigurationError(
            f"expected input of shape (B, 3, {s}, {s}), got {tuple(x.shape)}"
        )
    param = next(net.extractor.parameters())
    return net.extractor(x.to(param.dtype))


def gap(F: torch.Tensor) -> torch.Tensor:
    """Spatial mean per channel; works on (c,h,w) or (..., c, h, w)."""
    return F.mean(dim=(-2, -1))


def classify_global(F: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """Logits ``W @ gap(F)``; no bias and no softmax."""
    pooled = gap(F)
    if weights.shape[-1] != pooled.shape[-1]:
        raise ValueError(
            f"head expects {weights.shape[-1]} channels, feature map has {pooled.shape[-1]}"
        )
    return pooled @ weights.T


def variance_features(image: np.ndarray, grid: int = 11) -> np.ndarray:
    """Parameter-free stand-in extractor: per-cell, per-channel standard deviation.

    Cell (i, j) covers the same pixel span that ``bas.to_image_box`` assigns to it,
    so textured regions light up and flat regions read zero.
    """
    img = np.asarray(image, dtype=np.float64)
    H, W = img.shape[:2]
    out = np.zeros((img.shape[2], grid, grid))
    for i in range(grid):
        r0, r1 = (i * H) // grid, -(-((i + 1) * H) // grid)
        for j in range(grid):
            c0, c1 = (j * W) // grid, -(-((j + 1) * W) // grid)
            out[:, i, j] = img[r0:r1, c0:c1].reshape(-1, img.shape[2]).std(axis=0)
    return out


# Checkpoints are .npz archives: one array per state-dict entry plus a
# "__meta__" JSON string carrying the backbone config and head size.
def save_checkpoint(path, net: TwoStageNet, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {k: v.detach().cpu().numpy() for k, v in net.state_dict().items()}
    meta = {
        "backbone": asdict(net.config),
        "n_base_classes": net.n_base_classes,
        "extra": extra or {},
    }
    arrays["__meta__"] = np.array(json.dumps(meta))
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    path.write_bytes(buf.getvalue())
    return path


def load_checkpoint(path) -> tuple[TwoStageNet, dict]:
    path = Path(path)
    try:
        archive = np.load(path, allow_pickle=False)
        meta = json.loads(str(archive["__meta__"]))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigurationError(f"unreadable checkpoint {path}: {exc}") from exc
    net = TwoStageNet(BackboneConfig(**meta["backbone"]), meta["n_base_classes"])
    state = {k: torch.from_numpy(archive[k]) for k in archive.files if k != "__meta__"}
    net.load_state_dict(state)
    return net, meta.get("extra", {})
