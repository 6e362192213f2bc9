"""Attentive erasing of the most activated raw-stage feature cells."""
from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass
class EraseConfig:
    gamma: float = 0.85
    enabled_in_training: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")


def erase_mask(F: torch.Tensor, gamma: float) -> torch.Tensor:
    """Binary h x w mask of cells whose channel-summed activation exceeds gamma * max.

    Accepts (c, h, w) or batched (B, c, h, w); the mask is detached.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    att = F.detach().sum(dim=-3)
    peak = att.flatten(-2).max(dim=-1).values[..., None, None]
    return (att > gamma * peak).to(F.dtype)


def apply_erase(F: torch.Tensor, M: torch.Tensor) -> torch.Tensor:
    if F.shape[-2:] != M.shape[-2:]:
        raise ValueError(f"mask {tuple(M.shape)} does not match feature map {tuple(F.shape)}")
    return F * (1 - M).unsqueeze(-3)
