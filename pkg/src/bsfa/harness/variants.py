"""Ablation variants as sets of pipeline toggles.

Toggles: ``local`` (local descriptors instead of pooled vectors), ``raw`` and
``refined`` (which stages feed the similarity; ``refined`` implies BAS), ``foa``
(alignment before comparing) and ``erasing`` (attentive erasing in training).

======== ===== === ======= === =======
variant  local raw refined foa erasing
======== ===== === ======= === =======
B0             x
B1       x     x
B2       x         x
B3       x     x   x
C0             x   x
C1       x     x   x
C2       x     x   x       x
C3       x     x   x       x   x
C4       x     x           x   x
======== ===== === ======= === =======

B3 and C1 are the same model under two names.
``full`` is C3; ``bas_twice`` runs BAS on its own output once more; ``with_bb``
is C3 on images cropped to their ground-truth boxes.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

from ..pipeline import PipelineFlags
from .config import TrainConfig

_T, _F = True, False
VARIANTS: dict[str, PipelineFlags] = {
    "B0": PipelineFlags(use_local=_F, use_raw=_T, use_refined=_F, use_foa=_F, use_erasing=_F),
    "B1": PipelineFlags(use_local=_T, use_raw=_T, use_refined=_F, use_foa=_F, use_erasing=_F),
    "B2": PipelineFlags(use_local=_T, use_raw=_F, use_refined=_T, use_foa=_F, use_erasing=_F),
    "B3": PipelineFlags(use_local=_T, use_raw=_T, use_refined=_T, use_foa=_F, use_erasing=_F),
    "C0": PipelineFlags(use_local=_F, use_raw=_T, use_refined=_T, use_foa=_F, use_erasing=_F),
    "C1": PipelineFlags(use_local=_T, use_raw=_T, use_refined=_T, use_foa=_F, use_erasing=_F),
    "C2": PipelineFlags(use_local=_T, use_raw=_T, use_refined=_T, use_foa=_T, use_erasing=_F),
    "C3": PipelineFlags(use_local=_T, use_raw=_T, use_refined=_T, use_foa=_T, use_erasing=_T),
    "C4": PipelineFlags(use_local=_T, use_raw=_T, use_refined=_F, use_foa=_T, use_erasing=_T),
}
VARIANTS["full"] = VARIANTS["C3"]
VARIANTS["bas_twice"] = PipelineFlags(bas_passes=2)
VARIANTS["with_bb"] = VARIANTS["C3"]

TABLE_VARIANTS = ("B0", "B1", "B2", "B3", "C0", "C1", "C2", "C3", "C4")


@dataclass(frozen=True)
class AblationSpec:
    variant: str

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; known: {sorted(VARIANTS)}")

    @property
    def flags(self) -> PipelineFlags:
        return VARIANTS[self.variant]

    @property
    def use_gt_box(self) -> bool:
        return self.variant == "with_bb"

    def enabled(self) -> frozenset[str]:
        f = self.flags
        names = {"local": f.use_local, "raw": f.use_raw, "refined": f.use_refined,
                 "foa": f.use_foa, "erasing": f.use_erasing}
        return frozenset(k for k, v in names.items() if v)


def flags_for(cfg: TrainConfig) -> PipelineFlags:
    return AblationSpec(cfg.variant).flags


def variant_config(cfg: TrainConfig, variant: str) -> TrainConfig:
    spec = AblationSpec(variant)
    out = copy.deepcopy(cfg)
    out.variant = variant
    if spec.use_gt_box:
        out.data.use_gt_box = True
    return out
