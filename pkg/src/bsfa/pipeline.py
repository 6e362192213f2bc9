"""Two-stage forward pass shared by training and inference.

raw image -> features -> (BAS box, detached) -> refined image -> features,
with the same extractor for both passes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np
import torch

from .alignment import global_score, score
from .backbone import TwoStageNet, classify_global, extract
from .bas import refine
from .data import Image, PreprocessConfig, preprocess
from .episodic import Episode, build_prototypes, class_means, predict
from .erasing import EraseConfig, apply_erase, erase_mask
from .objective import LossBreakdown, LossWeights, combine, global_ce, local_fewshot_loss


@dataclass(frozen=True)
class PipelineFlags:
    """Which parts of the model are switched on.

    ``use_refined`` implies BAS: the refined stage only exists through it.
    """

    use_local: bool = True  # local descriptors; False compares pooled vectors
    use_raw: bool = True
    use_refined: bool = True
    use_foa: bool = True
    use_erasing: bool = True
    bas_passes: int = 1

    @property
    def use_bas(self) -> bool:
        return self.use_refined

    def as_dict(self) -> dict:
        return {
            "local": self.use_local,
            "raw": self.use_raw,
            "refined": self.use_refined,
            "bas": self.use_bas,
            "foa": self.use_foa,
            "erasing": self.use_erasing,
            "bas_passes": self.bas_passes,
        }


def make_scorer(flags: PipelineFlags, w: LossWeights):
    if not flags.use_local:
        return partial(global_score, tau=w.tau)
    return partial(score, tau=w.tau, use_alignment=flags.use_foa)


def refine_batch(images: np.ndarray, features: torch.Tensor):
    """Refine every image in an (B, S, S, 3) stack from its own feature map."""
    feats = features.detach()
    out, estimates = [], []
    for x, F in zip(images, feats):
        xr, est = refine(x, F)
        out.append(xr)
        estimates.append(est)
    return np.stack(out).astype(np.float32), estimates


def two_stage_features(net: TwoStageNet, images: np.ndarray, flags: PipelineFlags):
    """Return (raw features, refined features or None, refined images or None)."""
    F = extract(images, net)
    if not flags.use_refined:
        return F, None, None
    refined_images, boxes_from = images, F
    for _ in range(flags.bas_passes):
        refined_images, _ = refine_batch(refined_images, boxes_from)
        boxes_from = extract(refined_images, net)
    return F, boxes_from, refined_images


def feature_objective(raw: torch.Tensor, refined: torch.Tensor | None, n_way: int, k_shot: int,
                      query_labels, global_labels, head_raw: torch.Tensor,
                      head_refined: torch.Tensor | None, w: LossWeights,
                      flags: PipelineFlags = PipelineFlags(),
                      erase_masks: torch.Tensor | None = None) -> LossBreakdown:
    """Total loss as a function of the feature maps of one episode.

    ``raw``/``refined`` stack the N*K class-major support maps followed by the
    query maps. ``global_labels`` cover every task member in that order.
    ``erase_masks`` (one per member) are constants applied before the raw head.
    """
    n_support = n_way * k_shot
    scorer = make_scorer(flags, w)
    zero = raw.new_zeros(())

    raw_for_head = raw if erase_masks is None else apply_erase(raw, erase_masks)
    global_raw = global_ce(classify_global(raw_for_head, head_raw), global_labels)
    local_raw = zero
    if flags.use_raw:
        protos = class_means(raw[:n_support], n_way, k_shot)
        local_raw = local_fewshot_loss(raw[n_support:], protos, query_labels, w, scorer)

    global_refined = local_refined = zero
    if refined is not None:
        global_refined = global_ce(classify_global(refined, head_refined), global_labels)
        protos = class_means(refined[:n_support], n_way, k_shot)
        local_refined = local_fewshot_loss(refined[n_support:], protos, query_labels, w, scorer)
    return combine(global_raw, global_refined, local_raw, local_refined, w)


def episode_images(episode: Episode, cfg: PreprocessConfig, rng=None, train=False) -> np.ndarray:
    members = list(episode.support) + list(episode.query)
    return np.stack([preprocess(im, cfg, rng, train).pixels for im in members])


def episode_loss(net: TwoStageNet, episode: Episode, flags: PipelineFlags, w: LossWeights,
                 erase: EraseConfig, pre: PreprocessConfig, rng=None):
    """One training forward pass over an episode sampled from the base split.

    Returns the loss breakdown and the (raw, refined) feature stacks.
    """
    images = episode_images(episode, pre, rng, train=True)
    raw, refined, _ = two_stage_features(net, images, flags)
    members = list(episode.support) + list(episode.query)
    if any(im.global_label is None for im in members):
        raise ValueError("training episodes must come from labelled base classes")
    global_labels = [im.global_label for im in members]
    masks = None
    if flags.use_erasing and erase.enabled_in_training:
        masks = erase_mask(raw, erase.gamma)
    losses = feature_objective(
        raw, refined, episode.n_way, episode.k_shot, episode.query_labels, global_labels,
        net.head_raw.weight, net.head_refined.weight, w, flags, masks,
    )
    return losses, (raw, refined)


class FewShotClassifier:
    """Inference wrapper: episode in, predicted query labels out. No heads, no erasing."""

    def __init__(self, net: TwoStageNet, flags: PipelineFlags = PipelineFlags(),
                 weights: LossWeights = LossWeights(), pre: PreprocessConfig | None = None):
        self.net = net
        self.flags = flags
        self.weights = weights
        self.pre = pre or PreprocessConfig(target_size=net.config.input_size)

    @torch.no_grad()
    def scores(self, episode: Episode) -> torch.Tensor:
        self.net.eval()
        images = episode_images(episode, self.pre, train=False)
        raw, refined, _ = two_stage_features(self.net, images, self.flags)
        n_support = episode.n_way * episode.k_shot
        protos = build_prototypes(
            raw[:n_support] if self.flags.use_raw else None,
            refined[:n_support] if refined is not None else None,
            episode.n_way, episode.k_shot,
        )
        _, fused = predict(
            raw[n_support:] if self.flags.use_raw else None,
            refined[n_support:] if refined is not None else None,
            protos, self.weights, make_scorer(self.flags, self.weights),
        )
        return fused

    def predict_episode(self, episode: Episode) -> np.ndarray:
        return self.scores(episode).argmax(dim=-1).numpy()

    @torch.no_grad()
    def embed(self, images: list[Image]) -> dict[str, np.ndarray]:
        """Pooled raw and refined feature vectors, e.g. as input to a 2-D projection."""
        self.net.eval()
        x = np.stack([preprocess(im, self.pre).pixels for im in images])
        raw, refined, _ = two_stage_features(self.net, x, self.flags)
        out = {"raw": raw.mean(dim=(-2, -1)).numpy()}
        if refined is not None:
            out["refined"] = refined.mean(dim=(-2, -1)).numpy()
        return out

