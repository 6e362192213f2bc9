"""Training losses for both stages and their weighted combination."""
from __future__ import annotations

from dataclasses import dataclass, fields
from functools import partial

import torch
import torch.nn.functional as F

from .alignment import score

SIGNS = {"positive_similarity": 1.0, "negative_similarity": -1.0}


@dataclass
class LossWeights:
    alpha: float = 0.5
    beta: float = 0.5
    lam: float = 0.1
    tau: float = 10.0
    softmax_sign: str = "positive_similarity"

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.softmax_sign not in SIGNS:
            raise ValueError(f"softmax_sign must be one of {sorted(SIGNS)}")

    @property
    def sign(self) -> float:
        return SIGNS[self.softmax_sign]


@dataclass
class LossBreakdown:
    global_raw: torch.Tensor | float
    global_refined: torch.Tensor | float
    local_raw: torch.Tensor | float
    local_refined: torch.Tensor | float
    global_total: torch.Tensor | float
    local_total: torch.Tensor | float
    total: torch.Tensor | float

    def as_record(self) -> dict[str, float]:
        return {f.name: float(torch.as_tensor(getattr(self, f.name)).detach()) for f in fields(self)}


def global_ce(logits: torch.Tensor, labels) -> torch.Tensor:
    """Mean cross-entropy over a batch of (B, G) logits."""
    labels = torch.as_tensor(labels, dtype=torch.long)
    if logits.dim() == 1:
        logits, labels = logits[None], labels.reshape(1)
    G = logits.shape[-1]
    if labels.numel() and (labels.min() < 0 or labels.max() >= G):
        raise ValueError(f"global label out of range [0, {G}): {labels.tolist()}")
    return F.cross_entropy(logits, labels)


def episode_logits(queries: torch.Tensor, prototypes: torch.Tensor, w: LossWeights,
                   scorer=None) -> torch.Tensor:
    """(Q, N) similarity logits of each query against each prototype."""
    scorer = scorer or partial(score, tau=w.tau)
    return scorer(queries.unsqueeze(1), prototypes.unsqueeze(0))


def local_fewshot_loss(queries: torch.Tensor, prototypes: torch.Tensor, labels,
                       w: LossWeights, scorer=None) -> torch.Tensor:
    """Mean over queries of -log softmax(sign * score) at the true prototype."""
    if queries.shape[1:] != prototypes.shape[1:]:
        raise ValueError(
            f"query maps {tuple(queries.shape[1:])} do not match prototypes {tuple(prototypes.shape[1:])}"
        )
    labels = torch.as_tensor(labels, dtype=torch.long)
    N = prototypes.shape[0]
    if labels.numel() and (labels.min() < 0 or labels.max() >= N):
        raise ValueError(f"episode label out of range [0, {N})")
    logits = w.sign * episode_logits(queries, prototypes, w, scorer)
    return F.cross_entropy(logits, labels)


def combine(global_raw, global_refined, local_raw, local_refined, w: LossWeights) -> LossBreakdown:
    global_total = w.alpha * global_raw + w.beta * global_refined
    local_total = w.alpha * local_raw + w.beta * local_refined
    return LossBreakdown(
        global_raw=global_raw,
        global_refined=global_refined,
        local_raw=local_raw,
        local_refined=local_refined,
        global_total=global_total,
        local_total=local_total,
        total=global_total + w.lam * local_total,
    )
