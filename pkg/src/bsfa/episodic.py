"""Episode sampling, prototypes, two-stage score fusion and evaluation."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
import torch

from .alignment import score
from .data import Image, Pool
from .objective import LossWeights, episode_logits


class InsufficientPoolError(ValueError):
    pass


@dataclass
class Episode:
    support: list[Image]  # class-major: K images of class 0, then class 1, ...
    support_labels: np.ndarray
    query: list[Image]
    query_labels: np.ndarray
    n_way: int
    k_shot: int
    classes: tuple[str, ...] = ()

    @property
    def queries_per_class(self) -> int:
        return len(self.query) // self.n_way


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_episode(pool: Pool, n_way: int, k_shot: int, queries_per_class: int,
                   rng_seed=None) -> Episode:
    """Draw N classes, then K support and q query images per class, all without replacement."""
    rng = _rng(rng_seed)
    names = sorted(pool)
    if len(names) < n_way:
        raise InsufficientPoolError(f"pool has {len(names)} classes, episode needs {n_way}")
    need = k_shot + queries_per_class
    for name in names:
        if len(pool[name]) < need:
            raise InsufficientPoolError(
                f"class {name!r} has {len(pool[name])} images, episode needs {need}"
            )
    chosen = [names[i] for i in rng.choice(len(names), n_way, replace=False)]
    support, query = [], []
    for name in chosen:
        idx = rng.choice(len(pool[name]), need, replace=False)
        images = [pool[name][i] for i in idx]
        support += images[:k_shot]
        query += images[k_shot:]
    return Episode(
        support=support,
        support_labels=np.repeat(np.arange(n_way), k_shot),
        query=query,
        query_labels=np.repeat(np.arange(n_way), queries_per_class),
        n_way=n_way,
        k_shot=k_shot,
        classes=tuple(chosen),
    )


def class_means(features: torch.Tensor, n_way: int, k_shot: int) -> torch.Tensor:
    """(N*K, ...) class-major stack -> (N, ...) per-class means."""
    return features.reshape(n_way, k_shot, *features.shape[1:]).mean(dim=1)


@dataclass
class PrototypeSet:
    raw: torch.Tensor | None
    refined: torch.Tensor | None


def build_prototypes(support_raw, support_refined, n_way: int, k_shot: int) -> PrototypeSet:
    if k_shot < 1:
        raise ValueError("k_shot must be at least 1")
    return PrototypeSet(
        raw=None if support_raw is None else class_means(support_raw, n_way, k_shot),
        refined=None if support_refined is None else class_means(support_refined, n_way, k_shot),
    )


def predict(query_raw, query_refined, protos: PrototypeSet, w: LossWeights,
            scorer=None) -> tuple[torch.Tensor, torch.Tensor]:
    """Fuse per-stage similarities as alpha*raw + beta*refined and take the argmax.

    Inputs are (Q, c, h, w) stacks; a stage whose features are ``None`` adds
    nothing. Returns (labels (Q,), fused scores (Q, N)). ``torch.argmax``
    returns the first maximum, so ties go to the smallest label.
    """
    scorer = scorer or partial(score, tau=w.tau)
    fused = 0
    if query_raw is not None and protos.raw is not None:
        fused = fused + w.alpha * episode_logits(query_raw, protos.raw, w, scorer)
    if query_refined is not None and protos.refined is not None:
        fused = fused + w.beta * episode_logits(query_refined, protos.refined, w, scorer)
    if not isinstance(fused, torch.Tensor):
        raise ValueError("no stage available to score")
    return fused.argmax(dim=-1), fused


@dataclass
class EvalReport:
    episode_accuracies: list[float]
    mean_accuracy: float
    ci95_halfwidth: float
    n_episodes: int
    n_way: int = 5
    k_shot: int = 1
    seed: int | None = None
    config_digest: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self, path=None, include_episodes: bool = True) -> str:
        d = asdict(self)
        if not include_episodes:
            d.pop("episode_accuracies")
        text = json.dumps(d, indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def ci95_halfwidth(accuracies) -> float:
    """1.96 * sample std (ddof=1) / sqrt(n); zero for fewer than two episodes."""
    acc = np.asarray(accuracies, dtype=np.float64)
    if acc.size < 2:
        return 0.0
    return float(1.96 * acc.std(ddof=1) / math.sqrt(acc.size))


def summarize(accuracies, **meta) -> EvalReport:
    acc = [float(a) for a in accuracies]
    return EvalReport(
        episode_accuracies=acc,
        mean_accuracy=float(np.mean(acc)) if acc else float("nan"),
        ci95_halfwidth=ci95_halfwidth(acc),
        n_episodes=len(acc),
        **meta,
    )


def evaluate(model, pool: Pool, n_episodes: int = 2000, n_way: int = 5, k_shot: int = 1,
             queries_per_class: int = 15, seed: int = 0, base_classes=(),
             config_digest: str = "") -> EvalReport:
    """Mean per-episode accuracy with a 95% interval.

    ``model`` needs a ``predict_episode(episode) -> labels`` method.
    """
    overlap = set(pool) & set(base_classes)
    if overlap:
        raise ValueError(f"evaluation pool contains base classes: {sorted(overlap)}")
    rng = np.random.default_rng(seed)
    accs = []
    for _ in range(n_episodes):
        episode = sample_episode(pool, n_way, k_shot, queries_per_class, rng)
        pred = np.asarray(model.predict_episode(episode))
        accs.append(float(np.mean(pred == episode.query_labels)))
    return summarize(accs, n_way=n_way, k_shot=k_shot, seed=seed, config_digest=config_digest)
