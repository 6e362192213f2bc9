"""
One training episode, term by term
==================================

A 5-way 1-shot episode is drawn from synthetic base classes and pushed through
both stages of an untrained network. The loss has a global part (classifying
every image among all base classes, raw and refined) and a local part (matching
queries to the episode's prototypes), mixed as

    total = (alpha * global_raw + beta * global_refined)
            + lambda * (alpha * local_raw + beta * local_refined)
"""
from dataclasses import replace

import numpy as np
import torch

from bsfa.backbone import BackboneConfig, TwoStageNet
from bsfa.data import PreprocessConfig
from bsfa.episodic import sample_episode
from bsfa.erasing import EraseConfig
from bsfa.objective import LossWeights
from bsfa.pipeline import PipelineFlags, episode_loss
from bsfa.synthetic import synthetic_pools

pools = synthetic_pools(n_classes=8, images_per_class=10, seed=1)
base = {n: [replace(im, global_label=i) for im in pools[n]] for i, n in enumerate(sorted(pools))}

rng = np.random.default_rng(0)
episode = sample_episode(base, n_way=5, k_shot=1, queries_per_class=3, rng_seed=rng)
print("classes:", episode.classes)
print("query labels:", episode.query_labels.tolist())

torch.manual_seed(0)
net = TwoStageNet(BackboneConfig("tiny-test"), n_base_classes=len(base))
w = LossWeights(alpha=0.5, beta=0.5, lam=0.1)
losses, (raw, refined) = episode_loss(net, episode, PipelineFlags(), w, EraseConfig(),
                                      PreprocessConfig(), rng)

for name, value in losses.as_record().items():
    print(f"{name:>15s} {value:.4f}")
check = losses.global_total + w.lam * losses.local_total
print("identity holds:", torch.isclose(losses.total, check).item())

# For reference, a uniform guess over 5 prototypes costs ln 5
print("ln 5 =", round(float(np.log(5)), 4))

losses.total.backward()
grad = sum(p.grad.norm() ** 2 for p in net.parameters() if p.grad is not None) ** 0.5
print("gradient norm", round(grad.item(), 4))
