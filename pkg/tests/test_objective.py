import math

import numpy as np
import pytest
import torch

from bsfa.objective import LossWeights, combine, episode_logits, global_ce, local_fewshot_loss
from bsfa.pipeline import PipelineFlags, feature_objective

from oracles import ce_loop, central_difference, max_relative_error


def test_global_ce():
    assert global_ce(torch.tensor([10.0, 0, 0, 0, 0]), 0).item() < 0.01
    assert abs(global_ce(torch.zeros(7), 3).item() - math.log(7)) < 1e-6
    logits = [0.3, -1.2, 2.0]
    assert abs(global_ce(torch.tensor(logits, dtype=torch.float64), 1).item() - ce_loop(logits, 1)) < 1e-12
    with pytest.raises(ValueError):
        global_ce(torch.zeros(3), 3)


def _parallel_map(rng, c=4):
    return torch.from_numpy(rng.uniform(0.1, 1, (c, 1, 1)) * rng.uniform(0.1, 1, (1, 3, 3)))


def test_local_loss_two_class_example(rng):
    # query on channels 0-1, prototype 1 on channels 2-3: orthogonal at every cell
    q = _parallel_map(rng)
    q[2:] = 0
    other = torch.zeros_like(q)
    other[2:] = torch.from_numpy(rng.uniform(0.1, 1, (2, 3, 3)))
    protos = torch.stack([q, other])
    w = LossWeights(tau=10.0)
    loss = local_fewshot_loss(q[None], protos, [0], w)
    expected = -math.log(math.exp(10) / (math.exp(10) + 1))
    assert abs(loss.item() - expected) < 1e-9
    assert loss.item() < 1e-4


def test_equal_prototypes_give_log_n(rng):
    P = torch.from_numpy(rng.normal(size=(4, 3, 3)))
    protos = torch.stack([P] * 5)
    q = torch.from_numpy(rng.normal(size=(2, 4, 3, 3)))
    loss = local_fewshot_loss(q, protos, [1, 4], LossWeights())
    assert abs(loss.item() - math.log(5)) < 1e-12


def test_local_loss_decreases_as_query_approaches_prototype(rng):
    target = _parallel_map(rng)
    other = torch.from_numpy(rng.uniform(size=(4, 3, 3)))
    start = torch.from_numpy(rng.uniform(size=(4, 3, 3)))
    protos = torch.stack([target, other])
    losses = []
    for a in np.linspace(0, 1, 6):
        q = (1 - a) * start + a * target
        losses.append(local_fewshot_loss(q[None], protos, [0], LossWeights()).item())
    assert all(x > y for x, y in zip(losses, losses[1:]))


def test_negative_sign_flips_logits(rng):
    q = torch.from_numpy(rng.normal(size=(2, 4, 2, 2)))
    P = torch.from_numpy(rng.normal(size=(3, 4, 2, 2)))
    pos = episode_logits(q, P, LossWeights())
    neg = LossWeights(softmax_sign="negative_similarity")
    expected = torch.nn.functional.cross_entropy(-pos, torch.tensor([0, 2]))
    assert torch.allclose(local_fewshot_loss(q, P, [0, 2], neg), expected)


def test_local_loss_errors():
    with pytest.raises(ValueError):
        local_fewshot_loss(torch.zeros(1, 4, 3, 3), torch.zeros(2, 4, 2, 2), [0], LossWeights())
    with pytest.raises(ValueError):
        local_fewshot_loss(torch.ones(1, 4, 2, 2), torch.ones(2, 4, 2, 2), [2], LossWeights())
    with pytest.raises(ValueError):
        LossWeights(softmax_sign="sideways")


def test_combine():
    b = combine(2.0, 2.0, 1.0, 1.0, LossWeights(alpha=0.5, beta=0.5, lam=0.1))
    assert b.global_total == 2.0
    b = combine(1.0, 3.0, 4.0, 4.0, LossWeights(alpha=0.5, beta=0.5, lam=0.0))
    assert b.total == b.global_total
    b = combine(1.0, 3.0, 5.0, 5.0, LossWeights(alpha=0.3, beta=0.7, lam=0.1))
    assert b.local_total == pytest.approx(5.0)
    assert b.total == pytest.approx(2.9, abs=1e-12)


def small_problem(seed=0, c=4, h=3, N=2, K=1, G=3, qpc=1):
    rng = np.random.default_rng(seed)
    n = N * K + N * qpc
    raw = rng.uniform(0.1, 1.0, (n, c, h, h))
    refined = rng.uniform(0.1, 1.0, (n, c, h, h))
    heads = rng.normal(size=(2, G, c))
    query_labels = np.repeat(np.arange(N), qpc)
    global_labels = rng.integers(0, G, n)
    return raw, refined, heads, query_labels, global_labels


def test_objective_gradient_matches_finite_differences():
    raw, refined, heads, ql, gl = small_problem()
    w = LossWeights(lam=0.5)
    from bsfa.erasing import erase_mask

    masks = erase_mask(torch.from_numpy(raw), 0.85)

    def total(r, f):
        return feature_objective(r, f, 2, 1, ql, gl, torch.from_numpy(heads[0]),
                                 torch.from_numpy(heads[1]), w, PipelineFlags(), masks).total

    r = torch.from_numpy(raw).requires_grad_()
    f = torch.from_numpy(refined).requires_grad_()
    total(r, f).backward()
    num_r = central_difference(lambda x: total(torch.from_numpy(x), torch.from_numpy(refined)).item(), raw)
    num_f = central_difference(lambda x: total(torch.from_numpy(raw), torch.from_numpy(x)).item(), refined)
    assert max_relative_error(r.grad.numpy(), num_r) < 1e-4
    assert max_relative_error(f.grad.numpy(), num_f) < 1e-4


def test_breakdown_identity():
    raw, refined, heads, ql, gl = small_problem(seed=2)
    w = LossWeights(alpha=0.3, beta=0.7, lam=0.2)
    b = feature_objective(torch.from_numpy(raw), torch.from_numpy(refined), 2, 1, ql, gl,
                          torch.from_numpy(heads[0]), torch.from_numpy(heads[1]), w)
    assert abs(b.total - (b.global_total + 0.2 * b.local_total)) < 1e-12
    assert abs(b.global_total - (0.3 * b.global_raw + 0.7 * b.global_refined)) < 1e-12
    rec = b.as_record()
    assert set(rec) == {"global_raw", "global_refined", "local_raw", "local_refined",
                        "global_total", "local_total", "total"}
