import numpy as np
import pytest
import torch

from bsfa.erasing import EraseConfig, apply_erase, erase_mask


def test_threshold_example():
    F = torch.tensor([[[10.0, 8.0], [1.0, 0.0]]])
    assert erase_mask(F, 0.85).tolist() == [[1.0, 0.0], [0.0, 0.0]]


def test_argmax_always_erased(rng):
    F = torch.from_numpy(rng.uniform(size=(3, 5, 5)))
    A = F.sum(0)
    M = erase_mask(F, 0.99)
    assert M.flatten()[A.argmax()] == 1


def test_constant_positive_map_fully_erased():
    assert erase_mask(torch.full((2, 3, 3), 4.0), 0.85).sum() == 9


def test_mask_monotone_in_gamma(rng):
    F = torch.from_numpy(rng.uniform(size=(4, 6, 6)))
    prev = None
    for g in np.linspace(0.05, 1.0, 10):
        M = erase_mask(F, float(g))
        if prev is not None:
            assert torch.all(M <= prev)
        prev = M


def test_mask_is_detached():
    F = torch.rand(2, 3, 3, requires_grad=True)
    assert not erase_mask(F, 0.5).requires_grad


def test_batched_masks_match_single(rng):
    F = torch.from_numpy(rng.uniform(size=(3, 2, 4, 4)))
    batched = erase_mask(F, 0.7)
    for b in range(3):
        assert torch.equal(batched[b], erase_mask(F[b], 0.7))


def test_apply_erase(rng):
    F = torch.from_numpy(rng.normal(size=(3, 4, 4)))
    assert torch.equal(apply_erase(F, torch.zeros(4, 4, dtype=F.dtype)), F)
    assert torch.count_nonzero(apply_erase(F, torch.ones(4, 4, dtype=F.dtype))) == 0
    M = torch.from_numpy(rng.integers(0, 2, size=(4, 4)).astype(np.float64))
    out = apply_erase(F, M)
    for k in range(3):
        for i in range(4):
            for j in range(4):
                assert out[k, i, j] == F[k, i, j] * (1 - M[i, j])


def test_apply_erase_shape_mismatch():
    with pytest.raises(ValueError):
        apply_erase(torch.zeros(2, 3, 3), torch.zeros(4, 4))


@pytest.mark.parametrize("gamma", [0.0, 1.5, -0.1])
def test_gamma_range(gamma):
    with pytest.raises(ValueError):
        EraseConfig(gamma=gamma)
