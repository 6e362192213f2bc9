"""Support-to-query feature alignment and the local-to-local similarity.

All functions broadcast over leading batch dimensions, so a (Q, 1, c, h, w)
query stack against (1, N, c, h, w) prototypes scores every pair at once.
"""
from __future__ import annotations

import torch

EPS = 1e-8


def to_descriptors(F: torch.Tensor) -> torch.Tensor:
    """(..., c, h, w) -> (..., h*w, c); row r = i*w + j is cell (i, j)."""
    return F.flatten(-2).transpose(-1, -2)


def from_descriptors(D: torch.Tensor, h: int, w: int) -> torch.Tensor:
    return D.transpose(-1, -2).unflatten(-1, (h, w))


def _unit(D: torch.Tensor) -> torch.Tensor:
    return D / D.norm(dim=-1, keepdim=True).clamp_min(EPS)


def correlation(Fs: torch.Tensor, Fq: torch.Tensor) -> torch.Tensor:
    """Cosine matrix, entry (i, j) = cos(query descriptor i, support descriptor j)."""
    if Fs.shape[-1] != Fq.shape[-1]:
        raise ValueError(f"descriptor sizes differ: {Fs.shape[-1]} vs {Fq.shape[-1]}")
    return _unit(Fq) @ _unit(Fs).transpose(-1, -2)


def row_softmax(A: torch.Tensor) -> torch.Tensor:
    return torch.softmax(A, dim=-1)


def align(Fs: torch.Tensor, Fq: torch.Tensor) -> torch.Tensor:
    """Re-express support descriptors in the query's spatial order.

    Row i of the result is the affinity-weighted mean of the support
    descriptors, weights being the softmaxed cosine to query cell i.
    Returns descriptors of shape (..., h*w, c).
    """
    if Fs.shape[-3:] != Fq.shape[-3:]:
        raise ValueError(f"feature maps differ: {tuple(Fs.shape)} vs {tuple(Fq.shape)}")
    Ds, Dq = to_descriptors(Fs), to_descriptors(Fq)
    return row_softmax(correlation(Ds, Dq)) @ Ds


def l2l(Fa: torch.Tensor, Dq: torch.Tensor) -> torch.Tensor:
    """Sum over positions of the cosine between matching rows."""
    if Fa.shape[-2:] != Dq.shape[-2:]:
        raise ValueError(f"descriptor sets differ: {tuple(Fa.shape)} vs {tuple(Dq.shape)}")
    return (_unit(Fa) * _unit(Dq)).sum(dim=-1).sum(dim=-1)


def score(Fq: torch.Tensor, prototype: torch.Tensor, tau: float = 10.0,
          use_alignment: bool = True) -> torch.Tensor:
    """Temperature-scaled mean local similarity in [-tau, tau].

    With ``use_alignment=False`` the prototype descriptors are compared in
    place, position by position.
    """
    if Fq.shape[-3:] != prototype.shape[-3:]:
        raise ValueError(f"feature maps differ: {tuple(Fq.shape)} vs {tuple(prototype.shape)}")
    hw = Fq.shape[-1] * Fq.shape[-2]
    Dq = to_descriptors(Fq)
    Ds = align(prototype, Fq) if use_alignment else to_descriptors(prototype)
    return l2l(Ds, Dq) * (tau / hw)


def global_score(Fq: torch.Tensor, prototype: torch.Tensor, tau: float = 10.0) -> torch.Tensor:
    """Cosine between pooled vectors, scaled by tau (the global-feature baseline)."""
    a, b = Fq.mean(dim=(-2, -1)), prototype.mean(dim=(-2, -1))
    return (_unit(a) * _unit(b)).sum(dim=-1) * tau
