"""
Comparing parts that are not in the same place
==============================================

Two images of the same object rarely put its parts at the same grid cells.
Comparing descriptors position by position then mixes up head and tail. The
alignment step rebuilds the support map in the query's spatial order first:
each query cell gets a softmax-weighted mix of the support descriptors that
resemble it.
"""
import torch

from bsfa.alignment import align, correlation, row_softmax, score, to_descriptors

torch.manual_seed(0)
c, h, w = 16, 3, 3

# Nine distinct "parts", one per cell
support = torch.randn(c, h, w).relu() + 0.05

# The query shows the same parts, shuffled around the grid
perm = torch.randperm(h * w)
query = to_descriptors(support)[perm].T.reshape(c, h, w)

print("score without alignment:", round(score(query, support, tau=1.0, use_alignment=False).item(), 3))
print("score with alignment:   ", round(score(query, support, tau=1.0).item(), 3))

# A distractor: unrelated parts
other = torch.randn(c, h, w).relu() + 0.05
print("distractor, aligned:    ", round(score(query, other, tau=1.0).item(), 3))

# The weights behind the alignment: row i says which support cells query cell i draws on
weights = row_softmax(correlation(to_descriptors(support), to_descriptors(query)))
print("rows sum to", weights.sum(-1))
print("strongest support cell per query cell:", weights.argmax(-1).tolist())
print("true source cell per query cell:      ", perm.tolist())

aligned = align(support, query)
print("aligned descriptors", tuple(aligned.shape))
