"""Two-stage few-shot fine-grained recognition: background activation
suppression, foreground alignment and a local-to-local similarity."""

from .alignment import align, correlation, l2l, row_softmax, score, to_descriptors
from .backbone import BackboneConfig, TwoStageNet, classify_global, extract, gap
from .bas import BBox, ForegroundEstimate, refine
from .episodic import EvalReport, Episode, build_prototypes, evaluate, predict, sample_episode
from .erasing import EraseConfig, apply_erase, erase_mask
from .objective import LossBreakdown, LossWeights, combine, global_ce, local_fewshot_loss
from .pipeline import FewShotClassifier, PipelineFlags

__version__ = "0.1.0"
