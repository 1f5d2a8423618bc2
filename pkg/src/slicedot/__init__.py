"""Sliced optimal transport primitives and constrained sliced Wasserstein embeddings."""

from .errors import (DimensionMismatch, EmptyBatch, EmptyMeasure, InstanceTooLarge,
                     InvalidWeights, NonFiniteGradient, NonFiniteInput, NonPositiveTemperature,
                     NonUniformWeights, SizeTooSmall, SlicedOTError, TiedInputs)
from .measures import (DiscreteMeasure, ProjectedMeasure, SliceSet, make_measure,
                       make_slices, project, projected_from_values, sample_slices)
from .ot1d import TransportPlan, sliced_w2, w2_1d, w2_exact
from .softsort import (SoftPermutation, hard_sort_permutation, soft_sort_jacobian,
                       soft_sort_matrix)
from .swe import (InterpolationMatrix, ReferenceSet, SweEmbedding, interpolation_matrix,
                  swe_embed, swe_embed_soft)
from .swgg import LiftedPlan, lift_plan, swgg, swgg_soft
from .grad import ParamGradients, finite_diff_check, grad_swgg_soft, grad_task_loss
from .trainer import (TrainConfig, TrainHistory, TrainState, lagrangian_value,
                      ortho_penalty, primal_dual_step, train)

__version__ = "0.1.0"
