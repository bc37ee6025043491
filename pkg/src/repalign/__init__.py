"""Kernel bandit simulations of learning value functions under varying
representational alignment between a learner's and a teacher's similarity
structure."""

__version__ = "0.1.0"

from .accel import BACKEND
from .agents import (AgentConfig, FrozenAgentError, InvalidKernelError,
                     Prediction, agent_new, freeze, gp_predict,
                     kernel_ridge_predict, observe, select_action, svr_fit)
from .alignment import (AlignmentVariant, UndefinedCorrelationError,
                        bin_series, pair_vector, spearman,
                        spearman_permutation_test)
from .domain import (ActionSet, RunMetrics, SimilarityMatrix, SplitSpec,
                     ValueScores, nearest_psd, normalize_kernel, split_random,
                     synthetic_scores, validate_kernel)
from .formats import (FormatError, emit_results, parse_actions, parse_kernel,
                      parse_scores)
from .kernels import (CorruptionSpec, corrupt_scores, interpolate_kernel,
                      length_kernel, length_scores, score_kernel)
from .simulation import (EpisodeConfig, InterpolationCampaign, SyntheticCampaign,
                         ValueCampaign, run_campaign, run_generalization,
                         run_personalization, run_synthetic_experiment,
                         run_value_experiment)
