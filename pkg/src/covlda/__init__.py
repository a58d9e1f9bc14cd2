"""LDA with a negative binomial regression on cluster abundances."""
from .exceptions import ConfigError, ConstraintError, CovLDAError, DataError, NumericalError
from .model import (CountData, CovariateMatrix, Hyperparams, LatentState, ModelParams, Trace,
                    apply_token_move, compute_lambda, joint_log_density, nb_log_pmf,
                    theta_from_counts)
from .samplers import SliceConfig, make_rng, slice_sample
from .vanilla import VanillaConfig, occupancy_report, run_vanilla
from .inference import (FitConfig, convergence_summary, fit, run_chains, run_joint,
                        run_two_stage)
from .analysis import (align_clusters, posterior_summary, predict_abundance,
                       probabilistic_coherence, relevant_categories)
from .simgen import simulate_holdout, simulate_set1, simulate_set2

__version__ = "0.1.0"
