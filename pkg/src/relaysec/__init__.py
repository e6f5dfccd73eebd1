"""relaysec: buffer-aided relay selection with secrecy-rate metrics.

A Monte Carlo study of two-hop relay networks where a multi-antenna source
serves several users through half-duplex buffered relays while idle relays
jam eavesdroppers.  The package provides the channel model, the per-slot
secrecy accounting, a family of relay-selection policies, the slot-by-slot
engine, and a small CLI for running parameter sweeps.
"""
from .buffers import RelayBuffer, StoredBlock, make_buffers
from .channel import (ChannelSet, ConfigError, EmptySelectionError,
                      LegitimateChannels, SWEEPABLE, SystemConfig,
                      draw_channels)
from .engine import (RunResult, SlotOutcome, TrialState, forward_zero_forced,
                     ml_gain_estimates, run_monte_carlo, step_slot,
                     warmup_slots)
from .experiment import (ExperimentError, ExperimentSpec, RESULTS_HEADER,
                         ResultRow, default_spec_text, parse_experiment,
                         read_results, read_series, read_traces,
                         run_experiment, serialize_experiment, write_results)
from .metrics import (CovariancePair, SelectionError, SinrBundle, SlotScorer,
                      covariances, gamma_eav_full, gamma_greedy,
                      gamma_user_full, head_state, partial_csi_score,
                      relay_reception_gamma, secrecy_rate, stored_factor,
                      surrogate_det_score)
from .numerics import (DegenerateDenominatorError, HermitianViolationError,
                       SingularChannelError, congruence, det_ratio, herm_quad,
                       hermitian_part, inv_sqrt_pd, log_det_i_plus, sqrt_psd,
                       whitened, zf_precoder)
from .policies import (CandidateSet, EnumerationBudgetError, MATRIX_POLICIES,
                       POLICY_NAMES, SCALAR_POLICIES, Selection, select_greedy,
                       select_max_min, select_max_ratio, select_ml,
                       select_random_matrix, select_random_single,
                       select_sr_exhaustive, select_sr_partial,
                       select_sr_single)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # buffers
    "RelayBuffer", "StoredBlock", "make_buffers",
    # channel model
    "ChannelSet", "ConfigError", "EmptySelectionError", "LegitimateChannels",
    "SWEEPABLE", "SystemConfig", "draw_channels",
    # engine
    "RunResult", "SlotOutcome", "TrialState", "forward_zero_forced",
    "ml_gain_estimates", "run_monte_carlo", "step_slot", "warmup_slots",
    # experiments
    "ExperimentError", "ExperimentSpec", "RESULTS_HEADER", "ResultRow",
    "default_spec_text", "parse_experiment", "read_results", "read_series",
    "read_traces", "run_experiment", "serialize_experiment", "write_results",
    # metrics
    "CovariancePair", "SelectionError", "SinrBundle", "SlotScorer",
    "covariances", "gamma_eav_full", "gamma_greedy", "gamma_user_full",
    "head_state", "partial_csi_score", "relay_reception_gamma", "secrecy_rate",
    "stored_factor", "surrogate_det_score",
    # numerics
    "DegenerateDenominatorError", "HermitianViolationError",
    "SingularChannelError", "congruence", "det_ratio", "herm_quad",
    "hermitian_part", "inv_sqrt_pd", "log_det_i_plus", "sqrt_psd", "whitened",
    "zf_precoder",
    # policies
    "CandidateSet", "EnumerationBudgetError", "MATRIX_POLICIES",
    "POLICY_NAMES", "SCALAR_POLICIES", "Selection", "select_greedy",
    "select_max_min", "select_max_ratio", "select_ml", "select_random_matrix",
    "select_random_single", "select_sr_exhaustive", "select_sr_partial",
    "select_sr_single",
]
