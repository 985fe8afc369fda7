"""Data-aided shrinkage regularization of the direct-estimate uplink combiner."""

from .airframe import (
    Constellation,
    SignalBlock,
    draw_data_symbols,
    make_constellation,
    make_pilots,
    synthesize,
)
from .combine import CombinerSet, direct_estimate, perfect_csi_combiner, soft_estimate
from .detect import hard_decide, sample_mse, sample_mse_expanded, ser
from .harness import RunConfig, SweepRecord, SweepSpec, run_sweep, run_trial
from .regcov import (
    ShrinkagePrep,
    SingularCovarianceError,
    alpha_from_data,
    alpha_oracle,
    apply_r_inverse,
    build_prep,
    r_of_alpha,
)
from .scenario import (
    ChannelRealization,
    ConfigError,
    Interferer,
    ScenarioConfig,
    dbm_to_linear,
    draw_channels,
    path_loss_db,
    trial_seed,
)
from .shrinkfit import FitOptions, FitState, fit_exhaustive_genie, fit_iterative, mse_gradient

__version__ = "0.1.0"
