"""Multi-label learning with missing labels.

Thin wrapper over the compiled ``_core`` extension. Observed label matrices
are int8 arrays with -1 marking a missing entry; losses return
``(value, grad_logits)``.
"""

from ._core import (
    ContractError,
    DataError,
    an_loss,
    asl_loss,
    average_precision,
    bce,
    bce_ls_loss,
    cfs,
    compute_stats,
    config_hash,
    corrupt,
    curriculum_weights,
    focal_loss,
    gen_data,
    initial_pseudo_value,
    inject_disturbance,
    mean_ap,
    observed_loss,
    precision_recall_at_k,
    round_up_count,
    run_experiment,
    run_sweep,
    threshold_pseudo,
    unobserved_loss,
    wan_loss,
)

__version__ = "0.1.0"
