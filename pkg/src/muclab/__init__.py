"""muclab: a numerical laboratory for learning mixed unitary channels.

Simulates rank-r mixed unitary channels probed with entangled states,
constructs Pretty Good Measurements and their overlap matrices, computes
Fisher-information matrices with trace-bound audits, and runs the linear
PGM-based estimator with reproducible Monte Carlo evaluation.
"""

from .channel import (
    MixedUnitaryChannel,
    RankCapExceeded,
    apply,
    apply_with_ancilla,
    check_probability_vector,
    concat_effective,
    from_spec,
    rank_cap,
)
from .estimator import (
    EstimateResult,
    EstimatorOptions,
    PgmProtocol,
    min_diagonal_experiment,
    mse_curve,
    run_pgm_estimator,
)
from .fisher import (
    BoundReport,
    audit_trace_bound,
    fisher_concat,
    fisher_matrix,
    outcome_distribution,
    simplex_projector,
    tensor_jacobian,
    van_trees_lower_bound,
)
from .linalg import haar_unitary, inv_sqrt_psd, max_entangled_state
from .povm import (
    Ensemble,
    Povm,
    born_probabilities,
    born_sample,
    overlap_matrix,
    pgm,
    probe_orbit_ensemble,
    random_povm,
    unitary_orbit_ensemble,
)
from .seeding import derive_rng, derive_seed

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "Ensemble",
    "EstimateResult",
    "EstimatorOptions",
    "MixedUnitaryChannel",
    "PgmProtocol",
    "Povm",
    "RankCapExceeded",
    "apply",
    "apply_with_ancilla",
    "audit_trace_bound",
    "born_probabilities",
    "born_sample",
    "check_probability_vector",
    "concat_effective",
    "derive_rng",
    "derive_seed",
    "fisher_concat",
    "fisher_matrix",
    "from_spec",
    "haar_unitary",
    "inv_sqrt_psd",
    "max_entangled_state",
    "min_diagonal_experiment",
    "mse_curve",
    "outcome_distribution",
    "overlap_matrix",
    "pgm",
    "probe_orbit_ensemble",
    "random_povm",
    "rank_cap",
    "run_pgm_estimator",
    "simplex_projector",
    "tensor_jacobian",
    "unitary_orbit_ensemble",
    "van_trees_lower_bound",
]
