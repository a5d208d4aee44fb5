"""Toolkit for EFX allocation existence under additive valuations.

Exposes the exact exhaustive oracle, the Lovász-extension relaxation, the
smoothed rounding bound with its piecewise-linear limit objective, the
LP-based difference-of-convex descent, and the clamp-map fixed-point
iterations, plus instance and allocation documents shared by all of them.
"""

from .dc import DCAResult, InternalCheckError, LPModel, build_lp, dca_solve, solve_lp
from .extension import (
    dc_objective,
    default_box_bound,
    encode_allocation,
    rounding_bound,
    rowwise_round,
    rowwise_round_many,
    softmax_limit_gaps,
    softmax_map,
)
from .fixedpoint import (
    FixedPointReport,
    SelfMapViolation,
    clamp_map,
    constraint_slacks,
    extract_allocation,
    picard_iterate,
    rowmax_clamp_map,
    smooth_clamp_map,
    stuck_row_diagnostics,
    transfer_gain,
    verify_constraints,
)
from .instance import (
    Allocation,
    EfxReport,
    Instance,
    InstanceFormatError,
    ZeroColumnError,
    allocation_to_doc,
    efx_slack,
    generate_instance,
    instance_to_doc,
    is_efx,
    load_allocation,
    load_instance,
    make_instance,
    normalize,
    total_mass,
)
from .lovasz import (
    ThresholdRounding,
    envy_gap_extension,
    in_partition_polytope,
    lovasz_extension,
    minimize_relaxation,
    monotone_envy_gap_extension,
    project_rows_to_simplex,
    relaxation_objective,
    threshold_round,
    uniform_point,
)
from .oracle import OracleGuardError, OracleResult, batch_efx_slack, enumerate_efx, min_max_envy
from .setfun import bundle_value, envy_gap, max_envy_gap, monotone_envy_gap, reduced_value

__version__ = "0.1.0"
