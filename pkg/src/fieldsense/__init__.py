"""fieldsense: linear estimators for spatially distributed sensor networks.

Turn a sensing scenario (sensor positions, a field model, a target property)
into a coefficient vector c with target ~= c . F over the sensor readings,
certify whether the placement admits a construction-error-free estimator, and
split a resource budget optimally between entangled and per-sensor strategies.
"""

from .allocation import (
    AllocationResult,
    allocate_general,
    analytic_variance,
    classical_allocation,
    local_allocation,
    monte_carlo_variance,
    nonlocal_allocation,
    pnorm,
    precision_gain,
    round_allocation,
    stationarity_residual,
)
from .errors import (
    DimensionMismatchError,
    DuplicatePointError,
    FieldSenseError,
    LinearSolveError,
    RankDeficiencyError,
    RelabelingError,
    ScenarioError,
    SingularEvaluationError,
    SizeCapError,
)
from .estimators import (
    Estimator,
    TargetSpec,
    combine,
    derivative_estimator,
    gls_estimator,
    interpolation_estimator,
    interpolation_weight_matrix,
    isolation_estimator,
    model_eval_estimator,
    model_weight_matrix,
    residual,
    synthesize,
)
from .linear_systems import (
    ErrorSubspaceReport,
    RankReport,
    SystemMatrix,
    build_alternant,
    build_design,
    build_vandermonde,
    error_subspace,
    rank_report,
    solve,
    vandermonde_rank_certificate,
    weighted_pseudo_inverse_apply,
)
from .model_functions import (
    Constant,
    InverseDistance,
    ModelFunction,
    ModelSpec,
    Monomial,
    Polynomial,
    Sinusoid,
    function_from_json,
)
from .multiindex import (
    LowerSet,
    border,
    box_lower_set,
    cover,
    is_lower_set,
    simplex_lower_set,
)
from .placement import (
    AxisMap,
    PointSet,
    Relabeling,
    find_lower_set_relabeling,
    is_equivalent,
    relabel,
)
from .scenario_io import (
    ResultRecord,
    Scenario,
    dump_scenario,
    emit_grid_csv,
    fixture_path,
    load_scenario,
    parse_field_spec,
)

__version__ = "0.1.0"
