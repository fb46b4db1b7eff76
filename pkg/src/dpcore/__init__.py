"""dpcore: a differentially private query engine with a built-in audit
harness.

Layering (strictly one-directional):

* relational / transforms / registry -- the data access layer: exact
  computation plus deterministic bounds, stability and sensitivity tracking.
* randomness / mechanisms / accounting / gateway -- the privacy layer: the
  only path from exact statistics to released values, always mediated by
  the accountant.
* service / cli -- the postprocessing layer and user-facing plumbing; never
  touches raw data.
* audit -- statistical tests that try to falsify the rest of the package.
"""

from .accounting import (
    Accountant,
    PURE_EPS,
    PrivacyCharge,
    ZCDP_RHO,
    linear_query_epsilon,
    power_bound,
    sequence_epsilon,
    verify_accounting,
    zcdp_to_pure_dp,
)
from .errors import (
    BudgetExceededError,
    ContractViolation,
    ParameterError,
    RejectedOperationError,
    ScopeMismatchError,
    UnknownColumnError,
)
from .mechanisms import (
    MechanismResult,
    exponential_mechanism,
    gaussian_mechanism,
    laplace_mechanism,
    noisy_histogram,
    report_noisy_max,
    soft_threshold_filter,
)
from .randomness import (
    LogWeight,
    RandomSource,
    derive_source,
    log_add,
    sample_exponential,
    sample_gaussian,
    sample_laplace,
    sample_snapped_laplace,
    sample_two_sided_geometric,
)
from .relational import (
    ColumnKind,
    ColumnMeta,
    DevLog,
    GroupedTable,
    Schema,
    StabilityBound,
    StatVector,
    Table,
    dev_log,
    enforce_schema,
    load_csv,
    load_schema,
    make_table,
    parse_schema,
    symmetric_difference,
)
from .transforms import (
    Affine,
    Clamp,
    Comparison,
    Predicate,
    Square,
    TransformPlan,
    aggregate,
    bernoulli_sample,
    distinct,
    filter_project,
    group_by,
    linear_map,
    map_column,
    parse_plan,
    project,
    rejected_operation,
    select_where,
    union,
)

__version__ = "0.1.0"
