"""Dunford-Schwartz averaging toolkit on sequence windows.

Certified l1/l_inf contractions, incremental Cesaro averaging with
convergence detection, running maximal functions and the weak-type counting
bound, the l2 mean-ergodic decomposition, symmetric-space descriptors, and
a reproducible falsification harness with a CLI front end (`ergoseq`).
"""

from .sequences import (
    Tail,
    TruncatedSequence,
    SplitPair,
    UndecidableNorm,
    InexactRearrangement,
    NotInC0,
    SplitImpossible,
    norm,
    rearrange,
    majorizes,
    split_c0,
    sup_distance,
    basis_vector,
    constant_one,
)
from .operators import (
    Certificate,
    DsOperator,
    MatrixOperator,
    ShiftOperator,
    PermutationOperator,
    ConvexCombination,
    PowerOperator,
    ComposeOperator,
    NotContraction,
    UnsupportedForm,
    IncompatibleSupport,
    apply,
    certify_ds,
    modulus,
    to_matrix,
    random_ds,
    random_doubly_stochastic,
    random_permutation_mix,
    identity,
    operator_to_dict,
    operator_from_dict,
)
from .averaging import (
    AverageState,
    CheckpointRecord,
    ConvergenceReport,
    MaximalInequalityCheck,
    Decomposition,
    NoConvergence,
    step,
    run_averaging,
    run_averaging_many,
    maximal_function,
    check_maximal_inequality,
    mean_ergodic_decompose,
    transpose_fixed_estimate,
)
from .spaces import (
    MEMBER,
    NON_MEMBER,
    UNDECIDABLE,
    SpaceDescriptor,
    PreconditionViolated,
    contains,
    contains_one,
    uiet,
    fatou_check,
)
from .harness import (
    SuiteConfig,
    SuiteReport,
    CounterexampleResult,
    make_config,
    run_suite,
    run_all,
    rerun_failure,
    demo_counterexample,
)

__version__ = "0.1.0"
