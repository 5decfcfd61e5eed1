"""Greedy forward feature selection for regularized least-squares.

The fast path is :func:`select_greedy`, which selects ``k`` of ``n`` features
by leave-one-out error in O(kmn) time. :func:`select_lowrank` and
:func:`select_wrapper` pick the same features more slowly and serve as
reference implementations.
"""

__version__ = "0.1.0"

from .baselines import select_lowrank, select_wrapper
from .dataset import (
    Dataset,
    FoldAssignment,
    load_csv,
    load_libsvm,
    stratified_folds,
    synth_two_gaussians,
    write_libsvm,
)
from .errors import DataError, NumericalError
from .evaluation import (
    CurveReport,
    ScalingReport,
    accuracy,
    cv_feature_curve,
    grid_search_lambda,
    random_baseline,
    scaling_benchmark,
)
from .greedy import (
    SelectionState,
    SelectionTrace,
    commit_feature,
    evaluate_candidate,
    init_state,
    select_greedy,
)
from .losses import LossFunction
from .rls import (
    DualSolution,
    RlsModel,
    loo_bruteforce,
    loo_dual,
    loo_primal,
    predict,
    train_dual,
    train_primal,
)
