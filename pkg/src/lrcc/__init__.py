"""Low-rank convex clustering of matrix-valued observations.

Fits centroids X_1..X_n to matrices A_1..A_n by minimizing

    0.5 sum ||X_i - A_i||_F^2 + gamma1 sum_(i,j) w_ij ||X_i - X_j||_F
    + gamma2 sum ||X_i||_*

with an augmented Lagrangian outer loop and a semismooth Newton-CG inner
loop; samples sharing a centroid form a cluster. Ships graph builders,
recovery/prediction diagnostics, a low-rank Lloyd baseline, metrics,
synthetic generators, and a CLI (`lrcc`).
"""

from .baseline import LloydOptions, LloydResult, lr_lloyd, spectral_init
from .dataset import (
    LabelVector,
    MixtureSpec,
    ObservationSet,
    gen_low_rank_mixture,
    gen_mixture_with_counts,
    gen_quarter_spheres,
    gen_unbalanced_gaussian,
    load_csv,
    load_labels,
    load_mts,
    random_low_rank_means,
    save_labels,
    save_mts,
)
from .graph import (
    ComponentLabels,
    WeightedGraph,
    apply_D,
    apply_Dt,
    connected_components,
    gaussian_weights,
    knn_graph,
    knn_sigma_lower_bound,
    sigma_min_B,
)
from .metrics import ContingencyTable, ari, nmi, pca_embed
from .prox import (
    BlockThresholdJacobian,
    NuclearJacobian,
    SvtFactorization,
    apply_nuclear_jacobian,
    block_soft_threshold,
    block_soft_threshold_jacobian,
    nuclear_jacobian,
    prox_g,
    prox_h,
    svt,
)
from .solver import (
    ClusteringResult,
    PrimalDualState,
    ProblemSpec,
    SolveReport,
    SolverOptions,
    alm_solve,
    clusterpath,
    dual_objective,
    extract_clusters,
    kkt_residual,
    oracle_solve,
    phi_gradient,
    phi_value,
    primal_objective,
    ssncg,
)
from .theory import (
    AsymptoticReport,
    PredictionBoundReport,
    RecoveryReport,
    asymptotic_check,
    chi_cdf,
    cluster_means,
    prediction_bound,
    recovery_check,
    region_classify,
)

__version__ = "0.1.0"
