"""Design and analysis lab for spatially randomized experiments.

Layouts tile a region into interfering units; designs randomize treatment at
unit, cluster, or region level across days; estimators recover total-treatment
effects under neighborhood interference.
"""

__version__ = "0.1.0"

from spatial_ab.design import (
    AssignmentTensor,
    DesignError,
    DesignSpec,
    assign,
    cluster_design,
    global_design,
    individual_design,
    mean_field,
)
from spatial_ab.dgp import (
    DgpError,
    PanelData,
    make_noise,
    make_nonparam_dynamic_spec,
    make_param_dynamic_spec,
    make_param_static_spec,
    make_semiparam_static_spec,
    simulate,
    true_ate,
    true_ate_mc,
)
from spatial_ab.dr import dr_crossfit, propensity
from spatial_ab.drl import TemporalCompatibilityError, drl_estimate
from spatial_ab.harness import (
    ConfigError,
    ExperimentConfig,
    MonteCarloReport,
    config_from_mapping,
    load_config,
    run_mc,
)
from spatial_ab.inference import (
    DegenerateVarianceError,
    WaldTest,
    day_bootstrap_var,
    wald,
)
from spatial_ab.lattice import (
    ClusterPartition,
    LayoutDiagnostics,
    LayoutError,
    SpatialLayout,
    build_clusters,
    build_layout,
    diagnostics,
)
from spatial_ab.ols import (
    AteEstimate,
    DesignMismatchError,
    InsufficientDataError,
    RankDeficiencyError,
    tau_ols,
    tau_ols_dynamic,
)
from spatial_ab.report import emit_reports

__all__ = [
    "AssignmentTensor",
    "AteEstimate",
    "ClusterPartition",
    "ConfigError",
    "DegenerateVarianceError",
    "DesignError",
    "DesignMismatchError",
    "DesignSpec",
    "DgpError",
    "ExperimentConfig",
    "InsufficientDataError",
    "LayoutDiagnostics",
    "LayoutError",
    "MonteCarloReport",
    "PanelData",
    "RankDeficiencyError",
    "SpatialLayout",
    "TemporalCompatibilityError",
    "WaldTest",
    "assign",
    "build_clusters",
    "build_layout",
    "cluster_design",
    "config_from_mapping",
    "day_bootstrap_var",
    "diagnostics",
    "dr_crossfit",
    "drl_estimate",
    "emit_reports",
    "global_design",
    "individual_design",
    "load_config",
    "make_noise",
    "make_nonparam_dynamic_spec",
    "make_param_dynamic_spec",
    "make_param_static_spec",
    "make_semiparam_static_spec",
    "mean_field",
    "propensity",
    "run_mc",
    "simulate",
    "tau_ols",
    "tau_ols_dynamic",
    "true_ate",
    "true_ate_mc",
    "wald",
]
