"""Bipartite regularized out-of-time-ordered correlators at finite temperature.

A numerical library and CLI for the bipartite-Haar-averaged regularized OTOC
of exactly diagonalizable Hamiltonians: the disconnected and connected
correlators, their difference, zero-temperature limits, equilibration values,
and desk-scale reproductions of the reference finite-size-scaling sweeps.
"""

from .correlators import (
    BrotocPoint,
    Estimate,
    GlobalAverageReport,
    GroundProjectorData,
    HaarOracleResult,
    OtocSample,
    ZeroTemperatureValues,
    brotoc_bounds,
    brotoc_point,
    connected,
    connected_many,
    disconnected,
    disconnected_upper_bound,
    global_haar_sff_check,
    ground_projector,
    haar_mc_oracle,
    haar_unitaries,
    regularized_otoc_sample,
    unregularized_bipartite,
    zero_temperature,
)
from .equilibration import (
    EntanglementBoundReport,
    EquilibrationResult,
    GramData,
    MeClosedForm,
    disconnected_gibbs_form,
    eigenstate_entanglement_bound,
    gram_matrices,
    me_closed_form,
    nrc_longtime_average,
    nrc_ps_closed_form,
    nrc_ps_disconnected,
    time_grid_average,
    truncated_nrc_longtime_average,
    unregularized_me_value,
)
from .errors import (
    ConfigError,
    DimensionMismatchError,
    DomainError,
    NumericalHealthError,
    ResourceLimitError,
    ValidationError,
)
from .experiments import (
    ExperimentConfig,
    ScalingFit,
    emit_records,
    fit_mean_records,
    fit_scaling,
    load_records,
    method_for,
    preset_config,
    realize_model,
    run_experiment,
)
from .models import (
    HamiltonianInstance,
    ModelSpec,
    NrcReport,
    SpectralDecomposition,
    build_disordered,
    build_max_ent,
    build_non_entangling,
    build_nrc_ps,
    build_tfim,
    build_zero,
    check_nrc,
    child_rng,
    sample_gue,
)
from .operators import (
    Bipartition,
    DenseOperator,
    PureState,
    SchmidtData,
    chain_bipartition,
    hs_inner,
    hs_norm_sq,
    operator_entanglement,
    operator_purity,
    operator_schmidt,
    partial_trace,
    realign,
    subsystem_purity,
    swap_sandwich_trace,
)
from .thermal import (
    ChoiMatrix,
    CpTraceReport,
    ThermalContext,
    ThermofieldDouble,
    choi_fidelity,
    choi_of_regularized_map,
    continued_partition_function,
    cp_trace_check,
    gibbs_weights,
    gue_brotoc_approx,
    gue_mean_partition,
    log_partition_function,
    partition_function,
    sff2,
    sff4,
    survival_probability,
    thermofield_double,
)

__version__ = "0.1.0"
