"""msalab: desk-scale multi-scale analysis and dynamical localization lab for
discrete random Schrodinger operators on the integer lattice."""

__version__ = "0.1.0"

from .disorder import (
    Configuration,
    DisorderModel,
    SingleSiteMeasure,
    UndefinedTailError,
    measure_tail_exponent,
    model_from_text,
    model_to_text,
    potential,
    sample_configuration,
)
from .geometry import (
    Annulus,
    Cube,
    Region,
    ScaleGrid,
    annulus_sites,
    custom_region,
    grid_cover,
    is_odd_side,
    is_suitable_side,
    lattice_distance,
    make_cube,
    region,
    set_distance,
)
from .localization import (
    EdiReport,
    EigenRecord,
    KernelDecayReport,
    MomentReport,
    TwoBadReport,
    centers,
    count_in_window,
    default_time_grid,
    dynamical_moment,
    edi_check,
    kernel_decay,
    kernel_decay_sweep,
    two_bad_probability,
)
from .msa import (
    EstimateReport,
    GateError,
    GCalibration,
    GoodnessVerdict,
    InductionReport,
    MsaParameters,
    ScaleSequence,
    calibrate_G,
    classify_cube,
    estimate_G,
    estimate_W,
    feasible_alpha,
    gamma_recursion,
    gamma_step,
    next_scale,
    run_induction,
    scale_ladder,
)
from .operators import (
    BoxOperator,
    EnergyFunction,
    EnergyInterval,
    IncompleteSpectrumError,
    SingularEnergyError,
    SpectralData,
    assemble,
    function_apply,
    propagate,
    resolvent_block_norm,
    spectral_projector_apply,
    spectrum,
    trace_count,
)
from .stats import clopper_pearson, clopper_pearson_lower, fit_power_law
