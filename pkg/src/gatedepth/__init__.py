"""Depth estimation from three-slice active gated imaging.

The package covers the full path from gating physics to evaluated depth
maps: closed-form and numeric gated responses, synthetic labeled data,
the classical sectioned ratio baseline, a small from-scratch regression
network with grid search, and distance-binned error reporting.
"""

__version__ = "0.1.0"

from .gating import (
    SPEED_OF_LIGHT_M_PER_NS,
    Atmosphere,
    GateShape,
    PulseShape,
    RangeProfile,
    SliceConfig,
    gated_response,
    gdp,
    rip,
    rip_breakpoints,
    slice_support,
    standard_slices,
)
from .pipeline import (
    RawDataset,
    Sample,
    StandardizedSample,
    build_dataset,
    load_samples,
    prefilter,
    save_samples,
    split,
    standardize,
    standardize_batch,
    variant,
)
from .scene import (
    EmpiricalHistogram,
    NoiseModel,
    ScenePoint,
    SliceImageSet,
    UniformRange,
    calibration_for_peak,
    generate_dataset,
    render_slices,
    simulate_triple,
)
from .estimators import (
    DelaySample,
    SectionTable,
    baseline_estimate,
    build_section_table,
    correlation_trapez,
    correlation_triangle,
    time_slicing_estimate,
)
from .network import (
    GridSpec,
    NetworkArch,
    NetworkModel,
    TrainConfig,
    backward,
    forward,
    grid_search,
    init_params,
    load_model,
    loss_mae,
    predict_depth,
    probe_learned_function,
    save_model,
    train,
)
from .evaluation import (
    BinnedError,
    DepthMap,
    binned_mae,
    compare_estimators,
    render_depth_map,
)
