"""Geodesic tortuosity and constrictivity of 3D voxelized microstructures."""

from .connect import LabelField, inlet_connected, label_components_26
from .constrict import (
    ConstrictivityResult,
    IntrusionSet,
    compute_intrusion_set,
    constrictivity,
    estimate_r_max,
    estimate_r_min,
    intrusion_volume_profile,
    volume_fraction,
)
from .grid import (
    PhaseVolume,
    UndefinedEstimateError,
    VolumeFormatError,
    VolumeHeader,
    VoxelGrid,
    WindowSpec,
    extract_window,
    full_grid_window,
    load_volume,
    save_volume,
)
from .harness import (
    ConvergenceRow,
    RunConfig,
    centered_window,
    run_convergence,
    stabilization_metric,
    stabilization_onset,
)
from .morph import (
    DistanceField,
    RadiusProfile,
    UNREACHABLE,
    dilate,
    edt_squared,
    erode,
    opening,
    opening_volume_profile,
)
from .rngmodel import (
    Box,
    GeometricGraph,
    MollificationSpec,
    PointProcessSample,
    build_rng_graph,
    generate_multiphase,
    sample_poisson,
    voxelize_mollification,
)
from .tortuosity import (
    PathLengthField,
    TortuosityResult,
    shortest_path_field,
    tortuosity_estimate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
