"""thzreach: indoor mm-wave/THz link-budget simulation.

Deterministic specular ray tracing over rectangular scenes, molecular
absorption, antenna-array and engineered-surface range extension, and
distance-ordered spectrum allocation, evaluated over a reference E-shaped
hallway or user scenes.
"""

from .channel import (
    AbsorptionTable,
    OutageError,
    PathGain,
    SpectralWindow,
    absorption_loss_db,
    aggregate_gain_db,
    default_absorption_table,
    free_space_spectrum,
    load_absorption_table,
    path_gain,
    path_loss_spectrum,
    spectral_windows,
    spreading_loss_db,
)
from .devices import (
    ArrayConfig,
    ArrayMode,
    LinkResult,
    RadioConfig,
    array_gain_dbi,
    capacity_bps,
    select_mode,
    snr_db,
)
from .experiment import (
    RunConfig,
    RunResult,
    Technique,
    TECHNIQUES,
    distance_to_threshold,
    emit,
    emit_allocation,
    gain_statistics,
    run,
)
from .geometry import (
    EndpointSet,
    Material,
    RxPoint,
    Scene,
    Surface,
    build_e_hallway,
    dump_scene,
    is_occluded,
    load_scene,
    mirror_point,
    segment_hits_surface,
)
from .raytracer import (
    PathKind,
    PropagationPath,
    dump_paths,
    trace_los,
    trace_reflections,
    validate_path,
)
from .tiles import (
    Tile,
    TileConfiguration,
    TileKind,
    TileSet,
    assisted_gains,
    configure,
    solve_tile_normal,
    uniform_tile_grid,
)
from .allocation import (
    Assignment,
    LinkDemand,
    SubWindow,
    allocate_center_out,
    equal_power_split,
    partition,
)

__version__ = "0.1.0"
