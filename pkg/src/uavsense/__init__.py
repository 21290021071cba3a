"""Half-duplex UAV distributed radar sensing simulator.

A deterministic, seedable simulator of a multi-UAV ground-sensing protocol:
each UAV in turn illuminates a block of grid cells with OFDM frames while the
others estimate per-cell radar cross-sections through receive beamforming and
matched periodogram evaluation; a fusion center averages the local maps and
declares the target at the argmax cell.
"""

__version__ = "0.1.0"

from .config import (
    ConfigError,
    RunOptions,
    ScenarioConfig,
    SweepSpec,
    dbsm_to_m2,
    m2_to_dbsm,
    parse_config_file,
    parse_config_text,
    render_config_text,
)
from .geometry import (
    AoA,
    CellGrid,
    CellSets,
    UavDeployment,
    aoa,
    build_grid,
    chebyshev_cell_distance,
    classify_cells,
    deploy_uavs,
    derive_altitude,
    footprint_radius,
    hpbw,
    path_distances,
)
from .beamforming import (
    AoAMesh,
    BeamformerWeights,
    aoa_mesh,
    beam_pattern,
    capon_beamformer,
    ls_beamformer,
    steering_matrix,
    steering_vector,
)
from .ofdm import (
    OfdmParams,
    RcsEstimate,
    ReflectionComponent,
    build_reflections,
    dirichlet_kernel,
    estimate_rcs,
    fast_cell_estimate,
    matched_point_value,
    periodogram_grid,
    reflection_amplitude,
    remove_data,
    synth_rx_frame,
    synth_tx_frame,
)
from .fusion import (
    DetectionResult,
    FusedMap,
    LocalRcsMap,
    detect,
    detection_delta,
    fuse,
    hypothesis_test,
    normalize_map,
)
from .engine import (
    DetectionStats,
    ScenarioTables,
    SweepRow,
    TrialOutcome,
    build_tables,
    estimate_cell,
    run_monte_carlo,
    run_monte_carlo_all_fusions,
    run_trial,
    substream,
    sweep,
)
