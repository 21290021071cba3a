"""Protocol orchestration: per-trial sensing rounds, Monte Carlo batches, sweeps.

Every random quantity comes from a counter-style substream derived from
(master_seed, trial, stream tag, ids), so outcomes are a pure function of the
configuration and trial index. Trials are independent work units; parallel and
serial execution agree bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import (
    SPEED_OF_LIGHT,
    ConfigError,
    RunOptions,
    ScenarioConfig,
    SweepSpec,
    dbsm_to_m2,
)
from .geometry import (
    aoa,
    build_grid,
    cell_of_point,
    classify_cells,
    deploy_uavs,
    derive_altitude,
    footprint_radius,
)
from .beamforming import aoa_mesh, capon_beamformer, ls_beamformer, steering_vector
from .ofdm import (
    OfdmParams,
    RcsEstimate,
    build_reflections,
    dirichlet_kernel,
    matched_point_value,
    remove_data,
    synth_rx_frame,
    synth_tx_frame,
)
from .fusion import DetectionResult, LocalRcsMap, detect, detection_delta, fuse

__all__ = [
    "TrialOutcome",
    "DetectionStats",
    "SweepRow",
    "ScenarioTables",
    "build_tables",
    "estimate_cell",
    "run_trial",
    "run_monte_carlo",
    "run_monte_carlo_all_fusions",
    "sweep",
    "substream",
]

DELTAS = (0, 1, 2)
FUSION_METHODS = ("avg", "prenorm")

# Stream tags for the counter-based substream split.
_STREAM_TARGET = 1
_STREAM_PHASE = 2
_STREAM_NOISE = 3
_STREAM_TXDATA = 4

_MASK64 = (1 << 64) - 1

# Config fields the precomputed tables depend on; the remaining fields (RCS
# values, trial count, master seed) can change between table reuse.
_GEOMETRY_FIELDS = (
    "transmit_power_w",
    "transmit_gain",
    "area_side_m",
    "uav_count",
    "noise_density_w_hz",
    "symbols_per_frame",
    "subcarriers",
    "array_side",
    "carrier_frequency_hz",
    "bandwidth_hz",
    "cp_duration_s",
    "grid_side",
    "doppler_hz",
    "altitude_mode",
    "altitude_m",
)


def _mix64(x: int) -> int:
    # SplitMix64 finalizer; a cheap, well-mixed 64-bit hash step.
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Independent generator for a (trial, tag, ids...) path under one seed."""
    acc = master_seed & _MASK64
    for part in path:
        acc = _mix64(acc ^ _mix64(part & _MASK64))
    key = (acc, _mix64(acc ^ 0xA5A5A5A5A5A5A5A5))
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    target_xy: tuple[float, float]
    detections: dict  # fusion method -> DetectionResult
    local_maps: list | None = None
    fused_maps: dict | None = None


@dataclass(frozen=True)
class DetectionStats:
    """Hit counts and detection probabilities with 95% binomial half-widths."""

    trials: int
    hits: tuple[int, int, int]  # delta = 0, 1, 2

    def p_detect(self, delta: int) -> float:
        return self.hits[delta] / self.trials

    def ci95_halfwidth(self, delta: int) -> float:
        p = self.p_detect(delta)
        return 1.96 * math.sqrt(p * (1.0 - p) / self.trials)


@dataclass(frozen=True)
class SweepRow:
    sweep_param: str
    sweep_value: float
    beamformer: str
    fusion: str
    sigma_g_dbsm: float
    delta: int
    trials: int
    hits: int
    p_detect: float
    ci95_halfwidth: float
    seed: int


@dataclass
class _PairTables:
    """Static per-(transmitter, listener) factors reused across trials."""

    tx: int
    rx: int
    cells: np.ndarray  # (n_p, 2) intended cells, row-major order
    matched_delay: np.ndarray  # (n_p,)
    est_scale: np.ndarray  # (n_p,) maps matched power to sigma-hat
    noise_var: np.ndarray  # (n_p,) per-sample variance N0 BW ||w||^2
    ground_amp: np.ndarray  # (n_q, n_p) unit-RCS amplitude * gain * kernel
    weights: np.ndarray  # (n_p, n^2) receive weights per intended cell


@dataclass
class ScenarioTables:
    """Everything static for one (scenario geometry, beamformer) combination."""

    config: ScenarioConfig
    options: RunOptions
    grid: object
    deployment: object
    cell_sets: list
    footprints: np.ndarray  # (U,) ground radii
    owners: np.ndarray  # (L, L) owning UAV per cell, -1 if never intended
    pairs: list

    def compatible_with(self, config: ScenarioConfig) -> bool:
        return all(getattr(self.config, f) == getattr(config, f) for f in _GEOMETRY_FIELDS)


def build_tables(config: ScenarioConfig, options: RunOptions) -> ScenarioTables:
    """Precompute geometry, beamformers, and trial-invariant coupling tables.

    The tables depend on the geometry, array size, OFDM timing, and beamformer
    design only; RCS values, seeds, and trial counts can change without a
    rebuild (ground amplitudes are stored for unit RCS).
    """
    grid = build_grid(config)
    deployment = deploy_uavs(config, grid)
    U = config.uav_count
    L = config.grid_side
    n = config.array_side
    cell_sets = [classify_cells(config, u, grid, deployment) for u in range(U)]
    footprints = np.array([footprint_radius(config, deployment.positions[u][2]) for u in range(U)])

    owners = np.full((L, L), -1, dtype=int)
    for u in range(U):
        for a, b in cell_sets[u].intended:
            if owners[a, b] != -1:
                raise ConfigError(
                    "altitude_m: footprints overlap, cell "
                    f"({a}, {b}) is intended for both UAV {owners[a, b]} and UAV {u}"
                )
            owners[a, b] = u
    if all(len(s.intended) == 0 for s in cell_sets):
        raise ConfigError("altitude_m: no cell fits inside any footprint at this altitude")

    N = config.symbols_per_frame
    M = config.subcarriers
    df = config.subcarrier_spacing_hz
    lam = config.wavelength_m
    inv_pg = (4.0 * math.pi) ** 3 / (N * M * config.transmit_power_w * config.transmit_gain * lam * lam)
    unit_b = config.transmit_power_w * config.transmit_gain * lam * lam / (4.0 * math.pi) ** 3

    # Beamformers depend on (listener, cell) geometry only; design each once.
    weight_cache: dict[tuple[int, int, int], np.ndarray] = {}

    def weights_for(rx: int, a: int, b: int) -> np.ndarray:
        key = (rx, a, b)
        if key not in weight_cache:
            direction = aoa(deployment.positions[rx], grid.centers[a, b])
            if options.beamformer == "capon":
                w = capon_beamformer(direction, n, loading=options.capon_loading).weights
            else:
                w = ls_beamformer(aoa_mesh(direction, n), n, iterations=options.ls_iterations).weights
            weight_cache[key] = w
        return weight_cache[key]

    pairs = []
    for tx in range(U):
        intended = cell_sets[tx].intended
        if len(intended) == 0:
            continue
        illuminated = cell_sets[tx].illuminated
        tx_pos = deployment.positions[tx]
        q_points = grid.centers[illuminated[:, 0], illuminated[:, 1]]  # (n_q, 3)
        d1_q = np.linalg.norm(q_points - tx_pos, axis=1)
        p_points = grid.centers[intended[:, 0], intended[:, 1]]  # (n_p, 3)
        d1_p = np.linalg.norm(p_points - tx_pos, axis=1)
        for rx in range(U):
            if rx == tx:
                continue
            rx_pos = deployment.positions[rx]
            d2_q = np.linalg.norm(rx_pos - q_points, axis=1)
            d2_p = np.linalg.norm(rx_pos - p_points, axis=1)
            tau_q = (d1_q + d2_q) / SPEED_OF_LIGHT
            tau_p = (d1_p + d2_p) / SPEED_OF_LIGHT

            w_stack = np.stack([weights_for(rx, a, b) for a, b in intended])  # (n_p, n^2)
            g_stack = np.column_stack(
                [steering_vector(aoa(rx_pos, q_points[i]), n) for i in range(len(illuminated))]
            )  # (n^2, n_q)
            chi = w_stack.conj() @ g_stack  # (n_p, n_q)

            b_unit = np.sqrt(unit_b / (d1_q**2 * d2_q**2))  # (n_q,) amplitude at sigma = 1
            kernel = dirichlet_kernel((tau_q[:, None] - tau_p[None, :]) * df, M) * N  # (n_q, n_p)
            ground_amp = b_unit[:, None] * chi.T * kernel

            pairs.append(
                _PairTables(
                    tx=tx,
                    rx=rx,
                    cells=intended,
                    matched_delay=tau_p,
                    est_scale=inv_pg * d1_p**2 * d2_p**2,
                    noise_var=config.noise_density_w_hz
                    * config.bandwidth_hz
                    * np.sum(np.abs(w_stack) ** 2, axis=1),
                    ground_amp=ground_amp,
                    weights=w_stack,
                )
            )
    return ScenarioTables(
        config=config,
        options=options,
        grid=grid,
        deployment=deployment,
        cell_sets=cell_sets,
        footprints=footprints,
        owners=owners,
        pairs=pairs,
    )


def _draw_target(config: ScenarioConfig, trial: int) -> np.ndarray:
    rng = substream(config.master_seed, trial, _STREAM_TARGET)
    xy = rng.uniform(0.0, config.area_side_m, size=2)
    return np.array([xy[0], xy[1], 0.0])


def _estimate_pair_fast(config, tables, pair, trial, target, illuminated, g_target):
    """Vectorized matched-point estimates for every intended cell of one pair."""
    N = config.symbols_per_frame
    M = config.subcarriers
    n_q = pair.ground_amp.shape[0]
    rng_phase = substream(config.master_seed, trial, _STREAM_PHASE, pair.tx, pair.rx)
    zeta = rng_phase.uniform(0.0, 2.0 * math.pi, size=n_q + (1 if illuminated else 0))
    phase = np.exp(-1j * zeta)
    total = math.sqrt(config.ground_rcs_m2) * (phase[:n_q] @ pair.ground_amp)
    if illuminated:
        tx_pos = tables.deployment.positions[pair.tx]
        rx_pos = tables.deployment.positions[pair.rx]
        d1 = float(np.linalg.norm(target - tx_pos))
        d2 = float(np.linalg.norm(rx_pos - target))
        lam = config.wavelength_m
        b_t = math.sqrt(
            config.transmit_power_w * config.transmit_gain * config.target_rcs_m2 * lam * lam
            / ((4.0 * math.pi) ** 3 * d1 * d1 * d2 * d2)
        )
        tau_t = (d1 + d2) / SPEED_OF_LIGHT
        chi_t = pair.weights.conj() @ g_target
        kernel_t = dirichlet_kernel((tau_t - pair.matched_delay) * config.subcarrier_spacing_hz, M) * N
        total = total + b_t * phase[-1] * chi_t * kernel_t
    if tables.options.noise:
        rng_noise = substream(config.master_seed, trial, _STREAM_NOISE, pair.tx, pair.rx)
        draws = rng_noise.standard_normal((2, len(pair.cells)))
        total = total + np.sqrt(N * M * pair.noise_var / 2.0) * (draws[0] + 1j * draws[1])
    peak = np.abs(total) ** 2 / (N * M)
    return peak * pair.est_scale


class _WeightsView:
    """Minimal weights wrapper so build_reflections can take a raw vector."""

    __slots__ = ("weights",)

    def __init__(self, weights):
        self.weights = weights


def _estimate_pair_reference(config, tables, pair, trial, target, illuminated, tx_frame):
    """Full frame-level pipeline for every intended cell of one pair."""
    params = OfdmParams.from_config(config)
    grid = tables.grid
    tx_pos = tables.deployment.positions[pair.tx]
    rx_pos = tables.deployment.positions[pair.rx]
    sets = tables.cell_sets[pair.tx]
    estimates = np.empty(len(pair.cells))
    for i, (a, b) in enumerate(pair.cells):
        rng_phase = substream(config.master_seed, trial, _STREAM_PHASE, pair.tx, pair.rx)
        reflections = build_reflections(
            config,
            pair.tx,
            pair.rx,
            tx_pos,
            rx_pos,
            sets,
            grid,
            _WeightsView(pair.weights[i]),
            target if illuminated else None,
            rng_phase,
        )
        noise_var = float(pair.noise_var[i]) if tables.options.noise else 0.0
        rng_noise = substream(config.master_seed, trial, _STREAM_NOISE, pair.tx, pair.rx, int(a), int(b))
        rx_frame = synth_rx_frame(tx_frame, reflections, params, noise_var, rng_noise)
        processed = remove_data(rx_frame, tx_frame)
        peak = matched_point_value(processed, float(pair.matched_delay[i]), config.doppler_hz, params)
        estimates[i] = peak * pair.est_scale[i]
    return estimates


def run_trial(
    config: ScenarioConfig,
    trial: int,
    options: RunOptions | None = None,
    tables: ScenarioTables | None = None,
    target_override=None,
    collect_maps: bool = False,
) -> TrialOutcome:
    """One complete sensing round: illuminate, estimate, fuse, detect.

    Each UAV in turn illuminates its block while every other UAV estimates the
    RCS of the illuminated intended cells; the local maps are fused and the
    argmax cell compared against the true target position. Detections are
    computed for both fusion methods since they share all estimates.
    """
    if tables is None:
        tables = build_tables(config, options or RunOptions())
    elif not tables.compatible_with(config):
        raise ConfigError("tables were built for a different scenario geometry")
    L = config.grid_side
    U = config.uav_count

    if target_override is not None:
        target = np.array([target_override[0], target_override[1], 0.0])
    else:
        target = _draw_target(config, trial)

    proj = tables.deployment.positions[:, :2]
    dist = np.hypot(target[0] - proj[:, 0], target[1] - proj[:, 1])
    illuminated_by = dist <= tables.footprints

    fast = tables.options.fast_path
    g_target = {}
    tx_frames = {}
    if fast:
        n = config.array_side
        for rx in range(U):
            g_target[rx] = steering_vector(aoa(tables.deployment.positions[rx], target), n)
    else:
        params = OfdmParams.from_config(config)
        for tx in range(U):
            rng_tx = substream(config.master_seed, trial, _STREAM_TXDATA, tx)
            tx_frames[tx] = synth_tx_frame(params, rng_tx)

    maps = np.full((U, L, L), np.nan)
    for pair in tables.pairs:
        lit = bool(illuminated_by[pair.tx])
        if fast:
            est = _estimate_pair_fast(config, tables, pair, trial, target, lit, g_target[pair.rx])
        else:
            est = _estimate_pair_reference(config, tables, pair, trial, target, lit, tx_frames[pair.tx])
        maps[pair.rx, pair.cells[:, 0], pair.cells[:, 1]] = est

    local_maps = [LocalRcsMap(owner=u, values=maps[u]) for u in range(U)]
    true_cell = cell_of_point(tables.grid, target[0], target[1])
    detections = {}
    fused_maps = {}
    for method in FUSION_METHODS:
        fused = fuse(local_maps, method=method)
        detected = detect(fused)
        center = tables.grid.centers[detected[0], detected[1]]
        delta_star = detection_delta(target, center, config.cell_size_m)
        detections[method] = DetectionResult(
            detected_cell=detected,
            true_cell=true_cell,
            delta_star=delta_star,
            hits=tuple(delta_star <= d for d in DELTAS),
        )
        fused_maps[method] = fused
    return TrialOutcome(
        trial=trial,
        target_xy=(float(target[0]), float(target[1])),
        detections=detections,
        local_maps=local_maps if collect_maps else None,
        fused_maps=fused_maps if collect_maps else None,
    )


def estimate_cell(
    config: ScenarioConfig,
    tables: ScenarioTables,
    tx: int,
    listener: int,
    cell: tuple[int, int],
    trial: int,
    target_override=None,
) -> RcsEstimate:
    """Fast-path RCS estimate of one intended cell for one listener.

    Returns exactly the value run_trial would place in the listener's local
    map for that cell on the same trial.
    """
    if tx == listener:
        raise ValueError("half-duplex operation: a transmitter cannot listen to itself")
    if not tables.compatible_with(config):
        raise ConfigError("tables were built for a different scenario geometry")
    pair = next((p for p in tables.pairs if p.tx == tx and p.rx == listener), None)
    if pair is None:
        raise ValueError(f"UAV {tx} has no intended cells to estimate")
    matches = np.flatnonzero((pair.cells[:, 0] == cell[0]) & (pair.cells[:, 1] == cell[1]))
    if len(matches) == 0:
        raise ValueError(f"cell {cell} is not intended for UAV {tx}")
    if target_override is not None:
        target = np.array([target_override[0], target_override[1], 0.0])
    else:
        target = _draw_target(config, trial)
    proj = tables.deployment.positions[tx, :2]
    lit = bool(math.hypot(target[0] - proj[0], target[1] - proj[1]) <= tables.footprints[tx])
    g_target = steering_vector(aoa(tables.deployment.positions[listener], target), config.array_side)
    values = _estimate_pair_fast(config, tables, pair, trial, target, lit, g_target)
    return RcsEstimate(
        cell=(int(cell[0]), int(cell[1])),
        value_m2=float(values[matches[0]]),
        transmitter=tx,
        listener=listener,
    )


def _count_hits(config, options, trials, tables=None) -> dict:
    if tables is None:
        tables = build_tables(config, options)
    counts = {method: np.zeros(len(DELTAS), dtype=int) for method in FUSION_METHODS}
    for trial in trials:
        outcome = run_trial(config, trial, tables=tables)
        for method, result in outcome.detections.items():
            counts[method] += np.asarray(result.hits, dtype=int)
    return counts


def _count_hits_star(args):
    return _count_hits(*args)


def run_monte_carlo_all_fusions(
    config: ScenarioConfig,
    options: RunOptions | None = None,
    workers: int = 1,
    tables: ScenarioTables | None = None,
) -> dict[str, DetectionStats]:
    """Aggregate hit counts over config.trials trials for both fusion methods."""
    options = options or RunOptions()
    if config.trials < 1:
        raise ConfigError("trials: must be >= 1")
    trial_ids = list(range(config.trials))
    if workers <= 1:
        counts = _count_hits(config, options, trial_ids, tables)
    else:
        chunks = [trial_ids[i::workers] for i in range(workers)]
        chunks = [c for c in chunks if c]
        counts = {method: np.zeros(len(DELTAS), dtype=int) for method in FUSION_METHODS}
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            for part in pool.map(_count_hits_star, [(config, options, chunk) for chunk in chunks]):
                for method in counts:
                    counts[method] += part[method]
    return {
        method: DetectionStats(trials=config.trials, hits=tuple(int(h) for h in counts[method]))
        for method in FUSION_METHODS
    }


def run_monte_carlo(
    config: ScenarioConfig,
    options: RunOptions | None = None,
    workers: int = 1,
    tables: ScenarioTables | None = None,
) -> DetectionStats:
    """Monte Carlo detection statistics for the fusion method in `options`.

    Randomness is pre-split per trial, so any partition of the trial range
    across workers yields bit-identical statistics.
    """
    options = options or RunOptions()
    return run_monte_carlo_all_fusions(config, options, workers, tables)[options.fusion]


def _config_for_sweep_point(parameter: str, value: float, base: ScenarioConfig) -> ScenarioConfig:
    if parameter == "cell_size_constant_coverage":
        # Fixed grid and per-UAV coverage; the cell size rescales the whole
        # area, and the derived altitude grows with it.
        return replace(base, area_side_m=value * base.grid_side, altitude_mode="derived", altitude_m=None)
    if parameter == "cell_size_constant_area":
        # Fixed area and altitude; the cell size changes how many cells exist.
        new_side = round(base.area_side_m / value)
        if new_side < 1 or abs(new_side * value - base.area_side_m) > 1e-9 * base.area_side_m:
            raise ConfigError(f"grid_side: cell size {value} does not evenly divide the area side")
        altitude = (
            derive_altitude(base, base.cells_per_uav_side)
            if base.altitude_mode == "derived"
            else base.altitude_m
        )
        return replace(base, grid_side=new_side, altitude_mode="explicit", altitude_m=altitude)
    if parameter == "antennas":
        side = int(value)
        if side != value:
            raise ConfigError(f"array_side: must be an integer, got {value}")
        return replace(base, array_side=side, altitude_mode="derived", altitude_m=None)
    if parameter == "altitude":
        return replace(base, altitude_mode="explicit", altitude_m=float(value))
    if parameter == "ground_rcs":
        return replace(base, ground_rcs_m2=dbsm_to_m2(value))
    raise ConfigError(f"sweep.parameter: unknown parameter {parameter!r}")


def sweep(
    spec: SweepSpec,
    base_config: ScenarioConfig,
    base_options: RunOptions | None = None,
    workers: int = 1,
) -> tuple[list[SweepRow], list[str]]:
    """Run one Monte Carlo batch per sweep combination.

    Returns result rows plus a list of diagnostics for sweep values whose
    configuration is invalid; invalid points are reported, never silently
    skipped. Scenario tables are shared across the sigma_G, fusion, and delta
    axes of each sweep point.
    """
    base_options = base_options or RunOptions()
    rows: list[SweepRow] = []
    errors: list[str] = []
    sigma_values = spec.sigma_g_dbsm if spec.parameter != "ground_rcs" else (None,)
    for value in spec.values:
        try:
            point_config = _config_for_sweep_point(spec.parameter, value, base_config)
        except ConfigError as exc:
            errors.append(f"{spec.parameter}={value}: {exc}")
            continue
        for beamformer in spec.beamformers:
            options = replace(base_options, beamformer=beamformer)
            try:
                tables = build_tables(point_config, options)
            except ConfigError as exc:
                errors.append(f"{spec.parameter}={value}, beamformer={beamformer}: {exc}")
                continue
            for sigma_dbsm in sigma_values:
                if sigma_dbsm is None:
                    config = point_config
                    sigma_report = value
                else:
                    try:
                        config = replace(point_config, ground_rcs_m2=dbsm_to_m2(sigma_dbsm))
                    except ConfigError as exc:
                        errors.append(f"{spec.parameter}={value}, sigma_G={sigma_dbsm} dBsm: {exc}")
                        continue
                    sigma_report = sigma_dbsm
                stats = run_monte_carlo_all_fusions(config, options, workers, tables)
                for fusion in spec.fusions:
                    for delta in spec.deltas:
                        st = stats[fusion]
                        rows.append(
                            SweepRow(
                                sweep_param=spec.parameter,
                                sweep_value=float(value),
                                beamformer=beamformer,
                                fusion=fusion,
                                sigma_g_dbsm=float(sigma_report),
                                delta=delta,
                                trials=st.trials,
                                hits=st.hits[delta],
                                p_detect=st.p_detect(delta),
                                ci95_halfwidth=st.ci95_halfwidth(delta),
                                seed=config.master_seed,
                            )
                        )
    return rows, errors
