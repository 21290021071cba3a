"""Grid construction, UAV deployment, beam footprints, and angle geometry.

Conventions: the grid origin is at (0, 0); cell (a, b) spans
[a*d, (a+1)*d] x [b*d, (b+1)*d] with its center at ((a+1/2)d, (b+1/2)d, 0).
UAV arrays face straight down; elevation is measured from that boresight,
so theta = 0 means directly below the UAV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ScenarioConfig

__all__ = [
    "AoA",
    "CellGrid",
    "UavDeployment",
    "CellSets",
    "build_grid",
    "deploy_uavs",
    "hpbw",
    "derive_altitude",
    "footprint_radius",
    "classify_cells",
    "aoa",
    "path_distances",
    "chebyshev_cell_distance",
    "cell_of_point",
]

# Absolute slack for closed containment tests; geometric thresholds that are
# algebraically exact (inscribed square == block edge) must not fail to rounding.
_GEOM_EPS = 1e-9


@dataclass(frozen=True)
class AoA:
    """Angle of arrival: elevation from the downward boresight, azimuth from +x."""

    theta: float
    phi: float


@dataclass(frozen=True)
class CellGrid:
    side_count: int
    cell_size: float
    centers: np.ndarray  # (L, L, 3), centers[a, b] = ((a+.5)d, (b+.5)d, 0)


@dataclass(frozen=True)
class UavDeployment:
    positions: np.ndarray  # (U, 3)
    altitude: float
    block_starts: np.ndarray  # (U, 2) first (a, b) cell of each UAV's block
    block_side: int  # cells per block side, L / sqrt(U)


@dataclass(frozen=True)
class CellSets:
    """Per-UAV cell partition: intended (inside the inscribed square of the
    HPBW footprint), clutter (center inside the circle but not intended), and
    their union (all illuminated cells). Arrays of (a, b) index pairs in
    row-major order."""

    intended: np.ndarray
    clutter: np.ndarray

    @property
    def illuminated(self) -> np.ndarray:
        if len(self.intended) == 0:
            return self.clutter
        if len(self.clutter) == 0:
            return self.intended
        both = np.vstack([self.intended, self.clutter])
        order = np.lexsort((both[:, 1], both[:, 0]))
        return both[order]


def build_grid(config: ScenarioConfig) -> CellGrid:
    """Section the area into grid_side x grid_side square cells."""
    L = config.grid_side
    if L <= 0 or config.area_side_m <= 0:
        raise ConfigError("grid_side/area_side_m: must be positive")
    d = config.cell_size_m
    axis = (np.arange(L) + 0.5) * d
    centers = np.zeros((L, L, 3))
    centers[:, :, 0] = axis[:, None]
    centers[:, :, 1] = axis[None, :]
    return CellGrid(side_count=L, cell_size=d, centers=centers)


def hpbw(n: int) -> float:
    """Half-power beam width of the n-element side of the array, radians.

    Broadside approximation for a uniform half-wavelength-spaced line of n
    elements, 0.886 * 2 / n, applied to both principal planes of the square
    array. Strictly decreasing in n.
    """
    if n < 2:
        raise ValueError(f"array side must be >= 2 for a beam width, got {n}")
    return 0.886 * 2.0 / n


def derive_altitude(config: ScenarioConfig, cells_per_side: int) -> float:
    """Minimum altitude whose inscribed footprint square spans cells_per_side cells.

    The footprint circle has radius h*tan(HPBW/2); its inscribed square has
    side r*sqrt(2). Solving r*sqrt(2) = c*d for h gives the altitude at which
    a c x c block just fits.
    """
    if cells_per_side < 1:
        raise ValueError(f"cells_per_side must be >= 1, got {cells_per_side}")
    half_beam = hpbw(config.array_side) / 2.0
    return cells_per_side * config.cell_size_m / (math.sqrt(2.0) * math.tan(half_beam))


def footprint_radius(config: ScenarioConfig, altitude: float) -> float:
    """Ground radius of the HPBW projection at the given altitude."""
    return altitude * math.tan(hpbw(config.array_side) / 2.0)


def deploy_uavs(config: ScenarioConfig, grid: CellGrid) -> UavDeployment:
    """Place sqrt(U) x sqrt(U) UAVs above the centers of equal cell blocks.

    UAV index u = i * sqrt(U) + j sits above block (i, j); blocks tile the
    grid with no overlap. Altitude is derived from the per-UAV coverage
    (block side in cells) unless the config fixes it explicitly.
    """
    side = config.uavs_per_side
    if side * side != config.uav_count:
        raise ConfigError(f"uav_count: must be a perfect square, got {config.uav_count}")
    if grid.side_count % side != 0:
        raise ConfigError(f"grid_side: not divisible by sqrt(uav_count)={side}")
    block_side = grid.side_count // side
    if config.altitude_mode == "explicit":
        altitude = float(config.altitude_m)
    else:
        altitude = derive_altitude(config, block_side)
    block_m = block_side * grid.cell_size
    positions = np.zeros((config.uav_count, 3))
    starts = np.zeros((config.uav_count, 2), dtype=int)
    for i in range(side):
        for j in range(side):
            u = i * side + j
            positions[u] = ((i + 0.5) * block_m, (j + 0.5) * block_m, altitude)
            starts[u] = (i * block_side, j * block_side)
    return UavDeployment(positions=positions, altitude=altitude, block_starts=starts, block_side=block_side)


def classify_cells(config: ScenarioConfig, uav: int, grid: CellGrid, deployment: UavDeployment) -> CellSets:
    """Split the grid into intended / clutter cells for one UAV's footprint.

    Intended cells lie completely inside the largest axis-aligned square
    inscribed in the HPBW ground circle; clutter cells have their center
    inside the circle without being intended. Both sets may be empty at low
    altitude.
    """
    ux, uy, h = deployment.positions[uav]
    radius = footprint_radius(config, h)
    half_square = radius * math.sqrt(2.0) / 2.0
    d = grid.cell_size
    centers = grid.centers
    dx = np.abs(centers[:, :, 0] - ux)
    dy = np.abs(centers[:, :, 1] - uy)
    tol = _GEOM_EPS * max(1.0, radius)
    inside_square = np.maximum(dx, dy) + d / 2.0 <= half_square + tol
    inside_circle = np.hypot(dx, dy) <= radius + tol
    intended = np.argwhere(inside_square)
    clutter = np.argwhere(inside_circle & ~inside_square)
    return CellSets(intended=intended, clutter=clutter)


def aoa(observer: np.ndarray, point: np.ndarray) -> AoA:
    """Angle of arrival at `observer` of a ray from ground `point`.

    Elevation arctan(horizontal distance / height difference), azimuth the
    planar angle of (point - observer) from +x in [0, 2*pi). Straight down
    maps to (0, 0).
    """
    observer = np.asarray(observer, dtype=float)
    point = np.asarray(point, dtype=float)
    dz = observer[2] - point[2]
    if dz <= 0:
        raise ValueError("observed point must lie below the observer")
    dx = point[0] - observer[0]
    dy = point[1] - observer[1]
    rho = math.hypot(dx, dy)
    if rho == 0.0:
        return AoA(theta=0.0, phi=0.0)
    theta = math.atan(rho / dz)
    phi = math.atan2(dy, dx) % (2.0 * math.pi)
    return AoA(theta=theta, phi=phi)


def path_distances(tx: np.ndarray, point: np.ndarray, rx: np.ndarray) -> tuple[float, float]:
    """Euclidean 3-D distances transmitter -> point and point -> listener."""
    tx = np.asarray(tx, dtype=float)
    point = np.asarray(point, dtype=float)
    rx = np.asarray(rx, dtype=float)
    d1 = float(np.linalg.norm(point - tx))
    d2 = float(np.linalg.norm(rx - point))
    return d1, d2


def chebyshev_cell_distance(a, b) -> int:
    """L-infinity distance between two (row, col) cell index pairs."""
    return int(max(abs(a[0] - b[0]), abs(a[1] - b[1])))


def cell_of_point(grid: CellGrid, x: float, y: float) -> tuple[int, int]:
    """Grid cell containing the ground point, clipped to the grid."""
    L = grid.side_count
    a = min(max(int(x / grid.cell_size), 0), L - 1)
    b = min(max(int(y / grid.cell_size), 0), L - 1)
    return a, b
