"""Local map assembly, fusion-center averaging, and the detection test.

Maps are L x L float arrays; NaN marks a cell with no estimate (the owner's
own cells on a local map, or cells never illuminated). No-estimate cells are
excluded from fusion and from the argmax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LocalRcsMap",
    "FusedMap",
    "DetectionResult",
    "normalize_map",
    "fuse",
    "detect",
    "hypothesis_test",
    "detection_delta",
]


@dataclass(frozen=True)
class LocalRcsMap:
    owner: int
    values: np.ndarray  # (L, L), NaN = no estimate


@dataclass(frozen=True)
class FusedMap:
    values: np.ndarray
    method: str  # "avg" or "prenorm"


@dataclass(frozen=True)
class DetectionResult:
    detected_cell: tuple[int, int]
    true_cell: tuple[int, int]
    delta_star: int  # smallest delta for which the detection counts as a hit
    hits: tuple[bool, bool, bool]  # delta = 0, 1, 2


def normalize_map(local: LocalRcsMap) -> LocalRcsMap:
    """Rescale finite entries to [0, 1]; a constant map maps to all zeros."""
    values = local.values
    finite = np.isfinite(values)
    if not finite.any():
        return LocalRcsMap(owner=local.owner, values=values.copy())
    lo = np.nanmin(values)
    hi = np.nanmax(values)
    out = np.full_like(values, np.nan)
    if hi == lo:
        out[finite] = 0.0
    else:
        out[finite] = (values[finite] - lo) / (hi - lo)
    return LocalRcsMap(owner=local.owner, values=out)


def fuse(maps: list[LocalRcsMap], method: str = "avg") -> FusedMap:
    """Average the local maps cell by cell over the maps that estimated each cell.

    "prenorm" rescales every local map to [0, 1] before averaging. A fused
    cell is NaN exactly when no local map holds an estimate for it.
    """
    if not maps:
        raise ValueError("at least one local map is required")
    if method == "prenorm":
        maps = [normalize_map(m) for m in maps]
    elif method != "avg":
        raise ValueError(f"unknown fusion method {method!r}")
    stack = np.stack([m.values for m in maps])
    finite = np.isfinite(stack)
    counts = finite.sum(axis=0)
    sums = np.where(finite, stack, 0.0).sum(axis=0)
    fused = np.divide(sums, counts, out=np.full(counts.shape, np.nan), where=counts > 0)
    return FusedMap(values=fused, method=method)


def detect(fused: FusedMap | np.ndarray) -> tuple[int, int]:
    """Cell of highest fused estimate; ties break to the smallest row-major index."""
    values = fused.values if isinstance(fused, FusedMap) else fused
    if not np.isfinite(values).any():
        raise ValueError("no cell carries an estimate")
    flat = np.where(np.isfinite(values), values, -np.inf)
    idx = int(np.argmax(flat))
    return np.unravel_index(idx, values.shape)


def hypothesis_test(target_pos, cell_center, cell_size: float, delta: int = 0) -> bool:
    """True when the target counts as located at the cell.

    The test is the closed L-infinity threshold ||target - center||_inf <=
    d * (1/2 + delta); delta = 0 is the plain cell-containment test and larger
    delta relaxes it by whole cells.
    """
    if cell_size <= 0:
        raise ValueError("cell size must be positive")
    if delta < 0:
        raise ValueError("delta must be a non-negative integer")
    dist = max(abs(target_pos[0] - cell_center[0]), abs(target_pos[1] - cell_center[1]))
    return dist <= cell_size * (0.5 + delta)


def detection_delta(target_pos, cell_center, cell_size: float) -> int:
    """Smallest delta at which hypothesis_test accepts, i.e. ceil(L_inf/d - 1/2)."""
    dist = max(abs(target_pos[0] - cell_center[0]), abs(target_pos[1] - cell_center[1]))
    return max(0, math.ceil(dist / cell_size - 0.5))
