from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.linalg.nonhermitian import SpectralDecomposition
from src.utils.logging import setup_logger


logger = setup_logger()

OVERLAP_FLOOR = 1.0 - 1e-8


@dataclass(frozen=True)
class OverlapRecord:
    index: int
    eigenvalue: complex
    overlap: float


def overlap_records(spec: SpectralDecomposition) -> Tuple[List[OverlapRecord], int]:
    """Diagonal overlaps O_ii = ||R_i||^2 ||L_i||^2 of the non-defective pairs, and how many were excluded."""
    O = spec.overlaps()
    n = O.size
    bad = np.zeros(n, dtype=bool) if spec.defective is None else np.asarray(spec.defective, dtype=bool)
    low = ~bad & (O < OVERLAP_FLOOR)
    if np.any(low):
        # Cauchy-Schwarz with L_i^T R_i = 1 forbids this; treat as a numerically broken pair
        logger.warning(f"[overlaps] {int(low.sum())} overlap(s) below 1 - 1e-8 (min {float(O[low].min()):.6g})")
        bad = bad | low
    excluded = int(bad.sum())
    if excluded:
        logger.warning(f"[overlaps] excluded {excluded} of {n} eigenpairs flagged defective")
    records = [
        OverlapRecord(index=i, eigenvalue=complex(spec.eigenvalues[i]), overlap=float(O[i]))
        for i in range(n)
        if not bad[i]
    ]
    return records, excluded


def diagonal_overlaps(spec: SpectralDecomposition) -> List[OverlapRecord]:
    return overlap_records(spec)[0]


def bulk_overlap_ratio(records: List[OverlapRecord], N: int, radius: float = 0.5, center: complex = 0j) -> Tuple[float, float]:
    """Means of O_ii / N and of 1 - |sigma_i|^2 over eigenvalues with |sigma_i - center| <= radius."""
    sel = [r for r in records if abs(r.eigenvalue - center) <= radius]
    if not sel:
        return float("nan"), float("nan")
    o = np.mean([r.overlap / N for r in sel])
    c = np.mean([1.0 - abs(r.eigenvalue) ** 2 for r in sel])
    return float(o), float(c)
