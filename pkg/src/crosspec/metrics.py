"""Quantitative scoring of estimated cross-power spectra against ground
truth: supra-threshold connection extraction, the order-invariant pair
distance, the weighted localization error, and sparsity statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulate import GroundTruth
from .spectral import CrossSpectrum

DEFAULT_THRESHOLD_FRACTION = 0.5


@dataclass(frozen=True)
class ConnectionSet:
    """Upper-triangle pairs (i, j, weight) whose magnitude clears ``threshold``."""

    pairs: tuple[tuple[int, int, float], ...]
    threshold: float


@dataclass(frozen=True)
class EvalReport:
    err_re: float
    err_im: float
    count_re: int
    count_im: int
    has_nonnull_re: bool
    has_nonnull_im: bool


def supra_threshold(part: np.ndarray, fraction: float = DEFAULT_THRESHOLD_FRACTION) -> ConnectionSet:
    """All i < j with |part_ij| at or above fraction·max over the strict
    upper triangle; empty with threshold 0 when that triangle is all zero."""
    part = np.asarray(part, dtype=float)
    if part.ndim != 2 or part.shape[0] != part.shape[1]:
        raise ValueError(f"part must be square, got shape {part.shape}")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    rows, cols = np.triu_indices(part.shape[0], k=1)
    magnitudes = np.abs(part[rows, cols])
    if magnitudes.size == 0 or magnitudes.max() == 0.0:
        return ConnectionSet((), 0.0)
    threshold = fraction * float(magnitudes.max())
    keep = magnitudes >= threshold
    pairs = tuple(
        (int(i), int(j), float(w)) for i, j, w in zip(rows[keep], cols[keep], magnitudes[keep])
    )
    return ConnectionSet(pairs, threshold)


def pair_distance(w_pair, v_pair) -> float:
    """Order-invariant distance between two unordered pairs of 3-D points:
    sqrt(½·min over the two alignments of the summed squared distances)."""
    w_i, w_j = (np.asarray(p, dtype=float) for p in w_pair)
    v_p, v_q = (np.asarray(p, dtype=float) for p in v_pair)

    def sq(a, b):
        d = a - b
        return float(d @ d)

    direct = sq(w_i, v_p) + sq(w_j, v_q)
    swapped = sq(w_i, v_q) + sq(w_j, v_p)
    return float(np.sqrt(0.5 * min(direct, swapped)))


def err_metric(
    part: np.ndarray,
    positions: np.ndarray,
    true_pairs,
    fraction: float = DEFAULT_THRESHOLD_FRACTION,
) -> float:
    """Weighted sum, over supra-threshold pairs, of each pair's distance to
    the nearest truly coupled pair; weights are magnitudes normalized by
    the largest upper-triangle magnitude. Empty reconstructions score 0 by
    convention (pair with the non-null flags so emptiness is visible)."""
    true_pairs = list(true_pairs)
    if not true_pairs:
        raise ValueError("true_pairs must be nonempty")
    connections = supra_threshold(part, fraction)
    if not connections.pairs:
        return 0.0
    positions = np.asarray(positions, dtype=float)
    max_weight = connections.threshold / fraction
    total = 0.0
    for i, j, weight in connections.pairs:
        nearest = min(
            pair_distance((positions[i], positions[j]), (vp, vq)) for vp, vq in true_pairs
        )
        total += (weight / max_weight) * nearest
    return total


def evaluate_matrix(
    matrix: np.ndarray,
    truth: GroundTruth,
    positions_fine: np.ndarray,
    positions_coarse: np.ndarray,
    fraction: float = DEFAULT_THRESHOLD_FRACTION,
) -> EvalReport:
    """Score a complex estimate matrix; real and imaginary parts separately.

    Reconstructed pair positions live in the coarse space, true pairs in
    the fine space. Accepts raw matrices because solver estimates are not
    PSD-projected and need not satisfy measured-spectrum invariants.
    """
    matrix = np.asarray(matrix, dtype=complex)
    positions_fine = np.asarray(positions_fine, dtype=float)
    positions_coarse = np.asarray(positions_coarse, dtype=float)
    if matrix.shape[0] != positions_coarse.shape[0]:
        raise ValueError("estimate size does not match the coarse position count")
    true_position_pairs = [
        (positions_fine[p], positions_fine[q]) for p, q in truth.true_pairs
    ]
    reports = {}
    rows, cols = np.triu_indices(matrix.shape[0], k=1)
    for name, part in (("re", matrix.real), ("im", matrix.imag)):
        connections = supra_threshold(part, fraction)
        has_nonnull = bool(np.any(part[rows, cols] != 0.0))
        err = err_metric(part, positions_coarse, true_position_pairs, fraction)
        reports[name] = (err, len(connections.pairs), has_nonnull)
    return EvalReport(
        err_re=reports["re"][0],
        err_im=reports["im"][0],
        count_re=reports["re"][1],
        count_im=reports["im"][1],
        has_nonnull_re=reports["re"][2],
        has_nonnull_im=reports["im"][2],
    )


def evaluate(
    estimate: CrossSpectrum,
    truth: GroundTruth,
    positions_fine: np.ndarray,
    positions_coarse: np.ndarray,
    fraction: float = DEFAULT_THRESHOLD_FRACTION,
) -> EvalReport:
    return evaluate_matrix(estimate.matrix, truth, positions_fine, positions_coarse, fraction)


@dataclass(frozen=True)
class SparsityRow:
    """One cell of the sparsity table: statistics for one (λ, configuration,
    part) group. Count statistics over non-null runs are None when every
    run in the group was null; ``count_mean_all`` averages over all runs
    with null runs contributing 0."""

    lambda_key: float
    configuration: int
    part: str
    runs: int
    pct_nonnull: float
    count_min: int | None
    count_max: int | None
    count_mean: float | None
    count_mean_all: float


def sparsity_table(groups: dict) -> list[SparsityRow]:
    """Sparsity statistics per (lambda_key, configuration) group of
    EvalReports, split by part, sorted by (configuration, λ, part)."""
    rows = []
    for (lambda_key, configuration), reports in groups.items():
        if not reports:
            continue
        for part in ("re", "im"):
            if part == "re":
                counts = [r.count_re for r in reports]
                nonnull = [r.has_nonnull_re for r in reports]
            else:
                counts = [r.count_im for r in reports]
                nonnull = [r.has_nonnull_im for r in reports]
            kept = [c for c, keep in zip(counts, nonnull) if keep]
            rows.append(
                SparsityRow(
                    lambda_key=float(lambda_key),
                    configuration=int(configuration),
                    part=part,
                    runs=len(reports),
                    pct_nonnull=100.0 * sum(nonnull) / len(reports),
                    count_min=min(kept) if kept else None,
                    count_max=max(kept) if kept else None,
                    count_mean=float(np.mean(kept)) if kept else None,
                    count_mean_all=float(np.mean(counts)),
                )
            )
    rows.sort(key=lambda r: (r.configuration, r.lambda_key, r.part))
    return rows
