"""Plain-text file formats and atomic writes.

Formats (all whitespace-delimited or JSON, documented in the README):
  * lead field:   header "m n", then m rows of n reals; companion
                  positions file has n rows of 3 reals (meters)
  * time series:  header "T d fs", then T rows of d reals
  * cross spectrum: JSON, schema "cross-spectrum/1" with fields
                  frequency_hz, n, row-major re[][] and im[][], free-form meta
  * ground truth: JSON, schema "ground-truth/1"
  * run manifest: JSON, schema "run-manifest/1"
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .kron import LeadField
from .simulate import GroundTruth
from .spectral import CrossSpectrum, TimeSeriesSet

FLOAT_FMT = "%.10g"

CROSS_SPECTRUM_SCHEMA = "cross-spectrum/1"
GROUND_TRUTH_SCHEMA = "ground-truth/1"
MANIFEST_SCHEMA = "run-manifest/1"


def atomic_write_text(path, text: str) -> None:
    """Write-temp-then-rename so readers never observe partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _matrix_lines(matrix: np.ndarray) -> str:
    return "\n".join(" ".join(FLOAT_FMT % v for v in row) for row in matrix)


def write_lead_field(path, lead_field: LeadField, positions_path=None) -> None:
    text = f"{lead_field.m} {lead_field.n}\n" + _matrix_lines(lead_field.entries) + "\n"
    atomic_write_text(path, text)
    if positions_path is not None:
        if lead_field.source_positions is None:
            raise ValueError("lead field has no source positions to write")
        atomic_write_text(positions_path, _matrix_lines(lead_field.source_positions) + "\n")


def read_lead_field(path, positions_path=None) -> LeadField:
    with open(path) as handle:
        header = handle.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: expected header 'm n'")
        m, n = int(header[0]), int(header[1])
        entries = np.loadtxt(handle, ndmin=2)
    if entries.shape != (m, n):
        raise ValueError(f"{path}: body shape {entries.shape} does not match header ({m}, {n})")
    positions = None
    if positions_path is not None:
        positions = np.loadtxt(positions_path, ndmin=2)
    return LeadField(entries, source_positions=positions)


def write_time_series(path, series: TimeSeriesSet) -> None:
    header = f"{series.n_samples} {series.n_channels} {FLOAT_FMT % series.sampling_rate}\n"
    atomic_write_text(path, header + _matrix_lines(series.samples) + "\n")


def read_time_series(path) -> TimeSeriesSet:
    with open(path) as handle:
        header = handle.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: expected header 'T d fs'")
        t, d, fs = int(header[0]), int(header[1]), float(header[2])
        samples = np.loadtxt(handle, ndmin=2)
    if samples.shape != (t, d):
        raise ValueError(f"{path}: body shape {samples.shape} does not match header ({t}, {d})")
    return TimeSeriesSet(samples, fs)


def write_spectrum_matrix(path, frequency_hz: float, matrix: np.ndarray, meta: dict | None = None) -> None:
    """Cross-spectrum schema for an arbitrary complex square matrix.

    Solver estimates go through here: they share the schema but are not
    required to pass the measured-spectrum invariants (no PSD projection
    is applied to estimates).
    """
    matrix = np.asarray(matrix, dtype=complex)
    payload = {
        "schema": CROSS_SPECTRUM_SCHEMA,
        "frequency_hz": frequency_hz,
        "n": matrix.shape[0],
        "re": matrix.real.tolist(),
        "im": matrix.imag.tolist(),
    }
    if meta:
        payload["meta"] = meta
    atomic_write_text(path, json.dumps(payload) + "\n")


def write_cross_spectrum(path, spectrum: CrossSpectrum, meta: dict | None = None) -> None:
    write_spectrum_matrix(path, spectrum.frequency_hz, spectrum.matrix, meta)


def read_spectrum_matrix(path) -> tuple[float, np.ndarray, dict]:
    with open(path) as handle:
        payload = json.load(handle)
    if payload.get("schema") != CROSS_SPECTRUM_SCHEMA:
        raise ValueError(f"{path}: unexpected schema {payload.get('schema')!r}")
    matrix = np.asarray(payload["re"], dtype=float) + 1j * np.asarray(payload["im"], dtype=float)
    if matrix.shape != (payload["n"], payload["n"]):
        raise ValueError(f"{path}: matrix shape does not match n={payload['n']}")
    return float(payload["frequency_hz"]), matrix, payload.get("meta", {})


def read_cross_spectrum(path) -> tuple[CrossSpectrum, dict]:
    frequency_hz, matrix, meta = read_spectrum_matrix(path)
    return CrossSpectrum(frequency_hz, matrix), meta


def write_ground_truth(path, truth: GroundTruth, configuration: int) -> None:
    payload = {
        "schema": GROUND_TRUTH_SCHEMA,
        "configuration": configuration,
        "source_indices": [int(i) for i in truth.source_indices],
        "true_pairs": [[int(p), int(q)] for p, q in truth.true_pairs],
    }
    atomic_write_text(path, json.dumps(payload) + "\n")


def read_ground_truth(path) -> dict:
    with open(path) as handle:
        payload = json.load(handle)
    if payload.get("schema") != GROUND_TRUTH_SCHEMA:
        raise ValueError(f"{path}: unexpected schema {payload.get('schema')!r}")
    return payload


def write_delimited(path, header: list[str], rows: list[list]) -> None:
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(_format_cell(cell) for cell in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _format_cell(cell) -> str:
    if isinstance(cell, bool):
        return "1" if cell else "0"
    if isinstance(cell, float):
        return FLOAT_FMT % cell
    if cell is None:
        return "NA"
    return str(cell)


def read_delimited(path) -> tuple[list[str], list[list[str]]]:
    with open(path) as handle:
        lines = [line.rstrip("\n") for line in handle if line.strip()]
    if not lines:
        return [], []
    header = lines[0].split("\t")
    return header, [line.split("\t") for line in lines[1:]]
