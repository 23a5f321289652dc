"""Welch cross-power spectrum estimation and the exact forward map between
source- and sensor-level spectra.

Conventions, fixed across the repository:
  * per-segment DFTs carry the 1/L normalization, and the Welch average
    compensates with L/(P·W), W = mean(window²);
  * segments that would overrun the series end are dropped, never padded;
  * bin b maps to b·fs/L Hz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kron import LeadField, vec

DEFAULT_SEGMENT_LENGTH = 256
DEFAULT_OVERLAP = 0.5
DEFAULT_SAMPLING_RATE = 256.0

HERMITIAN_RTOL = 1e-10


@dataclass(frozen=True)
class TimeSeriesSet:
    """T × d multichannel record sampled at ``sampling_rate`` Hz."""

    samples: np.ndarray
    sampling_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2:
            raise ValueError(f"samples must be 2-D (time × channels), got shape {samples.shape}")
        if samples.shape[0] < 2:
            raise ValueError("need at least 2 time points")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if self.sampling_rate <= 0:
            raise ValueError("sampling_rate must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class WelchConfig:
    """Segment length (samples), overlap fraction in [0, 1), sampling rate."""

    segment_length: int = DEFAULT_SEGMENT_LENGTH
    overlap_fraction: float = DEFAULT_OVERLAP
    sampling_rate: float = DEFAULT_SAMPLING_RATE

    def __post_init__(self):
        if self.segment_length < 1:
            raise ValueError("segment_length must be positive")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValueError("overlap_fraction must lie in [0, 1)")
        if self.sampling_rate <= 0:
            raise ValueError("sampling_rate must be positive")
        if self.hop < 1:
            raise ValueError("overlap leaves an empty hop")

    @property
    def hop(self) -> int:
        return self.segment_length - int(np.floor(self.overlap_fraction * self.segment_length))

    def frequency_of_bin(self, frequency_bin: int) -> float:
        return frequency_bin * self.sampling_rate / self.segment_length


@dataclass(frozen=True)
class CrossSpectrum:
    """Hermitian d × d cross-power spectrum at one frequency (Hz)."""

    frequency_hz: float
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"matrix must be square, got shape {matrix.shape}")
        scale = np.max(np.abs(matrix)) if matrix.size else 0.0
        tol = HERMITIAN_RTOL * max(scale, 1.0)
        if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > tol:
            raise ValueError("matrix is not Hermitian within tolerance")
        diag = np.diagonal(matrix)
        if np.max(np.abs(diag.imag), initial=0.0) > tol or np.min(diag.real, initial=0.0) < -tol:
            raise ValueError("diagonal entries must be real and nonnegative within tolerance")
        object.__setattr__(self, "matrix", matrix)

    @property
    def channel_count(self) -> int:
        return self.matrix.shape[0]


def hamming_window(length: int) -> np.ndarray:
    """w(τ) = 0.54 − 0.46·cos(2πτ/(length−1)); the single value 1.0 for length 1."""
    if length < 1:
        raise ValueError("length must be positive")
    if length == 1:
        return np.ones(1)
    tau = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * tau / (length - 1))


def _windowed_dfts(series: TimeSeriesSet, cfg: WelchConfig) -> tuple[np.ndarray, float]:
    """Per-segment normalized DFTs, shape (P, L, d), plus W = mean(window²)."""
    samples = series.samples
    length = cfg.segment_length
    if length > series.n_samples:
        raise ValueError(
            f"series of length {series.n_samples} is shorter than one segment ({length})"
        )
    starts = np.arange(0, series.n_samples - length + 1, cfg.hop)
    window = hamming_window(length)
    segments = np.stack([samples[s : s + length] for s in starts])  # (P, L, d)
    dfts = np.fft.fft(segments * window[None, :, None], axis=1) / length
    w_norm = float(np.sum(window**2) / length)
    return dfts, w_norm


def welch_cross_spectrum(
    series: TimeSeriesSet, cfg: WelchConfig, frequency_bin: int
) -> CrossSpectrum:
    """Welch estimate of the cross-power spectrum at one frequency bin.

    Averages x̂⁽ᵖ⁾(f)·x̂⁽ᵖ⁾(f)ᴴ over the P overlapping Hamming-windowed
    segments, scaled by L/(P·W). Hermitian positive semidefinite by
    construction.
    """
    if not 0 <= frequency_bin < cfg.segment_length:
        raise ValueError(
            f"frequency_bin must lie in 0..{cfg.segment_length - 1}, got {frequency_bin}"
        )
    dfts, w_norm = _windowed_dfts(series, cfg)
    at_bin = dfts[:, frequency_bin, :]  # (P, d)
    n_segments = at_bin.shape[0]
    scale = cfg.segment_length / (n_segments * w_norm)
    matrix = scale * np.einsum("pi,pj->ij", at_bin, at_bin.conj())
    return CrossSpectrum(cfg.frequency_of_bin(frequency_bin), matrix)


def welch_full_spectrum(series: TimeSeriesSet, cfg: WelchConfig) -> list[CrossSpectrum]:
    """Welch estimates at every bin 0..L−1, in bin order."""
    dfts, w_norm = _windowed_dfts(series, cfg)
    n_segments = dfts.shape[0]
    scale = cfg.segment_length / (n_segments * w_norm)
    matrices = scale * np.einsum("pfi,pfj->fij", dfts, dfts.conj())
    return [
        CrossSpectrum(cfg.frequency_of_bin(b), matrices[b]) for b in range(cfg.segment_length)
    ]


def channel_power_spectra(series: TimeSeriesSet, cfg: WelchConfig) -> np.ndarray:
    """Per-channel Welch power spectra, shape (L, d); the diagonal path only."""
    dfts, w_norm = _windowed_dfts(series, cfg)
    n_segments = dfts.shape[0]
    scale = cfg.segment_length / (n_segments * w_norm)
    return scale * np.sum(np.abs(dfts) ** 2, axis=0)


def forward_cross_spectrum(
    lead_field: LeadField, sx: CrossSpectrum, se: CrossSpectrum
) -> CrossSpectrum:
    """Exact sensor-level spectrum G·Sˣ·Gᵀ + Sᵉ for a real mixing matrix."""
    g = lead_field.entries
    if sx.channel_count != lead_field.n:
        raise ValueError(
            f"source spectrum has {sx.channel_count} channels, lead field expects {lead_field.n}"
        )
    if se.channel_count != lead_field.m:
        raise ValueError(
            f"noise spectrum has {se.channel_count} channels, lead field expects {lead_field.m}"
        )
    if sx.frequency_hz != se.frequency_hz:
        raise ValueError("source and noise spectra refer to different frequencies")
    return CrossSpectrum(sx.frequency_hz, g @ sx.matrix @ g.T + se.matrix)


def peak_bin(
    spectra: list[CrossSpectrum],
    channel_pair: tuple[int, int],
    band: tuple[float, float],
) -> int:
    """Bin inside [f_lo, f_hi] maximizing |S_ij|; ties break to the lowest bin."""
    f_lo, f_hi = band
    i, j = channel_pair
    candidates = [k for k, s in enumerate(spectra) if f_lo <= s.frequency_hz <= f_hi]
    if not candidates:
        raise ValueError(f"band [{f_lo}, {f_hi}] Hz contains no spectral bins")
    magnitudes = np.array([abs(spectra[k].matrix[i, j]) for k in candidates])
    return candidates[int(np.argmax(magnitudes))]


def split_data_vectors(spectrum: CrossSpectrum) -> tuple[np.ndarray, np.ndarray]:
    """Column-major real/imaginary vectorization of a cross spectrum."""
    return vec(spectrum.matrix.real), vec(spectrum.matrix.imag)
