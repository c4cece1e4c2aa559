"""Mel, Bark and gammatone filter banks on FFT bins.

All three banks map a one-sided ``fft_size//2 + 1`` bin spectrum onto
``n_bands`` perceptually spaced bands and share the same conventions:
band centers equally spaced on the respective auditory scale, nonnegative
weights, and every band peak-normalized to 1 (no area normalization), so
the three banks are directly comparable.

Scales:
  mel        m(f) = 2595 * log10(1 + f / 700)              (HTK)
  Bark       z(f) = 26.81 * f / (1960 + f) - 0.53          (Traunmuller)
  ERB-rate   E(f) = 21.4 * log10(1 + 4.37 * f / 1000)      (Glasberg-Moore)

Mel and Bark bands are triangles in linear frequency; the gammatone bank
uses the 4th-order magnitude response
``(1 + ((f - fc) / bw)^2) ** -2`` with ``bw = 1.019 * ERB(fc)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BANK_KINDS = ("mel", "bark", "gammatone")

_TINY = 1e-12


@dataclass
class FilterBank:
    kind: str
    weights: np.ndarray      # (n_bands, n_bins), in [0, 1]
    center_freqs: np.ndarray  # Hz, strictly increasing
    f_min: float
    f_max: float

    @property
    def n_bands(self) -> int:
        return self.weights.shape[0]

    @property
    def n_bins(self) -> int:
        return self.weights.shape[1]


# --- scale conversions -------------------------------------------------

def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def hz_to_bark(f):
    """Traunmuller Bark; negative values at very low f are clamped to 0."""
    f = np.asarray(f, dtype=np.float64)
    return np.maximum(26.81 * f / (1960.0 + f) - 0.53, 0.0)


def bark_to_hz(z):
    z = np.asarray(z, dtype=np.float64) + 0.53
    return 1960.0 * z / (26.81 - z)


def hz_to_erb_rate(f):
    return 21.4 * np.log10(1.0 + 4.37 * np.asarray(f, dtype=np.float64) / 1000.0)


def erb_rate_to_hz(e):
    return (10.0 ** (np.asarray(e, dtype=np.float64) / 21.4) - 1.0) * 1000.0 / 4.37


def erb_bandwidth(f):
    """Equivalent rectangular bandwidth in Hz at center frequency ``f``."""
    return 24.7 * (4.37 * np.asarray(f, dtype=np.float64) / 1000.0 + 1.0)


# --- bank construction -------------------------------------------------

def _validate(n_bands, f_min, f_max, fft_size, sample_rate):
    if n_bands < 2:
        raise ValueError(f"n_bands must be >= 2, got {n_bands}")
    if not (0.0 <= f_min < f_max <= sample_rate / 2.0):
        raise ValueError(
            f"need 0 <= f_min < f_max <= nyquist, got f_min={f_min}, "
            f"f_max={f_max}, nyquist={sample_rate / 2.0}"
        )
    if fft_size < 2:
        raise ValueError(f"fft_size must be >= 2, got {fft_size}")


def _bin_freqs(fft_size, sample_rate):
    return np.arange(fft_size // 2 + 1, dtype=np.float64) * sample_rate / fft_size


def _triangle_bank(kind, fwd, inv, n_bands, f_min, f_max, fft_size, sample_rate):
    _validate(n_bands, f_min, f_max, fft_size, sample_rate)
    freqs = _bin_freqs(fft_size, sample_rate)
    edges_hz = inv(np.linspace(fwd(f_min), fwd(f_max), n_bands + 2))
    # Guard against float drift (and the Bark low-f clamp) moving the outer
    # edges off [f_min, f_max]; the outer edges pin band coverage.
    edges_hz = np.clip(edges_hz, f_min, f_max)
    edges_hz[0] = f_min
    edges_hz[-1] = f_max

    lo, ctr, hi = edges_hz[:-2, None], edges_hz[1:-1, None], edges_hz[2:, None]
    up = (freqs[None, :] - lo) / np.maximum(ctr - lo, _TINY)
    down = (hi - freqs[None, :]) / np.maximum(hi - ctr, _TINY)
    weights = np.clip(np.minimum(up, down), 0.0, 1.0)
    return FilterBank(kind, weights, edges_hz[1:-1].copy(), float(f_min), float(f_max))


def design_mel_bank(n_bands=128, f_min=50.0, f_max=12000.0,
                    fft_size=512, sample_rate=24000) -> FilterBank:
    """Triangular bank with centers equally spaced on the HTK mel scale."""
    return _triangle_bank("mel", hz_to_mel, mel_to_hz,
                          n_bands, f_min, f_max, fft_size, sample_rate)


def design_bark_bank(n_bands=128, f_min=50.0, f_max=12000.0,
                     fft_size=512, sample_rate=24000) -> FilterBank:
    """Triangular bank with centers equally spaced on the Bark scale."""
    return _triangle_bank("bark", hz_to_bark, bark_to_hz,
                          n_bands, f_min, f_max, fft_size, sample_rate)


def design_gammatone_bank(n_bands=128, f_min=50.0, f_max=12000.0,
                          fft_size=512, sample_rate=24000) -> FilterBank:
    """4th-order gammatone magnitude bank, centers on the ERB-rate scale."""
    _validate(n_bands, f_min, f_max, fft_size, sample_rate)
    freqs = _bin_freqs(fft_size, sample_rate)
    centers = erb_rate_to_hz(
        np.linspace(hz_to_erb_rate(f_min), hz_to_erb_rate(f_max), n_bands)
    )
    centers = np.clip(centers, f_min, f_max)
    bw = 1.019 * erb_bandwidth(centers)
    dev = (freqs[None, :] - centers[:, None]) / bw[:, None]
    weights = (1.0 + dev ** 2) ** -2.0
    weights /= np.maximum(weights.max(axis=1, keepdims=True), _TINY)
    return FilterBank("gammatone", weights, centers, float(f_min), float(f_max))


def design_bank(kind: str, n_bands=128, f_min=50.0, f_max=12000.0,
                fft_size=512, sample_rate=24000) -> FilterBank:
    """Dispatch on ``kind`` in {mel, bark, gammatone}."""
    try:
        fn = {"mel": design_mel_bank,
              "bark": design_bark_bank,
              "gammatone": design_gammatone_bank}[kind]
    except KeyError:
        raise ValueError(f"unknown filter bank kind {kind!r}; choose one of {BANK_KINDS}")
    return fn(n_bands, f_min, f_max, fft_size, sample_rate)
