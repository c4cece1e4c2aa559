"""Feature assembly: banded log spectrograms + banded intensity vectors.

The network input is the concatenation of, per STFT frame:
  channels 0..3  log of filter-banked power, one per FOA channel (W,X,Y,Z)
  channels 4..6  filter-banked, energy-normalized acoustic intensity (X,Y,Z)
giving a (7, T, n_bands) map; a 1-second 24 kHz clip yields (7, 100, 128).
"""

from __future__ import annotations

import numpy as np

from .audio import AudioClip
from .filterbanks import FilterBank
from .stft import ComplexSpectrogram, StftConfig, stft

EPS = 1e-8
N_FEATURE_CHANNELS = 7


def banded_log_power(spec: ComplexSpectrogram, bank: FilterBank) -> np.ndarray:
    """``ln(sum_k w[b,k] |S[c,t,k]|^2 + eps)`` -> (4, T, n_bands)."""
    _check_bins(spec, bank)
    power = np.abs(spec.data) ** 2                     # (4, T, K)
    banded = np.einsum("bk,ctk->ctb", bank.weights, power)
    return np.log(banded + EPS)


def intensity_vectors(spec: ComplexSpectrogram, bank: FilterBank) -> np.ndarray:
    """Energy-normalized FOA intensity, banded -> (3, T, n_bands).

    Per bin: ``I_d = Re(conj(W) * D)`` for D in (X, Y, Z), normalized by
    ``E = |W|^2 + (|X|^2 + |Y|^2 + |Z|^2) / 3 + eps``, then averaged over
    each band with the bank weights.  The ratio form makes the output
    invariant to global amplitude scaling of the clip (up to eps).
    """
    _check_bins(spec, bank)
    w = spec.data[0]                                    # (T, K)
    xyz = spec.data[1:]                                 # (3, T, K)
    intensity = np.real(np.conj(w)[None] * xyz)         # (3, T, K)
    energy = np.abs(w) ** 2 + np.sum(np.abs(xyz) ** 2, axis=0) / 3.0 + EPS
    normalized = intensity / energy[None]
    row_sums = np.maximum(bank.weights.sum(axis=1), 1e-12)
    banded = np.einsum("bk,dtk->dtb", bank.weights, normalized) / row_sums[None, None, :]
    return banded


def assemble_features(clip: AudioClip, cfg: StftConfig | None = None,
                      bank: FilterBank | None = None) -> np.ndarray:
    """Full frontend: clip -> (7, T, n_bands) feature map."""
    if bank is None:
        from .filterbanks import design_mel_bank
        bank = design_mel_bank()
    spec = stft(clip, cfg)
    logspec = banded_log_power(spec, bank)
    iv = intensity_vectors(spec, bank)
    return np.concatenate([logspec, iv], axis=0)


def _check_bins(spec: ComplexSpectrogram, bank: FilterBank) -> None:
    if spec.n_bins != bank.n_bins:
        raise ValueError(
            f"spectrogram has {spec.n_bins} bins but bank expects {bank.n_bins}"
        )
