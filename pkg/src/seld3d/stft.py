"""Centered short-time Fourier transform for FOA clips.

512-point FFT, 20 ms periodic-Hann window, 10 ms hop at 24 kHz.  Frames
are centered by reflect-padding ``win_length // 2`` samples on each side,
so a clip of ``n`` samples yields exactly ``ceil(n / hop)`` frames: a
1-second clip maps to 100 frames of 257 one-sided bins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import get_window

from .audio import AudioClip


@dataclass
class StftConfig:
    fft_size: int = 512
    win_length: int = 480   # 20 ms at 24 kHz
    hop_length: int = 240   # 10 ms at 24 kHz
    window: str = "hann"
    centered: bool = True

    def __post_init__(self):
        if not (0 < self.hop_length <= self.win_length <= self.fft_size):
            raise ValueError(
                f"need 0 < hop <= win <= fft, got hop={self.hop_length}, "
                f"win={self.win_length}, fft={self.fft_size}"
            )
        if self.window != "hann":
            raise ValueError(f"unsupported window {self.window!r}")

    @classmethod
    def for_rate(cls, sample_rate: int, fft_size: int = 512) -> "StftConfig":
        """20 ms window / 10 ms hop for an arbitrary sample rate."""
        return cls(fft_size=fft_size,
                   win_length=round(0.020 * sample_rate),
                   hop_length=round(0.010 * sample_rate))

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


@dataclass
class ComplexSpectrogram:
    data: np.ndarray   # (4, n_frames, n_bins) complex128
    frame_rate: float  # frames per second

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]

    @property
    def n_bins(self) -> int:
        return self.data.shape[2]


def stft(clip: AudioClip, cfg: StftConfig | None = None) -> ComplexSpectrogram:
    """Per-channel centered STFT of a 4-channel clip."""
    cfg = cfg or StftConfig.for_rate(clip.sample_rate)
    n = clip.n_samples
    pad = cfg.win_length // 2
    if n < cfg.hop_length or n <= pad:
        raise ValueError(
            f"clip of {n} samples too short for hop={cfg.hop_length}, win={cfg.win_length}"
        )
    n_frames = -(-n // cfg.hop_length)  # ceil division
    window = get_window("hann", cfg.win_length)  # periodic Hann

    padded = np.pad(clip.samples, ((0, 0), (pad, pad)), mode="reflect")
    frames = np.lib.stride_tricks.sliding_window_view(
        padded, cfg.win_length, axis=1
    )[:, ::cfg.hop_length, :][:, :n_frames, :]
    spec = np.fft.rfft(frames * window, n=cfg.fft_size, axis=2)
    return ComplexSpectrogram(data=spec, frame_rate=clip.sample_rate / cfg.hop_length)
