"""FOA audio container and WAV ingestion.

Clips are 4-channel first-order ambisonics in W, X, Y, Z order.  The WAV
reader accepts 16/24-bit PCM and 32-bit float and normalizes everything
to float64 in roughly [-1, 1].  Resampling is out of scope, so anything
that is not 24 kHz is rejected up front.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

N_FOA_CHANNELS = 4
SUPPORTED_RATE = 24000


class AudioFormatError(ValueError):
    """Raised for WAV files the toolkit cannot ingest."""


@dataclass
class AudioClip:
    """4-channel FOA waveform (channel order W, X, Y, Z)."""

    samples: np.ndarray  # (4, n) float64
    sample_rate: int = SUPPORTED_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] != N_FOA_CHANNELS:
            raise AudioFormatError(
                f"expected ({N_FOA_CHANNELS}, n) samples, got shape {self.samples.shape}"
            )
        if self.sample_rate <= 0:
            raise AudioFormatError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate


def read_foa_wav(path) -> AudioClip:
    """Read a 4-channel 24 kHz RIFF/WAVE file as an :class:`AudioClip`."""
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise AudioFormatError(f"{path}: not a readable WAV file ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != N_FOA_CHANNELS:
        got = 1 if data.ndim == 1 else data.shape[1]
        raise AudioFormatError(f"{path}: expected {N_FOA_CHANNELS} channels, got {got}")
    if rate != SUPPORTED_RATE:
        raise AudioFormatError(
            f"{path}: sample rate {rate} Hz unsupported; resample to {SUPPORTED_RATE} Hz first"
        )
    samples = _normalize(data, path)
    return AudioClip(samples=samples.T, sample_rate=int(rate))


def write_foa_wav(path, clip: AudioClip) -> None:
    """Write a clip as 32-bit float WAV (test/fixture helper)."""
    wavfile.write(path, clip.sample_rate, clip.samples.T.astype(np.float32))


def _normalize(data: np.ndarray, path) -> np.ndarray:
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        # scipy delivers 24-bit PCM left-justified in int32.
        return data.astype(np.float64) / 2147483648.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise AudioFormatError(f"{path}: unsupported sample format {data.dtype}")
