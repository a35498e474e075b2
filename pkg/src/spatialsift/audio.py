"""Waveform container and 16-bit PCM WAV file I/O."""

import numpy as np
from dataclasses import dataclass
from pathlib import Path
from scipy.io import wavfile

DEFAULT_SAMPLE_RATE = 16000


@dataclass
class WaveBuffer:
    """Multichannel audio in memory.

    samples is a (channels, num_samples) float64 array; a 1-D array is
    promoted to a single channel. All channels share one length and one
    sample rate; non-finite samples are rejected.
    """

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2:
            raise ValueError(f"samples must be 1-D or 2-D, got shape {arr.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples contain NaN or Inf")
        self.samples = arr

    @property
    def num_channels(self):
        return self.samples.shape[0]

    @property
    def num_samples(self):
        return self.samples.shape[1]

    @property
    def duration(self):
        return self.num_samples / self.sample_rate

    def channel(self, m):
        """Return channel m as a 1-D array (no copy)."""
        return self.samples[m]

    def mono(self):
        if self.num_channels != 1:
            raise ValueError(f"expected mono, got {self.num_channels} channels")
        return self.samples[0]


def read_wav(path, expect_rate=None):
    """Read a WAV file into a WaveBuffer.

    Integer PCM is scaled to [-1, 1); float WAVs are passed through.
    If expect_rate is given, any other sample rate is rejected.
    """
    rate, data = wavfile.read(str(path))
    if expect_rate is not None and rate != expect_rate:
        raise ValueError(
            f"{path}: sample rate {rate} Hz, expected {expect_rate} Hz"
        )
    if data.ndim == 1:
        data = data[:, np.newaxis]
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported WAV dtype {data.dtype}")
    return WaveBuffer(samples.T, sample_rate=rate)


def write_wav(path, wave):
    """Write a WaveBuffer as 16-bit PCM. Samples are clipped to [-1, 1]."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scaled = np.clip(np.round(wave.samples.T * 32767.0), -32768, 32767)
    wavfile.write(str(path), wave.sample_rate, scaled.astype(np.int16))
