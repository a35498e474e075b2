"""Short-time Fourier analysis and overlap-add synthesis.

Frames are taken fully inside the signal (no edge padding), so the frame
count for a signal of n samples is T = 1 + (n - window_len) // hop and the
synthesized length is (T - 1) * hop + window_len. Spectra are stored
one-sided; Hermitian symmetry is restored at synthesis.
"""

import numpy as np
from dataclasses import dataclass

from .audio import WaveBuffer

WINDOW_KINDS = ("hann", "rect")


def make_window(kind, length):
    """Analysis window of the given kind ("hann" is periodic)."""
    if kind == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)
    if kind == "rect":
        return np.ones(length)
    raise ValueError(f"unknown window kind {kind!r}, expected one of {WINDOW_KINDS}")


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis settings: 32 ms window, 16 ms hop, 512-point FFT at 16 kHz."""

    window_len: int = 512
    hop: int = 256
    fft_len: int = 512
    window_kind: str = "hann"

    def __post_init__(self):
        if not (0 < self.hop <= self.window_len <= self.fft_len):
            raise ValueError(
                f"need 0 < hop <= window_len <= fft_len, got "
                f"hop={self.hop} window_len={self.window_len} fft_len={self.fft_len}"
            )
        win = make_window(self.window_kind, self.window_len)
        if not _is_cola(win, self.hop):
            raise ValueError(
                f"{self.window_kind!r} window of length {self.window_len} does not "
                f"overlap-add to a constant at hop {self.hop}"
            )

    @property
    def num_bins(self):
        return self.fft_len // 2 + 1

    def window(self):
        return make_window(self.window_kind, self.window_len)


def _is_cola(window, hop, tol=1e-8):
    # Overlap-add the window over several hops and check the interior is constant.
    n = len(window)
    reps = 8 * (n // hop + 1)
    acc = np.zeros(n + (reps - 1) * hop)
    for i in range(reps):
        acc[i * hop : i * hop + n] += window
    interior = acc[n : -n or None]
    if interior.size == 0:
        return True
    return np.ptp(interior) <= tol * np.max(interior)


@dataclass
class MultiChannelSpectrogram:
    """One-sided complex STFT indexed (channel, frame, bin)."""

    data: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValueError(f"spectrogram must be (channels, frames, bins), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("spectrogram contains NaN or Inf")
        self.data = arr.astype(np.complex128, copy=False)

    @property
    def num_channels(self):
        return self.data.shape[0]

    @property
    def num_frames(self):
        return self.data.shape[1]

    @property
    def num_bins(self):
        return self.data.shape[2]


def stft(wave, cfg=StftConfig()):
    """Forward STFT of every channel.

    Args:
        wave: WaveBuffer with at least window_len samples.
        cfg: StftConfig.

    Returns:
        MultiChannelSpectrogram of shape (channels, T, fft_len // 2 + 1)
        with T = 1 + (num_samples - window_len) // hop.
    """
    n = wave.num_samples
    if n < cfg.window_len:
        raise ValueError(
            f"signal of {n} samples is shorter than one window ({cfg.window_len})"
        )
    num_frames = 1 + (n - cfg.window_len) // cfg.hop
    starts = np.arange(num_frames) * cfg.hop
    idx = starts[:, np.newaxis] + np.arange(cfg.window_len)
    frames = wave.samples[:, idx] * cfg.window()
    spec = np.fft.rfft(frames, n=cfg.fft_len, axis=-1)
    return MultiChannelSpectrogram(spec, sample_rate=wave.sample_rate)


def istft(spec, cfg=StftConfig()):
    """Inverse STFT by overlap-add with COLA normalization.

    The output length is (T - 1) * hop + window_len. The overlap-added
    window divisor is floored at 10% of its interior value: inside the clip
    reconstruction is exact, while within the first/last hop (where only a
    window tail covers the signal) modified spectra would otherwise be
    amplified by the inverse window taper.
    """
    if spec.num_bins != cfg.num_bins:
        raise ValueError(
            f"spectrogram has {spec.num_bins} bins, config implies {cfg.num_bins}"
        )
    num_ch, num_frames, _ = spec.data.shape
    frames = np.fft.irfft(spec.data, n=cfg.fft_len, axis=-1)[..., : cfg.window_len]
    out_len = (num_frames - 1) * cfg.hop + cfg.window_len
    acc = np.zeros((num_ch, out_len))
    win_sum = np.zeros(out_len)
    window = cfg.window()
    for l in range(num_frames):
        sl = slice(l * cfg.hop, l * cfg.hop + cfg.window_len)
        acc[:, sl] += frames[:, l, :]
        win_sum[sl] += window
    return WaveBuffer(
        acc / np.maximum(win_sum, 0.1 * np.max(win_sum)), sample_rate=spec.sample_rate
    )


def magnitude(spec):
    """Elementwise complex modulus of a spectrogram, shape (channel, frame, bin)."""
    return np.abs(spec.data)
