"""Analysis/synthesis walkthrough: frame arithmetic, perfect reconstruction,
and what the one-sided spectrogram looks like for a chirp."""

import numpy as np

from spatialsift import WaveBuffer, StftConfig, stft, istft, magnitude

spacer = "_" * 60

fs = 16000
cfg = StftConfig()  # 32 ms window, 16 ms hop, 512-point FFT
print(f"config: {cfg}")
print(f"bins per frame: {cfg.num_bins}")

print(spacer)
print("\nA 3-second linear chirp from 200 Hz to 6 kHz")
t = np.arange(3 * fs) / fs
chirp = np.sin(2 * np.pi * (200 * t + 0.5 * (6000 - 200) / 3.0 * t**2))
wave = WaveBuffer(chirp, fs)
spec = stft(wave, cfg)
print(f"frames: {spec.num_frames}  (1 + (samples - window) // hop = "
      f"1 + ({wave.num_samples} - {cfg.window_len}) // {cfg.hop})")

mags = magnitude(spec)[0]
peak_bins = mags.argmax(axis=1)
print("peak bin per frame, every 20th frame:", peak_bins[::20])
print("-> the ridge climbs linearly, as a chirp should")

print(spacer)
print("\nRound trip: istft(stft(x)) reproduces x away from the clip edges")
back = istft(spec, cfg)
n = back.num_samples
err = np.max(np.abs(back.samples[0, 256 : n - 256] - chirp[256 : n - 256]))
print(f"max interior error: {err:.3e} of a unit-amplitude signal")
print(f"synthesized length: {n} = (frames - 1) * hop + window")
