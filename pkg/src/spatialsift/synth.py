"""Speech-like synthetic signals for corpus-free desk-scale runs.

Nothing here tries to sound natural; the signals only need the statistics
the pipeline cares about: harmonic structure with a moving fundamental,
speaker-dependent spectral coloring, syllabic amplitude modulation, and
(for targets) silent gaps. Interference variants stay active nearly all
the time, matching a persistent, spatially fixed source.
"""

import numpy as np
from pathlib import Path
from scipy.signal import lfilter

from .audio import WaveBuffer, write_wav


def speaker_params(rng):
    """Random per-speaker voice parameters (fundamental, formants, tilt)."""
    return {
        "f0": float(rng.uniform(85.0, 240.0)),
        "formants": np.sort(rng.uniform(300.0, 3400.0, size=3)),
        "bandwidth": float(rng.uniform(120.0, 260.0)),
        "tilt": float(rng.uniform(0.6, 1.3)),
    }


def _segment(rng, num_samples, fs, params):
    t = np.arange(num_samples) / fs
    f0 = params["f0"] * (1.0 + rng.uniform(-0.15, 0.15)) * (
        1.0 + rng.uniform(-0.1, 0.1) * t / max(t[-1], 1e-6)
    )
    phase = 2.0 * np.pi * np.cumsum(f0) / fs
    sig = np.zeros(num_samples)
    max_harm = int(4000.0 / params["f0"])
    for k in range(1, max(max_harm, 2) + 1):
        freq = k * params["f0"]
        gain = k ** (-params["tilt"])
        resonance = np.sum(
            1.0 / (1.0 + ((freq - params["formants"]) / params["bandwidth"]) ** 2)
        )
        sig += gain * (0.2 + resonance) * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    sig += 0.02 * rng.standard_normal(num_samples)
    # Syllabic envelope around 4 Hz plus attack/decay ramps.
    env = 0.55 + 0.45 * np.sin(2.0 * np.pi * rng.uniform(2.5, 5.0) * t + rng.uniform(0, 6.28))
    ramp = min(num_samples // 8, 320)
    if ramp > 0:
        env[:ramp] *= np.linspace(0.0, 1.0, ramp)
        env[-ramp:] *= np.linspace(1.0, 0.0, ramp)
    return sig * env


def speech_like(rng, seconds, fs=16000, params=None, pause_prob=0.35):
    """A mono speech-like signal with alternating active and pause spans."""
    params = params or speaker_params(rng)
    total = int(round(seconds * fs))
    out = np.zeros(total)
    pos = 0
    while pos < total:
        span = int(rng.uniform(0.15, 0.45) * fs)
        span = min(span, total - pos)
        if rng.uniform() >= pause_prob:
            out[pos : pos + span] = _segment(rng, span, fs, params)
        pos += span
    rms = np.sqrt(np.mean(out**2))
    if rms > 0:
        out = 0.12 * out / rms
    return out


def interference_like(rng, seconds, fs=16000, params=None):
    """A persistently active speech-like signal (a television, roughly)."""
    return speech_like(rng, seconds, fs=fs, params=params, pause_prob=0.03)


def _sustained_span(rng, num_samples, fs):
    # program-bed span: a chord of many steady partials over pink-ish noise
    t = np.arange(num_samples) / fs
    sig = np.zeros(num_samples)
    f0 = rng.uniform(85.0, 140.0)
    for k in range(1, 80):
        freq = k * f0 * rng.uniform(0.999, 1.001)
        if freq > 7200.0:
            break
        sig += k**-1.1 * np.sin(2.0 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    noise = lfilter([0.05], [1.0, -0.95], rng.standard_normal(num_samples))
    sig += 0.4 * noise * np.std(sig) / max(np.std(noise), 1e-12)
    sig *= 1.0 + 0.2 * np.sin(2.0 * np.pi * rng.uniform(0.2, 0.6) * t + rng.uniform(0, 6.28))
    return sig


def program_like(rng, seconds, fs=16000):
    """Television program audio: conversation spans alternating with
    sustained music-like beds, active essentially all the time."""
    total = int(round(seconds * fs))
    out = np.zeros(total)
    params = speaker_params(rng)
    pos = 0
    while pos < total:
        span = min(int(rng.uniform(1.0, 2.5) * fs), total - pos)
        if rng.uniform() < 0.5:
            piece = _sustained_span(rng, span, fs)
        else:
            piece = speech_like(rng, span / fs, fs=fs, params=params, pause_prob=0.05)
            piece = piece[:span]
        rms = np.sqrt(np.mean(piece**2))
        if rms > 0:
            out[pos : pos + span] = 0.12 * piece / rms
        pos += span
    return out


def active_fraction(samples, fs=16000, threshold_db=-40.0):
    """Fraction of 32-ms frames whose RMS is within threshold_db of the peak frame."""
    frame = int(0.032 * fs)
    num = max(samples.size // frame, 1)
    rms = np.sqrt(
        np.mean(samples[: num * frame].reshape(num, frame) ** 2, axis=1)
    )
    peak = np.max(rms)
    if peak <= 0:
        return 0.0
    return float(np.mean(20.0 * np.log10(rms / peak + 1e-12) > threshold_db))


def make_corpus(root, num_speakers, utterances_per_speaker, seconds, seed, fs=16000, interference=False):
    """Write a toy WAV corpus under root/<speaker>/<utterance>.wav.

    Returns the list of written paths. Deterministic in the seed.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    paths = []
    for s in range(num_speakers):
        params = speaker_params(rng)
        for u in range(utterances_per_speaker):
            if interference:
                sig = interference_like(rng, seconds, fs=fs, params=params)
            else:
                sig = speech_like(rng, seconds, fs=fs, params=params)
            path = root / f"spk{s:02d}" / f"utt{u:03d}.wav"
            write_wav(path, WaveBuffer(sig, sample_rate=fs))
            paths.append(path)
    return paths
