"""Objective evaluation: short-time intelligibility and scale-invariant SDR.

The intelligibility score follows the standard correlation-based recipe:
both signals are resampled to 10 kHz, frames where the clean signal falls
more than 40 dB below its loudest frame are discarded, the remainder is
decomposed into 15 one-third-octave bands between 150 Hz and ~4.3 kHz,
and within 384-ms segments the degraded band envelope is normalized,
clipped at -15 dB relative distortion, and correlated with the clean one;
the score is the mean correlation over bands and segments, clamped to
[0, 1].
"""

import csv
import json
import numpy as np
from dataclasses import dataclass, field, asdict
from pathlib import Path
from scipy.signal import resample_poly

STOI_FS = 10000
STOI_FRAME = 256
STOI_HOP = 128
STOI_FFT = 512
STOI_NUM_BANDS = 15
STOI_MIN_FREQ = 150.0
STOI_SEG_FRAMES = 30  # 384 ms at 10 kHz with 128-sample hop
STOI_CLIP_DB = -15.0
STOI_DYN_RANGE_DB = 40.0
SI_SDR_CAP_DB = 100.0
_EPS = np.finfo(np.float64).eps


def _stoi_window():
    return np.hanning(STOI_FRAME + 2)[1:-1]


def _frame(x, frame_len, hop):
    num = 1 + (x.size - frame_len) // hop
    idx = np.arange(num)[:, np.newaxis] * hop + np.arange(frame_len)
    return x[idx]


def _remove_silent_frames(clean, degraded):
    window = _stoi_window()
    frames_c = _frame(clean, STOI_FRAME, STOI_HOP) * window
    frames_d = _frame(degraded, STOI_FRAME, STOI_HOP) * window
    energy_db = 20.0 * np.log10(np.linalg.norm(frames_c, axis=1) + _EPS)
    keep = energy_db > np.max(energy_db) - STOI_DYN_RANGE_DB
    frames_c = frames_c[keep]
    frames_d = frames_d[keep]
    out_len = STOI_FRAME + (frames_c.shape[0] - 1) * STOI_HOP if frames_c.size else 0
    out_c = np.zeros(out_len)
    out_d = np.zeros(out_len)
    for i in range(frames_c.shape[0]):
        sl = slice(i * STOI_HOP, i * STOI_HOP + STOI_FRAME)
        out_c[sl] += frames_c[i]
        out_d[sl] += frames_d[i]
    return out_c, out_d


def third_octave_band_matrix(fs=STOI_FS, fft_len=STOI_FFT, num_bands=STOI_NUM_BANDS):
    """Binary (bands, bins) matrix grouping FFT bins into 1/3-octave bands."""
    centers = STOI_MIN_FREQ * 2.0 ** (np.arange(num_bands) / 3.0)
    freqs = np.arange(fft_len // 2 + 1) * fs / fft_len
    matrix = np.zeros((num_bands, freqs.size))
    for b, cf in enumerate(centers):
        lo = cf / 2.0 ** (1.0 / 6.0)
        hi = cf * 2.0 ** (1.0 / 6.0)
        matrix[b] = (freqs >= lo) & (freqs < hi)
    return matrix


def _band_envelopes(x):
    window = _stoi_window()
    frames = _frame(x, STOI_FRAME, STOI_HOP) * window
    spec = np.fft.rfft(frames, n=STOI_FFT, axis=1)
    power = spec.real**2 + spec.imag**2
    return np.sqrt(power @ third_octave_band_matrix().T)  # (frames, bands)


def stoi(clean, degraded):
    """Short-time intelligibility of a degraded signal given the clean one.

    Args:
        clean, degraded: mono 16 kHz WaveBuffers of equal length.

    Returns:
        score in [0, 1]; identical signals score ~1.
    """
    if clean.sample_rate != 16000 or degraded.sample_rate != 16000:
        raise ValueError("intelligibility metric expects 16 kHz input")
    x = clean.mono()
    y = degraded.mono()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if not np.any(x):
        raise ValueError("clean signal is silent")
    x = resample_poly(x, STOI_FS, 16000)
    y = resample_poly(y, STOI_FS, 16000)
    x, y = _remove_silent_frames(x, y)
    if x.size < STOI_FRAME + (STOI_SEG_FRAMES - 1) * STOI_HOP:
        raise ValueError("too little active clean signal for the metric")

    X = _band_envelopes(x)  # (frames, bands)
    Y = _band_envelopes(y)
    num_frames = X.shape[0]
    if num_frames < STOI_SEG_FRAMES:
        raise ValueError("too few frames after silence removal")

    # Segments of 30 consecutive frames: (segments, bands, 30).
    seg_idx = np.arange(num_frames - STOI_SEG_FRAMES + 1)[:, np.newaxis] + np.arange(
        STOI_SEG_FRAMES
    )
    Xs = X[seg_idx].transpose(0, 2, 1)
    Ys = Y[seg_idx].transpose(0, 2, 1)

    alpha = np.linalg.norm(Xs, axis=2, keepdims=True) / (
        np.linalg.norm(Ys, axis=2, keepdims=True) + _EPS
    )
    clip_gain = 10.0 ** (-STOI_CLIP_DB / 20.0)
    Yn = np.minimum(alpha * Ys, Xs * (1.0 + clip_gain))

    Xc = Xs - Xs.mean(axis=2, keepdims=True)
    Yc = Yn - Yn.mean(axis=2, keepdims=True)
    corr = (Xc * Yc).sum(axis=2) / (
        np.linalg.norm(Xc, axis=2) * np.linalg.norm(Yc, axis=2) + _EPS
    )
    return float(np.clip(np.mean(corr), 0.0, 1.0))


def si_sdr(reference, estimate):
    """Scale-invariant signal-to-distortion ratio in dB.

    The estimate is projected onto the reference (optimal scaling), so any
    positive rescaling of the estimate leaves the value unchanged. The
    value is capped at +-100 dB; a (scaled) perfect estimate returns
    exactly 100.

    Args:
        reference, estimate: mono WaveBuffers or 1-D arrays, equal length.
    """
    ref = reference.mono() if hasattr(reference, "mono") else np.asarray(reference, float)
    est = estimate.mono() if hasattr(estimate, "mono") else np.asarray(estimate, float)
    if ref.shape != est.shape:
        raise ValueError(f"length mismatch: {ref.shape} vs {est.shape}")
    ref_energy = float(np.dot(ref, ref))
    if ref_energy <= 0:
        raise ValueError("reference signal has zero energy")
    projection = (np.dot(est, ref) / ref_energy) * ref
    error = est - projection
    num = float(np.dot(projection, projection))
    den = float(np.dot(error, error))
    if num == 0.0:
        return -SI_SDR_CAP_DB
    if den == 0.0 or 10.0 * np.log10(num / den) > SI_SDR_CAP_DB:
        return SI_SDR_CAP_DB
    return float(np.clip(10.0 * np.log10(num / den), -SI_SDR_CAP_DB, SI_SDR_CAP_DB))


@dataclass
class ClipMetrics:
    clip_id: str
    geometry: str
    feature_kind: str
    snr_db: float
    stoi: float
    si_sdr_db: float
    pesq: float = None


@dataclass
class EvalReport:
    """Per-clip metric rows plus (geometry, feature, SNR) aggregation."""

    rows: list = field(default_factory=list)

    def add(self, row):
        self.rows.append(row)

    def aggregate(self):
        """Mean metrics per (geometry, feature_kind, snr_db), sorted."""
        groups = {}
        for row in self.rows:
            groups.setdefault((row.geometry, row.feature_kind, row.snr_db), []).append(row)
        out = []
        for (geometry, feature, snr), rows in sorted(groups.items()):
            entry = {
                "geometry": geometry,
                "feature_kind": feature,
                "snr_db": snr,
                "num_clips": len(rows),
                "stoi": float(np.mean([r.stoi for r in rows])),
                "si_sdr_db": float(np.mean([r.si_sdr_db for r in rows])),
            }
            pesq = [r.pesq for r in rows if r.pesq is not None]
            if pesq:
                entry["pesq"] = float(np.mean(pesq))
            out.append(entry)
        return out

    def write_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        agg = self.aggregate()
        fields = ["geometry", "feature_kind", "snr_db", "num_clips", "stoi", "si_sdr_db"]
        if any("pesq" in row for row in agg):
            fields.append("pesq")
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields, restval="")
            writer.writeheader()
            writer.writerows(agg)

    def write_json(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "clips": [asdict(r) for r in self.rows],
            "aggregate": self.aggregate(),
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))
