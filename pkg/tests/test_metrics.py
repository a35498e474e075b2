import numpy as np
import pytest
from scipy.signal import resample_poly

from spatialsift import WaveBuffer, stoi, si_sdr, ClipMetrics, EvalReport
from spatialsift.synth import speech_like


def naive_stoi(x16, y16):
    """Independent loop-based reference for the intelligibility metric.

    Follows the published recipe step by step: resample to 10 kHz, drop
    frames more than 40 dB below the loudest clean frame, 15 one-third
    octave bands from 150 Hz, 30-frame segments, normalized and clipped
    correlation, averaged.
    """
    x = resample_poly(x16, 10000, 16000)
    y = resample_poly(y16, 10000, 16000)
    frame, hop, nfft, num_bands, num_seg = 256, 128, 512, 15, 30
    window = np.hanning(frame + 2)[1:-1]

    # silence removal driven by the clean signal
    frames_x, frames_y, energies = [], [], []
    for start in range(0, len(x) - frame + 1, hop):
        fx = x[start : start + frame] * window
        fy = y[start : start + frame] * window
        frames_x.append(fx)
        frames_y.append(fy)
        energies.append(20 * np.log10(np.linalg.norm(fx) + 1e-16))
    keep = [e > max(energies) - 40.0 for e in energies]
    frames_x = [f for f, k in zip(frames_x, keep) if k]
    frames_y = [f for f, k in zip(frames_y, keep) if k]
    n_out = frame + (len(frames_x) - 1) * hop
    xr = np.zeros(n_out)
    yr = np.zeros(n_out)
    for i, (fx, fy) in enumerate(zip(frames_x, frames_y)):
        xr[i * hop : i * hop + frame] += fx
        yr[i * hop : i * hop + frame] += fy

    # band envelopes
    centers = [150.0 * 2 ** (b / 3.0) for b in range(num_bands)]
    freqs = np.arange(nfft // 2 + 1) * 10000.0 / nfft
    X, Y = [], []
    for start in range(0, len(xr) - frame + 1, hop):
        sx = np.fft.rfft(xr[start : start + frame] * window, nfft)
        sy = np.fft.rfft(yr[start : start + frame] * window, nfft)
        bx, by = [], []
        for cf in centers:
            band = (freqs >= cf / 2 ** (1 / 6)) & (freqs < cf * 2 ** (1 / 6))
            bx.append(np.sqrt(np.sum(np.abs(sx[band]) ** 2)))
            by.append(np.sqrt(np.sum(np.abs(sy[band]) ** 2)))
        X.append(bx)
        Y.append(by)
    X = np.array(X)
    Y = np.array(Y)

    # segment correlations
    clip_gain = 10 ** (15.0 / 20.0)
    values = []
    for m in range(num_seg - 1, X.shape[0]):
        for b in range(num_bands):
            xs = X[m - num_seg + 1 : m + 1, b]
            ys = Y[m - num_seg + 1 : m + 1, b]
            alpha = np.linalg.norm(xs) / (np.linalg.norm(ys) + 1e-16)
            yn = np.minimum(alpha * ys, (1 + clip_gain) * xs)
            xs = xs - xs.mean()
            yn = yn - yn.mean()
            denom = np.linalg.norm(xs) * np.linalg.norm(yn) + 1e-16
            values.append(np.dot(xs, yn) / denom)
    return float(np.clip(np.mean(values), 0.0, 1.0))


@pytest.fixture(scope="module")
def clip():
    return speech_like(np.random.default_rng(0), 4.0)


class TestStoi:
    def test_self_intelligibility(self, clip):
        wave = WaveBuffer(clip)
        assert stoi(wave, wave) >= 0.999

    def test_noise_sweep_monotone_non_increasing(self, clip):
        rng = np.random.default_rng(1)
        noise = rng.standard_normal(clip.size)
        noise *= np.linalg.norm(clip) / np.linalg.norm(noise)
        clean = WaveBuffer(clip)
        scores = []
        for snr in (20, 15, 10, 5, 0):
            degraded = WaveBuffer(clip + 10 ** (-snr / 20.0) * noise)
            scores.append(stoi(clean, degraded))
        assert all(a >= b for a, b in zip(scores, scores[1:]))
        assert scores[0] > scores[-1] + 0.05

    def test_matches_independent_reference(self, clip):
        rng = np.random.default_rng(2)
        for snr in (10.0, 0.0):
            noise = rng.standard_normal(clip.size)
            noise *= np.linalg.norm(clip) / np.linalg.norm(noise) * 10 ** (-snr / 20)
            degraded = clip + noise
            mine = stoi(WaveBuffer(clip), WaveBuffer(degraded))
            reference = naive_stoi(clip, degraded)
            assert mine == pytest.approx(reference, abs=0.01)

    def test_length_mismatch_rejected(self, clip):
        with pytest.raises(ValueError, match="length"):
            stoi(WaveBuffer(clip), WaveBuffer(clip[:-100]))

    def test_silent_clean_rejected(self):
        silent = WaveBuffer(np.zeros(32000))
        with pytest.raises(ValueError, match="silent"):
            stoi(silent, silent)

    def test_wrong_rate_rejected(self, clip):
        with pytest.raises(ValueError, match="16 kHz"):
            stoi(WaveBuffer(clip, sample_rate=8000), WaveBuffer(clip, sample_rate=8000))

    def test_output_clamped_to_unit_interval(self, clip):
        rng = np.random.default_rng(3)
        degraded = WaveBuffer(rng.standard_normal(clip.size))
        assert 0.0 <= stoi(WaveBuffer(clip), degraded) <= 1.0


class TestSiSdr:
    def test_identity_capped(self, clip):
        assert si_sdr(clip, clip) == 100.0

    def test_scale_invariance_equals_cap(self, clip):
        assert si_sdr(clip, 3.0 * clip) == si_sdr(clip, clip) == 100.0

    def test_orthogonal_noise_construction(self, clip):
        rng = np.random.default_rng(4)
        noise = rng.standard_normal(clip.size)
        noise -= (np.dot(noise, clip) / np.dot(clip, clip)) * clip  # project out
        for target_db in (0.0, 10.0, -5.0):
            scaled = noise * np.linalg.norm(clip) / np.linalg.norm(noise)
            scaled *= 10 ** (-target_db / 20.0)
            est = clip + scaled
            assert si_sdr(clip, est) == pytest.approx(target_db, abs=0.01)

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError, match="zero energy"):
            si_sdr(np.zeros(100), np.ones(100))

    def test_wavebuffer_inputs(self, clip):
        assert si_sdr(WaveBuffer(clip), WaveBuffer(clip)) == 100.0


class TestEvalReport:
    def build(self):
        report = EvalReport()
        for clip_id, feature, snr, s, d in [
            ("c0", "g-lstsc", 0.0, 0.8, 5.0),
            ("c1", "g-lstsc", 0.0, 0.9, 7.0),
            ("c0", "noisy", 0.0, 0.6, 0.0),
            ("c1", "noisy", 0.0, 0.7, 1.0),
            ("c2", "g-lstsc", 5.0, 0.95, 9.0),
        ]:
            report.add(
                ClipMetrics(
                    clip_id=clip_id,
                    geometry="uca:0.035:4",
                    feature_kind=feature,
                    snr_db=snr,
                    stoi=s,
                    si_sdr_db=d,
                )
            )
        return report

    def test_aggregation_means(self):
        agg = self.build().aggregate()
        assert len(agg) == 3  # (geometry) x (2 features) x (their SNRs)
        row = next(r for r in agg if r["feature_kind"] == "g-lstsc" and r["snr_db"] == 0.0)
        assert row["stoi"] == pytest.approx(0.85)
        assert row["si_sdr_db"] == pytest.approx(6.0)
        assert row["num_clips"] == 2

    def test_csv_and_json_written(self, tmp_path):
        report = self.build()
        report.write_csv(tmp_path / "report.csv")
        report.write_json(tmp_path / "report.json")
        text = (tmp_path / "report.csv").read_text()
        assert text.startswith("geometry,feature_kind,snr_db,num_clips,stoi,si_sdr_db")
        assert len(text.strip().splitlines()) == 4
        import json

        payload = json.loads((tmp_path / "report.json").read_text())
        assert len(payload["clips"]) == 5
        assert len(payload["aggregate"]) == 3
