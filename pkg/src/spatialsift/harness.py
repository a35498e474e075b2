"""End-to-end orchestration: dataset synthesis, features, enhancement, evaluation.

Datasets live on disk as one directory per clip (multichannel mixture,
reverberant target and scaled interference components, JSON sidecar) plus
a manifest. Everything is deterministic under a fixed seed: the same
config written twice produces byte-identical files. Clips are mutually
independent, so any of the per-clip loops may be parallelized externally.
"""

import json
import subprocess
import numpy as np
from dataclasses import dataclass, asdict
from pathlib import Path

from .audio import WaveBuffer, read_wav, write_wav
from .stft import StftConfig, MultiChannelSpectrogram, stft, istft, magnitude
from .spatial import build_feature_stack, lstsc_map, FEATURE_KINDS
from .room import (
    parse_geometry,
    place_scene,
    simulate_rir,
    render,
    interference_gain,
)
from .crn import load_weights, crn_forward, apply_mask
from .speaker import load_embedding, EMBED_DIM
from .metrics import stoi, si_sdr, ClipMetrics, EvalReport
from .synth import active_fraction
from . import tensorio

ENHANCE_MODES = ("oracle", "identity", "network")
REF_CHANNEL = 0  # reference microphone is always channel 1 (index 0)
CLIP_PEAK = 0.9
MIN_TARGET_ACTIVITY = 0.5


class ConfigError(Exception):
    """Bad configuration or arguments (CLI exit code 2)."""


class DataError(Exception):
    """Missing or inconsistent data on disk (CLI exit code 3)."""


@dataclass
class ExperimentConfig:
    """Everything a simulation/enhancement run needs; JSON-serializable."""

    target_dir: str = ""
    interference_dir: str = ""
    output_dir: str = ""
    geometry: str = "uca:0.035:4"
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0)
    clip_seconds: float = 6.0
    num_clips: int = 20
    seed: int = 0
    feature_kind: str = "g-lstsc"
    lambda_global: float = 0.999
    lambda_local: float = 0.1
    avg_frames: int = 2
    window_len: int = 512
    hop: int = 256
    fft_len: int = 512
    room_dims: tuple = (4.0, 4.0, 3.0)
    t60: float = 0.2
    sample_rate: int = 16000
    weights_path: str = ""
    embedding_path: str = ""

    def __post_init__(self):
        if not self.snr_db:
            raise ConfigError("snr_db list must not be empty")
        if self.clip_seconds <= 0 or self.num_clips < 1:
            raise ConfigError("clip_seconds must be positive and num_clips >= 1")
        if self.feature_kind.lower() not in FEATURE_KINDS:
            raise ConfigError(
                f"feature_kind {self.feature_kind!r} not one of {FEATURE_KINDS}"
            )
        self.snr_db = tuple(float(s) for s in self.snr_db)
        self.room_dims = tuple(float(d) for d in self.room_dims)
        try:
            parse_geometry(self.geometry)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def stft_config(self):
        return StftConfig(window_len=self.window_len, hop=self.hop, fft_len=self.fft_len)

    @property
    def lambdas(self):
        return (self.lambda_global, self.lambda_local)

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc

    def to_json(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True))


def _scan_speakers(root):
    """Corpus layout: speaker subdirectories of WAVs, or a flat WAV directory."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"corpus directory not found: {root}")
    speakers = {}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        wavs = sorted(sub.glob("*.wav"))
        if wavs:
            speakers[sub.name] = wavs
    flat = sorted(root.glob("*.wav"))
    if flat:
        speakers.setdefault("spk00", flat)
    if not speakers:
        raise DataError(f"no WAV files under {root}")
    return speakers


def _fit_length(samples, num_samples, rng, want_activity=False):
    """Loop/crop a signal to an exact length, preferring active crops."""
    x = samples
    while x.size < num_samples:
        x = np.concatenate([x, samples])
    best = None
    best_frac = -1.0
    tries = 8 if want_activity and x.size > num_samples else 1
    for _ in range(tries):
        off = int(rng.integers(0, x.size - num_samples + 1))
        crop = x[off : off + num_samples]
        frac = active_fraction(crop) if want_activity else 1.0
        if frac > best_frac:
            best, best_frac = crop, frac
        if frac >= MIN_TARGET_ACTIVITY:
            break
    return best


def cmd_simulate(cfg):
    """Synthesize a dataset per the configured protocol.

    Each clip: sample a speaker, utterance, enrollment utterance, and an
    interference file; sample the target angle on its 0..180 degree arc and
    the interferer on 180..360 (1 degree grid); simulate the RIRs; render;
    mix at an SNR drawn from the configured list; write the multichannel
    mixture, the two rendered components, and a JSON sidecar.

    Returns the manifest dict (also written to <output_dir>/dataset.json).
    """
    if not cfg.output_dir:
        raise ConfigError("output_dir is required")
    geometry = parse_geometry(cfg.geometry)
    speakers = _scan_speakers(cfg.target_dir)
    interference_files = sorted(Path(cfg.interference_dir).glob("**/*.wav"))
    if not interference_files:
        raise DataError(f"no interference WAVs under {cfg.interference_dir}")
    speaker_names = sorted(speakers)

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    num_samples = int(round(cfg.clip_seconds * cfg.sample_rate))
    clip_ids = []
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.num_clips)
    for i in range(cfg.num_clips):
        rng = np.random.default_rng(seeds[i])
        speaker = speaker_names[rng.integers(len(speaker_names))]
        utts = speakers[speaker]
        utt = utts[rng.integers(len(utts))]
        enroll_candidates = [u for u in utts if u != utt] or [utt]
        enrollment = enroll_candidates[rng.integers(len(enroll_candidates))]
        interference = interference_files[rng.integers(len(interference_files))]

        dry_target = _fit_length(
            read_wav(utt, expect_rate=cfg.sample_rate).mono(),
            num_samples,
            rng,
            want_activity=True,
        )
        dry_interf = _fit_length(
            read_wav(interference, expect_rate=cfg.sample_rate).mono(), num_samples, rng
        )
        target_angle = int(rng.integers(0, 181))
        interferer_angle = int(rng.integers(180, 361))
        snr = cfg.snr_db[rng.integers(len(cfg.snr_db))]

        scene = place_scene(
            target_angle, interferer_angle, geometry, room_dims=cfg.room_dims, t60=cfg.t60
        )
        rirs = simulate_rir(scene, fs=cfg.sample_rate)
        target = render(WaveBuffer(dry_target, cfg.sample_rate), rirs[0])
        interf = render(WaveBuffer(dry_interf, cfg.sample_rate), rirs[1])
        target = WaveBuffer(target.samples[:, :num_samples], cfg.sample_rate)
        interf = WaveBuffer(interf.samples[:, :num_samples], cfg.sample_rate)

        gain = interference_gain(target, interf, snr, ref_channel=REF_CHANNEL)
        interf_scaled = interf.samples * gain
        mixture = target.samples + interf_scaled
        peak = max(
            np.max(np.abs(mixture)), np.max(np.abs(target.samples)), np.max(np.abs(interf_scaled))
        )
        norm = CLIP_PEAK / peak if peak > 0 else 1.0

        clip_id = f"clip_{i:05d}"
        clip_dir = out / "clips" / clip_id
        write_wav(clip_dir / "mixture.wav", WaveBuffer(mixture * norm, cfg.sample_rate))
        write_wav(clip_dir / "target.wav", WaveBuffer(target.samples * norm, cfg.sample_rate))
        write_wav(
            clip_dir / "interference.wav", WaveBuffer(interf_scaled * norm, cfg.sample_rate)
        )
        sidecar = {
            "clip_id": clip_id,
            "speaker": speaker,
            "target_wav": str(utt),
            "enrollment_wav": str(enrollment),
            "interference_wav": str(interference),
            "target_angle_deg": target_angle,
            "interferer_angle_deg": interferer_angle,
            "snr_db": snr,
            "geometry": cfg.geometry,
            "t60": cfg.t60,
            "room_dims": list(cfg.room_dims),
            "sample_rate": cfg.sample_rate,
            "clip_seconds": cfg.clip_seconds,
            "interference_gain": gain,
            "normalization": norm,
        }
        (clip_dir / "clip.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
        clip_ids.append(clip_id)

    config_echo = asdict(cfg)
    config_echo.pop("output_dir")  # the manifest lives inside it
    manifest = {"config": config_echo, "clips": clip_ids}
    (out / "dataset.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def load_manifest(dataset_dir):
    path = Path(dataset_dir) / "dataset.json"
    if not path.is_file():
        raise DataError(f"no dataset manifest at {path}")
    return json.loads(path.read_text())


def _load_clip(dataset_dir, clip_id, sample_rate):
    clip_dir = Path(dataset_dir) / "clips" / clip_id
    sidecar_path = clip_dir / "clip.json"
    if not sidecar_path.is_file():
        raise DataError(f"missing sidecar for {clip_id}")
    sidecar = json.loads(sidecar_path.read_text())
    mixture = read_wav(clip_dir / "mixture.wav", expect_rate=sample_rate)
    return clip_dir, sidecar, mixture


def cmd_features(
    dataset_dir,
    feature_kind="g-lstsc",
    embedding_dir=None,
    out_dir=None,
    stft_cfg=StftConfig(),
    R=2,
    lambdas=(0.999, 0.1),
):
    """Extract and export per-clip feature containers for offline training.

    Each container holds "features" (planes, T, F), "noisy_mag" and
    "clean_mag" (T, F), and "dvector" (256; zeros when no enrollment
    embedding is available, flagged in the attrs).
    """
    manifest = load_manifest(dataset_dir)
    rate = manifest["config"]["sample_rate"]
    out = Path(out_dir) if out_dir else Path(dataset_dir) / "features" / feature_kind
    out.mkdir(parents=True, exist_ok=True)
    for clip_id in manifest["clips"]:
        clip_dir, sidecar, mixture = _load_clip(dataset_dir, clip_id, rate)
        spec = stft(mixture, stft_cfg)
        stack = build_feature_stack(spec, kind=feature_kind, R=R, lambdas=lambdas)
        target = read_wav(clip_dir / "target.wav", expect_rate=rate)
        clean_mag = magnitude(stft(target, stft_cfg))[REF_CHANNEL]
        dvector = np.zeros(EMBED_DIM)
        dvector_state = "absent"
        if embedding_dir:
            emb_path = Path(embedding_dir) / f"{sidecar['speaker']}.dvec"
            if emb_path.is_file():
                dvector = load_embedding(emb_path).values
                dvector_state = "enrolled"
        tensorio.save_tensors(
            out / f"{clip_id}.tnsr",
            {
                "features": stack.planes,
                "noisy_mag": magnitude(spec)[REF_CHANNEL],
                "clean_mag": clean_mag,
                "dvector": dvector,
            },
            attrs={
                "clip_id": clip_id,
                "feature_kind": feature_kind,
                "speaker": sidecar["speaker"],
                "dvector": dvector_state,
                "plane_names": ",".join(stack.names),
            },
        )
    return out


def oracle_irm_mask(target_mag, interference_mag):
    """Ideal ratio mask clean/(clean + interference), clamped to [0, 1]."""
    denom = target_mag + interference_mag
    mask = np.where(denom > 0, target_mag / np.where(denom > 0, denom, 1.0), 0.0)
    return np.clip(mask, 0.0, 1.0)


def _resolve_embedding(sidecar, embedding_path, embedding_dir):
    if embedding_path:
        return load_embedding(embedding_path)
    if embedding_dir:
        path = Path(embedding_dir) / f"{sidecar['speaker']}.dvec"
        if not path.is_file():
            raise DataError(f"no enrollment embedding for speaker {sidecar['speaker']}")
        return load_embedding(path)
    raise ConfigError("network mode needs --embedding or --embedding-dir")


def cmd_enhance(
    dataset_dir,
    out_dir,
    mode="oracle",
    feature_kind="g-lstsc",
    weights_path=None,
    embedding_path=None,
    embedding_dir=None,
    stft_cfg=StftConfig(),
    R=2,
    lambdas=(0.999, 0.1),
):
    """Enhance every clip of a dataset and write mono WAVs plus metrics.

    Modes: "oracle" applies the ideal ratio mask from the stored clean
    components (no weights needed); "identity" applies an all-ones mask
    (pipeline validation); "network" runs the sifting network with the
    given weights and enrollment embedding(s).
    """
    if mode not in ENHANCE_MODES:
        raise ConfigError(f"mode {mode!r} not one of {ENHANCE_MODES}")
    weights = None
    if mode == "network":
        if not weights_path:
            raise ConfigError("network mode needs --weights")
        weights = load_weights(weights_path)
    manifest = load_manifest(dataset_dir)
    rate = manifest["config"]["sample_rate"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    for clip_id in manifest["clips"]:
        clip_dir, sidecar, mixture = _load_clip(dataset_dir, clip_id, rate)
        spec = stft(mixture, stft_cfg)
        noisy_ref = spec.data[REF_CHANNEL]
        if mode == "oracle":
            target = read_wav(clip_dir / "target.wav", expect_rate=rate)
            interf = read_wav(clip_dir / "interference.wav", expect_rate=rate)
            mask = oracle_irm_mask(
                magnitude(stft(target, stft_cfg))[REF_CHANNEL],
                magnitude(stft(interf, stft_cfg))[REF_CHANNEL],
            )
        elif mode == "identity":
            mask = np.ones(noisy_ref.shape)
        else:
            stack = build_feature_stack(spec, kind=feature_kind, R=R, lambdas=lambdas)
            if stack.plane_count != weights.input_planes:
                raise ConfigError(
                    f"feature kind {feature_kind!r} yields {stack.plane_count} planes "
                    f"but the weights expect {weights.input_planes}"
                )
            embedding = _resolve_embedding(sidecar, embedding_path, embedding_dir)
            mask = crn_forward(stack, embedding, weights)
        enhanced = apply_mask(noisy_ref, mask)
        wave = istft(
            MultiChannelSpectrogram(enhanced[np.newaxis], sample_rate=rate), stft_cfg
        )
        write_wav(out / f"{clip_id}.wav", wave)

        n = wave.num_samples
        clean = WaveBuffer(
            read_wav(clip_dir / "target.wav", expect_rate=rate).channel(REF_CHANNEL)[:n], rate
        )
        noisy = WaveBuffer(mixture.channel(REF_CHANNEL)[:n], rate)
        clip_metrics = {
            "clip_id": clip_id,
            "stoi": stoi(clean, WaveBuffer(wave.mono(), rate)),
            "si_sdr_db": si_sdr(clean, wave),
            "noisy_stoi": stoi(clean, noisy),
            "noisy_si_sdr_db": si_sdr(clean, noisy),
        }
        (out / f"{clip_id}.json").write_text(json.dumps(clip_metrics, indent=2, sort_keys=True))

    label = {"oracle": "oracle-irm", "identity": "identity", "network": feature_kind}[mode]
    enhance_manifest = {
        "mode": mode,
        "feature_kind": label,
        "weights": str(weights_path) if weights_path else None,
        "dataset": str(dataset_dir),
        "clips": manifest["clips"],
    }
    (out / "manifest.json").write_text(json.dumps(enhance_manifest, indent=2, sort_keys=True))
    return enhance_manifest


def _run_pesq(pesq_bin, rate, clean_path, degraded_path):
    # External ITU-T PESQ tool, if the user points at one; last float on
    # stdout is taken as the score. Any failure simply yields no PESQ column.
    try:
        proc = subprocess.run(
            [str(pesq_bin), f"+{rate}", str(clean_path), str(degraded_path)],
            capture_output=True,
            text=True,
            timeout=60,
        )
        tokens = proc.stdout.replace("=", " ").replace(",", " ").split()
        values = [float(t) for t in tokens if _is_float(t)]
        return values[-1] if values else None
    except (OSError, subprocess.SubprocessError):
        return None


def _is_float(token):
    try:
        float(token)
        return True
    except ValueError:
        return False


def cmd_eval(
    dataset_dir,
    enhanced_dir,
    out_dir,
    plot=False,
    pesq_bin=None,
    include_noisy=True,
    max_plots=3,
):
    """Score an enhanced directory against its dataset and write the report.

    Emits report.csv / report.json with per-(geometry, feature, SNR) means,
    optionally grayscale PNGs of the global/local coherence planes for the
    first few clips, and a PESQ column when an external binary is supplied.
    """
    manifest = load_manifest(dataset_dir)
    rate = manifest["config"]["sample_rate"]
    enhanced_root = Path(enhanced_dir)
    enh_manifest_path = enhanced_root / "manifest.json"
    if not enh_manifest_path.is_file():
        raise DataError(f"no enhancement manifest under {enhanced_root}")
    enh_manifest = json.loads(enh_manifest_path.read_text())
    feature_label = enh_manifest["feature_kind"]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = EvalReport()
    for index, clip_id in enumerate(manifest["clips"]):
        clip_dir, sidecar, mixture = _load_clip(dataset_dir, clip_id, rate)
        enh_path = enhanced_root / f"{clip_id}.wav"
        if not enh_path.is_file():
            raise DataError(f"enhanced clip missing: {enh_path}")
        enhanced = read_wav(enh_path, expect_rate=rate)
        n = min(enhanced.num_samples, mixture.num_samples)
        clean = WaveBuffer(
            read_wav(clip_dir / "target.wav", expect_rate=rate).channel(REF_CHANNEL)[:n], rate
        )
        enh = WaveBuffer(enhanced.mono()[:n], rate)
        noisy = WaveBuffer(mixture.channel(REF_CHANNEL)[:n], rate)

        pesq_score = None
        if pesq_bin:
            mono_clean = out / "_pesq_clean.wav"
            write_wav(mono_clean, clean)
            pesq_score = _run_pesq(pesq_bin, rate, mono_clean, enh_path)
        report.add(
            ClipMetrics(
                clip_id=clip_id,
                geometry=sidecar["geometry"],
                feature_kind=feature_label,
                snr_db=sidecar["snr_db"],
                stoi=stoi(clean, enh),
                si_sdr_db=si_sdr(clean, enh),
                pesq=pesq_score,
            )
        )
        if include_noisy:
            report.add(
                ClipMetrics(
                    clip_id=clip_id,
                    geometry=sidecar["geometry"],
                    feature_kind="noisy",
                    snr_db=sidecar["snr_db"],
                    stoi=stoi(clean, noisy),
                    si_sdr_db=si_sdr(clean, noisy),
                )
            )
        if plot and index < max_plots:
            _plot_coherence(mixture, out / "plots", clip_id)

    report.write_csv(out / "report.csv")
    report.write_json(out / "report.json")
    return report


def _plot_coherence(mixture, plot_dir, clip_id, stft_cfg=StftConfig()):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plot_dir = Path(plot_dir)
    plot_dir.mkdir(parents=True, exist_ok=True)
    spec = stft(mixture, stft_cfg)
    for label, lam in (("global", 0.999), ("local", 0.1)):
        gamma = lstsc_map(spec, lam=lam).gamma
        plt.imsave(
            plot_dir / f"{clip_id}_{label}_coherence.png",
            gamma.T[::-1],
            cmap="gray",
            vmin=-1.0,
            vmax=1.0,
        )
