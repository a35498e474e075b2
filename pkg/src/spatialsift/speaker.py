"""Speaker embeddings: recurrent encoder forward pass and embedding files.

An utterance is converted to 40-band log-mel features (25 ms frames,
10 ms hop, per-utterance mean normalization, so a global waveform gain
cancels), cut into 1.6-s sliding windows with 50% overlap, and each
window is run through a 3-layer LSTM; the last hidden state is projected
to 256 dimensions and L2-normalized. The window embeddings are averaged
elementwise and the mean is L2-normalized again, giving the final
speaker embedding that conditions the sifting network. Training of the
encoder lives in the trainer package; this module only runs and stores it.
"""

import warnings
import numpy as np
from dataclasses import dataclass

from .nnops import lstm_forward
from . import tensorio

EMBED_DIM = 256
ENCODER_HIDDEN = 256
ENCODER_LAYERS = 3
NUM_MEL_BANDS = 40
MEL_FRAME_LEN = 400  # 25 ms at 16 kHz
MEL_HOP = 160  # 10 ms
MEL_FFT = 512
MEL_FLOOR = 1e-10

ENCODER_FORMAT = "speaker-encoder"
EMBEDDING_FORMAT = "dvector"


@dataclass(frozen=True)
class SlidingWindowConfig:
    """Sliding analysis windows over the utterance, in seconds."""

    window_s: float = 1.6
    hop_s: float = 0.8


@dataclass
class SpeakerEmbedding:
    """Unit-norm 256-dim speaker vector with an opaque speaker label."""

    values: np.ndarray
    speaker_id: str = ""

    def __post_init__(self):
        vec = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if vec.shape != (EMBED_DIM,):
            raise ValueError(f"embedding must have dimension {EMBED_DIM}, got {vec.shape}")
        norm = np.linalg.norm(vec)
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"embedding norm {norm} is not 1 within 1e-6")
        self.values = vec


def _unit(vec):
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ValueError("cannot normalize a zero vector")
    return vec / norm


ENCODER_TENSOR_SHAPES = {}
for _k in range(1, ENCODER_LAYERS + 1):
    _in = NUM_MEL_BANDS if _k == 1 else ENCODER_HIDDEN
    ENCODER_TENSOR_SHAPES[f"lstm{_k}.input"] = (4 * ENCODER_HIDDEN, _in)
    ENCODER_TENSOR_SHAPES[f"lstm{_k}.recurrent"] = (4 * ENCODER_HIDDEN, ENCODER_HIDDEN)
    ENCODER_TENSOR_SHAPES[f"lstm{_k}.bias"] = (4 * ENCODER_HIDDEN,)
ENCODER_TENSOR_SHAPES["projection.kernel"] = (EMBED_DIM, ENCODER_HIDDEN)
ENCODER_TENSOR_SHAPES["projection.bias"] = (EMBED_DIM,)


@dataclass
class EncoderWeights:
    """Named tensors of the 3-layer recurrent encoder plus projection."""

    tensors: dict

    def __post_init__(self):
        missing = set(ENCODER_TENSOR_SHAPES) - set(self.tensors)
        if missing:
            raise ValueError(f"missing encoder tensors: {sorted(missing)}")
        unknown = set(self.tensors) - set(ENCODER_TENSOR_SHAPES)
        if unknown:
            raise ValueError(f"unknown encoder tensors: {sorted(unknown)}")
        for name, expected in ENCODER_TENSOR_SHAPES.items():
            arr = np.asarray(self.tensors[name], dtype=np.float64)
            if arr.shape != expected:
                raise ValueError(
                    f"encoder tensor {name!r} has shape {arr.shape}, expected {expected}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"encoder tensor {name!r} contains NaN or Inf")
            self.tensors[name] = arr

    @classmethod
    def random(cls, rng, scale=0.08):
        tensors = {
            name: scale * rng.standard_normal(shape)
            for name, shape in ENCODER_TENSOR_SHAPES.items()
        }
        return cls(tensors=tensors)


def mel_filterbank(num_bands=NUM_MEL_BANDS, fft_len=MEL_FFT, fs=16000):
    """Triangular mel filters (HTK scale) from 0 Hz to fs/2, shape (bands, bins)."""

    def to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    edges = from_mel(np.linspace(to_mel(0.0), to_mel(fs / 2.0), num_bands + 2))
    bins = np.arange(fft_len // 2 + 1) * fs / fft_len
    fb = np.zeros((num_bands, fft_len // 2 + 1))
    for b in range(num_bands):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        rising = (bins - lo) / max(mid - lo, 1e-9)
        falling = (hi - bins) / max(hi - mid, 1e-9)
        fb[b] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def log_mel_features(samples, fs=16000):
    """Mean-normalized log-mel frames of a mono signal, shape (frames, bands)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < MEL_FRAME_LEN:
        raise ValueError(
            f"utterance of {samples.size} samples is shorter than one analysis frame"
        )
    num_frames = 1 + (samples.size - MEL_FRAME_LEN) // MEL_HOP
    idx = np.arange(num_frames)[:, np.newaxis] * MEL_HOP + np.arange(MEL_FRAME_LEN)
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(MEL_FRAME_LEN) / MEL_FRAME_LEN)
    spec = np.fft.rfft(samples[idx] * window, n=MEL_FFT, axis=-1)
    power = spec.real**2 + spec.imag**2
    mel = power @ mel_filterbank(fs=fs).T
    # level-relative floor: log(g^2 (P + floor)) shifts by a constant under a
    # global gain g, which the mean normalization removes exactly
    floor = MEL_FLOOR * max(float(mel.max()), np.finfo(np.float64).tiny)
    feats = np.log(mel + floor)
    return feats - feats.mean(axis=0, keepdims=True)


def _window_frame_counts(cfg):
    win = int(round(cfg.window_s * 1000.0 / 10.0))  # mel frames per window
    hop = int(round(cfg.hop_s * 1000.0 / 10.0))
    return win, hop


def _encode_window(feats, weights):
    h = feats
    for k in range(1, ENCODER_LAYERS + 1):
        h = lstm_forward(
            h,
            weights.tensors[f"lstm{k}.input"],
            weights.tensors[f"lstm{k}.recurrent"],
            weights.tensors[f"lstm{k}.bias"],
        )
    proj = weights.tensors["projection.kernel"] @ h[-1] + weights.tensors["projection.bias"]
    return _unit(proj)


def aggregate_windows(window_embeddings):
    """Elementwise mean of window embeddings, L2-normalized.

    Order-independent down to the bit: each coordinate is summed in sorted
    order, so any permutation of the windows gives the identical result.
    """
    stacked = np.asarray(window_embeddings, dtype=np.float64)
    return _unit(np.sort(stacked, axis=0).mean(axis=0))


def embed_utterance(wave, weights, window_cfg=SlidingWindowConfig(), speaker_id=""):
    """Speaker embedding of a mono utterance.

    Args:
        wave: mono WaveBuffer, at least one sliding window long.
        weights: EncoderWeights.
        window_cfg: sliding window length/hop.

    Returns:
        SpeakerEmbedding (unit norm, deterministic in its inputs).
    """
    samples = wave.mono()
    win_frames, hop_frames = _window_frame_counts(window_cfg)
    feats = log_mel_features(samples, fs=wave.sample_rate)
    if feats.shape[0] < win_frames:
        raise ValueError(
            f"utterance of {wave.duration:.2f} s is shorter than one "
            f"{window_cfg.window_s} s window"
        )
    num_windows = 1 + (feats.shape[0] - win_frames) // hop_frames
    embeddings = [
        _encode_window(feats[w * hop_frames : w * hop_frames + win_frames], weights)
        for w in range(num_windows)
    ]
    return SpeakerEmbedding(values=aggregate_windows(embeddings), speaker_id=speaker_id)


def store_embedding(path, embedding):
    """Write an embedding to the tensor container format."""
    tensorio.save_tensors(
        path,
        {"dvector": embedding.values},
        attrs={"format": EMBEDDING_FORMAT, "speaker_id": embedding.speaker_id},
    )


def load_embedding(path):
    """Read an embedding container; renormalizes (with a warning) if needed."""
    tensors, attrs = tensorio.load_tensors(path)
    if "dvector" not in tensors:
        raise ValueError(f"{path}: no 'dvector' tensor in container")
    vec = tensors["dvector"].astype(np.float64).reshape(-1)
    if vec.shape != (EMBED_DIM,):
        raise ValueError(f"{path}: embedding dimension {vec.size}, expected {EMBED_DIM}")
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ValueError(f"{path}: zero embedding vector")
    if abs(norm - 1.0) > 1e-6:
        warnings.warn(f"{path}: embedding norm {norm:.6f} != 1, renormalizing")
        vec = vec / norm
    else:
        vec = vec / norm  # float32 storage: restore exact unit norm
    return SpeakerEmbedding(values=vec, speaker_id=attrs.get("speaker_id", ""))


def store_encoder_weights(path, weights):
    tensorio.save_tensors(path, weights.tensors, attrs={"format": ENCODER_FORMAT})


def load_encoder_weights(path):
    tensors, attrs = tensorio.load_tensors(path)
    if attrs.get("format") not in (None, ENCODER_FORMAT):
        raise ValueError(f"{path}: container format {attrs.get('format')!r} is not encoder weights")
    return EncoderWeights(tensors={k: v.astype(np.float64) for k, v in tensors.items()})
