"""Speaker encoder: 3-layer LSTM over log-mel windows, GE2E training,
enrollment-embedding export, and encoder-weight export.

The front end mirrors the inference side: 40 mel bands (25 ms frames,
10 ms hop, 512-point FFT, level-relative floor, per-utterance mean
normalization), 1.6-s sliding windows with 50% overlap, last-frame
projection to 256 dims, L2-normalized everywhere.
"""

import numpy as np
import torch
import torch.nn as nn

from .container import write_container

NUM_MEL = 40
MEL_FRAME = 400
MEL_HOP = 160
MEL_FFT = 512
HIDDEN = 256
EMBED_DIM = 256
WINDOW_FRAMES = 160  # 1.6 s of 10 ms hops
WINDOW_HOP = 80


def mel_matrix(fs=16000):
    def to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    edges = from_mel(np.linspace(to_mel(0.0), to_mel(fs / 2.0), NUM_MEL + 2))
    bins = np.arange(MEL_FFT // 2 + 1) * fs / MEL_FFT
    fb = np.zeros((NUM_MEL, bins.size))
    for b in range(NUM_MEL):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        fb[b] = np.clip(
            np.minimum((bins - lo) / max(mid - lo, 1e-9), (hi - bins) / max(hi - mid, 1e-9)),
            0.0,
            None,
        )
    return fb


def log_mel(samples, fs=16000):
    samples = np.asarray(samples, dtype=np.float64)
    num = 1 + (samples.size - MEL_FRAME) // MEL_HOP
    idx = np.arange(num)[:, np.newaxis] * MEL_HOP + np.arange(MEL_FRAME)
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(MEL_FRAME) / MEL_FRAME)
    spec = np.fft.rfft(samples[idx] * window, n=MEL_FFT, axis=-1)
    power = spec.real**2 + spec.imag**2
    mel = power @ mel_matrix(fs).T
    floor = 1e-10 * max(float(mel.max()), np.finfo(np.float64).tiny)
    feats = np.log(mel + floor)
    return (feats - feats.mean(axis=0, keepdims=True)).astype(np.float32)


class SpeakerEncoder(nn.Module):
    def __init__(self):
        super().__init__()
        self.lstm = nn.LSTM(NUM_MEL, HIDDEN, num_layers=3, batch_first=True)
        self.projection = nn.Linear(HIDDEN, EMBED_DIM)

    def forward(self, mel_windows):
        """(B, frames, 40) -> unit-norm embeddings (B, 256)."""
        hidden, _ = self.lstm(mel_windows)
        out = self.projection(hidden[:, -1])
        return out / out.norm(dim=1, keepdim=True).clamp_min(1e-12)


def utterance_windows(samples, fs=16000):
    feats = log_mel(samples, fs)
    if feats.shape[0] < WINDOW_FRAMES:
        raise ValueError("utterance shorter than one sliding window")
    count = 1 + (feats.shape[0] - WINDOW_FRAMES) // WINDOW_HOP
    return np.stack(
        [feats[i * WINDOW_HOP : i * WINDOW_HOP + WINDOW_FRAMES] for i in range(count)]
    )


def embed(encoder, samples, fs=16000):
    windows = torch.from_numpy(utterance_windows(samples, fs))
    with torch.no_grad():
        per_window = encoder(windows)
    mean = per_window.mean(dim=0)
    return (mean / mean.norm()).numpy()


class Ge2eLoss(nn.Module):
    """Softmax generalized end-to-end loss over a (speakers x utterances) batch."""

    def __init__(self):
        super().__init__()
        self.scale = nn.Parameter(torch.tensor(10.0))
        self.bias = nn.Parameter(torch.tensor(-5.0))

    def forward(self, embeddings):
        """embeddings (num_speakers, num_utts, dim), already unit-norm."""
        S, U, D = embeddings.shape
        centroids = embeddings.mean(dim=1)  # (S, D)
        # leave-one-out centroid for the own-speaker column
        loo = (embeddings.sum(dim=1, keepdim=True) - embeddings) / (U - 1)
        sims = torch.einsum("sud,kd->suk", embeddings, centroids)
        own = torch.einsum("sud,sud->su", embeddings, loo)
        idx = torch.arange(S)
        sims = sims.clone()
        sims[idx, :, idx] = own
        logits = self.scale.clamp_min(1e-3) * sims + self.bias
        target = idx.unsqueeze(1).expand(S, U).reshape(-1)
        return nn.functional.cross_entropy(logits.reshape(S * U, S), target)


def export_encoder(encoder, path):
    tensors = {}
    for k in range(3):
        tensors[f"lstm{k + 1}.input"] = getattr(encoder.lstm, f"weight_ih_l{k}").detach().numpy()
        tensors[f"lstm{k + 1}.recurrent"] = getattr(encoder.lstm, f"weight_hh_l{k}").detach().numpy()
        tensors[f"lstm{k + 1}.bias"] = (
            (getattr(encoder.lstm, f"bias_ih_l{k}") + getattr(encoder.lstm, f"bias_hh_l{k}"))
            .detach()
            .numpy()
        )
    tensors["projection.kernel"] = encoder.projection.weight.detach().numpy()
    tensors["projection.bias"] = encoder.projection.bias.detach().numpy()
    write_container(path, tensors, attrs={"format": "speaker-encoder"})


def export_dvector(encoder, utterances, path, speaker_id, fs=16000):
    """Aggregate enrollment utterances into one embedding container.

    Refuses anything but the documented 256-dim unit-norm layout.
    """
    embeddings = [embed(encoder, u, fs) for u in utterances]
    mean = np.mean(embeddings, axis=0)
    vector = mean / np.linalg.norm(mean)
    if vector.shape != (EMBED_DIM,):
        raise ValueError(f"embedding dimension {vector.shape} != ({EMBED_DIM},)")
    write_container(
        path,
        {"dvector": vector},
        attrs={"format": "dvector", "speaker_id": speaker_id},
    )
    return vector
