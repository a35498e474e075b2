"""Training loops: the sifting network on exported features, and the
speaker encoder with the generalized end-to-end loss."""

import numpy as np
import torch
from torch.utils.data import DataLoader

from .dataset import FeatureClipDataset, collate_crop
from .encoder import SpeakerEncoder, Ge2eLoss, utterance_windows
from .model import SiftingNetwork, export_weights, masked_magnitude_loss


def train_crn(
    feature_dir,
    export_path,
    epochs=12,
    batch_size=8,
    learning_rate=3e-4,
    seed=0,
    log=print,
):
    """Fit the sifting network on a feature-export directory.

    Returns the per-epoch mean losses; the fitted weights are written to
    export_path in the shared container format.
    """
    torch.manual_seed(seed)
    dataset = FeatureClipDataset(feature_dir)
    loader = DataLoader(
        dataset, batch_size=batch_size, shuffle=True, collate_fn=collate_crop,
        generator=torch.Generator().manual_seed(seed),
    )
    model = SiftingNetwork(input_planes=dataset.input_planes)
    with torch.no_grad():  # forget-gate bias at 1 stabilizes early epochs
        hidden = model.lstm.hidden_size
        model.lstm.bias_ih_l0[hidden : 2 * hidden].fill_(1.0)
    optimizer = torch.optim.Adam(model.parameters(), lr=learning_rate)
    history = []
    for epoch in range(epochs):
        total, count = 0.0, 0
        for planes, noisy, clean, dvec in loader:
            optimizer.zero_grad()
            mask = model(planes, dvec)
            loss = masked_magnitude_loss(mask, noisy, clean)
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
            count += 1
        history.append(total / max(count, 1))
        log(f"epoch {epoch + 1}/{epochs}: loss {history[-1]:.5f}")
    export_weights(model, export_path)
    log(f"exported weights to {export_path}")
    return history


def overfit_single_clip(planes, noisy, clean, dvector, max_steps=2000, tolerance=1e-3, seed=0):
    """Drive the loss on one clip below `tolerance`; returns (steps, loss)."""
    torch.manual_seed(seed)
    model = SiftingNetwork(input_planes=planes.shape[0])
    optimizer = torch.optim.Adam(model.parameters(), lr=2e-3)
    planes = torch.from_numpy(planes[np.newaxis].astype(np.float32))
    noisy = torch.from_numpy(noisy[np.newaxis].astype(np.float32))
    clean = torch.from_numpy(clean[np.newaxis].astype(np.float32))
    dvector = torch.from_numpy(dvector[np.newaxis].astype(np.float32))
    loss_value = float("inf")
    for step in range(1, max_steps + 1):
        optimizer.zero_grad()
        loss = masked_magnitude_loss(model(planes, dvector), noisy, clean)
        loss.backward()
        optimizer.step()
        loss_value = float(loss.detach())
        if loss_value < tolerance:
            return step, loss_value
    return max_steps, loss_value


def train_encoder(
    utterances_by_speaker,
    steps=200,
    utts_per_speaker=4,
    learning_rate=1e-3,
    seed=0,
    fs=16000,
    log=print,
):
    """GE2E training on an in-memory toy set: {speaker: [waveform, ...]}.

    Each step samples one sliding window per chosen utterance and
    minimizes the softmax contrast against speaker centroids.
    """
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    speakers = sorted(utterances_by_speaker)
    windows = {
        s: [utterance_windows(u, fs) for u in utterances_by_speaker[s]] for s in speakers
    }
    encoder = SpeakerEncoder()
    criterion = Ge2eLoss()
    optimizer = torch.optim.Adam(
        list(encoder.parameters()) + list(criterion.parameters()), lr=learning_rate
    )
    for step in range(1, steps + 1):
        batch = []
        for s in speakers:
            picks = rng.choice(len(windows[s]), size=utts_per_speaker, replace=True)
            rows = []
            for p in picks:
                w = windows[s][p]
                rows.append(w[rng.integers(w.shape[0])])
            batch.append(np.stack(rows))
        mel = torch.from_numpy(np.stack(batch))  # (S, U, frames, 40)
        S, U = mel.shape[:2]
        optimizer.zero_grad()
        embeddings = encoder(mel.reshape(S * U, *mel.shape[2:])).reshape(S, U, -1)
        loss = criterion(embeddings)
        loss.backward()
        optimizer.step()
        if step % 50 == 0:
            log(f"ge2e step {step}/{steps}: loss {float(loss.detach()):.4f}")
    return encoder
