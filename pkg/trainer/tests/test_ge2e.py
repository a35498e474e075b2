"""Toy speaker-verification check: after GE2E training on four synthetic
voices, same-speaker embeddings are closer than different-speaker ones."""

import numpy as np
import pytest

from sifttrainer.encoder import export_dvector
from sifttrainer.container import read_container
from sifttrainer.training import train_encoder
from sifttrainer.encoder import embed


def synthetic_voice(rng, f0, formants, seconds=3.3, fs=16000):
    t = np.arange(int(seconds * fs)) / fs
    sig = np.zeros(t.size)
    for k in range(1, int(6000 / f0)):
        gain = k**-1.2 * (1.0 + sum(1.0 / (1.0 + ((k * f0 - fm) / 200.0) ** 2) for fm in formants))
        sig += gain * np.sin(2 * np.pi * k * f0 * (1 + 0.02 * np.sin(2 * np.pi * 3 * t)) * t
                             + rng.uniform(0, 6.28))
    sig *= 0.6 + 0.4 * np.sin(2 * np.pi * rng.uniform(2, 5) * t + rng.uniform(0, 6.28))
    sig += 0.01 * rng.standard_normal(t.size)
    return 0.1 * sig / np.std(sig)


@pytest.fixture(scope="module")
def toy_corpus():
    rng = np.random.default_rng(0)
    voices = {
        "spk0": (95.0, (500, 1100, 2400)),
        "spk1": (140.0, (650, 1700, 2900)),
        "spk2": (190.0, (400, 2000, 3200)),
        "spk3": (230.0, (800, 1300, 2600)),
    }
    return {
        name: [synthetic_voice(rng, f0, formants) for _ in range(6)]
        for name, (f0, formants) in voices.items()
    }


def test_same_speaker_closer_than_different(toy_corpus, tmp_path):
    encoder = train_encoder(toy_corpus, steps=120, seed=0, log=lambda *_: None)
    embeddings = {s: [embed(encoder, u) for u in utts] for s, utts in toy_corpus.items()}
    same, different = [], []
    speakers = sorted(embeddings)
    for i, s in enumerate(speakers):
        for a in range(len(embeddings[s])):
            for b in range(a + 1, len(embeddings[s])):
                same.append(np.dot(embeddings[s][a], embeddings[s][b]))
        for other in speakers[i + 1 :]:
            for ea in embeddings[s]:
                for eb in embeddings[other]:
                    different.append(np.dot(ea, eb))
    same_mean, diff_mean = np.mean(same), np.mean(different)
    print(f"\nsame-speaker cosine {same_mean:.3f}, different-speaker {diff_mean:.3f}")
    assert same_mean > diff_mean

    # enrollment export: unit norm, bitwise round trip through the container
    out = tmp_path / "spk0.dvec"
    vector = export_dvector(encoder, toy_corpus["spk0"], out, "spk0")
    assert abs(np.linalg.norm(vector) - 1.0) < 1e-6
    tensors, attrs = read_container(out)
    assert attrs == {"format": "dvector", "speaker_id": "spk0"}
    np.testing.assert_array_equal(tensors["dvector"], vector.astype(np.float32))
