"""Forward-pass parity across the trainer/inference boundary: weights
exported here must produce the same masks over there."""

import numpy as np
import pytest
import torch

from sifttrainer.model import SiftingNetwork, export_weights

spatialsift = pytest.importorskip("spatialsift")
from spatialsift.crn import load_weights, crn_forward
from spatialsift.spatial import FeatureStack
from spatialsift.speaker import SpeakerEmbedding


@pytest.mark.parametrize("input_planes", [1, 2, 3])
def test_exported_weights_match_inference_forward(tmp_path, input_planes):
    torch.manual_seed(input_planes)
    model = SiftingNetwork(input_planes=input_planes)
    with torch.no_grad():
        for p in model.parameters():
            torch.nn.init.normal_(p, std=0.05)
    path = tmp_path / "crn.tnsr"
    export_weights(model, path)
    weights = load_weights(path)
    assert weights.input_planes == input_planes

    rng = np.random.default_rng(input_planes)
    frames = 25
    planes = rng.standard_normal((input_planes, frames, 257)).astype(np.float32)
    vec = rng.standard_normal(256).astype(np.float32)
    vec /= np.linalg.norm(vec)

    with torch.no_grad():
        torch_mask = model(
            torch.from_numpy(planes[np.newaxis]), torch.from_numpy(vec[np.newaxis])
        ).numpy()[0]
    numpy_mask = crn_forward(
        FeatureStack(planes=planes, names=tuple(f"p{i}" for i in range(input_planes))),
        SpeakerEmbedding(values=vec.astype(np.float64) / np.linalg.norm(vec.astype(np.float64))),
        weights,
    )
    assert np.max(np.abs(torch_mask - numpy_mask)) < 1e-4


def test_loss_parity_with_inference_op(tmp_path):
    from sifttrainer.model import masked_magnitude_loss
    from spatialsift.crn import mse_masked_loss

    rng = np.random.default_rng(7)
    mask = rng.uniform(0, 1, (9, 257)).astype(np.float32)
    noisy = np.abs(rng.standard_normal((9, 257))).astype(np.float32)
    clean = np.abs(rng.standard_normal((9, 257))).astype(np.float32)
    torch_loss = float(
        masked_magnitude_loss(
            torch.from_numpy(mask), torch.from_numpy(noisy), torch.from_numpy(clean)
        )
    )
    assert torch_loss == pytest.approx(mse_masked_loss(mask, noisy, clean), rel=1e-5)


def test_export_refuses_shape_drift(tmp_path):
    model = SiftingNetwork(input_planes=2)
    model.convs[2] = torch.nn.Conv2d(8, 17, (1, 3), stride=(1, 2))  # drift
    with pytest.raises(ValueError, match="export refused"):
        export_weights(model, tmp_path / "bad.tnsr")
