"""The target-speech sifting network, layer by layer: shape chain,
speaker conditioning, causality, and the weight container on disk."""

import tempfile
from pathlib import Path

import numpy as np

from spatialsift import CrnWeights, crn_forward, load_weights, store_weights
from spatialsift.crn import expected_tensor_shapes, FREQ_SIZES
from spatialsift.spatial import FeatureStack
from spatialsift.speaker import SpeakerEmbedding

spacer = "_" * 60
rng = np.random.default_rng(0)

print("layer tensors for a two-plane input (magnitude + global coherence):")
for name, shape in expected_tensor_shapes(2).items():
    print(f"  {name:16s} {shape}")
print(f"frequency sizes along the encoder: {FREQ_SIZES}")

print(spacer)
weights = CrnWeights.random(rng, input_planes=2)
frames = 50
stack = FeatureStack(planes=np.abs(rng.standard_normal((2, frames, 257))),
                     names=("magnitude", "g_lstsc"))
vec = rng.standard_normal(256)
speaker = SpeakerEmbedding(values=vec / np.linalg.norm(vec))
mask = crn_forward(stack, speaker, weights)
print(f"\nforward pass: {stack.planes.shape} + 256-dim speaker vector "
      f"-> mask {mask.shape}")
print(f"mask range ({mask.min():.4f}, {mask.max():.4f}) - a sigmoid keeps it inside (0, 1)")

print(spacer)
print("\ncausality: corrupting every frame after t leaves frames <= t untouched")
t_cut = 20
corrupted = stack.planes.copy()
corrupted[:, t_cut:, :] = rng.standard_normal(corrupted[:, t_cut:, :].shape)
mask2 = crn_forward(FeatureStack(planes=corrupted, names=stack.names), speaker, weights)
print(f"  frames < {t_cut} identical: {np.array_equal(mask[:t_cut], mask2[:t_cut])}")
print(f"  frames >= {t_cut} changed:  {not np.array_equal(mask[t_cut:], mask2[t_cut:])}")

print(spacer)
print("\nweight container round trip")
path = Path(tempfile.mkdtemp()) / "crn.tnsr"
store_weights(path, weights)
again = load_weights(path)
same = all(np.array_equal(weights.tensors[k], again.tensors[k]) for k in weights.tensors)
print(f"  {path.stat().st_size} bytes, bitwise round trip: {same}")
print("  the trainer package writes this same format; loading validates the")
print("  full shape chain and refuses anything inconsistent with it")
