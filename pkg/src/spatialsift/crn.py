"""Target-speech sifting network: causal CRN forward pass and mask ops.

Architecture (one clip, T frames, 257 bins): six conv layers with 1x3
kernels (frequency only) and stride 2 in frequency squeeze the spectrum
257 -> 128 -> 63 -> 31 -> 15 -> 7 -> 3 while the channel count doubles
4 -> 8 -> ... -> 128; the 128x3 maps are flattened to 384 per frame, the
256-dim speaker embedding is concatenated per frame, and an LSTM with
hidden size 384 runs forward over time. The decoder mirrors the encoder
with transposed 1x3 convolutions, concatenating each encoder output onto
the corresponding decoder input (doubling its channels); the 63 -> 128
stage needs one unit of frequency output padding, every other stage is
exact. ELU everywhere except the final sigmoid, which emits the soft mask
in (0, 1). No operation mixes future frames: time kernels are 1 and the
recurrence runs forward only, so frame t of the mask depends on input
frames <= t alone.
"""

import numpy as np
from dataclasses import dataclass

from .nnops import elu, sigmoid, lstm_forward
from .speaker import EMBED_DIM
from . import tensorio

NUM_BINS = 257
ENCODER_CHANNELS = (4, 8, 16, 32, 64, 128)
FREQ_SIZES = (257, 128, 63, 31, 15, 7, 3)
LSTM_HIDDEN = 384
BOTTLENECK = ENCODER_CHANNELS[-1] * FREQ_SIZES[-1]  # 384
WEIGHTS_FORMAT = "crn-weights"
VALID_INPUT_PLANES = (1, 2, 3)
# Frequency output padding per decoder stage, stage index 6..1.
_DECONV_OUT_PAD = {2: 1}  # 63 -> 128 is the one inexact transpose


def expected_tensor_shapes(input_planes):
    """Tensor name -> shape for a network with the given input plane count."""
    if input_planes not in VALID_INPUT_PLANES:
        raise ValueError(
            f"input plane count must be one of {VALID_INPUT_PLANES}, got {input_planes}"
        )
    shapes = {}
    in_ch = input_planes
    for k, out_ch in enumerate(ENCODER_CHANNELS, start=1):
        shapes[f"conv{k}.kernel"] = (out_ch, in_ch, 1, 3)
        shapes[f"conv{k}.bias"] = (out_ch,)
        in_ch = out_ch
    shapes["lstm.input"] = (4 * LSTM_HIDDEN, BOTTLENECK + EMBED_DIM)
    shapes["lstm.recurrent"] = (4 * LSTM_HIDDEN, LSTM_HIDDEN)
    shapes["lstm.bias"] = (4 * LSTM_HIDDEN,)
    for k in range(6, 0, -1):
        skip_ch = ENCODER_CHANNELS[k - 1]
        out_ch = ENCODER_CHANNELS[k - 2] if k >= 2 else 1
        shapes[f"deconv{k}.kernel"] = (out_ch, 2 * skip_ch, 1, 3)
        shapes[f"deconv{k}.bias"] = (out_ch,)
    return shapes


@dataclass
class CrnWeights:
    """All named tensors of the sifting network, validated against the shape chain."""

    tensors: dict
    input_planes: int = 2

    def __post_init__(self):
        expected = expected_tensor_shapes(self.input_planes)
        missing = set(expected) - set(self.tensors)
        if missing:
            raise ValueError(f"missing tensors: {sorted(missing)}")
        unknown = set(self.tensors) - set(expected)
        if unknown:
            raise ValueError(f"unknown tensors: {sorted(unknown)}")
        for name, shape in expected.items():
            arr = np.asarray(self.tensors[name], dtype=np.float32)
            if arr.shape != shape:
                raise ValueError(
                    f"tensor {name!r} has shape {arr.shape}, expected {shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"tensor {name!r} contains NaN or Inf")
            self.tensors[name] = arr

    @classmethod
    def zeros(cls, input_planes=2):
        shapes = expected_tensor_shapes(input_planes)
        return cls(
            tensors={n: np.zeros(s, dtype=np.float32) for n, s in shapes.items()},
            input_planes=input_planes,
        )

    @classmethod
    def random(cls, rng, input_planes=2, scale=0.05):
        shapes = expected_tensor_shapes(input_planes)
        tensors = {
            n: (scale * rng.standard_normal(s)).astype(np.float32)
            for n, s in shapes.items()
        }
        return cls(tensors=tensors, input_planes=input_planes)


def store_weights(path, weights):
    """Write a CrnWeights container (the trainer writes the same layout)."""
    tensorio.save_tensors(
        path,
        weights.tensors,
        attrs={
            "format": WEIGHTS_FORMAT,
            "input_planes": str(weights.input_planes),
            "embedding_dim": str(EMBED_DIM),
        },
    )


def load_weights(path):
    """Read and shape-validate a weight container."""
    tensors, attrs = tensorio.load_tensors(path)
    if attrs.get("format") not in (None, WEIGHTS_FORMAT):
        raise ValueError(f"{path}: container format {attrs.get('format')!r} is not CRN weights")
    try:
        input_planes = int(attrs.get("input_planes", "2"))
    except ValueError as exc:
        raise ValueError(f"{path}: bad input_planes attribute") from exc
    if int(attrs.get("embedding_dim", EMBED_DIM)) != EMBED_DIM:
        raise ValueError(f"{path}: embedding_dim attribute != {EMBED_DIM}")
    return CrnWeights(tensors=tensors, input_planes=input_planes)


def _conv_freq(x, kernel, bias):
    # x (C_in, T, F) -> (C_out, T, (F - 3) // 2 + 1); 1x3 kernel, stride 2 in frequency.
    f_out = (x.shape[2] - 3) // 2 + 1
    out = np.zeros((kernel.shape[0], x.shape[1], f_out), dtype=x.dtype)
    for k in range(3):
        out += np.einsum("oi,itf->otf", kernel[:, :, 0, k], x[:, :, k : k + 2 * f_out : 2])
    return out + bias[:, np.newaxis, np.newaxis]


def _deconv_freq(x, kernel, bias, out_pad=0):
    # Transposed counterpart of _conv_freq: (C_in, T, F) -> (C_out, T, (F-1)*2 + 3 + out_pad).
    f_in = x.shape[2]
    f_out = (f_in - 1) * 2 + 3 + out_pad
    out = np.zeros((kernel.shape[0], x.shape[1], f_out), dtype=x.dtype)
    for k in range(3):
        contrib = np.einsum("oi,itf->otf", kernel[:, :, 0, k], x)
        out[:, :, k : k + 2 * (f_in - 1) + 1 : 2] += contrib
    return out + bias[:, np.newaxis, np.newaxis]


def crn_forward(features, dvector, weights):
    """Soft mask for one clip.

    Args:
        features: FeatureStack with plane_count == weights.input_planes
            and 257 frequency bins.
        dvector: SpeakerEmbedding conditioning the recurrent layer.
        weights: CrnWeights.

    Returns:
        float32 mask (frames, 257), every value strictly inside (0, 1).
    """
    planes = features.planes
    if planes.shape[0] != weights.input_planes:
        raise ValueError(
            f"feature stack has {planes.shape[0]} planes, weights expect "
            f"{weights.input_planes}"
        )
    if planes.shape[2] != NUM_BINS:
        raise ValueError(f"feature stack has {planes.shape[2]} bins, expected {NUM_BINS}")
    w = weights.tensors
    x = planes.astype(np.float32)
    skips = []
    for k in range(1, 7):
        x = elu(_conv_freq(x, w[f"conv{k}.kernel"], w[f"conv{k}.bias"]))
        if x.shape[2] != FREQ_SIZES[k]:
            raise AssertionError(f"encoder stage {k}: got {x.shape[2]} bins")
        skips.append(x)

    T = x.shape[1]
    flat = x.transpose(1, 0, 2).reshape(T, BOTTLENECK)
    embed = np.broadcast_to(dvector.values.astype(np.float32), (T, EMBED_DIM))
    lstm_in = np.concatenate([flat, embed], axis=1)
    hidden = lstm_forward(lstm_in, w["lstm.input"], w["lstm.recurrent"], w["lstm.bias"])
    x = hidden.reshape(T, ENCODER_CHANNELS[-1], FREQ_SIZES[-1]).transpose(1, 0, 2)

    for k in range(6, 0, -1):
        x = np.concatenate([x, skips[k - 1]], axis=0)
        x = _deconv_freq(
            x, w[f"deconv{k}.kernel"], w[f"deconv{k}.bias"], out_pad=_DECONV_OUT_PAD.get(k, 0)
        )
        if x.shape[2] != FREQ_SIZES[k - 1]:
            raise AssertionError(f"decoder stage {k}: got {x.shape[2]} bins")
        x = elu(x) if k > 1 else sigmoid(x)
    return x[0].astype(np.float32)


def apply_mask(noisy_spec, mask):
    """Masked magnitude with the noisy phase: mask * |Y| * exp(j angle Y).

    Args:
        noisy_spec: complex reference-channel spectrogram (frames, bins).
        mask: real mask of the same shape, values in [0, 1].
    """
    noisy_spec = np.asarray(noisy_spec)
    mask = np.asarray(mask)
    if noisy_spec.shape != mask.shape:
        raise ValueError(f"shape mismatch: spec {noisy_spec.shape}, mask {mask.shape}")
    return mask * noisy_spec


def mse_masked_loss(mask, noisy_mag, clean_mag):
    """Mean over all bins of (mask * noisy_mag - clean_mag) ** 2."""
    mask = np.asarray(mask, dtype=np.float64)
    noisy_mag = np.asarray(noisy_mag, dtype=np.float64)
    clean_mag = np.asarray(clean_mag, dtype=np.float64)
    if not (mask.shape == noisy_mag.shape == clean_mag.shape):
        raise ValueError(
            f"shape mismatch: mask {mask.shape}, noisy {noisy_mag.shape}, "
            f"clean {clean_mag.shape}"
        )
    return float(np.mean((mask * noisy_mag - clean_mag) ** 2))
