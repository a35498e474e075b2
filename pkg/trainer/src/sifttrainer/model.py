"""The target-speech sifting network in PyTorch, plus container export.

Architecture: six (1x3)/stride-(1,2) conv stages over frequency
(257 -> 128 -> 63 -> 31 -> 15 -> 7 -> 3, channels 4 -> ... -> 128), the
bottleneck flattened per frame and concatenated with a 256-dim speaker
embedding, a forward LSTM (hidden 384), and six transposed-conv stages
mirroring the encoder with skip concatenation (previous output first).
ELU activations except the final sigmoid. The 63 -> 128 transposed stage
needs one unit of frequency output padding. No temporal kernels and a
forward-only recurrence keep the mask causal.
"""

import torch
import torch.nn as nn

from .container import write_container

ENCODER_CHANNELS = (4, 8, 16, 32, 64, 128)
FREQ_SIZES = (257, 128, 63, 31, 15, 7, 3)
LSTM_HIDDEN = 384
EMBED_DIM = 256
BOTTLENECK = ENCODER_CHANNELS[-1] * FREQ_SIZES[-1]


class SiftingNetwork(nn.Module):
    def __init__(self, input_planes=2):
        super().__init__()
        if input_planes not in (1, 2, 3):
            raise ValueError(f"input_planes must be 1, 2 or 3, got {input_planes}")
        self.input_planes = input_planes
        self.convs = nn.ModuleList()
        in_ch = input_planes
        for out_ch in ENCODER_CHANNELS:
            self.convs.append(nn.Conv2d(in_ch, out_ch, (1, 3), stride=(1, 2)))
            in_ch = out_ch
        self.lstm = nn.LSTM(BOTTLENECK + EMBED_DIM, LSTM_HIDDEN, batch_first=True)
        self.deconvs = nn.ModuleList()
        for k in range(6, 0, -1):
            skip_ch = ENCODER_CHANNELS[k - 1]
            out_ch = ENCODER_CHANNELS[k - 2] if k >= 2 else 1
            self.deconvs.append(
                nn.ConvTranspose2d(
                    2 * skip_ch,
                    out_ch,
                    (1, 3),
                    stride=(1, 2),
                    output_padding=(0, 1) if k == 2 else 0,
                )
            )
        self.act = nn.ELU()

    def forward(self, planes, embedding):
        """planes (B, C, T, 257), embedding (B, 256) -> mask (B, T, 257)."""
        x = planes
        skips = []
        for conv in self.convs:
            x = self.act(conv(x))
            skips.append(x)
        B, C, T, F = x.shape
        flat = x.permute(0, 2, 1, 3).reshape(B, T, C * F)
        conditioned = torch.cat(
            [flat, embedding.unsqueeze(1).expand(B, T, EMBED_DIM)], dim=2
        )
        hidden, _ = self.lstm(conditioned)
        x = hidden.reshape(B, T, ENCODER_CHANNELS[-1], FREQ_SIZES[-1]).permute(0, 2, 1, 3)
        for i, deconv in enumerate(self.deconvs):
            x = torch.cat([x, skips[5 - i]], dim=1)
            x = deconv(x)
            x = self.act(x) if i < 5 else torch.sigmoid(x)
        return x.squeeze(1)


def export_weights(model, path):
    """Write the model as a CRN weight container.

    Refuses to export if any tensor drifted from the documented layer
    arithmetic (shape check against the architecture constants).
    """
    tensors = {}
    for k, conv in enumerate(model.convs, start=1):
        tensors[f"conv{k}.kernel"] = conv.weight.detach().cpu().numpy()
        tensors[f"conv{k}.bias"] = conv.bias.detach().cpu().numpy()
    tensors["lstm.input"] = model.lstm.weight_ih_l0.detach().cpu().numpy()
    tensors["lstm.recurrent"] = model.lstm.weight_hh_l0.detach().cpu().numpy()
    tensors["lstm.bias"] = (
        (model.lstm.bias_ih_l0 + model.lstm.bias_hh_l0).detach().cpu().numpy()
    )
    for i, deconv in enumerate(model.deconvs):
        k = 6 - i
        # ConvTranspose2d stores (in, out, 1, 3); the container wants (out, in, 1, 3)
        tensors[f"deconv{k}.kernel"] = (
            deconv.weight.detach().cpu().numpy().transpose(1, 0, 2, 3)
        )
        tensors[f"deconv{k}.bias"] = deconv.bias.detach().cpu().numpy()

    _check_export_shapes(tensors, model.input_planes)
    write_container(
        path,
        tensors,
        attrs={
            "format": "crn-weights",
            "input_planes": str(model.input_planes),
            "embedding_dim": str(EMBED_DIM),
        },
    )


def _check_export_shapes(tensors, input_planes):
    expected = {}
    in_ch = input_planes
    for k, out_ch in enumerate(ENCODER_CHANNELS, start=1):
        expected[f"conv{k}.kernel"] = (out_ch, in_ch, 1, 3)
        expected[f"conv{k}.bias"] = (out_ch,)
        in_ch = out_ch
    expected["lstm.input"] = (4 * LSTM_HIDDEN, BOTTLENECK + EMBED_DIM)
    expected["lstm.recurrent"] = (4 * LSTM_HIDDEN, LSTM_HIDDEN)
    expected["lstm.bias"] = (4 * LSTM_HIDDEN,)
    for k in range(6, 0, -1):
        skip_ch = ENCODER_CHANNELS[k - 1]
        out_ch = ENCODER_CHANNELS[k - 2] if k >= 2 else 1
        expected[f"deconv{k}.kernel"] = (out_ch, 2 * skip_ch, 1, 3)
        expected[f"deconv{k}.bias"] = (out_ch,)
    for name, shape in expected.items():
        if tuple(tensors[name].shape) != shape:
            raise ValueError(
                f"export refused: {name} has shape {tensors[name].shape}, expected {shape}"
            )


def load_into_model(model, tensors):
    """Copy container tensors into a SiftingNetwork (for tests/fine-tuning)."""
    with torch.no_grad():
        for k, conv in enumerate(model.convs, start=1):
            conv.weight.copy_(torch.from_numpy(tensors[f"conv{k}.kernel"]))
            conv.bias.copy_(torch.from_numpy(tensors[f"conv{k}.bias"]))
        model.lstm.weight_ih_l0.copy_(torch.from_numpy(tensors["lstm.input"]))
        model.lstm.weight_hh_l0.copy_(torch.from_numpy(tensors["lstm.recurrent"]))
        model.lstm.bias_ih_l0.copy_(torch.from_numpy(tensors["lstm.bias"]))
        model.lstm.bias_hh_l0.zero_()
        for i, deconv in enumerate(model.deconvs):
            k = 6 - i
            deconv.weight.copy_(
                torch.from_numpy(tensors[f"deconv{k}.kernel"].transpose(1, 0, 2, 3))
            )
            deconv.bias.copy_(torch.from_numpy(tensors[f"deconv{k}.bias"]))
    return model


def masked_magnitude_loss(mask, noisy_mag, clean_mag):
    """Mean squared error between the masked and the clean magnitudes."""
    return torch.mean((mask * noisy_mag - clean_mag) ** 2)
