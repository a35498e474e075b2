"""Trainer command line: train-crn, train-encoder, enroll."""

import argparse
import sys
from pathlib import Path

import numpy as np
import torch

from .encoder import SpeakerEncoder, export_encoder, export_dvector
from .training import train_crn, train_encoder


def _read_wav(path):
    from scipy.io import wavfile

    rate, data = wavfile.read(str(path))
    if data.ndim > 1:
        data = data[:, 0]
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        data = data.astype(np.float64) / 2147483648.0
    return data.astype(np.float64), rate


def build_parser():
    parser = argparse.ArgumentParser(prog="sift-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    crn = sub.add_parser("train-crn", help="fit the sifting network on exported features")
    crn.add_argument("--features", required=True, help="directory of per-clip .tnsr exports")
    crn.add_argument("--export", required=True, help="output weight container")
    crn.add_argument("--epochs", type=int, default=12)
    crn.add_argument("--batch-size", type=int, default=8)
    crn.add_argument("--lr", type=float, default=3e-4)
    crn.add_argument("--seed", type=int, default=0)

    enc = sub.add_parser("train-encoder", help="GE2E-train the speaker encoder on a WAV corpus")
    enc.add_argument("--corpus", required=True, help="speaker subdirectories of WAVs")
    enc.add_argument("--export", required=True, help="output encoder container")
    enc.add_argument("--steps", type=int, default=200)
    enc.add_argument("--seed", type=int, default=0)

    enroll = sub.add_parser("enroll", help="export enrollment embeddings per speaker")
    enroll.add_argument("--corpus", required=True, help="speaker subdirectories of WAVs")
    enroll.add_argument("--out", required=True, help="directory for <speaker>.dvec files")
    enroll.add_argument("--encoder", help="encoder container (random init if omitted)")
    enroll.add_argument("--seed", type=int, default=0)
    return parser


def _load_corpus(root):
    root = Path(root)
    corpus = {}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        wavs = sorted(sub.glob("*.wav"))
        if wavs:
            corpus[sub.name] = [_read_wav(w)[0] for w in wavs]
    if not corpus:
        raise FileNotFoundError(f"no speaker subdirectories with WAVs under {root}")
    return corpus


def _make_encoder(container_path, seed):
    encoder = SpeakerEncoder()
    if container_path:
        from .container import read_container

        tensors, _ = read_container(container_path)
        with torch.no_grad():
            for k in range(3):
                getattr(encoder.lstm, f"weight_ih_l{k}").copy_(
                    torch.from_numpy(tensors[f"lstm{k + 1}.input"])
                )
                getattr(encoder.lstm, f"weight_hh_l{k}").copy_(
                    torch.from_numpy(tensors[f"lstm{k + 1}.recurrent"])
                )
                getattr(encoder.lstm, f"bias_ih_l{k}").copy_(
                    torch.from_numpy(tensors[f"lstm{k + 1}.bias"])
                )
                getattr(encoder.lstm, f"bias_hh_l{k}").zero_()
            encoder.projection.weight.copy_(torch.from_numpy(tensors["projection.kernel"]))
            encoder.projection.bias.copy_(torch.from_numpy(tensors["projection.bias"]))
    else:
        torch.manual_seed(seed)
        for p in encoder.parameters():
            torch.nn.init.normal_(p, std=0.08)
    return encoder


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "train-crn":
        train_crn(
            args.features,
            args.export,
            epochs=args.epochs,
            batch_size=args.batch_size,
            learning_rate=args.lr,
            seed=args.seed,
        )
    elif args.command == "train-encoder":
        corpus = _load_corpus(args.corpus)
        encoder = train_encoder(corpus, steps=args.steps, seed=args.seed)
        export_encoder(encoder, args.export)
        print(f"exported encoder to {args.export}")
    elif args.command == "enroll":
        corpus = _load_corpus(args.corpus)
        encoder = _make_encoder(args.encoder, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for speaker, utterances in corpus.items():
            export_dvector(encoder, utterances, out / f"{speaker}.dvec", speaker)
            print(f"enrolled {speaker}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
