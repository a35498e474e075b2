"""Command-line interface: simulate, features, enhance, eval, info.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

import argparse
import sys

from . import __version__
from .stft import StftConfig
from .room import parse_geometry
from .harness import (
    ConfigError,
    DataError,
    ExperimentConfig,
    cmd_simulate,
    cmd_features,
    cmd_enhance,
    cmd_eval,
    ENHANCE_MODES,
)
from .spatial import FEATURE_KINDS

ANGLE_HELP = (
    "Angle convention: 0 degrees along +x from the array center, counterclockwise "
    "in the horizontal plane. Targets are drawn on the 0..180 degree semicircle at "
    "1 m, interferers on 180..360 at 1.5 m."
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spatialsift",
        description="Multichannel personal speech enhancement toolkit",
    )
    parser.add_argument("--version", action="version", version=f"spatialsift {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="synthesize a reverberant two-source dataset",
                         epilog=ANGLE_HELP)
    sim.add_argument("--config", help="JSON file with ExperimentConfig fields")
    sim.add_argument("--target-dir", help="directory of target-speaker WAVs")
    sim.add_argument("--interference-dir", help="directory of interference WAVs")
    sim.add_argument("--out", help="dataset output directory")
    sim.add_argument("--geometry", help="array spec, e.g. uca:0.035:4 or ula:0.02:4")
    sim.add_argument("--snr", help="comma-separated SNR list in dB, e.g. 0,5,10,15")
    sim.add_argument("--clips", type=int, help="number of clips")
    sim.add_argument("--seconds", type=float, help="clip length in seconds")
    sim.add_argument("--seed", type=int, help="RNG seed")
    sim.add_argument("--t60", type=float, help="reverberation time in seconds")

    feat = sub.add_parser("features", help="export per-clip feature containers")
    feat.add_argument("--dataset", required=True)
    feat.add_argument("--feature", default="g-lstsc", choices=FEATURE_KINDS)
    feat.add_argument("--embeddings", help="directory of <speaker>.dvec files")
    feat.add_argument("--out", help="override the output directory")

    enh = sub.add_parser("enhance", help="enhance every clip of a dataset")
    enh.add_argument("--dataset", required=True)
    enh.add_argument("--out", required=True)
    enh.add_argument("--mode", default="oracle", choices=ENHANCE_MODES)
    enh.add_argument("--feature", default="g-lstsc", choices=FEATURE_KINDS)
    enh.add_argument("--weights", help="weight container (network mode)")
    enh.add_argument("--embedding", help="single enrollment embedding file")
    enh.add_argument("--embedding-dir", help="directory of <speaker>.dvec files")

    ev = sub.add_parser("eval", help="score an enhanced directory and write a report")
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--enhanced", required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--plot", action="store_true", help="emit coherence-plane PNGs")
    ev.add_argument("--pesq-bin", help="external ITU-T PESQ binary (optional)")

    info = sub.add_parser("info", help="print version and configuration summary")
    info.add_argument("--config", help="validate and echo a config file")
    info.add_argument("--geometry", help="parse and describe a geometry spec")
    return parser


def _simulate_config(args):
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
    else:
        cfg = None
    overrides = {
        "target_dir": args.target_dir,
        "interference_dir": args.interference_dir,
        "output_dir": args.out,
        "geometry": args.geometry,
        "num_clips": args.clips,
        "clip_seconds": args.seconds,
        "seed": args.seed,
        "t60": args.t60,
    }
    if args.snr:
        overrides["snr_db"] = tuple(float(s) for s in args.snr.split(","))
    data = {k: v for k, v in overrides.items() if v is not None}
    if cfg is None:
        missing = [k for k in ("target_dir", "interference_dir", "output_dir") if k not in data]
        if missing:
            raise ConfigError(f"simulate needs --config or flags for: {missing}")
        return ExperimentConfig.from_dict(data)
    from dataclasses import asdict

    merged = asdict(cfg)
    merged.update(data)
    return ExperimentConfig.from_dict(merged)


def run(args):
    if args.command == "simulate":
        cfg = _simulate_config(args)
        manifest = cmd_simulate(cfg)
        print(f"wrote {len(manifest['clips'])} clips to {cfg.output_dir}")
    elif args.command == "features":
        out = cmd_features(
            args.dataset, feature_kind=args.feature, embedding_dir=args.embeddings,
            out_dir=args.out,
        )
        print(f"wrote feature containers to {out}")
    elif args.command == "enhance":
        manifest = cmd_enhance(
            args.dataset,
            args.out,
            mode=args.mode,
            feature_kind=args.feature,
            weights_path=args.weights,
            embedding_path=args.embedding,
            embedding_dir=args.embedding_dir,
        )
        print(f"enhanced {len(manifest['clips'])} clips ({manifest['feature_kind']}) to {args.out}")
    elif args.command == "eval":
        report = cmd_eval(
            args.dataset, args.enhanced, args.out, plot=args.plot, pesq_bin=args.pesq_bin
        )
        for row in report.aggregate():
            pesq = f"  pesq={row['pesq']:.2f}" if "pesq" in row else ""
            print(
                f"{row['geometry']}  {row['feature_kind']:>10}  snr={row['snr_db']:>5.1f} dB  "
                f"stoi={row['stoi']:.3f}  si_sdr={row['si_sdr_db']:+.2f} dB{pesq}"
            )
        print(f"report written to {args.out}")
    elif args.command == "info":
        print(f"spatialsift {__version__}")
        print(f"STFT defaults: {StftConfig()}")
        print(ANGLE_HELP)
        if args.geometry:
            geo = parse_geometry(args.geometry)
            print(f"geometry {args.geometry}: kind={geo.kind} mics={geo.num_mics}")
            for i, pos in enumerate(geo.mic_offsets):
                print(f"  mic {i}: offset ({pos[0]:+.4f}, {pos[1]:+.4f}, {pos[2]:+.4f}) m")
        if args.config:
            cfg = ExperimentConfig.from_json(args.config)
            print(f"config OK: {cfg}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError, ValueError) as exc:
        # library-level ValueErrors at this point mean bad data on disk
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
