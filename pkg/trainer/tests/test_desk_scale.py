"""Desk-scale learning signal, end to end through the public interfaces.

Simulates ~500 training clips with the inference package's CLI, exports
G-LSTSC features, enrolls speakers with this package's encoder, trains
the sifting network, then enhances a held-out set at 0 dB with the
inference CLI and checks that the learned mask beats the noisy baseline
on intelligibility. No claim on absolute scores. Takes on the order of
ten minutes on a laptop-class CPU.
"""

import json
import subprocess
import sys

import pytest


def run(*argv):
    proc = subprocess.run(
        [sys.executable, "-m", *argv], capture_output=True, text=True, timeout=1800
    )
    assert proc.returncode == 0, f"{argv} failed:\n{proc.stdout}\n{proc.stderr}"
    return proc.stdout


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    synth = pytest.importorskip("spatialsift.synth")
    root = tmp_path_factory.mktemp("corpus")
    synth.make_corpus(root / "speech", num_speakers=3, utterances_per_speaker=3,
                      seconds=6.0, seed=31)
    synth.make_corpus(root / "tv", num_speakers=2, utterances_per_speaker=2,
                      seconds=7.0, seed=32, interference=True)
    return root


def test_trained_mask_beats_noisy_stoi(corpus, tmp_path):
    train_ds = tmp_path / "train"
    heldout_ds = tmp_path / "heldout"
    run("spatialsift.cli", "simulate",
        "--target-dir", str(corpus / "speech"), "--interference-dir", str(corpus / "tv"),
        "--out", str(train_ds), "--snr", "0,5", "--clips", "500",
        "--seconds", "2.5", "--seed", "100")
    run("spatialsift.cli", "simulate",
        "--target-dir", str(corpus / "speech"), "--interference-dir", str(corpus / "tv"),
        "--out", str(heldout_ds), "--snr", "0", "--clips", "24",
        "--seconds", "4.0", "--seed", "999")

    enroll_dir = tmp_path / "enroll"
    run("sifttrainer.cli", "enroll",
        "--corpus", str(corpus / "speech"), "--out", str(enroll_dir), "--seed", "5")

    run("spatialsift.cli", "features", "--dataset", str(train_ds),
        "--feature", "g-lstsc", "--embeddings", str(enroll_dir))

    weights = tmp_path / "crn.tnsr"
    out = run("sifttrainer.cli", "train-crn",
              "--features", str(train_ds / "features" / "g-lstsc"),
              "--export", str(weights), "--epochs", "8", "--seed", "3")
    losses = [float(line.rsplit()[-1]) for line in out.splitlines() if "loss" in line]
    assert losses[-1] < losses[0], f"training loss did not decrease: {losses}"

    enhanced = tmp_path / "enhanced"
    run("spatialsift.cli", "enhance", "--dataset", str(heldout_ds),
        "--out", str(enhanced), "--mode", "network", "--feature", "g-lstsc",
        "--weights", str(weights), "--embedding-dir", str(enroll_dir))
    report_dir = tmp_path / "report"
    run("spatialsift.cli", "eval", "--dataset", str(heldout_ds),
        "--enhanced", str(enhanced), "--out", str(report_dir))

    report = json.loads((report_dir / "report.json").read_text())
    rows = {row["feature_kind"]: row for row in report["aggregate"]}
    enhanced_stoi = rows["g-lstsc"]["stoi"]
    noisy_stoi = rows["noisy"]["stoi"]
    print(f"\nheld-out at 0 dB: enhanced stoi {enhanced_stoi:.3f}, noisy {noisy_stoi:.3f}")
    assert enhanced_stoi > noisy_stoi
