"""Single-clip overfit: the optimizer must drive a realizable masking
target essentially to zero within the step budget."""

import numpy as np

from sifttrainer.training import overfit_single_clip


def test_single_clip_overfits_below_tolerance():
    rng = np.random.default_rng(0)
    frames = 40
    planes = np.abs(rng.standard_normal((2, frames, 257))).astype(np.float32)
    noisy = planes[0]
    # smooth target mask in (0.1, 0.9): realizable by the sigmoid output
    base = rng.uniform(0.1, 0.9, (1, 257))
    ripple = 0.05 * np.sin(np.linspace(0, 6.28, frames))[:, np.newaxis]
    true_mask = np.clip(base + ripple, 0.1, 0.9).astype(np.float32)
    clean = (true_mask * noisy).astype(np.float32)
    dvector = rng.standard_normal(256).astype(np.float32)
    dvector /= np.linalg.norm(dvector)

    steps, loss = overfit_single_clip(planes, noisy, clean, dvector, max_steps=2000)
    assert loss < 1e-3, f"loss {loss:.2e} after {steps} steps"
    print(f"\noverfit reached {loss:.2e} in {steps} steps")
