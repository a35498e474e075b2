"""Room simulation sanity tour: impulse responses, decay times, and
interchannel delays of the image-source model."""

import numpy as np

from spatialsift import WaveBuffer, uca, ula, place_scene, simulate_rir, estimate_t60
from spatialsift.room import schroeder_decay_db, reflection_coefficient

fs = 16000
spacer = "_" * 60

print("reflection coefficient for the 4 x 4 x 3 room:")
for t60 in (0.15, 0.2, 0.3, 0.5):
    print(f"  T60 {t60} s -> beta {reflection_coefficient((4, 4, 3), t60):.3f}")

print(spacer)
print("\nRIRs for a talker at 1 m and an interferer at 1.5 m (T60 = 0.2 s)")
scene = place_scene(70, 250, uca(0.035, 4), t60=0.2)
rirs = simulate_rir(scene, fs=fs)
for s, name in enumerate(("talker", "interferer")):
    h = rirs[s].taps[0]
    measured = estimate_t60(h, fs)
    peak = np.argmax(np.abs(h))
    print(f"  {name}: {h.size} taps, direct path at {peak / fs * 1000:.2f} ms, "
          f"Schroeder T60 {measured * 1000:.0f} ms")

edc = schroeder_decay_db(rirs[0].taps[0])
marks = [np.argmax(edc <= db) / fs * 1000 for db in (-10, -20, -30)]
print(f"  energy decay reaches -10/-20/-30 dB at {marks[0]:.0f}/{marks[1]:.0f}/{marks[2]:.0f} ms")

print(spacer)
print("\nInterchannel delay for a linear array, anechoic")
scene = place_scene(30, 300, ula(0.02, 4), t60=0.0)
taps = simulate_rir(scene, fs=fs)[0].taps
mics = scene.mic_positions()
src = scene.source_positions[0]
for m in range(4):
    geometric = np.linalg.norm(src - mics[m]) * fs / 343.0
    peak = np.argmax(np.abs(taps[m]))
    print(f"  mic {m}: geometric {geometric:7.3f} samples, peak at {peak}")
print("fractional delays are realized with an 81-tap windowed sinc, so the")
print("interchannel phase is accurate to a small fraction of a sample")
