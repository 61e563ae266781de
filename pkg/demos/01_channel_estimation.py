"""Pilot-based channel estimation: LS, LMMSE and the learned denoiser.

Run: python3 demos/01_channel_estimation.py
"""

import numpy as np

from litesc import csi
from litesc.channel import channel_stats

KIND, N_ANT = "rayleigh", 2

# LS estimates plus the ground truth, drawn between 0 and 10 dB, train the denoiser
pairs = csi.make_pairs(KIND, N_ANT, 20_000, (0.0, 10.0), np.random.default_rng(0))
model = csi.train_denoiser(pairs, (0.0, 10.0), kind=KIND, epochs=6)
stats = channel_stats(KIND)

print(f"{'SNR':>5} {'LS':>8} {'LMMSE':>8} {'refined':>8}")
for snr in (0, 3, 6, 9, 12, 15, 18):
    rough, H, s2 = csi.make_pairs(KIND, N_ANT, 5000, (snr, snr), np.random.default_rng(100 + snr))
    ls = csi.channel_mse(rough, H)
    lm = csi.channel_mse(csi.lmmse_estimate(rough, stats, s2[0]), H)
    ref = csi.channel_mse(csi.refine(model, rough, s2), H)
    print(f"{snr:5d} {ls:8.4f} {lm:8.4f} {ref:8.4f}")

# LMMSE knows the true prior, so it is the floor here; the denoiser learns to
# sit just above it without being told the statistics.
