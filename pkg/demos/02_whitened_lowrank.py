"""Activation-aware factorization vs plain SVD, and the outlier-driven variant.

A rank-r fit that minimizes ||(W - LR) X||_F instead of ||W - LR||_F spends
its capacity where the calibration activations have energy. With outlier
channels planted in X, the difference is dramatic: the whitened fit all but
eliminates the error that flows through the hot channels.
"""

import numpy as np

from qlr import (
    act_fro_norm2,
    lr_approx,
    odlri_init,
    select_outlier_channels,
    synth_instance,
    truncated_svd,
)

inst = synth_instance(m=64, n=64, d=256, outliers=4, gain=10.0, seed=0)
w, h, x = inst.w, inst.h, inst.x
rank = 8
wx2 = act_fro_norm2(w, h)

print(f"planted outlier channels: {inst.outliers.tolist()}")
print(f"they carry {h.diag_energy[inst.outliers].sum() / h.diag_energy.sum():.1%} "
      "of the total activation energy\n")

print(f"=== rank-{rank} fits of a {w.shape[0]}x{w.shape[1]} matrix ===")
# plain SVD ignores the activations
triple = truncated_svd(w, rank)
plain = triple.u @ np.diag(triple.sigma) @ triple.v.T
# the whitened fit minimizes the activation-weighted error exactly
pair = lr_approx(w, h, rank)
for name, approx in (("plain SVD", plain), ("whitened fit", pair.product())):
    raw = np.linalg.norm(w - approx, "fro") ** 2 / np.linalg.norm(w, "fro") ** 2
    act = act_fro_norm2(w - approx, h) / wx2
    print(f"{name:13s} raw error {raw:.3f}   activation-weighted error {act:.4f}")
print("the whitened fit trades a little raw accuracy for a ~10x better")
print("activation-weighted fit: it prioritizes the hot channels.\n")

print("=== outlier-driven initialization pins the hot channels exactly ===")
k = 4
init = odlri_init(w, h, rank, k)
idx = select_outlier_channels(h, k)
resid = w - init.product()
print(f"selected channels (top-{k} by Hessian diagonal): {idx.tolist()}")
print(f"residual on selected columns:  {np.abs(resid[:, idx]).max():.2e} (exact by construction)")
print(f"residual elsewhere:            {np.abs(resid).max():.2f} (untouched)")
x_o = np.zeros_like(x)
x_o[idx] = x[idx]
ratio_od = np.linalg.norm(resid @ x_o, "fro") / np.linalg.norm(w @ x_o, "fro")
ratio_lr = np.linalg.norm((w - pair.product()) @ x_o, "fro") / np.linalg.norm(w @ x_o, "fro")
print(f"\nerror through the hot channels, relative to the signal there:")
print(f"  outlier-driven init (whitens only H[I, I]): {ratio_od:.2e}")
print(f"  full whitened fit  (whitens all of H):      {ratio_lr:.2e}")
print("restricting the whitening to the selected block makes the hot-channel")
print("reconstruction exact instead of merely good.")
