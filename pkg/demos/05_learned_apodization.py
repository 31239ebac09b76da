"""Training the per-pixel adaptive weight network.

Builds a supervised dataset from one simulated acquisition: the inputs are
the TOF-aligned 16-channel vectors of every pixel, the targets the MVDR
values for the same pixels. A small antirectifier network is trained with
the signed log-domain loss plus a unit-gain penalty, then compared against
DAS and its MVDR teacher, including the per-pixel operation counts.

Run:  python demos/05_learned_apodization.py
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from beamforge import (
    AcquisitionSetup,
    LossSpec,
    PixelDataset,
    PulseSpec,
    WeightNetwork,
    compute_tof,
    envelope,
    flop_ledger,
    log_compress,
    make_grid,
    make_linear_array,
    make_plane_wave_scheme,
    make_speckle_phantom,
    migrate,
    mvdr_images,
    simulate_rf,
    train,
)
from beamforge.neural import forward

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

C = 16
array = make_linear_array(C, 154e-6)
setup = AcquisitionSetup(array, make_plane_wave_scheme([0.0]),
                         PulseSpec(5e6, 0.6, 25e6))
phantom = make_speckle_phantom(400, (0.010, 0.030), (-0.006, 0.006), seed=9)
cube = simulate_rf(phantom, setup, noise_snr_db=25, seed=2)
grid = make_grid((0.012, 0.028), 72, (-0.005, 0.005), 72)
z = migrate(cube, compute_tof(setup, grid))

targets = mvdr_images(z, subarray_length=8)[0].y
inputs = z.z[0].reshape(C, -1).T
dataset = PixelDataset(inputs, targets.reshape(-1), image_shape=grid.shape)
print(f"dataset: {len(dataset)} pixels x {C} channels, MVDR targets")

net = WeightNetwork((C, 32, 16, 32, C), seed=0)
spec = LossSpec("smsle", distortionless_weight=0.1,
                eps_log=1e-2 * float(np.abs(targets).max()))
run = train(net, dataset, spec, epochs=60, batch_size=128, step_size=1e-3, seed=0)
print(f"loss: {run.initial_loss:.3f} -> {run.loss_history[-1]:.3f} "
      f"({len(run.loss_history)} epochs, {net.num_params} parameters)")

_, y_net = forward(net, inputs)
y_das = inputs.mean(axis=1)
flat_t = targets.reshape(-1)
print(f"MSE to MVDR targets: network {np.mean((y_net-flat_t)**2):.4f}  "
      f"DAS {np.mean((y_das-flat_t)**2):.4f}")

for name, ledger in (("mvdr", flop_ledger("mvdr", C, subarray_length=8)),
                     ("network", flop_ledger("network", C,
                                             layer_dims=(C, 32, 16, 32, C)))):
    per_px = ledger["flop"]
    print(f"per-pixel flops [{name:7s}]: {per_px}")

fig = plt.figure(figsize=(11, 7))
gs = fig.add_gridspec(2, 3)
axl = fig.add_subplot(gs[0, :])
axl.semilogy(range(len(run.loss_history)), run.loss_history)
axl.set(xlabel="epoch", ylabel="objective", title="training loss")
axl.grid(alpha=0.3)

extent = (grid.y_axis[0] * 1e3, grid.y_axis[-1] * 1e3,
          grid.x_axis[-1] * 1e3, grid.x_axis[0] * 1e3)
for i, (title, img) in enumerate((("DAS", y_das), ("network", y_net),
                                  ("MVDR targets", flat_t))):
    ax = fig.add_subplot(gs[1, i])
    bm = log_compress(envelope(img.reshape(grid.shape)), 50.0)
    ax.imshow(bm.db, cmap="gray", vmin=-50, vmax=0, extent=extent, aspect="equal")
    ax.set(title=title, xlabel="lateral [mm]")
    if i == 0:
        ax.set_ylabel("depth [mm]")
fig.tight_layout()
fig.savefig(OUT / "05_learned_apodization.png", dpi=130)
print(f"wrote {OUT/'05_learned_apodization.png'}")
