"""Coherent plane-wave compounding and sparse receive arrays.

Left: the lateral point response as more steered plane waves are coherently
compounded; sidelobes drop while the main lobe stays put. Right: the same
point imaged with the full half-wavelength array and with every second
receive channel dropped (pitch = wavelength), which raises grating-lobe
energy far off axis.

Run:  python demos/04_compounding_and_sparse_arrays.py
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from beamforge import (
    AcquisitionSetup,
    Phantom,
    PulseSpec,
    compound,
    compute_tof,
    das,
    envelope,
    log_compress,
    make_grid,
    make_linear_array,
    make_mask,
    make_plane_wave_scheme,
    make_synthetic_aperture_scheme,
    migrate,
    simulate_rf,
    split_events,
    window_weights,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

array = make_linear_array(128, 154e-6)
point = Phantom(np.array([[0.03, 0.0]]), np.array([1.0]))

# ---------------------------------------------------------------------------
# compounding: 1, 3, 5 steered plane waves
# ---------------------------------------------------------------------------
angles = np.deg2rad([-6.0, -3.0, 0.0, 3.0, 6.0])
setup = AcquisitionSetup(array, make_plane_wave_scheme(list(angles)),
                         PulseSpec(5e6, 0.6, 25e6))
cube = simulate_rf(point, setup)
grid = make_grid((0.027, 0.033), 121, (-0.008, 0.008), 321)
z = migrate(cube, compute_tof(setup, grid))
apod = window_weights("boxcar", array, grid)
per_event = [das(ze, apod) for ze in split_events(z)]

fig, ax = plt.subplots(1, 2, figsize=(11, 4))
for count, idx in ((1, [2]), (3, [1, 2, 3]), (5, [0, 1, 2, 3, 4])):
    img = compound([per_event[i] for i in idx], "coherent_sum")
    env = envelope(img)
    row = np.argmax(env.max(axis=1))
    prof = 20 * np.log10(env[row] / env[row].max() + 1e-12)
    ax[0].plot(grid.y_axis * 1e3, prof, label=f"{count} angle(s)")
ax[0].set(xlabel="lateral [mm]", ylabel="dB", ylim=(-70, 2),
          title="point response vs number of compounded angles")
ax[0].legend(fontsize=8)
ax[0].grid(alpha=0.3)

# ---------------------------------------------------------------------------
# sparse receive array: decimate the channels by two
# ---------------------------------------------------------------------------
setup_sa = AcquisitionSetup(array, make_synthetic_aperture_scheme([64]),
                            PulseSpec(5e6, 0.6, 25e6))
point2 = Phantom(np.array([[0.02, 0.0]]), np.array([1.0]))
cube2 = simulate_rf(point2, setup_sa)
gridw = make_grid((0.014, 0.026), 121, (-0.03, 0.03), 301)
tof2 = compute_tof(setup_sa, gridw)
apod2 = window_weights("boxcar", array, gridw)
for label, mask in (("full array (pitch = lambda/2)", None),
                    ("1-in-2 channels (pitch = lambda)",
                     make_mask("uniform_decimate", 128, 1, k=2))):
    zz = migrate(cube2, tof2, mask=mask)
    env = envelope(das(zz, apod2))
    row = np.argmax(env.max(axis=1))
    prof = 20 * np.log10(env[row] / env.max() + 1e-12)
    ax[1].plot(gridw.y_axis * 1e3, prof, label=label)
ax[1].set(xlabel="lateral [mm]", ylabel="dB", ylim=(-70, 2),
          title="grating-lobe growth with a sparse receive array")
ax[1].legend(fontsize=8)
ax[1].grid(alpha=0.3)

fig.tight_layout()
fig.savefig(OUT / "04_compounding_sparse.png", dpi=130)
print(f"wrote {OUT/'04_compounding_sparse.png'}")
