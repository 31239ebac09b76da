"""Transmit pulses and synthetic RF channel data.

Walks through the signal chain before any beamforming: the Gaussian-modulated
transmit pulse and its spectrum, then the raw channel data recorded from a
three-scatterer phantom under a steered plane wave, with the predicted
two-way travel times overlaid on the channel traces.

Run:  python demos/01_pulse_and_rf_simulation.py
Figures land in demos/output/.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from beamforge import (
    AcquisitionSetup,
    ImagingGrid,
    Phantom,
    PulseSpec,
    compute_tof,
    make_linear_array,
    make_plane_wave_scheme,
    pulse_waveform,
    simulate_rf,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# ---------------------------------------------------------------------------
# the transmit pulse: 5 MHz center, 60% fractional bandwidth
# ---------------------------------------------------------------------------
pulse = PulseSpec(center_frequency=5e6, fractional_bandwidth=0.6, sampling_rate=40e6)
t = np.linspace(-4 * pulse.sigma_t, 4 * pulse.sigma_t, 400)
p = pulse_waveform(t, pulse)

spec = np.abs(np.fft.rfft(pulse_waveform(np.arange(-512, 512) / 40e6, pulse), n=4096))
freqs = np.fft.rfftfreq(4096, 1 / 40e6)

fig, ax = plt.subplots(1, 2, figsize=(9, 3.2))
ax[0].plot(t * 1e6, p)
ax[0].set(xlabel="time [us]", ylabel="amplitude", title="transmit pulse")
ax[1].plot(freqs / 1e6, 20 * np.log10(spec / spec.max() + 1e-12))
ax[1].axhline(-6, color="gray", ls=":")
ax[1].set(xlabel="frequency [MHz]", ylabel="dB", title="spectrum (-6 dB width = 0.6 f0)",
          xlim=(0, 12), ylim=(-50, 2))
fig.tight_layout()
fig.savefig(OUT / "01_pulse.png", dpi=130)
print(f"pulse: sigma_t = {pulse.sigma_t*1e9:.1f} ns, "
      f"~{pulse.num_cycles_equivalent:.1f} carrier cycles at -6 dB")

# ---------------------------------------------------------------------------
# RF channel data from three scatterers, 10-degree plane wave
# ---------------------------------------------------------------------------
array = make_linear_array(64, 154e-6)
setup = AcquisitionSetup(array, make_plane_wave_scheme([np.deg2rad(10)]),
                         PulseSpec(5e6, 0.6, 25e6))
phantom = Phantom(
    np.array([[0.015, -0.002], [0.022, 0.0], [0.028, 0.003]]),
    np.array([1.0, 0.7, 1.2]),
)
cube = simulate_rf(phantom, setup)
print(f"RF cube: events x channels x samples = {cube.shape}")

# overlay the two-way TOF predicted for each scatterer position
grid = ImagingGrid(phantom.positions[:, 0], phantom.positions[:, 1])
tof = compute_tof(setup, grid)

fig, ax = plt.subplots(figsize=(7, 4.5))
x = cube.samples[0]
ax.imshow(x.T, aspect="auto", cmap="gray",
          extent=(0, 63, cube.shape[2] / cube.sampling_rate * 1e6, 0))
colors = ("tab:red", "tab:cyan", "tab:orange")
for s in range(3):
    # diagonal of the TOF table = per-channel arrival for scatterer s
    ax.plot(np.arange(64), tof.tau[0, :, s, s] * 1e6, colors[s], lw=0.8,
            label=f"scatterer {s}")
ax.set(xlabel="channel", ylabel="fast time [us]",
       title="channel data with predicted arrivals")
ax.legend(loc="lower right", fontsize=8)
fig.tight_layout()
fig.savefig(OUT / "01_channel_data.png", dpi=130)
print(f"wrote {OUT/'01_pulse.png'} and {OUT/'01_channel_data.png'}")
