"""Synthetic RF channel data from point-scatterer phantoms.

Single-scattering ray acoustics: every transmit event is modeled as a
superposition of spherical wavelets launched by the firing elements at
their per-event firing delays, and each scatterer re-radiates the incident
field back to every receive element. The recorded channel signal is

    x[e, c, t] = sum_s a_s sum_f p(t - t_fire(e, f) - |r_f - r_s|/v - |r_c - r_s|/v)

with ``p`` the transmitted pulse. Synthesis is carried out in the frequency
domain (band-limited pulse, exact phase delays), which keeps wavelet
placement exact at fractional sample positions and is linear in the
scatterer amplitudes by construction.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    AcquisitionSetup,
    DivergingWaveEvent,
    FocusedEvent,
    Phantom,
    PlaneWaveEvent,
    SyntheticApertureEvent,
)

__all__ = [
    "RfDataCube",
    "pulse_waveform",
    "pulse_spectrum",
    "firing_delays",
    "transmit_delay",
    "required_samples",
    "simulate_rf",
]

# scatterer chunk size for the frequency-domain synthesis (memory bound)
_CHUNK = 64


@dataclass(frozen=True)
class RfDataCube:
    """Raw channel data: ``samples`` with shape (E, C, Nt), fast time last.

    ``t0`` is the time of the first sample relative to the start of each
    transmit event.
    """

    samples: np.ndarray
    sampling_rate: float
    t0: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 3:
            raise ValueError(f"samples must be (E, C, Nt), got shape {s.shape}")
        if s.shape[2] < 1:
            raise ValueError("need at least one fast-time sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("RF samples must be finite")
        if not self.sampling_rate > 0:
            raise ValueError("sampling_rate must be positive")
        object.__setattr__(self, "samples", s)

    @property
    def shape(self):
        return self.samples.shape

    def times(self):
        """(Nt,) fast-time axis in seconds."""
        return self.t0 + np.arange(self.samples.shape[2]) / self.sampling_rate


def pulse_waveform(t, spec):
    """Transmitted pulse sampled at times ``t`` (seconds).

    A Gaussian-modulated cosine ``cos(2 pi f0 t) * exp(-t^2 / (2 sigma^2))``
    whose -6 dB spectral width equals ``fractional_bandwidth * f0``.
    Peaks at exactly 1.0 for t = 0.
    """
    t = np.asarray(t, dtype=float)
    s = spec.sigma_t
    return np.cos(2.0 * math.pi * spec.center_frequency * t) * np.exp(-(t**2) / (2.0 * s**2))


def pulse_spectrum(f, spec):
    """Continuous Fourier transform of :func:`pulse_waveform` at frequencies ``f``."""
    f = np.asarray(f, dtype=float)
    s = spec.sigma_t
    g = s * math.sqrt(2.0 * math.pi) / 2.0
    f0 = spec.center_frequency
    return g * (
        np.exp(-2.0 * (math.pi * s * (f - f0)) ** 2)
        + np.exp(-2.0 * (math.pi * s * (f + f0)) ** 2)
    )


def firing_delays(event, geometry, medium):
    """Per-element firing delays realizing a transmit event.

    Returns ``(delays, active)``: a (C,) array of delays in seconds
    (min-normalized to 0 over the active elements) and a (C,) boolean mask
    of the elements that fire. Inactive elements carry NaN.
    """
    y = geometry.lateral_positions
    C = geometry.num_elements
    v = medium.speed_of_sound
    active = np.ones(C, dtype=bool)

    if isinstance(event, PlaneWaveEvent):
        raw = y * math.sin(event.angle) / v
    elif isinstance(event, SyntheticApertureEvent):
        active = np.zeros(C, dtype=bool)
        active[event.element_index] = True
        raw = np.zeros(C)
    elif isinstance(event, FocusedEvent):
        lo = event.center_index - event.half_width
        hi = event.center_index + event.half_width
        active = np.zeros(C, dtype=bool)
        active[lo : hi + 1] = True
        focus = np.array([event.focal_depth, y[event.center_index]])
        center = geometry.element_positions[event.center_index]
        d_focus = np.linalg.norm(focus - geometry.element_positions, axis=1)
        raw = (np.linalg.norm(focus - center) - d_focus) / v
    elif isinstance(event, DivergingWaveEvent):
        raw = np.linalg.norm(geometry.element_positions - event.virtual_source, axis=1) / v
    else:
        raise ValueError(f"unknown transmit event {event!r}")

    delays = np.full(C, np.nan)
    delays[active] = raw[active] - raw[active].min()
    return delays, active


def transmit_delay(event, element_index, setup):
    """Firing delay of one element for one event, in seconds.

    Returns NaN (the "not fired" marker) for elements outside a focused
    subaperture or non-firing elements of a synthetic-aperture event.
    """
    delays, active = firing_delays(event, setup.geometry, setup.medium)
    if not active[element_index]:
        return math.nan
    return float(delays[element_index])


def transmit_distance(event, geometry, medium, points):
    """One-way transmit path length (meters) from wavefront launch to ``points``.

    This is the arrival time (times v) of the transmitted wavefront at each
    point, in the event clock defined by the min-normalized firing delays of
    :func:`firing_delays`:

    * plane wave: ``x cos(theta) + y sin(theta)`` minus the lateral offset of
      the first-firing element,
    * synthetic aperture: distance from the firing element,
    * focused: distance from the subaperture center, shifted so the focal
      point is reached at the coherent (first-firing-element) arrival time,
    * diverging: distance from the virtual source minus the source-to-array
      standoff.
    """
    points = np.asarray(points, dtype=float)
    x = points[..., 0]
    yl = points[..., 1]
    y = geometry.lateral_positions

    if isinstance(event, PlaneWaveEvent):
        th = event.angle
        return x * math.cos(th) + yl * math.sin(th) - np.min(y * math.sin(th))
    if isinstance(event, SyntheticApertureEvent):
        src = geometry.element_positions[event.element_index]
        return np.linalg.norm(points - src, axis=-1)
    if isinstance(event, FocusedEvent):
        lo = event.center_index - event.half_width
        hi = event.center_index + event.half_width
        focus = np.array([event.focal_depth, y[event.center_index]])
        center = geometry.element_positions[event.center_index]
        d_focus = np.linalg.norm(focus - geometry.element_positions[lo : hi + 1], axis=1)
        shift = d_focus.max() - np.linalg.norm(focus - center)
        return np.linalg.norm(points - center, axis=-1) + shift
    if isinstance(event, DivergingWaveEvent):
        standoff = np.linalg.norm(geometry.element_positions - event.virtual_source, axis=1).min()
        return np.linalg.norm(points - event.virtual_source, axis=-1) - standoff
    raise ValueError(f"unknown transmit event {event!r}")


def required_samples(phantom, setup, t0=0.0):
    """Fast-time samples needed to cover the latest echo plus pulse support."""
    if phantom.num_scatterers == 0:
        return 16
    v = setup.medium.speed_of_sound
    fs = setup.pulse.sampling_rate
    t_max = 0.0
    rx = setup.geometry.element_positions
    for event in setup.scheme.events:
        delays, active = firing_delays(event, setup.geometry, setup.medium)
        fire_pos = rx[active]
        d_tx = np.linalg.norm(
            fire_pos[:, None, :] - phantom.positions[None, :, :], axis=-1
        )
        t_tx = (delays[active][:, None] + d_tx / v).max()
        d_rx = np.linalg.norm(rx[:, None, :] - phantom.positions[None, :, :], axis=-1)
        t_max = max(t_max, t_tx + d_rx.max() / v)
    t_max += 8.0 * setup.pulse.sigma_t
    return int(math.ceil((t_max - t0) * fs)) + 1


def _synthesize_event(event, setup, phantom, n_t, t0, spreading_loss):
    """Band-limited synthesis of one event's (C, Nt) channel block."""
    geometry, medium, pulse = setup.geometry, setup.medium, setup.pulse
    v = medium.speed_of_sound
    fs = pulse.sampling_rate
    C = geometry.num_elements

    delays, active = firing_delays(event, geometry, medium)
    fire_pos = geometry.element_positions[active]
    fire_delays = delays[active]
    rx_pos = geometry.element_positions
    scat = phantom.positions
    amp = phantom.amplitudes

    freqs = np.fft.rfftfreq(n_t, 1.0 / fs)
    p_hat = pulse_spectrum(freqs, pulse)
    keep = p_hat > p_hat.max() * 1e-16
    f_k = freqs[keep]

    spectrum = np.zeros((C, f_k.size), dtype=complex)
    for s0 in range(0, scat.shape[0], _CHUNK):
        sl = slice(s0, min(s0 + _CHUNK, scat.shape[0]))
        pos = scat[sl]

        d_tx = np.linalg.norm(fire_pos[:, None, :] - pos[None, :, :], axis=-1)
        tau_tx = fire_delays[:, None] + d_tx / v
        phase_tx = np.exp(-2j * math.pi * tau_tx[:, :, None] * f_k[None, None, :])
        if spreading_loss:
            phase_tx *= (1.0 / np.maximum(d_tx, 1e-6))[:, :, None]
        # incident field spectrum at each scatterer: (S, K)
        g = phase_tx.sum(axis=0) * amp[sl][:, None]

        d_rx = np.linalg.norm(rx_pos[:, None, :] - pos[None, :, :], axis=-1)
        phase_rx = np.exp(-2j * math.pi * (d_rx / v)[:, :, None] * f_k[None, None, :])
        if spreading_loss:
            phase_rx *= (1.0 / np.maximum(d_rx, 1e-6))[:, :, None]
        spectrum += np.einsum("csk,sk->ck", phase_rx, g)

    coeff = np.zeros((C, freqs.size), dtype=complex)
    coeff[:, keep] = spectrum * (p_hat[keep] * np.exp(2j * math.pi * f_k * t0))[None, :]
    return np.fft.irfft(coeff * fs, n=n_t, axis=1)


def simulate_rf(phantom, setup, num_samples=None, t0=0.0, noise_snr_db=None, seed=0,
                spreading_loss=False):
    """Simulate the received RF data cube for a phantom and acquisition setup.

    Args:
        phantom: point-scatterer scene. An empty phantom yields a zero cube.
        setup: :class:`AcquisitionSetup`.
        num_samples: fast-time length Nt. Default: auto-sized to the latest
            echo arrival plus 8 pulse standard deviations.
        t0: time of the first recorded sample (seconds).
        noise_snr_db: if set, add white Gaussian noise at this SNR in dB
            relative to the peak RF amplitude.
        seed: noise RNG seed; the output is deterministic given the seed.
        spreading_loss: apply a 1/d spherical spreading factor on both legs
            (off by default).

    Returns:
        RfDataCube of shape (E, C, Nt).
    """
    if not isinstance(phantom, Phantom):
        raise ValueError("phantom must be a Phantom")
    if not isinstance(setup, AcquisitionSetup):
        raise ValueError("setup must be an AcquisitionSetup")

    n_min = required_samples(phantom, setup, t0)
    if num_samples is None:
        num_samples = n_min
    elif phantom.num_scatterers and num_samples < n_min:
        raise ValueError(
            f"num_samples={num_samples} too small to record all echoes; need at least {n_min}"
        )

    E = setup.num_events
    C = setup.num_channels
    if phantom.num_scatterers == 0:
        cube = np.zeros((E, C, num_samples))
    else:
        cube = np.stack(
            [
                _synthesize_event(ev, setup, phantom, num_samples, t0, spreading_loss)
                for ev in setup.scheme.events
            ]
        )

    if noise_snr_db is not None:
        peak = np.abs(cube).max()
        if peak == 0.0:
            peak = 1.0
        sigma = peak * 10.0 ** (-noise_snr_db / 20.0)
        rng = np.random.default_rng(seed)
        cube = cube + rng.normal(0.0, sigma, cube.shape)

    return RfDataCube(cube, setup.pulse.sampling_rate, t0)
