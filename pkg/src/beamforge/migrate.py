"""Time-of-flight computation and time-to-space migration of RF data.

Migration maps the recorded cube from (E, C, Nt) to (E, C, Nx, Ny) by
evaluating each channel signal at the two-way travel time of every pixel
(dynamic receive focusing: every pixel is a focal point). Fractional delays
are available as nearest/linear/windowed-sinc interpolation in time or as a
phase ramp in the Fourier domain.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_chunks
from .sim import RfDataCube, transmit_distance

__all__ = [
    "TofTable",
    "DelayedDataTensor",
    "SubsamplingMask",
    "compute_tof",
    "delay_time_domain",
    "delay_fourier_domain",
    "migrate",
    "make_mask",
]


@dataclass(frozen=True)
class TofTable:
    """Two-way time of flight per (event, channel, pixel): (E, C, Nx, Ny) seconds."""

    tau: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        if tau.ndim != 4:
            raise ValueError(f"tau must be (E, C, Nx, Ny), got {tau.shape}")
        if not np.all(np.isfinite(tau)) or np.any(tau < 0):
            raise ValueError("time-of-flight entries must be finite and nonnegative")
        object.__setattr__(self, "tau", tau)

    @property
    def shape(self):
        return self.tau.shape


@dataclass(frozen=True)
class DelayedDataTensor:
    """TOF-migrated channel data z of shape (E, C, Nx, Ny).

    ``valid`` marks samples whose delay fell inside the recorded fast-time
    window; entries with ``valid == False`` are exactly zero.
    """

    z: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        valid = np.asarray(self.valid, dtype=bool)
        if z.ndim != 4 or valid.shape != z.shape:
            raise ValueError("z and valid must both be (E, C, Nx, Ny)")
        if np.any(z[~valid] != 0.0):
            raise ValueError("invalid samples must be exactly zero")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self):
        return self.z.shape


@dataclass(frozen=True)
class SubsamplingMask:
    """Active receive channels and transmit events for sparse acquisition."""

    active_channels: np.ndarray
    active_events: np.ndarray
    seed: int = 0

    def __post_init__(self):
        ch = np.asarray(self.active_channels, dtype=bool)
        ev = np.asarray(self.active_events, dtype=bool)
        if ch.ndim != 1 or ev.ndim != 1:
            raise ValueError("masks must be 1-D boolean arrays")
        if not ch.any():
            raise ValueError("at least one channel must stay active")
        if not ev.any():
            raise ValueError("at least one event must stay active")
        object.__setattr__(self, "active_channels", ch)
        object.__setattr__(self, "active_events", ev)


def make_mask(kind, num_channels, num_events, k=2, p=0.5, seed=0):
    """Build a channel subsampling mask (events stay fully active).

    kind:
        "full"             -- keep every channel,
        "uniform_decimate" -- keep channel indices 0, k, 2k, ...,
        "random"           -- keep each channel with probability p
                              (deterministic given ``seed``).
    """
    ch = np.zeros(num_channels, dtype=bool)
    if kind == "full":
        ch[:] = True
    elif kind == "uniform_decimate":
        if k < 1:
            raise ValueError("decimation factor k must be >= 1")
        ch[::k] = True
    elif kind == "random":
        if not 0 < p <= 1:
            raise ValueError("keep probability p must be in (0, 1]")
        rng = np.random.default_rng(seed)
        ch = rng.random(num_channels) < p
    else:
        raise ValueError(f"unknown mask kind {kind!r}")
    if not ch.any():
        raise ValueError("mask keeps zero channels; increase p or lower k")
    return SubsamplingMask(ch, np.ones(num_events, dtype=bool), seed)


def compute_tof(setup, grid):
    """Two-way time of flight from each transmit event to each pixel and
    back to each receive element.

    The transmit leg uses the per-scheme wavefront arrival of
    :func:`beamforge.sim.transmit_distance`, so the table is consistent with
    the firing-delay convention of the simulator; the receive leg is the
    Euclidean element-to-pixel distance.
    """
    v = setup.medium.speed_of_sound
    pix = grid.pixel_positions()  # (Nx, Ny, 2)
    E = setup.num_events
    C = setup.num_channels
    nx, ny = grid.shape
    tau = np.empty((E, C, nx, ny))
    d_rx = np.linalg.norm(
        pix[None, :, :, :] - setup.geometry.element_positions[:, None, None, :], axis=-1
    )  # (C, Nx, Ny)
    for e, event in enumerate(setup.scheme.events):
        d_tx = transmit_distance(event, setup.geometry, setup.medium, pix)
        tau[e] = (d_tx[None] + d_rx) / v
    return TofTable(tau)


def _sinc_kernel_apply(x, idx, halfwidth):
    """Evaluate signal x at fractional indices via a Hann-windowed sinc."""
    n_t = x.shape[-1]
    i0 = np.floor(idx).astype(np.int64)
    out = np.zeros_like(idx, dtype=float)
    for j in range(-halfwidth + 1, halfwidth + 1):
        tap = i0 + j
        u = idx - tap
        w = np.sinc(u) * 0.5 * (1.0 + np.cos(math.pi * u / halfwidth))
        inside = (tap >= 0) & (tap < n_t)
        out += np.where(inside, np.take(x, np.clip(tap, 0, n_t - 1)), 0.0) * w
    return out


def _interp_fractional(x, idx, interp, sinc_halfwidth):
    """Shared fractional-index evaluation on a 1-D signal (zeros outside)."""
    n_t = x.shape[-1]
    valid = (idx >= 0.0) & (idx <= n_t - 1)
    if interp == "nearest":
        n = np.clip(np.rint(idx).astype(np.int64), 0, n_t - 1)
        vals = np.take(x, n)
    elif interp == "linear":
        i0 = np.clip(np.floor(idx).astype(np.int64), 0, n_t - 2)
        frac = idx - i0
        vals = (1.0 - frac) * np.take(x, i0) + frac * np.take(x, i0 + 1)
    elif interp == "sinc":
        vals = _sinc_kernel_apply(x, idx, sinc_halfwidth)
    else:
        raise ValueError(f"unknown interpolator {interp!r}")
    return np.where(valid, vals, 0.0), valid


def delay_time_domain(x, tau, sampling_rate, interp="linear", sinc_halfwidth=8, t0=0.0):
    """Evaluate a fast-time signal at delay(s) ``tau`` seconds.

    Returns ``(values, valid)``; out-of-window delays yield 0 with
    ``valid == False``. The sinc interpolator uses a Hann-windowed kernel
    with ``sinc_halfwidth`` taps on each side.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("x must be a 1-D fast-time signal")
    tau = np.asarray(tau, dtype=float)
    idx = (tau - t0) * sampling_rate
    vals, valid = _interp_fractional(x, idx, interp, sinc_halfwidth)
    if tau.ndim == 0:
        return float(vals), bool(valid)
    return vals, valid


def delay_fourier_domain(x, tau, sampling_rate):
    """Delay a real signal by ``tau`` seconds with a Fourier phase ramp.

    Multiplies the positive-frequency DFT coefficients by
    ``exp(-j 2 pi f tau)``; conjugate symmetry (and hence a real output) is
    preserved by the half-spectrum transform. The shift is circular.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("x must be a 1-D signal of length >= 2")
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(x.size, 1.0 / sampling_rate)
    return np.fft.irfft(spec * np.exp(-2j * math.pi * f * tau), n=x.size)


def migrate(cube, tof, interp="linear", mask=None, sinc_halfwidth=8):
    """Migrate an RF cube onto the imaging grid: z[e, c, px] = x[e, c](tau[e, c, px]).

    Delays falling outside the recorded window produce zeros flagged invalid;
    channels/events deactivated by ``mask`` are zeroed the same way, so the
    result with a mask equals the full migration multiplied by the mask
    indicator.
    """
    if not isinstance(cube, RfDataCube):
        raise ValueError("cube must be an RfDataCube")
    E, C, n_t = cube.shape
    if tof.shape[:2] != (E, C):
        raise ValueError(f"TOF table shape {tof.shape} does not match cube ({E}, {C}, ...)")
    nx, ny = tof.shape[2:]
    if mask is not None:
        if mask.active_channels.size != C or mask.active_events.size != E:
            raise ValueError("mask size does not match the cube")

    z = np.zeros((E, C, nx, ny))
    valid = np.zeros((E, C, nx, ny), dtype=bool)
    idx_all = (tof.tau - cube.t0) * cube.sampling_rate

    pairs = [
        (e, c)
        for e in range(E)
        for c in range(C)
        if mask is None or (mask.active_events[e] and mask.active_channels[c])
    ]

    def work(chunk):
        for e, c in chunk:
            z[e, c], valid[e, c] = _interp_fractional(
                cube.samples[e, c], idx_all[e, c], interp, sinc_halfwidth
            )

    parallel_chunks(work, pairs)
    return DelayedDataTensor(z, valid)
