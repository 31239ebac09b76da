"""Transducer arrays, transmit schemes, pulses, imaging grids, and phantoms.

Coordinate convention used throughout the package: a position is a 2-vector
``(x, y)`` in meters, where ``x`` is depth (positive into the medium) and
``y`` is the lateral coordinate along the array. Transducer elements sit at
depth 0. Images are indexed ``[depth, lateral]``, i.e. shape ``(Nx, Ny)``.

All types in this module are immutable value objects; they can be shared
freely across parallel workers.
"""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MediumParams",
    "ArrayGeometry",
    "PulseSpec",
    "ImagingGrid",
    "PlaneWaveEvent",
    "FocusedEvent",
    "SyntheticApertureEvent",
    "DivergingWaveEvent",
    "TransmitScheme",
    "AnechoicDisk",
    "Phantom",
    "AcquisitionSetup",
    "make_linear_array",
    "make_plane_wave_scheme",
    "make_synthetic_aperture_scheme",
    "make_focused_scheme",
    "make_diverging_scheme",
    "make_grid",
    "make_speckle_phantom",
]


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MediumParams:
    """Homogeneous propagation medium (speed of sound in m/s)."""

    speed_of_sound: float = 1540.0

    def __post_init__(self):
        if not self.speed_of_sound > 0:
            raise ValueError(f"speed of sound must be positive, got {self.speed_of_sound}")


@dataclass(frozen=True)
class ArrayGeometry:
    """A 1-D transducer array.

    Attributes:
        element_positions: (C, 2) array of element centers in meters,
            columns ``(depth, lateral)``. Lateral coordinates are strictly
            increasing.
        pitch: center-to-center element spacing in meters.
        aperture_kind: "linear" or "phased".
    """

    element_positions: np.ndarray
    pitch: float
    aperture_kind: str = "linear"

    def __post_init__(self):
        pos = _readonly(self.element_positions)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError(f"element_positions must be (C, 2), got {pos.shape}")
        if pos.shape[0] < 2:
            raise ValueError("an array needs at least 2 elements")
        if not np.all(np.isfinite(pos)):
            raise ValueError("element positions must be finite")
        if not np.all(np.diff(pos[:, 1]) > 0):
            raise ValueError("element lateral positions must be strictly increasing")
        if not self.pitch > 0:
            raise ValueError(f"pitch must be positive, got {self.pitch}")
        if self.aperture_kind not in ("linear", "phased"):
            raise ValueError(f"unknown aperture_kind {self.aperture_kind!r}")
        object.__setattr__(self, "element_positions", pos)

    @property
    def num_elements(self):
        return self.element_positions.shape[0]

    @property
    def lateral_positions(self):
        """(C,) lateral element coordinates in meters."""
        return self.element_positions[:, 1]

    @property
    def aperture_width(self):
        """Distance between the first and last element centers."""
        return float(self.lateral_positions[-1] - self.lateral_positions[0])


@dataclass(frozen=True)
class PulseSpec:
    """Transmitted pulse: a Gaussian-modulated cosine.

    The envelope standard deviation is chosen so that the -6 dB (half
    amplitude) width of the spectral magnitude equals
    ``fractional_bandwidth * center_frequency``.
    """

    center_frequency: float
    fractional_bandwidth: float
    sampling_rate: float

    def __post_init__(self):
        if not self.center_frequency > 0:
            raise ValueError("center_frequency must be positive")
        if not 0 < self.fractional_bandwidth <= 1:
            raise ValueError(
                f"fractional_bandwidth must be in (0, 1], got {self.fractional_bandwidth}"
            )
        if self.sampling_rate < 4 * self.center_frequency:
            raise ValueError(
                "sampling_rate must be at least 4x the center frequency "
                f"({self.sampling_rate:g} < {4 * self.center_frequency:g})"
            )

    @property
    def sigma_t(self):
        """Envelope standard deviation in seconds."""
        # spectral -6 dB full width = 2 * sigma_f * sqrt(2 ln 2) = bw * f0,
        # with sigma_t = 1 / (2 pi sigma_f)
        sigma_f = self.fractional_bandwidth * self.center_frequency / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        return 1.0 / (2.0 * math.pi * sigma_f)

    @property
    def num_cycles_equivalent(self):
        """-6 dB envelope duration expressed in carrier cycles."""
        return 2.0 * self.sigma_t * math.sqrt(2.0 * math.log(2.0)) * self.center_frequency

    @property
    def wavelength(self):
        """Wavelength helper for a given speed of sound is v / f0; this
        property assumes 1540 m/s only for display purposes."""
        return 1540.0 / self.center_frequency


@dataclass(frozen=True)
class ImagingGrid:
    """Rectangular pixel grid: ``x_axis`` depths (Nx,) and ``y_axis``
    lateral positions (Ny,), both in meters and strictly monotone."""

    x_axis: np.ndarray
    y_axis: np.ndarray

    def __post_init__(self):
        x = _readonly(np.atleast_1d(self.x_axis))
        y = _readonly(np.atleast_1d(self.y_axis))
        for name, ax in (("x_axis", x), ("y_axis", y)):
            if ax.ndim != 1 or ax.size < 1:
                raise ValueError(f"{name} must be a non-empty 1-D axis")
            if ax.size > 1:
                d = np.diff(ax)
                if not (np.all(d > 0) or np.all(d < 0)):
                    raise ValueError(f"{name} must be strictly monotone")
        object.__setattr__(self, "x_axis", x)
        object.__setattr__(self, "y_axis", y)

    @property
    def shape(self):
        return (self.x_axis.size, self.y_axis.size)

    def pixel_positions(self):
        """(Nx, Ny, 2) array of pixel positions (depth, lateral)."""
        xx, yy = np.meshgrid(self.x_axis, self.y_axis, indexing="ij")
        return np.stack([xx, yy], axis=-1)

    def nearest_index(self, point):
        """Grid index (ix, iy) closest to a (depth, lateral) point."""
        ix = int(np.argmin(np.abs(self.x_axis - point[0])))
        iy = int(np.argmin(np.abs(self.y_axis - point[1])))
        return ix, iy


@dataclass(frozen=True)
class PlaneWaveEvent:
    """Steered plane-wave transmit; angle in radians from the depth axis."""

    angle: float

    def __post_init__(self):
        if not abs(self.angle) < math.pi / 2:
            raise ValueError(f"plane-wave angle must satisfy |angle| < pi/2, got {self.angle}")


@dataclass(frozen=True)
class FocusedEvent:
    """Focused transmit from the subaperture [center-half_width, center+half_width]."""

    center_index: int
    focal_depth: float
    half_width: int

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("half_width must be >= 0")
        if not self.focal_depth > 0:
            raise ValueError("focal_depth must be positive")


@dataclass(frozen=True)
class SyntheticApertureEvent:
    """Single-element spherical-wave transmit."""

    element_index: int


@dataclass(frozen=True)
class DivergingWaveEvent:
    """Diverging wave from a virtual source behind the array (depth < 0)."""

    virtual_source: np.ndarray

    def __post_init__(self):
        vs = _readonly(np.atleast_1d(self.virtual_source))
        if vs.shape != (2,):
            raise ValueError("virtual_source must be a 2-vector (depth, lateral)")
        if not vs[0] < 0:
            raise ValueError(f"virtual source must lie behind the array (depth < 0), got {vs[0]}")
        object.__setattr__(self, "virtual_source", vs)


_EVENT_KINDS = {
    "plane_wave": PlaneWaveEvent,
    "focused_line": FocusedEvent,
    "synthetic_aperture": SyntheticApertureEvent,
    "diverging_wave": DivergingWaveEvent,
}


@dataclass(frozen=True)
class TransmitScheme:
    """A sequence of transmit events of a single kind."""

    kind: str
    events: tuple

    def __post_init__(self):
        if self.kind not in _EVENT_KINDS:
            raise ValueError(f"unknown transmit kind {self.kind!r}")
        events = tuple(self.events)
        if len(events) < 1:
            raise ValueError("a transmit scheme needs at least one event")
        want = _EVENT_KINDS[self.kind]
        for ev in events:
            if not isinstance(ev, want):
                raise ValueError(f"event {ev!r} does not match scheme kind {self.kind!r}")
        object.__setattr__(self, "events", events)

    @property
    def num_events(self):
        return len(self.events)


@dataclass(frozen=True)
class AnechoicDisk:
    """Scatterer-free disk region, used for contrast metrics."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = _readonly(np.atleast_1d(self.center))
        if c.shape != (2,):
            raise ValueError("center must be a 2-vector (depth, lateral)")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", c)

    def contains(self, points):
        """Boolean mask for points (..., 2) inside the disk."""
        points = np.asarray(points, dtype=float)
        d2 = np.sum((points - self.center) ** 2, axis=-1)
        return d2 < self.radius**2


@dataclass(frozen=True)
class Phantom:
    """Point-scatterer scene.

    Attributes:
        positions: (S, 2) scatterer positions (depth, lateral) in meters.
        amplitudes: (S,) reflectivities (dimensionless).
        regions: labeled shapes (e.g. :class:`AnechoicDisk`) used to build
            metric masks. Anechoic regions must contain no scatterers.
    """

    positions: np.ndarray
    amplitudes: np.ndarray
    regions: tuple = ()

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.size == 0:
            pos = pos.reshape(0, 2)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError(f"positions must be (S, 2), got {pos.shape}")
        amp = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        if amp.shape != (pos.shape[0],):
            raise ValueError("amplitudes must match the number of scatterers")
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(amp)):
            raise ValueError("scatterer positions and amplitudes must be finite")
        regions = tuple(self.regions)
        for region in regions:
            if isinstance(region, AnechoicDisk) and pos.size and np.any(region.contains(pos)):
                raise ValueError("anechoic region contains scatterers")
        object.__setattr__(self, "positions", _readonly(pos))
        object.__setattr__(self, "amplitudes", _readonly(amp))
        object.__setattr__(self, "regions", regions)

    @property
    def num_scatterers(self):
        return self.positions.shape[0]


@dataclass(frozen=True)
class AcquisitionSetup:
    """Everything needed to fire and record: array, transmit scheme, pulse,
    and medium. Validates scheme/geometry consistency at construction."""

    geometry: ArrayGeometry
    scheme: TransmitScheme
    pulse: PulseSpec
    medium: MediumParams = field(default_factory=MediumParams)

    def __post_init__(self):
        C = self.geometry.num_elements
        for ev in self.scheme.events:
            if isinstance(ev, SyntheticApertureEvent):
                if not 0 <= ev.element_index < C:
                    raise ValueError(f"firing element {ev.element_index} outside array of {C}")
            elif isinstance(ev, FocusedEvent):
                lo = ev.center_index - ev.half_width
                hi = ev.center_index + ev.half_width
                if lo < 0 or hi >= C:
                    raise ValueError(
                        f"focused subaperture [{lo}, {hi}] outside array of {C} elements"
                    )

    @property
    def num_events(self):
        return self.scheme.num_events

    @property
    def num_channels(self):
        return self.geometry.num_elements


def make_linear_array(num_elements, pitch, aperture_kind="linear"):
    """Linear array centered on the lateral origin at depth 0.

    Args:
        num_elements: element count C >= 2.
        pitch: element spacing in meters (> 0). Half a wavelength gives
            spatial Nyquist sampling of the aperture and avoids grating
            lobes.

    Returns:
        ArrayGeometry
    """
    if num_elements < 2:
        raise ValueError(f"num_elements must be >= 2, got {num_elements}")
    if not pitch > 0:
        raise ValueError(f"pitch must be positive, got {pitch}")
    lateral = (np.arange(num_elements) - (num_elements - 1) / 2.0) * pitch
    positions = np.column_stack([np.zeros(num_elements), lateral])
    return ArrayGeometry(positions, float(pitch), aperture_kind)


def make_plane_wave_scheme(angles):
    """Plane-wave scheme with one event per steering angle (radians)."""
    angles = list(np.atleast_1d(angles))
    if len(angles) == 0:
        raise ValueError("angle list must be non-empty")
    return TransmitScheme("plane_wave", tuple(PlaneWaveEvent(float(a)) for a in angles))


def make_synthetic_aperture_scheme(element_indices):
    """Synthetic-aperture scheme firing the listed elements one at a time."""
    idx = list(np.atleast_1d(element_indices))
    if len(idx) == 0:
        raise ValueError("element index list must be non-empty")
    return TransmitScheme(
        "synthetic_aperture", tuple(SyntheticApertureEvent(int(i)) for i in idx)
    )


def make_focused_scheme(center_indices, focal_depth, half_width):
    """Focused line scheme: one event per subaperture center index."""
    idx = list(np.atleast_1d(center_indices))
    if len(idx) == 0:
        raise ValueError("center index list must be non-empty")
    events = tuple(
        FocusedEvent(int(i), float(focal_depth), int(half_width)) for i in idx
    )
    return TransmitScheme("focused_line", events)


def make_diverging_scheme(virtual_sources):
    """Diverging-wave scheme from virtual sources behind the array."""
    vs = np.atleast_2d(np.asarray(virtual_sources, dtype=float))
    if vs.size == 0:
        raise ValueError("virtual source list must be non-empty")
    return TransmitScheme("diverging_wave", tuple(DivergingWaveEvent(v) for v in vs))


def make_grid(x_span, num_x, y_span, num_y):
    """Uniform grid over ``x_span = (x0, x1)`` depths and ``y_span`` laterals."""
    return ImagingGrid(
        np.linspace(x_span[0], x_span[1], num_x),
        np.linspace(y_span[0], y_span[1], num_y),
    )


def make_speckle_phantom(num_scatterers, x_span, y_span, seed=0, amplitude_std=1.0, regions=()):
    """Random diffuse-scatterer phantom.

    Scatterers are uniform over the block ``x_span x y_span`` with Gaussian
    amplitudes; positions falling inside any anechoic region are
    rejection-resampled so the phantom invariant holds.
    """
    rng = np.random.default_rng(seed)
    pos = np.empty((0, 2))
    while pos.shape[0] < num_scatterers:
        need = num_scatterers - pos.shape[0]
        cand = np.column_stack(
            [
                rng.uniform(x_span[0], x_span[1], need),
                rng.uniform(y_span[0], y_span[1], need),
            ]
        )
        keep = np.ones(need, dtype=bool)
        for region in regions:
            if isinstance(region, AnechoicDisk):
                keep &= ~region.contains(cand)
        pos = np.vstack([pos, cand[keep]])
    amp = rng.normal(0.0, amplitude_std, num_scatterers)
    return Phantom(pos, amp, tuple(regions))
