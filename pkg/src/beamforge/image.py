"""Envelope detection, log compression, and image-quality metrics."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert

from .beamform import BeamformedImage
from .core import AnechoicDisk

__all__ = [
    "BmodeImage",
    "MetricsReport",
    "envelope",
    "log_compress",
    "measure_fwhm",
    "measure_contrast",
    "peak_sidelobe_level",
    "region_mask",
    "annulus_mask",
    "scan_convert_nearest",
]

# half-amplitude level on a 20 log10 scale
_HALF_DB = 20.0 * math.log10(2.0)


@dataclass(frozen=True)
class BmodeImage:
    """Log-compressed image in dB: max pixel at 0, clipped at -dynamic_range."""

    db: np.ndarray
    dynamic_range: float

    def __post_init__(self):
        db = np.asarray(self.db, dtype=float)
        if db.ndim != 2:
            raise ValueError("db image must be 2-D")
        if np.any(db > 0) or np.any(db < -self.dynamic_range - 1e-9):
            raise ValueError("db values must lie in [-dynamic_range, 0]")
        object.__setattr__(self, "db", db)


@dataclass(frozen=True)
class MetricsReport:
    """Image-quality numbers; entries are None when the phantom does not
    define the corresponding metric."""

    fwhm_lateral: float | None = None
    fwhm_axial: float | None = None
    contrast_ratio_db: float | None = None
    cnr: float | None = None
    peak_sidelobe_db: float | None = None
    flops_per_pixel: dict | None = None


def envelope(y):
    """Envelope via the analytic signal along depth (one-sided spectral doubling).

    Accepts a BeamformedImage or a 2-D array indexed [depth, lateral].
    """
    arr = y.y if isinstance(y, BeamformedImage) else np.asarray(y, dtype=float)
    if arr.ndim != 2:
        raise ValueError("need a 2-D image [depth, lateral]")
    if arr.shape[0] < 4:
        raise ValueError("need at least 4 depth samples for envelope detection")
    return np.abs(hilbert(arr, axis=0))


def log_compress(env, dynamic_range=60.0):
    """20 log10 compression normalized to the image maximum, clipped below."""
    env = np.asarray(env, dtype=float)
    peak = env.max()
    if not peak > 0:
        raise ValueError("cannot log-compress an all-zero envelope")
    if not dynamic_range > 0:
        raise ValueError("dynamic_range must be positive")
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(env / peak)
    return BmodeImage(np.maximum(db, -dynamic_range), float(dynamic_range))


def _cross_width(profile, coords, peak_idx, drop_db):
    """Width of the contour ``drop_db`` below the peak, linearly interpolated."""
    level = profile[peak_idx] - drop_db
    n = profile.size

    left = peak_idx
    while left > 0 and profile[left - 1] >= level:
        left -= 1
    right = peak_idx
    while right < n - 1 and profile[right + 1] >= level:
        right += 1
    if left == 0 or right == n - 1:
        raise ValueError("unresolved: profile never drops 6 dB inside the grid")

    lo = coords[left] + (coords[left - 1] - coords[left]) * (
        (profile[left] - level) / (profile[left] - profile[left - 1])
    )
    hi = coords[right] + (coords[right + 1] - coords[right]) * (
        (profile[right] - level) / (profile[right] - profile[right + 1])
    )
    return abs(hi - lo)


def measure_fwhm(bmode, grid, peak_index, axis="lateral"):
    """-6 dB (half amplitude) width through a peak, in meters.

    Args:
        bmode: BmodeImage or dB array (Nx, Ny).
        grid: the ImagingGrid the image lives on.
        peak_index: (ix, iy) of a local maximum.
        axis: "lateral" (along y) or "axial" (along x).

    Raises ValueError("unresolved...") when the profile never falls 6 dB
    below the peak inside the grid.
    """
    db = bmode.db if isinstance(bmode, BmodeImage) else np.asarray(bmode, dtype=float)
    ix, iy = peak_index
    if axis == "lateral":
        return _cross_width(db[ix, :], grid.y_axis, iy, _HALF_DB)
    if axis == "axial":
        return _cross_width(db[:, iy], grid.x_axis, ix, _HALF_DB)
    raise ValueError(f"axis must be 'lateral' or 'axial', got {axis!r}")


def measure_contrast(env, inside_mask, outside_mask):
    """Contrast ratio (dB) and CNR between two envelope-image regions.

    CR = 20 log10(mu_out / mu_in); CNR = |mu_out - mu_in| / sqrt(var_out + var_in).
    An empty-signal inside region yields CR = +inf (sentinel).
    """
    env = np.asarray(env, dtype=float)
    inside_mask = np.asarray(inside_mask, dtype=bool)
    outside_mask = np.asarray(outside_mask, dtype=bool)
    if not inside_mask.any() or not outside_mask.any():
        raise ValueError("region masks must be non-empty")
    if np.any(inside_mask & outside_mask):
        raise ValueError("region masks must be disjoint")
    mu_in = env[inside_mask].mean()
    mu_out = env[outside_mask].mean()
    var_in = env[inside_mask].var()
    var_out = env[outside_mask].var()
    cr = math.inf if mu_in == 0 else 20.0 * math.log10(mu_out / mu_in)
    spread = math.sqrt(var_in + var_out)
    cnr = math.inf if spread == 0 and mu_in != mu_out else (
        0.0 if spread == 0 else abs(mu_out - mu_in) / spread
    )
    return cr, cnr


def peak_sidelobe_level(db, grid, peak_index, exclude_radius):
    """Highest dB value outside an exclusion box around the main lobe.

    ``exclude_radius`` is (axial, lateral) in meters, or a scalar applied to
    both axes. The returned level is relative to the peak.
    """
    arr = db.db if isinstance(db, BmodeImage) else np.asarray(db, dtype=float)
    try:
        rx, ry = exclude_radius
    except TypeError:
        rx = ry = float(exclude_radius)
    ix, iy = peak_index
    x0, y0 = grid.x_axis[ix], grid.y_axis[iy]
    inside = (np.abs(grid.x_axis[:, None] - x0) <= rx) & (
        np.abs(grid.y_axis[None, :] - y0) <= ry
    )
    if inside.all():
        raise ValueError("exclusion region covers the whole grid")
    return float(arr[~inside].max() - arr[ix, iy])


def region_mask(grid, region):
    """Boolean (Nx, Ny) mask of pixels inside a phantom region."""
    if isinstance(region, AnechoicDisk):
        return region.contains(grid.pixel_positions())
    raise ValueError(f"unsupported region {region!r}")


def annulus_mask(grid, center, r_inner, r_outer):
    """Pixels with r_inner <= distance-from-center < r_outer."""
    pix = grid.pixel_positions()
    d = np.linalg.norm(pix - np.asarray(center, dtype=float), axis=-1)
    return (d >= r_inner) & (d < r_outer)


def scan_convert_nearest(bmode, grid, x_axis_out, y_axis_out, probe_origin=(0.0, 0.0)):
    """Nearest-neighbor polar-to-Cartesian conversion for phased-array grids.

    Interprets ``grid.x_axis`` as range (m) and ``grid.y_axis`` as steering
    angle (rad) about ``probe_origin``; resamples onto the Cartesian axes.
    Pixels outside the sector are filled with the dynamic-range floor.
    """
    db = bmode.db if isinstance(bmode, BmodeImage) else np.asarray(bmode, dtype=float)
    floor = -bmode.dynamic_range if isinstance(bmode, BmodeImage) else float(db.min())
    xx, yy = np.meshgrid(x_axis_out, y_axis_out, indexing="ij")
    dx = xx - probe_origin[0]
    dy = yy - probe_origin[1]
    rng = np.hypot(dx, dy)
    ang = np.arctan2(dy, dx)
    ir = np.rint(np.interp(rng, grid.x_axis, np.arange(grid.x_axis.size))).astype(int)
    ia = np.rint(np.interp(ang, grid.y_axis, np.arange(grid.y_axis.size))).astype(int)
    out = db[np.clip(ir, 0, db.shape[0] - 1), np.clip(ia, 0, db.shape[1] - 1)]
    outside = (
        (rng < grid.x_axis.min())
        | (rng > grid.x_axis.max())
        | (ang < grid.y_axis.min())
        | (ang > grid.y_axis.max())
    )
    return np.where(outside, floor, out)
