"""JSON configuration documents describing a full acquisition.

Sections: array, transmit, pulse, grid, phantom, beamformer, training, plus
optional medium (speed of sound) and simulate (noise/sizing) sections.
Unknown sections or keys fail fast.
"""

import json
from dataclasses import dataclass

import numpy as np

from .core import (
    AcquisitionSetup,
    AnechoicDisk,
    MediumParams,
    Phantom,
    make_diverging_scheme,
    make_focused_scheme,
    make_grid,
    make_linear_array,
    make_plane_wave_scheme,
    make_speckle_phantom,
    make_synthetic_aperture_scheme,
)

__all__ = ["ConfigError", "Config", "load_config", "parse_config"]

_SECTIONS = {"array", "transmit", "pulse", "grid", "phantom", "beamformer",
             "training", "medium", "simulate"}

_BEAMFORMER_KEYS = {
    "kind", "window", "f_number", "interp", "sinc_halfwidth", "subarray_length",
    "temporal_halfwidth", "loading", "subspace_fraction", "iterations",
    "dynamic_range", "compound",
}

_TRAINING_KEYS = {
    "layer_dims", "loss", "distortionless_weight", "eps_log", "epochs",
    "batch_size", "step_size", "seed", "subarray_length", "temporal_halfwidth",
    "loading",
}

_SIMULATE_KEYS = {"noise_snr_db", "seed", "num_samples", "t0", "spreading_loss"}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration document."""


@dataclass(frozen=True)
class Config:
    setup: AcquisitionSetup
    grid: object
    phantom: Phantom
    beamformer: dict
    training: dict
    simulate: dict
    raw: dict


def _reject_unknown(d, allowed, where):
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)} in {where}")


def _need(d, key, where):
    if key not in d:
        raise ConfigError(f"missing required key {key!r} in {where}")
    return d[key]


def _build_scheme(t):
    kind = _need(t, "kind", "transmit")
    if kind == "plane_wave":
        _reject_unknown(t, {"kind", "angles"}, "transmit")
        return make_plane_wave_scheme(_need(t, "angles", "transmit"))
    if kind == "synthetic_aperture":
        _reject_unknown(t, {"kind", "elements"}, "transmit")
        return make_synthetic_aperture_scheme(_need(t, "elements", "transmit"))
    if kind == "focused_line":
        _reject_unknown(t, {"kind", "centers", "focal_depth", "half_width"}, "transmit")
        return make_focused_scheme(
            _need(t, "centers", "transmit"),
            _need(t, "focal_depth", "transmit"),
            _need(t, "half_width", "transmit"),
        )
    if kind == "diverging_wave":
        _reject_unknown(t, {"kind", "virtual_sources"}, "transmit")
        return make_diverging_scheme(_need(t, "virtual_sources", "transmit"))
    raise ConfigError(f"unknown transmit kind {kind!r}")


def _build_phantom(p):
    _reject_unknown(p, {"scatterers", "speckle", "regions"}, "phantom")
    regions = []
    for r in p.get("regions", []):
        kind = _need(r, "kind", "phantom.regions")
        if kind != "anechoic_disk":
            raise ConfigError(f"unknown region kind {kind!r}")
        _reject_unknown(r, {"kind", "center", "radius"}, "phantom.regions")
        regions.append(AnechoicDisk(np.asarray(r["center"], float), float(r["radius"])))

    pos = np.zeros((0, 2))
    amp = np.zeros(0)
    scat = p.get("scatterers", [])
    if scat:
        scat = np.asarray(scat, dtype=float)
        if scat.ndim != 2 or scat.shape[1] != 3:
            raise ConfigError("phantom.scatterers rows must be [depth, lateral, amplitude]")
        pos, amp = scat[:, :2], scat[:, 2]

    sp = p.get("speckle")
    if sp is not None:
        _reject_unknown(sp, {"num", "x", "y", "seed", "amplitude_std"}, "phantom.speckle")
        speckle = make_speckle_phantom(
            int(_need(sp, "num", "phantom.speckle")),
            tuple(_need(sp, "x", "phantom.speckle")),
            tuple(_need(sp, "y", "phantom.speckle")),
            seed=int(sp.get("seed", 0)),
            amplitude_std=float(sp.get("amplitude_std", 1.0)),
            regions=tuple(regions),
        )
        pos = np.vstack([pos, speckle.positions])
        amp = np.concatenate([amp, speckle.amplitudes])
    return Phantom(pos, amp, tuple(regions))


def parse_config(doc):
    """Validate a configuration dict and build the domain objects."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be a JSON object")
    _reject_unknown(doc, _SECTIONS, "configuration")
    for section in ("array", "transmit", "pulse", "grid"):
        if section not in doc:
            raise ConfigError(f"missing required section {section!r}")

    a = doc["array"]
    _reject_unknown(a, {"num_elements", "pitch", "aperture_kind"}, "array")
    try:
        geometry = make_linear_array(
            int(_need(a, "num_elements", "array")),
            float(_need(a, "pitch", "array")),
            a.get("aperture_kind", "linear"),
        )
        medium = MediumParams(float(doc.get("medium", {}).get("speed_of_sound", 1540.0)))
        if "medium" in doc:
            _reject_unknown(doc["medium"], {"speed_of_sound"}, "medium")
        scheme = _build_scheme(doc["transmit"])

        pu = doc["pulse"]
        _reject_unknown(pu, {"center_frequency", "fractional_bandwidth", "sampling_rate"}, "pulse")
        from .core import PulseSpec

        pulse = PulseSpec(
            float(_need(pu, "center_frequency", "pulse")),
            float(_need(pu, "fractional_bandwidth", "pulse")),
            float(_need(pu, "sampling_rate", "pulse")),
        )
        setup = AcquisitionSetup(geometry, scheme, pulse, medium)

        g = doc["grid"]
        _reject_unknown(g, {"x", "y"}, "grid")
        gx = _need(g, "x", "grid")
        gy = _need(g, "y", "grid")
        if len(gx) != 3 or len(gy) != 3:
            raise ConfigError("grid axes must be [start, stop, count]")
        grid = make_grid((float(gx[0]), float(gx[1])), int(gx[2]),
                         (float(gy[0]), float(gy[1])), int(gy[2]))

        phantom = _build_phantom(doc.get("phantom", {}))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    bf = dict(doc.get("beamformer", {}))
    _reject_unknown(bf, _BEAMFORMER_KEYS, "beamformer")
    tr = dict(doc.get("training", {}))
    _reject_unknown(tr, _TRAINING_KEYS, "training")
    si = dict(doc.get("simulate", {}))
    _reject_unknown(si, _SIMULATE_KEYS, "simulate")

    return Config(setup, grid, phantom, bf, tr, si, doc)


def load_config(path):
    """Parse a JSON configuration file."""
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return parse_config(doc)
