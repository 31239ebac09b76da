"""File formats: RF container, PGM images, CSV tables.

The RF container layout is::

    RFC1\\n
    <decimal header byte count>\\n
    <JSON header: shape [E, C, Nt], sampling_rate, t0, setup echo>
    \\n
    <little-endian float32 samples, C-order (event, channel, fast time)>

Samples are stored as float32; reading back reproduces the stored tensor
bit-exactly.
"""

import json

import numpy as np

from .sim import RfDataCube

__all__ = [
    "write_rf",
    "read_rf",
    "write_tensor",
    "read_tensor",
    "write_pgm",
    "read_pgm",
    "write_metrics_csv",
    "write_loss_csv",
    "write_flops_csv",
]

_RF_MAGIC = b"RFC1"
_DDT_MAGIC = b"DDT1"


def write_rf(cube, path, config=None):
    """Write an RfDataCube; ``config`` (a dict) is echoed in the header."""
    header = {
        "shape": list(cube.shape),
        "sampling_rate": cube.sampling_rate,
        "t0": cube.t0,
        "setup": config,
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(_RF_MAGIC + b"\n")
        f.write(f"{len(blob)}\n".encode())
        f.write(blob)
        f.write(b"\n")
        f.write(np.ascontiguousarray(cube.samples, dtype="<f4").tobytes())


def read_rf(path):
    """Read an RF container; returns ``(RfDataCube, setup_config_or_None)``."""
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != _RF_MAGIC:
            raise ValueError(f"not an RF container: bad magic {magic!r}")
        n = int(f.readline())
        header = json.loads(f.read(n).decode())
        f.read(1)
        raw = f.read()
    shape = tuple(header["shape"])
    expect = int(np.prod(shape)) * 4
    if len(raw) != expect:
        raise ValueError(f"truncated RF container: {len(raw)} payload bytes, expected {expect}")
    samples = np.frombuffer(raw, dtype="<f4").reshape(shape)
    cube = RfDataCube(samples.astype(np.float64), header["sampling_rate"], header["t0"])
    return cube, header.get("setup")


def write_tensor(tensor, path):
    """Debug dump of a migrated data tensor (float32 samples + validity bits)."""
    header = {"shape": list(tensor.shape)}
    blob = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(_DDT_MAGIC + b"\n")
        f.write(f"{len(blob)}\n".encode())
        f.write(blob)
        f.write(b"\n")
        f.write(np.ascontiguousarray(tensor.z, dtype="<f4").tobytes())
        f.write(np.packbits(tensor.valid.reshape(-1)).tobytes())


def read_tensor(path):
    from .migrate import DelayedDataTensor

    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != _DDT_MAGIC:
            raise ValueError(f"not a migrated-data container: bad magic {magic!r}")
        n = int(f.readline())
        header = json.loads(f.read(n).decode())
        f.read(1)
        shape = tuple(header["shape"])
        count = int(np.prod(shape))
        z = np.frombuffer(f.read(count * 4), dtype="<f4").reshape(shape)
        valid = np.unpackbits(np.frombuffer(f.read(), dtype=np.uint8),
                              count=count).astype(bool).reshape(shape)
    return DelayedDataTensor(z.astype(np.float64) * valid, valid)


def write_pgm(bmode, path):
    """8-bit binary PGM mapping [-dynamic_range, 0] dB onto [0, 255]."""
    db = bmode.db
    dr = bmode.dynamic_range
    pix = np.rint((db + dr) / dr * 255.0).astype(np.uint8)
    h, w = pix.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(pix.tobytes())


def read_pgm(path):
    with open(path, "rb") as f:
        if f.readline().strip() != b"P5":
            raise ValueError("not a binary PGM")
        dims = f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        maxval = int(f.readline())
        if maxval != 255:
            raise ValueError("only 8-bit PGM supported")
        data = np.frombuffer(f.read(w * h), dtype=np.uint8)
    return data.reshape(h, w)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_metrics_csv(report, path):
    """Two-column metric table with a fixed header row."""
    rows = [("metric", "value")]
    rows.append(("fwhm_lateral_m", _fmt(report.fwhm_lateral)))
    rows.append(("fwhm_axial_m", _fmt(report.fwhm_axial)))
    rows.append(("contrast_ratio_db", _fmt(report.contrast_ratio_db)))
    rows.append(("cnr", _fmt(report.cnr)))
    rows.append(("peak_sidelobe_db", _fmt(report.peak_sidelobe_db)))
    for name, count in (report.flops_per_pixel or {}).items():
        rows.append((f"flops_{name}", _fmt(count)))
    with open(path, "w") as f:
        f.write("\n".join(f"{k},{v}" for k, v in rows) + "\n")


def write_loss_csv(run, path):
    """Loss history table; epoch 0 is the pre-training objective."""
    with open(path, "w") as f:
        f.write("epoch,loss\n")
        f.write(f"0,{run.initial_loss!r}\n")
        for i, v in enumerate(run.loss_history, start=1):
            f.write(f"{i},{v!r}\n")


def write_flops_csv(ledgers, path):
    """Per-beamformer operation counts, one row per (beamformer, quantity)."""
    with open(path, "w") as f:
        f.write("beamformer,quantity,count\n")
        for ledger in ledgers:
            name = ledger["beamformer"]
            for key, val in ledger.items():
                if key == "beamformer" or val is None:
                    continue
                if key == "layer_dims":
                    val = "x".join(str(d) for d in val)
                f.write(f"{name},{key},{val}\n")
