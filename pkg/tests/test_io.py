import json

import numpy as np
import pytest

from beamforge.beamform import BeamformedImage
from beamforge.config import ConfigError, load_config, parse_config
from beamforge.containers import (
    read_pgm,
    read_rf,
    write_loss_csv,
    write_metrics_csv,
    write_pgm,
    write_rf,
)
from beamforge.image import MetricsReport, log_compress
from beamforge.sim import RfDataCube


def _base_config():
    return {
        "array": {"num_elements": 16, "pitch": 154e-6},
        "transmit": {"kind": "plane_wave", "angles": [0.0]},
        "pulse": {"center_frequency": 5e6, "fractional_bandwidth": 0.6,
                  "sampling_rate": 25e6},
        "grid": {"x": [0.01, 0.02, 20], "y": [-0.002, 0.002, 10]},
        "phantom": {"scatterers": [[0.015, 0.0, 1.0]]},
        "beamformer": {"kind": "das"},
    }


class TestRfContainer:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        data = rng.normal(size=(2, 4, 50)).astype(np.float32).astype(np.float64)
        cube = RfDataCube(data, 25e6, t0=1e-6)
        p = tmp_path / "x.rfc"
        write_rf(cube, p, config={"note": 1})
        back, cfg = read_rf(p)
        np.testing.assert_array_equal(back.samples, data)
        assert back.sampling_rate == 25e6 and back.t0 == 1e-6
        assert cfg == {"note": 1}
        # writing the read-back cube reproduces the file byte for byte
        p2 = tmp_path / "y.rfc"
        write_rf(back, p2, config=cfg)
        assert p.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.rfc"
        p.write_bytes(b"JUNK\n10\n")
        with pytest.raises(ValueError, match="magic"):
            read_rf(p)

    def test_truncated_payload(self, tmp_path):
        cube = RfDataCube(np.zeros((1, 2, 10)), 1e6)
        p = tmp_path / "t.rfc"
        write_rf(cube, p)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(ValueError, match="truncated"):
            read_rf(p)

    def test_migrated_tensor_round_trip(self, tmp_path):
        from beamforge.containers import read_tensor, write_tensor
        from beamforge.migrate import DelayedDataTensor

        rng = np.random.default_rng(3)
        z = rng.normal(size=(1, 4, 5, 6)).astype(np.float32).astype(np.float64)
        valid = rng.random((1, 4, 5, 6)) > 0.3
        z[~valid] = 0.0
        t = DelayedDataTensor(z, valid)
        p = tmp_path / "z.ddt"
        write_tensor(t, p)
        back = read_tensor(p)
        np.testing.assert_array_equal(back.z, z)
        np.testing.assert_array_equal(back.valid, valid)


class TestPgm:
    def test_mapping_and_round_trip(self, tmp_path):
        env = np.array([[1.0, 0.5, 1e-6], [0.25, 0.1, 1.0]])
        bm = log_compress(env, 60.0)
        p = tmp_path / "img.pgm"
        write_pgm(bm, p)
        pix = read_pgm(p)
        assert pix.shape == env.shape
        assert pix[0, 0] == 255        # 0 dB
        assert pix[0, 2] == 0          # clipped at the floor
        assert pix[1, 1] == round(((-20.0) + 60.0) / 60.0 * 255)


class TestCsv:
    def test_metrics_fixed_header(self, tmp_path):
        rep = MetricsReport(fwhm_lateral=0.5e-3, flops_per_pixel={"mac": 10})
        p = tmp_path / "m.csv"
        write_metrics_csv(rep, p)
        lines = p.read_text().splitlines()
        assert lines[0] == "metric,value"
        assert lines[1] == "fwhm_lateral_m,0.0005"
        assert "fwhm_axial_m," in lines[2]
        assert "flops_mac,10" in lines

    def test_loss_history(self, tmp_path):
        class Run:
            initial_loss = 2.0
            loss_history = (1.0, 0.5)

        p = tmp_path / "l.csv"
        write_loss_csv(Run(), p)
        assert p.read_text().splitlines() == ["epoch,loss", "0,2.0", "1,1.0", "2,0.5"]


class TestConfig:
    def test_minimal_valid(self):
        cfg = parse_config(_base_config())
        assert cfg.setup.num_channels == 16
        assert cfg.grid.shape == (20, 10)
        assert cfg.phantom.num_scatterers == 1
        assert cfg.setup.medium.speed_of_sound == 1540.0

    def test_unknown_section_rejected(self):
        doc = _base_config()
        doc["extras"] = {}
        with pytest.raises(ConfigError, match="extras"):
            parse_config(doc)

    def test_unknown_key_rejected(self):
        doc = _base_config()
        doc["pulse"]["ringdown"] = 1
        with pytest.raises(ConfigError, match="ringdown"):
            parse_config(doc)

    def test_missing_section(self):
        doc = _base_config()
        del doc["pulse"]
        with pytest.raises(ConfigError, match="pulse"):
            parse_config(doc)

    def test_validation_errors_become_config_errors(self):
        doc = _base_config()
        doc["pulse"]["sampling_rate"] = 1e6  # below 4x f0
        with pytest.raises(ConfigError):
            parse_config(doc)

    def test_scatterer_row_shape(self):
        doc = _base_config()
        doc["phantom"] = {"scatterers": [[0.01, 0.0]]}
        with pytest.raises(ConfigError, match="amplitude"):
            parse_config(doc)

    def test_medium_and_regions(self):
        doc = _base_config()
        doc["medium"] = {"speed_of_sound": 1480.0}
        doc["phantom"] = {
            "speckle": {"num": 50, "x": [0.01, 0.02], "y": [-0.002, 0.002], "seed": 1},
            "regions": [{"kind": "anechoic_disk", "center": [0.015, 0.0],
                         "radius": 0.001}],
        }
        cfg = parse_config(doc)
        assert cfg.setup.medium.speed_of_sound == 1480.0
        assert cfg.phantom.num_scatterers == 50
        assert len(cfg.phantom.regions) == 1

    def test_malformed_json_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="malformed"):
            load_config(p)

    def test_all_transmit_kinds(self):
        for t in (
            {"kind": "synthetic_aperture", "elements": [0, 5]},
            {"kind": "focused_line", "centers": [8], "focal_depth": 0.02,
             "half_width": 4},
            {"kind": "diverging_wave", "virtual_sources": [[-0.005, 0.0]]},
        ):
            doc = _base_config()
            doc["transmit"] = t
            assert parse_config(doc).setup.num_events >= 1
