import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from beamforge.beamform import (
    ApodizationTensor,
    BeamformedImage,
    CovarianceEstimate,
    coherence_factor,
    coherence_factor_map,
    compound,
    das,
    eigenspace_mv,
    estimate_covariance,
    imap,
    imap_images,
    mvdr_images,
    mvdr_weights,
    split_events,
    subarray_output,
    wiener_images,
    wiener_postfilter,
    window_weights,
)
from beamforge.core import (
    AcquisitionSetup,
    Phantom,
    PulseSpec,
    make_grid,
    make_linear_array,
    make_plane_wave_scheme,
)
from beamforge.migrate import DelayedDataTensor, compute_tof, migrate
from beamforge.sim import simulate_rf

from _oracles import brute_force_min_variance

V = 1540.0
LAM = V / 5e6


def _tensor(z):
    z = np.asarray(z, dtype=float)
    return DelayedDataTensor(z, np.ones_like(z, dtype=bool))


class TestWindowWeights:
    def test_boxcar_uniform(self):
        arr = make_linear_array(8, 1e-4)
        grid = make_grid((0.01, 0.02), 3, (-0.001, 0.001), 3)
        w = window_weights("boxcar", arr, grid).w
        np.testing.assert_allclose(w, 1.0 / 8)

    def test_hamming_profile_five_elements(self):
        arr = make_linear_array(5, 1e-4)
        grid = make_grid((0.01, 0.02), 2, (0.0, 0.0), 1)
        w = window_weights("hamming", arr, grid).w[0, :, 0, 0]
        expected = np.array([0.08, 0.54, 1.0, 0.54, 0.08])
        np.testing.assert_allclose(w, expected / expected.sum(), rtol=1e-12)

    def test_fnumber_aperture_growth(self):
        # f=2 at 10 mm depth: half aperture 2.5 mm
        arr = make_linear_array(64, 2e-4)  # lateral +-6.3 mm
        grid = make_grid((0.01, 0.01), 1, (0.0, 0.0), 1)
        w = window_weights("boxcar", arr, grid, f_number=2.0).w[0, :, 0, 0]
        active = np.abs(arr.lateral_positions) <= 0.01 / 4.0
        assert np.array_equal(w > 0, active)
        assert w.sum() == pytest.approx(1.0)

    def test_empty_aperture_falls_back_to_nearest(self):
        arr = make_linear_array(4, 1e-3)
        grid = make_grid((1e-6, 1e-6), 1, (0.00501, 0.00501), 1)
        apod = window_weights("boxcar", arr, grid, f_number=2.0)
        assert apod.fallback is not None and apod.fallback[0, 0]
        w = apod.w[0, :, 0, 0]
        assert w[3] == 1.0 and w[:3].sum() == 0.0

    def test_unknown_window(self):
        arr = make_linear_array(4, 1e-3)
        grid = make_grid((0.01, 0.02), 2, (0.0, 0.0), 1)
        with pytest.raises(ValueError):
            window_weights("blackman", arr, grid)


class TestDas:
    def test_distortionless_on_equal_channels(self):
        z = _tensor(np.full((1, 6, 3, 4), 2.5))
        w = ApodizationTensor(np.full((1, 6, 1, 1), 1.0 / 6))
        np.testing.assert_array_equal(das(z, w).y, np.full((3, 4), 2.5))

    def test_zero_in_zero_out(self):
        z = _tensor(np.zeros((2, 4, 3, 3)))
        w = ApodizationTensor(np.full((1, 4, 1, 1), 0.25))
        assert np.all(das(z, w).y == 0.0)

    def test_invalid_samples_renormalized(self):
        z = np.full((1, 4, 1, 1), 3.0)
        valid = np.ones_like(z, dtype=bool)
        z[0, 2:] = 0.0
        valid[0, 2:] = False
        out = das(DelayedDataTensor(z, valid),
                  ApodizationTensor(np.full((1, 4, 1, 1), 0.25)))
        assert out.y[0, 0] == pytest.approx(3.0)

    def test_shape_mismatch(self):
        z = _tensor(np.zeros((1, 4, 2, 2)))
        with pytest.raises(ValueError):
            das(z, ApodizationTensor(np.zeros((1, 5, 1, 1))))

    def test_psf_peak_at_scatterer(self):
        arr = make_linear_array(64, LAM / 2)
        setup = AcquisitionSetup(arr, make_plane_wave_scheme([0.0]),
                                 PulseSpec(5e6, 0.6, 25e6))
        ph = Phantom(np.array([[0.02, 0.0005]]), np.array([1.0]))
        cube = simulate_rf(ph, setup)
        grid = make_grid((0.018, 0.022), 41, (-0.002, 0.003), 51)
        z = migrate(cube, compute_tof(setup, grid))
        img = das(z, window_weights("boxcar", arr, grid))
        from beamforge.image import envelope

        pk = np.unravel_index(np.argmax(envelope(img)), grid.shape)
        want = grid.nearest_index((0.02, 0.0005))
        assert abs(pk[0] - want[0]) <= 1 and abs(pk[1] - want[1]) <= 1


class TestCovariance:
    def test_constant_vector_rank_one(self):
        a = 1.7
        cov = estimate_covariance(np.full(6, a), 6, loading=0.0)
        np.testing.assert_allclose(cov.R, a * a * np.ones((6, 6)), rtol=1e-12)
        assert np.linalg.matrix_rank(cov.R) == 1

    def test_iid_noise_converges_to_identity(self):
        rng = np.random.default_rng(11)
        sigma = 0.8
        z = rng.normal(0.0, sigma, size=(6, 10000))
        cov = estimate_covariance(z, 6, loading=0.0)
        np.testing.assert_allclose(np.diag(cov.R), sigma**2, rtol=0.1)
        off = cov.R - np.diag(np.diag(cov.R))
        assert np.abs(off).max() < 0.1 * sigma**2

    def test_loading_adds_scaled_trace_exactly(self):
        rng = np.random.default_rng(12)
        z = rng.normal(size=(8, 16))
        bare = estimate_covariance(z, 4, loading=0.0)
        loaded = estimate_covariance(z, 4, loading=0.01)
        shift = 0.01 * np.trace(bare.R) / 4
        np.testing.assert_allclose(loaded.R, bare.R + shift * np.eye(4), rtol=1e-12)

    def test_degenerate_zero_data_flagged(self):
        cov = estimate_covariance(np.zeros((4, 3)), 4)
        assert cov.degenerate
        w = mvdr_weights(cov)
        np.testing.assert_allclose(w, 0.25)

    def test_subarray_bounds(self):
        with pytest.raises(ValueError):
            estimate_covariance(np.ones(4), 5)
        with pytest.raises(ValueError):
            estimate_covariance(np.ones(4), 0)


class TestMvdrWeights:
    def test_identity_gives_uniform(self):
        cov = CovarianceEstimate(np.eye(5), 5, 0.0)
        np.testing.assert_allclose(mvdr_weights(cov), 0.2)

    def test_diagonal_closed_form(self):
        cov = CovarianceEstimate(np.diag([1.0, 2.0, 4.0]), 3, 0.0)
        np.testing.assert_allclose(mvdr_weights(cov), [4 / 7, 2 / 7, 1 / 7], rtol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (4, 4), elements=st.floats(-1.0, 1.0)))
    def test_distortionless_constraint(self, m):
        R = m @ m.T + 0.5 * np.eye(4)
        w = mvdr_weights(CovarianceEstimate(R, 4, 0.0))
        assert abs(w.sum() - 1.0) < 1e-10

    def test_ill_conditioned_raises(self):
        R = np.ones((4, 4))  # rank one, no loading
        with pytest.raises(np.linalg.LinAlgError, match="loading"):
            mvdr_weights(CovarianceEstimate(R, 4, 0.0))

    @pytest.mark.parametrize("L", [2, 3, 4])
    def test_matches_brute_force_minimizer(self, L):
        rng = np.random.default_rng(40 + L)
        m = rng.normal(size=(L, L))
        R = m @ m.T + 0.3 * np.eye(L)
        w = mvdr_weights(CovarianceEstimate(R, L, 0.0))
        w_bf = brute_force_min_variance(R)
        assert np.abs(w - w_bf).max() < 1e-3

    def test_minimizes_power_vs_das(self):
        rng = np.random.default_rng(50)
        for _ in range(10):
            m = rng.normal(size=(6, 6))
            R = m @ m.T + 0.1 * np.eye(6)
            w = mvdr_weights(CovarianceEstimate(R, 6, 0.0))
            w_das = np.full(6, 1.0 / 6)
            assert w @ R @ w <= w_das @ R @ w_das + 1e-12


class TestEigenspaceMv:
    def test_tiny_fraction_returns_mvdr(self):
        rng = np.random.default_rng(13)
        m = rng.normal(size=(5, 5))
        R = m @ m.T + 0.2 * np.eye(5)
        cov = CovarianceEstimate(R, 5, 0.0)
        w = mvdr_weights(cov)
        np.testing.assert_allclose(eigenspace_mv(cov, w, 1e-12), w, rtol=1e-9)

    def test_diagonal_projection_onto_leading_axis(self):
        cov = CovarianceEstimate(np.diag([10.0, 0.1, 0.1]), 3, 0.0)
        w = mvdr_weights(cov)
        proj = eigenspace_mv(cov, w, 0.5)
        e1 = np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(proj, (w @ e1) * e1, atol=1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(14)
        m = rng.normal(size=(6, 6))
        R = m @ m.T + 0.1 * np.eye(6)
        cov = CovarianceEstimate(R, 6, 0.0)
        w = mvdr_weights(cov)
        once = eigenspace_mv(cov, w, 0.4)
        twice = eigenspace_mv(cov, once, 0.4)
        np.testing.assert_allclose(once, twice, atol=1e-12)

    def test_fraction_domain(self):
        cov = CovarianceEstimate(np.eye(3), 3, 0.0)
        with pytest.raises(ValueError):
            eigenspace_mv(cov, np.ones(3) / 3, 0.0)


class TestCoherenceFactor:
    def test_fully_coherent(self):
        assert coherence_factor([1.0, 1.0, 1.0, 1.0]) == pytest.approx(1.0)

    def test_fully_incoherent(self):
        assert coherence_factor([1.0, -1.0, 1.0, -1.0]) == 0.0

    def test_single_active_channel(self):
        assert coherence_factor([1.0, 0.0, 0.0, 0.0]) == pytest.approx(0.25)

    def test_all_zero_defined_as_zero(self):
        assert coherence_factor([0.0, 0.0]) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, 8, elements=st.floats(-100, 100)))
    def test_range(self, z):
        cf = coherence_factor(z)
        assert 0.0 <= cf <= 1.0 + 1e-12


class TestWiener:
    def test_zero_noise_equals_mvdr(self):
        z = np.full(8, 1.3)
        w = np.full(4, 0.25)
        y_mv = subarray_output(z, w)
        assert wiener_postfilter(z, w) == pytest.approx(y_mv, abs=1e-12)

    def test_gain_formula_uniform_weights(self):
        # w = 1/C, R_n = sigma^2 I: gain = P / (P + sigma^2 / C)
        C = 8
        z = np.full(C, 2.0)
        w = np.full(C, 1.0 / C)
        sigma2 = 0.5
        out = wiener_postfilter(z, w, noise_cov=sigma2 * np.eye(C))
        P = 4.0
        assert out == pytest.approx(P / (P + sigma2 / C) * 2.0, rel=1e-12)

    def test_gain_in_unit_interval(self):
        rng = np.random.default_rng(15)
        for _ in range(20):
            z = rng.normal(size=8)
            w = np.full(4, 0.25)
            y_mv = subarray_output(z, w)
            out = wiener_postfilter(z, w)
            if y_mv != 0:
                gain = out / y_mv
                assert 0.0 < gain <= 1.0 + 1e-12
            assert abs(out) <= abs(y_mv) + 1e-15

    def test_zero_signal_zero_noise(self):
        assert wiener_postfilter(np.zeros(4), np.full(2, 0.5)) == 0.0


class TestImap:
    def test_coherent_fixed_point_one_iteration(self):
        assert imap([2.0, 2.0, 2.0, 2.0], iterations=1) == pytest.approx(2.0)

    def test_all_zero(self):
        assert imap([0.0, 0.0, 0.0, 0.0]) == 0.0

    def test_shrinkage_under_noise(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            z = 1.0 + rng.normal(0.0, 1.0, size=8)
            assert abs(imap(z, iterations=5)) <= abs(z.mean()) + 1e-15

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            imap([1.0], iterations=0)


class TestCompound:
    def _img(self, v):
        return BeamformedImage(np.full((3, 4), v))

    def test_single_image_mean_identity(self):
        img = self._img(2.0)
        np.testing.assert_array_equal(compound([img], "mean").y, img.y)

    def test_k_copies_mean_identity(self):
        img = self._img(1.5)
        out = compound([img] * 5, "mean")
        np.testing.assert_allclose(out.y, img.y)

    def test_coherent_sum(self):
        out = compound([self._img(1.0), self._img(2.0)], "coherent_sum")
        np.testing.assert_allclose(out.y, 3.0)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            compound([self._img(1.0), BeamformedImage(np.zeros((2, 2)))])

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            compound([self._img(1.0)], "median")


@pytest.fixture(scope="module")
def speckle_tensor():
    arr = make_linear_array(16, LAM / 2)
    setup = AcquisitionSetup(arr, make_plane_wave_scheme([0.0, 0.05]),
                             PulseSpec(5e6, 0.6, 25e6))
    from beamforge.core import make_speckle_phantom

    ph = make_speckle_phantom(120, (0.012, 0.02), (-0.004, 0.004), seed=21)
    cube = simulate_rf(ph, setup, noise_snr_db=30, seed=1)
    grid = make_grid((0.013, 0.019), 25, (-0.003, 0.003), 21)
    return migrate(cube, compute_tof(setup, grid))


class TestImageDrivers:
    def test_mvdr_constraint_full_image(self, speckle_tensor):
        imgs, weights = mvdr_images(speckle_tensor, subarray_length=8,
                                    return_weights=True)
        assert len(imgs) == 2
        for w in weights:
            assert np.abs(w.sum(axis=-1) - 1.0).max() < 1e-10

    def test_wiener_magnitude_below_mvdr(self, speckle_tensor):
        mv = mvdr_images(speckle_tensor, subarray_length=8)[0]
        wi = wiener_images(speckle_tensor, subarray_length=8)[0]
        assert np.all(np.abs(wi.y) <= np.abs(mv.y) + 1e-12)

    def test_imap_images_match_per_pixel_op(self, speckle_tensor):
        img = imap_images(speckle_tensor, iterations=3)[0]
        z = speckle_tensor.z[0]
        ix, iy = 12, 10
        assert img.y[ix, iy] == pytest.approx(imap(z[:, ix, iy], iterations=3))

    def test_cf_map_matches_op_and_events_split(self, speckle_tensor):
        cf = coherence_factor_map(speckle_tensor)
        z = speckle_tensor.z
        assert cf.shape == (2,) + z.shape[2:]
        assert cf[1, 5, 5] == pytest.approx(coherence_factor(z[1, :, 5, 5]))
        parts = split_events(speckle_tensor)
        assert len(parts) == 2 and parts[0].shape[0] == 1
