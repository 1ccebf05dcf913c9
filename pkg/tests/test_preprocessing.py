import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import jacobi_eigh, sanitize_reference

from csitraffic.preprocessing import (
    FilterSpec,
    LowpassFilter,
    PcaDenoiser,
    PhaseSanitizer,
    filter_min_length,
    lowpass_filter,
    pca_denoise,
    sanitize_phase,
    sanitize_phase_matrix,
)


def sine(freq_hz, fs=2500.0, seconds=10.0):
    t = np.arange(int(seconds * fs)) / fs
    return np.sin(2 * np.pi * freq_hz * t)


def rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


class TestFilter:
    def test_dc_gain_unity(self):
        out = lowpass_filter(np.full(5000, 3.7), FilterSpec())
        np.testing.assert_allclose(out, 3.7, atol=1e-6)

    def test_passband_10hz(self):
        x = sine(10.0)
        y = lowpass_filter(x, FilterSpec())
        assert rms(y) >= 0.99 * rms(x)

    def test_stopband_200hz(self):
        x = sine(200.0)
        y = lowpass_filter(x, FilterSpec())
        assert rms(y) <= 0.1 * rms(x)

    def test_attenuation_contract(self):
        spec = FilterSpec()
        # <= 1 dB below 0.8 * cutoff, >= 20 dB above 2.5 * cutoff
        edge = sine(0.8 * spec.cutoff_hz)
        y = lowpass_filter(edge, spec)
        ripple_db = -20 * np.log10(rms(y[2500:-2500]) / rms(edge[2500:-2500]))
        assert ripple_db <= 1.0
        stop = sine(2.5 * spec.cutoff_hz)
        y = lowpass_filter(stop, spec)
        atten_db = -20 * np.log10(rms(y[2500:-2500]) / rms(stop[2500:-2500]))
        assert atten_db >= 20.0

    def test_highpass_mode_contract(self):
        spec = FilterSpec(mode="highpass")
        stop = sine(0.4 * spec.cutoff_hz)
        y = lowpass_filter(stop, spec)
        assert -20 * np.log10(rms(y[2500:-2500]) / rms(stop[2500:-2500])) >= 20.0
        keep = sine(1.25 * spec.cutoff_hz)
        y = lowpass_filter(keep, spec)
        assert -20 * np.log10(rms(y[2500:-2500]) / rms(keep[2500:-2500])) <= 1.0

    def test_zero_phase(self):
        # peaks of a slow sinusoid must not shift
        x = sine(5.0)
        y = lowpass_filter(x, FilterSpec())
        seg = slice(3000, 22000)
        assert abs(int(np.argmax(x[seg])) - int(np.argmax(y[seg]))) <= 1

    def test_output_length_equals_input(self):
        x = sine(10.0, seconds=1.0)
        assert lowpass_filter(x, FilterSpec()).shape == x.shape

    def test_linearity(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(4000)
        y = rng.standard_normal(4000)
        spec = FilterSpec()
        lhs = lowpass_filter(2.5 * x - 1.25 * y, spec)
        rhs = 2.5 * lowpass_filter(x, spec) - 1.25 * lowpass_filter(y, spec)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_too_short_series(self):
        n = filter_min_length(FilterSpec())
        with pytest.raises(ValueError):
            lowpass_filter(np.zeros(n - 1), FilterSpec())

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            FilterSpec(cutoff_hz=0.0)
        with pytest.raises(ValueError):
            FilterSpec(cutoff_hz=1300.0, sample_rate_hz=2500.0)
        with pytest.raises(ValueError):
            FilterSpec(mode="bandpass")

    def test_matrix_filtering_matches_columns(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((3000, 4))
        spec = FilterSpec()
        out = lowpass_filter(x, spec)
        for c in range(4):
            np.testing.assert_array_equal(out[:, c], lowpass_filter(x[:, c], spec))

    def test_transformer_wrapper(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((3000, 2))
        est = LowpassFilter()
        np.testing.assert_array_equal(
            est.fit_transform(x), lowpass_filter(x, FilterSpec())
        )
        assert est.get_params()["cutoff_hz"] == 38.0


class TestPca:
    def test_rank_one_matrix(self):
        rng = np.random.default_rng(3)
        u = rng.standard_normal(200)
        u -= u.mean()
        w = rng.standard_normal(30)
        m = np.outer(u, w)
        result = pca_denoise(m, k=30)
        w_unit = w / np.linalg.norm(w)
        # first eigenvector equals +/- w/||w||
        assert min(
            np.abs(result.components[:, 0] - w_unit).max(),
            np.abs(result.components[:, 0] + w_unit).max(),
        ) < 1e-9
        assert result.eigenvalues[1] <= 1e-9 * result.eigenvalues[0]

    def test_identical_columns(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal(100)
        m = np.tile(x[:, None], (1, 30))
        result = pca_denoise(m, k=30)
        expected = np.sqrt(30) * (x - x.mean())
        err_plus = np.abs(result.projected[:, 0] - expected).max()
        err_minus = np.abs(result.projected[:, 0] + expected).max()
        assert min(err_plus, err_minus) < 1e-9
        np.testing.assert_allclose(result.eigenvalues[1:], 0.0, atol=1e-8)

    def test_full_reconstruction(self):
        rng = np.random.default_rng(5)
        m = rng.standard_normal((50, 30)) * 3 + 1.5
        result = pca_denoise(m, k=30)
        recon = result.projected @ result.components.T + result.column_means
        np.testing.assert_allclose(recon, m, atol=1e-8)

    def test_matches_jacobi_oracle(self):
        rng = np.random.default_rng(6)
        m = rng.standard_normal((80, 30))
        m[:, :10] += 2.0 * rng.standard_normal((80, 1))  # correlated block
        result = pca_denoise(m, k=30)
        centered = m - m.mean(axis=0)
        evals, evecs = jacobi_eigh(centered.T @ centered)
        np.testing.assert_allclose(result.eigenvalues, evals, rtol=0, atol=1e-8 * evals[0])
        for j in range(30):
            dot = abs(float(result.components[:, j] @ evecs[:, j]))
            assert dot == pytest.approx(1.0, abs=1e-8)

    def test_eigenvalue_sum_equals_covariance_trace(self):
        rng = np.random.default_rng(7)
        m = rng.standard_normal((60, 30)) * 2.0
        result = pca_denoise(m, k=30)
        centered = m - m.mean(axis=0)
        trace = float(np.trace(centered.T @ centered))
        assert result.eigenvalues.sum() == pytest.approx(trace, rel=1e-8)

    def test_projected_columns_uncorrelated(self):
        rng = np.random.default_rng(8)
        m = rng.standard_normal((500, 30))
        result = pca_denoise(m, k=5)
        cov = result.projected.T @ result.projected
        diag_scale = np.abs(np.diag(cov)).max()
        off = cov - np.diag(np.diag(cov))
        assert np.abs(off).max() <= 1e-6 * diag_scale

    def test_eigenvector_sign_convention(self):
        rng = np.random.default_rng(9)
        m = rng.standard_normal((40, 30))
        result = pca_denoise(m, k=30)
        for j in range(30):
            col = result.components[:, j]
            assert col[np.argmax(np.abs(col))] > 0

    def test_eigenvalues_nonincreasing_and_orthonormal(self):
        rng = np.random.default_rng(10)
        m = rng.standard_normal((64, 30))
        result = pca_denoise(m, k=30)
        assert np.all(np.diff(result.eigenvalues) <= 1e-9)
        assert np.all(result.eigenvalues >= -1e-9)
        gram = result.components.T @ result.components
        np.testing.assert_allclose(gram, np.eye(30), atol=1e-9)

    def test_domain_errors(self):
        m = np.zeros((10, 30))
        with pytest.raises(ValueError):
            pca_denoise(m, k=0)
        with pytest.raises(ValueError):
            pca_denoise(m, k=31)
        with pytest.raises(ValueError):
            pca_denoise(np.zeros((1, 30)), k=1)
        with pytest.raises(ValueError):
            pca_denoise(np.zeros((10, 29)), k=1)

    def test_transformer_wrapper(self):
        rng = np.random.default_rng(11)
        m = rng.standard_normal((40, 30))
        est = PcaDenoiser(n_components=2)
        projected = est.fit_transform(m)
        np.testing.assert_array_equal(projected, pca_denoise(m, k=2).projected)
        np.testing.assert_allclose(est.transform(m), projected, atol=1e-12)


class TestSanitizePhase:
    def test_zero_input(self):
        np.testing.assert_array_equal(sanitize_phase(np.zeros(30)), np.zeros(30))

    @pytest.mark.parametrize("beta", [0.5, -0.25, 1.0, 3.0])
    def test_constant_input_exact_zero(self, beta):
        out = sanitize_phase(np.full(30, beta))
        assert np.array_equal(out, np.zeros(30))

    @settings(max_examples=50, deadline=None)
    @given(beta=st.floats(-3.0, 3.0, allow_nan=False))
    def test_constant_input_near_zero(self, beta):
        out = sanitize_phase(np.full(30, beta))
        np.testing.assert_allclose(out, 0.0, atol=5e-15)

    def test_constant_shift_invariance_exact_on_dyadic(self):
        # inputs and shift on a coarse binary grid: all sums stay exact
        rng = np.random.default_rng(12)
        x = rng.integers(-512, 512, 30).astype(np.float64) / 1024.0
        shift = 0.25
        assert np.array_equal(sanitize_phase(x + shift), sanitize_phase(x))

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**31), shift=st.floats(-2.0, 2.0, allow_nan=False))
    def test_constant_shift_invariance_property(self, seed, shift):
        x = np.random.default_rng(seed).uniform(-0.5, 0.5, 30)
        np.testing.assert_allclose(
            sanitize_phase(x + shift), sanitize_phase(x), atol=1e-12
        )

    def test_linearity(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            x = rng.uniform(-0.5, 0.5, 30)
            y = rng.uniform(-0.5, 0.5, 30)
            c = rng.uniform(-2.0, 2.0)
            np.testing.assert_allclose(
                sanitize_phase(x + y), sanitize_phase(x) + sanitize_phase(y), atol=1e-12
            )
            np.testing.assert_allclose(
                sanitize_phase(c * x), c * sanitize_phase(x), atol=1e-12
            )

    def test_matches_reference_formula(self):
        rng = np.random.default_rng(14)
        for _ in range(10):
            x = rng.uniform(-1.0, 1.0, 30)  # wrap-free
            np.testing.assert_allclose(
                sanitize_phase(x), sanitize_reference(x), atol=1e-12
            )

    def test_unwrap_before_transform(self):
        # a steep linear ramp wraps in principal values; sanitizing the
        # wrapped measurement must match sanitizing the true ramp
        slope = 0.9
        true_phase = slope * np.arange(1, 31)
        wrapped = np.angle(np.exp(1j * true_phase))
        np.testing.assert_allclose(
            sanitize_phase(wrapped),
            sanitize_reference(true_phase - true_phase[0] + wrapped[0]),
            atol=1e-12,
        )

    def test_errors(self):
        with pytest.raises(ValueError):
            sanitize_phase(np.zeros(29))
        with pytest.raises(ValueError):
            sanitize_phase(np.full(30, np.nan))

    def test_matrix_rows_independent(self):
        rng = np.random.default_rng(15)
        row = rng.uniform(-1, 1, 30)
        m = np.tile(row, (5, 1))
        out = sanitize_phase_matrix(m)
        for i in range(5):
            np.testing.assert_array_equal(out[i], out[0])

    def test_matrix_row_permutation(self):
        rng = np.random.default_rng(16)
        m = rng.uniform(-1, 1, (8, 30))
        perm = rng.permutation(8)
        out = sanitize_phase_matrix(m)
        out_perm = sanitize_phase_matrix(m[perm])
        np.testing.assert_array_equal(out_perm, out[perm])

    def test_matrix_matches_per_row(self):
        rng = np.random.default_rng(17)
        m = rng.uniform(-2, 2, (12, 30))
        out = sanitize_phase_matrix(m)
        for i in range(12):
            np.testing.assert_allclose(out[i], sanitize_phase(m[i]), atol=0)

    def test_transformer_wrapper(self):
        rng = np.random.default_rng(18)
        m = rng.uniform(-1, 1, (6, 30))
        np.testing.assert_array_equal(
            PhaseSanitizer().fit_transform(m), sanitize_phase_matrix(m)
        )
