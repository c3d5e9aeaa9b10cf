import numpy as np
import pytest
from numpy.testing import assert_allclose

from climdemand.errors import (
    AlignmentError,
    ConfigError,
    DegenerateInputError,
    InvalidInputError,
)
from climdemand.spectral import (
    GcBootstrapConfig,
    SpectralDecomposition,
    bootstrap_threshold_unconditional,
    conditional_decomposition,
    conditional_gc_spectrum,
    fourier_frequencies,
    spectral_decomposition,
    stationary_bootstrap,
    stationary_bootstrap_indices,
    unconditional_gc_spectrum,
)
from climdemand.varbase import VarModel, fit_var, simulate_var, spectral_radius


def oracle_measure(coef, sigma, frequencies):
    """Closed-form measure from first principles: explicit transfer matrix.

    Build H = (I - sum_l A_l z^l)^{-1}, rotate the innovations so the
    cause's innovation is orthogonal to the effect's, and take the log
    ratio of the effect's spectrum to its own-innovation part.
    """
    s12_over_s22 = sigma[0, 1] / sigma[1, 1]
    t_inv = np.array([[1.0, s12_over_s22], [0.0, 1.0]])
    var_cause = sigma[0, 0] - sigma[0, 1] ** 2 / sigma[1, 1]
    out = np.empty(len(frequencies))
    for i, f in enumerate(frequencies):
        z = np.exp(-2j * np.pi * f)
        lagpoly = np.eye(2, dtype=complex)
        for l, a in enumerate(coef, start=1):
            lagpoly -= a * z**l
        rotated = np.linalg.inv(lagpoly) @ t_inv
        own = sigma[1, 1] * abs(rotated[1, 1]) ** 2
        total = var_cause * abs(rotated[1, 0]) ** 2 + own
        out[i] = np.log(total / own)
    return out


def manual_model(coef, sigma, names=("x", "y")):
    """Wrap known coefficients in a VarModel for the decomposition API."""
    coef = np.asarray(coef, dtype=float)
    p, K, _ = coef.shape
    return VarModel(
        variable_names=names,
        order=p,
        intercept=np.zeros(K),
        coef=coef,
        resid_cov=np.asarray(sigma, dtype=float),
        residuals=np.zeros((10, K)),
        intercept_se=np.zeros(K),
        coef_se=np.zeros((p, K, K)),
        companion_radius=spectral_radius(coef),
        nobs=10,
        bic=0.0,
        bic_by_order={p: 0.0},
    )


def simulate_pair(coef, sigma, T, rng, burn=300):
    chol = np.linalg.cholesky(sigma)
    shocks = rng.normal(size=(T + burn, 2)) @ chol.T
    return simulate_var(np.zeros(2), np.asarray(coef, float), shocks)[burn:]


class TestFrequencies:
    def test_grid(self):
        freqs = fourier_frequencies(400)
        assert freqs.shape == (200,)
        assert freqs[0] == 1.0 / 400.0
        assert freqs[-1] == 0.5

    def test_odd_length(self):
        freqs = fourier_frequencies(7)
        assert_allclose(freqs, [1 / 7, 2 / 7, 3 / 7])


class TestDecomposition:
    def test_matches_closed_form_oracle(self):
        # Feedback in both directions plus correlated innovations.
        coef = np.array(
            [
                [[0.5, 0.2], [0.3, 0.4]],
                [[-0.1, 0.0], [0.15, -0.2]],
            ]
        )
        sigma = np.array([[1.0, 0.6], [0.6, 2.0]])
        freqs = fourier_frequencies(128)
        decomp = spectral_decomposition(manual_model(coef, sigma), freqs)
        assert_allclose(decomp.measure, oracle_measure(coef, sigma, freqs), atol=1e-12)
        assert_allclose(decomp.total, decomp.cross + decomp.intrinsic)
        assert np.all(decomp.measure >= 0.0)

    def test_lag_one_shift_is_flat_log_164(self):
        # y_t = 0.8 x_{t-1} + e with unit white noise: the measure is
        # log(1 + 0.64) at every frequency.
        coef = np.array([[[0.0, 0.0], [0.8, 0.0]]])
        decomp = spectral_decomposition(
            manual_model(coef, np.eye(2)), fourier_frequencies(200)
        )
        assert_allclose(decomp.measure, np.log(1.64), rtol=1e-12)

    def test_zero_cross_coefficients_give_exact_zero(self):
        # No cause -> effect coefficients: identically zero even though the
        # innovations are correlated and the effect feeds back on the cause.
        coef = np.array([[[0.5, 0.25], [0.0, 0.4]]])
        sigma = np.array([[1.0, 0.7], [0.7, 1.5]])
        decomp = spectral_decomposition(manual_model(coef, sigma), fourier_frequencies(100))
        assert np.all(decomp.measure == 0.0)

    def test_estimated_spectrum_near_truth(self):
        rng = np.random.default_rng(812)
        coef = np.array([[[0.0, 0.0], [0.8, 0.0]]])
        data = simulate_pair(coef, np.eye(2), 2000, rng)
        result = unconditional_gc_spectrum(
            data[:, 0],
            data[:, 1],
            GcBootstrapConfig(n_replicates=100, seed=4),
        )
        assert np.all(result.estimate > 0.0)
        assert np.max(np.abs(result.estimate - np.log(1.64))) < 0.15


class TestScaleInvariance:
    def test_measure_invariant_to_scaling(self):
        rng = np.random.default_rng(99)
        coef = np.array([[[0.4, 0.1], [0.3, 0.5]]])
        data = simulate_pair(coef, np.array([[1.0, 0.3], [0.3, 1.0]]), 600, rng)
        freqs = fourier_frequencies(600)
        base = fit_var(data, max_order=4)
        scaled = fit_var(data * np.array([250.0, 0.004]), max_order=4)
        m_base = spectral_decomposition(base, freqs).measure
        m_scaled = spectral_decomposition(scaled, freqs).measure
        assert np.max(np.abs(m_base - m_scaled)) < 1e-8


class TestStationaryBootstrap:
    def test_values_come_from_original(self):
        rng = np.random.default_rng(0)
        series = rng.normal(size=97)
        resample = stationary_bootstrap(series, 5.0, rng)
        assert resample.shape == series.shape
        assert np.isin(resample, series).all()

    def test_infinite_block_is_rotation(self):
        rng = np.random.default_rng(3)
        idx = stationary_bootstrap_indices(50, 1e12, rng)
        start = idx[0]
        assert_allclose(idx, (start + np.arange(50)) % 50)

    def test_mean_block_length(self):
        # 10,000 draws; blocks counted as maximal consecutive index runs.
        n, expected = 2000, 10.0
        counts = np.empty(10_000)
        rng = np.random.default_rng(123)
        for k in range(counts.size):
            idx = stationary_bootstrap_indices(n, expected, rng)
            breaks = np.count_nonzero(idx[1:] != (idx[:-1] + 1) % n)
            counts[k] = n / (breaks + 1.0)
        assert abs(counts.mean() - expected) / expected < 0.05

    def test_block_length_one_is_iid_resampling(self):
        rng = np.random.default_rng(11)
        idx = stationary_bootstrap_indices(5000, 1.0, rng)
        # Every position restarts: indices should look uniform, not serial.
        serial = np.mean(idx[1:] == (idx[:-1] + 1) % 5000)
        assert serial < 0.01

    def test_bad_block_length(self):
        with pytest.raises(InvalidInputError):
            stationary_bootstrap_indices(10, 0.5, np.random.default_rng(0))


class TestThresholds:
    def test_alpha_half_is_median(self):
        rng = np.random.default_rng(17)
        x = rng.normal(size=200)
        y = rng.normal(size=200)
        cfg = GcBootstrapConfig(n_replicates=100, alpha=0.5, seed=21)
        thresholds = bootstrap_threshold_unconditional(x, y, cfg)
        assert thresholds.pointwise == float(np.median(thresholds.medians))

    def test_monotone_in_alpha_and_bonferroni_dominates(self):
        rng = np.random.default_rng(18)
        x = rng.normal(size=200)
        y = rng.normal(size=200)
        previous = -np.inf
        for alpha in (0.5, 0.25, 0.05):
            cfg = GcBootstrapConfig(n_replicates=150, alpha=alpha, seed=5)
            thresholds = bootstrap_threshold_unconditional(x, y, cfg)
            assert thresholds.pointwise >= previous
            assert thresholds.bonferroni >= thresholds.pointwise
            previous = thresholds.pointwise

    def test_deterministic_under_seed_and_threads(self):
        rng = np.random.default_rng(40)
        x = rng.normal(size=250)
        y = rng.normal(size=250)
        cfg = GcBootstrapConfig(n_replicates=120, seed=31)
        one = bootstrap_threshold_unconditional(x, y, cfg, threads=1)
        four = bootstrap_threshold_unconditional(x, y, cfg, threads=4)
        assert one.pointwise == four.pointwise
        assert one.bonferroni == four.bonferroni
        assert_allclose(one.medians, four.medians, rtol=0, atol=0)
        other = bootstrap_threshold_unconditional(
            x, y, GcBootstrapConfig(n_replicates=120, seed=32)
        )
        assert other.pointwise != one.pointwise


class TestUnconditionalInference:
    def test_detects_lagged_cause(self):
        rng = np.random.default_rng(2024)
        x = rng.normal(size=400)
        y = np.empty(400)
        y[0] = rng.normal()
        y[1:] = 0.8 * x[:-1] + rng.normal(size=399)
        result = unconditional_gc_spectrum(
            x, y, GcBootstrapConfig(n_replicates=300, seed=7)
        )
        assert result.significant_bonferroni.any()
        # No feedback: the reverse direction stays below the familywise bar.
        reverse = unconditional_gc_spectrum(
            y, x, GcBootstrapConfig(n_replicates=300, seed=8)
        )
        assert not reverse.significant_bonferroni.any()

    def test_result_shapes(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=301)
        y = rng.normal(size=301)
        result = unconditional_gc_spectrum(
            x, y, GcBootstrapConfig(n_replicates=100, seed=0)
        )
        assert result.frequencies.shape == (150,)
        assert result.estimate.shape == (150,)
        assert result.conditioning_name is None
        assert result.significant_pointwise.dtype == bool

    def test_length_mismatch(self):
        with pytest.raises(AlignmentError):
            unconditional_gc_spectrum(
                np.zeros(100) + np.arange(100),
                np.arange(101),
                GcBootstrapConfig(n_replicates=100),
            )

    def test_zero_variance_rejected(self):
        with pytest.raises(DegenerateInputError):
            unconditional_gc_spectrum(
                np.ones(200),
                np.arange(200.0),
                GcBootstrapConfig(n_replicates=100),
            )


class TestConditional:
    def test_irrelevant_conditioning_matches_unconditional(self):
        rng = np.random.default_rng(606)
        coef = np.array([[[0.3, 0.0], [0.5, 0.4]]])
        data = simulate_pair(coef, np.eye(2), 2000, rng)
        w = rng.normal(size=2000)
        uncond, _ = (
            spectral_decomposition(
                fit_var(data, max_order=4), fourier_frequencies(2000)
            ).measure,
            None,
        )
        cond = conditional_decomposition(data[:, 0], data[:, 1], w).measure
        assert np.max(np.abs(cond - uncond)) < 0.08

    def test_mediated_chain_is_not_conditionally_significant(self):
        # x -> w -> y: unconditional causality is there, conditional is not.
        rng = np.random.default_rng(77)
        T = 800
        x = rng.normal(size=T)
        w = np.zeros(T)
        y = np.zeros(T)
        for t in range(1, T):
            w[t] = 0.8 * x[t - 1] + 0.3 * w[t - 1] + rng.normal() * 0.5
            y[t] = 0.8 * w[t - 1] + rng.normal() * 0.5
        cfg = GcBootstrapConfig(n_replicates=200, seed=13)
        uncond = unconditional_gc_spectrum(x, y, cfg)
        assert uncond.significant_bonferroni.any()
        cond = conditional_gc_spectrum(x, y, w, cfg)
        assert not cond.significant_bonferroni.any()
        assert cond.conditioning_name == "conditioning"

    def test_direct_link_survives_conditioning(self):
        rng = np.random.default_rng(88)
        T = 800
        x = rng.normal(size=T)
        w = rng.normal(size=T)
        y = np.zeros(T)
        for t in range(1, T):
            y[t] = 0.7 * x[t - 1] + 0.3 * w[t - 1] + rng.normal() * 0.5
        cfg = GcBootstrapConfig(n_replicates=200, seed=14)
        cond = conditional_gc_spectrum(x, y, w, cfg)
        assert cond.significant_bonferroni.any()

    def test_cause_explained_by_conditioning_is_degenerate(self):
        rng = np.random.default_rng(5)
        w = rng.normal(size=400)
        y = rng.normal(size=400)
        with pytest.raises(DegenerateInputError):
            conditional_decomposition(w.copy(), y, w)

    def test_zero_variance_cause_rejected(self):
        rng = np.random.default_rng(6)
        with pytest.raises(DegenerateInputError):
            conditional_gc_spectrum(
                np.full(300, 2.5),
                rng.normal(size=300),
                rng.normal(size=300),
                GcBootstrapConfig(n_replicates=100),
            )


class TestConfig:
    def test_collects_all_problems(self):
        with pytest.raises(ConfigError) as excinfo:
            GcBootstrapConfig(n_replicates=10, alpha=0.9, max_var_order=0, seed=-1)
        assert set(excinfo.value.fields) == {
            "n_replicates",
            "alpha",
            "max_var_order",
            "seed",
        }

    def test_default_block_length(self):
        cfg = GcBootstrapConfig()
        assert cfg.block_length(400) == 8.0  # ceil(400 ** (1/3))
        assert cfg.block_length(27) == 3.0
        assert GcBootstrapConfig(expected_block_length=12.5).block_length(400) == 12.5
