import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import gamma

from roughlab.gaussian_field import (
    CutoffSpec,
    FrequencyGrid,
    HurstIndex,
    SamplePath,
    SpectralField,
    check_alpha,
    decompose_scales,
    empirical_correlation,
    fbm_covariance,
    fbm_from_spectrum,
    fbm_increment_batch,
    mode_amplitudes,
    normalization_closed_form,
    normalization_constant,
    one_minus_cos_integral,
    pairing_count,
    sample_spectral_noise,
    standard_complex_normals,
    stationary_field,
    tail_variance,
    wick_moment,
)


# ---------------------------------------------------------------- types

def test_hurst_index_bounds():
    assert float(HurstIndex(0.3)) == 0.3
    for bad in (0.0, 1.0, -0.1, 1.2, float("nan")):
        with pytest.raises(ValueError):
            HurstIndex(bad)
    with pytest.raises(ValueError):
        HurstIndex(0.3).require_window(0.125, 0.25)
    assert HurstIndex(0.2).require_window(0.125, 0.25) == 0.2


def test_grid_half_integer_modes():
    g = FrequencyGrid(8.0, 4)
    assert g.spacing == 2.0
    np.testing.assert_allclose(g.modes, [1.0, 3.0, 5.0, 7.0])
    np.testing.assert_allclose(g.two_sided_modes, [-7, -5, -3, -1, 1, 3, 5, 7])
    assert np.all(g.modes > 0) and g.modes.max() <= g.xi_max
    with pytest.raises(ValueError):
        FrequencyGrid(0.0, 4)
    with pytest.raises(ValueError):
        FrequencyGrid(1.0, 0)


def test_sample_path_validation(tmp_path):
    with pytest.raises(ValueError):
        SamplePath(np.array([0.0, 0.0]), np.zeros(2))
    with pytest.raises(ValueError):
        SamplePath(np.array([0.0, 1.0]), np.array([0.0, np.inf]))
    p = SamplePath(np.array([0.0, 0.5, 1.0]), np.array([[0.0, 1.0], [0.1, 2.0], [1 / 3, -1e-17]]), 0.3, 7)
    p.to_csv(tmp_path / "p.csv")
    q = SamplePath.from_csv(tmp_path / "p.csv")
    assert np.array_equal(p.values, q.values) and np.array_equal(p.times, q.times)
    assert q.alpha == 0.3 and q.seed == 7


# ---------------------------------------------------------------- normalization

@pytest.mark.parametrize("alpha", [0.05, 0.2, 0.25, 0.3, 0.5, 0.75, 0.95])
def test_normalization_matches_closed_form(alpha):
    assert normalization_constant(alpha) == pytest.approx(normalization_closed_form(alpha), rel=1e-10)


def test_normalization_brownian_case():
    # alpha = 1/2: int |e^{iu} - 1|^2 u^-2 du / (2 pi) = 1
    assert normalization_constant(0.5) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        normalization_constant(1.2)


def test_one_minus_cos_integral_scaling():
    p = 1.8
    base = one_minus_cos_integral(1.0, p)
    ref, _ = integrate.quad(lambda u: (1 - math.cos(u)) * u**-p, 0, 200, limit=400)
    ref += integrate.quad(lambda u: u**-p, 200, np.inf)[0]  # mean of 1 - cos beyond 200
    assert base == pytest.approx(ref, rel=1e-3)
    assert one_minus_cos_integral(0.5, p) == pytest.approx(0.5 ** (p - 1) * base, rel=1e-10)


# ---------------------------------------------------------------- noise

def test_noise_deterministic_and_prefix_stable():
    g = FrequencyGrid(10.0, 50)
    a = sample_spectral_noise(g, 2, 3)
    b = sample_spectral_noise(g, 2, 3)
    assert np.array_equal(a.amplitudes, b.amplitudes)
    big = sample_spectral_noise(FrequencyGrid(20.0, 100), 2, 3)
    assert np.array_equal(big.amplitudes[:, :50], a.amplitudes)


def test_noise_independent_across_seeds_and_components():
    g = FrequencyGrid(100.0, 4000)
    a = sample_spectral_noise(g, 2, 0)
    b = sample_spectral_noise(g, 2, 1)
    bound = 3 / math.sqrt(g.n_modes)
    assert empirical_correlation(a.amplitudes[0], b.amplitudes[0]) < bound
    assert empirical_correlation(a.amplitudes[0], a.amplitudes[1]) < bound


def test_mode_variance_equals_spacing():
    g = FrequencyGrid(3.0, 1)
    vals = mode_amplitudes(g, range(20000), 0)[:, 0]
    assert np.mean(np.abs(vals) ** 2) == pytest.approx(g.spacing, rel=0.03)
    z = standard_complex_normals(0, 0, 100000)
    assert np.mean(z.real**2) == pytest.approx(0.5, rel=0.02)
    assert abs(np.mean(z.real * z.imag)) < 0.01


def test_spectral_field_json_roundtrip():
    f = sample_spectral_noise(FrequencyGrid(5.0, 7), 2, 11)
    g = SpectralField.from_json(f.to_json())
    assert np.array_equal(f.amplitudes, g.amplitudes) and g.seed == 11
    assert np.array_equal(f.two_sided(0)[:7], np.conj(f.amplitudes[0][::-1]))


# ---------------------------------------------------------------- fBm sampling

def test_fbm_starts_at_zero():
    noise = sample_spectral_noise(FrequencyGrid(50.0, 200), 1, 5)
    p = fbm_from_spectrum(noise, np.array([0.0, 0.3, 1.0]), 0.3)
    assert np.all(p.values[0] == 0.0)
    p_tail = fbm_from_spectrum(noise, np.array([0.0, 0.3, 1.0]), 0.3, tail=True)
    assert np.all(p_tail.values[0] == 0.0)
    assert not np.array_equal(p.values, p_tail.values)


def test_batch_matches_single_path():
    g = FrequencyGrid(40.0, 300)
    times = np.array([0.0, 0.25, 0.7])
    batch = fbm_increment_batch(g, [4, 5], 0.4, times, component=1, tail=True)
    for row, seed in zip(batch, [4, 5]):
        p = fbm_from_spectrum(sample_spectral_noise(g, 2, seed), times, 0.4, tail=True)
        np.testing.assert_allclose(row, p.values[:, 1], atol=1e-12)


def test_stationary_field_differences():
    noise = sample_spectral_noise(FrequencyGrid(30.0, 300), 1, 2)
    times = np.array([0.0, 0.4, 0.9])
    b = fbm_from_spectrum(noise, times, 0.3).values[:, 0]
    phi = stationary_field(noise, times, 0.3).values[:, 0]
    np.testing.assert_allclose(np.diff(b), np.diff(phi), atol=1e-12)


def test_discrete_variance_plus_tail_is_exact():
    # the exact variance of the truncated sum plus the tail variance recovers |t - s|^{2 alpha}
    alpha, g = 0.3, FrequencyGrid.from_spacing(0.1, 4096)
    xi = g.modes
    c = normalization_constant(alpha)
    for tau in (0.25, 1.0):
        disc = 2 * np.sum(np.abs(np.exp(1j * tau * xi) - 1) ** 2 * xi ** (-1 - 2 * alpha)) * g.spacing
        total = disc / (2 * math.pi * c) + 2 * tail_variance(g.xi_max, alpha)
        assert total == pytest.approx(tau ** (2 * alpha), abs=2e-3)


def test_brownian_covariance_monte_carlo():
    g = FrequencyGrid.from_spacing(0.1, 4096)
    vals = fbm_increment_batch(g, range(4000), 0.5, [0.0, 0.5, 1.0], tail=True)
    emp = np.mean(vals[:, 1] * vals[:, 2])
    assert emp == pytest.approx(0.5, abs=4 * math.sqrt(0.5 * 1 + 0.25) / math.sqrt(4000))


@pytest.mark.parametrize("s,t,alpha,expected", [
    (1.0, 1.0, 0.3, 1.0),
    (1.0, 2.0, 0.5, 1.0),
    (1.0, 2.0, 0.25, 2**-0.5),
])
def test_fbm_covariance_values(s, t, alpha, expected):
    assert fbm_covariance(s, t, alpha) == pytest.approx(expected, rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.01, 0.99))
def test_fbm_covariance_symmetric_and_cauchy_schwarz(s, t, a):
    c = fbm_covariance(s, t, a)
    assert c == fbm_covariance(t, s, a)
    assert c <= math.sqrt(fbm_covariance(s, s, a) * fbm_covariance(t, t, a)) + 1e-12


# ---------------------------------------------------------------- scales

def test_cutoff_partition_of_unity():
    cut = CutoffSpec(2.0, 6)
    xi = np.linspace(-70, 70, 2001)
    total = sum(cut.slice_multiplier(j, xi) for j in range(cut.rho + 1))
    np.testing.assert_allclose(total, cut.total_multiplier(xi), atol=1e-14)
    inner = np.abs(xi) <= 2.0 ** (cut.rho - 1)
    np.testing.assert_allclose(total[inner], 1.0, atol=1e-12)
    assert cut.chi0(0.0) == 1.0 and cut.chi1(0.0) == 0.0


def test_slices_supported_between_neighbouring_scales():
    cut = CutoffSpec(2.0, 5)
    xi = np.linspace(0, 100, 5001)
    for j in range(1, cut.rho + 1):
        m = cut.slice_multiplier(j, xi)
        assert np.all(m[xi >= 2.0 ** (j + 1)] == 0.0)
        assert np.all(m[xi <= 2.0 ** (j - 1)] == 0.0)


def test_cutoff_rejects_bad_support():
    with pytest.raises(ValueError):
        CutoffSpec(1.0, 2)
    with pytest.raises(ValueError):
        CutoffSpec(2.0, 2, chi0_support=3.0)
    with pytest.raises(ValueError):
        CutoffSpec(2.0, 1.5)


def test_decompose_scales():
    g = FrequencyGrid(64.0, 2048)
    noise = sample_spectral_noise(g, 1, 0)
    cut = CutoffSpec(2.0, 5)
    slices = decompose_scales(noise, cut)
    assert len(slices) == 6
    total = sum(s.amplitudes for s in slices)
    np.testing.assert_allclose(total, noise.amplitudes * cut.total_multiplier(g.modes), atol=1e-14)
    np.testing.assert_array_equal(slices[2].amplitudes[0][g.modes > 8.0], 0.0)
    only = decompose_scales(noise, CutoffSpec(2.0, 0))
    np.testing.assert_allclose(only[0].amplitudes, noise.amplitudes * CutoffSpec(2.0, 0).chi0(g.modes))
    with pytest.raises(ValueError):
        decompose_scales(sample_spectral_noise(FrequencyGrid(64.0, 8), 1, 0), cut)
    with pytest.raises(ValueError):
        decompose_scales(noise, CutoffSpec(2.0, 7))


# ---------------------------------------------------------------- Wick

def test_wick_examples():
    c = np.array([[2.0, 0.3, 0.1, 0.4], [0.3, 1.0, 0.2, 0.5], [0.1, 0.2, 3.0, 0.6], [0.4, 0.5, 0.6, 1.5]])
    assert wick_moment(c, [0, 1]) == c[0, 1]
    assert wick_moment(c, [0, 1, 2, 3]) == pytest.approx(c[0, 1] * c[2, 3] + c[0, 2] * c[1, 3] + c[0, 3] * c[1, 2])
    assert wick_moment(np.eye(1), [0, 0, 0, 0]) == 3.0
    assert wick_moment(np.eye(1), [0] * 6) == 15.0
    with pytest.raises(ValueError):
        wick_moment(c, [0, 1, 2])
    with pytest.raises(ValueError):
        wick_moment(np.eye(1), [0] * 14)
    assert pairing_count(6) == 15


def test_wick_against_monte_carlo():
    rng = np.random.default_rng(0)
    c = np.array([[1.0, 0.6], [0.6, 2.0]])
    x = rng.multivariate_normal([0, 0], c, size=10**6)
    emp = np.mean(x[:, 0] ** 2 * x[:, 1] ** 2)
    assert emp == pytest.approx(wick_moment(c, [0, 0, 1, 1]), rel=0.02)


def test_check_alpha_window():
    assert check_alpha(0.2, 0.125, 0.25) == 0.2
    with pytest.raises(ValueError):
        check_alpha(0.1, 0.125, 0.25)


def test_closed_form_reference():
    a = 0.3
    assert normalization_closed_form(a) == pytest.approx(1 / (gamma(1 + 2 * a) * math.sin(math.pi * a)))
