import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughlab.area_analysis import (
    _bilinear,
    _boundary_fast,
    _two_sided,
    _weighted,
    area_decomposition,
    boundary_term,
    fit_power_law,
    holder_exponent_estimate,
    iterated_integral_discrete,
    levy_area_decomposition,
    levy_area_discrete,
    ordered_area_spectral,
    sector_increment,
    skeleton_area_sector,
    variance_scan,
    ScanResult,
)
from roughlab.gaussian_field import (
    FrequencyGrid,
    SamplePath,
    fbm_from_spectrum,
    normalization_constant,
    sample_spectral_noise,
)


def _path(points, times=None):
    pts = np.asarray(points, dtype=float)
    t = np.arange(len(pts), dtype=float) if times is None else np.asarray(times, dtype=float)
    return SamplePath(t, pts)


# ---------------------------------------------------------------- discrete areas

def test_straight_line_has_no_area():
    p = _path([[u, u] for u in np.linspace(0, 1, 11)])
    assert levy_area_discrete(p, 0, 10) == pytest.approx(0.0, abs=1e-15)


def test_circle_area_and_orientation():
    u = np.linspace(0, 2 * math.pi, 20001)
    p = SamplePath(u, np.column_stack([np.cos(u), np.sin(u)]))
    # counter-clockwise loop: int x2 dx1 - int x1 dx2 = -2 * (enclosed area)
    assert levy_area_discrete(p, 0, 2 * math.pi) == pytest.approx(-2 * math.pi, rel=1e-7)
    q = SamplePath(u, np.column_stack([np.cos(u), -np.sin(u)]))
    assert levy_area_discrete(q, 0, 2 * math.pi) == pytest.approx(2 * math.pi, rel=1e-7)


def test_l_shape_iterated_integrals():
    p = _path([[0, 0], [1, 0], [1, 1]])
    assert iterated_integral_discrete(p, 0, 2, 0, 1) == pytest.approx(1.0)
    assert iterated_integral_discrete(p, 0, 2, 1, 0) == pytest.approx(0.0)
    assert levy_area_discrete(p, 0, 2) == pytest.approx(-1.0)
    assert iterated_integral_discrete(p, 0, 2, 0, 0) == pytest.approx(0.5)


def test_discrete_area_interior_interval():
    p = _path([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert levy_area_discrete(p, 0.5, 2.5) == pytest.approx(levy_area_discrete(
        _path([[0.5, 0], [1, 0], [1, 1], [0.5, 1]], [0.5, 1, 2, 2.5]), 0.5, 2.5))
    with pytest.raises(ValueError):
        levy_area_discrete(p, 1.0, 1.0)
    with pytest.raises(ValueError):
        levy_area_discrete(p, -1.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=2, max_size=12))
def test_swapping_components_negates_area(points):
    pts = np.array(points)
    p = _path(pts)
    q = _path(pts[:, ::-1])
    t1 = len(pts) - 1
    assert levy_area_discrete(q, 0, t1) == -levy_area_discrete(p, 0, t1)


# ---------------------------------------------------------------- spectral decomposition

@pytest.fixture(scope="module")
def pair():
    grid = FrequencyGrid.from_spacing(0.5, 128)
    noise = sample_spectral_noise(grid, 2, 7)
    return grid, noise


def test_decomposition_reproduces_ordered_kernel(pair):
    grid, noise = pair
    n1, n2 = noise.component(0), noise.component(1)
    for alpha in (0.2, 0.35):
        dec = area_decomposition(n1, n2, 0.2, 0.9, alpha)
        assert dec.reconstruct() == pytest.approx(ordered_area_spectral(n1, n2, 0.2, 0.9, alpha), abs=1e-12)


def test_reconstruction_against_discrete_path(pair):
    grid, noise = pair
    alpha = 0.3
    times = np.linspace(0.0, 1.0, 4097)
    path = fbm_from_spectrum(noise, times, alpha)
    dec = levy_area_decomposition(noise, 0.0, 1.0, alpha)
    assert dec.reconstruct() == pytest.approx(levy_area_discrete(path, 0.0, 1.0), abs=2e-3)


def test_skeleton_differences_match_increment_off_antidiagonal(pair):
    # the minus sector has no resonant term, so its increment is a skeleton difference
    grid, noise = pair
    n1, n2 = noise.component(0), noise.component(1)
    inc = sector_increment(n1, n2, "minus", 0.3, 0.8, 0.3)
    diff = skeleton_area_sector(n1, n2, "minus", 0.8, 0.3) - skeleton_area_sector(n1, n2, "minus", 0.3, 0.3)
    assert inc == pytest.approx(diff, abs=1e-10)


def test_plus_increment_resonant_term(pair):
    grid, noise = pair
    n1, n2 = noise.component(0), noise.component(1)
    alpha, s, t = 0.3, 0.3, 0.8
    inc = sector_increment(n1, n2, "plus", s, t, alpha)
    skel = skeleton_area_sector(n1, n2, "plus", t, alpha) - skeleton_area_sector(n1, n2, "plus", s, alpha)
    x = grid.two_sided_modes
    U1 = _weighted(grid, n1.amplitudes[0], alpha)
    U2 = _weighted(grid, n2.amplitudes[0], alpha)
    n = x.size
    resonant = sum((t - s) * U1[i] * U2[n - 1 - i] / (1j * x[n - 1 - i]) for i in range(n))
    assert inc == pytest.approx(skel + resonant.real, abs=1e-10)


def test_boundary_vanishes_on_empty_interval(pair):
    grid, noise = pair
    assert boundary_term(noise.component(0), noise.component(1), 0.4, 0.4, 0.2) == pytest.approx(0.0, abs=1e-14)


def test_fast_boundary_matches_bilinear(pair):
    grid, noise = pair
    alpha = 0.25
    u1 = noise.amplitudes[0] * grid.modes ** (0.5 - alpha)
    u2 = noise.amplitudes[1] * grid.modes ** (0.5 - alpha)
    fast = _boundary_fast(grid, 0.1, 0.6, u1, u2)
    slow = _bilinear("boundary", grid, 0.1, 0.6, _two_sided(u1), _two_sided(u2))
    assert fast == pytest.approx(slow.real[0], abs=1e-10)


def test_sector_validation(pair):
    grid, noise = pair
    with pytest.raises(ValueError):
        skeleton_area_sector(noise.component(0), noise.component(1), "diag", 1.0, 0.2)
    other = sample_spectral_noise(FrequencyGrid.from_spacing(0.25, 128), 1, 0)
    with pytest.raises(ValueError):
        boundary_term(noise.component(0), other, 0, 1, 0.2)
    big = sample_spectral_noise(FrequencyGrid.from_spacing(1.0, 4096), 2, 0)
    with pytest.raises(ValueError):
        sector_increment(big.component(0), big.component(1), "plus", 0, 1, 0.2)


# ---------------------------------------------------------------- fits and scans

def test_fit_power_law_examples():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    e, se, r2 = fit_power_law(list(zip(x, 3 * x**2)))
    assert e == pytest.approx(2.0, abs=1e-12) and r2 == pytest.approx(1.0)
    e, _, _ = fit_power_law(list(zip(x, np.full(4, 5.0))))
    assert e == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(1)
    xs = np.logspace(0, 3, 30)
    e, _, _ = fit_power_law(list(zip(xs, xs**0.8 * (1 + 0.01 * rng.standard_normal(30)))))
    assert e == pytest.approx(0.8, abs=0.05)
    with pytest.raises(ValueError):
        fit_power_law([(1, 1), (2, 2)])


def test_scan_result_validation(tmp_path):
    with pytest.raises(ValueError):
        ScanResult([], 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        ScanResult([(2, 1, 0), (1, 1, 0)], 0.0, 0.0, 1.0)
    r = ScanResult([(1.0, 2.0, 0.1), (2.0, 4.0, 0.2), (4.0, 8.0, 0.4)], 1.0, 0.0, 1.0, {"q": "x"})
    r.to_csv(tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text().splitlines()[1] == "1.0,2.0,0.1"
    assert r.local_slope(0, 2) == pytest.approx(1.0)


def test_variance_scan_deterministic_and_validated():
    grid = FrequencyGrid.from_spacing(4.0, 64)
    kw = dict(grid=grid)
    a = variance_scan("a_plus", 0.2, [64, 128, 256], "cutoff", 100, 3, **kw)
    b = variance_scan("a_plus", 0.2, [64, 128, 256], "cutoff", 100, 3, **kw)
    assert a.points == b.points
    c = variance_scan("a_plus", 0.2, [64, 128, 256], "cutoff", 100, 3, workers=2, batch=30, **kw)
    np.testing.assert_allclose(np.array(a.points), np.array(c.points), rtol=1e-12)
    with pytest.raises(ValueError):
        variance_scan("a_plus", 0.2, [63, 128, 256], "cutoff", 100, 3, **kw)
    with pytest.raises(ValueError):
        variance_scan("area", 0.2, [64, 128, 256], "cutoff", 100, 3, **kw)
    with pytest.raises(ValueError):
        variance_scan("a_plus", 0.2, [64, 128, 256], "cutoff", 10, 3, **kw)
    with pytest.raises(ValueError):
        variance_scan("a_plus", 0.2, [64, 256], "cutoff", 100, 3, **kw)


def test_full_area_variance_matches_quadrature():
    # Var of the normalized Levy area over [0, tau] vs the spectral oracle for the same grid
    alpha, tau = 0.3, 0.5
    grid = FrequencyGrid.from_spacing(2.0, 1024)
    res = variance_scan("full_area", alpha, [0.25, 0.5, 1.0], "increment", 400, 0, grid=grid)
    est, se = res.points[1][1], res.points[1][2]
    xi = grid.two_sided_modes
    w = np.abs(xi) ** (1 - 2 * alpha) * grid.spacing
    x1, x2 = xi[:, None], xi[None, :]
    sig = x1 + x2
    win = np.where(sig == 0, tau, (np.exp(1j * tau * sig) - 1) / np.where(sig == 0, 1, 1j * sig))
    k = (win - (np.exp(1j * tau * x1) - 1) / (1j * x1)) / (1j * x2)
    anti = k - k.T
    exact = np.sum(np.abs(anti) ** 2 * w[:, None] * w[None, :]) / (2 * math.pi * normalization_constant(alpha)) ** 2
    assert est == pytest.approx(exact, abs=4 * se)


# ---------------------------------------------------------------- Holder

def test_holder_line_and_errors():
    t = np.linspace(0, 1, 1024)
    assert holder_exponent_estimate(SamplePath(t, t)) == pytest.approx(1.0, abs=0.05)
    with pytest.raises(ValueError):
        holder_exponent_estimate(SamplePath(t, np.zeros_like(t)))
    with pytest.raises(ValueError):
        holder_exponent_estimate(SamplePath(t[:32], t[:32]))
    with pytest.raises(ValueError):
        holder_exponent_estimate(SamplePath(t**2, t))


@pytest.mark.slow
@pytest.mark.parametrize("alpha,lo,hi", [(0.5, 0.4, 0.55), (0.25, 0.17, 0.3)])
def test_holder_fbm_calibration(alpha, lo, hi):
    n = 2**14
    dt = 1.0 / (n - 1)
    grid = FrequencyGrid(math.pi / dt, n)
    path = fbm_from_spectrum(sample_spectral_noise(grid, 1, 0), np.linspace(0, 1, n), alpha, tail=True)
    assert lo <= holder_exponent_estimate(path) <= hi
