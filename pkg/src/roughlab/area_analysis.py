"""Lévy area of sampled paths and its Fourier-sector decomposition.

For two independent fBm components with amplitudes u_c(xi) = dW_c(xi) |xi|^(1/2-alpha),
the ordered iterated integral

    A(s,t) = int_s^t dB_1(t1) int_s^t1 dB_2(t2)

is a double spectral sum.  Splitting the (xi1, xi2) plane into the sectors
|xi1| <= |xi2| ("plus") and |xi2| < |xi1| ("minus") and integrating the
highest frequency innermost gives

    2 pi c_alpha A(s,t) = dA_plus - dA_minus + boundary

with stationary skeleton integrals A_plus(t), A_minus(t) and a boundary term
built from products of first-order integrals.  All sums here run over the
two-sided grid, negative modes carrying conjugate amplitudes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .gaussian_field import (
    FrequencyGrid,
    SamplePath,
    SpectralField,
    check_alpha,
    mode_amplitudes,
    normalization_constant,
)

SECTORS = ("plus", "minus")
QUANTITIES = ("a_plus", "a_minus", "boundary", "full_area")
MAX_PAIR_MODES = 2048


# ---------------------------------------------------------------- sampled paths

def _segment_points(path: SamplePath, s, t):
    if not s < t:
        raise ValueError("need s < t")
    times = path.times
    if s < times[0] or t > times[-1]:
        raise ValueError("[s, t] outside the path's time range")
    inside = (times > s) & (times < t)
    n_inside = np.count_nonzero((times >= s) & (times <= t))
    if n_inside < 2:
        raise ValueError("fewer than two samples in [s, t]")
    ends = np.array([np.interp(s, times, path.values[:, k]) for k in range(path.d)])
    endt = np.array([np.interp(t, times, path.values[:, k]) for k in range(path.d)])
    return np.vstack([ends, path.values[inside], endt])


def iterated_integral_discrete(path: SamplePath, s, t, i, j) -> float:
    """int_s^t (x_i(u) - x_i(s)) dx_j(u) for the piecewise-linear interpolation (0-based i, j)."""
    pts = _segment_points(path, s, t)
    xi = pts[:, i] - pts[0, i]
    dxj = np.diff(pts[:, j])
    return float(np.sum(0.5 * (xi[:-1] + xi[1:]) * dxj))


def levy_area_discrete(path: SamplePath, s, t) -> float:
    """int (x2 - x2(s)) dx1 - int (x1 - x1(s)) dx2 over [s, t], exact for piecewise-linear paths.

    Equals -2 x (signed enclosed area) for a closed counter-clockwise loop.
    """
    if path.d != 2:
        raise ValueError("Lévy area needs a two-component path")
    pts = _segment_points(path, s, t)
    x = pts[:, 0] - pts[0, 0]
    y = pts[:, 1] - pts[0, 1]
    terms = 0.5 * (y[:-1] + y[1:]) * np.diff(x) - 0.5 * (x[:-1] + x[1:]) * np.diff(y)
    return float(np.sum(terms))


# ---------------------------------------------------------------- spectral sums

def _two_sided(amp: np.ndarray) -> np.ndarray:
    """Positive-mode amplitudes (..., n) -> two-sided (..., 2n), negative half mirrored."""
    return np.concatenate([np.conj(amp[..., ::-1]), amp], axis=-1)


def _scale_index(n):
    # |xi| rank of each two-sided position
    k = np.arange(n)
    return np.concatenate([k[::-1], k])


def _weighted(grid: FrequencyGrid, amp, alpha):
    x = grid.two_sided_modes
    return _two_sided(np.asarray(amp)) * np.abs(x) ** (0.5 - alpha)


def _window(x, s, t):
    """(e^{i t x} - e^{i s x}) / (i x), with the limit t - s at x = 0."""
    out = np.empty(x.shape, dtype=np.complex128)
    nz = x != 0
    xs = x[nz]
    out[nz] = (np.exp(1j * t * xs) - np.exp(1j * s * xs)) / (1j * xs)
    out[~nz] = t - s
    return out


def _kernel_rows(part, grid, s, t, rows):
    """Rows `rows` of the two-sided pair kernel K[i, j] (xi1 = x[i], xi2 = x[j])."""
    x = grid.two_sided_modes
    k = _scale_index(grid.n_modes)
    x1 = x[rows][:, None]
    x2 = x[None, :]
    plus = k[rows][:, None] <= k[None, :]
    if part == "a_plus":
        return np.where(plus, _window(x1 + x2, s, t) / (1j * x2), 0.0)
    if part == "a_minus":
        return np.where(~plus, _window(x1 + x2, s, t) / (1j * x1), 0.0)
    if part == "a_plus_skeleton":
        sig = x1 + x2
        safe = np.where(sig == 0, 1.0, sig)
        val = np.exp(1j * t * sig) / ((1j * safe) * (1j * x2))
        return np.where(plus & (sig != 0), val, 0.0)
    if part == "a_minus_skeleton":
        sig = x1 + x2
        safe = np.where(sig == 0, 1.0, sig)
        return np.where(~plus, np.exp(1j * t * sig) / ((1j * safe) * (1j * x1)), 0.0)
    if part == "boundary":
        w1 = _window(x1, s, t)
        bp = -w1 * np.exp(1j * s * x2) / (1j * x2)
        bm = _window(x2, s, t) * np.exp(1j * t * x1) / (1j * x1)
        return np.where(plus, bp, bm)
    if part == "ordered":
        # exact int_s^t dt1 e^{i t1 x1} int_s^t1 dt2 e^{i t2 x2}
        return (_window(x1 + x2, s, t) - np.exp(1j * s * x2) * _window(x1, s, t)) / (1j * x2)
    raise ValueError(f"unknown kernel part {part!r}")


def _bilinear(part, grid, s, t, U1, U2, antisymmetric=False, block=256):
    """sum_ij U1[r, i] K[i, j] U2[r, j] for each row r (antisymmetric: K - K^T)."""
    U1 = np.atleast_2d(U1)
    U2 = np.atleast_2d(U2)
    size = 2 * grid.n_modes
    acc = np.zeros((U1.shape[0], size), dtype=np.complex128)
    acc_t = np.zeros_like(acc) if antisymmetric else None
    for lo in range(0, size, block):
        rows = np.arange(lo, min(lo + block, size))
        K = _kernel_rows(part, grid, s, t, rows)
        acc += U1[:, rows] @ K
        if antisymmetric:
            # sum_ij U1_i U2_j K_ji = sum_ij U2_i K_ij U1_j
            acc_t += U2[:, rows] @ K
    val = np.sum(acc * U2, axis=1)
    if antisymmetric:
        val = val - np.sum(acc_t * U1, axis=1)
    return val


def _ordered_fft(grid, s, t, U1, U2):
    """Ordered-integral kernel sum in O(n log n).

    The double sum over (x1, x2) of U1 U2 (e^{i t sigma} - e^{i s sigma})/(i sigma)/(i x2)
    only depends on sigma = x1 + x2, a multiple of the spacing, so it is a
    convolution; the remaining term factorizes.
    """
    U1 = np.atleast_2d(U1)
    U2 = np.atleast_2d(U2)
    n = grid.n_modes
    h = grid.spacing
    x = grid.two_sided_modes
    V2 = U2 / (1j * x)
    size = 1 << int(math.ceil(math.log2(4 * n)))
    conv = np.fft.ifft(np.fft.fft(U1, size) * np.fft.fft(V2, size))[:, : 4 * n - 1]
    sigma = (np.arange(4 * n - 1) - 2 * n + 1) * h
    resonant = conv @ _window(sigma, s, t)
    factor = (U1 @ _window(x, s, t)) * (V2 @ np.exp(1j * s * x))
    return resonant - factor


def _real_checked(val, what):
    """Real part of a Hermitian-symmetric sum, refusing a non-negligible imaginary residue."""
    val = np.asarray(val)
    scale = max(float(np.max(np.abs(val), initial=0.0)), 1e-300)
    if np.max(np.abs(val.imag), initial=0.0) > 1e-10 * scale:
        raise ArithmeticError(f"{what}: imaginary residue breaks Hermitian symmetry")
    return val.real


def _check_pair(noise1: SpectralField, noise2: SpectralField):
    if noise1.grid != noise2.grid:
        raise ValueError("noises live on different grids")
    return noise1.grid


def _pair_modes_ok(grid):
    if grid.n_modes > MAX_PAIR_MODES:
        raise ValueError(f"double spectral sums are capped at {MAX_PAIR_MODES} modes per half-axis")


def skeleton_area_sector(noise1: SpectralField, noise2: SpectralField, sector: str, t, alpha) -> float:
    """Stationary skeleton integral A_plus(t) or A_minus(t) (no 2 pi c normalization).

    The plus sum skips the resonant antidiagonal xi1 = -xi2, where the skeleton
    is undefined; sector_increment accounts for it.
    """
    grid = _check_pair(noise1, noise2)
    _pair_modes_ok(grid)
    a = check_alpha(alpha)
    if sector not in SECTORS:
        raise ValueError("sector must be 'plus' or 'minus'")
    U1 = _weighted(grid, noise1.amplitudes[0], a)
    U2 = _weighted(grid, noise2.amplitudes[0], a)
    part = "a_plus_skeleton" if sector == "plus" else "a_minus_skeleton"
    return float(_real_checked(_bilinear(part, grid, 0.0, t, U1, U2), "skeleton sum")[0])


def sector_increment(noise1, noise2, sector, s, t, alpha) -> float:
    """A_sector(t) - A_sector(s), including the antidiagonal term (t - s) u1 u2 / (i xi2) for plus."""
    grid = _check_pair(noise1, noise2)
    _pair_modes_ok(grid)
    a = check_alpha(alpha)
    if sector not in SECTORS:
        raise ValueError("sector must be 'plus' or 'minus'")
    U1 = _weighted(grid, noise1.amplitudes[0], a)
    U2 = _weighted(grid, noise2.amplitudes[0], a)
    part = "a_plus" if sector == "plus" else "a_minus"
    return float(_real_checked(_bilinear(part, grid, s, t, U1, U2), "sector sum")[0])


def _boundary_fast(grid, s, t, u1, u2):
    """Boundary term via cumulative sums over |xi| rank, O(n); u are positive-mode weighted amplitudes."""
    xi = grid.modes
    ix = 1j * xi
    win = (np.exp(1j * t * xi) - np.exp(1j * s * xi)) / ix
    A = 2.0 * (win * u1).real
    B = 2.0 * (np.exp(1j * s * xi) * u2 / ix).real
    C = 2.0 * (win * u2).real
    D = 2.0 * (np.exp(1j * t * xi) * u1 / ix).real
    plus = -np.sum(B * np.cumsum(A, axis=-1), axis=-1)
    minus = np.sum(D * (np.cumsum(C, axis=-1) - C), axis=-1)
    return plus + minus


def boundary_term(noise1: SpectralField, noise2: SpectralField, s, t, alpha) -> float:
    """A_plus_bdry(s,t) - A_minus_bdry(s,t) (no 2 pi c normalization)."""
    grid = _check_pair(noise1, noise2)
    a = check_alpha(alpha)
    w = grid.modes ** (0.5 - a)
    return float(_boundary_fast(grid, s, t, noise1.amplitudes[0] * w, noise2.amplitudes[0] * w))


def ordered_area_spectral(noise1, noise2, s, t, alpha) -> float:
    """int_s^t dB_1 int_s^t1 dB_2 straight from the exact pair kernel (normalized)."""
    grid = _check_pair(noise1, noise2)
    _pair_modes_ok(grid)
    a = check_alpha(alpha)
    U1 = _weighted(grid, noise1.amplitudes[0], a)
    U2 = _weighted(grid, noise2.amplitudes[0], a)
    val = _real_checked(_bilinear("ordered", grid, s, t, U1, U2), "ordered area")[0]
    return float(val / (2 * math.pi * normalization_constant(a)))


@dataclass(frozen=True)
class AreaDecomposition:
    a_plus_increment: float
    a_minus_increment: float
    boundary: float
    s: float
    t: float
    alpha: float

    def reconstruct(self) -> float:
        return (self.a_plus_increment - self.a_minus_increment + self.boundary) / (
            2 * math.pi * normalization_constant(self.alpha)
        )

    def __sub__(self, other: "AreaDecomposition") -> "AreaDecomposition":
        return AreaDecomposition(
            self.a_plus_increment - other.a_plus_increment,
            self.a_minus_increment - other.a_minus_increment,
            self.boundary - other.boundary,
            self.s, self.t, self.alpha,
        )


def area_decomposition(noise1, noise2, s, t, alpha) -> AreaDecomposition:
    """Sector decomposition of the ordered integral int_s^t dB_1 int_s^t1 dB_2."""
    a = check_alpha(alpha)
    return AreaDecomposition(
        sector_increment(noise1, noise2, "plus", s, t, a),
        sector_increment(noise1, noise2, "minus", s, t, a),
        boundary_term(noise1, noise2, s, t, a),
        float(s), float(t), a,
    )


def levy_area_decomposition(noise: SpectralField, s, t, alpha) -> AreaDecomposition:
    """Decomposition of the Lévy area int(B2-B2(s))dB1 - int(B1-B1(s))dB2 of a 2-component noise."""
    if noise.component_count != 2:
        raise ValueError("need a two-component noise")
    n1, n2 = noise.component(0), noise.component(1)
    return area_decomposition(n1, n2, s, t, alpha) - area_decomposition(n2, n1, s, t, alpha)


# ---------------------------------------------------------------- fits and scans

def fit_power_law(points):
    """OLS of log y on log x; returns (exponent, stderr, r2)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three points")
    if np.any(pts[:, :2] <= 0) or not np.all(np.isfinite(pts[:, :2])):
        raise ValueError("power-law fit needs positive finite coordinates")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    X = np.column_stack([np.ones_like(lx), lx])
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    resid = ly - X @ coef
    n = len(lx)
    sxx = np.sum((lx - lx.mean()) ** 2)
    sigma2 = np.sum(resid**2) / (n - 2) if n > 2 else 0.0
    stderr = math.sqrt(sigma2 / sxx)
    sst = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / sst if sst > 0 else 1.0
    return float(coef[1]), float(stderr), float(r2)


@dataclass
class ScanResult:
    points: list
    fitted_exponent: float
    fit_stderr: float
    r_squared: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.points:
            raise ValueError("empty scan")
        c = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(c, c[1:])):
            raise ValueError("controls must be strictly increasing")

    @property
    def controls(self):
        return np.array([p[0] for p in self.points])

    @property
    def estimates(self):
        return np.array([p[1] for p in self.points])

    @property
    def errors(self):
        return np.array([p[2] for p in self.points])

    def local_slope(self, i, j) -> float:
        """Log-log slope between points i and j."""
        c, e = self.controls, self.estimates
        return float(math.log(e[j] / e[i]) / math.log(c[j] / c[i]))

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("control,estimate,mc_error\n")
            for c, e, m in self.points:
                fh.write(f"{float(c)!r},{float(e)!r},{float(m)!r}\n")

    def sidecar(self) -> dict:
        return {
            "fitted_exponent": self.fitted_exponent,
            "fit_stderr": self.fit_stderr,
            "r_squared": self.r_squared,
            "metadata": self.metadata,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)


def default_scan_grid(quantity: str) -> FrequencyGrid:
    """Grids used when none is given.

    The boundary term and the full area have O(n) / O(n log n) evaluations and
    get wide grids; the sector sums are O(n^2) and stay at 2048 modes.
    """
    if quantity == "boundary":
        return FrequencyGrid.from_spacing(0.5, 2**17)
    if quantity == "full_area":
        return FrequencyGrid.from_spacing(2.0, 2**13)
    return FrequencyGrid.from_spacing(4.0, 2048)


def _default_batch(quantity, replicates):
    if quantity == "boundary":
        return 100
    if quantity == "full_area":
        return 50
    return min(replicates, 1000)


def _quantity_batch(quantity, grid, s, t, alpha, amp1, amp2):
    w = grid.modes ** (0.5 - alpha)
    if quantity == "boundary":
        return _boundary_fast(grid, s, t, amp1 * w, amp2 * w)
    if quantity == "full_area":
        U1 = _two_sided(amp1 * w)
        U2 = _two_sided(amp2 * w)
        val = _ordered_fft(grid, s, t, U1, U2) - _ordered_fft(grid, s, t, U2, U1)
        return _real_checked(val, "Lévy area") / (2 * math.pi * normalization_constant(alpha))
    _pair_modes_ok(grid)
    U1 = _two_sided(amp1 * w)
    U2 = _two_sided(amp2 * w)
    return _real_checked(_bilinear(quantity, grid, s, t, U1, U2), quantity)


def _variance_with_error(x):
    x = np.asarray(x, dtype=np.float64)
    m = x.mean()
    v = x.var(ddof=1)
    m4 = np.mean((x - m) ** 4)
    se = math.sqrt(max(m4 - v * v, 0.0) / len(x))
    return float(v), float(se)


def _replicate_values(quantity, alpha, controls, control_kind, seeds, grid, s, increment):
    """Values of the quantity for each control (rows) and seed (columns)."""
    out = np.empty((len(controls), len(seeds)))
    if control_kind == "cutoff":
        h = grid.spacing
        n_list = [int(round(c / h)) for c in controls]
        n_max = max(n_list)
        big = FrequencyGrid.from_spacing(h, n_max)
        amp1 = mode_amplitudes(big, seeds, 0)
        amp2 = mode_amplitudes(big, seeds, 1)
        for r, n in enumerate(n_list):
            g = FrequencyGrid.from_spacing(h, n)
            out[r] = _quantity_batch(quantity, g, s, s + increment, alpha, amp1[:, :n], amp2[:, :n])
    else:
        amp1 = mode_amplitudes(grid, seeds, 0)
        amp2 = mode_amplitudes(grid, seeds, 1)
        for r, tau in enumerate(controls):
            out[r] = _quantity_batch(quantity, grid, s, s + tau, alpha, amp1, amp2)
    return out


def variance_scan(quantity, alpha, controls, control_kind, replicates, base_seed, *,
                  grid: FrequencyGrid | None = None, s=0.0, increment=1.0,
                  batch=None, workers=1) -> ScanResult:
    """Monte-Carlo variance of a Lévy-area ingredient against the cutoff or the increment |t - s|.

    Replicate r uses seed base_seed + r for every control value (common random
    numbers).  For cutoff scans the controls are xi_max values on a grid with
    fixed spacing, so mode k carries the same amplitude at every cutoff.
    a_plus, a_minus and boundary are reported without the 1/(2 pi c) factor;
    full_area is the normalized Lévy area.
    """
    a = check_alpha(alpha)
    if quantity not in QUANTITIES:
        raise ValueError(f"quantity must be one of {QUANTITIES}")
    if control_kind not in ("cutoff", "increment"):
        raise ValueError("control_kind must be 'cutoff' or 'increment'")
    if replicates < 100:
        raise ValueError("need at least 100 replicates")
    controls = [float(c) for c in controls]
    if len(controls) < 3 or any(b <= a_ for a_, b in zip(controls, controls[1:])):
        raise ValueError("need at least three strictly increasing controls")
    if any(c <= 0 for c in controls):
        raise ValueError("controls must be positive")
    grid = grid or default_scan_grid(quantity)
    if control_kind == "cutoff":
        n_list = [int(round(c / grid.spacing)) for c in controls]
        if min(n_list) < 1 or any(abs(n * grid.spacing - c) > 1e-9 * c for n, c in zip(n_list, controls)):
            raise ValueError("cutoff controls must be multiples of the grid spacing")

    seeds = [base_seed + r for r in range(replicates)]
    batch = batch or _default_batch(quantity, replicates)
    chunks = [seeds[i : i + batch] for i in range(0, len(seeds), batch)]

    def work(chunk):
        return _replicate_values(quantity, a, controls, control_kind, chunk, grid, s, increment)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    values = np.concatenate(parts, axis=1)

    points = []
    for c, row in zip(controls, values):
        v, se = _variance_with_error(row)
        points.append((c, v, se))
    bad = [p for p in points if not p[1] > 0]
    if bad:
        raise ValueError(f"non-positive variance estimate at control {bad[0][0]}: {bad[0][1]}")
    exponent, stderr, r2 = fit_power_law([(c, v) for c, v, _ in points])
    meta = {
        "quantity": quantity,
        "alpha": a,
        "control_kind": control_kind,
        "replicates": replicates,
        "base_seed": base_seed,
        "grid": grid.to_dict(),
        "s": s,
        "increment": increment if control_kind == "cutoff" else None,
    }
    return ScanResult(points, exponent, stderr, r2, meta)


def holder_exponent_estimate(path: SamplePath, min_lag_points=16) -> float:
    """Slope of log(max |x(u + l) - x(u)|) against log l over dyadic lags l.

    Lags run from one step up to the largest power of two that fits at least
    `min_lag_points` times into the path; multi-component paths use the
    Euclidean norm.
    """
    n = path.times.size
    if n < 64:
        raise ValueError("need at least 64 samples")
    dt = np.diff(path.times)
    if np.max(np.abs(dt - dt.mean())) > 1e-6 * dt.mean():
        raise ValueError("path must be on a uniform grid")
    lags = []
    sups = []
    lag = 1
    while lag * min_lag_points <= n:
        inc = path.values[lag:] - path.values[:-lag]
        sup = float(np.max(np.linalg.norm(inc, axis=1)))
        if sup == 0.0:
            raise ValueError("constant path: zero increments")
        lags.append(lag * dt.mean())
        sups.append(sup)
        lag *= 2
    slope, _, _ = fit_power_law(list(zip(lags, sups)))
    return slope
