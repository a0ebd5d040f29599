"""Spectral sampling of fractional Brownian motion and its stationary field.

The fBm is built from its harmonizable representation: with a complex white
noise W on the frequency axis,

    B_t = (2 pi c_alpha)^(-1/2) * sum_xi (e^{i t xi} - 1)/(i xi) |xi|^(1/2 - alpha) dW(xi)

and the stationary field phi(t) drops the "-1".  Frequencies live on a
half-integer grid so that xi = 0 is never sampled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gamma

MODE_STREAM = 0
TAIL_STREAM = 1
_TWO53 = float(2**53)


def alpha_value(alpha) -> float:
    """Float value of a Hurst index given as float, Fraction or HurstIndex."""
    if isinstance(alpha, HurstIndex):
        return float(alpha.alpha)
    return float(alpha)


def check_alpha(alpha, lower=0.0, upper=1.0) -> float:
    a = alpha_value(alpha)
    if not (lower < a < upper) or not math.isfinite(a):
        raise ValueError(f"alpha={a} outside ({lower}, {upper})")
    return a


@dataclass(frozen=True)
class HurstIndex:
    alpha: float | Fraction

    def __post_init__(self):
        check_alpha(self.alpha)

    def __float__(self):
        return float(self.alpha)

    def require_window(self, lower, upper):
        """Raise unless lower < alpha < upper (e.g. the window (1/8, 1/4))."""
        return check_alpha(self.alpha, lower, upper)


@dataclass(frozen=True)
class FrequencyGrid:
    xi_max: float
    n_modes: int

    def __post_init__(self):
        if not (self.xi_max > 0 and math.isfinite(self.xi_max)):
            raise ValueError("xi_max must be positive and finite")
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValueError("n_modes must be a positive integer")

    @classmethod
    def from_spacing(cls, spacing, n_modes):
        return cls(spacing * n_modes, n_modes)

    @property
    def spacing(self) -> float:
        return self.xi_max / self.n_modes

    @property
    def modes(self) -> np.ndarray:
        """Positive frequencies (k + 1/2) * spacing."""
        return (np.arange(self.n_modes) + 0.5) * self.spacing

    @property
    def two_sided_modes(self) -> np.ndarray:
        """All frequencies, negative half first (mirror order), then positive."""
        xi = self.modes
        return np.concatenate([-xi[::-1], xi])

    def to_dict(self):
        return {"xi_max": float(self.xi_max), "n_modes": int(self.n_modes)}


def _philox(seed, component, stream):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(component), int(stream)))
    return np.random.Philox(ss)


def _complex_normals(raw: np.ndarray) -> np.ndarray:
    """Box-Muller on consecutive raw pairs; E|Z|^2 = 1, real and imaginary parts iid."""
    u1 = ((raw[..., 0::2] >> np.uint64(11)).astype(np.float64) + 1.0) / _TWO53
    u2 = (raw[..., 1::2] >> np.uint64(11)).astype(np.float64) / _TWO53
    return np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u2)


def standard_complex_normals(seed, component, count, stream=MODE_STREAM) -> np.ndarray:
    """Counter-addressed complex normals: entry k depends only on (seed, component, stream, k)."""
    raw = _philox(seed, component, stream).random_raw(2 * int(count))
    return _complex_normals(raw)


def mode_amplitudes(grid: FrequencyGrid, seeds, component=0) -> np.ndarray:
    """Amplitudes of one component for a batch of seeds, shape (len(seeds), n_modes).

    Row r equals sample_spectral_noise(grid, ., seeds[r]).amplitudes[component].
    """
    seeds = list(seeds)
    raw = np.empty((len(seeds), 2 * grid.n_modes), dtype=np.uint64)
    for r, s in enumerate(seeds):
        raw[r] = _philox(s, component, MODE_STREAM).random_raw(2 * grid.n_modes)
    return math.sqrt(grid.spacing) * _complex_normals(raw)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Noise increments dW at the positive modes of `grid`, one row per component.

    Negative modes are implied: dW(-xi) = conj(dW(xi)).
    """

    grid: FrequencyGrid
    amplitudes: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        amp = np.atleast_2d(np.asarray(self.amplitudes, dtype=np.complex128))
        if amp.shape[1] != self.grid.n_modes:
            raise ValueError("amplitude count does not match grid")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def component_count(self) -> int:
        return self.amplitudes.shape[0]

    def component(self, i) -> "SpectralField":
        return SpectralField(self.grid, self.amplitudes[i : i + 1], self.seed)

    def two_sided(self, i=0) -> np.ndarray:
        """Amplitudes on grid.two_sided_modes for component i."""
        w = self.amplitudes[i]
        return np.concatenate([np.conj(w[::-1]), w])

    def to_json(self) -> str:
        doc = {
            "grid": self.grid.to_dict(),
            "component_count": self.component_count,
            "seed": self.seed,
            "amplitudes": [[[float(z.real), float(z.imag)] for z in row] for row in self.amplitudes],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SpectralField":
        doc = json.loads(text)
        grid = FrequencyGrid(doc["grid"]["xi_max"], doc["grid"]["n_modes"])
        amp = np.array([[complex(re, im) for re, im in row] for row in doc["amplitudes"]])
        return cls(grid, amp, doc.get("seed"))


def sample_spectral_noise(grid: FrequencyGrid, d: int, seed: int) -> SpectralField:
    if int(d) != d or d < 1:
        raise ValueError("d must be a positive integer")
    amp = np.stack([mode_amplitudes(grid, [seed], c)[0] for c in range(d)])
    return SpectralField(grid, amp, int(seed))


def one_minus_cos_integral(tau, p) -> float:
    """int_0^inf (1 - cos(tau u)) u^(-p) du for 1 < p < 3, by adaptive quadrature.

    The oscillatory tail is integrated by parts once and handed to QUADPACK's
    Fourier-integral routine.
    """
    tau = float(tau)
    if not 1.0 < p < 3.0:
        raise ValueError("need 1 < p < 3")
    if tau == 0.0:
        return 0.0
    tau = abs(tau)
    head, _ = integrate.quad(lambda u: 2.0 * math.sin(0.5 * tau * u) ** 2 * u ** (-p), 0.0, 1.0,
                             epsabs=0.0, epsrel=1e-11, limit=200)
    # int_1^inf cos(tau u) u^-p du = -sin(tau)/tau + (p/tau) int_1^inf sin(tau u) u^(-p-1) du
    by_parts, _ = integrate.quad(lambda u: u ** (-p - 1.0), 1.0, np.inf, weight="sin", wvar=tau,
                                 epsabs=1e-13, limit=400)
    cos_tail = -math.sin(tau) / tau + p / tau * by_parts
    return head + 1.0 / (p - 1.0) - cos_tail


@lru_cache(maxsize=None)
def _normalization(a: float) -> float:
    # |e^{iu} - 1|^2 = 2 (1 - cos u), even in u
    return 4.0 * one_minus_cos_integral(1.0, 1.0 + 2.0 * a) / (2.0 * math.pi)


def normalization_constant(alpha) -> float:
    """c_alpha with (2 pi c_alpha)^(-1) int |e^{iu}-1|^2 |u|^(-1-2 alpha) du = 1."""
    a = check_alpha(alpha)
    return _normalization(a)


def normalization_closed_form(alpha) -> float:
    a = check_alpha(alpha)
    return 1.0 / (gamma(1.0 + 2.0 * a) * math.sin(math.pi * a))


def tail_variance(xi_max, alpha) -> float:
    """Per-time variance of the sub-grid correction: half the band |xi| > xi_max contribution."""
    a = alpha_value(alpha)
    return xi_max ** (-2 * a) / (2 * math.pi * a * normalization_constant(a))


@dataclass(frozen=True, eq=False)
class SamplePath:
    times: np.ndarray
    values: np.ndarray
    alpha: float | None = None
    seed: int | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64).ravel()
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if t.size == 0:
            raise ValueError("empty time grid")
        if v.shape[0] != t.size:
            raise ValueError("values must have one row per time")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(v)) or not np.all(np.isfinite(t)):
            raise ValueError("non-finite path values")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def component(self, i) -> np.ndarray:
        return self.values[:, i]

    def to_csv(self, path):
        d = self.d
        header = ",".join(["t"] + [f"x_{i + 1}" for i in range(d)])
        meta = f"alpha={'' if self.alpha is None else repr(float(self.alpha))};seed={'' if self.seed is None else self.seed}"
        with open(path, "w") as fh:
            fh.write(f"# {meta}\n{header}\n")
            for t, row in zip(self.times, self.values):
                fh.write(",".join(repr(float(x)) for x in (t, *row)) + "\n")

    @classmethod
    def from_csv(cls, path) -> "SamplePath":
        alpha = seed = None
        with open(path) as fh:
            lines = fh.read().splitlines()
        if lines and lines[0].startswith("#"):
            for item in lines[0][1:].strip().split(";"):
                key, _, val = item.partition("=")
                if key == "alpha" and val:
                    alpha = float(val)
                elif key == "seed" and val:
                    seed = int(val)
        rows = [ln for ln in lines if ln and not ln.startswith("#")][1:]
        data = np.loadtxt(rows, delimiter=",", ndmin=2)
        return cls(data[:, 0], data[:, 1:], alpha, seed)


def _mode_kernel(grid, times, alpha, stationary):
    xi = grid.modes
    weight = xi ** (0.5 - alpha) / (1j * xi)
    phase = np.exp(1j * np.outer(times, xi))
    if not stationary:
        phase -= 1.0
    return phase * weight


def _spectral_sum(noise, times, alpha, stationary, chunk=256):
    a = check_alpha(alpha)
    times = np.asarray(times, dtype=np.float64).ravel()
    if times.size == 0:
        raise ValueError("empty time grid")
    scale = 1.0 / math.sqrt(2 * math.pi * normalization_constant(a))
    out = np.empty((times.size, noise.component_count))
    for lo in range(0, times.size, chunk):
        ker = _mode_kernel(noise.grid, times[lo : lo + chunk], a, stationary)
        # negative modes contribute the complex conjugate of the positive ones
        out[lo : lo + chunk] = 2.0 * scale * (ker @ noise.amplitudes.T).real
    return times, out


def subgrid_tail(noise: SpectralField, times, alpha) -> np.ndarray:
    """Independent-per-time Gaussian standing in for the modes above xi_max.

    For |t - s| >> 1/xi_max the band |xi| > xi_max contributes to B_t - B_s
    like two independent values of variance tail_variance each, which is what
    this term reproduces.  The value at t = 0 is pinned by the extra draw 0.
    """
    if noise.seed is None:
        raise ValueError("sub-grid tail needs a seeded SpectralField")
    times = np.asarray(times, dtype=np.float64).ravel()
    sd = math.sqrt(tail_variance(noise.grid.xi_max, alpha))
    out = np.empty((times.size, noise.component_count))
    for c in range(noise.component_count):
        z = standard_complex_normals(noise.seed, c, times.size + 1, TAIL_STREAM).real * math.sqrt(2.0)
        out[:, c] = sd * (z[1:] - z[0])
    out[times == 0.0] = 0.0
    return out


def fbm_from_spectrum(noise: SpectralField, times, alpha, tail: bool = False) -> SamplePath:
    """Evaluate the truncated harmonizable sum at `times` (B_0 = 0 exactly).

    With tail=True a sub-grid correction restores the variance lost above
    xi_max; it is exact in law only for time lags much larger than 1/xi_max.
    """
    times, vals = _spectral_sum(noise, times, alpha, stationary=False)
    if tail:
        vals = vals + subgrid_tail(noise, times, alpha)
    return SamplePath(times, vals, alpha_value(alpha), noise.seed)


def stationary_field(noise: SpectralField, times, alpha) -> SamplePath:
    """phi(t) = (2 pi c)^(-1/2) sum e^{i t xi}/(i xi) |xi|^(1/2-alpha) dW; B_t = phi(t) - phi(0)."""
    times, vals = _spectral_sum(noise, times, alpha, stationary=True)
    return SamplePath(times, vals, alpha_value(alpha), noise.seed)


def fbm_increment_batch(grid: FrequencyGrid, seeds, alpha, times, component=0, tail=False) -> np.ndarray:
    """B at `times` for many seeds at once, shape (len(seeds), len(times)).

    Row r matches fbm_from_spectrum(sample_spectral_noise(grid, ., seeds[r]), times, alpha)
    for the given component.
    """
    a = check_alpha(alpha)
    times = np.asarray(times, dtype=np.float64).ravel()
    seeds = list(seeds)
    amp = mode_amplitudes(grid, seeds, component)
    scale = 1.0 / math.sqrt(2 * math.pi * normalization_constant(a))
    ker = _mode_kernel(grid, times, a, stationary=False)
    out = 2.0 * scale * (amp @ ker.T).real
    if tail:
        sd = math.sqrt(tail_variance(grid.xi_max, a))
        for r, s in enumerate(seeds):
            z = standard_complex_normals(s, component, times.size + 1, TAIL_STREAM).real * math.sqrt(2.0)
            out[r] += sd * (z[1:] - z[0])
        out[:, times == 0.0] = 0.0
    return out


def fbm_covariance(s, t, alpha) -> float:
    a = check_alpha(alpha)
    return 0.5 * (abs(s) ** (2 * a) + abs(t) ** (2 * a) - abs(t - s) ** (2 * a))


def _smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x)."""
    x = np.asarray(x, dtype=np.float64)
    f = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    y = 1.0 - x
    g = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
    return f / (f + g)


@dataclass(frozen=True)
class CutoffSpec:
    """Dyadic partition of unity with scale base M and bare scale rho.

    chi0 equals 1 for |xi| <= chi1_support[0] and vanishes for |xi| >= chi0_support;
    chi1(xi) = chi0(xi/M) - chi0(xi) lives on chi1_support = (a, M b).
    Slice j >= 1 is chi0(xi/M^j) - chi0(xi/M^(j-1)).
    """

    M: float
    rho: int
    chi0_support: float | None = None
    chi1_support: tuple | None = None

    def __post_init__(self):
        if not self.M > 1:
            raise ValueError("M must exceed 1")
        if int(self.rho) != self.rho or self.rho < 0:
            raise ValueError("rho must be a non-negative integer")
        b = self.chi0_support if self.chi0_support is not None else self.M ** (2 / 3)
        a = self.chi1_support[0] if self.chi1_support is not None else self.M ** (1 / 3)
        if not (1.0 <= a < b <= self.M):
            raise ValueError("need 1 <= plateau < chi0 support <= M")
        object.__setattr__(self, "chi0_support", float(b))
        object.__setattr__(self, "chi1_support", (float(a), float(self.M * b)))

    @property
    def plateau(self) -> float:
        return self.chi1_support[0]

    def chi0(self, xi):
        a, b = self.plateau, self.chi0_support
        return 1.0 - _smooth_step((np.abs(xi) - a) / (b - a))

    def chi1(self, xi):
        return self.chi0(np.asarray(xi) / self.M) - self.chi0(xi)

    def slice_multiplier(self, j, xi):
        if j == 0:
            return self.chi0(xi)
        xi = np.asarray(xi, dtype=np.float64)
        return self.chi0(xi / self.M**j) - self.chi0(xi / self.M ** (j - 1))

    def total_multiplier(self, xi):
        """The scale-<=rho multiplier chi0(xi / M^rho)."""
        return self.chi0(np.asarray(xi, dtype=np.float64) / self.M**self.rho)


def decompose_scales(noise: SpectralField, cutoff: CutoffSpec) -> list:
    grid = noise.grid
    if grid.xi_max < cutoff.M**cutoff.rho:
        raise ValueError("grid xi_max below M^rho")
    if cutoff.rho >= 1:
        lo, hi = cutoff.M * cutoff.plateau, cutoff.M * cutoff.chi1_support[1]
        inside = np.count_nonzero((grid.modes > lo) & (grid.modes < hi))
        if inside < 4:
            raise ValueError("grid too coarse to resolve the first dyadic slice")
    xi = grid.modes
    return [
        SpectralField(grid, noise.amplitudes * cutoff.slice_multiplier(j, xi), noise.seed)
        for j in range(cutoff.rho + 1)
    ]


def wick_moment(cov, indices) -> float:
    """E[X_{i1} ... X_{i2n}] for a centred Gaussian vector with covariance `cov` (0-based indices)."""
    cov = np.asarray(cov, dtype=np.float64)
    idx = list(indices)
    if len(idx) % 2:
        raise ValueError("odd number of indices: the moment vanishes identically")
    if len(idx) > 12:
        raise ValueError("at most 12 indices supported")

    def pairings(items):
        if not items:
            return 1.0
        first, rest = items[0], items[1:]
        total = 0.0
        for k in range(len(rest)):
            c = cov[first, rest[k]]
            if c != 0.0:
                total += c * pairings(rest[:k] + rest[k + 1 :])
        return total

    return float(pairings(idx))


def pairing_count(n_indices: int) -> int:
    """(2n-1)!! pairings of 2n points."""
    return math.prod(range(n_indices - 1, 0, -2)) if n_indices else 1


def empirical_correlation(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    num = np.vdot(a - a.mean(), b - b.mean())
    den = np.linalg.norm(a - a.mean()) * np.linalg.norm(b - b.mean())
    return float(abs(num) / den)
