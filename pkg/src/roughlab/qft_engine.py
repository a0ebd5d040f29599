"""Perturbative machinery for the area field coupled to exchange fields sigma_+/-.

Lines and vertices
------------------
* sigma_+ / sigma_- lines (plain), spectral weight |xi|^-(1-4 alpha);
* phi_1 / phi_2 lines (bold), spectral weight |xi|^-(1+2 alpha);
* every vertex joins one sigma end, one phi_1 end and one phi_2 end.  At a
  sigma_+ vertex the derivative acts on phi_1, at a sigma_- vertex on phi_2.
  Internal lines only join ends of the same field (sigma_+ with sigma_+, ...).

Power counting uses exact rational arithmetic in alpha.
"""

from __future__ import annotations

import itertools
import math
import random
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gamma

from .gaussian_field import FrequencyGrid, check_alpha, mode_amplitudes, one_minus_cos_integral

RENORMALIZABLE_WINDOW = (0.125, 0.25)


def exact_alpha(alpha) -> Fraction:
    """Rational value of alpha; floats are read through their shortest decimal repr (0.2 -> 1/5)."""
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, int):
        return Fraction(alpha)
    if hasattr(alpha, "alpha"):
        return exact_alpha(alpha.alpha)
    return Fraction(repr(float(alpha)))


# ---------------------------------------------------------------- power counting

@dataclass(frozen=True, order=True)
class LegCounts:
    n_sigma: int
    n_phi: int
    n_dphi: int

    def __post_init__(self):
        if min(self.n_sigma, self.n_phi, self.n_dphi) < 0:
            raise ValueError("leg counts must be non-negative")

    @property
    def total(self):
        return self.n_sigma + self.n_phi + self.n_dphi

    def as_tuple(self):
        return (self.n_sigma, self.n_phi, self.n_dphi)


def degree_of_divergence(legs: LegCounts, alpha) -> Fraction:
    """1 - 2 alpha N_sigma + alpha N_phi + (alpha - 1) N_dphi, exactly."""
    a = exact_alpha(alpha)
    return 1 - 2 * a * legs.n_sigma + a * legs.n_phi + (a - 1) * legs.n_dphi


FIELDS = ("sigma", "phi1", "phi2")


@dataclass
class FeynmanDiagram:
    """Vertex count, internal line counts and external legs.

    With `vertex_types` ('+' or '-' per vertex), `lines` (pairs of slots) and
    `externals` (slots), a slot being (vertex index, field name), the diagram
    is explicit and validate() checks the wiring as well as the counts.
    """

    v: int
    i_sigma: int
    i_phi: int
    legs: LegCounts
    vertex_types: tuple | None = None
    lines: tuple | None = None
    externals: tuple | None = None

    @property
    def loops(self) -> int:
        return self.i_sigma + self.i_phi - self.v + 1

    def validate(self):
        if self.v < 1:
            raise ValueError("a diagram needs at least one vertex")
        if 2 * self.i_sigma + self.legs.n_sigma != self.v:
            raise ValueError(
                f"incidence relation 2*I_sigma + N_sigma = V violated: "
                f"2*{self.i_sigma} + {self.legs.n_sigma} != {self.v}")
        if 2 * self.i_phi + self.legs.n_phi + self.legs.n_dphi != 2 * self.v:
            raise ValueError(
                f"incidence relation 2*I_phi + N_phi + N_dphi = 2V violated: "
                f"2*{self.i_phi} + {self.legs.n_phi} + {self.legs.n_dphi} != {2 * self.v}")
        if self.loops < 0:
            raise ValueError(f"loop number L = I - V + 1 = {self.loops} is negative")
        if self.lines is not None:
            _check_wiring(self)
        return self

    @classmethod
    def from_wiring(cls, vertex_types, lines, externals):
        vertex_types = tuple(vertex_types)
        lines = tuple(tuple(map(tuple, ln)) for ln in lines)
        externals = tuple(map(tuple, externals))
        i_sigma = sum(1 for a, _ in lines if a[1] == "sigma")
        i_phi = len(lines) - i_sigma
        n_sigma = n_phi = n_dphi = 0
        for vert, fld in externals:
            if fld == "sigma":
                n_sigma += 1
            elif _is_derivative(vertex_types[vert], fld):
                n_dphi += 1
            else:
                n_phi += 1
        diag = cls(len(vertex_types), i_sigma, i_phi, LegCounts(n_sigma, n_phi, n_dphi),
                   vertex_types, lines, externals)
        return diag

    def to_dict(self):
        return {
            "v": self.v,
            "i_sigma": self.i_sigma,
            "i_phi": self.i_phi,
            "loops": self.loops,
            "legs": {"n_sigma": self.legs.n_sigma, "n_phi": self.legs.n_phi, "n_dphi": self.legs.n_dphi},
            "vertex_types": list(self.vertex_types) if self.vertex_types else None,
            "lines": [[list(a), list(b)] for a, b in self.lines] if self.lines else None,
            "externals": [list(e) for e in self.externals] if self.externals else None,
        }


def _is_derivative(vertex_type, fld):
    return (vertex_type == "+" and fld == "phi1") or (vertex_type == "-" and fld == "phi2")


def _check_wiring(diag: FeynmanDiagram):
    types = diag.vertex_types
    if len(types) != diag.v or any(t not in "+-" for t in types):
        raise ValueError("vertex types must be '+' or '-' for each vertex")
    used = []
    for a, b in diag.lines:
        if a[1] != b[1]:
            raise ValueError(f"line {a}-{b} joins different fields")
        if a[1] == "sigma" and types[a[0]] != types[b[0]]:
            raise ValueError(f"sigma line {a}-{b} joins sigma_+ to sigma_-")
        if a == b:
            raise ValueError("a line cannot join a slot to itself")
        used += [a, b]
    used += list(diag.externals)
    expected = sorted((k, f) for k in range(diag.v) for f in FIELDS)
    if sorted(used) != expected:
        raise ValueError("every vertex slot must be used exactly once")


def degree_from_structure(diagram: FeynmanDiagram, alpha) -> Fraction:
    """-(1-4a) I_sigma - (1+2a) I_phi + L + V - N_dphi for the amputated diagram."""
    diagram.validate()
    a = exact_alpha(alpha)
    return (-(1 - 4 * a) * diagram.i_sigma - (1 + 2 * a) * diagram.i_phi
            + diagram.loops + diagram.v - diagram.legs.n_dphi)


def is_divergent(legs: LegCounts, alpha) -> bool:
    """Overall divergent structure that can be the external structure of a dangerous diagram.

    Degree >= 0, and no plain phi legs: Fourier normal ordering leaves only
    sigma and d-phi legs on diagrams whose internal scales dominate.
    """
    return degree_of_divergence(legs, alpha) >= 0 and legs.n_phi == 0


@dataclass(frozen=True)
class LegStructure:
    legs: LegCounts
    degree: Fraction
    divergent: bool
    superficially_divergent: bool
    min_vertices: int

    def __iter__(self):
        yield self.legs
        yield self.degree


def _incidence_solutions(v):
    """(V+, V-, N_sigma+, N_sigma-, a+, a-, b+, b-) satisfying the type-resolved incidence equations.

    a+/a- count external phi_1 ends at +/- vertices, b+/b- external phi_2 ends.
    """
    for vp in range(v + 1):
        vm = v - vp
        for sp in range(vp % 2, vp + 1, 2):
            for sm in range(vm % 2, vm + 1, 2):
                for ap, am in itertools.product(range(vp + 1), range(vm + 1)):
                    if (ap + am - v) % 2:
                        continue
                    for bp, bm in itertools.product(range(vp + 1), range(vm + 1)):
                        if (bp + bm - v) % 2:
                            continue
                        yield vp, vm, sp, sm, ap, am, bp, bm


def realizable_counts(v_max):
    """All (V, I_sigma, I_phi, legs) admitted by the incidence equations with L >= 0 and >= 1 leg."""
    out = set()
    for v in range(1, v_max + 1):
        for vp, vm, sp, sm, ap, am, bp, bm in _incidence_solutions(v):
            legs = LegCounts(sp + sm, am + bp, ap + bm)
            if legs.total == 0:
                continue
            i_sigma = (v - legs.n_sigma) // 2
            i_phi = (2 * v - legs.n_phi - legs.n_dphi) // 2
            if i_sigma + i_phi - v + 1 < 0:
                continue
            out.add((v, i_sigma, i_phi, legs))
    return out


def enumerate_leg_structures(v_max: int, alpha) -> list:
    """Leg structures of diagrams with at most v_max vertices, with degree and divergence flags."""
    if not 1 <= v_max <= 8:
        raise ValueError("v_max must be between 1 and 8")
    first = {}
    for v, _, _, legs in realizable_counts(v_max):
        first[legs] = min(first.get(legs, v), v)
    out = []
    for legs in sorted(first):
        deg = degree_of_divergence(legs, alpha)
        out.append(LegStructure(legs, deg, is_divergent(legs, alpha), deg >= 0, first[legs]))
    return out


def _slot_matchings(slots):
    if not slots:
        yield []
        return
    first, rest = slots[0], slots[1:]
    for k in range(len(rest)):
        for m in _slot_matchings(rest[:k] + rest[k + 1 :]):
            yield [(first, rest[k])] + m


def _connected(v, lines):
    parent = list(range(v))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in lines:
        parent[find(a[0])] = find(b[0])
    return len({find(x) for x in range(v)}) == 1


def enumerate_diagrams(v):
    """Every connected wiring with v vertices and at least one external leg (isomorphic copies included)."""
    slots_all = [(k, f) for k in range(v) for f in FIELDS]
    for types in itertools.product("+-", repeat=v):
        for mask in range(1, 1 << len(slots_all)):
            externals = [s for i, s in enumerate(slots_all) if mask >> i & 1]
            free = [s for i, s in enumerate(slots_all) if not mask >> i & 1]
            groups = {}
            for s in free:
                key = ("sigma", types[s[0]]) if s[1] == "sigma" else (s[1], "")
                groups.setdefault(key, []).append(s)
            if any(len(g) % 2 for g in groups.values()):
                continue
            per_group = [list(_slot_matchings(g)) for g in groups.values()]
            for combo in itertools.product(*per_group):
                lines = [ln for m in combo for ln in m]
                if _connected(v, lines):
                    yield FeynmanDiagram.from_wiring(types, lines, externals)


def random_diagram(v, rng: random.Random, max_tries=10000):
    """A random connected wiring with v vertices (rejection sampling)."""
    slots_all = [(k, f) for k in range(v) for f in FIELDS]
    for _ in range(max_tries):
        types = tuple(rng.choice("+-") for _ in range(v))
        externals = [s for s in slots_all if rng.random() < 0.3]
        free = [s for s in slots_all if s not in externals]
        groups = {}
        for s in free:
            key = ("sigma", types[s[0]]) if s[1] == "sigma" else (s[1], "")
            groups.setdefault(key, []).append(s)
        for g in groups.values():
            if len(g) % 2:
                externals.append(g.pop(rng.randrange(len(g))))
        if not externals:
            continue
        lines = []
        for g in groups.values():
            g = g[:]
            rng.shuffle(g)
            lines += [(g[i], g[i + 1]) for i in range(0, len(g), 2)]
        if _connected(v, lines):
            return FeynmanDiagram.from_wiring(types, lines, externals)
    raise RuntimeError("no connected diagram found")


def bubble_diagram():
    """Two sigma_+ vertices with external sigma legs joined by one phi_1 and one phi_2 line."""
    return FeynmanDiagram.from_wiring(
        "++", [((0, "phi1"), (1, "phi1")), ((0, "phi2"), (1, "phi2"))], [(0, "sigma"), (1, "sigma")])


def double_bubble_diagram():
    """Two bubbles chained through an internal sigma line: two independent loop momenta."""
    lines = [
        ((0, "phi1"), (1, "phi1")), ((0, "phi2"), (2, "phi2")),
        ((1, "phi2"), (3, "phi2")), ((2, "phi1"), (3, "phi1")),
        ((1, "sigma"), (2, "sigma")),
    ]
    return FeynmanDiagram.from_wiring("++++", lines, [(0, "sigma"), (3, "sigma")])


# ---------------------------------------------------------------- model parameters

@lru_cache(maxsize=None)
def _c_prime(a: float) -> float:
    b = 4.0 * a
    # int_0^1 t^-b cos t dt with t = u^(1/(1-b)) to remove the endpoint singularity
    q = 1.0 / (1.0 - b)
    head, _ = integrate.quad(lambda u: q * math.cos(u**q), 0.0, 1.0, epsabs=0.0, epsrel=1e-12)
    by_parts, _ = integrate.quad(lambda t: t ** (-b - 1.0), 1.0, np.inf, weight="sin", wvar=1.0, epsabs=1e-12)
    tail = -math.sin(1.0) + b * by_parts
    return 1.0 / (2.0 * (head + tail))


def kernel_normalization(alpha) -> float:
    """c'_alpha: the Fourier transform of c'_alpha |t|^(-4 alpha) equals |xi|^(4 alpha - 1)."""
    a = check_alpha(alpha, 0.0, 0.25)
    return _c_prime(a)


def kernel_normalization_closed_form(alpha) -> float:
    a = check_alpha(alpha, 0.0, 0.25)
    return 1.0 / (2.0 * gamma(1.0 - 4.0 * a) * math.sin(2.0 * math.pi * a))


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    lam: float
    M: float = 2.0
    rho: int = 0
    c_prime_alpha: float | None = None

    def __post_init__(self):
        a = check_alpha(self.alpha, 0.0, 0.5)
        if not self.lam > 0:
            raise ValueError("coupling lambda must be positive")
        if not self.M > 1:
            raise ValueError("M must exceed 1")
        if int(self.rho) != self.rho or self.rho < 0:
            raise ValueError("rho must be a non-negative integer")
        if self.c_prime_alpha is None and a < 0.25:
            object.__setattr__(self, "c_prime_alpha", kernel_normalization(a))

    @property
    def beta(self) -> float:
        """1 - 4 alpha, the homogeneity of the sigma propagator."""
        return 1.0 - 4.0 * float(self.alpha)

    @property
    def cutoff(self) -> float:
        return float(self.M) ** self.rho

    def with_rho(self, rho):
        return ModelParams(self.alpha, self.lam, self.M, rho, self.c_prime_alpha)

    def with_lambda(self, lam):
        return ModelParams(self.alpha, lam, self.M, self.rho, self.c_prime_alpha)

    def require_window(self):
        lo, hi = RENORMALIZABLE_WINDOW
        check_alpha(self.alpha, lo, hi)


# ---------------------------------------------------------------- bubble

def _bubble_region_integral(xi, cutoff, a):
    """int over xi1 in [xi - cutoff, xi/2] of |xi1|^(1-2a) |xi - xi1|^(-1-2a) (xi > 0)."""
    p, q = 1.0 - 2.0 * a, -1.0 - 2.0 * a
    opts = dict(epsabs=0.0, epsrel=1e-10, limit=200)
    # 0 <= xi1 <= xi/2
    near, _ = integrate.quad(lambda x: x**p * (xi - x) ** q, 0.0, 0.5 * xi, **opts)
    # xi1 = -y, 0 <= y <= min(xi, cutoff - xi)
    y_mid = min(xi, cutoff - xi)
    mid, _ = integrate.quad(lambda y: y**p * (xi + y) ** q, 0.0, y_mid, **opts)
    far = 0.0
    if cutoff - xi > xi:
        # y in [xi, cutoff - xi] on a logarithmic scale
        far, _ = integrate.quad(lambda u: math.exp(u * (p + 1)) * (xi + math.exp(u)) ** q,
                                math.log(xi), math.log(cutoff - xi), **opts)
    return near + mid + far


def bubble_integral(xi, cutoff, params: ModelParams, amputated: bool = False) -> float:
    """One-loop sigma self-energy with both bold lines cut at `cutoff`.

    Non-amputated: -lambda^2 |xi|^(8a-2) I(xi, cutoff); amputated: -lambda^2 I(xi, cutoff),
    where I integrates |xi1|^(1-2a) |xi-xi1|^(-1-2a) over |xi1| < |xi - xi1|.
    """
    if xi == 0:
        raise ValueError("xi must be non-zero")
    if not cutoff > abs(xi):
        raise ValueError("cutoff must exceed |xi|")
    a = float(params.alpha)
    val = -params.lam**2 * _bubble_region_integral(abs(float(xi)), float(cutoff), a)
    if amputated:
        return val
    return val * abs(xi) ** (8 * a - 2)


@lru_cache(maxsize=None)
def _measured_constant(a, xi, lo, hi):
    beta = 1.0 - 4.0 * a
    i_lo = _bubble_region_integral(xi, lo, a)
    i_hi = _bubble_region_integral(xi, hi, a)
    return (i_hi - i_lo) / (hi**beta - lo**beta)


def measure_bubble_constant(alpha, xi=1.0, cutoffs=(1e10, 1e14)) -> float:
    """K in I(xi, cutoff) ~ K cutoff^(1-4a), from the growth between two large cutoffs.

    Differencing removes the cutoff-independent part of the integral.
    Cached per (alpha, xi, cutoffs).
    """
    a = check_alpha(alpha, 0.0, 0.25)
    return _measured_constant(a, float(xi), float(cutoffs[0]), float(cutoffs[1]))


def bubble_ratio(xi, params: ModelParams, K) -> float:
    """K lambda^2 (M^rho / |xi|)^(1-4a), the geometric ratio of the bubble chain."""
    return K * params.lam**2 * (params.cutoff / abs(xi)) ** params.beta


def bubble_series_sum(xi, params: ModelParams, K) -> float:
    """Resummed area spectrum lambda^-2 |xi|^(1-4a) r/(1+r)."""
    params.require_window()
    if not K > 0:
        raise ValueError("K must be positive")
    if not abs(xi) <= params.cutoff:
        raise ValueError("need |xi| <= M^rho")
    r = bubble_ratio(xi, params, K)
    return abs(xi) ** params.beta / params.lam**2 * (r / (1.0 + r))


def bubble_series_partial_sums(xi, params: ModelParams, K, n_terms) -> np.ndarray:
    """lambda^-2 |xi|^(1-4a) [1 - sum_{n<N} (-r)^n] for N = 1..n_terms."""
    r = bubble_ratio(xi, params, K)
    terms = (-r) ** np.arange(n_terms)
    return abs(xi) ** params.beta / params.lam**2 * (1.0 - np.cumsum(terms))


@dataclass(frozen=True)
class SigmaCovariance:
    kind: str
    mass: float
    alpha: float
    lam: float

    def __post_init__(self):
        if self.kind not in ("bare", "renormalized"):
            raise ValueError("kind must be 'bare' or 'renormalized'")
        if self.mass < 0:
            raise ValueError("mass must be non-negative")
        if self.kind == "bare" and self.mass != 0:
            raise ValueError("bare covariance has zero mass")

    @classmethod
    def bare(cls, alpha, lam=1.0):
        return cls("bare", 0.0, float(alpha), lam)

    @classmethod
    def renormalized(cls, params: ModelParams, K):
        """Screening mass K lambda^2 (M^rho)^(1-4a)."""
        params.require_window()
        return cls("renormalized", K * params.lam**2 * params.cutoff**params.beta, float(params.alpha), params.lam)

    @classmethod
    def from_bubble(cls, params: ModelParams, xi_ref=1.0):
        """Mass read off the amputated one-loop bubble at |xi| = xi_ref with cutoff M^rho."""
        params.require_window()
        mass = -bubble_integral(xi_ref, params.cutoff, params, amputated=True)
        return cls("renormalized", mass, float(params.alpha), params.lam)


def renormalized_sigma_covariance(xi, cov: SigmaCovariance) -> float:
    """1 / (|xi|^(1-4a) + mass)."""
    if xi == 0:
        raise ValueError("xi must be non-zero")
    return 1.0 / (abs(xi) ** (1.0 - 4.0 * cov.alpha) + cov.mass)


def schwinger_dyson_area_spectrum(sigma_spectrum_value, xi, params: ModelParams) -> float:
    """lambda^-2 |xi|^(1-4a) [1 - |xi|^(1-4a) S] for a sigma_+ spectrum value S."""
    if xi == 0:
        raise ValueError("xi must be non-zero")
    if sigma_spectrum_value < 0:
        raise ValueError("sigma spectrum must be non-negative")
    w = abs(xi) ** params.beta
    return w / params.lam**2 * (1.0 - w * sigma_spectrum_value)


def resummed_sigma_spectrum(xi, params: ModelParams, K) -> float:
    """sigma_+ spectrum after resumming the bubble chain: the renormalized covariance."""
    return renormalized_sigma_covariance(xi, SigmaCovariance.renormalized(params, K))


def interacting_area_spectrum(xi, params: ModelParams, K) -> float:
    """Schwinger-Dyson area spectrum fed with the resummed sigma spectrum."""
    return schwinger_dyson_area_spectrum(resummed_sigma_spectrum(xi, params, K), xi, params)


def mixed_area_spectrum(xi, params: ModelParams, K_pp, K=None) -> float:
    """lambda^-2 |xi|^(1-4a) * (-1 / (1 + K'' lambda^2 (M^rho/|xi|)^(1-4a))).

    K'' is an input; when K is supplied a warning flags K'' >= K, which the
    scale constraints on mixed bubbles rule out.
    """
    params.require_window()
    if not K_pp > 0:
        raise ValueError("K'' must be positive")
    if K is not None and K_pp >= K:
        warnings.warn(f"K''={K_pp} is not below K={K}", stacklevel=2)
    r = bubble_ratio(xi, params, K_pp)
    return -abs(xi) ** params.beta / params.lam**2 / (1.0 + r)


# ---------------------------------------------------------------- interacting variance

def area_kernel_integral(tau, alpha) -> float:
    """int over R of (1 - cos(tau xi)) |xi|^(-1-4a) d xi, by adaptive quadrature."""
    a = check_alpha(alpha, 0.0, 0.5)
    return 2.0 * one_minus_cos_integral(tau, 1.0 + 4.0 * a)


def area_kernel_closed_form(alpha) -> float:
    """K_1 = pi / (Gamma(1+4a) sin(2 pi a)), the tau = 1 value of area_kernel_integral."""
    a = check_alpha(alpha, 0.0, 0.5)
    return math.pi / (gamma(1.0 + 4.0 * a) * math.sin(2.0 * math.pi * a))


@dataclass(frozen=True)
class InteractingVariance:
    quadrature_part: float
    boundary_part: float
    boundary_error: float
    tau: float
    alpha: float

    @property
    def total(self) -> float:
        return self.quadrature_part + self.boundary_part

    @property
    def k1(self) -> float:
        return area_kernel_integral(1.0, self.alpha)

    @property
    def k2(self) -> float:
        return self.boundary_part / self.tau ** (4 * self.alpha)

    def __float__(self):
        return self.total


def boundary_variance(alpha, tau, replicates=400, base_seed=0, grid: FrequencyGrid | None = None, s=0.0):
    """Monte-Carlo E|A+_bdry - A-_bdry|^2 over [s, s + tau] and its standard error."""
    from .area_analysis import _quantity_batch, _variance_with_error, default_scan_grid

    a = check_alpha(alpha, 0.0, 0.5)
    grid = grid or default_scan_grid("boundary")
    vals = []
    for lo in range(0, replicates, 100):
        seeds = [base_seed + r for r in range(lo, min(lo + 100, replicates))]
        amp1 = mode_amplitudes(grid, seeds, 0)
        amp2 = mode_amplitudes(grid, seeds, 1)
        vals.append(_quantity_batch("boundary", grid, s, s + tau, a, amp1, amp2))
    x = np.concatenate(vals)
    m2 = float(np.mean(x**2))
    se = float(np.std(x**2, ddof=1) / math.sqrt(x.size))
    return m2, se


def interacting_area_variance_parts(s, t, params: ModelParams, replicates=400, base_seed=0,
                                    grid: FrequencyGrid | None = None) -> InteractingVariance:
    """(2 pi c)^2 <A(s,t)^2>: (4/lambda^2) int (1-cos) |xi|^(-1-4a) plus the boundary-term variance."""
    if not s < t:
        raise ValueError("need s < t")
    a = check_alpha(params.alpha, 0.0, 0.5)
    tau = t - s
    quad_part = 4.0 / params.lam**2 * area_kernel_integral(tau, a)
    bvar, berr = boundary_variance(a, tau, replicates, base_seed, grid, s)
    return InteractingVariance(quad_part, bvar, berr, tau, a)


def interacting_area_increment_variance(s, t, params: ModelParams, replicates=400, base_seed=0,
                                        grid: FrequencyGrid | None = None) -> float:
    return interacting_area_variance_parts(s, t, params, replicates, base_seed, grid).total
