"""Truncated tensor algebra, path signatures and the rough-path axioms.

Level n of a signature is a dense array of shape (d,)*n whose entry
[i1, ..., in] is the iterated integral int_{s<u1<...<un<t} dx_i1(u1)...dx_in(un)
(first index = earliest increment).  Words are tuples of 1-based letters.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .gaussian_field import SamplePath, check_alpha

MAX_DEPTH = 6


def _outer(a, b):
    return np.multiply.outer(a, b)


@dataclass(frozen=True, eq=False)
class TruncatedSignature:
    d: int
    depth: int
    levels: tuple

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if len(self.levels) != self.depth + 1:
            raise ValueError("need levels 0..depth")
        levels = []
        for n, lv in enumerate(self.levels):
            arr = np.array(lv, dtype=np.float64)
            if arr.shape != (self.d,) * n:
                raise ValueError(f"level {n} has shape {arr.shape}, expected {(self.d,) * n}")
            arr.setflags(write=False)
            levels.append(arr)
        object.__setattr__(self, "levels", tuple(levels))

    @classmethod
    def identity(cls, d, depth):
        return cls(d, depth, tuple(np.ones(()) if n == 0 else np.zeros((d,) * n) for n in range(depth + 1)))

    @classmethod
    def zero(cls, d, depth):
        return cls(d, depth, tuple(np.zeros((d,) * n) for n in range(depth + 1)))

    def coefficient(self, word) -> float:
        word = tuple(word)
        if len(word) > self.depth:
            raise ValueError("word longer than signature depth")
        if any(not 1 <= w <= self.d for w in word):
            raise ValueError("letter outside 1..d")
        return float(self.levels[len(word)][tuple(w - 1 for w in word)])

    def level(self, n):
        return self.levels[n]

    def __add__(self, other):
        _check_shapes(self, other)
        return TruncatedSignature(self.d, self.depth, tuple(a + b for a, b in zip(self.levels, other.levels)))

    def __sub__(self, other):
        _check_shapes(self, other)
        return TruncatedSignature(self.d, self.depth, tuple(a - b for a, b in zip(self.levels, other.levels)))

    def scale(self, c):
        return TruncatedSignature(self.d, self.depth, tuple(c * a for a in self.levels))

    def max_abs(self, start=0) -> float:
        return max(float(np.max(np.abs(lv))) if lv.size else 0.0 for lv in self.levels[start:])

    def truncate(self, depth):
        return TruncatedSignature(self.d, depth, self.levels[: depth + 1])

    def to_json(self) -> str:
        doc = {"d": self.d, "depth": self.depth,
               "levels": [[float(v) for v in lv.ravel()] for lv in self.levels]}
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text) -> "TruncatedSignature":
        doc = json.loads(text)
        d, depth = doc["d"], doc["depth"]
        levels = tuple(np.array(lv, dtype=np.float64).reshape((d,) * n) for n, lv in enumerate(doc["levels"]))
        return cls(d, depth, levels)


def _check_shapes(a, b):
    if a.d != b.d or a.depth != b.depth:
        raise ValueError("signatures differ in alphabet size or depth")


def chen_product(a: TruncatedSignature, b: TruncatedSignature) -> TruncatedSignature:
    """Truncated tensor product: level n is sum over n1 + n2 = n of a^(n1) (x) b^(n2)."""
    _check_shapes(a, b)
    levels = []
    for n in range(a.depth + 1):
        acc = np.zeros((a.d,) * n)
        for n1 in range(n + 1):
            acc = acc + _outer(a.levels[n1], b.levels[n - n1])
        levels.append(acc)
    return TruncatedSignature(a.d, a.depth, tuple(levels))


def tensor_exp(x: TruncatedSignature) -> TruncatedSignature:
    """exp of a tensor with zero scalar part, truncated at its depth."""
    if float(x.levels[0]) != 0.0:
        raise ValueError("exp expects a tensor with zero scalar part")
    result = TruncatedSignature.identity(x.d, x.depth)
    power = TruncatedSignature.identity(x.d, x.depth)
    for k in range(1, x.depth + 1):
        power = chen_product(power, x).scale(1.0 / k)
        result = result + power
    return result


def segment_exp(increment, depth) -> TruncatedSignature:
    """Signature of a straight segment: V^(x)n / n! at level n."""
    v = np.asarray(increment, dtype=np.float64).ravel()
    levels = [np.ones(())]
    for n in range(1, depth + 1):
        levels.append(_outer(levels[-1], v) / n)
    return TruncatedSignature(v.size, depth, tuple(levels))


def lie_element(level1, level2_antisym=None, depth=2, d=None):
    """Tensor with given level 1 and level-2 part (used as a log-signature)."""
    v = np.asarray(level1, dtype=np.float64)
    d = d or v.size
    levels = [np.zeros(()), v] + [np.zeros((d,) * n) for n in range(2, depth + 1)]
    if level2_antisym is not None:
        levels[2] = np.asarray(level2_antisym, dtype=np.float64)
    return TruncatedSignature(d, depth, tuple(levels[: depth + 1]))


def signature_of_points(points, depth) -> TruncatedSignature:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < 2:
        raise ValueError("need at least two samples")
    if not 1 <= depth:
        raise ValueError("depth must be at least 1")
    if depth > MAX_DEPTH:
        raise ValueError(f"depth above {MAX_DEPTH}")
    sig = TruncatedSignature.identity(pts.shape[1], depth)
    for inc in np.diff(pts, axis=0):
        sig = chen_product(sig, segment_exp(inc, depth))
    return sig


def signature(path: SamplePath, depth: int) -> TruncatedSignature:
    """Signature of the piecewise-linear interpolation of `path`."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    return signature_of_points(path.values, depth)


def restrict(path: SamplePath, s, t) -> np.ndarray:
    """Points of the piecewise-linear path on [s, t], endpoints interpolated."""
    if not s < t:
        raise ValueError("need s < t")
    times = path.times
    inside = (times > s) & (times < t)
    ends = [np.interp(s, times, path.values[:, k]) for k in range(path.d)]
    endt = [np.interp(t, times, path.values[:, k]) for k in range(path.d)]
    return np.vstack([ends, path.values[inside], endt])


def words(d, length):
    return list(itertools.product(range(1, d + 1), repeat=length))


def shuffle_words(i, j) -> Counter:
    """All interleavings of i and j keeping each word's internal order, with multiplicity."""
    i, j = tuple(i), tuple(j)
    if len(i) + len(j) > 12:
        raise ValueError("combined length above 12")
    out = Counter()
    n = len(i) + len(j)
    for pos in itertools.combinations(range(n), len(i)):
        w = [None] * n
        it_i, it_j = iter(i), iter(j)
        chosen = set(pos)
        for k in range(n):
            w[k] = next(it_i) if k in chosen else next(it_j)
        out[tuple(w)] += 1
    return out


def _shuffle_violation(coef, d, depth):
    worst = 0.0
    for li in range(1, depth):
        for lj in range(1, depth - li + 1):
            if lj < li:
                continue
            for wi in words(d, li):
                for wj in words(d, lj):
                    lhs = coef(wi) * coef(wj)
                    rhs = sum(m * coef(w) for w, m in shuffle_words(wi, wj).items())
                    worst = max(worst, abs(lhs - rhs))
    return worst


def check_shuffle(sig: TruncatedSignature) -> float:
    """Largest |S(i) S(j) - sum over shuffles S(k)| over words with |i| + |j| <= depth."""
    if sig.depth < 2:
        raise ValueError("shuffle check needs depth >= 2")
    return _shuffle_violation(sig.coefficient, sig.d, sig.depth)


def log_signature(sig: TruncatedSignature) -> TruncatedSignature:
    """Truncated log(1 + x) = sum (-1)^(k+1) x^k / k."""
    if abs(float(sig.levels[0]) - 1.0) > 1e-12:
        raise ValueError("level 0 must equal 1")
    x = sig - TruncatedSignature.identity(sig.d, sig.depth)
    x = TruncatedSignature(sig.d, sig.depth, (np.zeros(()),) + x.levels[1:])
    result = TruncatedSignature.zero(sig.d, sig.depth)
    power = TruncatedSignature.identity(sig.d, sig.depth)
    for k in range(1, sig.depth + 1):
        power = chen_product(power, x)
        result = result + power.scale((-1) ** (k + 1) / k)
    return result


def symmetric_level2_residue(lie: TruncatedSignature) -> float:
    """Max |symmetric part| of level 2; zero for elements of the free Lie algebra."""
    m = lie.levels[2]
    return float(np.max(np.abs(0.5 * (m + m.T))))


@dataclass(frozen=True)
class HeisenbergElement:
    """Exponential coordinates (x, y, z): exp(x e1 + y e2 + z [e1, e2])."""

    x: float
    y: float
    z: float

    @classmethod
    def identity(cls):
        return cls(0.0, 0.0, 0.0)

    def inverse(self):
        return HeisenbergElement(-self.x, -self.y, -self.z)

    def as_tuple(self):
        return (self.x, self.y, self.z)


def heisenberg_product(g1: HeisenbergElement, g2: HeisenbergElement) -> HeisenbergElement:
    return HeisenbergElement(
        g1.x + g2.x,
        g1.y + g2.y,
        g1.z + g2.z + 0.5 * (g1.x * g2.y - g2.x * g1.y),
    )


def heisenberg_from_signature(sig: TruncatedSignature) -> HeisenbergElement:
    """(level-1, antisymmetric level-2) coordinates of a d=2 group element."""
    if sig.d != 2 or sig.depth < 2:
        raise ValueError("need d = 2 and depth >= 2")
    l1, l2 = sig.levels[1], sig.levels[2]
    return HeisenbergElement(float(l1[0]), float(l1[1]), 0.5 * float(l2[0, 1] - l2[1, 0]))


def heisenberg_to_signature(g: HeisenbergElement, depth=2) -> TruncatedSignature:
    lie = np.array([[0.0, g.z], [-g.z, 0.0]])
    return tensor_exp(lie_element([g.x, g.y], lie, depth=depth, d=2))


@dataclass
class RoughPathReport:
    depth: int
    chen_violation: float
    shuffle_violation: float
    holder_ratios: dict = field(default_factory=dict)
    pairs_checked: int = 0
    triples_checked: int = 0

    @property
    def passes(self):
        return self.chen_violation < 1e-9 and self.shuffle_violation < 1e-9


def _functional_signature(functional, s, t, d, depth):
    levels = [np.ones(())]
    for n in range(1, depth + 1):
        arr = np.empty((d,) * n)
        for w in words(d, n):
            arr[tuple(x - 1 for x in w)] = functional(s, t, w)
        levels.append(arr)
    return TruncatedSignature(d, depth, tuple(levels))


def validate_rough_path(functional, alpha, sample_times, d=2, max_triples=2000) -> RoughPathReport:
    """Check Hölder, Chen and shuffle properties of (s, t, word) -> value on a time sample.

    Depth is floor(1/alpha).  Hölder ratios are the empirical sup over sampled
    pairs of max_word |value| / |t - s|^(n alpha), per level n.
    """
    a = check_alpha(alpha)
    depth = max(1, int(math.floor(1.0 / a)))
    times = sorted(float(x) for x in sample_times)
    cache = {}

    def sig(s, t):
        if (s, t) not in cache:
            cache[(s, t)] = _functional_signature(functional, s, t, d, depth)
        return cache[(s, t)]

    ratios = {n: 0.0 for n in range(1, depth + 1)}
    shuffle = 0.0
    pairs = list(itertools.combinations(times, 2))
    for s, t in pairs:
        g = sig(s, t)
        for n in range(1, depth + 1):
            ratios[n] = max(ratios[n], float(np.max(np.abs(g.levels[n]))) / (t - s) ** (n * a))
        if depth >= 2:
            shuffle = max(shuffle, _shuffle_violation(g.coefficient, d, depth))
    triples = list(itertools.combinations(times, 3))
    if len(triples) > max_triples:
        step = len(triples) / max_triples
        triples = [triples[int(k * step)] for k in range(max_triples)]
    chen = 0.0
    for s, u, t in triples:
        defect = sig(s, t) - chen_product(sig(s, u), sig(u, t))
        chen = max(chen, defect.max_abs(1))
    return RoughPathReport(depth, chen, shuffle, ratios, len(pairs), len(triples))


def path_functional(path: SamplePath, depth):
    """(s, t, word) -> signature coefficient of the piecewise-linear path on [s, t]."""
    cache = {}

    def functional(s, t, word):
        if (s, t) not in cache:
            cache[(s, t)] = signature_of_points(restrict(path, s, t), depth)
        return cache[(s, t)].coefficient(word)

    return functional


def chen_area_defect(x_s, x_u, x_t) -> float:
    """Antisymmetric level-2 defect (x1(t)-x1(u))(x2(u)-x2(s)) - (x2(t)-x2(u))(x1(u)-x1(s))."""
    return float((x_t[0] - x_u[0]) * (x_u[1] - x_s[1]) - (x_t[1] - x_u[1]) * (x_u[0] - x_s[0]))
