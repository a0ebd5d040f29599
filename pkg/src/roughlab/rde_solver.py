"""Rank-N Euler scheme for dy = sum_j V_j(y) dX_j driven by a path's signature.

One step from s to t replaces the solution by

    y + sum_{1 <= |w| <= N} [V_w Id](y) * S_st(w)

where S_st(w) is the signature coefficient of the word w = (i1, ..., in)
(i1 = earliest increment) and the composite is

    [V_(i1) Id](y)            = V_i1(y)
    [V_(i1 i2 ... in) Id](y)  = D([V_(i2 ... in) Id])(y) . V_i1(y)

For linear fields V_j(y) = A_j y this gives A_in ... A_i2 A_i1 y, which is the
ordering that reproduces the Taylor expansion of the exact flow.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .gaussian_field import SamplePath
from .rough_algebra import TruncatedSignature, restrict, signature_of_points

MAX_RANK = 4


@dataclass(frozen=True, eq=False)
class VectorFieldSystem:
    """Driving fields V_1..V_d on R^state_dim.

    `jacobians` (optional) gives analytic Jacobian matrices of each field;
    `matrices` marks a linear system V_j(y) = A_j y, whose composites are exact
    matrix products.  Otherwise derivatives use nested central differences.
    """

    d: int
    state_dim: int
    fields: tuple
    jacobians: tuple | None = None
    matrices: tuple | None = None
    h_fd: float = 1e-4

    @classmethod
    def linear(cls, matrices):
        mats = tuple(np.array(m, dtype=np.float64) for m in matrices)
        dim = mats[0].shape[0]
        fields = tuple((lambda A: (lambda y: A @ y))(A) for A in mats)
        jacs = tuple((lambda A: (lambda y: A))(A) for A in mats)
        return cls(len(mats), dim, fields, jacs, mats)

    @classmethod
    def zero(cls, d, state_dim):
        f = lambda y: np.zeros(state_dim)  # noqa: E731
        return cls(d, state_dim, (f,) * d)

    def field(self, j, y):
        return np.asarray(self.fields[j - 1](y), dtype=np.float64)


def taylor_composite(vfs: VectorFieldSystem, word, y) -> np.ndarray:
    word = tuple(word)
    if not word:
        raise ValueError("empty word")
    if len(word) > MAX_RANK:
        raise ValueError(f"words longer than {MAX_RANK} are not supported")
    if any(not 1 <= w <= vfs.d for w in word):
        raise ValueError(f"letter outside 1..{vfs.d} in {word}")
    y = np.asarray(y, dtype=np.float64)
    if vfs.matrices is not None:
        out = y
        for w in word:
            out = vfs.matrices[w - 1] @ out
        return out
    return _composite(vfs, word, y)


def _composite(vfs, word, y):
    if len(word) == 1:
        return vfs.field(word[0], y)
    v = vfs.field(word[0], y)
    rest = word[1:]
    if len(rest) == 1 and vfs.jacobians is not None:
        return np.asarray(vfs.jacobians[rest[0] - 1](y)) @ v
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return np.zeros(vfs.state_dim)
    eps = vfs.h_fd * max(1.0, float(np.linalg.norm(y))) / norm
    return (_composite(vfs, rest, y + eps * v) - _composite(vfs, rest, y - eps * v)) / (2 * eps)


def euler_step(vfs: VectorFieldSystem, driver_increment: TruncatedSignature, y, rank: int) -> np.ndarray:
    if rank < 1:
        raise ValueError("rank must be at least 1")
    if rank > driver_increment.depth:
        raise ValueError("rank exceeds the depth of the driver increment")
    if rank > MAX_RANK:
        raise ValueError(f"rank above {MAX_RANK}")
    if driver_increment.d != vfs.d:
        raise ValueError("driver and vector fields disagree on d")
    y = np.asarray(y, dtype=np.float64)
    out = y.copy()
    for n in range(1, rank + 1):
        level = driver_increment.levels[n]
        for word in itertools.product(range(1, vfs.d + 1), repeat=n):
            c = level[tuple(w - 1 for w in word)]
            if c != 0.0:
                out = out + c * taylor_composite(vfs, word, y)
    return out


def smooth_signature(xdot, s, t, d, depth, rtol=1e-12, atol=1e-16) -> TruncatedSignature:
    """Signature of a smooth path from its derivative by solving dS = S (x) xdot du."""
    shapes = [(d,) * n for n in range(1, depth + 1)]
    sizes = [d**n for n in range(1, depth + 1)]

    def rhs(u, flat):
        v = np.asarray(xdot(u), dtype=np.float64)
        out = np.empty_like(flat)
        pos = 0
        prev = np.ones(())
        for shape, size in zip(shapes, sizes):
            out[pos : pos + size] = np.multiply.outer(prev, v).ravel()
            prev = flat[pos : pos + size].reshape(shape)
            pos += size
        return out

    y0 = np.zeros(sum(sizes))
    sol = solve_ivp(rhs, (s, t), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise FloatingPointError(f"signature ODE failed on [{s}, {t}]: {sol.message}")
    flat = sol.y[:, -1]
    levels = [np.ones(())]
    pos = 0
    for shape, size in zip(shapes, sizes):
        levels.append(flat[pos : pos + size].reshape(shape))
        pos += size
    return TruncatedSignature(d, depth, tuple(levels))


class Driver:
    """Source of signature increments S_st up to `depth`."""

    def __init__(self, increment, d, depth, path=None, xdot=None):
        self._increment = increment
        self.d = d
        self.depth = depth
        self.path = path
        self.xdot = xdot

    def increment(self, s, t) -> TruncatedSignature:
        return self._increment(s, t)

    @classmethod
    def from_path(cls, path: SamplePath, depth):
        """Piecewise-linear interpolation of a sampled path."""
        return cls(lambda s, t: signature_of_points(restrict(path, s, t), depth), path.d, depth, path=path)

    @classmethod
    def from_functional(cls, functional, d, depth):
        """(s, t, word) -> value, word letters in 1..d."""
        def inc(s, t):
            levels = [np.ones(())]
            for n in range(1, depth + 1):
                arr = np.empty((d,) * n)
                for w in itertools.product(range(1, d + 1), repeat=n):
                    arr[tuple(x - 1 for x in w)] = functional(s, t, w)
                levels.append(arr)
            return TruncatedSignature(d, depth, tuple(levels))
        return cls(inc, d, depth)

    @classmethod
    def from_smooth(cls, xdot, d, depth):
        """Smooth path given by its derivative u -> dx/du."""
        return cls(lambda s, t: smooth_signature(xdot, s, t, d, depth), d, depth, xdot=xdot)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def final(self):
        return self.states[-1]

    def to_csv(self, path):
        dim = self.states.shape[1]
        with open(path, "w") as fh:
            fh.write(",".join(["t"] + [f"y_{i + 1}" for i in range(dim)]) + "\n")
            for t, row in zip(self.times, self.states):
                fh.write(",".join(repr(float(x)) for x in (t, *row)) + "\n")


def solve(vfs: VectorFieldSystem, driver: Driver, partition, y0, rank: int) -> Trajectory:
    """Compose Euler steps of the given rank over consecutive partition intervals."""
    part = np.asarray(partition, dtype=np.float64).ravel()
    if part.size < 2 or np.any(np.diff(part) <= 0):
        raise ValueError("partition must be increasing with at least two points")
    if rank > driver.depth:
        raise ValueError("rank exceeds driver depth")
    y = np.asarray(y0, dtype=np.float64).copy()
    if y.shape != (vfs.state_dim,):
        raise ValueError("initial state has the wrong dimension")
    states = [y]
    for s, t in zip(part[:-1], part[1:]):
        y = euler_step(vfs, driver.increment(s, t), y, rank)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError(f"non-finite state on interval [{s}, {t}]")
        states.append(y)
    return Trajectory(part, np.array(states))


def reference_solution(vfs: VectorFieldSystem, xdot, t0, t1, y0, rtol=1e-12, atol=1e-14) -> np.ndarray:
    """High-accuracy ODE solution of dy/du = sum_j V_j(y) x_j'(u)."""
    def rhs(u, y):
        v = np.asarray(xdot(u), dtype=np.float64)
        return sum(v[j] * vfs.field(j + 1, y) for j in range(vfs.d))

    sol = solve_ivp(rhs, (t0, t1), np.asarray(y0, dtype=np.float64), method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise FloatingPointError(sol.message)
    return sol.y[:, -1]


def rotation_generators():
    """Basis of so(3): infinitesimal rotations about the x, y and z axes."""
    Lx = np.array([[0.0, 0, 0], [0, 0, -1], [0, 1, 0]])
    Ly = np.array([[0.0, 0, 1], [0, 0, 0], [-1, 0, 0]])
    Lz = np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 0]])
    return Lx, Ly, Lz


def convergence_order(vfs, driver, y_exact, t0, t1, y0, rank, step_counts):
    """Errors at each step count and the fitted order -d log(error) / d log(n)."""
    errors = []
    for n in step_counts:
        traj = solve(vfs, driver, np.linspace(t0, t1, n + 1), y0, rank)
        errors.append(float(np.max(np.abs(traj.final - y_exact))))
    slope = np.polyfit(np.log(step_counts), np.log(errors), 1)[0]
    return errors, float(-slope)


def pure_area_driver(a, d=2):
    """Driver whose every increment has zero level 1 and level-2 entries (1,2) = a, (2,1) = -a."""
    def inc(s, t):
        lv2 = np.zeros((d, d))
        lv2[0, 1] = a
        lv2[1, 0] = -a
        return TruncatedSignature(d, 2, (np.ones(()), np.zeros(d), lv2))
    return Driver(inc, d, 2)


def rank_from_alpha(alpha) -> int:
    """floor(1/alpha): the number of signature levels a rough path of regularity alpha carries."""
    return int(math.floor(1.0 / float(alpha)))
