"""Periodic grids and grid functions.

Everything downstream (kernels, semidistances, masks) lives on a uniform
periodic grid over the unit cell [0,1)^dim with spacing h = 1/n.  Grid
functions are stored flat in C order so that node index 0 is the origin and
lexicographic order of coordinates equals index order; argmin tie-breaking
relies on this.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "GridSpec",
    "GridFn",
    "BoxSpec",
    "save_gridfn_csv",
    "load_gridfn_csv",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [0,1)^dim.

    dim : 1 or 2
    n   : points per axis, at least 8
    """

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError(f"grid dimension must be 1 or 2, got {self.dim}")
        if self.n < 8:
            raise ConfigError(f"grid needs n >= 8 points per axis, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    def axis(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def points(self) -> np.ndarray:
        """All node coordinates, shape (size, dim), C order."""
        ax = self.axis()
        if self.dim == 1:
            return ax[:, None]
        gx, gy = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Map coordinates into the fundamental cell [0,1)."""
        return np.mod(x, 1.0)

    def min_image(self, d: np.ndarray) -> np.ndarray:
        """Minimal periodic representative of a displacement, in [-1/2, 1/2)."""
        return np.mod(np.asarray(d) + 0.5, 1.0) - 0.5

    def torus_dist(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        d = self.min_image(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        return np.linalg.norm(np.atleast_1d(d).reshape(-1, self.dim), axis=-1)

    def index_of(self, x: np.ndarray) -> int:
        """Flat index of the node nearest to x."""
        ix = np.mod(np.rint(np.asarray(x, dtype=float) / self.h).astype(int), self.n)
        ix = np.atleast_1d(ix)
        flat = 0
        for a in range(self.dim):
            flat = flat * self.n + ix[a]
        return int(flat)

    def offsets_within(self, radius: float, include_zero: bool = False) -> np.ndarray:
        """Integer offsets k with |k|*h <= radius, shape (m, dim).

        Ordered lexicographically; the zero offset is optional.  Offsets are
        clipped to half the period so each edge has a unique minimal image.
        """
        kmax = min(int(np.floor(radius / self.h + 1e-12)), self.n // 2)
        rng = np.arange(-kmax, kmax + 1)
        if self.dim == 1:
            ks = rng[:, None]
        else:
            kx, ky = np.meshgrid(rng, rng, indexing="ij")
            ks = np.stack([kx.ravel(), ky.ravel()], axis=1)
        norms = np.linalg.norm(ks, axis=1) * self.h
        keep = norms <= radius + 1e-12
        if not include_zero:
            keep &= norms > 0
        return ks[keep]

    def roll_flat(self, values: np.ndarray, k: np.ndarray) -> np.ndarray:
        """values evaluated at node - k*h, as a flat array (periodic shift).

        With out[i] = values[i - k] the result reads off predecessor data for
        the edge (node - k*h) -> node.
        """
        v = values.reshape(self.shape)
        shifted = np.roll(v, shift=tuple(int(c) for c in np.atleast_1d(k)), axis=tuple(range(self.dim)))
        return shifted.ravel()

    def roll_rows(self, table: np.ndarray, k: np.ndarray) -> np.ndarray:
        """Row-shifted kernel table: out[i, j] = table[i + k, j] (periodic)."""
        t = table.reshape(self.shape + (table.shape[1],))
        shifted = np.roll(t, shift=tuple(-int(c) for c in np.atleast_1d(k)), axis=tuple(range(self.dim)))
        return shifted.reshape(table.shape)


@dataclass
class GridFn:
    """A real-valued function sampled on a periodic grid, stored flat."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size != self.grid.size:
            raise ConfigError(
                f"value count {self.values.size} does not match grid size {self.grid.size}"
            )

    @classmethod
    def from_callable(cls, grid: GridSpec, f) -> "GridFn":
        return cls(grid, np.asarray(f(grid.points()), dtype=float).ravel())

    @classmethod
    def zeros(cls, grid: GridSpec) -> "GridFn":
        return cls(grid, np.zeros(grid.size))

    def copy(self) -> "GridFn":
        return GridFn(self.grid, self.values.copy())

    def shaped(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def normalized_at_origin(self) -> "GridFn":
        """Subtract the value at node 0 so the result vanishes at the origin."""
        return GridFn(self.grid, self.values - self.values[0])

    def __add__(self, other):
        if isinstance(other, GridFn):
            return GridFn(self.grid, self.values + other.values)
        return GridFn(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridFn):
            return GridFn(self.grid, self.values - other.values)
        return GridFn(self.grid, self.values - other)

    def __mul__(self, scalar):
        return GridFn(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def central_gradient(self) -> np.ndarray:
        """Central-difference gradient at every node, shape (size, dim)."""
        v = self.shaped()
        h = self.grid.h
        comps = []
        for a in range(self.grid.dim):
            comps.append((np.roll(v, -1, axis=a) - np.roll(v, 1, axis=a)) / (2 * h))
        return np.stack([c.ravel() for c in comps], axis=1)

    def one_sided_slopes(self, axis: int) -> tuple:
        """(backward, forward) difference quotients along an axis."""
        v = self.shaped()
        h = self.grid.h
        fwd = (np.roll(v, -1, axis=axis) - v) / h
        bwd = (v - np.roll(v, 1, axis=axis)) / h
        return bwd.ravel(), fwd.ravel()

    def second_differences(self, k: np.ndarray) -> np.ndarray:
        """Centered second difference quotient along integer offset k.

        q(x) = (u(x + kh) + u(x - kh) - 2 u(x)) / |kh|^2, flat array.
        """
        v = self.shaped()
        k = np.atleast_1d(np.asarray(k, dtype=int))
        ax = tuple(range(self.grid.dim))
        plus = np.roll(v, shift=tuple(-k), axis=ax)
        minus = np.roll(v, shift=tuple(+k), axis=ax)
        step2 = float(np.dot(k, k)) * self.grid.h**2
        return ((plus + minus - 2 * v) / step2).ravel()

    def periodic_eval(self, x: np.ndarray) -> np.ndarray:
        """Multilinear periodic interpolation at arbitrary points."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u = x / self.grid.h
        i0 = np.floor(u).astype(int)
        frac = u - i0
        v = self.shaped()
        n = self.grid.n
        if self.grid.dim == 1:
            a = np.mod(i0[:, 0], n)
            b = np.mod(i0[:, 0] + 1, n)
            out = v[a] * (1 - frac[:, 0]) + v[b] * frac[:, 0]
        else:
            ax, ay = np.mod(i0[:, 0], n), np.mod(i0[:, 1], n)
            bx, by = np.mod(i0[:, 0] + 1, n), np.mod(i0[:, 1] + 1, n)
            fx, fy = frac[:, 0], frac[:, 1]
            out = (
                v[ax, ay] * (1 - fx) * (1 - fy)
                + v[bx, ay] * fx * (1 - fy)
                + v[ax, by] * (1 - fx) * fy
                + v[bx, by] * fx * fy
            )
        return out

    def as_callable(self):
        """Periodic-extension callable view, for the environment metrics."""
        return lambda x: self.periodic_eval(x)


@dataclass(frozen=True)
class BoxSpec:
    """Non-periodic lattice on [-radius, radius]^dim for growing-box runs."""

    dim: int
    radius: float
    points_per_unit: int = 32

    @property
    def h(self) -> float:
        return 1.0 / self.points_per_unit

    @property
    def n_per_axis(self) -> int:
        return 2 * int(round(self.radius * self.points_per_unit)) + 1

    @property
    def size(self) -> int:
        return self.n_per_axis**self.dim

    def axis(self) -> np.ndarray:
        m = int(round(self.radius * self.points_per_unit))
        return np.arange(-m, m + 1) * self.h

    def points(self) -> np.ndarray:
        ax = self.axis()
        if self.dim == 1:
            return ax[:, None]
        gx, gy = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def offsets_within(self, radius: float) -> np.ndarray:
        kmax = int(np.floor(radius / self.h + 1e-12))
        rng = np.arange(-kmax, kmax + 1)
        if self.dim == 1:
            ks = rng[:, None]
        else:
            kx, ky = np.meshgrid(rng, rng, indexing="ij")
            ks = np.stack([kx.ravel(), ky.ravel()], axis=1)
        norms = np.linalg.norm(ks, axis=1) * self.h
        keep = (norms <= radius + 1e-12) & (norms > 0)
        return ks[keep]


def save_gridfn_csv(fn: GridFn, path) -> None:
    """Write a grid function as CSV with a two-line header (shape, spacing)."""
    buf = io.StringIO()
    buf.write(f"# gridfn dim={fn.grid.dim} n={fn.grid.n}\n")
    buf.write(f"# h={fn.grid.h!r}\n")
    cols = ",".join(f"x{a}" for a in range(fn.grid.dim))
    buf.write(f"index,{cols},value\n")
    pts = fn.grid.points()
    for i, v in enumerate(fn.values):
        coord = ",".join(repr(float(c)) for c in pts[i])
        buf.write(f"{i},{coord},{float(v)!r}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_gridfn_csv(path) -> GridFn:
    with open(path) as fh:
        head = fh.readline().strip()
        fh.readline()  # spacing line, implied by n
        fh.readline()  # column names
        if not head.startswith("# gridfn"):
            raise ConfigError(f"{path} is not a gridfn CSV (bad header {head!r})")
        fields = dict(tok.split("=") for tok in head.split()[2:])
        grid = GridSpec(dim=int(fields["dim"]), n=int(fields["n"]))
        vals = np.zeros(grid.size)
        for line in fh:
            parts = line.strip().split(",")
            vals[int(parts[0])] = float(parts[-1])
    return GridFn(grid, vals)
