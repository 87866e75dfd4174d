"""Uniform grids, sampled functions, cubes, exponent bookkeeping, and norms.

Everything downstream computes on a uniform cell-centered grid over a box
in R^n (n = 1 or 2).  Node i along an axis sits at origin + (i + 1/2) h and
owns the cell [origin + i h, origin + (i+1) h), so midpoint quadrature
integrates cell-aligned indicators exactly and symmetric boxes never place
a node at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Raised for invalid grid geometry or mismatched grids."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid over the box [origin, origin + M h]^n.

    dim     -- spatial dimension n, 1 or 2
    origin  -- lower corner of the box, length-n tuple
    spacing -- node spacing h > 0, uniform across axes
    extent  -- number of nodes M per axis (M >= 2)
    """

    dim: int
    origin: tuple[float, ...]
    spacing: float
    extent: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        origin = tuple(float(c) for c in np.atleast_1d(self.origin))
        if len(origin) != self.dim:
            raise GridError(f"origin must have {self.dim} components")
        object.__setattr__(self, "origin", origin)
        if not (self.spacing > 0):
            raise GridError("spacing must be positive")
        if self.extent < 2:
            raise GridError("extent must be at least 2")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.extent,) * self.dim

    @property
    def node_count(self) -> int:
        return self.extent**self.dim

    @property
    def box_side(self) -> float:
        return self.extent * self.spacing

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def axis_coords(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        i = np.arange(self.extent)
        return self.origin[axis] + (i + 0.5) * self.spacing

    def coords(self) -> tuple[np.ndarray, ...]:
        """Meshgrid ('ij') of node coordinates, one array per axis."""
        axes = [self.axis_coords(k) for k in range(self.dim)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def node_matrix(self) -> np.ndarray:
        """All node coordinates as an (N, dim) array in row-major order."""
        mesh = self.coords()
        return np.column_stack([m.ravel() for m in mesh])


@dataclass(frozen=True)
class SampledFunction:
    """Real values on the nodes of a grid, shaped like the grid."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape == (self.grid.node_count,):
            vals = vals.reshape(self.grid.shape)
        if vals.shape != self.grid.shape:
            raise GridError(
                f"values shape {vals.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise GridError("values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray) -> "SampledFunction":
        return SampledFunction(self.grid, values)

    def __add__(self, other):
        if isinstance(other, SampledFunction):
            require_same_grid(self, other)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    def __sub__(self, other):
        if isinstance(other, SampledFunction):
            require_same_grid(self, other)
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __mul__(self, other):
        if isinstance(other, SampledFunction):
            require_same_grid(self, other)
            return self.with_values(self.values * other.values)
        return self.with_values(self.values * other)

    __rmul__ = __mul__


def require_same_grid(*fns: SampledFunction) -> GridSpec:
    grid = fns[0].grid
    for fn in fns[1:]:
        if fn.grid != grid:
            raise GridError("sampled functions live on different grids")
    return grid


@dataclass(frozen=True)
class Cube:
    """Axis-parallel cube given by center and side length.

    Membership is half-open per axis: [center - side/2, center + side/2).
    """

    center: tuple[float, ...]
    side: float

    def __post_init__(self):
        center = tuple(float(c) for c in np.atleast_1d(self.center))
        object.__setattr__(self, "center", center)
        if not (self.side > 0):
            raise GridError("cube side must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return self.side ** self.dim

    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - 0.5 * self.side

    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + 0.5 * self.side

    def translate(self, shift) -> "Cube":
        shift = np.atleast_1d(np.asarray(shift, dtype=float))
        return Cube(tuple(np.asarray(self.center) + shift), self.side)


def node_mask(grid: GridSpec, cube: Cube) -> np.ndarray:
    """Boolean mask of grid nodes inside the cube (half-open per axis)."""
    if cube.dim != grid.dim:
        raise GridError("cube dimension does not match grid")
    lo, hi = cube.lower(), cube.upper()
    mask = np.ones(grid.shape, dtype=bool)
    for k in range(grid.dim):
        c = grid.axis_coords(k)
        axis_ok = (c >= lo[k]) & (c < hi[k])
        shape = [1] * grid.dim
        shape[k] = grid.extent
        mask &= axis_ok.reshape(shape)
    return mask


def node_volume(grid: GridSpec, cube: Cube) -> float:
    """Quadrature measure of the cube: (number of member nodes) * h^n."""
    return int(node_mask(grid, cube).sum()) * grid.cell_volume


def cube_average(b: SampledFunction, cube: Cube) -> float:
    """Mean of b over the grid nodes inside the cube.  Exact for constants."""
    mask = node_mask(b.grid, cube)
    count = int(mask.sum())
    if count == 0:
        raise GridError("cube off grid")
    return float(b.values[mask].sum() / count)


def lq_norm(
    f: SampledFunction,
    q: float,
    w: SampledFunction | None = None,
    cube: Cube | None = None,
) -> float:
    """(sum |f|^q w h^n)^(1/q), optionally restricted to nodes in a cube.

    w absent means w == 1; w must be strictly positive on its grid.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    vals = np.abs(f.values)
    if w is not None:
        require_same_grid(f, w)
        if np.any(w.values <= 0):
            raise GridError("weight must be strictly positive")
        wv = w.values
    else:
        wv = None
    if cube is not None:
        mask = node_mask(f.grid, cube)
        vals = vals[mask]
        if wv is not None:
            wv = wv[mask]
    total = np.sum(vals**q if wv is None else vals**q * wv)
    return float((total * f.grid.cell_volume) ** (1.0 / q))


def dyadic_cubes(grid: GridSpec, min_level: int, max_level: int) -> list[Cube]:
    """Dyadic subcubes of the grid box, plus diagonal half-shift translates.

    Level L cubes have side box_side * 2^-L.  At each level the 2^L-per-axis
    aligned cubes are augmented with the cubes shifted by side/2 along every
    axis simultaneously (those that stay inside the box), which breaks the
    dyadic-grid alignment bias when taking suprema over the family.
    """
    if min_level > max_level:
        raise GridError("min_level must not exceed max_level")
    if min_level < 0:
        raise GridError("levels are nonnegative")
    side_min = grid.box_side * 2.0 ** (-max_level)
    if side_min < 2 * grid.spacing:
        raise GridError("cube under-resolved")
    origin = np.asarray(grid.origin)
    cubes: list[Cube] = []
    for level in range(min_level, max_level + 1):
        side = grid.box_side * 2.0 ** (-level)
        per_axis = 2**level
        for offs in np.ndindex(*(per_axis,) * grid.dim):
            lower = origin + np.asarray(offs) * side
            cubes.append(Cube(tuple(lower + 0.5 * side), side))
        for offs in np.ndindex(*(per_axis - 1,) * grid.dim):
            lower = origin + (np.asarray(offs) + 0.5) * side
            cubes.append(Cube(tuple(lower + 0.5 * side), side))
    return cubes


def conjugate_exponent(p: float) -> float:
    """Hoelder conjugate p' = p / (p - 1)."""
    if p <= 1:
        raise ValueError(f"conjugate exponent needs p > 1, got {p}")
    return p / (p - 1.0)


@dataclass(frozen=True)
class ExponentConfig:
    """The exponent tuple (n, alpha, p1, p2) with its derived exponents.

    p is the harmonic combination 1/p = 1/p1 + 1/p2 and q solves
    1/q = 1/p1 + 1/p2 - alpha/n.  Hard requirements: p1, p2 in (1, inf),
    0 < alpha < 2n, and q in (1, inf).  The stricter window p > 1 used by
    the compactness theory is exposed as `theorem_window` and asserted by
    the experiments that take L^q norms of commutators, but is not a
    construction-time invariant: the pure decay-rate experiments run at
    alpha = n where no p1, p2 satisfy both p > 1 and q < inf.
    """

    dim: int
    alpha: float
    p1: float
    p2: float
    p: float = field(init=False)
    q: float = field(init=False)

    def __post_init__(self):
        n = self.dim
        if n not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {n}")
        if not (0 < self.alpha < 2 * n):
            raise ValueError(f"alpha must lie in (0, {2*n}), got {self.alpha}")
        for name, val in (("p1", self.p1), ("p2", self.p2)):
            if not (1 < val < math.inf):
                raise ValueError(f"{name} must lie in (1, inf), got {val}")
        inv_p = 1.0 / self.p1 + 1.0 / self.p2
        inv_q = inv_p - self.alpha / n
        if inv_q <= 0:
            raise ValueError(
                "invalid exponents: requires alpha/n < 1/p1 + 1/p2"
            )
        if inv_q >= 1:
            raise ValueError("invalid exponents: requires q > 1")
        object.__setattr__(self, "p", 1.0 / inv_p)
        object.__setattr__(self, "q", 1.0 / inv_q)

    @property
    def p1_conj(self) -> float:
        return conjugate_exponent(self.p1)

    @property
    def p2_conj(self) -> float:
        return conjugate_exponent(self.p2)

    @property
    def q_conj(self) -> float:
        return conjugate_exponent(self.q)

    @property
    def p_conj(self) -> float:
        return conjugate_exponent(self.p)

    @property
    def theorem_window(self) -> bool:
        """True when the full compactness-theorem hypotheses 1 < p, q hold."""
        return self.p > 1

    def require_theorem_window(self):
        if not self.theorem_window:
            raise ValueError(
                f"exponent config needs p > 1 for norm experiments, got p = {self.p}"
            )


def save_csv(fn: SampledFunction, path) -> None:
    """Write a sampled function as CSV: header line, then one value per node.

    Header: `# dim,origin...,h,M`.  Floats use shortest round-trip decimal
    formatting, so load_csv(save_csv(f)) is bit-exact.
    """
    g = fn.grid
    head = [str(g.dim), *[repr(c) for c in g.origin], repr(g.spacing), str(g.extent)]
    lines = ["# " + ",".join(head)]
    lines.extend(repr(v) for v in fn.values.ravel())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_csv(path) -> SampledFunction:
    """Inverse of save_csv."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise GridError("missing sampled-function header")
        parts = header.lstrip("# ").split(",")
        dim = int(parts[0])
        origin = tuple(float(c) for c in parts[1 : 1 + dim])
        spacing = float(parts[1 + dim])
        extent = int(parts[2 + dim])
        values = np.array([float(line) for line in fh if line.strip()])
    grid = GridSpec(dim=dim, origin=origin, spacing=spacing, extent=extent)
    return SampledFunction(grid, values)
