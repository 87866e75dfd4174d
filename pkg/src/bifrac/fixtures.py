"""Symbol and weight fixtures used by the experiments and tests.

Each fixture targets a specific oscillation behavior: smooth bumps have
vanishing moduli at every scale, sine waves keep large-scale and
translated oscillation alive, the log-distance symbol is the classic
bounded-mean-oscillation function that is not in the vanishing class, and
power weights drive the Muckenhoupt machinery.
"""

from __future__ import annotations

import numpy as np

from .grids import Cube, ExponentConfig, GridSpec, SampledFunction, lq_norm


def _radial(grid: GridSpec, center) -> np.ndarray:
    center = np.atleast_1d(np.asarray(center, dtype=float))
    mesh = grid.coords()
    r_sq = np.zeros(grid.shape)
    for k in range(grid.dim):
        r_sq += (mesh[k] - center[k]) ** 2
    return np.sqrt(r_sq)


def smooth_bump(grid: GridSpec, center, radius: float, amplitude: float = 1.0) -> SampledFunction:
    """C-infinity bump exp(1 - 1/(1 - (r/radius)^2)) inside r < radius."""
    r = _radial(grid, center) / radius
    vals = np.zeros(grid.shape)
    inside = r < 1.0
    vals[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return SampledFunction(grid, vals)


def haar_step(grid: GridSpec, cube: Cube, axis: int = 0) -> SampledFunction:
    """+1 on the lower half of the cube, -1 on the upper half (along one
    axis), 0 outside."""
    from .grids import node_mask

    mesh = grid.coords()
    vals = np.zeros(grid.shape)
    mask = node_mask(grid, cube)
    left = mesh[axis] < cube.center[axis]
    vals[mask & left] = 1.0
    vals[mask & ~left] = -1.0
    return SampledFunction(grid, vals)


def sine_wave(grid: GridSpec, period: float, axis: int = 0) -> SampledFunction:
    """sin(2 pi x_axis / period)."""
    mesh = grid.coords()
    return SampledFunction(grid, np.sin(2.0 * np.pi * mesh[axis] / period))


def log_distance(grid: GridSpec, center) -> SampledFunction:
    """log |x - center|; finite on cell-centered grids that avoid center."""
    r = _radial(grid, center)
    if np.any(r == 0):
        raise ValueError("center coincides with a grid node")
    return SampledFunction(grid, np.log(r))


def power_weight(grid: GridSpec, exponent: float, center=None) -> SampledFunction:
    """|x - center|^exponent (center defaults to the box center).

    Cell-centered nodes keep the distance strictly positive, so negative
    exponents stay finite.
    """
    if center is None:
        center = tuple(
            grid.origin[k] + 0.5 * grid.box_side for k in range(grid.dim)
        )
    r = _radial(grid, center)
    if np.any(r == 0):
        raise ValueError("center coincides with a grid node")
    return SampledFunction(grid, r**exponent)


def indicator(grid: GridSpec, cube: Cube) -> SampledFunction:
    from .grids import node_mask

    return SampledFunction(grid, node_mask(grid, cube).astype(float))


def random_band_limited(
    grid: GridSpec, rng: np.random.Generator, modes: int = 6, amplitude: float = 1.0
) -> SampledFunction:
    """Random low-frequency trigonometric field; generic enough that its
    oscillation never vanishes on admissible cubes."""
    mesh = grid.coords()
    vals = np.zeros(grid.shape)
    for _ in range(modes):
        freq = rng.integers(1, 5, size=grid.dim)
        phase = rng.uniform(0, 2 * np.pi, size=grid.dim)
        coef = rng.normal(scale=amplitude)
        wave = np.ones(grid.shape)
        for k in range(grid.dim):
            wave *= np.sin(
                2 * np.pi * freq[k] * (mesh[k] - grid.origin[k]) / grid.box_side
                + phase[k]
            )
        vals += coef * wave
    return SampledFunction(grid, vals)


def unit_ball_pair(
    grid: GridSpec,
    cfg: ExponentConfig,
    rng: np.random.Generator,
    support: Cube,
) -> tuple[SampledFunction, SampledFunction]:
    """A random pair normalized to the unit spheres of L^p1 and L^p2.

    f is a random bump superposition inside the given support cube; g is a
    broad positive profile over the whole box (constant plus gentle
    ripples), the shape that saturates the slow far-field decay of the
    commutator tails.
    """
    f = SampledFunction(grid, np.zeros(grid.shape))
    for _ in range(rng.integers(1, 4)):
        center = np.asarray(support.center) + rng.uniform(
            -0.3 * support.side, 0.3 * support.side, size=grid.dim
        )
        radius = support.side * rng.uniform(0.15, 0.45)
        f = f + smooth_bump(grid, center, radius, amplitude=rng.normal())
    scale = lq_norm(f, cfg.p1)
    if scale == 0:
        raise ValueError("degenerate random pair")
    f = f * (1.0 / scale)

    mesh = grid.coords()
    ripple = np.ones(grid.shape)
    for k in range(grid.dim):
        freq = rng.integers(1, 4)
        ripple += 0.3 * rng.uniform() * np.sin(
            2 * np.pi * freq * (mesh[k] - grid.origin[k]) / grid.box_side
        )
    g = SampledFunction(grid, ripple)
    g = g * (1.0 / lq_norm(g, cfg.p2))
    return f, g
