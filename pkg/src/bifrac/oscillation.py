"""Mean oscillation, BMO norms over cube families, and vanishing-oscillation
moduli at small scales, large scales, and large translations.

All suprema are family suprema (finite cube families), hence lower bounds
for the true BMO quantities; reports label them as such.  The finite grid
never certifies a limit: the moduli lists carry fitted log-log trend slopes
and the caller judges "decaying" versus "non-decaying at resolution".
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .grids import Cube, GridError, SampledFunction, cube_average, node_mask


def mean_oscillation(b: SampledFunction, cube: Cube) -> float:
    """Average of |b - b_Q| over the grid nodes of Q; zero iff b is constant
    on those nodes."""
    mask = node_mask(b.grid, cube)
    count = int(mask.sum())
    if count == 0:
        raise GridError("cube off grid")
    vals = b.values[mask]
    return float(np.abs(vals - vals.sum() / count).sum() / count)


def bmo_norm(b: SampledFunction, cubes: list[Cube]) -> float:
    """Family supremum of the mean oscillation (a lower bound of the true
    BMO norm)."""
    if not cubes:
        raise ValueError("cube family is empty")
    return max(mean_oscillation(b, q) for q in cubes)


def normalize_bmo(b: SampledFunction, cubes: list[Cube]) -> SampledFunction:
    """Rescale b so its family BMO supremum is exactly 1, and re-check."""
    norm = bmo_norm(b, cubes)
    if norm == 0:
        raise ValueError("zero oscillation; cannot normalize")
    scaled = b * (1.0 / norm)
    if not math.isclose(bmo_norm(scaled, cubes), 1.0, rel_tol=1e-12):
        raise AssertionError("normalization failed to land on 1")
    return scaled


def _fit_loglog_slope(params: list[float], values: list[float]) -> float | None:
    pts = [(p, v) for p, v in zip(params, values) if p > 0 and v > 0]
    if len(pts) < 2:
        return None
    x = np.log([p for p, _ in pts])
    y = np.log([v for _, v in pts])
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True)
class OscillationReport:
    """Family BMO estimate plus the three vanishing-oscillation moduli.

    small_scale / large_scale: (cube volume, positioned-cube supremum of
    mean oscillation) pairs.  translation: (shift distance, average of
    |b(x + y) - b_Q| over the fixed reference cube) pairs; these are not
    oscillations and may legitimately exceed the BMO estimate, so only the
    scale moduli participate in the bmo_norm >= modulus invariant.
    """

    bmo_norm: float
    small_scale: list[tuple[float, float]] = field(default_factory=list)
    large_scale: list[tuple[float, float]] = field(default_factory=list)
    translation: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        for kind in (self.small_scale, self.large_scale, self.translation):
            if any(v < 0 for _, v in kind):
                raise ValueError("moduli must be nonnegative")
        worst = max(
            (v for _, v in [*self.small_scale, *self.large_scale]),
            default=0.0,
        )
        if self.bmo_norm < worst - 1e-12:
            raise ValueError("bmo_norm must dominate the scale moduli")

    def small_scale_slope(self) -> float | None:
        return _fit_loglog_slope(*zip(*self.small_scale)) if self.small_scale else None

    def large_scale_slope(self) -> float | None:
        return _fit_loglog_slope(*zip(*self.large_scale)) if self.large_scale else None

    def translation_slope(self) -> float | None:
        return _fit_loglog_slope(*zip(*self.translation)) if self.translation else None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "parameter", "modulus"])
            writer.writerow(["bmo_family_supremum", "", repr(self.bmo_norm)])
            for kind, rows in (
                ("small_scale", self.small_scale),
                ("large_scale", self.large_scale),
                ("translation", self.translation),
            ):
                for param, value in rows:
                    writer.writerow([kind, repr(param), repr(value)])


def positioned_cubes(grid, volume: float) -> list[Cube]:
    """Every cube of the given volume slid to all node-aligned positions
    (lower corner on origin + i h, stride one node) inside the grid box."""
    side = volume ** (1.0 / grid.dim)
    if side < 2 * grid.spacing:
        raise GridError("cube under-resolved")
    if side > grid.box_side:
        raise GridError("cube larger than the grid box")
    h = grid.spacing
    max_steps = int(math.floor((grid.box_side - side) / h + 1e-9))
    origin = np.asarray(grid.origin)
    cubes = []
    for offs in np.ndindex(*(max_steps + 1,) * grid.dim):
        lower = origin + np.asarray(offs) * h
        cubes.append(Cube(tuple(lower + 0.5 * side), side))
    return cubes


def scale_modulus(b: SampledFunction, volume: float) -> float:
    """Supremum of mean oscillation over all positioned cubes of one volume."""
    return max(mean_oscillation(b, q) for q in positioned_cubes(b.grid, volume))


def translation_modulus(b: SampledFunction, ref_cube: Cube, shift) -> float:
    """Average of |b(x + y) - b_Q| over x in the reference cube Q, with b_Q
    the average over the unshifted cube.

    The shift must move nodes onto nodes (whole multiples of h) and keep
    the shifted cube on the grid.
    """
    grid = b.grid
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    cells = shift / grid.spacing
    if not np.allclose(cells, np.round(cells), atol=1e-9):
        raise GridError("shift must be a whole multiple of the grid spacing")
    b_q = cube_average(b, ref_cube)
    shifted = ref_cube.translate(shift)
    mask = node_mask(grid, shifted)
    count = int(mask.sum())
    expected = int(node_mask(grid, ref_cube).sum())
    if count != expected:
        raise GridError("shifted cube leaves the grid box")
    return float(np.abs(b.values[mask] - b_q).sum() / count)


def cmo_moduli(
    b: SampledFunction,
    scales: list[float],
    ref_cube: Cube,
    shifts: list,
) -> OscillationReport:
    """Assemble the three vanishing-oscillation moduli into a report.

    scales are cube volumes; they are split into the small- and large-scale
    lists at the geometric midpoint of their range.  The report's BMO field
    is the supremum over every cube examined (scale-scan cubes included),
    so it dominates all scale moduli by construction.
    """
    if not scales:
        raise ValueError("no scales given")
    scale_rows = sorted((float(a), scale_modulus(b, a)) for a in scales)
    log_lo = math.log(scale_rows[0][0])
    log_hi = math.log(scale_rows[-1][0])
    split = math.exp(0.5 * (log_lo + log_hi))
    small = [(a, v) for a, v in scale_rows if a <= split]
    large = [(a, v) for a, v in scale_rows if a > split]
    translation = [
        (float(np.linalg.norm(np.atleast_1d(y))), translation_modulus(b, ref_cube, y))
        for y in shifts
    ]
    bmo = max(v for _, v in scale_rows)
    bmo = max(bmo, mean_oscillation(b, ref_cube))
    return OscillationReport(
        bmo_norm=bmo,
        small_scale=small,
        large_scale=large,
        translation=translation,
    )
