"""Compactness experiments: witness pairs, decay-rate fits, weighted
Frechet-Kolmogorov-Riesz moduli, separation runs over cube schemes, and
truncation convergence.

The experiments gather finite evidence only.  A separation run reports a
pairwise distance matrix and re-derives the annulus/tail/sliver triangle
chain numerically for each pair; it never claims non-compactness, just
"non-Cauchy at this resolution".
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .grids import (
    Cube,
    ExponentConfig,
    GridError,
    GridSpec,
    SampledFunction,
    cube_average,
    lq_norm,
    node_mask,
    node_volume,
    require_same_grid,
)
from .kernels import KernelParams
from .operators import ApplyMode, apply, commutator, commutator_reference, oscillation_pair
from .oscillation import mean_oscillation

GAMMA1_GRID = (2.5, 4.0, 8.0, 16.0)
GAMMA2_FACTORS = (4.0, 8.0, 16.0)


class ZeroOscillation(ValueError):
    """The symbol is constant on the cube, so no witness exists."""


class SchemeError(ValueError):
    """The requested cube scheme does not fit inside the grid box."""

    def __init__(self, message: str, feasible_length: int):
        super().__init__(f"{message}; largest feasible sequence length {feasible_length}")
        self.feasible_length = feasible_length


@dataclass(frozen=True)
class WitnessPair:
    """The mean-zero sign pattern f and normalized indicator g on a cube.

    epsilon_achieved is the mean oscillation of the symbol on the cube;
    the construction requires it to be positive.
    """

    f: SampledFunction
    g: SampledFunction
    cube: Cube
    c0: float
    epsilon_achieved: float


def witness_pair(b: SampledFunction, cube: Cube, cfg: ExponentConfig) -> WitnessPair:
    """Construct the witness pair for symbol b on the cube.

    f = |Q|^(-1/p1) (sgn(b - b_Q) - c0) chi_Q with c0 the mean of the sign
    pattern, computed with the same node-mean quadrature as every other
    average, which makes the discrete mean of f vanish exactly; |Q| is the
    quadrature measure of the cube so that ||g||_{p2} = 1 exactly.
    """
    grid = b.grid
    mask = node_mask(grid, cube)
    count = int(mask.sum())
    if count == 0:
        raise GridError("cube off grid")
    vals = b.values[mask]
    b_q = vals.sum() / count
    dev = vals - b_q
    eps = float(np.abs(dev).sum() / count)
    if eps == 0.0:
        raise ZeroOscillation("zero oscillation; witness undefined")

    sgn = np.sign(dev)
    c0 = float(sgn.sum() / count)
    volume = count * grid.cell_volume

    f_vals = np.zeros(grid.shape)
    f_vals[mask] = volume ** (-1.0 / cfg.p1) * (sgn - c0)
    g_vals = np.zeros(grid.shape)
    g_vals[mask] = volume ** (-1.0 / cfg.p2)

    pair = WitnessPair(
        f=SampledFunction(grid, f_vals),
        g=SampledFunction(grid, g_vals),
        cube=cube,
        c0=c0,
        epsilon_achieved=eps,
    )
    assert -1.0 < c0 < 1.0
    assert abs(np.sum(pair.f.values) * grid.cell_volume) <= 1e-12
    assert np.all(np.abs(pair.f.values) <= 2.0 * volume ** (-1.0 / cfg.p1))
    return pair


@dataclass(frozen=True)
class CubeScheme:
    """A shrinking, growing, or translating cube sequence.

    ratio_bound is the declared bound on consecutive side ratios (later over
    earlier for shrinking, earlier over later for growing), the quantity
    beta/(2 gamma2) of the sliver analysis.  disjoint_radius is the radius
    gamma2 d whose balls around the centers must be pairwise disjoint in
    the translating variant.
    """

    variant: str
    cubes: tuple[Cube, ...]
    ratio_bound: float | None = None
    disjoint_radius: float | None = None

    def __post_init__(self):
        if self.variant not in ("shrinking", "growing", "translating"):
            raise ValueError(f"unknown scheme variant {self.variant!r}")
        object.__setattr__(self, "cubes", tuple(self.cubes))
        if len(self.cubes) < 2:
            raise ValueError("scheme needs at least two cubes")
        sides = [c.side for c in self.cubes]
        if self.variant == "shrinking":
            if self.ratio_bound is None:
                raise ValueError("shrinking scheme needs ratio_bound")
            for a, bb in zip(sides, sides[1:]):
                if not (bb / a < self.ratio_bound):
                    raise ValueError("side ratio violates the shrinking bound")
        elif self.variant == "growing":
            if self.ratio_bound is None:
                raise ValueError("growing scheme needs ratio_bound")
            for a, bb in zip(sides, sides[1:]):
                if not (a / bb < self.ratio_bound):
                    raise ValueError("side ratio violates the growing bound")
        else:
            if self.disjoint_radius is None:
                raise ValueError("translating scheme needs disjoint_radius")
            centers = [np.asarray(c.center) for c in self.cubes]
            for i in range(len(centers)):
                for j in range(i + 1, len(centers)):
                    if np.linalg.norm(centers[i] - centers[j]) < 2 * self.disjoint_radius:
                        raise ValueError("disjointness radius violated")

    def max_ratio(self) -> float | None:
        sides = [c.side for c in self.cubes]
        if self.variant == "shrinking":
            return max(bb / a for a, bb in zip(sides, sides[1:]))
        if self.variant == "growing":
            return max(a / bb for a, bb in zip(sides, sides[1:]))
        return None


def _cube_fits(grid: GridSpec, cube: Cube) -> bool:
    lo = np.asarray(grid.origin)
    hi = lo + grid.box_side
    return bool(np.all(cube.lower() >= lo - 1e-12) and np.all(cube.upper() <= hi + 1e-12))


def make_scheme(
    grid: GridSpec,
    variant: str,
    count: int,
    base_side: float,
    *,
    ratio: float = 0.25,
    ratio_bound: float | None = None,
    center=None,
    drift_frac: float = 0.0,
    gamma2: float | None = None,
    spacing: float | None = None,
    rng: np.random.Generator | None = None,
) -> CubeScheme:
    """Generate a cube scheme inside the grid box.

    shrinking: sides base_side * ratio^j; growing: base_side / ratio^j
    (base_side is the smallest cube); translating: equal cubes stepped
    along the first axis with center spacing `spacing` (default just above
    the disjointness threshold 2 gamma2 base_side).  drift_frac jitters
    each center by up to that fraction of its own side.
    """
    if count < 2:
        raise ValueError("count must be at least 2")
    if center is None:
        center = tuple(grid.origin[k] + 0.5 * grid.box_side for k in range(grid.dim))
    center = np.atleast_1d(np.asarray(center, dtype=float))
    rng = rng or np.random.default_rng(0)

    cubes: list[Cube] = []
    if variant in ("shrinking", "growing"):
        if ratio_bound is None:
            ratio_bound = 1.25 * ratio
        if not (0 < ratio < ratio_bound < 1):
            raise ValueError("need 0 < ratio < ratio_bound < 1")
        for j in range(count):
            side = base_side * ratio**j if variant == "shrinking" else base_side / ratio**j
            if side < 2 * grid.spacing:
                raise SchemeError("cube under-resolved", feasible_length=j)
            drift = rng.uniform(-1.0, 1.0, size=grid.dim) * drift_frac * side
            cube = Cube(tuple(center + drift), side)
            if not _cube_fits(grid, cube):
                raise SchemeError("cube leaves the grid box", feasible_length=j)
            cubes.append(cube)
        return CubeScheme(variant, tuple(cubes), ratio_bound=ratio_bound)

    if variant == "translating":
        if gamma2 is None:
            raise ValueError("translating scheme needs gamma2")
        radius = gamma2 * base_side
        if spacing is None:
            spacing = 2.0 * radius * 1.0625
        step = np.zeros(grid.dim)
        step[0] = spacing
        start = center - 0.5 * (count - 1) * step
        for j in range(count):
            cube = Cube(tuple(start + j * step), base_side)
            if not _cube_fits(grid, cube):
                raise SchemeError("translate leaves the grid box", feasible_length=j)
            cubes.append(cube)
        return CubeScheme(variant, tuple(cubes), disjoint_radius=radius)

    raise ValueError(f"unknown scheme variant {variant!r}")


# --------------------------------------------------------------------------
# decay-rate fits


def _fit_slope(radii, values) -> float:
    x = np.log(np.asarray(radii, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def _snap_to_nodes(grid: GridSpec, points: np.ndarray) -> np.ndarray:
    origin = np.asarray(grid.origin)
    idx = np.round((points - origin) / grid.spacing - 0.5).astype(int)
    if np.any(idx < 0) or np.any(idx >= grid.extent):
        raise GridError("annulus leaves the grid box")
    return origin + (idx + 0.5) * grid.spacing


def annulus_points(grid: GridSpec, center, radius: float, samples: int) -> np.ndarray:
    """Grid nodes nearest to the sphere |x - center| = radius."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if grid.dim == 1:
        raw = np.array([[center[0] - radius], [center[0] + radius]])
    else:
        theta = 2 * np.pi * (np.arange(samples) + 0.5) / samples
        raw = center + radius * np.column_stack([np.cos(theta), np.sin(theta)])
    snapped = _snap_to_nodes(grid, raw)
    return np.unique(snapped, axis=0)


@dataclass(frozen=True)
class SlopeFit:
    """Fitted decay exponents of the witness-pair far fields.

    s1: slope of the annulus-averaged |I((b - b_Q) f, g)| (upper estimate
    rate -(2n - alpha)); s2: slope of its annulus minimum (the lower
    envelope); s3: slope of the annulus-averaged |I(f, g)| (mean-zero rate
    -(2n - alpha + 1)).  est2_coefficients lists the lower-envelope values
    divided by eps |Q|^(1/p1' + 1/p2') r^(alpha - 2n), the constants whose
    positivity and stability the regression tests pin.
    """

    s1: float
    s2: float
    s3: float
    radii: tuple[float, ...]
    est1_mean: tuple[float, ...]
    est1_min: tuple[float, ...]
    est3_mean: tuple[float, ...]
    est2_coefficients: tuple[float, ...]

    def __iter__(self):
        return iter((self.s1, self.s2, self.s3))


def estimate_slopes(
    b: SampledFunction,
    cube: Cube,
    cfg: ExponentConfig,
    radii,
    *,
    params: KernelParams | None = None,
    samples_per_annulus: int = 16,
) -> SlopeFit:
    """Fit the far-field decay exponents of the witness integrands at
    annulus-sampled points around the cube center."""
    grid = b.grid
    params = params or KernelParams(cfg.dim, cfg.alpha)
    radii = sorted(float(r) for r in radii)
    min_r = 2.0 * math.sqrt(grid.dim) * cube.side
    if radii[0] <= min_r:
        raise ValueError(
            f"radii must exceed 2 sqrt(n) d = {min_r} (outside the doubled cube)"
        )
    pair = witness_pair(b, cube, cfg)
    eps = pair.epsilon_achieved

    means1, mins1, means3, coeffs = [], [], [], []
    vol_pow = cube.volume ** (1.0 / cfg.p1_conj + 1.0 / cfg.p2_conj)
    for r in radii:
        points = annulus_points(grid, cube.center, r, samples_per_annulus)
        est1, est3 = oscillation_pair(b, pair.f, pair.g, cube, params, points)
        means1.append(float(est1.mean()))
        mins1.append(float(est1.min()))
        means3.append(float(est3.mean()))
        coeffs.append(float(est1.min()) / (eps * vol_pow * r ** (cfg.alpha - 2 * cfg.dim)))
    return SlopeFit(
        s1=_fit_slope(radii, means1),
        s2=_fit_slope(radii, mins1),
        s3=_fit_slope(radii, means3),
        radii=tuple(radii),
        est1_mean=tuple(means1),
        est1_min=tuple(mins1),
        est3_mean=tuple(means3),
        est2_coefficients=tuple(coeffs),
    )


# --------------------------------------------------------------------------
# Frechet-Kolmogorov-Riesz moduli


def translate_cells(fn: SampledFunction, cells) -> SampledFunction:
    """f(. + t) for a whole-cell shift t = cells * h, zero beyond the box."""
    cells = np.atleast_1d(np.asarray(cells))
    if cells.shape != (fn.grid.dim,) or not np.issubdtype(cells.dtype, np.integer):
        raise GridError("cells must be one integer per axis")
    out = np.zeros_like(fn.values)
    src, dst = [], []
    m = fn.grid.extent
    for c in cells:
        c = int(c)
        if abs(c) >= m:
            return fn.with_values(out)
        if c >= 0:
            src.append(slice(c, m))
            dst.append(slice(0, m - c))
        else:
            src.append(slice(0, m + c))
            dst.append(slice(-c, m))
    out[tuple(dst)] = fn.values[tuple(src)]
    return fn.with_values(out)


def _cells_from_shift(grid: GridSpec, shift) -> np.ndarray:
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    cells = shift / grid.spacing
    if not np.allclose(cells, np.round(cells), atol=1e-9):
        raise GridError("shift must be a whole multiple of the grid spacing")
    return np.round(cells).astype(int)


@dataclass(frozen=True)
class FkrModuli:
    """Family suprema of the three pre-compactness moduli.

    bound: sup of L^q(w) norms.  tails: (radius A, sup of the tail mass
    integral beyond |x| > A).  translations: (|t|, sup of the translation
    modulus ||f(. + t) - f||_{L^q(w)}).
    """

    q: float
    bound: float
    tails: tuple[tuple[float, float], ...]
    translations: tuple[tuple[float, float], ...]

    def tail_slope(self) -> float | None:
        pts = [(a, v) for a, v in self.tails if v > 0]
        if len(pts) < 2:
            return None
        return _fit_slope([a for a, _ in pts], [v for _, v in pts])


def fkr_moduli(
    outputs: list[SampledFunction],
    q: float,
    w: SampledFunction | None = None,
    radii=(),
    shifts=(),
) -> FkrModuli:
    """Evaluate the weighted pre-compactness moduli for a family of fields."""
    if not outputs:
        raise ValueError("no outputs given")
    grid = require_same_grid(*outputs, *( [w] if w is not None else [] ))
    node_norm_sq = np.sum(grid.node_matrix() ** 2, axis=1).reshape(grid.shape)
    wv = w.values if w is not None else 1.0
    cell = grid.cell_volume

    bound = max(lq_norm(u, q, w) for u in outputs)
    tails = []
    for radius in sorted(float(a) for a in radii):
        mask = node_norm_sq > radius**2
        mass = max(
            float(np.sum(np.abs(u.values[mask]) ** q
                         * (wv[mask] if w is not None else 1.0)) * cell)
            for u in outputs
        )
        tails.append((radius, mass))
    translations = []
    for shift in shifts:
        cells = _cells_from_shift(grid, shift)
        dist = float(np.linalg.norm(np.atleast_1d(shift)))
        modulus = max(
            lq_norm(translate_cells(u, cells) - u, q, w) for u in outputs
        )
        translations.append((dist, modulus))
    translations.sort()
    return FkrModuli(q=q, bound=bound, tails=tuple(tails), translations=tuple(translations))


# --------------------------------------------------------------------------
# G-set algebra and the separation experiment


def _radial_sq(grid: GridSpec, center) -> np.ndarray:
    center = np.atleast_1d(np.asarray(center, dtype=float))
    mesh = grid.coords()
    r_sq = np.zeros(grid.shape)
    for k in range(grid.dim):
        r_sq += (mesh[k] - center[k]) ** 2
    return r_sq


def gset_masks(
    grid: GridSpec,
    anchor: Cube,
    other: Cube,
    gamma1: float,
    gamma2: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Node masks of G (annulus of the anchor cube), G1 = G minus the
    gamma2-ball of the other cube, and G2 (complement of that ball)."""
    ra = _radial_sq(grid, anchor.center)
    ro = _radial_sq(grid, other.center)
    g = ((gamma1 * anchor.side) ** 2 < ra) & (ra < (gamma2 * anchor.side) ** 2)
    g2 = ro > (gamma2 * other.side) ** 2
    g1 = g & g2
    return g, g1, g2


def anchored_pairs(scheme: CubeScheme) -> list[tuple[int, int]]:
    """(anchor index, other index) per pair (k, k+m): the anchor carries
    the annulus.  Shrinking and translating anchor the earlier cube; the
    growing case reverses the roles because the later cubes are larger."""
    n = len(scheme.cubes)
    pairs = []
    for k in range(n):
        for km in range(k + 1, n):
            if scheme.variant == "growing":
                pairs.append((km, k))
            else:
                pairs.append((k, km))
    return pairs


@dataclass(frozen=True)
class GsetRecord:
    anchor: int
    other: int
    identities_hold: bool
    sliver_fraction: float
    beta_power: float | None
    sliver_within_beta: bool | None


def gset_check(
    scheme: CubeScheme,
    grid: GridSpec,
    gamma1: float,
    gamma2: float,
) -> list[GsetRecord]:
    """Verify the set relations G1 subset G2 and G1 = G \\ (G2^c cap G) as
    exact node-set identities, and for ratio-bounded schemes compare the
    sliver measure |G2^c cap G| / |Q_anchor| against beta^n with
    beta = 2 gamma2 ratio_bound."""
    records = []
    beta_pow = None
    if scheme.ratio_bound is not None:
        beta_pow = (2.0 * gamma2 * scheme.ratio_bound) ** grid.dim
    for ai, oi in anchored_pairs(scheme):
        g, g1, g2 = gset_masks(grid, scheme.cubes[ai], scheme.cubes[oi], gamma1, gamma2)
        sliver = ~g2 & g
        ok = bool(np.array_equal(g1, g & ~sliver) and not np.any(g1 & ~g2))
        frac = float(sliver.sum() * grid.cell_volume / node_volume(grid, scheme.cubes[ai]))
        records.append(
            GsetRecord(
                anchor=ai,
                other=oi,
                identities_hold=ok,
                sliver_fraction=frac,
                beta_power=beta_pow,
                sliver_within_beta=None if beta_pow is None else bool(frac <= beta_pow),
            )
        )
    return records


@dataclass(frozen=True)
class GammaSelection:
    gamma1: float
    gamma2: float
    gamma3: float
    beta: float
    gap: float


@dataclass(frozen=True)
class ChainRecord:
    """Numerical re-derivation of the triangle chain for one cube pair."""

    anchor: int
    other: int
    distance: float
    annulus_mass: float
    sliver_mass: float
    tail_mass: float
    sliver_fraction: float
    lower_bound: float
    holds: bool


@dataclass(frozen=True)
class CompactnessReport:
    """Structured output of the compactness experiments; unused fragments
    stay None."""

    epsilon: float | None = None
    separation: tuple[tuple[float, ...], ...] | None = None
    gammas: GammaSelection | None = None
    chain: tuple[ChainRecord, ...] = ()
    gsets: tuple[GsetRecord, ...] = ()
    fkr: FkrModuli | None = None
    slopes: SlopeFit | None = None

    def __post_init__(self):
        if self.separation is not None:
            mat = np.asarray(self.separation)
            if np.any(mat < 0) or not np.allclose(mat, mat.T, atol=0):
                raise ValueError("distance matrix must be symmetric nonnegative")

    def min_max_distance(self) -> tuple[float, float]:
        mat = np.asarray(self.separation)
        off = mat[~np.eye(len(mat), dtype=bool)]
        return float(off.min()), float(off.max())

    def to_json(self, path=None) -> str:
        def enc(obj):
            if isinstance(obj, (GammaSelection, ChainRecord, GsetRecord, SlopeFit, FkrModuli)):
                return vars(obj) | {"_kind": type(obj).__name__}
            if isinstance(obj, np.ndarray):
                return obj.tolist()
            raise TypeError(type(obj))

        payload = {
            "epsilon": self.epsilon,
            "separation": self.separation,
            "gammas": self.gammas if self.gammas else "not found",
            "chain": list(self.chain),
            "gsets": list(self.gsets),
            "fkr": self.fkr,
            "slopes": self.slopes,
        }
        text = json.dumps(payload, indent=2, sort_keys=True, default=enc)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def distances_to_csv(self, path) -> None:
        if self.separation is None:
            raise ValueError("no distance matrix in this report")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["j", "k", "lq_distance"])
            mat = np.asarray(self.separation)
            for j in range(len(mat)):
                for k in range(len(mat)):
                    writer.writerow([j, k, repr(float(mat[j, k]))])


def _set_norm(values: np.ndarray, mask: np.ndarray, q: float, cell: float) -> float:
    return float((np.sum(np.abs(values[mask]) ** q) * cell) ** (1.0 / q))


def separation_experiment(
    b: SampledFunction,
    scheme: CubeScheme,
    cfg: ExponentConfig,
    params: KernelParams | None = None,
    mode: ApplyMode = ApplyMode(variant="direct"),
    mu: SampledFunction | None = None,
) -> CompactnessReport:
    """Commutator outputs for every witness pair of the scheme, their full
    pairwise L^q distance matrix, the gamma search, and the per-pair
    triangle chain.

    Distances are unweighted L^q unless mu is given.  'direct' mode uses
    the support-restricted direct quadrature (identical sums to the full
    direct mode); 'fft' uses the convolution fast path.
    """
    grid = b.grid
    params = params or KernelParams(cfg.dim, cfg.alpha)
    witnesses = [witness_pair(b, q, cfg) for q in scheme.cubes]
    epsilon = min(wp.epsilon_achieved for wp in witnesses)

    outputs = []
    for wp in witnesses:
        if mode.variant == "direct":
            outputs.append(commutator_reference(b, wp.f, wp.g, params))
        else:
            outputs.append(commutator(b, wp.f, wp.g, cfg, params, mode))

    n_out = len(outputs)
    dist = np.zeros((n_out, n_out))
    for j in range(n_out):
        for k in range(j + 1, n_out):
            dist[j, k] = dist[k, j] = lq_norm(outputs[j] - outputs[k], cfg.q, w=mu)

    q = cfg.q
    cell = grid.cell_volume
    pairs = anchored_pairs(scheme)
    box_lo = np.asarray(grid.origin)
    box_hi = box_lo + grid.box_side

    def annulus_room(cube: Cube, gamma1: float) -> bool:
        c = np.asarray(cube.center)
        avail = min(np.min(c - box_lo), np.min(box_hi - c))
        return gamma1 * cube.side < avail

    best = None
    for gamma1 in GAMMA1_GRID:
        if not all(annulus_room(scheme.cubes[ai], gamma1) for ai, _ in pairs):
            continue
        for factor in GAMMA2_FACTORS:
            gamma2 = factor * gamma1
            annulus_masses = {}
            tail_masses = {}
            for j, cube in enumerate(scheme.cubes):
                r_sq = _radial_sq(grid, cube.center)
                ann = ((gamma1 * cube.side) ** 2 < r_sq) & (r_sq < (gamma2 * cube.side) ** 2)
                annulus_masses[j] = _set_norm(outputs[j].values, ann, q, cell)
                tail = r_sq > (gamma2 * cube.side) ** 2
                tail_masses[j] = _set_norm(outputs[j].values, tail, q, cell)
            gamma3 = min(annulus_masses[ai] for ai, _ in pairs)
            worst_tail = max(tail_masses[oi] for _, oi in pairs)
            gap = gamma3 - 4.0 * worst_tail
            if best is None or gap > best["gap"]:
                best = {
                    "gamma1": gamma1,
                    "gamma2": gamma2,
                    "gamma3": gamma3,
                    "gap": gap,
                    "annulus": annulus_masses,
                    "tails": tail_masses,
                }

    chain_records: list[ChainRecord] = []
    gsets: tuple[GsetRecord, ...] = ()
    selection = None
    if best is not None:
        gamma1, gamma2, gamma3 = best["gamma1"], best["gamma2"], best["gamma3"]
        sliver_stats = []
        for ai, oi in pairs:
            g, _, g2 = gset_masks(grid, scheme.cubes[ai], scheme.cubes[oi], gamma1, gamma2)
            sliver = ~g2 & g
            ann_mass = _set_norm(outputs[ai].values, g, q, cell)
            sliver_mass = _set_norm(outputs[ai].values, sliver, q, cell)
            tail_mass = _set_norm(outputs[oi].values, g2, q, cell)
            frac = float(sliver.sum() * cell / node_volume(grid, scheme.cubes[ai]))
            lower = (max(ann_mass**q - sliver_mass**q, 0.0)) ** (1.0 / q) - tail_mass
            d = float(dist[ai, oi])
            chain_records.append(
                ChainRecord(
                    anchor=ai,
                    other=oi,
                    distance=d,
                    annulus_mass=ann_mass,
                    sliver_mass=sliver_mass,
                    tail_mass=tail_mass,
                    sliver_fraction=frac,
                    lower_bound=lower,
                    holds=bool(d >= lower - 1e-9 * max(1.0, abs(lower))),
                )
            )
            sliver_stats.append((frac, sliver_mass))
        violating = [frac for frac, mass in sliver_stats if mass > gamma3 / 4.0]
        beta_pow_cap = gamma2**grid.dim
        beta_pow = min(violating) if violating else beta_pow_cap
        beta = 0.5 * beta_pow ** (1.0 / grid.dim)
        selection = GammaSelection(
            gamma1=gamma1, gamma2=gamma2, gamma3=gamma3, beta=beta, gap=best["gap"]
        )
        gsets = tuple(gset_check(scheme, grid, gamma1, gamma2))

    return CompactnessReport(
        epsilon=epsilon,
        separation=tuple(tuple(row) for row in dist),
        gammas=selection,
        chain=tuple(chain_records),
        gsets=gsets,
    )


# --------------------------------------------------------------------------
# truncation convergence


def truncation_convergence(
    b: SampledFunction,
    f: SampledFunction,
    g: SampledFunction,
    cfg: ExponentConfig,
    deltas,
    *,
    mu: SampledFunction | None = None,
    mode: ApplyMode = ApplyMode(),
) -> list[tuple[float, float]]:
    """L^q distance between the truncated and untruncated commutators of a
    fixed input pair, per truncation scale."""
    grid = require_same_grid(b, f, g)
    deltas = sorted((float(d) for d in deltas), reverse=True)
    for d in deltas:
        if d < 2 * grid.spacing:
            raise ValueError(f"under-resolved truncation: delta = {d} < 2h")
    base_params = KernelParams(cfg.dim, cfg.alpha)
    base = commutator(b, f, g, cfg, base_params, mode)
    out = []
    for d in deltas:
        trunc = commutator(b, f, g, cfg, base_params.truncated(d), mode)
        out.append((d, lq_norm(trunc - base, cfg.q, w=mu)))
    return out


def translation_split(
    b: SampledFunction,
    f: SampledFunction,
    g: SampledFunction,
    cfg: ExponentConfig,
    params: KernelParams,
    cells,
    mode: ApplyMode = ApplyMode(),
) -> tuple[SampledFunction, SampledFunction, np.ndarray]:
    """The I/II split of the translated commutator difference.

    Returns (I, II, valid) where, for a whole-cell shift t,
    I(x) = (b(x) - b(x+t)) I_delta(f, g)(x), II is the kernel-difference
    remainder so that comm(x+t) - comm(x) = I(x) + II(x), and valid marks
    the nodes whose translate stays inside the box.
    """
    grid = require_same_grid(b, f, g)
    cells = np.atleast_1d(np.asarray(cells, dtype=int))
    comm = commutator(b, f, g, cfg, params, mode)
    plain = apply(f, g, cfg, params, mode)
    comm_shift = translate_cells(comm, cells)
    b_shift = translate_cells(b, cells)
    term_i = (b - b_shift) * plain
    term_ii = comm_shift - comm - term_i

    valid = np.ones(grid.shape, dtype=bool)
    m = grid.extent
    for axis, c in enumerate(cells):
        c = int(c)
        idx = np.arange(m)
        ok = (idx + c >= 0) & (idx + c < m)
        shape = [1] * grid.dim
        shape[axis] = m
        valid &= ok.reshape(shape)
    return term_i, term_ii, valid
