"""Muckenhoupt constants over finite cube families and the two-weight lemma
verifier.

Every constant is a family supremum over the supplied cubes, hence a lower
bound of the true constant; reports record the worst cube alongside each
value.  All cube averages are node means, so the per-cube products obey the
discrete Hoelder and Jensen inequalities exactly, and the verifier can ask
for inequality slacks at 1e-9 rather than eyeballing trends.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .grids import (
    Cube,
    ExponentConfig,
    GridError,
    SampledFunction,
    conjugate_exponent,
    node_mask,
    require_same_grid,
)

JENSEN_TOL = 1e-9


def _cube_mean_powers(w: SampledFunction, cube: Cube, exponents) -> list[float]:
    mask = node_mask(w.grid, cube)
    count = int(mask.sum())
    if count == 0:
        raise GridError("cube off grid")
    vals = w.values[mask]
    return [float(np.mean(vals**e)) for e in exponents]


def _require_positive(w: SampledFunction, name: str = "weight") -> None:
    if np.any(w.values <= 0):
        raise GridError(f"{name} must be strictly positive")


def ap_product(w: SampledFunction, p: float, cube: Cube) -> float:
    """(mean_Q w) (mean_Q w^(1-p'))^(p/p') for a single cube."""
    pc = conjugate_exponent(p)
    m1, m2 = _cube_mean_powers(w, cube, [1.0, 1.0 - pc])
    return m1 * m2 ** (p / pc)


def _family_sup(product, cubes: list[Cube]) -> tuple[float, Cube]:
    if not cubes:
        raise ValueError("cube family is empty")
    best_val, best_cube = -np.inf, None
    for cube in cubes:
        val = product(cube)
        if val > best_val:
            best_val, best_cube = val, cube
    return best_val, best_cube


def ap_constant(w: SampledFunction, p: float, cubes: list[Cube]) -> float:
    """Family supremum of the A_p product."""
    if p <= 1:
        raise ValueError(f"A_p needs p > 1, got {p}")
    _require_positive(w)
    value, _ = _family_sup(lambda q: ap_product(w, p, q), cubes)
    return value


def apq_product(w: SampledFunction, p: float, q: float, cube: Cube) -> float:
    pc = conjugate_exponent(p)
    m1, m2 = _cube_mean_powers(w, cube, [q, -pc])
    return m1 * m2 ** (q / pc)


def apq_constant(w: SampledFunction, p: float, q: float, cubes: list[Cube]) -> float:
    """Family supremum of the A_{p,q} product.

    Verifies on the same family that the value agrees with the A_{1+q/p'}
    constant of w^q, an algebraic identity cube by cube.
    """
    if not (1 < p <= q < np.inf):
        raise ValueError(f"A_(p,q) needs 1 < p <= q < inf, got p={p}, q={q}")
    _require_positive(w)
    value, _ = _family_sup(lambda c: apq_product(w, p, q, c), cubes)
    alias = ap_constant(
        w.with_values(w.values**q), 1.0 + q / conjugate_exponent(p), cubes
    )
    if not np.isclose(value, alias, rtol=1e-10, atol=0):
        raise AssertionError(
            f"A_(p,q) identity violated: {value} vs A_(1+q/p') {alias}"
        )
    return value


@dataclass(frozen=True)
class WeightPair:
    """Strictly positive weights (w1, w2) with their composite weights."""

    w1: SampledFunction
    w2: SampledFunction
    config: ExponentConfig

    def __post_init__(self):
        grid = require_same_grid(self.w1, self.w2)
        if grid.dim != self.config.dim:
            raise GridError("weight grid dimension does not match exponents")
        _require_positive(self.w1, "w1")
        _require_positive(self.w2, "w2")

    @property
    def nu(self) -> SampledFunction:
        """w1^(p/p1) w2^(p/p2), the composite for the vector A_P class."""
        cfg = self.config
        return self.w1.with_values(
            self.w1.values ** (cfg.p / cfg.p1) * self.w2.values ** (cfg.p / cfg.p2)
        )

    @property
    def mu(self) -> SampledFunction:
        """w1^q w2^q, the composite for the vector A_(P,q) class."""
        q = self.config.q
        return self.w1.with_values(self.w1.values**q * self.w2.values**q)


def vector_ap_product(pair: WeightPair, cube: Cube) -> float:
    cfg = pair.config
    p1c, p2c = cfg.p1_conj, cfg.p2_conj
    (m0,) = _cube_mean_powers(pair.nu, cube, [1.0])
    (m1,) = _cube_mean_powers(pair.w1, cube, [1.0 - p1c])
    (m2,) = _cube_mean_powers(pair.w2, cube, [1.0 - p2c])
    return m0 * m1 ** (cfg.p / p1c) * m2 ** (cfg.p / p2c)


def vector_ap_constant(pair: WeightPair, cubes: list[Cube]) -> float:
    """Family supremum of the vector A_P triple product."""
    value, _ = _family_sup(lambda c: vector_ap_product(pair, c), cubes)
    return value


def vector_apq_product(pair: WeightPair, cube: Cube) -> float:
    cfg = pair.config
    p1c, p2c = cfg.p1_conj, cfg.p2_conj
    (m0,) = _cube_mean_powers(pair.mu, cube, [1.0])
    (m1,) = _cube_mean_powers(pair.w1, cube, [-p1c])
    (m2,) = _cube_mean_powers(pair.w2, cube, [-p2c])
    return m0 * m1 ** (cfg.q / p1c) * m2 ** (cfg.q / p2c)


def vector_apq_constant(pair: WeightPair, cubes: list[Cube]) -> float:
    """Family supremum of the vector A_(P,q) triple product."""
    value, _ = _family_sup(lambda c: vector_apq_product(pair, c), cubes)
    return value


@dataclass(frozen=True)
class InequalityRecord:
    """Worst observed slack (rhs - lhs, relative) of a per-cube inequality."""

    holds: bool
    min_slack: float
    worst_cube: dict | None


@dataclass(frozen=True)
class Lemma1Record:
    hypothesis_satisfied: bool
    hypothesis_constants: tuple[float, float]
    membership_apq: bool
    membership_mu_ap: bool
    holder_chain: InequalityRecord | None
    mu_constant_bound: InequalityRecord | None
    mu_aq_finite: bool


@dataclass(frozen=True)
class WeightReport:
    """Family-supremum constants plus the lemma verdicts."""

    ap_constants: dict[str, float]
    worst_cubes: dict[str, dict] = field(default_factory=dict)
    lemma1: Lemma1Record | None = None

    def __post_init__(self):
        for tag, value in self.ap_constants.items():
            if tag.startswith(("ap", "apq", "mu_ap", "mu_aq", "hyp")):
                if value < 1.0 - JENSEN_TOL:
                    raise ValueError(
                        f"scalar constant {tag}={value} below the Jensen bound"
                    )

    def to_json(self, path=None) -> str:
        payload = {
            "ap_constants": self.ap_constants,
            "worst_cubes": self.worst_cubes,
            "lemma1": asdict(self.lemma1) if self.lemma1 else None,
            "note": "all constants are family suprema (lower bounds)",
        }
        text = json.dumps(payload, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _cube_info(cube: Cube | None) -> dict | None:
    if cube is None:
        return None
    return {"center": list(cube.center), "side": cube.side}


def _scan_inequality(lhs, rhs, cubes: list[Cube], tol: float) -> InequalityRecord:
    min_slack, worst = np.inf, None
    for cube in cubes:
        left, right = lhs(cube), rhs(cube)
        slack = (right - left) / max(1.0, abs(right))
        if slack < min_slack:
            min_slack, worst = slack, cube
    return InequalityRecord(
        holds=bool(min_slack >= -tol),
        min_slack=float(min_slack),
        worst_cube=_cube_info(worst),
    )


def lemma1_check(
    pair: WeightPair,
    cubes: list[Cube],
    hypothesis_bound: float = 1e3,
    tol: float = 1e-9,
) -> WeightReport:
    """Check the two-weight lemma numerically, cube by cube.

    Hypothesis: w_i^(p_i q / p) in A_p with modest family constants (a
    finite grid always yields finite constants, so "satisfied" means below
    hypothesis_bound).  When satisfied, verifies (a) the Hoelder chain
    bounding the vector A_(P,q) product by the vector A_P product of the
    powered pair, (b) the constant bound
    [mu]_Ap <= H1^(p/p1) H2^(p/p2), and (c) finiteness of [mu]_Aq.
    """
    cfg = pair.config
    s1 = cfg.p1 * cfg.q / cfg.p
    s2 = cfg.p2 * cfg.q / cfg.p
    pow1 = pair.w1.with_values(pair.w1.values**s1)
    pow2 = pair.w2.with_values(pair.w2.values**s2)
    h1 = ap_constant(pow1, cfg.p, cubes)
    h2 = ap_constant(pow2, cfg.p, cubes)

    constants = {
        "hyp_w1_pow_ap": h1,
        "hyp_w2_pow_ap": h2,
        "vector_apq": vector_apq_constant(pair, cubes),
        "vector_ap_powered": vector_ap_constant(
            WeightPair(pow1, pow2, cfg), cubes
        ),
    }
    if max(h1, h2) > hypothesis_bound:
        return WeightReport(
            ap_constants=constants,
            lemma1=Lemma1Record(
                hypothesis_satisfied=False,
                hypothesis_constants=(h1, h2),
                membership_apq=False,
                membership_mu_ap=False,
                holder_chain=None,
                mu_constant_bound=None,
                mu_aq_finite=False,
            ),
        )

    powered = WeightPair(pow1, pow2, cfg)
    chain = _scan_inequality(
        lambda c: vector_apq_product(pair, c),
        lambda c: vector_ap_product(powered, c),
        cubes,
        tol,
    )

    mu = pair.mu
    mu_ap = ap_constant(mu, cfg.p, cubes)
    mu_aq = ap_constant(mu, cfg.q, cubes)
    bound_rhs = h1 ** (cfg.p / cfg.p1) * h2 ** (cfg.p / cfg.p2)
    slack = (bound_rhs - mu_ap) / max(1.0, abs(bound_rhs))
    mu_bound = InequalityRecord(
        holds=bool(slack >= -tol), min_slack=float(slack), worst_cube=None
    )

    constants.update({"mu_ap": mu_ap, "mu_aq": mu_aq})
    return WeightReport(
        ap_constants=constants,
        lemma1=Lemma1Record(
            hypothesis_satisfied=True,
            hypothesis_constants=(h1, h2),
            membership_apq=chain.holds,
            membership_mu_ap=mu_bound.holds,
            holder_chain=chain,
            mu_constant_bound=mu_bound,
            mu_aq_finite=bool(np.isfinite(mu_aq)),
        ),
    )


def moen_remark_constants(pair: WeightPair, cubes: list[Cube]) -> dict[str, float]:
    """Constants behind the A_(P,q) membership consequences: the A_(2p_i')
    constants of w_i^(-p_i') and the A_(2q) constant of mu.

    Any blow-up on a fixture is reported as a discretization artifact by
    the caller, never as a refutation.
    """
    cfg = pair.config
    out = {}
    for tag, w, pc in (
        ("w1_neg_dual", pair.w1, cfg.p1_conj),
        ("w2_neg_dual", pair.w2, cfg.p2_conj),
    ):
        powered = w.with_values(w.values ** (-pc))
        out[tag] = ap_constant(powered, 2 * pc, cubes)
    out["mu_a2q"] = ap_constant(pair.mu, 2 * cfg.q, cubes)
    return out
