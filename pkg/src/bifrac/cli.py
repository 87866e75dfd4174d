"""Batch experiment runner.

Usage: bifrac <experiment> --config <file> [--threads N] [--out DIR]

One config file runs one experiment.  Every run writes report.json plus
experiment-specific CSV files, all byte-deterministic for a fixed config
and seed, and a manifest.json with run metadata (config digest, package
versions, wall time); the manifest carries the only nondeterministic
fields, so reproducibility checks compare everything except it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .grids import (
    Cube,
    ExponentConfig,
    GridSpec,
    SampledFunction,
    dyadic_cubes,
    lq_norm,
    save_csv,
)
from .kernels import KernelParams
from .lab import (
    fkr_moduli,
    make_scheme,
    separation_experiment,
    truncation_convergence,
    witness_pair,
)
from .operators import ApplyMode, BudgetError, apply, commutator
from .oscillation import bmo_norm, cmo_moduli, mean_oscillation
from .weights import (
    WeightPair,
    ap_constant,
    apq_constant,
    lemma1_check,
    vector_ap_constant,
    vector_apq_constant,
)
from . import fixtures as fx

EXPERIMENTS = (
    "apply",
    "commutator",
    "bmo",
    "cmo",
    "weights",
    "lemma1",
    "fkr",
    "witness",
    "separation",
    "truncation",
)


class ConfigError(ValueError):
    pass


def _build_grid(cfg: dict) -> GridSpec:
    g = cfg.get("grid")
    if not g:
        raise ConfigError("config needs a 'grid' section")
    return GridSpec(
        dim=int(g["dim"]),
        origin=tuple(float(c) for c in np.atleast_1d(g["origin"])),
        spacing=float(g["spacing"]),
        extent=int(g["extent"]),
    )


def _build_exponents(cfg: dict) -> ExponentConfig:
    e = cfg.get("exponents")
    if not e:
        raise ConfigError("config needs an 'exponents' section")
    return ExponentConfig(
        dim=int(e["dim"]),
        alpha=float(e["alpha"]),
        p1=float(e["p1"]),
        p2=float(e["p2"]),
    )


def _build_cube(spec: dict) -> Cube:
    return Cube(tuple(float(c) for c in np.atleast_1d(spec["center"])), float(spec["side"]))


def build_fixture(grid: GridSpec, spec: dict, rng: np.random.Generator) -> SampledFunction:
    """Construct a named fixture field on the grid."""
    kind = spec.get("kind")
    if kind == "bump":
        return fx.smooth_bump(
            grid, spec["center"], float(spec["radius"]), float(spec.get("amplitude", 1.0))
        )
    if kind == "haar":
        return fx.haar_step(grid, _build_cube(spec["cube"]), int(spec.get("axis", 0)))
    if kind == "sin":
        return fx.sine_wave(grid, float(spec["period"]), int(spec.get("axis", 0)))
    if kind == "log":
        return fx.log_distance(grid, spec["center"])
    if kind == "power":
        return fx.power_weight(grid, float(spec["exponent"]), spec.get("center"))
    if kind == "indicator":
        return fx.indicator(grid, _build_cube(spec["cube"]))
    if kind == "ones":
        return SampledFunction(grid, np.full(grid.shape, float(spec.get("value", 1.0))))
    if kind == "random":
        return fx.random_band_limited(
            grid, rng, int(spec.get("modes", 6)), float(spec.get("amplitude", 1.0))
        )
    raise ConfigError(f"unknown fixture kind {kind!r}")


def _mode(cfg: dict, threads: int, budget_override: int | None) -> ApplyMode:
    budget = budget_override or int(cfg.get("budget_bytes", 2 << 30))
    return ApplyMode(
        variant=cfg.get("mode", "fft"), budget_bytes=budget, threads=threads
    )


def _write_json(path: Path, payload: dict) -> None:
    def enc(obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        raise TypeError(type(obj))

    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=enc) + "\n")


def _write_csv_rows(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _params(cfg: dict, exps: ExponentConfig) -> KernelParams:
    delta = cfg.get("delta")
    return KernelParams(exps.dim, exps.alpha, None if delta is None else float(delta))


def _cube_family(grid: GridSpec, cfg: dict) -> list[Cube]:
    levels = cfg.get("levels", {})
    return dyadic_cubes(grid, int(levels.get("min", 0)), int(levels.get("max", 3)))


# --------------------------------------------------------------------------
# experiment runners: each returns the report payload and writes extra CSVs


def _run_apply(cfg, grid, exps, rng, mode, out_dir):
    params = _params(cfg, exps)
    f = build_fixture(grid, cfg["fixtures"]["f"], rng)
    g = build_fixture(grid, cfg["fixtures"]["g"], rng)
    result = apply(f, g, exps, params, mode)
    save_csv(result, out_dir / "output.csv")
    return {
        "lq_norm": lq_norm(result, exps.q),
        "max_abs": float(np.max(np.abs(result.values))),
        "mode": mode.variant,
    }


def _run_commutator(cfg, grid, exps, rng, mode, out_dir):
    params = _params(cfg, exps)
    b = build_fixture(grid, cfg["fixtures"]["symbol"], rng)
    f = build_fixture(grid, cfg["fixtures"]["f"], rng)
    g = build_fixture(grid, cfg["fixtures"]["g"], rng)
    result = commutator(b, f, g, exps, params, mode, slot=int(cfg.get("slot", 1)))
    save_csv(result, out_dir / "output.csv")
    return {
        "lq_norm": lq_norm(result, exps.q),
        "max_abs": float(np.max(np.abs(result.values))),
        "slot": int(cfg.get("slot", 1)),
    }


def _run_bmo(cfg, grid, exps, rng, mode, out_dir):
    b = build_fixture(grid, cfg["fixtures"]["symbol"], rng)
    cubes = _cube_family(grid, cfg)
    rows = [
        (list(c.center), c.side, mean_oscillation(b, c))
        for c in cubes
    ]
    _write_csv_rows(
        out_dir / "oscillations.csv",
        ["center", "side", "mean_oscillation"],
        [("|".join(repr(x) for x in ctr), side, osc) for ctr, side, osc in rows],
    )
    return {"bmo_family_supremum": bmo_norm(b, cubes), "cubes": len(cubes)}


def _run_cmo(cfg, grid, exps, rng, mode, out_dir):
    b = build_fixture(grid, cfg["fixtures"]["symbol"], rng)
    report = cmo_moduli(
        b,
        [float(a) for a in cfg["scales"]],
        _build_cube(cfg["ref_cube"]),
        [np.atleast_1d(s).astype(float) for s in cfg["shifts"]],
    )
    report.to_csv(out_dir / "oscillation.csv")
    return {
        "bmo_family_supremum": report.bmo_norm,
        "small_scale_slope": report.small_scale_slope(),
        "large_scale_slope": report.large_scale_slope(),
        "translation_slope": report.translation_slope(),
    }


def _weight_pair(cfg, grid, exps, rng) -> WeightPair:
    w1 = build_fixture(grid, cfg["fixtures"]["w1"], rng)
    w2 = build_fixture(grid, cfg["fixtures"]["w2"], rng)
    return WeightPair(w1, w2, exps)


def _run_weights(cfg, grid, exps, rng, mode, out_dir):
    pair = _weight_pair(cfg, grid, exps, rng)
    cubes = _cube_family(grid, cfg)
    p = float(cfg.get("p", exps.p1))
    q = float(cfg.get("q", max(p, exps.q)))
    return {
        "ap_w1": ap_constant(pair.w1, p, cubes),
        "apq_w1": apq_constant(pair.w1, p, q, cubes),
        "vector_ap": vector_ap_constant(pair, cubes),
        "vector_apq": vector_apq_constant(pair, cubes),
        "note": "family suprema (lower bounds)",
    }


def _run_lemma1(cfg, grid, exps, rng, mode, out_dir):
    pair = _weight_pair(cfg, grid, exps, rng)
    cubes = _cube_family(grid, cfg)
    report = lemma1_check(
        pair, cubes, hypothesis_bound=float(cfg.get("hypothesis_bound", 1e3))
    )
    report.to_json(out_dir / "weights.json")
    lemma = report.lemma1
    return {
        "hypothesis_satisfied": lemma.hypothesis_satisfied,
        "membership_apq": lemma.membership_apq,
        "membership_mu_ap": lemma.membership_mu_ap,
        "constants": report.ap_constants,
    }


def _run_fkr(cfg, grid, exps, rng, mode, out_dir):
    exps.require_theorem_window()
    params = _params(cfg, exps)
    b = build_fixture(grid, cfg["fixtures"]["symbol"], rng)
    support = _build_cube(cfg["support"])
    count = int(cfg.get("pairs", 10))
    outputs = []
    for _ in range(count):
        f, g = fx.unit_ball_pair(grid, exps, rng, support)
        outputs.append(commutator(b, f, g, exps, params, mode))
    moduli = fkr_moduli(
        outputs,
        exps.q,
        radii=[float(a) for a in cfg.get("radii", [])],
        shifts=[np.atleast_1d(s).astype(float) for s in cfg.get("shifts", [])],
    )
    _write_csv_rows(
        out_dir / "fkr.csv",
        ["kind", "parameter", "value"],
        [("bound", "", moduli.bound)]
        + [("tail", a, v) for a, v in moduli.tails]
        + [("translation", t, v) for t, v in moduli.translations],
    )
    return {
        "bound": moduli.bound,
        "tail_slope": moduli.tail_slope(),
        "pairs": count,
    }


def _run_witness(cfg, grid, exps, rng, mode, out_dir):
    b = build_fixture(grid, cfg["fixtures"]["symbol"], rng)
    cube = _build_cube(cfg["cube"])
    pair = witness_pair(b, cube, exps)
    save_csv(pair.f, out_dir / "witness_f.csv")
    save_csv(pair.g, out_dir / "witness_g.csv")
    return {
        "c0": pair.c0,
        "epsilon_achieved": pair.epsilon_achieved,
        "f_lp1_norm": lq_norm(pair.f, exps.p1),
        "g_lp2_norm": lq_norm(pair.g, exps.p2),
    }


def _run_separation(cfg, grid, exps, rng, mode, out_dir):
    params = _params(cfg, exps)
    b = build_fixture(grid, cfg["fixtures"]["symbol"], rng)
    s = cfg["scheme"]
    scheme = make_scheme(
        grid,
        s["variant"],
        int(s["count"]),
        float(s["base_side"]),
        ratio=float(s.get("ratio", 0.25)),
        ratio_bound=(None if "ratio_bound" not in s else float(s["ratio_bound"])),
        center=s.get("center"),
        drift_frac=float(s.get("drift_frac", 0.0)),
        gamma2=(None if "gamma2" not in s else float(s["gamma2"])),
        rng=rng,
    )
    report = separation_experiment(b, scheme, exps, params, mode)
    report.to_json(out_dir / "report_full.json")
    report.distances_to_csv(out_dir / "distances.csv")
    lo, hi = report.min_max_distance()
    return {
        "epsilon": report.epsilon,
        "min_distance": lo,
        "max_distance": hi,
        "gammas_found": report.gammas is not None,
        "chain_all_hold": all(c.holds for c in report.chain),
    }


def _run_truncation(cfg, grid, exps, rng, mode, out_dir):
    b = build_fixture(grid, cfg["fixtures"]["symbol"], rng)
    f = build_fixture(grid, cfg["fixtures"]["f"], rng)
    g = build_fixture(grid, cfg["fixtures"]["g"], rng)
    series = truncation_convergence(
        b, f, g, exps, [float(d) for d in cfg["deltas"]], mode=mode
    )
    _write_csv_rows(out_dir / "truncation.csv", ["delta", "lq_difference"], series)
    values = [v for _, v in series]
    return {
        "first": values[0],
        "last": values[-1],
        "nonincreasing": bool(
            all(b <= a + 1e-6 for a, b in zip(values, values[1:]))
        ),
    }


RUNNERS = {
    "apply": _run_apply,
    "commutator": _run_commutator,
    "bmo": _run_bmo,
    "cmo": _run_cmo,
    "weights": _run_weights,
    "lemma1": _run_lemma1,
    "fkr": _run_fkr,
    "witness": _run_witness,
    "separation": _run_separation,
    "truncation": _run_truncation,
}


def run(experiment: str, config_path: str, threads: int = 1, out: str | None = None) -> int:
    """Execute one named experiment from a config file.  Returns the exit
    status; output files land in the configured output directory."""
    import os

    started = time.monotonic()
    raw = Path(config_path).read_bytes()
    cfg = yaml.safe_load(raw) or {}
    declared = cfg.get("experiment")
    if declared is not None and declared != experiment:
        raise ConfigError(
            f"config declares experiment {declared!r} but {experiment!r} was requested"
        )
    grid = _build_grid(cfg)
    exps = _build_exponents(cfg)
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    budget_env = os.environ.get("BIFRAC_BUDGET_BYTES")
    mode = _mode(cfg, threads, int(budget_env) if budget_env else None)

    out_dir = Path(out or cfg.get("output_dir", "out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    payload = RUNNERS[experiment](cfg, grid, exps, rng, mode, out_dir)
    report = {
        "experiment": experiment,
        "seed": int(cfg.get("seed", 0)),
        "exponents": {
            "dim": exps.dim, "alpha": exps.alpha,
            "p1": exps.p1, "p2": exps.p2, "p": exps.p, "q": exps.q,
        },
        "results": payload,
    }
    _write_json(out_dir / "report.json", report)
    manifest = {
        "experiment": experiment,
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "config_path": str(config_path),
        "versions": {
            "bifrac": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "wall_time_s": time.monotonic() - started,
    }
    _write_json(out_dir / "manifest.json", manifest)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bifrac",
        description="Run one bilinear-fractional-integral experiment from a config file.",
    )
    parser.add_argument("experiment", help=f"one of: {', '.join(EXPERIMENTS)}")
    parser.add_argument("--config", required=True, help="YAML config file")
    parser.add_argument("--threads", type=int, default=1, help="worker thread cap")
    parser.add_argument("--out", default=None, help="output directory override")
    args = parser.parse_args(argv)

    if args.experiment not in RUNNERS:
        print(
            f"unknown experiment {args.experiment!r}; valid names: "
            + ", ".join(EXPERIMENTS),
            file=sys.stderr,
        )
        return 2
    try:
        return run(args.experiment, args.config, args.threads, args.out)
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
