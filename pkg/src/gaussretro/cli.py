"""Command-line scenario runner.

Structured results go to JSON, grids to CSV. Every CSV starts with a
``# config:`` comment holding the resolved configuration, then a header row.
Output depends only on the configuration and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import verify
from .config import COMMANDS, RunConfig, load_config
from .errors import ConfigError, InfeasibleError, InvalidArgumentError, NumericalSingularityError
from .gaussian import QuadratureDirection
from .joint import (
    optimal_combination_closed_form,
    optimal_combination_variance,
    predicted_meter_stats,
    predicted_variance_closed_form,
    retrodict_meter_stats,
    retrodicted_closed_form,
)
from .retrodiction import (
    HUR_BOUND,
    butterfly_curve,
    epr_variance,
    heterodyne_retrodiction,
    pqs_distribution_single,
    pqs_two_mode,
    uniform_phi_grid,
    violates_hur,
)


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, cfg: RunConfig, header, rows):
    with path.open("w", newline="") as fh:
        fh.write("# config: " + json.dumps(cfg.resolved(), sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _pool_map(cfg: RunConfig, fn, items):
    # Executor.map yields in submission order
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(fn, items))


def _phi_grid(cfg: RunConfig):
    return uniform_phi_grid(cfg.phi_points, cfg.phi_period)


def run_butterfly(cfg: RunConfig, out: Path) -> int:
    curve = butterfly_curve(cfg.build_pair(), _phi_grid(cfg))
    _write_csv(out / "butterfly.csv", cfg, ("phi", "variance"), curve)
    return 0


def run_single_retro(cfg: RunConfig, out: Path) -> int:
    pair = cfg.build_pair()
    rows = []
    for phi in _phi_grid(cfg):
        d = pqs_distribution_single(pair, QuadratureDirection(0, phi)).distribution
        rows.append((phi, d.mean, d.variance))
    _write_csv(out / "single_retro.csv", cfg, ("phi", "mean", "variance"), rows)
    return 0


def run_two_mode(cfg: RunConfig, out: Path) -> int:
    rho, eff = cfg.build_two_mode()
    rows = []
    for phi in _phi_grid(cfg):
        d = pqs_two_mode(rho, eff, QuadratureDirection(0, phi)).distribution
        rows.append((phi, d.mean, d.variance))
    var_x = pqs_two_mode(rho, eff, QuadratureDirection(0, 0.0)).distribution.variance
    var_p = pqs_two_mode(rho, eff, QuadratureDirection(0, math.pi / 2)).distribution.variance
    variances = [r[2] for r in rows]
    tm = cfg.two_mode
    _write_csv(out / "two_mode_retro.csv", cfg, ("phi", "mean", "variance"), rows)
    _write_json(out / "two_mode_retro.json", {
        "config": cfg.resolved(),
        "variance": var_x,
        "variance_x": var_x,
        "variance_p": var_p,
        "variance_spread": max(variances) - min(variances),
        "closed_form_variance": epr_variance(float(tm["s"]), float(tm["s_prime"])),
        "hur_product": var_x * var_p,
        "hur_bound": HUR_BOUND,
        "HUR-violating": violates_hur(var_x, var_p),
    })
    return 0


def run_heterodyne(cfg: RunConfig, out: Path) -> int:
    mean, cov = heterodyne_retrodiction(cfg.build_pair())
    _write_json(out / "heterodyne.json", {
        "config": cfg.resolved(),
        "mean": mean.tolist(),
        "cov": cov.tolist(),
        "uncertainty_product": math.sqrt(cov[0, 0] * cov[1, 1]),
    })
    return 0


def _sweep_scenarios(cfg):
    return [cfg.build_scenario(**point) for point in cfg.sweep_grid()]


def run_joint_predict(cfg: RunConfig, out: Path) -> int:
    sc = cfg.build_scenario()
    stats = predicted_meter_stats(sc)
    _write_json(out / "joint_predict.json", {
        "config": cfg.resolved(), "scenario": sc.to_dict(), **stats.to_dict(),
        "closed_form_variances": predicted_variance_closed_form(sc).tolist(),
    })
    grid = _sweep_scenarios(cfg)
    if grid:
        def row(sc):
            v = predicted_meter_stats(sc).pi_cov[0, 0]
            return (sc.m, sc.z, sc.s, sc.s_prime, v, predicted_variance_closed_form(sc)[0])
        _write_csv(out / "joint_predict_sweep.csv", cfg,
                   ("m", "z", "s", "s_prime", "variance", "closed_form"), _pool_map(cfg, row, grid))
    return 0


def run_joint_retro(cfg: RunConfig, out: Path) -> int:
    sc = cfg.build_scenario()
    stats = retrodict_meter_stats(sc)
    mean, cov = retrodicted_closed_form(sc)
    _write_json(out / "joint_retro.json", {
        "config": cfg.resolved(), "scenario": sc.to_dict(), **stats.to_dict(),
        "closed_form_mean": mean.tolist(), "closed_form_cov": cov.tolist(),
        "max_deviation": float(max(np.max(np.abs(stats.pi_cov - cov)),
                                   np.max(np.abs(stats.pi_mean - mean)))),
    })
    (out / "joint_retro.csv").write_text(
        "# config: " + json.dumps(cfg.resolved(), sort_keys=True) + "\n" + stats.to_csv())
    grid = _sweep_scenarios(cfg)
    if grid:
        def row(sc):
            st = retrodict_meter_stats(sc)
            mean, cov = retrodicted_closed_form(sc)
            dev = max(np.max(np.abs(st.pi_cov - cov)), np.max(np.abs(st.pi_mean - mean)))
            return (sc.m, sc.z, sc.s, sc.s_prime, st.pi_cov[0, 0], cov[0, 0], float(dev))
        _write_csv(out / "joint_retro_sweep.csv", cfg,
                   ("m", "z", "s", "s_prime", "variance", "closed_form", "max_deviation"),
                   _pool_map(cfg, row, grid))
    return 0


def run_optimal_combo(cfg: RunConfig, out: Path) -> int:
    sc = cfg.build_scenario()
    variance = optimal_combination_variance(sc, cfg.k)  # validates k
    raw = retrodict_meter_stats(sc, method="lowrank").pi_cov[cfg.k, cfg.k]
    _write_json(out / "optimal_combo.json", {
        "config": cfg.resolved(), "scenario": sc.to_dict(), "k": cfg.k,
        "variance": variance,
        "closed_form": optimal_combination_closed_form(sc),
        "raw_meter_variance": float(raw),
    })
    grid = _sweep_scenarios(cfg)
    if grid:
        def row(sc):
            return (sc.m, sc.z, sc.s, sc.s_prime, optimal_combination_variance(sc, cfg.k),
                    optimal_combination_closed_form(sc))
        _write_csv(out / "optimal_combo_sweep.csv", cfg,
                   ("m", "z", "s", "s_prime", "variance", "closed_form"), _pool_map(cfg, row, grid))
    return 0


def run_verify(cfg: RunConfig, out: Path) -> int:
    trials = 100_000 if cfg.quick else cfg.trials
    records = verify.run_all(trials, cfg.seed, cfg.eps)
    passed = all(r["passed"] for r in records)
    _write_json(out / "verify.json", {"config": cfg.resolved(), "trials": trials,
                                      "passed": passed, "checks": records})
    for r in records:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}")
    return 0 if passed else 1


HANDLERS = {
    "butterfly": run_butterfly,
    "single-retro": run_single_retro,
    "two-mode-retro": run_two_mode,
    "heterodyne": run_heterodyne,
    "joint-predict": run_joint_predict,
    "joint-retro": run_joint_retro,
    "optimal-combo": run_optimal_combo,
    "verify": run_verify,
}


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return HANDLERS[cfg.command](cfg, out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaussretro", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS,
                   help="operation to run (may instead be given in the config file)")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, help="Monte Carlo trials")
    p.add_argument("--phi-points", type=int, dest="phi_points")
    p.add_argument("--eps", type=float, help="projective measurement regulariser")
    p.add_argument("--workers", type=int, help="worker threads for sweeps")
    p.add_argument("--quick", action="store_true", help="verify with 1e5 trials")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {key: getattr(args, key)
                     for key in ("out", "seed", "trials", "phi_points", "eps", "workers")}
        if args.quick:
            overrides["quick"] = True
        return run(load_config(args.config, args.command, overrides))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (InvalidArgumentError, InfeasibleError, NumericalSingularityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
