"""Analytic-versus-oracle checks behind the ``verify`` command.

Every check returns a record ``{"name", "passed", "entries"}`` where each
entry is either a tolerance comparison or a Monte Carlo comparison with a
z-score. Monte Carlo entries pass within ``Z_LIMIT`` standard errors.
"""

from __future__ import annotations

import math
import zlib

import numpy as np

from .gaussian import Kind, QuadratureDirection, ScalarGaussian, make_coherent, make_diagonal
from .gaussian import make_epr_effect, make_two_mode_squeezed
from .joint import (
    Scenario,
    optimal_combination_variance,
    predicted_meter_stats,
    predicted_variance_closed_form,
    retrodict_meter_stats,
    retrodicted_closed_form,
)
from .oracle.fock import build_tmss_fock, mean_photon_number, quadrature_marginal_fock
from .oracle.montecarlo import compare, simulate_chain, simulate_single_mode
from .retrodiction import PqsPair, epr_variance, pqs_two_mode, pqs_variance_single, uniform_phi_grid

Z_LIMIT = 3.0


def _tol(name, value, expected, tol):
    err = abs(value - expected)
    return {"quantity": name, "value": float(value), "expected": float(expected),
            "abs_error": float(err), "tolerance": tol, "passed": bool(err <= tol)}


def _mc(name, analytic, empirical, stderr):
    rec = compare(analytic, empirical, stderr)
    rec["quantity"] = name
    rec["passed"] = bool(abs(rec["z_score"]) <= Z_LIMIT)
    return rec


def stream_seed(seed: int, name: str) -> int:
    """Independent seed per statistic, stable across runs and check order."""
    return int(np.random.SeedSequence([seed, zlib.crc32(name.encode())]).generate_state(1)[0])


def _record(name, entries):
    return {"name": name, "passed": all(e["passed"] for e in entries), "entries": entries}


def reference_pair(var_big: float, var_small: float) -> PqsPair:
    return PqsPair(make_diagonal(var_big, var_small),
                   make_diagonal(var_small, var_big, kind=Kind.EFFECT))


def check_coherent_pair(n_phi=64):
    pair = PqsPair(make_coherent([0, 0]), make_coherent([0, 0], Kind.EFFECT))
    worst = max(abs(pqs_variance_single(pair, QuadratureDirection(0, p)) - 0.25)
                for p in uniform_phi_grid(n_phi))
    return _record("coherent_pair", [_tol("max |variance - 1/4|", worst, 0.0, 1e-14)])


def check_butterfly(trials, seed, eps):
    entries = []
    cases = [("blue", 2.5, 0.1, {0.0: 5 / 52, math.pi / 2: 5 / 52,
                                  math.pi / 4: 0.65, 3 * math.pi / 4: 0.65}),
             ("gray", 1.5, 1 / 6, {math.pi / 4: 5 / 12, 3 * math.pi / 4: 5 / 12})]
    for label, big, small, points in cases:
        pair = reference_pair(big, small)
        for phi, expected in points.items():
            d = QuadratureDirection(0, phi)
            entries.append(_tol(f"{label} variance at phi={phi:.4f}",
                                pqs_variance_single(pair, d), expected, 1e-12))
            name = f"{label} MC variance at phi={phi:.4f}"
            est = simulate_single_mode(pair.rho, pair.effect, d, trials,
                                       stream_seed(seed, name), eps)
            entries.append(_mc(name, expected, est.variance, est.stderr_variance))
    return _record("butterfly", entries)


def check_two_mode(n_phi=64):
    rho, eff = make_two_mode_squeezed(2.0), make_epr_effect(-2.0)
    v = [pqs_two_mode(rho, eff, QuadratureDirection(0, p)).distribution.variance
         for p in uniform_phi_grid(n_phi)]
    target = 1 / (4 * math.cosh(2.0))
    return _record("two_mode", [
        _tol("spread over phi", max(v) - min(v), 0.0, 1e-12),
        _tol("variance vs 1/(4 cosh 2)", v[0], target, 1e-12),
        _tol("closed form vs 1/(4 cosh 2)", epr_variance(2.0, -2.0), target, 1e-12),
        {"quantity": "x/p variance product below 1/4", "value": v[0] ** 2,
         "expected": 0.25, "passed": bool(v[0] ** 2 < 0.25)},
    ])


def check_conditioning_grid(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for m in (1, 2, 3, 4, 8):
        for z in (0.1, 1.0, 10.0):
            for s in (0.0, 1.0, 2.0):
                for sp in (0.0, -1.0, -2.0):
                    sc = Scenario(m, z, s, sp, rho_means=rng.normal(size=4),
                                  effect_means=rng.normal(size=4),
                                  meter_means=rng.normal(size=2 * m))
                    stats = retrodict_meter_stats(sc)
                    mean, cov = retrodicted_closed_form(sc)
                    worst = max(worst, np.max(np.abs(stats.pi_cov - cov)),
                                np.max(np.abs(stats.pi_mean - mean)))
    return _record("conditioning_grid", [_tol("max entrywise deviation", worst, 0.0, 1e-10)])


def check_fock():
    rho = build_tmss_fock(1.0, 40)
    x = np.linspace(-5, 5, 401)
    g = ScalarGaussian(0.0, math.cosh(1.0) / 2).pdf(x)
    dens = quadrature_marginal_fock(rho, QuadratureDirection(0, 0.0), x)
    nbar = mean_photon_number(rho)
    return _record("fock_marginal", [
        _tol("L-inf marginal error", np.max(np.abs(dens - g)), 0.0, 1e-6),
        _tol("mean photon number", nbar, math.sinh(0.5) ** 2, max(rho.trace_deficiency, 1e-12)),
    ])


def check_optimal_limit():
    ms = [4 * 2 ** j for j in range(11)]
    v = [optimal_combination_variance(Scenario(m, 1.0, 2.0, -2.0), 0) for m in ms]
    target = epr_variance(2.0, -2.0)
    mono = all(b < a for a, b in zip(v, v[1:]))
    return _record("optimal_limit", [
        {"quantity": "monotone decrease in m", "value": v, "passed": mono},
        _tol("variance at m=4096", v[-1], target, 1e-3),
    ])


def check_predicted():
    sc = Scenario(3, 1.0, 0.0, 0.0)
    dense = np.diag(predicted_meter_stats(sc).pi_cov)
    closed = predicted_variance_closed_form(sc)
    entries = [_tol(f"meter {i} L sigma L^T", dense[i], 1.1875, 1e-12) for i in range(3)]
    entries += [_tol(f"meter {i} closed form", closed[i], 1.1875, 1e-12) for i in range(3)]
    for z in (0.5, 1.0, 3.0):
        v = predicted_meter_stats(Scenario(1, z)).pi_cov[0, 0]
        entries.append(_tol(f"m=1 z={z}", v, 1 / (2 * z) + 0.5, 1e-12))
    return _record("predicted_baseline", entries)


def check_chain(trials, seed):
    sc = Scenario(2, 1.0, 0.0, 0.0)
    chain_seed = stream_seed(seed, "monte_carlo_chain")
    a = simulate_chain(sc, trials, chain_seed)
    b = simulate_chain(sc, trials, chain_seed)
    off = math.cos(sc.angles[0] - sc.angles[1]) / 4
    entries = [
        _mc("diag 0", 0.75, a.pi_cov[0, 0], a.stderr_cov[0, 0]),
        _mc("diag 1", 0.75, a.pi_cov[1, 1], a.stderr_cov[1, 1]),
        _mc("off-diagonal", off, a.pi_cov[0, 1], a.stderr_cov[0, 1]),
        {"quantity": "deterministic under fixed seed", "passed": bool(
            np.array_equal(a.pi_cov, b.pi_cov) and np.array_equal(a.pi_mean, b.pi_mean))},
    ]
    return _record("monte_carlo_chain", entries)


def run_all(trials: int, seed: int, eps: float) -> list[dict]:
    return [
        check_coherent_pair(),
        check_butterfly(trials, seed, eps),
        check_two_mode(),
        check_conditioning_grid(seed),
        check_fock(),
        check_optimal_limit(),
        check_predicted(),
        check_chain(trials, seed),
    ]
