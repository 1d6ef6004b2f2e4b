"""Monte Carlo simulation of the measurement chains.

The joint-measurement sampler draws the commuting meter momenta and the
system quadratures from the exact joint Gaussian after the interaction,
then draws the EPR outcome with the effect covariance as noise. Measuring
the meters last changes nothing because they commute with the system. The
conditional statistics are recovered by linear regression of meter outcomes
on the EPR outcome.

Random numbers come in fixed-size chunks, chunk ``c`` seeded from
``(seed, c)``, so results do not depend on how chunks are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError
from ..gaussian import GaussianOperator, QuadratureDirection, apply_linear_map, marginal
from ..joint import MeterStatistics, Scenario, build_transform, initial_state

CHUNK = 1 << 16
MIN_TRIALS = 1000


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _chunks(trials: int):
    start = 0
    c = 0
    while start < trials:
        n = min(CHUNK, trials - start)
        yield c, n
        start += n
        c += 1


def _factor(cov) -> np.ndarray:
    # eigh tolerates the rank-deficient covariances of linear images
    w, v = np.linalg.eigh(np.asarray(cov, dtype=float))
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_gaussian(mean, cov, trials: int, seed: int, stream: int = 0) -> np.ndarray:
    """``trials`` draws from ``N(mean, cov)``, chunk-seeded, shape (trials, d)."""
    mean = np.asarray(mean, dtype=float)
    F = _factor(cov)
    out = np.empty((trials, mean.size))
    for c, n in _chunks(trials):
        rng = chunk_generator(seed, stream * 1_000_003 + c)
        start = c * CHUNK
        out[start:start + n] = mean + rng.standard_normal((n, mean.size)) @ F.T
    return out


@dataclass(frozen=True, eq=False)
class ChainSample:
    """Columnar record of simulated trials.

    ``first`` holds the intermediate measurement outcomes (meter momenta, or
    the single quadrature value), ``final`` the later measurement outcome.
    """

    first: np.ndarray
    final: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.first)) and np.all(np.isfinite(self.final))):
            raise InvalidArgumentError("non-finite sample")

    @property
    def trials(self) -> int:
        return self.first.shape[0]


@dataclass(frozen=True)
class Regression:
    """Linear-Gaussian fit of ``y`` given ``x``."""

    x_mean: np.ndarray
    y_mean: np.ndarray
    slope: np.ndarray
    resid_cov: np.ndarray
    xtx_inv: np.ndarray
    dof: int

    def predict(self, x0) -> np.ndarray:
        return self.y_mean + (np.asarray(x0, dtype=float) - self.x_mean) @ self.slope

    def predict_stderr(self, x0) -> np.ndarray:
        dx = np.asarray(x0, dtype=float) - self.x_mean
        lever = 1.0 / (self.dof + self.x_mean.size + 1) + dx @ self.xtx_inv @ dx
        return np.sqrt(np.diag(self.resid_cov) * lever)

    def cov_stderr(self) -> np.ndarray:
        """Normal-theory standard errors of the residual covariance entries."""
        c = self.resid_cov
        d = np.diag(c)
        return np.sqrt((np.outer(d, d) + c * c) / self.dof)


def regress(y, x) -> Regression:
    y = np.atleast_2d(np.asarray(y, dtype=float).T).T
    x = np.atleast_2d(np.asarray(x, dtype=float).T).T
    n, p = x.shape
    xm, ym = x.mean(axis=0), y.mean(axis=0)
    xc, yc = x - xm, y - ym
    xtx = xc.T @ xc
    slope = np.linalg.solve(xtx, xc.T @ yc)
    resid = yc - xc @ slope
    dof = n - p - 1
    return Regression(xm, ym, slope, resid.T @ resid / dof, np.linalg.inv(xtx), dof)


def _check_trials(trials: int):
    if trials < MIN_TRIALS:
        raise InvalidArgumentError(f"need at least {MIN_TRIALS} trials, got {trials}")


def sample_chain(scenario: Scenario, trials: int, seed: int, effect_cov=None) -> ChainSample:
    """Draw meter momenta and EPR outcomes for the meter-bank protocol.

    ``effect_cov`` overrides the EPR effect covariance; a huge multiple of
    the identity models an uninformative final measurement.
    """
    _check_trials(trials)
    m = scenario.m
    evolved = apply_linear_map(initial_state(scenario), build_transform(scenario))
    idx = np.concatenate([2 * np.arange(m) + 1, np.arange(2 * m, 2 * m + 4)])
    draws = sample_gaussian(evolved.mean[idx], evolved.cov[np.ix_(idx, idx)], trials, seed, 0)
    sigma_e = scenario.system_effect().cov if effect_cov is None else np.asarray(effect_cov)
    noise = sample_gaussian(np.zeros(4), sigma_e, trials, seed, 1)
    return ChainSample(draws[:, :m], draws[:, m:] + noise)


def simulate_chain(scenario: Scenario, trials: int, seed: int, effect_cov=None) -> MeterStatistics:
    """Empirical conditioned meter statistics, evaluated at ``scenario.effect_means``."""
    sample = sample_chain(scenario, trials, seed, effect_cov)
    fit = regress(sample.first, sample.final)
    return MeterStatistics(fit.predict(scenario.effect_means), fit.resid_cov, True,
                           stderr_mean=fit.predict_stderr(scenario.effect_means),
                           stderr_cov=fit.cov_stderr())


@dataclass(frozen=True)
class SingleModeEstimate:
    mean: float
    variance: float
    stderr_mean: float
    stderr_variance: float


def sample_single_mode(rho: GaussianOperator, effect: GaussianOperator,
                       direction: QuadratureDirection, trials: int, seed: int,
                       eps: float = 1e-8) -> ChainSample:
    """Sequential-collapse chain on one mode.

    Draw ``y`` from the marginal of ``x_phi``, collapse to a state sharp in
    ``x_phi`` (variance ``eps``, conjugate ``1/(4 eps)``), then draw the later
    general-dyne outcome ``r ~ N(collapsed mean, collapsed cov + sigma_E)``.
    """
    _check_trials(trials)
    if rho.n_modes != 1 or effect.n_modes != 1:
        raise InvalidArgumentError("single-mode chain needs single-mode operators")
    u = direction.unit
    v = np.array([-u[1], u[0]])
    prior = marginal(rho, direction)
    y = sample_gaussian([prior.mean], [[prior.variance]], trials, seed, 0)[:, 0]
    post_cov = eps * np.outer(u, u) + np.outer(v, v) / (4 * eps) + effect.cov
    offset = (v @ rho.mean) * v
    noise = sample_gaussian(np.zeros(2), post_cov, trials, seed, 1)
    final = y[:, None] * u + offset + noise
    return ChainSample(y[:, None], final)


def simulate_single_mode(rho: GaussianOperator, effect: GaussianOperator,
                         direction: QuadratureDirection, trials: int, seed: int,
                         eps: float = 1e-8) -> SingleModeEstimate:
    """Empirical retrodicted mean (at ``effect.mean``) and variance of ``x_phi``."""
    sample = sample_single_mode(rho, effect, direction, trials, seed, eps)
    fit = regress(sample.first, sample.final)
    var = float(fit.resid_cov[0, 0])
    return SingleModeEstimate(float(fit.predict(effect.mean)[0]), var,
                              float(fit.predict_stderr(effect.mean)[0]),
                              var * float(np.sqrt(2.0 / fit.dof)))


def compare(analytic: float, empirical: float, stderr: float) -> dict:
    """Report entry ``{analytic, empirical, stderr, z_score}``."""
    z = (empirical - analytic) / stderr if stderr > 0 else float("inf")
    return {"analytic": float(analytic), "empirical": float(empirical),
            "stderr": float(stderr), "z_score": float(z)}
