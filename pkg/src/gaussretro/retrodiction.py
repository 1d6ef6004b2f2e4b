"""Retrodicted distributions of past quadrature measurements.

A past measurement outcome is conditioned on both the prepared state ``rho``
and the effect ``E`` of later measurements: for a projective measurement of
``x_phi`` the outcome density is proportional to
``<x_phi|rho|x_phi> <x_phi|E|x_phi>`` (traced over any ancilla modes).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidArgumentError
from .gaussian import (
    GaussianOperator,
    Kind,
    QuadratureDirection,
    ScalarGaussian,
    gaussian_product,
    marginal,
    rotated_variance,
    validate,
)

HUR_BOUND = 0.25


class Provenance(str, enum.Enum):
    SINGLE_MODE = "SingleMode"
    TWO_MODE_EPR = "TwoModeEPR"
    HETERODYNE = "Heterodyne"


@dataclass(frozen=True, eq=False)
class PqsPair:
    """Prepared state and posterior effect on the same modes."""

    rho: GaussianOperator
    effect: GaussianOperator

    def __post_init__(self):
        if self.rho.kind is not Kind.STATE:
            raise InvalidArgumentError("rho must be a state")
        if self.effect.kind is not Kind.EFFECT:
            raise InvalidArgumentError("effect must be an effect")
        if self.rho.n_modes != self.effect.n_modes:
            raise InvalidArgumentError(
                f"mode count mismatch: rho {self.rho.n_modes}, effect {self.effect.n_modes}")
        report = validate(self.rho)
        if not report.admissible:
            raise InvalidArgumentError("rho is not a physical state: " + "; ".join(report.messages))
        if not validate(self.effect).positive_definite:
            raise InvalidArgumentError("effect covariance must be positive definite")

    @property
    def n_modes(self) -> int:
        return self.rho.n_modes

    def to_dict(self) -> dict:
        return {"rho": self.rho.to_dict(), "effect": self.effect.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "PqsPair":
        return cls(GaussianOperator.from_dict(d["rho"]), GaussianOperator.from_dict(d["effect"]))


@dataclass(frozen=True)
class RetrodictionResult:
    distribution: ScalarGaussian
    direction: QuadratureDirection
    provenance: Provenance

    def to_dict(self) -> dict:
        return {
            "mean": self.distribution.mean,
            "variance": self.distribution.variance,
            "mode": self.direction.mode,
            "phi": self.direction.phi,
            "provenance": self.provenance.value,
        }


def _require_single(pair: PqsPair):
    if pair.n_modes != 1:
        raise InvalidArgumentError(f"expected a single-mode pair, got {pair.n_modes} modes")


def pqs_variance_single(pair: PqsPair, direction: QuadratureDirection) -> float:
    """Retrodicted variance of ``x_phi``: harmonic combination of the two marginals."""
    _require_single(pair)
    v_rho = rotated_variance(pair.rho, direction)
    v_e = rotated_variance(pair.effect, direction)
    return v_rho * v_e / (v_rho + v_e)


def pqs_distribution_single(pair: PqsPair, direction: QuadratureDirection) -> RetrodictionResult:
    _require_single(pair)
    a = marginal(pair.rho, direction)
    b = marginal(pair.effect, direction)
    mean = (b.variance * a.mean + a.variance * b.mean) / (a.variance + b.variance)
    return RetrodictionResult(
        ScalarGaussian(mean, pqs_variance_single(pair, direction)),
        direction, Provenance.SINGLE_MODE)


def pqs_distribution(pair: PqsPair, direction: QuadratureDirection) -> ScalarGaussian:
    """Retrodicted distribution of ``x_phi`` on one mode of a multimode pair.

    Each operator is projected onto ``x_phi`` of the target mode together with
    all quadratures of the other modes (the partial matrix element
    ``<x_phi|.|x_phi>`` integrates the Wigner function over the conjugate
    quadrature). The two projected Gaussians are multiplied, and the ancilla
    coordinates integrated out.
    """
    n = pair.n_modes
    u = direction.vector(n)
    rows = [u]
    for k in range(2 * n):
        if k // 2 != direction.mode:
            e = np.zeros(2 * n)
            e[k] = 1.0
            rows.append(e)
    T = np.array(rows)
    mean, cov = gaussian_product(
        T @ pair.rho.mean, T @ pair.rho.cov @ T.T,
        T @ pair.effect.mean, T @ pair.effect.cov @ T.T)
    return ScalarGaussian(mean[0], cov[0, 0])


def pqs_two_mode(rho2: GaussianOperator, effect2: GaussianOperator,
                 direction: QuadratureDirection) -> RetrodictionResult:
    """Retrodiction of ``x_phi`` on one mode of an entangled pair of modes.

    For the two-mode squeezed forms with parameters ``s`` and ``s'`` the
    variance is ``(cosh s + cosh s') / (4 (1 + cosh(s - s')))`` for every
    ``phi``.
    """
    pair = PqsPair(rho2, effect2)
    if pair.n_modes != 2:
        raise InvalidArgumentError("pqs_two_mode needs two-mode operators")
    return RetrodictionResult(pqs_distribution(pair, direction), direction, Provenance.TWO_MODE_EPR)


def combined_gaussian_mean(pair: PqsPair) -> np.ndarray:
    """Precision-weighted mean ``(S_r^-1 + S_E^-1)^-1 (S_r^-1 r_r + S_E^-1 r_E)``.

    Coincides with the retrodicted mean for two-mode squeezed forms, but not
    for general operators; kept as a cross-check.
    """
    mean, _ = gaussian_product(pair.rho.mean, pair.rho.cov, pair.effect.mean, pair.effect.cov)
    return mean


def epr_variance(s: float, s_prime: float) -> float:
    """Closed-form retrodicted variance for two-mode squeezed ``rho`` and ``E``."""
    return (math.cosh(s) + math.cosh(s_prime)) / (4.0 * (1.0 + math.cosh(s - s_prime)))


def epr_mean(s: float, s_prime: float, rho_means, effect_means, phi):
    """Closed-form retrodicted mean of ``x_phi`` on mode 1 for two-mode squeezed forms.

    ``rho_means`` and ``effect_means`` are ``(x1, p1, x2, p2)``; ``phi`` may be
    an array.
    """
    r = np.asarray(rho_means, dtype=float)
    e = np.asarray(effect_means, dtype=float)
    phi = np.asarray(phi, dtype=float)
    c, sn = np.cos(phi), np.sin(phi)
    d = s - s_prime
    weight = math.sinh(d) / (2.0 * (1.0 + math.cosh(d)))
    return (c * (r[0] + e[0]) / 2 + sn * (r[1] + e[1]) / 2
            + weight * (c * (e[2] - r[2]) - sn * (e[3] - r[3])))


def heterodyne_retrodiction(pair: PqsPair) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the retrodicted heterodyne outcome ``(x, p)``.

    The outcome density is the normalised product of the Husimi functions of
    ``rho`` and ``E``, each a Gaussian with covariance ``sigma + I/2``.
    """
    _require_single(pair)
    half = 0.5 * np.eye(2)
    return gaussian_product(pair.rho.mean, pair.rho.cov + half,
                            pair.effect.mean, pair.effect.cov + half)


def butterfly_curve(pair: PqsPair, phi_grid: Iterable[float]) -> list[tuple[float, float]]:
    """``(phi, variance)`` of single-mode retrodiction over ``phi_grid``."""
    grid = [float(p) for p in phi_grid]
    if not grid:
        raise InvalidArgumentError("phi grid must be non-empty")
    return [(p, pqs_variance_single(pair, QuadratureDirection(0, p))) for p in grid]


def uniform_phi_grid(n_points: int, period: float = 2 * math.pi) -> np.ndarray:
    if n_points < 1:
        raise InvalidArgumentError("need at least one grid point")
    return np.arange(n_points) * (period / n_points)


def violates_hur(var_x: float, var_p: float) -> bool:
    """Whether a pair of conjugate variances beats ``var_x var_p >= 1/4``."""
    return var_x * var_p < HUR_BOUND
