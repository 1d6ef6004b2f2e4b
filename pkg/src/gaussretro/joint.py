"""Joint measurement of many quadratures through a bank of meters.

Each meter ``i`` (position ``q_i``, momentum ``pi_i``, covariance
``diag(z/2, 1/(2z))``) couples impulsively to ``x_{phi_i}`` of system mode 1,
which is half of a two-mode squeezed pair. The meter momenta are read out;
a final EPR measurement on the pair (effect of the same two-mode form with
squeezing ``s'``) sharpens the retrodicted meter statistics.

Meter modes occupy interleaved modes ``0..m-1``, the system modes ``m`` and
``m+1``. The interaction map is built in the blocked ordering
``(q, pi, x1, p1, x2, p2)`` and carries its permutation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, InvalidArgumentError
from .gaussian import (
    GaussianOperator,
    LinearPhaseSpaceMap,
    apply_linear_map,
    condition_on_effect,
    make_epr_effect,
    make_two_mode_squeezed,
    meter_bank_order,
    spd_solve,
)
from .retrodiction import epr_mean, epr_variance

CONSTRAINT_TOL = 1e-10


def default_angles(m: int, period: float = 2 * math.pi) -> tuple:
    """``phi_j = period * j / m`` for ``j = 1..m``.

    With the default period ``2 pi`` and even ``m`` every axis appears twice
    (``x_{phi+pi} = -x_phi``); pass ``period=pi`` for distinct axes.
    """
    if m < 1:
        raise InvalidArgumentError("need at least one meter")
    return tuple(period * j / m for j in range(1, m + 1))


def _vec(values, n, name):
    v = np.zeros(n) if values is None else np.asarray(values, dtype=float).reshape(-1)
    if v.size != n:
        raise InvalidArgumentError(f"{name} must have length {n}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError(f"{name} must be finite")
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class Scenario:
    """Meter-bank protocol parameters.

    ``meter_means`` is interleaved ``(q_1, pi_1, q_2, pi_2, ...)``;
    ``rho_means`` and ``effect_means`` are ``(x1, p1, x2, p2)``.
    """

    m: int
    z: float
    s: float = 0.0
    s_prime: float = 0.0
    angles: tuple | None = None
    rho_means: np.ndarray | None = None
    effect_means: np.ndarray | None = None
    meter_means: np.ndarray | None = None

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise InvalidArgumentError(f"m must be a positive integer, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        if not (math.isfinite(self.z) and self.z > 0):
            raise InvalidArgumentError(f"z must be positive and finite, got {self.z}")
        for name in ("s", "s_prime"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgumentError(f"{name} must be finite")
        angles = default_angles(self.m) if self.angles is None else tuple(float(a) for a in self.angles)
        if len(angles) != self.m:
            raise InvalidArgumentError(f"expected {self.m} angles, got {len(angles)}")
        if not all(math.isfinite(a) for a in angles):
            raise InvalidArgumentError("angles must be finite")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "rho_means", _vec(self.rho_means, 4, "rho_means"))
        object.__setattr__(self, "effect_means", _vec(self.effect_means, 4, "effect_means"))
        object.__setattr__(self, "meter_means", _vec(self.meter_means, 2 * self.m, "meter_means"))

    @property
    def phi(self) -> np.ndarray:
        return np.array(self.angles)

    def system_state(self) -> GaussianOperator:
        return make_two_mode_squeezed(self.s, self.rho_means)

    def system_effect(self) -> GaussianOperator:
        return make_epr_effect(self.s_prime, self.effect_means)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "z": self.z,
            "s": self.s,
            "s_prime": self.s_prime,
            "angles": list(self.angles),
            "rho_means": self.rho_means.tolist(),
            "effect_means": self.effect_means.tolist(),
            "meter_means": self.meter_means.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        known = {"m", "z", "s", "s_prime", "angles", "rho_means", "effect_means", "meter_means"}
        unknown = set(d) - known
        if unknown:
            raise InvalidArgumentError(f"unknown scenario keys: {sorted(unknown)}")
        if "m" not in d or "z" not in d:
            raise InvalidArgumentError("scenario needs 'm' and 'z'")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class MeterStatistics:
    """Distribution of the meter momentum readouts."""

    pi_mean: np.ndarray
    pi_cov: np.ndarray
    postselected: bool
    stderr_mean: np.ndarray | None = field(default=None)
    stderr_cov: np.ndarray | None = field(default=None)

    def __post_init__(self):
        mean = np.array(self.pi_mean, dtype=float).reshape(-1)
        cov = np.array(self.pi_cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise InvalidArgumentError("pi_cov shape does not match pi_mean")
        if np.max(np.abs(cov - cov.T)) > 1e-9 * max(1.0, np.max(np.abs(cov))):
            raise InvalidArgumentError("pi_cov is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise InvalidArgumentError("pi_cov is not positive definite")
        object.__setattr__(self, "pi_mean", mean)
        object.__setattr__(self, "pi_cov", cov)

    @property
    def m(self) -> int:
        return self.pi_mean.size

    def to_dict(self) -> dict:
        d = {
            "postselected": self.postselected,
            "pi_mean": self.pi_mean.tolist(),
            "pi_cov": self.pi_cov.tolist(),
        }
        if self.stderr_mean is not None:
            d["stderr_mean"] = np.asarray(self.stderr_mean).tolist()
        if self.stderr_cov is not None:
            d["stderr_cov"] = np.asarray(self.stderr_cov).tolist()
        return d

    def csv_rows(self) -> list[tuple]:
        rows = [("mean", i, "", repr(float(v))) for i, v in enumerate(self.pi_mean)]
        for i in range(self.m):
            for j in range(self.m):
                rows.append(("cov", i, j, repr(float(self.pi_cov[i, j]))))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("statistic", "i", "j", "value"))
        w.writerows(self.csv_rows())
        return buf.getvalue()


def commutator_matrix(angles) -> np.ndarray:
    """``C_ij = i [x_{phi_i}, x_{phi_j}] = sin(phi_i - phi_j)``."""
    phi = np.asarray(angles, dtype=float)
    return np.sin(phi[:, None] - phi[None, :])


def build_transform(scenario: Scenario) -> LinearPhaseSpaceMap:
    """Heisenberg map of the impulsive meter coupling in blocked ordering.

    ``q`` unchanged; ``pi_i += x_{phi_i} + (C q)_i / 2``;
    ``x1 -= sum_i sin(phi_i) q_i``; ``p1 += sum_i cos(phi_i) q_i``.
    """
    m = scenario.m
    phi = scenario.phi
    n = 2 * m + 4
    ix1, ip1 = 2 * m, 2 * m + 1
    L = np.eye(n)
    L[m:2 * m, :m] += 0.5 * commutator_matrix(phi)
    L[m:2 * m, ix1] += np.cos(phi)
    L[m:2 * m, ip1] += np.sin(phi)
    L[ix1, :m] -= np.sin(phi)
    L[ip1, :m] += np.cos(phi)
    return LinearPhaseSpaceMap(L, meter_bank_order(m, 2))


def initial_state(scenario: Scenario) -> GaussianOperator:
    """Meters in ``diag(z/2, 1/(2z))`` states times the two-mode squeezed system."""
    m, z = scenario.m, scenario.z
    cov = np.zeros((2 * m + 4, 2 * m + 4))
    for i in range(m):
        cov[2 * i, 2 * i] = z / 2
        cov[2 * i + 1, 2 * i + 1] = 1 / (2 * z)
    system = scenario.system_state()
    cov[2 * m:, 2 * m:] = system.cov
    mean = np.concatenate([scenario.meter_means, system.mean])
    return GaussianOperator(mean, cov)


def _pi_indices(m: int) -> np.ndarray:
    return 2 * np.arange(m) + 1


def predicted_meter_stats(scenario: Scenario) -> MeterStatistics:
    """Meter momentum statistics without postselection, via ``L sigma L^T``."""
    evolved = apply_linear_map(initial_state(scenario), build_transform(scenario))
    idx = _pi_indices(scenario.m)
    return MeterStatistics(evolved.mean[idx], evolved.cov[np.ix_(idx, idx)], False)


def predicted_variance_closed_form(scenario: Scenario) -> np.ndarray:
    """``1/(2z) + z sum_j sin^2(phi_i - phi_j) / 8 + cosh(s)/2`` per meter.

    The sum is evaluated directly; it equals ``m/2`` only for ``m >= 3``
    equidistant angles.
    """
    z = scenario.z
    sin2 = commutator_matrix(scenario.phi) ** 2
    return 1 / (2 * z) + z * sin2.sum(axis=1) / 8 + math.cosh(scenario.s) / 2


def _retrodict_dense(scenario: Scenario) -> MeterStatistics:
    m = scenario.m
    evolved = apply_linear_map(initial_state(scenario), build_transform(scenario))
    meters = condition_on_effect(evolved, [m, m + 1], scenario.system_effect())
    idx = _pi_indices(m)
    return MeterStatistics(meters.mean[idx], meters.cov[np.ix_(idx, idx)], True)


@dataclass(frozen=True, eq=False)
class _LowRankPi:
    # pi covariance = I / (2z) + R Q R^T
    mean: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    diag: float

    def dense(self) -> np.ndarray:
        return self.diag * np.eye(self.mean.size) + self.R @ self.Q @ self.R.T

    def quadratic(self, d) -> float:
        d = np.asarray(d, dtype=float)
        w = self.R.T @ d
        return float(self.diag * (d @ d) + w @ self.Q @ w)


def _lowrank_pi(scenario: Scenario, postselected: bool) -> _LowRankPi:
    """Exact meter momentum statistics in O(m) storage.

    With ``c = cos(phi)``, ``s = sin(phi)`` and ``V = [c, s]`` the coupling
    is ``C = [s, -c] V^T`` and the back-action on ``(x1, p1)`` is
    ``W V^T``, so every coordinate after the interaction is
    ``H V^T q + (pi or 0) + J r_S`` with thin ``H`` and ``J``.
    """
    m, z = scenario.m, scenario.z
    phi = scenario.phi
    c, s = np.cos(phi), np.sin(phi)
    V = np.column_stack([c, s])
    U = np.column_stack([s, -c])
    W = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    H = np.vstack([0.5 * U, W])
    A = np.column_stack([c, s, np.zeros(m), np.zeros(m)])
    J = np.vstack([A, np.eye(4)])
    R = np.hstack([H, J])
    system = scenario.system_state()
    Q = np.zeros((6, 6))
    Q[:2, :2] = (z / 2) * (V.T @ V)
    Q[2:, 2:] = system.cov
    q_bar = scenario.meter_means[0::2]
    pi_bar = scenario.meter_means[1::2]
    mean = H @ (V.T @ q_bar) + J @ system.mean
    mean[:m] += pi_bar
    R_pi, R_s = R[:m], R[m:]
    if not postselected:
        return _LowRankPi(mean[:m], R_pi, Q, 1 / (2 * z))
    effect = scenario.system_effect()
    cov_s = R_s @ Q @ R_s.T
    QR = Q @ R_s.T
    K = spd_solve(cov_s + effect.cov, np.column_stack([QR.T, effect.mean - mean[m:]]))
    Q_cond = Q - QR @ K[:, :-1]
    pi_mean = mean[:m] + R_pi @ (QR @ K[:, -1])
    return _LowRankPi(pi_mean, R_pi, 0.5 * (Q_cond + Q_cond.T), 1 / (2 * z))


def retrodict_meter_stats(scenario: Scenario, method: str = "dense") -> MeterStatistics:
    """Meter momentum statistics conditioned on the final EPR measurement.

    ``method="dense"`` conditions the full evolved Gaussian on the system
    effect; ``"lowrank"`` evaluates the same Schur complement through the
    rank-structured form, for large ``m``.
    """
    if method == "dense":
        return _retrodict_dense(scenario)
    if method == "lowrank":
        lr = _lowrank_pi(scenario, True)
        return MeterStatistics(lr.mean, lr.dense(), True)
    raise InvalidArgumentError(f"unknown method {method!r}")


def retrodicted_closed_form(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form conditioned meter mean and covariance.

    Covariance ``I/(2z) + cos(phi_i - phi_j) sigma_P`` with the two-mode
    retrodicted variance ``sigma_P``; mean ``pi_bar_i`` plus the retrodicted
    mean of ``x_{phi_i}``.
    """
    phi = scenario.phi
    sigma_p = epr_variance(scenario.s, scenario.s_prime)
    cov = np.cos(phi[:, None] - phi[None, :]) * sigma_p + np.eye(scenario.m) / (2 * scenario.z)
    mean = scenario.meter_means[1::2] + epr_mean(
        scenario.s, scenario.s_prime, scenario.rho_means, scenario.effect_means, phi)
    return mean, cov


def _constraints(phi, target):
    return np.vstack([np.cos(phi - target), np.sin(phi - target)]), np.array([1.0, 0.0])


def _target_angle(scenario, k, target_phi):
    if (k is None) == (target_phi is None):
        raise InvalidArgumentError("give exactly one of k or target_phi")
    if k is not None:
        if not 0 <= k < scenario.m:
            raise InvalidArgumentError(f"meter index {k} out of range")
        return scenario.angles[k]
    return float(target_phi)


def optimal_weights(scenario: Scenario, k: int | None = None, *,
                    target_phi: float | None = None) -> np.ndarray:
    """Minimum-variance weights ``d`` for estimating ``x_{phi_k}`` from the meters.

    Constraints: ``sum_i d_i cos(phi_i - phi_k) = 1`` and
    ``sum_i d_i sin(phi_i - phi_k) = 0``. When the angle set is balanced
    (``sum cos 2 phi = sum sin 2 phi = 0``, e.g. ``m >= 3`` equidistant) the
    answer is ``(2/m) cos(phi_i - phi_k)``; otherwise the KKT system of the
    equality-constrained quadratic program is solved.
    """
    target = _target_angle(scenario, k, target_phi)
    phi = scenario.phi
    m = scenario.m
    A, b = _constraints(phi, target)
    V = np.column_stack([np.cos(phi), np.sin(phi)])
    if np.allclose(V.T @ V, 0.5 * m * np.eye(2), rtol=0, atol=1e-12 * m):
        d = (2.0 / m) * np.cos(phi - target)
    else:
        sigma = _lowrank_pi(scenario, True).dense()
        kkt = np.zeros((m + 2, m + 2))
        kkt[:m, :m] = 2 * sigma
        kkt[:m, m:] = A.T
        kkt[m:, :m] = A
        rhs = np.concatenate([np.zeros(m), b])
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        d = sol[:m]
    if np.max(np.abs(A @ d - b)) > CONSTRAINT_TOL:
        raise InfeasibleError(
            f"no weights reproduce x_phi at phi={target:.6g} from meter angles {list(scenario.angles)}")
    return d


def optimal_combination_variance(scenario: Scenario, k: int | None = None, *,
                                 target_phi: float | None = None) -> float:
    """``d^T sigma d`` for the optimal weights and the conditioned meter covariance."""
    d = optimal_weights(scenario, k, target_phi=target_phi)
    return _lowrank_pi(scenario, True).quadratic(d)


def optimal_combination_closed_form(scenario: Scenario) -> float:
    """``1/(m z) + sigma_P``, valid for balanced angle sets."""
    return 1 / (scenario.m * scenario.z) + epr_variance(scenario.s, scenario.s_prime)
