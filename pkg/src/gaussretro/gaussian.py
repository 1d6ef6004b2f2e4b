"""Phase-space representation of Gaussian states and Gaussian effects.

Conventions: hbar = 1, quadratures interleaved as ``(x1, p1, x2, p2, ...)``,
vacuum covariance ``I / 2``. A covariance is the symmetrised second moment
``Tr[{r - r_bar, (r - r_bar)^T} rho] / 2``.

Effects (posterior measurement operators ``E``) share the representation: a
Gaussian Wigner function with mean and covariance. Their scalar
normalisation is dropped because every use divides it out.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, NumericalSingularityError

SYMMETRY_RTOL = 1e-12
ADMISSIBILITY_TOL = 1e-10
RCOND_THRESHOLD = 1e-13
DEFAULT_EPS = 1e-8


class Kind(str, enum.Enum):
    STATE = "State"
    EFFECT = "Effect"

    @classmethod
    def parse(cls, value) -> "Kind":
        if isinstance(value, Kind):
            return value
        for k in cls:
            if str(value).lower() == k.value.lower():
                return k
        raise InvalidArgumentError(f"unknown operator kind {value!r}")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussianOperator:
    """Gaussian density matrix or effect on ``n_modes`` bosonic modes.

    Parameters
    ----------
    mean : array_like, shape (2n,)
        First moments, interleaved ordering.
    cov : array_like, shape (2n, 2n)
        Symmetric covariance matrix.
    kind : Kind
        Whether the operator is a state or an (unnormalised) effect.

    Construction checks structure only (shape, finiteness, symmetry).
    Physical admissibility is reported by :func:`validate`.
    """

    mean: np.ndarray
    cov: np.ndarray
    kind: Kind = Kind.STATE

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if mean.size == 0 or mean.size % 2:
            raise InvalidArgumentError(
                f"mean must have even, nonzero length; got {mean.size}")
        n2 = mean.size
        if cov.shape != (n2, n2):
            raise InvalidArgumentError(
                f"cov shape {cov.shape} does not match mean length {n2}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidArgumentError("mean and cov must be finite")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_RTOL * scale:
            raise InvalidArgumentError("cov is not symmetric")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(0.5 * (cov + cov.T)))
        object.__setattr__(self, "kind", Kind.parse(self.kind))

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def mode_block(self, mode: int) -> tuple[np.ndarray, np.ndarray]:
        """Mean 2-vector and 2x2 covariance block of one mode."""
        _check_mode(mode, self.n_modes)
        sl = slice(2 * mode, 2 * mode + 2)
        return self.mean[sl], self.cov[sl, sl]

    def reduce(self, modes: Sequence[int]) -> "GaussianOperator":
        """Marginal (partial trace) onto ``modes``, in the given order."""
        idx = mode_indices(modes, self.n_modes)
        return GaussianOperator(self.mean[idx], self.cov[np.ix_(idx, idx)], self.kind)

    def with_mean(self, mean) -> "GaussianOperator":
        return GaussianOperator(mean, self.cov, self.kind)

    def to_dict(self) -> dict:
        return {
            "n_modes": self.n_modes,
            "kind": self.kind.value,
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianOperator":
        try:
            op = cls(d["mean"], d["cov"], Kind.parse(d.get("kind", "State")))
        except KeyError as exc:
            raise InvalidArgumentError(f"missing key {exc.args[0]!r}") from None
        if "n_modes" in d and int(d["n_modes"]) != op.n_modes:
            raise InvalidArgumentError(
                f"n_modes={d['n_modes']} disagrees with mean length {op.mean.size}")
        return op

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GaussianOperator":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class QuadratureDirection:
    """The observable ``x cos(phi) + p sin(phi)`` of one mode.

    ``phi + pi`` denotes the negated observable, so ``phi`` is not reduced
    modulo pi.
    """

    mode: int
    phi: float

    def __post_init__(self):
        if int(self.mode) != self.mode or self.mode < 0:
            raise InvalidArgumentError(f"mode must be a non-negative integer, got {self.mode}")
        if not math.isfinite(self.phi):
            raise InvalidArgumentError("phi must be finite")
        object.__setattr__(self, "mode", int(self.mode))
        object.__setattr__(self, "phi", float(self.phi))

    @property
    def unit(self) -> np.ndarray:
        return np.array([math.cos(self.phi), math.sin(self.phi)])

    def conjugate(self) -> "QuadratureDirection":
        return QuadratureDirection(self.mode, self.phi + math.pi / 2)

    def vector(self, n_modes: int) -> np.ndarray:
        """Row vector ``u`` with ``x_phi = u . r`` on the full phase space."""
        _check_mode(self.mode, n_modes)
        u = np.zeros(2 * n_modes)
        u[2 * self.mode:2 * self.mode + 2] = self.unit
        return u


@dataclass(frozen=True)
class ScalarGaussian:
    """One-dimensional normal distribution."""

    mean: float
    variance: float

    def __post_init__(self):
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise InvalidArgumentError(f"variance must be positive, got {self.variance}")
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * (x - self.mean) ** 2 / self.variance) / math.sqrt(
            2 * math.pi * self.variance)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "variance": self.variance}


# -- orderings and symplectic structure ------------------------------------

def symplectic_form(n_modes: int) -> np.ndarray:
    """Interleaved symplectic form, ``i Omega = [r, r^T]``."""
    if n_modes < 1:
        raise InvalidArgumentError("n_modes must be >= 1")
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def mode_indices(modes: Iterable[int], n_modes: int) -> np.ndarray:
    idx = []
    for k in modes:
        _check_mode(k, n_modes)
        idx += [2 * k, 2 * k + 1]
    if len(set(idx)) != len(idx):
        raise InvalidArgumentError("repeated mode index")
    return np.array(idx, dtype=int)


def meter_bank_order(n_meters: int, n_system_modes: int) -> np.ndarray:
    """Ordering ``(q_1..q_m, pi_1..pi_m, x_1, p_1, x_2, p_2, ...)``.

    Meters occupy interleaved modes ``0..m-1`` and the system the following
    modes. Entry ``k`` is the interleaved index of the k-th coordinate in the
    blocked layout.
    """
    m = n_meters
    q = [2 * i for i in range(m)]
    pi = [2 * i + 1 for i in range(m)]
    sys = list(range(2 * m, 2 * (m + n_system_modes)))
    return np.array(q + pi + sys, dtype=int)


def permutation_matrix(order: Sequence[int]) -> np.ndarray:
    """``P`` with ``P @ v_ordered = v_interleaved``."""
    order = np.asarray(order, dtype=int)
    n = order.size
    if sorted(order.tolist()) != list(range(n)):
        raise InvalidArgumentError("order is not a permutation")
    P = np.zeros((n, n))
    P[order, np.arange(n)] = 1.0
    return P


@dataclass(frozen=True, eq=False)
class LinearPhaseSpaceMap:
    """Linear map ``r' = L r`` on stacked quadratures.

    ``order`` says how the coordinates of ``matrix`` relate to the
    interleaved layout (see :func:`meter_bank_order`); ``None`` means
    interleaved already.
    """

    matrix: np.ndarray
    order: np.ndarray | None = None

    def __post_init__(self):
        L = np.asarray(self.matrix, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] % 2:
            raise InvalidArgumentError(f"map must be square of even size, got {L.shape}")
        object.__setattr__(self, "matrix", _frozen(L))
        if self.order is not None:
            order = np.asarray(self.order, dtype=int)
            if order.size != L.shape[0]:
                raise InvalidArgumentError("order length does not match map size")
            permutation_matrix(order)
            object.__setattr__(self, "order", _frozen(order).astype(int))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def interleaved(self) -> np.ndarray:
        if self.order is None:
            return np.array(self.matrix)
        P = permutation_matrix(self.order)
        return P @ self.matrix @ P.T

    def symplectic_defect(self) -> float:
        """``max |L Omega L^T - Omega|`` in interleaved coordinates."""
        L = self.interleaved()
        om = symplectic_form(self.dim // 2)
        return float(np.max(np.abs(L @ om @ L.T - om)))

    def is_symplectic(self, tol: float = 1e-10) -> bool:
        return self.symplectic_defect() <= tol


def rotation_map(n_modes: int, mode: int, theta: float) -> LinearPhaseSpaceMap:
    """Phase rotation of one mode: ``x_theta`` becomes the new ``x``."""
    _check_mode(mode, n_modes)
    L = np.eye(2 * n_modes)
    c, s = math.cos(theta), math.sin(theta)
    L[2 * mode:2 * mode + 2, 2 * mode:2 * mode + 2] = [[c, s], [-s, c]]
    return LinearPhaseSpaceMap(L)


def symplectic_eigenvalues(cov) -> np.ndarray:
    """Williamson spectrum of a covariance matrix, sorted ascending."""
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(symplectic_form(n) @ cov))
    return np.sort(ev)[::2]


# -- constructors ------------------------------------------------------------

def make_vacuum(n_modes: int) -> GaussianOperator:
    if int(n_modes) != n_modes or n_modes < 1:
        raise InvalidArgumentError(f"n_modes must be a positive integer, got {n_modes}")
    n = int(n_modes)
    return GaussianOperator(np.zeros(2 * n), 0.5 * np.eye(2 * n), Kind.STATE)


def make_coherent(mean, kind: Kind = Kind.STATE) -> GaussianOperator:
    mean = np.asarray(mean, dtype=float).reshape(-1)
    return GaussianOperator(mean, 0.5 * np.eye(mean.size), kind)


def make_diagonal(var_x: float, var_p: float, mean=(0.0, 0.0),
                  kind: Kind = Kind.STATE) -> GaussianOperator:
    """Single-mode operator with covariance ``diag(var_x, var_p)``."""
    return GaussianOperator(mean, np.diag([var_x, var_p]), kind)


def make_thermal(nbar: float, n_modes: int = 1) -> GaussianOperator:
    if nbar < 0:
        raise InvalidArgumentError("nbar must be non-negative")
    return GaussianOperator(np.zeros(2 * n_modes), (nbar + 0.5) * np.eye(2 * n_modes))


def tmss_cov(s: float) -> np.ndarray:
    """Two-mode squeezed covariance; ``x1 - x2`` and ``p1 + p2`` squeezed for s > 0."""
    if not math.isfinite(s):
        raise InvalidArgumentError("squeezing must be finite")
    c, sh = math.cosh(s), math.sinh(s)
    return 0.5 * np.array([
        [c, 0.0, sh, 0.0],
        [0.0, c, 0.0, -sh],
        [sh, 0.0, c, 0.0],
        [0.0, -sh, 0.0, c],
    ])


def make_two_mode_squeezed(s: float, mean=None) -> GaussianOperator:
    mean = np.zeros(4) if mean is None else mean
    return GaussianOperator(mean, tmss_cov(s), Kind.STATE)


def make_epr_effect(s_prime: float, mean=None) -> GaussianOperator:
    """Effect of a joint measurement of ``x1 + x2`` and ``p1 - p2``.

    Same covariance form as the two-mode squeezed state with squeezing
    ``s_prime``; negative ``s_prime`` squeezes ``x1 + x2`` and ``p1 - p2``.
    The measurement outcome only enters through ``mean``.
    """
    mean = np.zeros(4) if mean is None else mean
    return GaussianOperator(mean, tmss_cov(s_prime), Kind.EFFECT)


def make_homodyne_effect(direction: QuadratureDirection, outcome: float = 0.0,
                         eps: float = DEFAULT_EPS) -> GaussianOperator:
    """Regularised projector onto ``x_phi = outcome`` for a single mode.

    Variance ``eps`` along the measured quadrature and ``1/eps`` along the
    conjugate; the sharp projector is the ``eps -> 0`` limit.
    """
    if not eps > 0:
        raise InvalidArgumentError("eps must be positive")
    u = direction.unit
    v = np.array([-u[1], u[0]])
    cov = eps * np.outer(u, u) + np.outer(v, v) / eps
    return GaussianOperator(outcome * u, cov, Kind.EFFECT)


# -- operations --------------------------------------------------------------

def rotated_variance(op: GaussianOperator, direction: QuadratureDirection) -> float:
    """Variance of ``x_phi`` as the quadratic form ``u^T sigma u``."""
    _, block = op.mode_block(direction.mode)
    u = direction.unit
    return float(u @ block @ u)


def marginal(op: GaussianOperator, direction: QuadratureDirection) -> ScalarGaussian:
    """Distribution of ``x_phi`` from the Wigner function's marginal."""
    mean, _ = op.mode_block(direction.mode)
    return ScalarGaussian(float(direction.unit @ mean), rotated_variance(op, direction))


def apply_linear_map(op: GaussianOperator, L: LinearPhaseSpaceMap) -> GaussianOperator:
    if L.dim != op.mean.size:
        raise InvalidArgumentError(
            f"map acts on dimension {L.dim}, operator has {op.mean.size}")
    M = L.interleaved()
    return GaussianOperator(M @ op.mean, M @ op.cov @ M.T, op.kind)


def spd_solve(M, rhs) -> np.ndarray:
    """Solve ``M X = rhs`` for symmetric positive definite ``M``.

    Raises :class:`NumericalSingularityError` when the reciprocal condition
    number of ``M`` falls below ``RCOND_THRESHOLD`` or Cholesky fails.
    """
    M = np.asarray(M, dtype=float)
    rcond = 1.0 / np.linalg.cond(M)
    if not rcond >= RCOND_THRESHOLD:
        raise NumericalSingularityError(
            f"matrix is singular to working precision (rcond={rcond:.3g})")
    try:
        factor = scipy.linalg.cho_factor(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalSingularityError(f"matrix is not positive definite: {exc}") from None
    return scipy.linalg.cho_solve(factor, rhs)


def condition_arrays(mean, cov, idx_b, effect_mean, effect_cov):
    """Schur-complement update of a Gaussian on a Gaussian weight over ``idx_b``.

    Returns the mean and covariance of the remaining coordinates of
    ``N(r; mean, cov) * N(r_b; effect_mean, effect_cov)`` after integrating
    out ``r_b``. Works in any coordinate ordering.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    idx_b = np.asarray(idx_b, dtype=int)
    idx_a = np.setdiff1d(np.arange(mean.size), idx_b)
    s_a = cov[np.ix_(idx_a, idx_a)]
    s_ab = cov[np.ix_(idx_a, idx_b)]
    s_b = cov[np.ix_(idx_b, idx_b)]
    K = spd_solve(s_b + np.asarray(effect_cov, dtype=float),
                  np.column_stack([s_ab.T, np.asarray(effect_mean) - mean[idx_b]]))
    gain, shift = K[:, :-1], K[:, -1]
    cov_a = s_a - s_ab @ gain
    return mean[idx_a] + s_ab @ shift, 0.5 * (cov_a + cov_a.T)


def condition_on_effect(joint: GaussianOperator, part_b: Sequence[int],
                        effect_b: GaussianOperator) -> GaussianOperator:
    """State of the complement of ``part_b`` given the effect ``effect_b`` there.

    ``effect_b`` mode ``k`` acts on ``joint`` mode ``part_b[k]``. The result
    is normalised: ``cov_A - cov_AB (cov_B + cov_E)^-1 cov_AB^T`` with mean
    ``mean_A + cov_AB (cov_B + cov_E)^-1 (mean_E - mean_B)``.
    """
    if joint.kind is not Kind.STATE:
        raise InvalidArgumentError("joint operator must be a state")
    part_b = list(part_b)
    if effect_b.n_modes != len(part_b):
        raise InvalidArgumentError(
            f"effect has {effect_b.n_modes} modes but part_b lists {len(part_b)}")
    if len(part_b) >= joint.n_modes:
        raise InvalidArgumentError("part_b must leave at least one mode")
    idx_b = mode_indices(part_b, joint.n_modes)
    mean_a, cov_a = condition_arrays(joint.mean, joint.cov, idx_b,
                                     effect_b.mean, effect_b.cov)
    return GaussianOperator(mean_a, cov_a, Kind.STATE)


def gaussian_product(mean_a, cov_a, mean_b, cov_b):
    """Mean and covariance of the normalised product of two Gaussian densities.

    Uses ``A - A (A + B)^-1 A`` so neither factor is inverted on its own,
    which keeps nearly flat or nearly sharp factors well conditioned.
    """
    mean_a = np.atleast_1d(np.asarray(mean_a, dtype=float))
    mean_b = np.atleast_1d(np.asarray(mean_b, dtype=float))
    A = np.atleast_2d(np.asarray(cov_a, dtype=float))
    B = np.atleast_2d(np.asarray(cov_b, dtype=float))
    K = spd_solve(A + B, np.column_stack([A, mean_b - mean_a]))
    cov = A - A @ K[:, :-1]
    return mean_a + A @ K[:, -1], 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class ValidationReport:
    kind: Kind
    n_modes: int
    symmetry_defect: float
    symplectic_eigenvalues: tuple
    min_symplectic_eigenvalue: float
    min_eigenvalue: float
    positive_definite: bool
    admissible: bool
    messages: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_modes": self.n_modes,
            "symmetry_defect": self.symmetry_defect,
            "symplectic_eigenvalues": list(self.symplectic_eigenvalues),
            "min_symplectic_eigenvalue": self.min_symplectic_eigenvalue,
            "min_eigenvalue": self.min_eigenvalue,
            "positive_definite": self.positive_definite,
            "admissible": self.admissible,
            "messages": list(self.messages),
        }


def validate(op: GaussianOperator) -> ValidationReport:
    """Diagnose symmetry, positivity and uncertainty-principle admissibility.

    States need every symplectic eigenvalue >= 1/2; effects need a positive
    definite covariance.
    """
    cov = np.array(op.cov)
    sym_defect = float(np.max(np.abs(cov - cov.T)))
    nu = symplectic_eigenvalues(cov)
    min_eig = float(np.linalg.eigvalsh(cov).min())
    pd = min_eig > 0
    messages = []
    if op.kind is Kind.STATE:
        admissible = bool(nu.min() >= 0.5 - ADMISSIBILITY_TOL)
        if not admissible:
            messages.append(
                f"symplectic eigenvalue {nu.min():.6g} < 1/2 violates the uncertainty relation")
    else:
        admissible = pd
        if not pd:
            messages.append(f"effect covariance not positive definite (min eigenvalue {min_eig:.6g})")
    return ValidationReport(op.kind, op.n_modes, sym_defect, tuple(float(v) for v in nu),
                            float(nu.min()), min_eig, pd, admissible, tuple(messages))


def _check_mode(mode: int, n_modes: int):
    if not 0 <= mode < n_modes:
        raise InvalidArgumentError(f"mode {mode} out of range for {n_modes} modes")
