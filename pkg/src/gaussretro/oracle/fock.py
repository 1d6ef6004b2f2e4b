"""Truncated Fock-space oracle for quadrature marginals.

Independent of the phase-space code: states are built from their number
basis expansion and quadrature densities are ``<x_phi|rho|x_phi>`` evaluated
with harmonic-oscillator eigenfunctions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError
from ..gaussian import QuadratureDirection

DEFICIENCY_WARN = 0.01


class CutoffWarning(UserWarning):
    """The truncated basis misses a noticeable part of the state."""


@dataclass(frozen=True, eq=False)
class FockDensityMatrix:
    """Density matrix on ``n_modes`` modes truncated to ``cutoff`` levels each.

    Two-mode basis index is ``j * cutoff + k`` for ``|j, k>``.
    """

    data: np.ndarray
    cutoff: int
    n_modes: int = 1
    trace_deficiency: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        dim = self.cutoff ** self.n_modes
        if data.shape != (dim, dim):
            raise InvalidArgumentError(f"data shape {data.shape} != ({dim}, {dim})")
        if np.max(np.abs(data - data.conj().T)) > 1e-12:
            raise InvalidArgumentError("density matrix is not Hermitian")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def trace(self) -> float:
        return float(np.real(np.trace(self.data)))

    def reduced(self, mode: int) -> "FockDensityMatrix":
        """Partial trace onto a single mode."""
        if self.n_modes == 1:
            if mode != 0:
                raise InvalidArgumentError("single-mode state has only mode 0")
            return self
        if self.n_modes != 2 or mode not in (0, 1):
            raise InvalidArgumentError(f"mode {mode} invalid for {self.n_modes} modes")
        n = self.cutoff
        t = self.data.reshape(n, n, n, n)
        red = np.einsum("akbk->ab", t) if mode == 0 else np.einsum("kakb->ab", t)
        return FockDensityMatrix(red, n, 1, self.trace_deficiency)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.data).min())


def from_ket(ket, cutoff: int, n_modes: int = 1) -> FockDensityMatrix:
    ket = np.asarray(ket, dtype=complex).reshape(-1)
    return FockDensityMatrix(np.outer(ket, ket.conj()), cutoff, n_modes,
                             max(0.0, 1.0 - float(np.vdot(ket, ket).real)))


def build_tmss_fock(s: float, cutoff: int = 40) -> FockDensityMatrix:
    """Two-mode squeezed vacuum ``sum_j tanh(s/2)^j |j, j> / cosh(s/2)``."""
    if cutoff < 1:
        raise InvalidArgumentError("cutoff must be >= 1")
    if not math.isfinite(s):
        raise InvalidArgumentError("s must be finite")
    j = np.arange(cutoff)
    amps = np.tanh(s / 2) ** j / math.cosh(s / 2)
    ket = np.zeros(cutoff * cutoff, dtype=complex)
    ket[j * cutoff + j] = amps
    rho = from_ket(ket, cutoff, 2)
    # closed-form tail is exact even where the summed norm rounds to 1
    deficiency = float(np.tanh(s / 2) ** (2 * cutoff))
    if deficiency > DEFICIENCY_WARN:
        warnings.warn(f"cutoff {cutoff} leaves trace deficiency {deficiency:.3g}", CutoffWarning,
                      stacklevel=2)
    return FockDensityMatrix(rho.data, cutoff, 2, deficiency)


def coherent_ket(alpha: complex, cutoff: int) -> np.ndarray:
    """Number-basis amplitudes of ``|alpha>``; mean ``(x, p) = sqrt(2) (Re, Im) alpha``."""
    amps = np.zeros(cutoff, dtype=complex)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, cutoff):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    return amps


def hermite_functions(n_max: int, x) -> np.ndarray:
    """Oscillator eigenfunctions ``psi_0..psi_{n_max-1}`` at ``x``, shape (n_max, len(x)).

    Three-term recurrence on the normalised functions; the Gaussian weight is
    carried inside so nothing overflows at large order.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((n_max, x.size))
    out[0] = math.pi ** -0.25 * np.exp(-x * x / 2)
    if n_max > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def mean_photon_number(rho: FockDensityMatrix, mode: int = 0) -> float:
    red = rho.reduced(mode)
    return float(np.real(np.arange(red.cutoff) @ np.diag(red.data)))


def default_window(rho: FockDensityMatrix, mode: int = 0) -> float:
    """``6 sqrt(2 nbar + 1)``; equals ``6 sqrt(cosh s)`` for a two-mode squeezed state."""
    return 6.0 * math.sqrt(2 * mean_photon_number(rho, mode) + 1)


def quadrature_marginal_fock(rho: FockDensityMatrix, direction: QuadratureDirection,
                             grid, window: float | None = None) -> np.ndarray:
    """Density of ``x_phi`` on ``grid`` from ``<x_phi| rho |x_phi>``.

    ``<x_phi|n> = exp(-i n phi) psi_n(x)``.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise InvalidArgumentError("grid must be non-empty")
    red = rho.reduced(direction.mode)
    if window is None:
        window = default_window(rho, direction.mode)
    if np.max(np.abs(grid)) > window:
        raise InvalidArgumentError(f"grid exceeds window |x| <= {window:.6g}")
    n = np.arange(red.cutoff)
    a = hermite_functions(red.cutoff, grid) * np.exp(-1j * direction.phi * n)[:, None]
    dens = np.einsum("jx,jk,kx->x", a, red.data, a.conj())
    return np.real(dens)
