"""Truncated single-atom Hilbert space and the fixed operators acting on it.

The basis is internal-major: flat index ``internal * (n_max + 1) + n`` with
``g -> 0`` and ``e -> 1``.  Momentum levels are the parity-symmetric states
``|Psi_0> = |0>`` and ``|Psi_n> = (|n hbar k> + |-n hbar k>)/sqrt(2)``.
Units: hbar = omega_R = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

G, E = 0, 1


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model parameters (rates in units of the recoil frequency).

    Attributes
    ----------
    lam : float
        Superradiant decay rate Lambda.
    w : float
        Incoherent pump rate.
    delta_over_kappa : float
        Cavity detuning over cavity loss rate.
    n_max : int
        Highest momentum level kept, ``|Psi_{n_max}>``.
    """

    lam: float
    w: float
    delta_over_kappa: float = 0.5
    n_max: int = 15

    def __post_init__(self):
        for name in ("lam", "w", "delta_over_kappa"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if int(self.n_max) == self.n_max:
            object.__setattr__(self, "n_max", int(self.n_max))
        if not self.lam > 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if not self.w >= 0:
            raise ValueError(f"w must be >= 0, got {self.w}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max}")
        if not math.isfinite(self.delta_over_kappa):
            raise ValueError("delta_over_kappa must be finite")

    @property
    def n_levels(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    @property
    def alpha(self) -> complex:
        return complex(2.0 * self.delta_over_kappa, -1.0)

    @property
    def chi(self) -> float:
        # tan(chi) = kappa / (2 Delta), chi in (0, pi); exactly pi/2 at resonance
        if self.delta_over_kappa == 0:
            return math.pi / 2
        return math.atan2(1.0, 2.0 * self.delta_over_kappa)

    @property
    def coupling(self) -> complex:
        """Complex prefactor multiplying ``X sigma^dag cos(kx)`` in H_mf."""
        chi = self.chi
        if self.delta_over_kappa == 0:
            return -0.5j * self.lam
        return -self.lam / (2.0 * math.sin(chi)) * complex(math.cos(chi), math.sin(chi))

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace

        return replace(self, **changes)


def flat_index(internal: int, n: int, n_max: int) -> int:
    if internal not in (G, E):
        raise ValueError(f"internal must be 0 (g) or 1 (e), got {internal}")
    if not 0 <= n <= n_max:
        raise ValueError(f"momentum level {n} outside [0, {n_max}]")
    return internal * (n_max + 1) + n


def basis_label(index: int, n_max: int) -> tuple[int, int]:
    """Inverse of :func:`flat_index`."""
    if not 0 <= index < 2 * (n_max + 1):
        raise ValueError(f"flat index {index} out of range")
    return divmod(index, n_max + 1)


def _check_n_max(n_max: int) -> None:
    if int(n_max) != n_max or n_max < 1:
        raise ValueError(f"n_max must be an integer >= 1, got {n_max}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def build_cos(n_max: int) -> np.ndarray:
    """cos(kx) on the symmetric momentum levels (real, symmetric, tridiagonal)."""
    _check_n_max(n_max)
    c = np.zeros((n_max + 1, n_max + 1))
    c[0, 1] = c[1, 0] = 1.0 / math.sqrt(2.0)
    for n in range(1, n_max):
        c[n, n + 1] = c[n + 1, n] = 0.5
    return _frozen(c)


@lru_cache(maxsize=None)
def build_kinetic(n_max: int) -> np.ndarray:
    _check_n_max(n_max)
    return _frozen(np.diag(np.arange(n_max + 1, dtype=float) ** 2))


@lru_cache(maxsize=None)
def build_sigma(n_max: int) -> np.ndarray:
    """Internal lowering operator ``|g><e|`` tensored with the momentum identity."""
    _check_n_max(n_max)
    low = np.zeros((2, 2))
    low[G, E] = 1.0
    return _frozen(np.kron(low, np.eye(n_max + 1)).astype(complex))


@lru_cache(maxsize=None)
def build_j1(n_max: int) -> np.ndarray:
    """Collective jump operator ``J1 = sigma cos(kx)`` on the full space."""
    low = np.zeros((2, 2))
    low[G, E] = 1.0
    return _frozen(np.kron(low, build_cos(n_max)).astype(complex))


class Operators(NamedTuple):
    kinetic: np.ndarray  # full D x D
    cos: np.ndarray  # full D x D
    sigma: np.ndarray
    j1: np.ndarray
    n_excited: np.ndarray  # sigma^dag sigma


@lru_cache(maxsize=None)
def operators(n_max: int) -> Operators:
    eye2 = np.eye(2)
    sigma = build_sigma(n_max)
    return Operators(
        kinetic=_frozen(np.kron(eye2, build_kinetic(n_max)).astype(complex)),
        cos=_frozen(np.kron(eye2, build_cos(n_max)).astype(complex)),
        sigma=sigma,
        j1=build_j1(n_max),
        n_excited=_frozen(sigma.conj().T @ sigma),
    )


def order_parameter(rho: np.ndarray) -> complex:
    """X = Tr(sigma cos(kx) rho)."""
    n_levels = rho.shape[0] // 2
    # J1 only has a (g, e) block, so Tr(J1 rho) = Tr(C rho_eg)
    c = build_cos(n_levels - 1)
    return complex(np.sum(c * rho[n_levels:, :n_levels].T))


def n_max_of(rho: np.ndarray) -> int:
    d = rho.shape[0]
    if rho.ndim != 2 or rho.shape[1] != d or d % 2 or d < 4:
        raise ValueError(f"not a density matrix on the internal x momentum space: shape {rho.shape}")
    return d // 2 - 1


def basis_projector(internal: int, n: int, n_max: int) -> np.ndarray:
    rho = np.zeros((2 * (n_max + 1),) * 2, dtype=complex)
    i = flat_index(internal, n, n_max)
    rho[i, i] = 1.0
    return rho
