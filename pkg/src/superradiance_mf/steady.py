"""Stationary states in the frame rotating with the emitted field.

A coherent stationary state has ``X(t) = |X| exp(i phi(t))`` with
``d phi / dt = -w Delta / kappa``.  In the frame rotating at that rate the
state is a true fixed point, found by freezing X, solving the now linear
steady-state problem and updating X until both converge.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import E, ModelParams, basis_projector, operators, order_parameter


class NullSpaceError(RuntimeError):
    pass


def rotating_frame_frequency(params: ModelParams) -> float:
    """Phase velocity of the coherent emission, ``-w Delta / kappa``."""
    return -params.w * params.delta_over_kappa


def liouvillian_matrix(X: complex, params: ModelParams, frame_shift: float = 0.0,
                       sparse: bool = False):
    """Vectorized mean-field Liouvillian with X frozen.

    Acts on row-major ``rho.ravel()``, using ``vec(A rho B) = (A kron B^T) vec(rho)``.
    """
    from .dynamics import mf_hamiltonian

    ops = operators(params.n_max)
    d = params.dim
    eye = sp.identity(d, dtype=complex, format="csr")
    h = sp.csr_matrix(mf_hamiltonian(X, params, frame_shift))
    sigma = sp.csr_matrix(ops.sigma)
    up = sigma.conj().T.tocsr()
    ground = (sigma @ up).tocsr()  # |g><g|
    mat = -1j * (sp.kron(h, eye) - sp.kron(eye, h.T))
    if params.w:
        mat = mat + params.w * (sp.kron(up, sigma.T) - 0.5 * (sp.kron(ground, eye) + sp.kron(eye, ground.T)))
    mat = mat.tocsc()
    return mat if sparse else mat.toarray()


def _normalize(vec: np.ndarray, d: int) -> np.ndarray:
    rho = vec.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def _null_space_states(mat: np.ndarray, d: int, tol: float) -> np.ndarray:
    _, svals, vh = la.svd(mat, lapack_driver="gesdd")
    scale = max(svals[0], 1.0)
    null = vh[svals <= tol * scale].conj()
    if null.shape[0] == 0:
        raise NullSpaceError(
            f"no null vector within singular-value tolerance {tol:g} (smallest {svals[-1] / scale:.3e})"
        )
    return null


def _trace_row(d: int) -> sp.csc_matrix:
    cols = np.arange(d) * (d + 1)
    return sp.csc_matrix((np.ones(d), (np.zeros(d, dtype=int), cols)), shape=(d * d, d * d))


def stationary_for_fixed_X(
    X: complex,
    params: ModelParams,
    frame_shift: float | None = None,
    previous: np.ndarray | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """Stationary density matrix of the Liouvillian with X held fixed.

    ``frame_shift`` defaults to the rotating-frame frequency, so the result
    solves ``L_mf rho = -i [(w Delta/kappa) sigma^dag sigma, rho]``.  If the
    null space is degenerate the element closest to ``previous`` is returned
    (the excited condensate when no previous state is given).

    Raises
    ------
    NullSpaceError
        If the smallest singular value exceeds ``tol`` (relative).
    """
    if frame_shift is None:
        frame_shift = rotating_frame_frequency(params)
    d = params.dim
    mat = liouvillian_matrix(X, params, frame_shift, sparse=True)

    # The trace is a left null vector, so the first diagonal equation is
    # redundant: swap it for the normalization condition.
    keep = np.ones(d * d)
    keep[0] = 0.0
    a = (sp.diags(keep) @ mat + _trace_row(d)).tocsc()
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    if X != 0:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", spla.MatrixRankWarning)
                vec = spla.splu(a).solve(rhs)
            if np.all(np.isfinite(vec)):
                residual = np.linalg.norm(mat @ vec)
                if residual <= 1e-9 * max(1.0, np.linalg.norm(vec)):
                    return _normalize(vec, d)
        except (RuntimeError, spla.MatrixRankWarning):
            pass

    null = _null_space_states(mat.toarray(), d, tol)
    if null.shape[0] == 1:
        return _normalize(null[0], d)
    if previous is None:
        previous = basis_projector(E, 0, params.n_max)
    coeffs = null.conj() @ previous.ravel()
    vec = coeffs @ null
    if np.abs(np.trace(vec.reshape(d, d))) < 1e-12:
        raise NullSpaceError("degenerate null space has no component along the previous iterate")
    return _normalize(vec, d)


@dataclass
class FixedPointResult:
    rho_st: np.ndarray
    X_st: complex
    iterations: int
    converged: bool
    residual: float
    params: ModelParams | None = None

    @property
    def abs_X_st(self) -> float:
        return abs(self.X_st)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "lambda": p.lam if p else None,
            "w": p.w if p else None,
            "delta_over_kappa": p.delta_over_kappa if p else None,
            "n_max": p.n_max if p else None,
            "X_st_re": float(np.real(self.X_st)),
            "X_st_im": float(np.imag(self.X_st)),
            "abs_X_st": float(abs(self.X_st)),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path


def iterate_fixed_point(
    X_seed: complex,
    params: ModelParams,
    tol: float = 1e-9,
    max_iter: int = 500,
    mixing: float = 0.5,
) -> FixedPointResult:
    """Damped self-consistency loop ``X <- (1-m) X + m Tr(J1 rho(X))``."""
    if not 0 < mixing <= 1:
        raise ValueError(f"mixing must lie in (0, 1], got {mixing}")
    X = complex(X_seed)
    rho = stationary_for_fixed_X(X, params)
    if X == 0:
        return FixedPointResult(rho, 0j, 1, True, 0.0, params)
    residual = np.inf
    for it in range(1, max_iter + 1):
        X_new = (1 - mixing) * X + mixing * order_parameter(rho)
        residual = abs(X_new - X)
        X = X_new
        rho = stationary_for_fixed_X(X, params, previous=rho)
        if residual < tol:
            return FixedPointResult(rho, order_parameter(rho), it, True, residual, params)
    return FixedPointResult(rho, X, max_iter, False, residual, params)
