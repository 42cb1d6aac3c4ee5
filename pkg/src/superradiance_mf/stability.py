"""Linear stability of stationary states.

A perturbation of a stationary state obeys ``d drho/dt = M drho + (drive
linear in dX and dX*)`` where M is the Liouvillian with X frozen.  After a
Laplace transform the growth exponents are the roots of
``det D(s) = 0`` with ``D(s) = 1 + C(s)`` and ``C`` built from resolvents
``(s - M)^{-1}``.

Two independent routes are provided: Newton iteration on ``det D(s)`` and
the eigenvalues of the full linearized operator ``M + (rank-2 drive)``.
By the matrix determinant lemma both give the same exponents.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numba
import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy import integrate, special

from .dynamics import liouville_rhs
from .model import ModelParams, operators, order_parameter
from .steady import iterate_fixed_point, liouvillian_matrix, rotating_frame_frequency


class NotStationaryError(ValueError):
    pass


class PoleError(ZeroDivisionError):
    """The resolvent does not exist at the requested ``s``."""


class RootFindingError(RuntimeError):
    pass


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def hermitian_basis(d: int) -> sp.csc_matrix:
    """Unitary map from real coordinates to row-major ``vec`` of a d x d matrix.

    Columns are ``E_ii``, ``(E_ij + E_ji)/sqrt 2`` and ``i(E_ij - E_ji)/sqrt 2``
    for ``i < j``; real coordinates are exactly the Hermitian matrices.
    """
    rows, cols, vals = [], [], []
    col = 0
    r2 = 1.0 / math.sqrt(2.0)
    for i in range(d):
        rows.append(i * d + i)
        cols.append(col)
        vals.append(1.0)
        col += 1
    for i in range(d):
        for j in range(i + 1, d):
            rows += [i * d + j, j * d + i]
            cols += [col, col]
            vals += [r2, r2]
            col += 1
            rows += [i * d + j, j * d + i]
            cols += [col, col]
            vals += [1j * r2, -1j * r2]
            col += 1
    return sp.csc_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(d * d, d * d))


@dataclass
class VectorizedLiouvillian:
    """X-frozen linearized flow about ``rho0`` in a given rotating frame."""

    matrix: np.ndarray
    rho0: np.ndarray
    frame_shift: float
    params: ModelParams

    @property
    def X0(self) -> complex:
        return order_parameter(self.rho0)

    @cached_property
    def drive_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """``vec([J1^dag, rho0])`` and ``vec([J1, rho0])``."""
        j1 = operators(self.params.n_max).j1
        return (commutator(j1.conj().T, self.rho0).ravel(), commutator(j1, self.rho0).ravel())

    @cached_property
    def readout_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Row vectors ``l`` with ``l @ vec(A) = Tr(J1 A)`` and ``Tr(J1^dag A)``."""
        j1 = operators(self.params.n_max).j1
        return (j1.T.ravel().copy(), j1.conj().ravel().copy())

    @property
    def drive_weights(self) -> np.ndarray:
        lam, alpha = self.params.lam, self.params.alpha
        return np.array([-0.5j * lam * np.conj(alpha), -0.5j * lam * alpha])

    def full_operator(self) -> np.ndarray:
        """Complex-linear extension of the complete linearized flow."""
        b1, b2 = self.drive_vectors
        l1, l2 = self.readout_vectors
        k1, k2 = -self.drive_weights
        return self.matrix + k1 * np.outer(b1, l1) + k2 * np.outer(b2, l2)


def build_linearized(
    rho0: np.ndarray, params: ModelParams, frame_shift: float = 0.0, tol: float = 1e-6
) -> VectorizedLiouvillian:
    """Linearize about a stationary ``rho0``; the dX drive is kept separate."""
    residual = np.linalg.norm(liouville_rhs(rho0, params, frame_shift))
    if residual > tol:
        raise NotStationaryError(f"reference state is not stationary: |rhs| = {residual:.3e} > {tol:g}")
    mat = liouvillian_matrix(order_parameter(rho0), params, frame_shift)
    return VectorizedLiouvillian(mat, np.array(rho0, dtype=complex), frame_shift, params)


def c_entries(
    s: complex,
    rho0: np.ndarray | VectorizedLiouvillian,
    params: ModelParams | None = None,
    frame_shift: float = 0.0,
) -> np.ndarray:
    """2x2 matrix ``C(s)`` by direct dense solves of ``(s - M) x = b``."""
    lin = rho0 if isinstance(rho0, VectorizedLiouvillian) else build_linearized(rho0, params, frame_shift)
    n = lin.matrix.shape[0]
    a = s * np.eye(n) - lin.matrix
    b = np.column_stack(lin.drive_vectors)
    try:
        lu = la.lu_factor(a, check_finite=False)
    except la.LinAlgError as exc:
        raise PoleError(f"s = {s} lies in the spectrum") from exc
    piv = np.abs(np.diag(lu[0]))
    if piv.min() < 1e-13 * max(piv.max(), 1.0):
        raise PoleError(f"s = {s} lies in the spectrum (pivot {piv.min():.2e})")
    x = la.lu_solve(lu, b, check_finite=False)
    readout = np.vstack(lin.readout_vectors)
    return (readout @ x) * lin.drive_weights[None, :]


@numba.njit(cache=True)
def _hess_factor(h, s):
    """In-place LU with adjacent-row pivoting of ``s - h`` (h upper Hessenberg)."""
    n = h.shape[0]
    a = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        lo = i - 1 if i > 0 else 0
        for j in range(n):
            a[i, j] = -h[i, j] if j >= lo else 0.0
        a[i, i] += s
    mult = np.zeros(n, dtype=np.complex128)
    swap = np.zeros(n, dtype=np.bool_)
    for j in range(n - 1):
        if abs(a[j + 1, j]) > abs(a[j, j]):
            swap[j] = True
            for k in range(j, n):
                t = a[j, k]
                a[j, k] = a[j + 1, k]
                a[j + 1, k] = t
        if a[j, j] == 0:
            continue
        m = a[j + 1, j] / a[j, j]
        mult[j] = m
        for k in range(j, n):
            a[j + 1, k] -= m * a[j, k]
    return a, mult, swap


@numba.njit(cache=True)
def _hess_solve(a, mult, swap, b):
    n = a.shape[0]
    x = b.copy()
    for j in range(n - 1):
        if swap[j]:
            for c in range(x.shape[1]):
                t = x[j, c]
                x[j, c] = x[j + 1, c]
                x[j + 1, c] = t
        for c in range(x.shape[1]):
            x[j + 1, c] -= mult[j] * x[j, c]
    for i in range(n - 1, -1, -1):
        for c in range(x.shape[1]):
            acc = x[i, c]
            for k in range(i + 1, n):
                acc -= a[i, k] * x[k, c]
            x[i, c] = acc / a[i, i]
    return x


def invariant_krylov_basis(mat, start: np.ndarray, tol: float = 1e-11, max_dim: int | None = None) -> np.ndarray:
    """Orthonormal basis of the smallest ``mat``-invariant space containing ``start``.

    Block Arnoldi with full reorthogonalization; directions whose norm after
    orthogonalization falls below ``tol * ||mat||`` are deflated.
    """
    n = start.shape[0]
    max_dim = max_dim or n
    norm = max(spla_norm(mat), 1.0)
    q, _ = np.linalg.qr(start)
    sv = np.linalg.svd(start, compute_uv=False)
    q = q[:, : int(np.sum(sv > tol * max(sv[0], 1e-300)))]
    basis = [q]
    total = q.shape[1]
    block = q
    while total < max_dim:
        w = np.asarray(mat @ block)
        for _ in range(2):
            for v in basis:
                w -= v @ (v.T @ w)
        u, sv, _ = np.linalg.svd(w, full_matrices=False)
        keep = sv > tol * norm
        if not np.any(keep):
            break
        block = u[:, keep]
        for _ in range(2):
            for v in basis:
                block -= v @ (v.T @ block)
            block, _ = np.linalg.qr(block)
        basis.append(block)
        total += block.shape[1]
    return np.hstack(basis)


def spla_norm(mat) -> float:
    if sp.issparse(mat):
        return float(abs(mat).sum(axis=0).max())
    return float(np.abs(mat).sum(axis=0).max())


class DispersionFunction:
    """Fast evaluation of ``D(s)`` and ``d det D / ds``.

    ``M`` is real in the Hermitian basis.  The drive ``[J1^dag, rho0]`` only
    excites the smallest M-invariant subspace containing it, so ``C(s)`` is
    computed exactly on that subspace; a real Hessenberg reduction of the
    restricted operator then makes each evaluation O(k^2).
    """

    def __init__(self, lin: VectorizedLiouvillian, krylov_tol: float = 1e-11):
        self.lin = lin
        d = lin.params.dim
        basis = hermitian_basis(d)
        m_real = basis.conj().T @ (sp.csc_matrix(lin.matrix) @ basis)
        if abs(m_real.imag).max() > 1e-9 * max(1.0, abs(m_real).max()):
            raise ValueError("X-frozen Liouvillian does not preserve Hermiticity")
        m_real = sp.csr_matrix(m_real.real)
        b = basis.conj().T @ np.column_stack(lin.drive_vectors)
        # [J1, rho0] = -[J1^dag, rho0]^dag, so the real span of b1 covers both
        start = np.column_stack([b[:, 0].real, b[:, 0].imag])
        v = invariant_krylov_basis(m_real, start, krylov_tol)
        m_red = v.T @ (m_real @ v)
        self.krylov_dim = v.shape[1]
        self.invariance_error = float(np.linalg.norm(m_real @ v - v @ m_red))
        hess, q = la.hessenberg(m_red, calc_q=True)
        self.hess = np.ascontiguousarray(hess)
        self.reduced_matrix = m_red
        self._rhs_red = v.T @ b
        self._rhs = np.ascontiguousarray(q.T @ self._rhs_red)
        readout = np.vstack(lin.readout_vectors)
        self._readout_red = (readout @ basis) @ v
        self._readout = self._readout_red @ q
        self.weights = lin.drive_weights

    def reduced_full_operator(self) -> np.ndarray:
        """Full linearized flow restricted to the invariant subspace."""
        k1, k2 = -self.weights
        r1, r2 = self._readout_red
        u1, u2 = self._rhs_red.T
        return self.reduced_matrix + k1 * np.outer(u1, r1) + k2 * np.outer(u2, r2)

    def matrix(self, s: complex, derivative: bool = False):
        a, mult, swap = _hess_factor(self.hess, complex(s))
        if np.any(np.diag(a) == 0):
            raise PoleError(f"s = {s} lies in the spectrum")
        x = _hess_solve(a, mult, swap, self._rhs)
        dmat = np.eye(2) + (self._readout @ x) * self.weights[None, :]
        if not derivative:
            return dmat
        y = _hess_solve(a, mult, swap, np.ascontiguousarray(x))
        return dmat, -(self._readout @ y) * self.weights[None, :]

    def det(self, s: complex) -> complex:
        d = self.matrix(s)
        return d[0, 0] * d[1, 1] - d[0, 1] * d[1, 0]

    def det_and_derivative(self, s: complex) -> tuple[complex, complex]:
        d, dd = self.matrix(s, derivative=True)
        det = d[0, 0] * d[1, 1] - d[0, 1] * d[1, 0]
        ddet = dd[0, 0] * d[1, 1] + d[0, 0] * dd[1, 1] - dd[0, 1] * d[1, 0] - d[0, 1] * dd[1, 0]
        return det, ddet

    def newton(self, s0: complex, tol: float = 1e-12, max_iter: int = 60, max_step: float | None = None):
        """Newton iteration on ``det D``; returns ``(root, |det|)`` or None."""
        s = complex(s0)
        for _ in range(max_iter):
            try:
                f, df = self.det_and_derivative(s)
            except PoleError:
                s += 1e-7 * (1 + 1j)
                continue
            if df == 0 or not np.isfinite(f) or not np.isfinite(df):
                return None
            step = f / df
            if max_step is not None and abs(step) > max_step:
                step *= max_step / abs(step)
            s -= step
            if abs(step) < tol * max(1.0, abs(s)):
                return s, abs(self.det(s))
        return None


@dataclass(frozen=True)
class DispersionRoot:
    gamma: complex
    residual: float
    seed: complex

    def to_dict(self) -> dict:
        return {"re_s": self.gamma.real, "im_s": self.gamma.imag, "residual": self.residual}


def default_search_region(params: ModelParams) -> tuple[float, float, float, float]:
    span = params.n_max**2 + params.lam
    return (-2.0 * params.lam, params.lam, -span, span)


def _dedup(roots: list[DispersionRoot], tol: float) -> list[DispersionRoot]:
    out: list[DispersionRoot] = []
    for r in roots:
        if all(abs(r.gamma - o.gamma) > tol for o in out):
            out.append(r)
    return sorted(out, key=lambda r: (-r.gamma.real, r.gamma.imag))


def dispersion_roots(
    rho0: np.ndarray | VectorizedLiouvillian | DispersionFunction,
    params: ModelParams | None = None,
    search_region: tuple[float, float, float, float] | None = None,
    n_seeds: tuple[int, int] | int = (8, 16),
    frame_shift: float = 0.0,
    extra_seeds=(),
    dedup_tol: float = 1e-6,
) -> list[DispersionRoot]:
    """Roots of ``det D(s)`` from Newton iteration on a uniform seed grid.

    ``search_region`` is ``(re_min, re_max, im_min, im_max)``; the result is
    sorted by descending real part, so the first entry is the dominant
    exponent.  Roots outside the region are discarded.
    """
    if isinstance(rho0, DispersionFunction):
        fn = rho0
    else:
        lin = rho0 if isinstance(rho0, VectorizedLiouvillian) else build_linearized(rho0, params, frame_shift)
        fn = DispersionFunction(lin)
    params = fn.lin.params
    if search_region is None:
        search_region = default_search_region(params)
    re_min, re_max, im_min, im_max = search_region
    if not all(map(math.isfinite, search_region)) or re_min >= re_max or im_min >= im_max:
        raise ValueError(f"invalid search region {search_region}")
    if isinstance(n_seeds, int):
        if n_seeds < 4:
            raise ValueError("n_seeds must be >= 4")
        n_re = max(2, int(round(math.sqrt(n_seeds / 2))))
        n_im = max(2, n_seeds // n_re)
    else:
        n_re, n_im = n_seeds
        if n_re * n_im < 4:
            raise ValueError("n_seeds must be >= 4")
    seeds = [complex(a, b) for a in np.linspace(re_min, re_max, n_re) for b in np.linspace(im_min, im_max, n_im)]
    seeds += [complex(z) for z in extra_seeds]

    scale = np.median([abs(_safe_det(fn, z)) for z in seeds[: n_re * n_im]])
    step_cap = 0.25 * max(re_max - re_min, im_max - im_min)
    found = []
    for z in seeds:
        res = fn.newton(z, max_step=step_cap)
        if res is None:
            continue
        root, resid = res
        if not (re_min <= root.real <= re_max and im_min <= root.imag <= im_max):
            continue
        if resid > 1e-8 * max(scale, 1.0):
            continue
        found.append(DispersionRoot(root, resid, z))
    return _dedup(found, dedup_tol)


def _safe_det(fn: DispersionFunction, s: complex) -> complex:
    try:
        return fn.det(s)
    except PoleError:
        return fn.det(s + 1e-6)


def linearized_spectrum(lin: VectorizedLiouvillian) -> np.ndarray:
    """Eigenvalues of the full linearized operator (real form), descending Re."""
    d = lin.params.dim
    basis = hermitian_basis(d)
    full = (basis.conj().T @ (sp.csc_matrix(lin.full_operator()) @ basis)).toarray()
    vals = la.eigvals(full.real, check_finite=False)
    return vals[np.argsort(-vals.real)]


def leading_root(
    lin: VectorizedLiouvillian,
    zero_tol: float = 1e-6,
    n_candidates: int = 12,
    fn: DispersionFunction | None = None,
) -> DispersionRoot | None:
    """Dominant dispersion root, excluding the neutral mode at ``s = 0``.

    Candidates are the eigenvalues of the full linearized operator restricted
    to the invariant subspace reached by the drive, each confirmed as a root of ``det D`` by Newton polishing.  About a coherent
    state the U(1) phase mode always gives a root at 0; it carries no
    stability information and is skipped.
    """
    fn = fn or DispersionFunction(lin)
    vals = la.eigvals(fn.reduced_full_operator(), check_finite=False)
    vals = vals[np.argsort(-vals.real)]
    vals = vals[np.abs(vals) > zero_tol]
    confirmed = []
    for z in vals[: max(n_candidates, 1) * 4]:
        res = fn.newton(z + 1e-9, max_step=1e-2 * max(1.0, abs(z)))
        if res is None:
            continue
        root, resid = res
        if abs(root - z) < 1e-5 * max(1.0, abs(z)) and abs(root) > zero_tol:
            confirmed.append(DispersionRoot(root, resid, z))
        if len(confirmed) >= n_candidates:
            break
    if not confirmed:
        return None
    return _dedup(confirmed, 1e-6)[0]


def bec_growth_rate(params: ModelParams) -> complex:
    """Closed-form exponent about the excited condensate at T = 0."""
    lam, w, dk = params.lam, params.w, params.delta_over_kappa
    return complex(lam / 4 - w / 2, 1.0 - lam * dk / 2)


def _thermal_width(beta_scaled: float, lam: float) -> float:
    # exponent of the Gaussian momentum distribution: exp(-b q^2), q = p / hbar k
    return 2.0 * beta_scaled / lam**2


def _kernel_quad(y: complex, b: float) -> complex:
    """``y * int dq P(q) / (y^2 + 4 q^2)`` by adaptive quadrature, Re(y) > 0."""
    if math.isinf(b):
        return 1.0 / y
    # q = u / sqrt(b): weight exp(-u^2)/sqrt(pi), even integrand folded onto u >= 0
    c = 4.0 / b

    def f(u, part):
        v = y * math.exp(-u * u) / (y * y + c * u * u)
        return v.real if part == 0 else v.imag

    # the Lorentzian peaks where c u^2 ~ |y|^2; split the axis there
    knee = abs(y) / math.sqrt(c)
    vals = []
    for part in (0, 1):
        total = 0.0
        edges = [0.0, knee, 10.0 * knee + 8.0]
        for lo, hi in zip(edges[:-1], edges[1:]):
            v, err = integrate.quad(f, lo, hi, args=(part,), epsabs=0.0, epsrel=1e-11, limit=400)
            total += v
        tail, _ = integrate.quad(f, edges[-1], np.inf, args=(part,), epsabs=1e-300, epsrel=1e-11, limit=200)
        vals.append(total + tail)
    return 2.0 * complex(vals[0], vals[1]) / math.sqrt(math.pi)


def _kernel_faddeeva(y: complex, b: float) -> complex:
    """Same kernel as a Laplace integral, valid for every y by continuation."""
    if math.isinf(b):
        return 1.0 / y
    rb = math.sqrt(b)
    return 0.5 * math.sqrt(math.pi) * rb * special.wofz(1j * y * rb / 2)


def thermal_c11(
    s: complex,
    beta_scaled: float,
    w_over_lambda: float,
    params: ModelParams,
    method: str = "auto",
) -> complex:
    """Susceptibility ``C11(s)`` of a thermal excited gas in the continuum.

    ``beta_scaled`` is the inverse temperature in units ``2 omega_R / (hbar Lambda^2)``
    (``inf`` for the condensate).  Only the diagonal momentum term is
    included; the +-hbar k coherence term vanishes for thermal states.

    ``method`` selects adaptive quadrature (``"quad"``, requires
    ``Re(y) > 0``), the Faddeeva closed form (``"faddeeva"``), or quadrature
    with Faddeeva continuation where ``Re(y) <= 0`` (``"auto"``).
    """
    if beta_scaled <= 0:
        raise ValueError("beta_scaled must be positive")
    lam = params.lam
    y = complex(s) + 0.5 * w_over_lambda * lam - 1j
    b = _thermal_width(beta_scaled, lam)
    if method == "faddeeva":
        g = _kernel_faddeeva(y, b)
    elif method == "quad" or (method == "auto" and y.real > 1e-3 * abs(y)):
        if y.real <= 0:
            raise ValueError("quadrature form needs Re(y) > 0; use method='faddeeva'")
        g = _kernel_quad(y, b)
    elif method == "auto":
        g = _kernel_faddeeva(y, b)
    else:
        raise ValueError(f"unknown method {method!r}")
    return 0.25j * lam * np.conj(params.alpha) * g


def _kernel_faddeeva_derivative(y: complex, b: float) -> complex:
    if math.isinf(b):
        return -1.0 / (y * y)
    rb = math.sqrt(b)
    z = 1j * y * rb / 2
    dw = -2.0 * z * special.wofz(z) + 2j / math.sqrt(math.pi)
    return 0.5 * math.sqrt(math.pi) * rb * (0.5j * rb) * dw


def _thermal_y_root(b: float, params: ModelParams, y0: complex, method: str,
                    tol: float, max_iter: int) -> complex | None:
    # 1 + (i Lambda alpha* / 4) K(y) = 0; the pump only shifts s, not y
    pref = 0.25j * params.lam * np.conj(params.alpha)
    cap = 0.25 * params.lam
    h = 1e-6 * max(1.0, params.lam)
    y = complex(y0)
    for _ in range(max_iter):
        if method == "quad" and y.real > 0:
            f = 1.0 + pref * _kernel_quad(y, b)
            df = pref * (_kernel_quad(y + h, b) - _kernel_quad(y - h, b)) / (2 * h)
        else:
            f = 1.0 + pref * _kernel_faddeeva(y, b)
            df = pref * _kernel_faddeeva_derivative(y, b)
        if not (np.isfinite(f) and np.isfinite(df)) or df == 0:
            return None
        step = f / df
        if abs(step) > cap:
            step *= cap / abs(step)
        y -= step
        if abs(step) < tol * max(1.0, abs(y)):
            return y
    return None


def thermal_growth_rate(
    beta_scaled: float,
    w_over_lambda: float,
    params: ModelParams,
    method: str = "auto",
    tol: float = 1e-11,
    max_iter: int = 100,
) -> complex:
    """Root of ``1 + C11(s) = 0`` for a thermal gas.

    Newton in ``y = s + w/2 - i`` seeded from the condensate root; if that
    fails the root is continued in temperature from the condensate.
    ``method="quad"`` evaluates the kernel by quadrature wherever
    ``Re(y) > 0``.
    """
    if beta_scaled <= 0:
        raise ValueError("beta_scaled must be positive")
    if method not in ("auto", "quad", "faddeeva"):
        raise ValueError(f"unknown method {method!r}")
    lam = params.lam
    b = _thermal_width(beta_scaled, lam)
    y_bec = -0.25j * lam * np.conj(params.alpha)
    y = _thermal_y_root(b, params, y_bec, method, tol, max_iter)
    if y is None and not math.isinf(b):
        # continuation in 1/b from the condensate
        y = y_bec
        for frac in np.linspace(0.0, 1.0, 41)[1:]:
            y = _thermal_y_root(b / frac, params, y, method, tol, max_iter)
            if y is None:
                break
    if y is None:
        raise RootFindingError(
            f"thermal root search failed (beta_scaled={beta_scaled}, w/L={w_over_lambda})"
        )
    return complex(y) - 0.5 * w_over_lambda * lam + 1j


def thermal_threshold(params: ModelParams, t_bracket: tuple[float, float] = (0.02, 1.0)) -> float:
    """Scaled temperature at which the thermal growth rate vanishes as ``w -> 0``."""
    from scipy.optimize import brentq

    def f(t):
        return thermal_growth_rate(1.0 / t, 0.0, params).real

    lo, hi = t_bracket
    if f(lo) * f(hi) > 0:
        raise RootFindingError(f"no sign change of Re(gamma) in T in {t_bracket}")
    return brentq(f, lo, hi, xtol=1e-10)


@dataclass
class CriticalPump:
    w_c: float
    gamma_at_wc: complex
    bracket: tuple[float, float]
    evaluations: list[tuple[float, complex]]

    @property
    def sideband_frequency(self) -> float:
        return abs(self.gamma_at_wc.imag)


def coherent_exponent(params: ModelParams, X_seed: complex = 0.1, tol: float = 1e-10,
                      max_iter: int = 2000, mixing: float = 0.5):
    """Fixed point plus dominant exponent about it (rotating frame).

    Returns ``(FixedPointResult, DispersionRoot | None)``.
    """
    fp = iterate_fixed_point(X_seed, params, tol=tol, max_iter=max_iter, mixing=mixing)
    if not fp.converged or abs(fp.X_st) < 1e-4:
        return fp, None
    lin = build_linearized(fp.rho_st, params, rotating_frame_frequency(params))
    return fp, leading_root(lin)


def critical_pump(
    lam: float,
    params_template: ModelParams,
    w_bracket: tuple[float, float],
    tol: float = 1e-2,
    X_seed: complex = 0.1,
) -> CriticalPump:
    """Bisect on w for the sign change of Re(gamma) about the coherent state.

    Raises
    ------
    ValueError
        If the bracket does not straddle a sign change, or no coherent fixed
        point exists at some probed w (the message lists the failing w).
    """
    lo, hi = map(float, w_bracket)
    if not 0 <= lo < hi:
        raise ValueError(f"invalid bracket {w_bracket}")
    base = params_template.replace(lam=lam)
    evaluations: list[tuple[float, complex]] = []
    seed = [complex(X_seed)]

    def gamma_at(w: float) -> complex:
        fp, root = coherent_exponent(base.replace(w=w), X_seed=seed[0])
        if root is None:
            raise ValueError(f"no coherent fixed point (or no root) at w={w:g}, Lambda={lam:g}")
        seed[0] = fp.X_st
        evaluations.append((w, root.gamma))
        return root.gamma

    g_lo, g_hi = gamma_at(lo), gamma_at(hi)
    if (g_lo.real > 0) == (g_hi.real > 0):
        raise ValueError(
            f"bracket ({lo:g}, {hi:g}) does not straddle a sign change of Re(gamma): "
            f"{g_lo.real:.3e}, {g_hi.real:.3e}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        g_mid = gamma_at(mid)
        if (g_mid.real > 0) == (g_lo.real > 0):
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
    # interpolate linearly in Re(gamma) inside the final bracket
    t = g_lo.real / (g_lo.real - g_hi.real)
    w_c = lo + t * (hi - lo)
    gamma_c = g_lo + t * (g_hi - g_lo)
    # On the stable side the leading root may belong to a different (slow)
    # branch, so follow the unstable branch itself to w_c.
    unstable = g_lo if g_lo.real > 0 else g_hi
    p_c = base.replace(w=w_c)
    fp = iterate_fixed_point(seed[0], p_c, tol=1e-10, max_iter=2000)
    if fp.converged and abs(fp.X_st) > 1e-4:
        fn = DispersionFunction(build_linearized(fp.rho_st, p_c, rotating_frame_frequency(p_c)))
        res = fn.newton(unstable, max_step=0.05 * max(1.0, abs(unstable)))
        if res is not None and abs(res[0] - unstable) < 0.5 * max(abs(unstable.imag), 0.1):
            gamma_c = res[0]
    return CriticalPump(w_c, gamma_c, (lo, hi), evaluations)


def roots_to_json(roots: list[DispersionRoot], path) -> Path:
    path = Path(path)
    path.write_text(json.dumps([r.to_dict() for r in roots], indent=2))
    return path
