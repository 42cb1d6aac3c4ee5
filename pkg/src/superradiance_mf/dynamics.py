"""Nonlinear mean-field master equation: right-hand side and RK4 integration."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .model import E, G, ModelParams, build_cos, flat_index, operators, order_parameter


class IntegrationError(RuntimeError):
    """Raised when the trace or positivity monitor trips during integration."""


def mf_hamiltonian(X: complex, params: ModelParams, frame_shift: float = 0.0) -> np.ndarray:
    """Mean-field Hamiltonian for a frozen order parameter ``X``.

    ``H = p^2/2m + a sigma^dag cos + a* sigma cos + frame_shift sigma^dag sigma``
    with ``a = -Lambda e^{i chi} X / (2 sin chi)``.
    """
    ops = operators(params.n_max)
    a = params.coupling * X
    h = ops.kinetic + a * ops.j1.conj().T + np.conj(a) * ops.j1
    if frame_shift:
        h = h + frame_shift * ops.n_excited
    return h


def pump_dissipator(rho: np.ndarray, w: float) -> np.ndarray:
    """``w L[sigma^dag] rho`` in block form (pump moves g -> e)."""
    n = rho.shape[0] // 2
    out = np.zeros_like(rho)
    out[:n, :n] = -w * rho[:n, :n]
    out[:n, n:] = -0.5 * w * rho[:n, n:]
    out[n:, :n] = -0.5 * w * rho[n:, :n]
    out[n:, n:] = w * rho[:n, :n]
    return out


def liouville_rhs(rho: np.ndarray, params: ModelParams, frame_shift: float = 0.0) -> np.ndarray:
    """d rho / dt of the nonlinear mean-field equation (dense reference path)."""
    h = mf_hamiltonian(order_parameter(rho), params, frame_shift)
    return -1j * (h @ rho - rho @ h) + pump_dissipator(rho, params.w)


def initial_state_bec(params: ModelParams, seed_epsilon: float = 1e-6) -> np.ndarray:
    """Excited condensate with a small coherent admixture of ``|g, Psi_1>``.

    ``X = 0`` is an exact fixed point, so a seed is needed to trigger growth.
    """
    if not 0 <= seed_epsilon < 0.1:
        raise ValueError(f"seed_epsilon must lie in [0, 0.1), got {seed_epsilon}")
    psi = np.zeros(params.dim, dtype=complex)
    psi[flat_index(E, 0, params.n_max)] = math.sqrt(1.0 - seed_epsilon)
    psi[flat_index(G, 1, params.n_max)] = math.sqrt(seed_epsilon)
    return project_physical(np.outer(psi, psi.conj()))


def project_physical(rho: np.ndarray) -> np.ndarray:
    """Nearest positive semidefinite unit-trace matrix (eigenvalue clipping)."""
    rho = 0.5 * (rho + rho.conj().T)
    vals, vecs = np.linalg.eigh(rho)
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals) @ vecs.conj().T
    return out / np.trace(out).real


@dataclass
class Trajectory:
    times: np.ndarray
    X_values: np.ndarray
    populations: np.ndarray  # (n_samples, D) diagonal occupations
    snapshot_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    snapshots: np.ndarray = field(default_factory=lambda: np.empty((0, 0, 0), dtype=complex))
    final_state: np.ndarray | None = None
    params: ModelParams | None = None

    @property
    def abs_X(self) -> np.ndarray:
        return np.abs(self.X_values)

    @property
    def excited_population(self) -> np.ndarray:
        n = self.populations.shape[1] // 2
        return self.populations[:, n:].sum(axis=1)

    @property
    def kinetic_energy(self) -> np.ndarray:
        n = self.populations.shape[1] // 2
        e_kin = np.arange(n, dtype=float) ** 2
        return self.populations[:, :n] @ e_kin + self.populations[:, n:] @ e_kin

    def to_csv(self, path, header_lines: list[str] | None = None) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            for line in header_lines or []:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh)
            writer.writerow(["t", "Re_X", "Im_X", "abs_X", "p_e", "Ekin"])
            for row in zip(self.times, self.X_values.real, self.X_values.imag, self.abs_X,
                           self.excited_population, self.kinetic_energy):
                writer.writerow([repr(float(v)) for v in row])
        return path


def max_stable_dt(params: ModelParams) -> float:
    return 0.5 / (params.n_max**2 + params.lam)


def integrate(
    rho0: np.ndarray,
    params: ModelParams,
    t_end: float,
    dt: float = 2e-3,
    sample_every: float = 0.05,
    frame_shift: float = 0.0,
    snapshot_every: float | None = None,
    check_dt: bool = True,
) -> Trajectory:
    """Fixed-step RK4 integration of the mean-field equation.

    X is recomputed from every stage state and the state is re-Hermitized
    after each step; the trace is monitored but never renormalized.

    Raises
    ------
    IntegrationError
        If ``|Tr rho - 1| > 1e-6`` or the smallest eigenvalue drops below
        ``-1e-4`` at a sample time.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end < dt:
        raise ValueError("t_end must be at least one step")
    if check_dt and dt > max_stable_dt(params) * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the stability bound {max_stable_dt(params):.3e}; reduce dt")
    if rho0.shape != (params.dim, params.dim):
        raise ValueError(f"rho0 has shape {rho0.shape}, expected {(params.dim, params.dim)}")

    n_steps = int(round(t_end / dt))
    sample_stride = max(1, int(round(sample_every / dt)))
    if snapshot_every is None:
        snap_stride = 0
    else:
        snap_stride = max(1, int(round(snapshot_every / dt)))
    n_samples = n_steps // sample_stride + 1
    n_snaps = n_steps // snap_stride + 1 if snap_stride else 0

    rho = np.ascontiguousarray(rho0, dtype=np.complex128).copy()
    energies = np.arange(params.n_levels, dtype=float) ** 2
    offdiag = np.diagonal(build_cos(params.n_max), 1).copy()

    X_out = np.empty(n_samples, dtype=np.complex128)
    pops = np.empty((n_samples, params.dim))
    snaps = np.empty((n_snaps, params.dim, params.dim), dtype=np.complex128)
    status = np.zeros(3)
    hdiag = np.concatenate([energies, energies + frame_shift])
    hdiff = hdiag[:, None] - hdiag[None, :]
    _rk4_loop(rho, hdiff, offdiag, params.coupling, params.w, dt, n_steps,
              sample_stride, snap_stride, X_out, pops, snaps, status)
    if status[0] != 0:
        t_fail = status[1] * dt
        raise IntegrationError(
            f"integration unstable at t={t_fail:.4g}: trace error / min eigenvalue = {status[2]:.3e}; reduce dt"
        )
    times = np.arange(n_samples) * sample_stride * dt
    snap_times = np.arange(n_snaps) * snap_stride * dt if snap_stride else np.empty(0)
    return Trajectory(times=times, X_values=X_out, populations=pops, snapshot_times=snap_times,
                      snapshots=snaps, final_state=rho, params=params)


@numba.njit(cache=True, fastmath=True)
def _order_parameter_nb(rho, offdiag):
    n = offdiag.shape[0] + 1
    x = 0j
    for i in range(n - 1):
        # C[i, i+1] rho_eg[i+1, i] + C[i+1, i] rho_eg[i, i+1]
        x += offdiag[i] * (rho[n + i + 1, i] + rho[n + i, i + 1])
    return x


@numba.njit(cache=True, fastmath=True)
def _rhs_nb(rho, hdiff, offdiag, coupling, w, out, y):
    n = offdiag.shape[0] + 1
    d = 2 * n
    a = coupling * _order_parameter_nb(rho, offdiag)
    ac = np.conj(a)
    # y = H_c rho with H_c[e_m, g_l] = a C[m, l] and H_c[g_l, e_m] = a* C[l, m];
    # rho H_c = (H_c rho)^dag since both are Hermitian
    for m in range(n):
        for k in range(d):
            acc_e = 0j
            acc_g = 0j
            if m > 0:
                acc_e += offdiag[m - 1] * rho[m - 1, k]
                acc_g += offdiag[m - 1] * rho[n + m - 1, k]
            if m < n - 1:
                acc_e += offdiag[m] * rho[m + 1, k]
                acc_g += offdiag[m] * rho[n + m + 1, k]
            y[n + m, k] = a * acc_e
            y[m, k] = ac * acc_g
    for i in range(d):
        for j in range(d):
            out[i, j] = -1j * (hdiff[i, j] * rho[i, j] + y[i, j] - np.conj(y[j, i]))
    # pump w L[sigma^dag]
    hw = 0.5 * w
    for i in range(n):
        for j in range(n):
            gg = w * rho[i, j]
            out[i, j] -= gg
            out[n + i, n + j] += gg
            out[i, n + j] -= hw * rho[i, n + j]
            out[n + i, j] -= hw * rho[n + i, j]


@numba.njit(cache=True, fastmath=True)
def _rk4_loop(rho, hdiff, offdiag, coupling, w, dt, n_steps,
              sample_stride, snap_stride, X_out, pops, snaps, status):
    d = rho.shape[0]
    k1 = np.empty_like(rho)
    k2 = np.empty_like(rho)
    k3 = np.empty_like(rho)
    k4 = np.empty_like(rho)
    tmp = np.empty_like(rho)
    y = np.empty_like(rho)
    i_sample = 0
    i_snap = 0
    dt6 = dt / 6.0
    for step in range(n_steps + 1):
        if step % sample_stride == 0:
            X_out[i_sample] = _order_parameter_nb(rho, offdiag)
            tr = 0.0
            for i in range(d):
                pops[i_sample, i] = rho[i, i].real
                tr += rho[i, i].real
            if abs(tr - 1.0) > 1e-6:
                status[0] = 1
                status[1] = step
                status[2] = tr - 1.0
                return
            lmin = np.linalg.eigvalsh(rho)[0]
            if lmin < -1e-4:
                status[0] = 2
                status[1] = step
                status[2] = lmin
                return
            i_sample += 1
        if snap_stride > 0 and step % snap_stride == 0:
            snaps[i_snap] = rho
            i_snap += 1
        if step == n_steps:
            break
        _rhs_nb(rho, hdiff, offdiag, coupling, w, k1, y)
        for i in range(d):
            for j in range(d):
                tmp[i, j] = rho[i, j] + 0.5 * dt * k1[i, j]
        _rhs_nb(tmp, hdiff, offdiag, coupling, w, k2, y)
        for i in range(d):
            for j in range(d):
                tmp[i, j] = rho[i, j] + 0.5 * dt * k2[i, j]
        _rhs_nb(tmp, hdiff, offdiag, coupling, w, k3, y)
        for i in range(d):
            for j in range(d):
                tmp[i, j] = rho[i, j] + dt * k3[i, j]
        _rhs_nb(tmp, hdiff, offdiag, coupling, w, k4, y)
        for i in range(d):
            for j in range(d):
                tmp[i, j] = rho[i, j] + dt6 * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
        for i in range(d):
            for j in range(i, d):
                v = 0.5 * (tmp[i, j] + np.conj(tmp[j, i]))
                rho[i, j] = v
                rho[j, i] = np.conj(v)
