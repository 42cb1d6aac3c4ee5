"""Observables that tell the phases apart.

Finite-time emission spectrum, the partial-transpose entanglement witness,
time averages along trajectories and the phase classifier used by the
sweeps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import czt, find_peaks

from .dynamics import IntegrationError, Trajectory, initial_state_bec, integrate
from .model import ModelParams
from .stability import bec_growth_rate, build_linearized, leading_root
from .steady import NullSpaceError, iterate_fixed_point, rotating_frame_frequency

X_ZERO = 1e-4  # |X_st| below this counts as the incoherent solution

LABELS = ("normal", "incoherent", "coherent", "chaotic")


# ----------------------------------------------------------------------------
# spectrum

@dataclass
class Spectrum:
    omegas: np.ndarray
    magnitudes: np.ndarray

    def __post_init__(self):
        self.omegas = np.asarray(self.omegas, dtype=float)
        self.magnitudes = np.asarray(self.magnitudes, dtype=float)
        if self.omegas.shape != self.magnitudes.shape:
            raise ValueError("omegas and magnitudes differ in length")

    @property
    def resolution(self) -> float:
        return float(self.omegas[1] - self.omegas[0]) if self.omegas.size > 1 else 0.0

    @property
    def peak_frequency(self) -> float:
        return float(self.omegas[np.argmax(self.magnitudes)])

    def peaks(self, rel_height: float = 0.5) -> np.ndarray:
        """Frequencies of local maxima above ``rel_height`` times the global maximum."""
        return self.omegas[self.peak_indices(rel_height)]

    def peak_indices(self, rel_height: float = 0.5) -> np.ndarray:
        mags = self.magnitudes
        if mags.size == 0 or mags.max() == 0:
            return np.empty(0, dtype=int)
        # pad so maxima at the grid edges are found too
        padded = np.concatenate([[-np.inf], mags, [-np.inf]])
        idx, _ = find_peaks(padded, height=rel_height * mags.max())
        return idx - 1

    def count_peaks(self, rel_height: float = 0.5) -> int:
        return int(self.peak_indices(rel_height).size)

    def to_csv(self, path, header_lines: list[str] | None = None) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            for line in header_lines or []:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh)
            writer.writerow(["omega", "magnitude"])
            for om, mag in zip(self.omegas, self.magnitudes):
                writer.writerow([repr(float(om)), repr(float(mag))])
        return path


def fourier_magnitude(times: np.ndarray, values: np.ndarray, omegas: np.ndarray,
                      method: str = "czt", chunk: int = 64) -> np.ndarray:
    """``|int e^{i w t} f(t) dt|`` by the trapezoidal rule on uniform samples.

    On a uniform frequency grid the weighted sum is a chirp-z transform
    (``method="czt"``); ``method="direct"`` evaluates it term by term.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=complex)
    omegas = np.asarray(omegas, dtype=float)
    if times.size < 2:
        raise ValueError("need at least two samples")
    steps = np.diff(times)
    dt = steps[0]
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=1e-12 * abs(times[-1])):
        raise ValueError("samples must be uniformly spaced in time")
    weights = np.full(times.size, dt)
    weights[0] = weights[-1] = 0.5 * dt
    wf = weights * values
    uniform_omega = omegas.size > 1 and np.allclose(np.diff(omegas), omegas[1] - omegas[0], rtol=1e-9)
    if method == "czt" and uniform_omega:
        d_om = omegas[1] - omegas[0]
        # sum_n wf_n exp(i (w0 + k dw) n dt) = czt with a = e^{-i w0 dt}, w = e^{i dw dt}
        return np.abs(czt(wf, m=omegas.size, w=np.exp(1j * d_om * dt), a=np.exp(-1j * omegas[0] * dt)))
    if method not in ("czt", "direct"):
        raise ValueError(f"unknown method {method!r}")
    t_rel = times - times[0]
    out = np.empty(omegas.size)
    for i in range(0, omegas.size, chunk):
        om = omegas[i:i + chunk]
        out[i:i + chunk] = np.abs(np.exp(1j * np.outer(om, t_rel)) @ wf)
    return out


def spectrum(traj: Trajectory, omega_max: float, n_omega: int | None = None, omega_min: float | None = None,
             t_start: float = 0.0) -> Spectrum:
    """Finite-time Fourier magnitude of X(t) on a uniform frequency grid.

    The grid spans ``[-omega_max, omega_max]`` unless ``omega_min`` is given.
    With ``n_omega`` None (or 0) the spacing is ``pi / T`` for a record of
    length T, half the intrinsic linewidth, so every resolvable line is
    sampled.  ``t_start`` discards an initial transient; no windowing.
    """
    lo = -omega_max if omega_min is None else omega_min
    if not omega_max > lo:
        raise ValueError("empty frequency range")
    keep = traj.times >= t_start
    times = traj.times[keep]
    if not n_omega:
        duration = times[-1] - times[0] if times.size > 1 else 0.0
        if duration <= 0:
            raise ValueError("need at least two samples after t_start")
        n_omega = int(math.ceil((omega_max - lo) / (math.pi / duration))) + 1
    if n_omega < 2:
        raise ValueError("n_omega must be at least 2")
    omegas = np.linspace(lo, omega_max, n_omega)
    return Spectrum(omegas, fourier_magnitude(times, traj.X_values[keep], omegas))


# ----------------------------------------------------------------------------
# entanglement witness

def partial_transpose(rho: np.ndarray) -> np.ndarray:
    """Transpose over the internal (g/e) factor only.

    In internal-major block form this exchanges the g-e and e-g momentum
    blocks; the diagonal blocks are untouched.
    """
    d = rho.shape[0]
    if rho.shape != (d, d) or d % 2:
        raise ValueError(f"expected an even square matrix, got shape {rho.shape}")
    n = d // 2
    out = rho.copy()
    out[:n, n:] = rho[n:, :n]
    out[n:, :n] = rho[:n, n:]
    return out


def min_eigenvalue_ppt(rho: np.ndarray) -> float:
    pt = partial_transpose(rho)
    pt = 0.5 * (pt + pt.conj().T)
    return float(np.linalg.eigvalsh(pt)[0])


def time_averaged_diagnostics(traj: Trajectory, t_start: float = 0.0) -> tuple[float, float]:
    """Mean PPT minimum eigenvalue over snapshots and mean ``|X|`` over samples.

    Returns ``(lambda_min_bar, abs_X_av)``.
    """
    if traj.snapshots.shape[0] == 0:
        raise ValueError("trajectory carries no state snapshots; integrate with snapshot_every")
    snap_keep = traj.snapshot_times >= t_start
    samp_keep = traj.times >= t_start
    lam_bar = float(np.mean([min_eigenvalue_ppt(r) for r in traj.snapshots[snap_keep]]))
    x_av = float(np.mean(np.abs(traj.X_values[samp_keep])))
    return lam_bar, x_av


# ----------------------------------------------------------------------------
# phase classification

@dataclass
class PhasePoint:
    w: float
    lam: float
    label: str
    abs_X_st: float = 0.0
    gamma: complex = complex("nan")
    lambda_min: float = float("nan")
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")

    def row(self) -> list:
        return [self.w, self.lam, self.label, self.abs_X_st, self.gamma.real, self.gamma.imag,
                self.lambda_min, ";".join(self.flags)]


PHASE_COLUMNS = ["w", "lambda", "label", "abs_X_st", "re_gamma", "im_gamma", "lambda_min", "flags"]


def _fallback_by_integration(params: ModelParams, t_end: float, dt: float | None) -> tuple[str, float]:
    dt = dt or min(2e-3, 0.9 * 0.5 / (params.n_max**2 + params.lam))
    traj = integrate(initial_state_bec(params), params, t_end, dt=dt, sample_every=0.05)
    tail = traj.times >= 0.5 * t_end
    x_av = float(np.mean(traj.abs_X[tail]))
    if x_av <= X_ZERO:
        return "incoherent", x_av
    sub = Trajectory(traj.times[tail], traj.X_values[tail], traj.populations[tail])
    spec = spectrum(sub, omega_max=4 * params.lam)
    return ("chaotic" if spec.count_peaks() >= 3 else "coherent"), x_av


def classify_phase(w: float, lam: float, params_template: ModelParams, X_seed: float = 0.1,
                   fallback_t_end: float = 2000.0, fallback_dt: float | None = None) -> PhasePoint:
    """Label one (w, Lambda) point of the condensate phase diagram.

    normal if the condensate is stable; incoherent if the self-consistent
    field vanishes; coherent or chaotic by the sign of the dominant exponent
    about the coherent fixed point.  If the fixed-point loop does not
    converge the point is classified from a time integration instead and
    flagged.  Solver errors are recorded in ``flags``, never raised.
    """
    params = params_template.replace(lam=lam, w=w)
    if bec_growth_rate(params).real <= 0:
        return PhasePoint(w, lam, "normal", gamma=bec_growth_rate(params), lambda_min=0.0)
    flags: list[str] = []
    try:
        fp = iterate_fixed_point(X_seed, params, max_iter=2000)
    except (NullSpaceError, np.linalg.LinAlgError, RuntimeError) as exc:
        fp = None
        flags.append(f"fixed_point_error:{type(exc).__name__}")
    if fp is not None and fp.converged:
        lam_min = min_eigenvalue_ppt(fp.rho_st)
        if fp.abs_X_st < X_ZERO:
            # the incoherent attractor is not the seed condensate; no exponent reported
            return PhasePoint(w, lam, "incoherent", fp.abs_X_st, lambda_min=lam_min, flags=flags)
        try:
            lin = build_linearized(fp.rho_st, params, rotating_frame_frequency(params))
            root = leading_root(lin)
        except Exception as exc:  # noqa: BLE001 - recorded, sweep continues
            root = None
            flags.append(f"stability_error:{type(exc).__name__}")
        if root is not None:
            label = "chaotic" if root.gamma.real > 0 else "coherent"
            return PhasePoint(w, lam, label, fp.abs_X_st, root.gamma, lam_min, flags)
        flags.append("no_root")
    else:
        flags.append("fixed_point_not_converged")
    try:
        label, x_av = _fallback_by_integration(params, fallback_t_end, fallback_dt)
        flags.append("fallback_integration")
        return PhasePoint(w, lam, label, x_av if label != "incoherent" else 0.0, flags=flags)
    except (IntegrationError, ValueError) as exc:
        flags.append(f"integration_error:{type(exc).__name__}")
        return PhasePoint(w, lam, "incoherent", math.nan, flags=flags + ["failed"])
