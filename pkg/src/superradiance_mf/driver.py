"""Parameter sweeps and single-point runs behind the command-line interface.

Each grid cell is an independent pure computation; cells are mapped over a
process pool and collected in grid order, so results do not depend on the
number of workers.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import SweepConfig
from .diagnostics import (
    PHASE_COLUMNS,
    PhasePoint,
    classify_phase,
    min_eigenvalue_ppt,
    spectrum,
    time_averaged_diagnostics,
)
from .dynamics import initial_state_bec, integrate, max_stable_dt
from .stability import (
    RootFindingError,
    bec_growth_rate,
    build_linearized,
    critical_pump,
    dispersion_roots,
    leading_root,
    roots_to_json,
    thermal_growth_rate,
)
from .steady import iterate_fixed_point, rotating_frame_frequency

FAILURE_FRACTION = 0.10


@dataclass
class RunResult:
    """Summary of one CLI run; ``failed_fraction`` drives the exit code."""

    mode: str
    files: list[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    failed_cells: int = 0
    total_cells: int = 0

    @property
    def failed_fraction(self) -> float:
        return self.failed_cells / self.total_cells if self.total_cells else 0.0


def _pmap(func, items, workers: int) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


def _write_csv(path: Path, columns: list[str], rows, header_lines: list[str]) -> Path:
    with path.open("w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _write_json(path: Path, payload: dict, config: SweepConfig) -> Path:
    payload = {"_header": config.header_lines(), **payload}
    path.write_text(json.dumps(payload, indent=2, default=_json_default, sort_keys=False))
    return path


def _json_default(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(type(obj))


def _dt_for(config: SweepConfig, params) -> float:
    return min(config.dt, max_stable_dt(params))


# ----------------------------------------------------------------------------
# single-point modes

def run_evolve(config: SweepConfig) -> RunResult:
    out = config.output_dir()
    p = config.model_params()
    traj = integrate(initial_state_bec(p, config.seed_epsilon), p, config.t_end, dt=_dt_for(config, p),
                     sample_every=config.sample_every)
    tag = f"evolve_L{p.lam:g}_w{p.w:g}"
    files = [traj.to_csv(out / f"{tag}.csv", config.header_lines())]
    summary = {"abs_X_final": float(traj.abs_X[-1]), "abs_X_max": float(traj.abs_X.max()),
               "excited_population_final": float(traj.excited_population[-1])}
    files.append(_write_json(out / f"{tag}_summary.json", summary, config))
    return RunResult("evolve", files, summary)


def run_steady(config: SweepConfig) -> RunResult:
    out = config.output_dir()
    p = config.model_params()
    fp = iterate_fixed_point(config.X_seed, p, tol=config.tol, max_iter=config.max_iter, mixing=config.mixing)
    summary = fp.to_dict() | {"lambda_min": min_eigenvalue_ppt(fp.rho_st)}
    path = _write_json(out / f"steady_L{p.lam:g}_w{p.w:g}.json", summary, config)
    return RunResult("steady", [path], summary, int(not fp.converged), 1)


def run_stability(config: SweepConfig) -> RunResult:
    """Dispersion roots about the stationary state reached from ``X_seed``."""
    out = config.output_dir()
    p = config.model_params()
    fp = iterate_fixed_point(config.X_seed, p, tol=config.tol, max_iter=config.max_iter, mixing=config.mixing)
    coherent = abs(fp.X_st) >= 1e-4
    shift = rotating_frame_frequency(p) if coherent else 0.0
    lin = build_linearized(fp.rho_st, p, shift)
    roots = dispersion_roots(lin)
    lead = leading_root(lin)
    tag = f"stability_L{p.lam:g}_w{p.w:g}"
    files = [roots_to_json(roots, out / f"{tag}_roots.json")]
    summary = {
        "reference": "coherent" if coherent else "incoherent",
        "abs_X_st": fp.abs_X_st,
        "leading_root": None if lead is None else lead.to_dict(),
        "bec_closed_form": bec_growth_rate(p),
        "n_roots": len(roots),
    }
    files.append(_write_json(out / f"{tag}_summary.json", summary, config))
    return RunResult("stability", files, summary)


def run_wc(config: SweepConfig) -> RunResult:
    out = config.output_dir()
    p = config.model_params()
    res = critical_pump(p.lam, p, (config.wc_lo, config.wc_hi), tol=config.wc_tol, X_seed=config.X_seed)
    summary = {"lambda": p.lam, "w_c": res.w_c, "gamma_at_wc": res.gamma_at_wc, "bracket": res.bracket,
               "sideband_frequency": res.sideband_frequency,
               "evaluations": [[w, g] for w, g in res.evaluations]}
    path = _write_json(out / f"wc_L{p.lam:g}.json", summary, config)
    return RunResult("wc", [path], summary)


def run_spectrum(config: SweepConfig) -> RunResult:
    out = config.output_dir()
    p = config.model_params()
    traj = integrate(initial_state_bec(p, config.seed_epsilon), p, config.t_end, dt=_dt_for(config, p),
                     sample_every=config.sample_every)
    spec = spectrum(traj, config.omega_max, config.n_omega, t_start=config.spectrum_t_start)
    tag = f"spectrum_L{p.lam:g}_w{p.w:g}"
    files = [spec.to_csv(out / f"{tag}.csv", config.header_lines())]
    summary = {"peak_frequency": spec.peak_frequency, "peaks_above_half_max": spec.peaks().tolist(),
               "resolution": spec.resolution}
    files.append(_write_json(out / f"{tag}_summary.json", summary, config))
    return RunResult("spectrum", files, summary)


# ----------------------------------------------------------------------------
# phase diagram

def _phase_cell(args) -> PhasePoint:
    w, lam, config = args
    return classify_phase(w, lam, config.model_params(), X_seed=config.X_seed,
                          fallback_t_end=min(config.t_end, 2000.0))


def boundary_estimates(points: list[PhasePoint], ws: np.ndarray, lams: np.ndarray) -> list[dict]:
    """Midpoints between grid neighbours carrying different labels."""
    labels = np.array([pt.label for pt in points], dtype=object).reshape(len(lams), len(ws))
    found = []
    for i, lam in enumerate(lams):
        for j, w in enumerate(ws):
            if j + 1 < len(ws) and labels[i, j] != labels[i, j + 1]:
                found.append({"lambda": float(lam), "w": float(0.5 * (w + ws[j + 1])),
                              "between": [labels[i, j], labels[i, j + 1]]})
            if i + 1 < len(lams) and labels[i, j] != labels[i + 1, j]:
                found.append({"lambda": float(0.5 * (lam + lams[i + 1])), "w": float(w),
                              "between": [labels[i, j], labels[i + 1, j]]})
    return found


def run_phase_diagram(config: SweepConfig) -> RunResult:
    out = config.output_dir()
    ws, lams = config.grid("w"), config.grid("lam")
    cells = [(float(w), float(lam), config) for lam in lams for w in ws]
    points = _pmap(_phase_cell, cells, config.effective_workers())
    files = [_write_csv(out / "phase_diagram.csv", PHASE_COLUMNS, (pt.row() for pt in points),
                        config.header_lines())]
    counts = {lab: sum(pt.label == lab for pt in points) for lab in ("normal", "incoherent", "coherent", "chaotic")}
    failed = sum("failed" in pt.flags for pt in points)
    summary = {"counts": counts, "failed_cells": failed, "flagged_cells": sum(bool(pt.flags) for pt in points),
               "boundaries": boundary_estimates(points, ws, lams)}
    files.append(_write_json(out / "phase_diagram_summary.json", summary, config))
    return RunResult("phase-diagram", files, summary, failed, len(points))


# ----------------------------------------------------------------------------
# thermal map

def _thermal_cell(args):
    wl, temp, params = args
    try:
        return thermal_growth_rate(1.0 / temp, wl, params), ""
    except RootFindingError:
        return complex("nan"), "newton_failed"


def zero_crossings(temps: np.ndarray, re_gamma: np.ndarray) -> list[float]:
    """Linearly interpolated temperatures where Re(gamma) changes sign."""
    out = []
    for k in range(len(temps) - 1):
        a, b = re_gamma[k], re_gamma[k + 1]
        if np.isfinite(a) and np.isfinite(b) and (a > 0) != (b > 0):
            out.append(float(temps[k] + a / (a - b) * (temps[k + 1] - temps[k])))
    return out


def run_thermal_map(config: SweepConfig) -> RunResult:
    """Thermal growth exponent over the (w / Lambda, scaled temperature) grid.

    The summary records the Re(gamma) = 0 crossing along the smallest
    ``w / Lambda`` row as ``threshold_temperature``.
    """
    out = config.output_dir()
    dk = config.delta_over_kappa if config.thermal_delta_over_kappa is None else config.thermal_delta_over_kappa
    params = config.model_params(delta_over_kappa=dk)
    wls, temps = config.grid("w_over_lambda"), config.grid("temp")
    cells = [(float(wl), float(t), params) for wl in wls for t in temps]
    results = _pmap(_thermal_cell, cells, config.effective_workers())
    gam = np.array([g for g, _ in results]).reshape(len(wls), len(temps))
    flags = [f for _, f in results]
    rows = ((wl, t, g.real, g.imag, f) for (wl, t, _), (g, f) in zip(cells, results))
    files = [_write_csv(out / "thermal_map.csv",
                        ["w_over_lambda", "temp_scaled", "re_gamma", "im_gamma", "flags"], rows,
                        config.header_lines())]
    contour = []
    for i, wl in enumerate(wls):
        for t in zero_crossings(temps, gam[i].real):
            contour.append({"w_over_lambda": float(wl), "temp_scaled": t})
    low_row = zero_crossings(temps, gam[0].real)
    summary = {"delta_over_kappa": dk, "lambda": params.lam,
               "threshold_temperature": low_row[0] if low_row else None,
               "threshold_row_w_over_lambda": float(wls[0]),
               "contour": contour, "failed_cells": sum(bool(f) for f in flags)}
    files.append(_write_json(out / "thermal_map_summary.json", summary, config))
    return RunResult("thermal-map", files, summary, summary["failed_cells"], len(cells))


# ----------------------------------------------------------------------------
# transition paths

def path_point(params, config: SweepConfig, tag: str | None = None) -> dict:
    """Integration, fixed point and stability data for one point of a path."""
    rec: dict = {"lambda": params.lam, "w": params.w, "flags": []}
    try:
        traj = integrate(initial_state_bec(params, config.seed_epsilon), params, config.t_end,
                         dt=_dt_for(config, params), sample_every=config.sample_every,
                         snapshot_every=config.snapshot_every)
        lam_bar, x_av = time_averaged_diagnostics(traj)
        spec = spectrum(traj, config.omega_max, config.n_omega, t_start=config.spectrum_t_start)
        rec.update(abs_X_final=float(traj.abs_X[-1]), abs_X_av=x_av, lambda_min_bar=lam_bar,
                   spectrum_peak=spec.peak_frequency, spectrum_peaks=spec.peaks().tolist())
        if tag and config.write_trajectories:
            out = Path(config.out)
            traj.to_csv(out / f"{tag}_trajectory.csv", config.header_lines())
            spec.to_csv(out / f"{tag}_spectrum.csv", config.header_lines())
    except Exception as exc:  # noqa: BLE001 - recorded per point
        rec["flags"].append(f"integration_error:{type(exc).__name__}")
    try:
        fp = iterate_fixed_point(config.X_seed, params, tol=config.tol, max_iter=config.max_iter,
                                 mixing=config.mixing)
        rec.update(abs_X_st=fp.abs_X_st, fixed_point_converged=fp.converged,
                   lambda_min=min_eigenvalue_ppt(fp.rho_st))
        if fp.abs_X_st >= 1e-4:
            root = leading_root(build_linearized(fp.rho_st, params, rotating_frame_frequency(params)))
            if root is not None:
                rec.update(re_gamma=root.gamma.real, im_gamma=root.gamma.imag)
    except Exception as exc:  # noqa: BLE001
        rec["flags"].append(f"fixed_point_error:{type(exc).__name__}")
    rec["failed"] = bool(rec["flags"])
    return rec


def _path_cell(args) -> dict:
    params, config, tag = args
    return path_point(params, config, tag)


PATH_COLUMNS = ["lambda", "w", "abs_X_final", "abs_X_av", "abs_X_st", "lambda_min", "lambda_min_bar",
                "re_gamma", "im_gamma", "spectrum_peak", "flags"]


def run_path(config: SweepConfig) -> RunResult:
    """Path A sweeps Lambda at w = Lambda/4; path B sweeps w at fixed Lambda."""
    out = config.output_dir()
    if config.mode == "path-A":
        plist = [config.model_params(lam=float(lam), w=float(lam) / 4) for lam in config.grid("lam")]
    elif config.mode == "path-B":
        plist = [config.model_params(w=float(w)) for w in config.grid("w")]
    else:
        raise ValueError(f"run_path needs mode path-A or path-B, got {config.mode}")
    name = config.mode.replace("-", "_")
    cells = [(p, config, f"{name}_L{p.lam:g}_w{p.w:g}") for p in plist]
    records = _pmap(_path_cell, cells, config.effective_workers())
    rows = ([r.get(c, math.nan) if c != "flags" else ";".join(r["flags"]) for c in PATH_COLUMNS] for r in records)
    files = [_write_csv(out / f"{name}.csv", PATH_COLUMNS, rows, config.header_lines())]
    failed = sum(r["failed"] for r in records)
    summary = {"points": records, "failed_cells": failed}
    if config.mode == "path-A":
        summary["transition_bracket"] = _path_a_bracket(records)
    files.append(_write_json(out / f"{name}_summary.json", summary, config))
    return RunResult(config.mode, files, summary, failed, len(records))


def _path_a_bracket(records: list[dict]) -> list[float] | None:
    """Lambda interval where the fixed point first becomes nonzero."""
    prev = None
    for r in records:
        nonzero = r.get("abs_X_st", 0.0) >= 1e-4
        if prev is not None and nonzero and not prev[1]:
            return [prev[0], r["lambda"]]
        prev = (r["lambda"], nonzero)
    return None


RUNNERS = {
    "evolve": run_evolve,
    "steady": run_steady,
    "stability": run_stability,
    "wc": run_wc,
    "spectrum": run_spectrum,
    "phase-diagram": run_phase_diagram,
    "thermal-map": run_thermal_map,
    "path-A": run_path,
    "path-B": run_path,
}


def run(config: SweepConfig) -> RunResult:
    return RUNNERS[config.mode](config)
