"""Compare spectral sidebands just below the critical pump with the linear exponent.

Finds w_c on path B by bisection, integrates at ``w_c - offset`` and prints
the sideband offsets from the carrier next to ``Im(gamma(w_c))``.

Usage: python scripts/sideband_check.py [--offset 0.05] [--t-end 10000]
"""

import argparse

import numpy as np

from superradiance_mf.diagnostics import spectrum
from superradiance_mf.dynamics import initial_state_bec, integrate
from superradiance_mf.model import ModelParams
from superradiance_mf.stability import critical_pump


def sideband_offsets(spec, carrier, rel_height=1e-3):
    """Offsets of the strongest peak on each side of the carrier."""
    idx = spec.peak_indices(rel_height)
    om, mag = spec.omegas[idx], spec.magnitudes[idx]
    keep = np.abs(om - carrier) > 3 * spec.resolution
    om, mag = om[keep], mag[keep]
    above, below = om > carrier, om < carrier
    hi = om[above][np.argmax(mag[above])] - carrier if above.any() else np.nan
    lo = om[below][np.argmax(mag[below])] - carrier if below.any() else np.nan
    return lo, hi


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambda", dest="lam", type=float, default=15.0)
    ap.add_argument("--offset", type=float, default=0.05)
    ap.add_argument("--t-end", type=float, default=1e4)
    ap.add_argument("--n-max", type=int, default=15)
    args = ap.parse_args()

    base = ModelParams(args.lam, 1.0, 0.5, args.n_max)
    cp = critical_pump(args.lam, base, (1.0, 2.5))
    print(f"w_c = {cp.w_c:.4f}, gamma(w_c) = {cp.gamma_at_wc:.5f}")
    p = base.replace(w=cp.w_c - args.offset)
    traj = integrate(initial_state_bec(p), p, args.t_end, sample_every=0.05)
    spec = spectrum(traj, 6.0, 4801, t_start=0.5 * args.t_end)
    carrier = spec.peak_frequency
    lo, hi = sideband_offsets(spec, carrier)
    print(f"carrier {carrier:.4f}; sidebands at {lo:+.4f}, {hi:+.4f}; predicted +-{cp.sideband_frequency:.4f}")


if __name__ == "__main__":
    main()
