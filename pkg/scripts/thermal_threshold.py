"""Zero-pump thermal threshold versus cavity detuning.

Usage: python scripts/thermal_threshold.py [--lambda 10] [--detunings 0 0.25 0.5 1]
"""

import argparse
import math

from superradiance_mf.model import ModelParams
from superradiance_mf.stability import thermal_threshold


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambda", dest="lam", type=float, default=10.0)
    ap.add_argument("--detunings", type=float, nargs="+", default=[0.0, 0.1, 0.25, 0.5, 1.0])
    args = ap.parse_args()
    print("delta_over_kappa,temp_threshold")
    for dk in args.detunings:
        t_c = thermal_threshold(ModelParams(args.lam, 0.0, dk))
        print(f"{dk},{t_c:.6f}")
    print(f"# resonant value pi/32 = {math.pi / 32:.6f}")


if __name__ == "__main__":
    main()
