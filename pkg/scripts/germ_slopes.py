"""Germ residual slopes of the Hamiltonian flow for the k=3,...,6 model problems.

    python scripts/germ_slopes.py [--t 0.1]
"""
import argparse

import numpy as np

from degentrace import build_model_symbol
from degentrace.dynamics import GermRegimeError, germ_residual_slope

# larger k pushes the residual to the rounding floor sooner
RADII = {3: (-2, -4), 4: (-1, -2.5), 5: (-1, -2), 6: (-0.6, -1.4)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t", type=float, default=0.1)
    args = ap.parse_args()
    for k, (a, b) in RADII.items():
        m = build_model_symbol(k)
        radii = np.logspace(a, b, 5)
        for field in (True, False):
            try:
                rep = germ_residual_slope(m, args.t, radii, include_field=field)
                local = " ".join(f"{s:.3f}" for s in rep.local_slopes)
                print(f"k={k} field={field!s:5}  slope {rep.slope:.4f}  local [{local}]")
            except GermRegimeError as exc:
                print(f"k={k} field={field!s:5}  {exc}")


if __name__ == "__main__":
    main()
