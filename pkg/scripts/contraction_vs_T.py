"""Measured contraction ratio of the graph transform against its linear bound.

For each transform time T, compares the zero graph with the slope-ell linear
graph on sampled center-stable points and prints the observed ratio next to
exp(-(k - kappa) T).

    python3 scripts/contraction_vs_T.py [--T 0.5 1 1.5 2 3] [--samples 8] [--out DIR]
"""

import argparse
import warnings
from pathlib import Path

import numpy as np

from nlkg.acceptance import manifold_samples
from nlkg.config import default_config, lab_for, load_config
from nlkg.io import write_csv
from nlkg.manifold import LinearGraph, ZeroGraph, contraction_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--T", type=float, nargs="+", default=[0.5, 1.0, 1.5, 2.0, 3.0])
    ap.add_argument("--samples", type=int, default=8)
    ap.add_argument("--out")
    a = ap.parse_args()
    warnings.simplefilter("ignore")
    lab = lab_for(load_config(a.config) if a.config else default_config())
    fr, P = lab.frame, lab.params
    Psi = manifold_samples(lab, a.samples, kill_nu=False)
    G0, G1 = ZeroGraph(fr), LinearGraph(fr, P.ell)
    rows = []
    print(f"{'T':>5} {'Lambda':>10} {'bound':>10}")
    for T in a.T:
        lam = contraction_rate(G0, G1, Psi, T, P, fr, dt=lab.manifold_dt)
        bound = float(np.exp(-(fr.kmin - fr.kappa) * T))
        rows.append((T, lam, bound))
        print(f"{T:5.2f} {lam:10.4g} {bound:10.4g}")
    if a.out:
        Path(a.out).mkdir(parents=True, exist_ok=True)
        write_csv(Path(a.out) / "contraction.csv", ["T", "Lambda", "linear_bound"], rows)


if __name__ == "__main__":
    main()
