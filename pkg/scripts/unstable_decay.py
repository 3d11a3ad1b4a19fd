"""Backward decay along the unstable graph for a ladder of lambda+ values.

Each point on the unstable graph is flowed backward; the log of its norm
should fall with slope -k.  Prints the fitted slope and the shooting data
per lambda+.

    python3 scripts/unstable_decay.py [--lambdas 0.001 0.002 0.004] [--t-back 5] [--out DIR]
"""

import argparse
import warnings
from pathlib import Path

from nlkg.config import default_config, lab_for, load_config
from nlkg.io import write_csv
from nlkg.manifold import backward_decay, decay_slope, eval_unstable_graph


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.001, 0.002, 0.004])
    ap.add_argument("--t-back", type=float, default=5.0)
    ap.add_argument("--out")
    a = ap.parse_args()
    warnings.simplefilter("ignore")
    lab = lab_for(load_config(a.config) if a.config else default_config())
    fr, P = lab.frame, lab.params
    rows = []
    print(f"{'lambda+':>8} {'slope':>8} {'T':>6} {'secant':>6} {'decay_ratio':>11}")
    for lam in a.lambdas:
        up = eval_unstable_graph([lam], P, fr, dt=lab.manifold_dt)
        ts, ns = backward_decay(up.v, P, fr, t=a.t_back, dt=lab.manifold_dt)
        s = decay_slope(ts, ns)
        print(f"{lam:8.4f} {s:8.4f} {up.T:6.2f} {up.secant_steps:6d} {up.decay_ratio:11.3e}")
        rows += [(lam, float(t), float(n)) for t, n in zip(ts, ns)]
    print(f"expected slope {-fr.kmin:.4f}")
    if a.out:
        Path(a.out).mkdir(parents=True, exist_ok=True)
        write_csv(Path(a.out) / "unstable_decay.csv", ["lambda_plus", "t", "norm"], rows)


if __name__ == "__main__":
    main()
