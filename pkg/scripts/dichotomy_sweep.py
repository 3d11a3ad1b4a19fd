"""Exit times of the off-manifold displacements and the fitted ejection rate.

Displaces the reference point on the center-unstable graph by +-eta g- and
records when each perturbation leaves the exit ball.  The exit time should
grow like log(1/eta)/k, so the slope of eta against t_exit recovers k.

    python3 scripts/dichotomy_sweep.py [--etas 1e-3 1e-4 1e-5 1e-6] [--tmax 50] [--out DIR]
"""

import argparse
import warnings
from pathlib import Path

from nlkg.acceptance import cu_reference
from nlkg.config import default_config, lab_for, load_config
from nlkg.io import write_csv
from nlkg.manifold import fit_exit_rate, trapping_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--etas", type=float, nargs="+", default=[1e-3, 1e-4, 1e-5, 1e-6])
    ap.add_argument("--tmax", type=float, default=50.0)
    ap.add_argument("--out")
    a = ap.parse_args()
    warnings.simplefilter("ignore")
    lab = lab_for(load_config(a.config) if a.config else default_config())
    fr, P = lab.frame, lab.params
    _, R = cu_reference(lab)
    recs = trapping_experiment(a.etas * 2, [1] * len(a.etas) + [-1] * len(a.etas), R.point.stack(), P, fr,
                               Tmax=a.tmax, dt=lab.manifold_dt)
    print(f"{'eta':>8} {'sign':>4} {'t_exit':>8}")
    for r in recs:
        print(f"{r.eta:8.1e} {r.sign:4d} {r.t_exit if r.t_exit is not None else float('nan'):8.3f}")
    for sg in (1, -1):
        sub = [r for r in recs if r.sign == sg and not r.trapped]
        if len(sub) >= 2:
            rate = fit_exit_rate([r.eta for r in sub], [r.t_exit for r in sub])[0]
            print(f"sign {sg:+d}: fitted rate {rate:.4f}  (k = {fr.kmin:.4f})")
    if a.out:
        Path(a.out).mkdir(parents=True, exist_ok=True)
        write_csv(Path(a.out) / "dichotomy.csv", ["eta", "sign", "t_exit"],
                  [(r.eta, r.sign, r.t_exit if r.t_exit is not None else float("nan")) for r in recs])


if __name__ == "__main__":
    main()
