"""Measure the constants that the mobile-distance and flow checks freeze.

Runs the measurements on the calibration seed with ``--oversample`` times
as many samples as the acceptance check draws, prints the raw maxima and
the frozen values (raw maximum times the safety margin, rounded up to two
significant digits), then repeats at acceptance size on the test seed to
show the frozen values hold on fresh samples.  The increment ratio has a
heavy tail, so a calibration set no larger than the test set is not enough.

    python3 scripts/calibrate_constants.py [--pairs 100] [--triples 1000] [--margin 1.5] [--oversample 4]
"""

import argparse
import math
import warnings

from nlkg import acceptance as acc
from nlkg.config import lab_for


def round_up(x, digits=2):
    if x <= 0:
        return 0.0
    e = math.floor(math.log10(x)) - digits + 1
    return math.ceil(x / 10**e) * 10**e


def measure(lab, seed, pairs, triples):
    mob = acc.check_mobile(lab, seed=seed, pairs=pairs, triples=triples).metrics
    flow = acc.check_flow_lipschitz(lab, seed=seed, n=pairs).metrics
    return {"sandwich_C": mob["sandwich_C"], "quasi_triangle_Cd": mob["quasi_triangle_Cd"],
            "flow_lipschitz_C": flow["lipschitz_C"], "flow_increment_C": flow["increment_C"]}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=100)
    ap.add_argument("--triples", type=int, default=1000)
    ap.add_argument("--margin", type=float, default=1.5)
    ap.add_argument("--oversample", type=int, default=4)
    args = ap.parse_args()
    warnings.simplefilter("ignore")
    lab = lab_for()
    cal = measure(lab, acc.CALIBRATION_SEED, args.pairs * args.oversample,
                  args.triples * args.oversample)
    frozen = {k: round_up(v * args.margin) for k, v in cal.items()}
    print(f"calibration seed {acc.CALIBRATION_SEED}:")
    for k, v in cal.items():
        print(f"  {k:20s} measured {v:.6g}  -> freeze {frozen[k]:.6g}  (currently {acc.FROZEN[k]})")
    test = measure(lab, acc.TEST_SEED, args.pairs, args.triples)
    print(f"test seed {acc.TEST_SEED}:")
    for k, v in test.items():
        ok = "ok" if v <= frozen[k] else "EXCEEDS"
        print(f"  {k:20s} measured {v:.6g}  vs frozen {frozen[k]:.6g}  {ok}")
    print("FROZEN =", frozen)


if __name__ == "__main__":
    main()
