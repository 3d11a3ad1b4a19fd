"""Command line entry point: ``nlkg <subcommand> [--config FILE] [--out DIR]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (an
invariant check failed or a solver raised).
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import Lab, default_config, lab_for, load_config
from .errors import ConfigError, NLKGError
from .io import dumps, load_graph, read_state, save_graph, write_csv, write_field

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class NumericalFailure(NLKGError):
    """A computed invariant missed its threshold."""


def _emit(args, name, payload, lab: Lab | None = None):
    if lab is not None:
        warn = lab.smallness()
        if warn:
            payload = dict(payload, smallness_warnings=warn)
    text = dumps(payload)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text)
    sys.stdout.write(text)


def _warn_block(lab: Lab):
    w = lab.smallness()
    if w:
        sys.stderr.write("smallness conditions not met with the required margin:\n")
        for line in w:
            sys.stderr.write(f"  - {line}\n")


# ---- subcommands ------------------------------------------------------------

def cmd_solitons(args, lab: Lab):
    s = lab.family
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_field(Path(args.out) / "Q.csv", np.atleast_2d(s.Q), lab.grid)
    _emit(args, "solitons", {"L": lab.grid.L, "N": lab.grid.N, "x": lab.grid.x, "Q": s.Q,
                             "residual": s.residual, "HQ": np.atleast_2d(s.HQ),
                             "energy": s.JQ_energy}, lab)
    if not s.residual < 1e-10:
        raise NumericalFailure(f"ground state residual {s.residual:.3g} above 1e-10")


def cmd_spectrum(args, lab: Lab):
    from .grid import omega
    from .rng import SplitMix64, random_state

    fr, g = lab.frame, lab.grid
    gp = [fr.g_plus(i) for i in range(fr.K)]
    gm = [fr.g_minus(i) for i in range(fr.K)]
    pair = [[omega(a, b) for b in gm] for a in gp]
    rng = SplitMix64(lab.config["experiment.seed"])
    ratios = []
    for _ in range(args.samples):
        a = random_state(rng, g).stack()
        ratios.append(float(np.sqrt(fr.enorm2_arr(a) / fr.hnorm2_arr(a))))
    ev = [float(e) for e in fr.low_eigenvalues]
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_csv(Path(args.out) / "spectrum.csv", ["index", "eigenvalue"], list(enumerate(ev)),
                  schema={"index": "position in the sorted discrete spectrum",
                          "eigenvalue": "eigenvalue of the discretised L+"})
    _emit(args, "spectrum", {"k_list": [float(k) for k in fr.k], "kernel_eigenvalue": fr.kernel_eigenvalue,
                             "kernel_angle": fr.kernel_angle, "omega_pairings": pair,
                             "equivalence_ratio_range": [min(ratios), max(ratios)],
                             "low_eigenvalues": ev, "kappa": fr.kappa}, lab)


def cmd_evolve(args, lab: Lab):
    from .flow import ModFlow
    from .grid import State, energy, momentum
    from .rng import SplitMix64, random_state

    fr, g, fam = lab.frame, lab.grid, lab.family
    if args.initial:
        v0 = read_state(args.initial, g).stack()
    else:
        v0 = random_state(SplitMix64(lab.config["experiment.seed"]), g, norm=args.size).stack()
    dt = args.dt or lab.params.dt
    flow = ModFlow(fr, lab.params, localized=not args.full)
    r = flow.run(v0[None], args.t, dt=dt, sample_dt=args.sample_dt)
    K = fr.K
    head = ["t", "h_norm"] + ([f"lambda_plus_{i}" for i in range(K)] if K > 1 else ["lambda_plus"]) \
        + ([f"lambda_minus_{i}" for i in range(K)] if K > 1 else ["lambda_minus"]) \
        + ["mu", "nu", "gamma_E", "E", "P", "c"]
    rows = []
    for t, V, c in r.samples:
        v = V[0]
        lp, lm, mu, nu = fr.coords_arr(v)
        gam = fr.gamma_arr(v)
        u = State(g, g.shift(fam.Q + v[0], c[0]), g.shift(v[1], c[0]))
        rows.append([float(t), float(np.sqrt(fr.hnorm2_arr(v)))] + [float(x) for x in lp] + [float(x) for x in lm]
                    + [float(mu[0]), float(nu[0]), float(np.sqrt(max(fr.lgamma_form(gam), 0.0))),
                       energy(u, fam.nonlin), float(momentum(u)[0]), float(c[0])])
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "trajectory.csv", head, rows,
                  schema=dict(zip(head, ["time", "H-norm of v", *(["unstable coordinate"] * K),
                                         *(["stable coordinate"] * K), "translation coordinate",
                                         "boost coordinate", "energy norm of gamma", "NLKG energy of u",
                                         "momentum of u", "modulation shift"])))
        write_field(out / "final.fld", r.v[0])
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(head)
        w.writerows([[format(x, ".10g") for x in row] for row in rows])
    _warn_block(lab)


def cmd_mobile(args, lab: Lab):
    from .mobile import mobile_dist

    g = lab.grid
    a = read_state(args.field0, g)
    b = read_state(args.field1, g)
    value, q, j = mobile_dist(lab.mparams, lab.frame, a, b)
    _emit(args, "mobile_dist", {"value": value, "q": [float(x) for x in q], "j": int(j)})


def cmd_manifold(args, lab: Lab):
    from . import manifold as mf
    from .spectral import project_arr

    fr, P = lab.frame, lab.params
    cfg = lab.config
    kw = {"Tmax": cfg["manifold.Tmax"], "tol": cfg["manifold.tol"], "dt": lab.manifold_dt}
    if args.action == "eval":
        psi = project_arr(fr, read_state(args.psi_file, lab.grid).stack(), ">=0")
        val = mf.eval_Gstar(psi, P, fr, **kw)
        _emit(args, "manifold_eval", {"value": val, "psi_enorm": fr.enorm_arr(psi),
                                      "ell_bound": P.ell * fr.enorm_arr(psi)}, lab)
    elif args.action == "transform":
        sample = load_graph(args.graph_file)
        G = mf.SampledGraph(sample, fr, lab.mparams)
        new = mf.graph_transform_step(G, sample.psi, args.T, P, fr, dt=lab.manifold_dt,
                                      initial=sample.values[:, 0])
        if args.out:
            save_graph(new, Path(args.out) / "graph.json")
        _emit(args, "manifold_transform", {"T": args.T, "values": new.values,
                                           "change": float(np.max(np.abs(new.values - sample.values)))}, lab)
    elif args.action == "unstable":
        up = mf.eval_unstable_graph([args.lam], P, fr, dt=lab.manifold_dt)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            write_field(Path(args.out) / "unstable_point.fld", up.v)
        _emit(args, "manifold_unstable", {"lambda_plus": up.lam_plus, "T": up.T,
                                          "secant_steps": up.secant_steps, "decay_ratio": up.decay_ratio,
                                          "h_norm": float(np.sqrt(fr.hnorm2_arr(up.v.stack())))}, lab)
    else:
        from .acceptance import cu_reference

        _, R = cu_reference(lab)
        recs = mf.trapping_experiment([args.eta], [args.sign], R.point.stack(), P, fr, Tmax=args.tmax,
                                      dt=lab.manifold_dt)
        r = recs[0]
        _emit(args, "manifold_trap", {"eta": r.eta, "sign": r.sign, "trapped": r.trapped,
                                      "t_exit": r.t_exit, "sup_norm": r.sup_norm, "v0_norm": r.v0_norm,
                                      "energy_gap": r.energy_gap}, lab)


def cmd_suite(args, lab: Lab):
    from .experiments import run_suite

    cfg = lab.config
    names = args.names or None
    out = args.out or cfg["output.dir"]
    _warn_block(lab)
    rec = run_suite(cfg, names=names, lab=lab, out=out, log=lambda s: print(s, flush=True))
    print(f"{sum(r.passed for r in rec.runs)}/{len(rec.runs)} passed; record in {out}/record.json")
    if not rec.passed:
        raise NumericalFailure("failed: " + ", ".join(r.name for r in rec.runs if not r.passed))


# ---- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file (defaults for anything unset)")
    common.add_argument("--out", help="output directory")
    ap = argparse.ArgumentParser(prog="nlkg", description="Klein-Gordon soliton manifold lab")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("solitons", parents=[common], help="ground state profile and invariants")
    p = sub.add_parser("spectrum", parents=[common], help="L+ spectrum and symplectic frame report")
    p.add_argument("--samples", type=int, default=20, help="random states for the norm equivalence range")

    p = sub.add_parser("evolve", parents=[common], help="modulated flow trajectory")
    p.add_argument("--initial", help="field file with the initial perturbation v")
    p.add_argument("--size", type=float, default=0.01, help="H-norm of the seeded perturbation")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--sample-dt", type=float, default=0.1)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--localized", dest="full", action="store_false", default=False)
    g.add_argument("--full", dest="full", action="store_true")

    p = sub.add_parser("mobile-dist", parents=[common], help="mobile distance of two field files")
    p.add_argument("field0")
    p.add_argument("field1")

    p = sub.add_parser("manifold", parents=[common], help="invariant manifold computations")
    msub = p.add_subparsers(dest="action", required=True)
    q = msub.add_parser("eval", parents=[common])
    q.add_argument("--psi-file", required=True)
    q = msub.add_parser("transform", parents=[common])
    q.add_argument("--graph-file", required=True)
    q.add_argument("--T", type=float, required=True)
    q = msub.add_parser("unstable", parents=[common])
    q.add_argument("--lambda", dest="lam", type=float, required=True)
    q = msub.add_parser("trap", parents=[common])
    q.add_argument("--eta", type=float, required=True)
    q.add_argument("--sign", type=int, choices=(-1, 1), default=1)
    q.add_argument("--tmax", type=float, default=50.0)

    p = sub.add_parser("suite", parents=[common], help="run named experiments (default: experiment.which)")
    p.add_argument("names", nargs="*")
    return ap


COMMANDS = {"solitons": cmd_solitons, "spectrum": cmd_spectrum, "evolve": cmd_evolve,
            "mobile-dist": cmd_mobile, "manifold": cmd_manifold, "suite": cmd_suite}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        lab = lab_for(cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            COMMANDS[args.command](args, lab)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NLKGError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        # unreadable or malformed input files count as configuration problems
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
