"""Suite orchestration, experiment records and plot-data emission.

A record holds everything needed to reproduce a suite run (config hash,
seed, code provenance) plus the per-experiment metrics and tables.  Wall
clock times are kept out of the record and written to a separate timing
file, so identical inputs give byte-identical ``record.json``.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .acceptance import CHECKS, CheckResult
from .config import Config, Lab, lab_for
from .errors import NLKGError
from .io import dump_json, write_csv

ALIASES = {"mobile-metric": "mobile", "unstable": "unstable-decay", "energy": "energy-expansion"}

# column descriptions for the schema sidecars
COLUMNS = {
    "index": "position in the sorted discrete spectrum",
    "eigenvalue": "eigenvalue of the discretised L+",
    "t": "time",
    "ratio_plus": "||e^{JLt} g+||_E / e^{kt}",
    "ratio_minus": "||e^{JLt} g-||_E / e^{-kt}",
    "E": "NLKG energy",
    "P": "momentum",
    "dE_rel": "(E(t) - E(0)) / |E(0)|",
    "dP_abs": "|P(t) - P(0)|",
    "eta": "size of the off-manifold displacement along g-",
    "sign": "sign of the displacement",
    "t_exit": "first time the perturbation leaves the exit ball (NaN if trapped)",
    "norm": "E-norm of the perturbation",
    "T": "graph transform time",
    "Lambda": "measured contraction ratio",
    "linear_bound": "exp(-(kmin - kappa) T)",
    "n": "oscillation index",
    "m_phi": "mobile distance of the oscillatory pair",
    "h_norm": "H-norm of the difference",
    "q": "optimal translation",
    "psi_enorm": "E-norm of the graph argument",
    "bisection": "G_* by exit shooting",
    "iterated": "G_* by iterating the graph transform on 0",
    "eps": "perturbation size",
    "nu": "nu coordinate of the restricted point",
    "nu_over_eps2": "nu / eps^2",
    "iterations": "fixed point iterations",
    "residual": "energy identity residual",
    "calE_over_eps2": "quadratic energy / eps^2",
    "p": "boost parameter",
    "E_expected": "<p> E(Q)",
    "P_expected": "E(Q) p",
}


def provenance() -> str:
    """Version plus a digest of the package sources (stable across checkouts)."""
    h = hashlib.sha256()
    for f in sorted(Path(__file__).parent.glob("*.py")):
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return f"artifact-{__version__}+src.{h.hexdigest()[:12]}"


@dataclass
class ExperimentRecord:
    config_hash: str
    seed: int
    provenance: str
    runs: list = field(default_factory=list)  # CheckResult per experiment, in suite order
    warnings: list = field(default_factory=list)  # smallness conditions missing their margin
    wall_clock: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.runs)

    def metrics(self) -> dict:
        return {r.name: r.metrics for r in self.runs}

    def to_json(self) -> dict:
        return {"config_hash": self.config_hash, "seed": self.seed, "provenance": self.provenance,
                "experiments": [r.name for r in self.runs],
                "passed": self.passed, "smallness_warnings": list(self.warnings),
                "results": [{"number": r.number, "name": r.name, "passed": r.passed,
                             "metrics": r.metrics} for r in self.runs]}


class SuiteError(NLKGError):
    """A sub-experiment raised; ``experiment`` names it and ``__cause__`` holds the error."""

    def __init__(self, experiment: str, err: Exception):
        super().__init__(f"experiment {experiment!r} failed: {type(err).__name__}: {err}")
        self.experiment = experiment


def resolve(names) -> list[str]:
    out = []
    for n in names:
        n = ALIASES.get(n, n)
        if n == "all":
            out.extend(CHECKS)
            continue
        if n not in CHECKS:
            from .errors import ConfigError

            raise ConfigError(f"unknown experiment {n!r}; known: {', '.join(CHECKS)}")
        out.append(n)
    return out


def check_kwargs(name: str, cfg: Config) -> dict:
    """Config-driven arguments for one check (everything else stays at its default)."""
    seed = cfg["experiment.seed"]
    kw = {
        "frame": {"seed": seed},
        "conservation": {"seed": seed},
        "mobile": {"seed": seed, "pairs": cfg["experiment.pairs"], "triples": cfg["experiment.triples"]},
        "flow-lipschitz": {"seed": seed, "n": cfg["experiment.pairs"]},
        "fixed-point": {"n": cfg["experiment.samples"], "Ts": cfg["experiment.T"]},
        "dichotomy": {"etas": cfg["experiment.etas"]},
        "restriction": {"seed": seed},
        "energy-expansion": {"seed": seed},
    }
    return kw.get(name, {})


def run_suite(config: Config, names=None, lab: Lab | None = None, out=None, log=None) -> ExperimentRecord:
    """Run the named experiments (default: ``experiment.which``) in order.

    With ``out`` set, writes record.json, timing.json and the plot data.
    ``log`` receives one line per finished experiment.
    """
    names = resolve(config["experiment.which"] if names is None else names)
    lab = lab or lab_for(config)
    rec = ExperimentRecord(config.hash, config["experiment.seed"], provenance(), warnings=lab.smallness())
    for name in names:
        t0 = time.perf_counter()
        try:
            res: CheckResult = CHECKS[name](lab, **check_kwargs(name, config))
        except NLKGError as err:
            raise SuiteError(name, err) from err
        res.seconds = time.perf_counter() - t0
        rec.runs.append(res)
        rec.wall_clock[name] = res.seconds
        if log:
            log(f"{res.line()} ({res.seconds:.1f}s)")
    if out is not None:
        write_record(rec, out)
    return rec


def write_record(rec: ExperimentRecord, out) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(rec.to_json(), out / "record.json")
    dump_json({"config_hash": rec.config_hash, "seconds": rec.wall_clock,
               "total": sum(rec.wall_clock.values())}, out / "timing.json")
    return [out / "record.json", out / "timing.json"] + emit_plotdata(rec, out)


def emit_plotdata(rec: ExperimentRecord, out) -> list[Path]:
    """One CSV per table of every run, each with a ``.schema.json`` sidecar."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for r in rec.runs:
        for tname, (header, rows) in r.tables.items():
            p = out / f"{tname}.csv"
            write_csv(p, header, rows, schema={c: COLUMNS.get(c, "") for c in header})
            paths.append(p)
    return paths
