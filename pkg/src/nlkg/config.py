"""Flat key=value configuration and the objects built from it.

A config file holds one ``section.key = value`` pair per line; ``#`` starts
a comment, lists are comma separated and an empty value means "default".
Unknown keys are rejected.  The canonical form (sorted keys, values as
parsed) is what the config hash is computed from.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass
from functools import cached_property

from .errors import ConfigError, SmallnessWarning
from .flow import FlowParams
from .grid import Grid, Nonlinearity
from .mobile import MobileParams


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _names(s):
    return tuple(x.strip() for x in s.split(",") if x.strip())


def _opt_float(s):
    return None if s.strip() == "" else float(s)


# key -> (parser, default)
SCHEMA = {
    "grid.L": (float, 30.0),
    "grid.N": (int, 1024),
    "grid.d": (int, 1),
    "nonlin.powers": (_floats, (3.0,)),
    "nonlin.coeffs": (_floats, (1.0,)),
    "flow.delta": (float, 0.02),
    "flow.ell": (float, 0.1),
    "flow.dt": (float, 0.005),
    "flow.kappa": (_opt_float, None),
    "flow.C0": (float, 2.0),
    "flow.C1": (float, 4.0),
    "flow.C2": (float, 8.0),
    "flow.order": (int, 2),
    "manifold.dt": (float, 0.02),
    "manifold.tol": (float, 1e-9),
    "manifold.Tmax": (float, 20.0),
    "experiment.which": (_names, ()),
    "experiment.seed": (int, 202),
    "experiment.etas": (_floats, (1e-3, 1e-4, 1e-5, 1e-6)),
    "experiment.T": (_floats, (0.5, 0.75, 1.0)),
    "experiment.samples": (int, 10),
    "experiment.pairs": (int, 100),
    "experiment.triples": (int, 1000),
    "output.dir": (str, "out"),
}


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


@dataclass(frozen=True)
class Config:
    values: tuple  # sorted (key, value) pairs

    @classmethod
    def from_dict(cls, d: dict | None = None) -> "Config":
        merged = {k: dv for k, (_, dv) in SCHEMA.items()}
        for k, v in (d or {}).items():
            if k not in SCHEMA:
                raise ConfigError(f"unknown config key {k!r}")
            parse = SCHEMA[k][0]
            try:
                merged[k] = parse(v) if isinstance(v, str) else (tuple(v) if isinstance(v, list) else v)
            except ValueError as exc:
                raise ConfigError(f"bad value for {k}: {v!r} ({exc})") from None
        cfg = cls(tuple(sorted(merged.items())))
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return dict(self.values)[key]

    def replace(self, **kw) -> "Config":
        d = dict(self.values)
        for k, v in kw.items():
            d[k.replace("__", ".")] = v
        return Config.from_dict(d)

    def canonical(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in self.values)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def validate(self):
        d = dict(self.values)
        if d["grid.d"] != 1:
            raise ConfigError("only grid.d = 1 is implemented")
        if d["grid.N"] <= 0 or d["grid.N"] % 2:
            raise ConfigError("grid.N must be a positive even integer")
        if d["grid.L"] <= 0:
            raise ConfigError("grid.L must be positive")
        if len(d["nonlin.powers"]) != len(d["nonlin.coeffs"]) or not d["nonlin.powers"]:
            raise ConfigError("nonlin.powers and nonlin.coeffs must have the same nonzero length")
        for k in ("flow.delta", "flow.ell", "flow.dt", "manifold.dt", "manifold.tol", "manifold.Tmax"):
            if not d[k] > 0:
                raise ConfigError(f"{k} must be positive")
        if not 0 < d["flow.C0"] < d["flow.C1"] < d["flow.C2"]:
            raise ConfigError("need 0 < flow.C0 < flow.C1 < flow.C2")
        if d["flow.order"] not in (2, 4):
            raise ConfigError("flow.order must be 2 or 4")

    # -- built objects --
    @property
    def grid(self) -> Grid:
        return Grid(self["grid.L"], self["grid.N"], self["grid.d"])

    @property
    def nonlin(self) -> Nonlinearity:
        try:
            return Nonlinearity(self["nonlin.powers"], self["nonlin.coeffs"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def flow_params(self) -> FlowParams:
        try:
            return FlowParams(delta=self["flow.delta"], ell=self["flow.ell"], dt=self["flow.dt"],
                              kappa=self["flow.kappa"], C0=self["flow.C0"], C1=self["flow.C1"],
                              C2=self["flow.C2"], order=self["flow.order"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def mobile_params(self) -> MobileParams:
        return MobileParams(delta=self["flow.delta"], C2=self["flow.C2"])


def parse_config(text: str) -> Config:
    d = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        k, v = (x.strip() for x in line.split("=", 1))
        if k in d:
            raise ConfigError(f"line {lineno}: duplicate key {k!r}")
        d[k] = v
    return Config.from_dict(d)


def load_config(path) -> Config:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def default_config() -> Config:
    return Config.from_dict()


class Lab:
    """Grid, ground state, spectral frame and parameters for one config."""

    def __init__(self, config: Config | None = None):
        self.config = config or default_config()

    @cached_property
    def grid(self):
        return self.config.grid

    @cached_property
    def nonlin(self):
        return self.config.nonlin

    @cached_property
    def family(self):
        from .solitons import ground_state

        return ground_state(self.nonlin, self.grid)

    @cached_property
    def frame(self):
        from .spectral import build_frame

        return build_frame(self.family, kappa=self.config["flow.kappa"])

    @cached_property
    def params(self) -> FlowParams:
        return self.config.flow_params

    @cached_property
    def mparams(self) -> MobileParams:
        return self.config.mobile_params

    @property
    def manifold_dt(self) -> float:
        return self.config["manifold.dt"]

    def smallness(self, margin: float = 10.0) -> list[str]:
        """Smallness conditions that miss the margin; each is also warned about."""
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", SmallnessWarning)
            self.params.check(self.frame, margin)
        return [str(w.message) for w in caught if issubclass(w.category, SmallnessWarning)]


_LABS: dict[str, Lab] = {}


def lab_for(config: Config | None = None) -> Lab:
    """Shared Lab per config hash (frames are expensive to rebuild)."""
    config = config or default_config()
    lab = _LABS.get(config.hash)
    if lab is None:
        lab = _LABS[config.hash] = Lab(config)
    return lab
