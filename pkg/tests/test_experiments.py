import math

import numpy as np
import pytest

from nlkg.acceptance import CHECKS, CheckResult
from nlkg.config import default_config
from nlkg.errors import ConfigError
from nlkg.experiments import ExperimentRecord, emit_plotdata, provenance, resolve, run_suite
from nlkg.io import load_json, read_csv


def test_empty_suite_has_zero_metrics(tmp_path, lab):
    rec = run_suite(default_config(), names=[], lab=lab, out=tmp_path)
    assert rec.runs == [] and rec.metrics() == {} and rec.passed
    d = load_json(tmp_path / "record.json")
    assert d["results"] == [] and d["experiments"] == []


def test_every_criterion_is_a_suite_entry():
    assert resolve(["all"]) == list(CHECKS)
    assert len(CHECKS) == 14
    assert resolve(["mobile-metric", "unstable"]) == ["mobile", "unstable-decay"]
    with pytest.raises(ConfigError):
        resolve(["nonsense"])


def test_record_is_byte_identical(tmp_path, lab):
    names = ["spectrum", "frame", "conservation", "energy-expansion"]
    a = run_suite(default_config(), names=names, lab=lab, out=tmp_path / "a")
    b = run_suite(default_config(), names=names, lab=lab, out=tmp_path / "b")
    ra = (tmp_path / "a" / "record.json").read_bytes()
    rb = (tmp_path / "b" / "record.json").read_bytes()
    assert ra == rb
    assert a.config_hash == b.config_hash == default_config().hash
    # wall clock lives outside the record
    assert b"seconds" not in ra and "total" in load_json(tmp_path / "a" / "timing.json")


def test_spectrum_record_and_plotdata(tmp_path, lab):
    rec = run_suite(default_config(), names=["spectrum", "conservation"], lab=lab, out=tmp_path)
    d = load_json(tmp_path / "record.json")
    assert d["results"][0]["metrics"]["k"][0] == pytest.approx(1.7320508, abs=1e-7)
    head, rows = read_csv(tmp_path / "spectrum.csv")
    assert head == ["index", "eigenvalue"] and float(rows[0][1]) == pytest.approx(-3.0, abs=1e-3)
    head, _ = read_csv(tmp_path / "conservation.csv")
    assert head == ["t", "E", "P", "dE_rel", "dP_abs"]
    sch = load_json(tmp_path / "conservation.schema.json")
    assert all(c["description"] for c in sch["columns"])
    assert rec.passed


def test_dichotomy_plotdata_header(tmp_path):
    res = CheckResult(10, "dichotomy", True, {"rate_plus": 1.73},
                      {"dichotomy": (["eta", "sign", "t_exit"], [(1e-3, 1, 2.0), (1e-4, 1, float("nan"))])})
    rec = ExperimentRecord("h", 1, provenance(), [res])
    paths = emit_plotdata(rec, tmp_path)
    assert [p.name for p in paths] == ["dichotomy.csv"]
    head, rows = read_csv(paths[0])
    assert head == ["eta", "sign", "t_exit"] and math.isnan(float(rows[1][2]))


def test_dichotomy_suite_run_with_short_ladder(tmp_path, lab):
    cfg = default_config().replace(experiment__etas=(1e-3, 1e-4, 1e-5))
    rec = run_suite(cfg, names=["dichotomy"], lab=lab, out=tmp_path)
    head, rows = read_csv(tmp_path / "dichotomy.csv")
    assert head == ["eta", "sign", "t_exit"] and len(rows) == 6
    r = rec.runs[0].metrics["rate_plus"]
    assert r == pytest.approx(np.sqrt(3.0), rel=0.1)
