import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlkg.config import SCHEMA, Config, default_config, load_config, parse_config
from nlkg.errors import ConfigError

from nlkg.io import dumps, load_graph, load_json, read_csv, read_field, read_state, save_graph, write_csv, write_field
from nlkg.manifold import GraphSample
from nlkg.rng import SplitMix64, random_state


def test_defaults_and_hash_stable():
    a, b = default_config(), parse_config("# nothing\n\n")
    assert a.hash == b.hash and len(a.hash) == 16
    assert a["grid.N"] == 1024 and a["flow.delta"] == 0.02


def test_parse_values_and_comments():
    cfg = parse_config("flow.delta = 0.01  # smaller\nexperiment.which = spectrum, lorentz\nflow.kappa =\n")
    assert cfg["flow.delta"] == 0.01
    assert cfg["experiment.which"] == ("spectrum", "lorentz")
    assert cfg["flow.kappa"] is None
    assert cfg.hash != default_config().hash


@pytest.mark.parametrize("text", ["bogus.key = 1", "grid.N = 1023", "flow.C0 = 9", "flow.order = 3",
                                  "grid.N = abc", "no equals sign", "flow.dt=1\nflow.dt=2"])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


@given(st.floats(1e-3, 0.05), st.floats(0.05, 0.5), st.integers(0, 10**6))
def test_canonical_round_trip(delta, ell, seed):
    cfg = Config.from_dict({"flow.delta": delta, "flow.ell": ell, "experiment.seed": seed})
    back = parse_config(cfg.canonical())
    assert back.hash == cfg.hash and back.values == cfg.values


def test_replace_and_schema_keys():
    cfg = default_config().replace(flow__delta=0.01)
    assert cfg["flow.delta"] == 0.01
    assert set(dict(cfg.values)) == set(SCHEMA)


def test_smallness_warning_block(lab):
    # the default parameters miss the tenfold margin on two conditions
    msgs = lab.smallness()
    assert all(isinstance(m, str) for m in msgs)
    assert len(lab.smallness(margin=1.0)) == 0


def test_field_round_trip_binary_and_csv(tmp_path, grid):
    st_ = random_state(SplitMix64(1), grid)
    write_field(tmp_path / "a.fld", st_)
    assert np.array_equal(read_state(tmp_path / "a.fld", grid).stack(), st_.stack())
    write_field(tmp_path / "a.csv", st_)
    back = read_state(tmp_path / "a.csv", grid)
    assert np.array_equal(back.stack(), st_.stack())
    assert read_field(tmp_path / "a.fld").shape == (2, grid.N)


def test_field_size_mismatch(tmp_path, grid):
    write_field(tmp_path / "b.fld", np.zeros((2, 16)))
    with pytest.raises(ValueError):
        read_state(tmp_path / "b.fld", grid)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), max_size=8))
def test_json_floats_round_trip(xs):
    import json

    assert json.loads(dumps({"x": xs}))["x"] == xs


def test_json_is_deterministic():
    obj = {"b": 1, "a": [0.1, 1e-300, np.float64(2.0)], "n": None, "arr": np.arange(3.0)}
    assert dumps(obj) == dumps(obj)
    assert list(load_json_text(dumps(obj))) == ["b", "a", "n", "arr"]


def load_json_text(t):
    import json

    return json.loads(t)


def test_graph_round_trip(tmp_path, grid):
    psi = np.array([random_state(SplitMix64(s), grid).stack() for s in range(3)])
    g = GraphSample(psi, np.array([[0.1], [0.2], [-0.3]]), 0.1, 0.02)
    for inline in (False, True):
        p = tmp_path / f"g{int(inline)}.json"
        save_graph(g, p, inline=inline)
        h = load_graph(p)
        assert np.array_equal(h.psi, g.psi) and np.array_equal(h.values, g.values)
        assert h.ell == 0.1 and h.delta == 0.02
        assert set(load_json(p)) == {"samples", "ell", "delta", "tag"}


def test_csv_with_schema(tmp_path):
    write_csv(tmp_path / "s.csv", ["eta", "sign", "t_exit"], [(1e-3, 1, 2.5)], schema={"eta": "size"})
    head, rows = read_csv(tmp_path / "s.csv")
    assert head == ["eta", "sign", "t_exit"] and float(rows[0][2]) == 2.5
    sch = load_json(tmp_path / "s.schema.json")
    assert [c["name"] for c in sch["columns"]] == head
