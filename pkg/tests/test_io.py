import csv

import numpy as np
import pytest

from binospec import io as bio
from binospec.likelihood import Dataset
from binospec.synthetic import generate, preset_observable


@pytest.fixture
def dataset():
    return generate(preset_observable().with_photons(100, seed=7))


def test_dataset_round_trip(tmp_path, dataset):
    path = bio.write_dataset(tmp_path / "d.csv", dataset)
    back = bio.read_dataset(path)
    assert back == dataset
    # x written with repr, so bit-exact
    assert np.array_equal(back.x, dataset.x)


def test_floats_round_trip_exactly():
    vals = [0.1, 1 / 3, 1e-300, 5e-324, -2.5, 0.7016]
    text = bio.table_text(["v"], [[v] for v in vals])
    parsed = [float(r[0]) for r in list(csv.reader(text.splitlines()))[1:]]
    assert parsed == vals


@pytest.mark.parametrize("body, line", [
    ("x,N,n\n0.5,10,3\n0.6,10\n", 3),
    ("x,N,n\n0.5,10,3\n0.6,ten,2\n", 3),
    ("x,N,n\n0.5,10,11\n", 2),
    ("x,N,n\n0.5,2.5,1\n", 2),
    ("a,b,c\n0.5,10,3\n", 1),
])
def test_parse_errors_carry_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(bio.ParseError) as info:
        bio.read_dataset(p)
    assert info.value.line == line
    assert f":{line}:" in str(info.value)


def test_empty_dataset_rejected(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("x,N,n\n")
    with pytest.raises(bio.ParseError, match="no records"):
        bio.read_dataset(p)


def test_integral_float_counts_accepted(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("x,N,n\n0.5,10.0,3\n")
    d = bio.read_dataset(p)
    assert d == Dataset(np.array([0.5]), np.array([10]), np.array([3]))


def test_json_is_sorted_and_stable(tmp_path):
    obj = {"b": np.float64(0.1), "a": np.arange(3), "c": {"z": 1, "y": np.int64(2)}}
    t1 = bio.json_text(obj)
    assert t1 == bio.json_text(dict(reversed(obj.items())))
    assert t1.index('"a"') < t1.index('"b"')
    bio.write_json(tmp_path / "r.json", obj)
    assert bio.read_json(tmp_path / "r.json")["a"] == [0, 1, 2]


def test_bad_json_reports_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "seed": 1,\n  oops\n}\n')
    with pytest.raises(bio.ParseError) as info:
        bio.read_json(p)
    assert info.value.line == 3


def test_atomic_write_leaves_no_temp_files(tmp_path):
    bio.atomic_write_text(tmp_path / "sub" / "a.txt", "hello")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["a.txt"]
