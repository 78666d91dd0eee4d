import json

import numpy as np
import pytest
import sympy

from src.config import Config
from src.reporting.report_store import ReportStore, to_jsonable


@pytest.fixture
def store(tmp_path):
    return ReportStore(tmp_path)


def test_to_jsonable_converts_numeric_types(tmp_path):
    value = {
        1: np.int64(3),
        "x": np.array([0.5, 1.5]),
        "flag": np.bool_(True),
        "q": sympy.Rational(1, 3),
        "path": tmp_path,
        "nested": (np.float32(0.25),),
    }
    out = to_jsonable(value)
    assert out == {"1": 3, "x": [0.5, 1.5], "flag": True, "q": "1/3", "path": str(tmp_path), "nested": [0.25]}
    json.dumps(out)


def test_report_round_trip(store, tmp_path):
    report = store.build_report(
        "coverage", {"fraction": np.float64(1.0)}, {"steps": 10}, {"theta": "sqrt(2)"}, created_at="2024-01-01T00:00:00"
    )
    assert report["schema_version"] == Config.SCHEMA_VERSION
    path = store.save(report, tmp_path / "out" / "coverage.json")
    loaded = store.load(path)
    assert loaded == report
    assert loaded["independence_declarations"] == {"theta": "sqrt(2)"}


def test_same_report_gives_identical_files(store, tmp_path):
    report = store.build_report("classify", {"b": 1, "a": [1, 2]}, {}, created_at="2024-01-01T00:00:00")
    first = store.save(report, tmp_path / "a.json").read_bytes()
    second = store.save(dict(reversed(list(report.items()))), tmp_path / "b.json").read_bytes()
    assert first == second


def test_load_rejects_other_schema_version(store, tmp_path):
    path = tmp_path / "old.json"
    path.write_text(json.dumps({"schema_version": Config.SCHEMA_VERSION + 1}), encoding="utf-8")
    with pytest.raises(ValueError):
        store.load(path)


def test_curves(store):
    rows = [[0, 0.1], [10, 0.5], [20, 1.0]]
    path = store.save_curve("run_coverage", rows)
    assert path.read_text().splitlines()[0] == "step,fraction"
    assert np.allclose(store.load_curve(path), rows)
    store.save_curve("run_orbit", [[0, 0.1, 0.2]], columns=("step", "x1", "x2"))
    assert [p.name for p in store.saved_curves()] == ["run_coverage.csv", "run_orbit.csv"]


def test_saved_curves_empty_when_nothing_written(tmp_path):
    assert ReportStore(tmp_path / "missing").saved_curves() == []
