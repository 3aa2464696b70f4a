import json

import numpy as np
import pytest

from exporters import (
    complex_pairs,
    number,
    point_record,
    read_curve_csv,
    stage_record,
    trajectory_record,
    write_curve_csv,
    write_json,
    write_jsonl,
)
from network_sim import run_trajectories
from realization import v1
from tradeoff import curve_points, point_from_x, y_from_x


def test_number_formatting():
    assert number(1 / 3) == "0.333333333333333"
    assert number(0.0) == "0"
    assert number(None) == ""
    assert float(number(5 / 6)) == pytest.approx(5 / 6, abs=1e-15)


def test_complex_pairs():
    assert complex_pairs([1 + 2j, -1j]) == [[1.0, 2.0], [0.0, -1.0]]
    assert complex_pairs(np.eye(2))[1] == [[0.0, 0.0], [1.0, 0.0]]


def test_curve_csv(tmp_path):
    path = tmp_path / "nested" / "curve.csv"
    write_curve_csv(path, curve_points(2, 4))
    lines = path.read_text().splitlines()
    assert lines[0] == "I,D,x,y,F,G,p"
    assert lines[1].startswith("0,0,0,1,1,0.25,")
    rows = read_curve_csv(path)
    assert len(rows) == 4
    assert rows[-1]["I"] == pytest.approx(1.0) and rows[-1]["p"] is None


def test_point_record_fields():
    record = point_record(point_from_x(1 / np.sqrt(3), 2))
    assert set(record) == {"x", "y", "F", "G", "I", "D", "d", "p"}
    assert float(record["F"]) == pytest.approx(5 / 6, abs=1e-14)
    assert record["p"] is None


def test_json_is_sorted_and_stable(tmp_path):
    first = write_json(tmp_path / "a.json", {"b": 1, "a": [1, 2]})
    second = write_json(tmp_path / "b.json", {"a": [1, 2], "b": 1})
    assert open(first).read() == open(second).read()
    assert json.loads(open(first).read()) == {"a": [1, 2], "b": 1}


def test_stage_and_trajectory_records(tmp_path):
    stage = stage_record(v1(0.6, y_from_x(0.6, 2), 2))
    assert stage["in_labels"] == ["0", "A0"] and stage["out_labels"] == ["1", "A1"]
    assert stage["ancilla_primed_labels"] == ["1'", "0'"]
    assert np.array(stage["matrix"]).shape == (8, 2, 2)

    trajectories = run_trajectories(0.0, 1.0, 2, 3, seed=4)
    path = write_jsonl(tmp_path / "t.jsonl", (trajectory_record(t) for t in trajectories))
    lines = open(path).read().splitlines()
    assert len(lines) == 3
    record = json.loads(lines[1])
    assert record["index"] == 1 and record["seed"] == 4
    assert float(record["conditional_fidelity"]) == pytest.approx(1.0, abs=1e-12)
