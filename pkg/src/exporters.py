import csv
import json
import os

import numpy as np

CURVE_COLUMNS = ("I", "D", "x", "y", "F", "G", "p")


def number(value):
    """Fixed 15-significant-digit decimal string"""
    if value is None:
        return ""
    return format(float(value), ".15g")


def complex_pairs(matrix):
    """Row-major nested [re, im] pairs"""
    array = np.asarray(matrix, dtype=complex)
    if array.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in array]
    return [complex_pairs(row) for row in array]


def point_record(point):
    record = {key: number(getattr(point, key)) for key in ("x", "y", "F", "G", "I", "D")}
    record["d"] = point.d
    record["p"] = number(point.p) if point.p is not None else None
    return record


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_json(path, payload):
    _ensure_parent(path)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_jsonl(path, records):
    _ensure_parent(path)
    with open(path, "w") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True))
            f.write("\n")
    return path


def write_curve_csv(path, points):
    _ensure_parent(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for point in points:
            writer.writerow([number(getattr(point, column)) for column in CURVE_COLUMNS])
    return path


def read_curve_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return [{k: float(v) if v != "" else None for k, v in row.items()} for row in rows]


def stage_record(stage):
    return {
        "level": stage.level,
        "in_labels": list(stage.in_labels),
        "out_labels": list(stage.out_labels),
        "in_dims": list(stage.in_layout.dims),
        "out_dims": list(stage.out_layout.dims),
        "ancilla_dim_in": stage.ancilla_dim_in,
        "ancilla_dim_out": stage.ancilla_dim_out,
        "ancilla_primed_labels": list(stage.ancilla_primed),
        "isometry_residual": number(stage.isometry_residual()),
        "matrix": complex_pairs(stage.V),
    }


def trajectory_record(trajectory):
    return {
        "d": trajectory.d,
        "x": number(trajectory.x),
        "y": number(trajectory.y),
        "seed": trajectory.seed,
        "index": trajectory.index,
        "psi": complex_pairs(trajectory.psi),
        "U": complex_pairs(trajectory.u),
        "Uhat": complex_pairs(trajectory.uhat),
        "density": number(trajectory.density),
        "gain": number(trajectory.gain),
        "conditional_fidelity": number(trajectory.conditional_fidelity),
        "proposals": trajectory.proposals,
    }
