"""Bundled synthetic process fixture.

A fake-but-plausible deposition process: six inputs actually drive the two
objectives (conversion peaks near one corner of the recipe space, uniformity
near another, so the targets genuinely trade off), fourteen more parameters
are logged decoys. The raw files carry the usual dirt on top: a constant
column, an exact affine duplicate, a ratio-bound column, replicate pairs,
gross outlier rows, missing cells, and two file encodings (',' decimals with
';' delimiters in the second file).

Used by the golden-run acceptance test, the CLI demo (``doeopt fixture``)
and the dashboard end-to-end test.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .core import derive_seed

N_TRUE = 6
N_DECOY = 14

TRUE_NAMES = ["temp", "pressure", "flow", "time", "power", "conc"]
TRUE_BOUNDS = [(300.0, 800.0), (1.0, 10.0), (0.0, 100.0), (10.0, 120.0), (50.0, 500.0), (0.1, 2.0)]
DECOY_NAMES = [f"aux{i:02d}" for i in range(1, N_DECOY + 1)]

# objective bowls in unit coordinates: conversion peaks at A, uniformity at B
PEAK_A = np.array([0.30, 0.35, 0.25, 0.40, 0.30, 0.35])
PEAK_B = np.array([0.70, 0.65, 0.75, 0.60, 0.70, 0.65])
SCALE_A = 120.0
SCALE_B = 90.0
BASE_A = 95.0
BASE_B = 88.0


def true_objectives(U: np.ndarray) -> np.ndarray:
    """Noise-free objective surface over unit-coordinate true inputs."""
    U = np.atleast_2d(U)
    y1 = BASE_A - SCALE_A * np.sum((U - PEAK_A) ** 2, axis=1)
    y2 = BASE_B - SCALE_B * np.sum((U - PEAK_B) ** 2, axis=1)
    return np.column_stack([y1, y2])


def pareto_segment(n_points: int = 50) -> np.ndarray:
    """Unit-coordinate Pareto set: the segment between the two peaks (both
    bowls are isotropic, so the tradeoff lives on the straight line)."""
    t = np.linspace(0.0, 1.0, n_points)[:, None]
    return PEAK_A[None, :] * (1 - t) + PEAK_B[None, :] * t


@dataclass
class FixtureFiles:
    dir: str
    file_a: str
    file_b: str
    config: str


def _to_native(U: np.ndarray) -> np.ndarray:
    cols = []
    for j, (lo, hi) in enumerate(TRUE_BOUNDS):
        cols.append(lo + U[:, j] * (hi - lo))
    return np.column_stack(cols)


def generate_table(seed: int, n_rows: int = 220) -> dict:
    """Full synthetic table as column dict plus planting metadata."""
    rng = np.random.default_rng(derive_seed(seed, "fixture"))
    U = rng.random((n_rows, N_TRUE))
    native = _to_native(U)
    Y = true_objectives(U)
    noise_scale = [0.02 * SCALE_A, 0.02 * SCALE_B]
    Y = Y + rng.normal(0.0, noise_scale, size=Y.shape)

    cols: dict[str, np.ndarray] = {}
    for j, name in enumerate(TRUE_NAMES):
        cols[name] = native[:, j].copy()
    for i, name in enumerate(DECOY_NAMES):
        lo, hi = 10.0 * (i + 1), 10.0 * (i + 1) + 25.0
        cols[name] = lo + rng.random(n_rows) * (hi - lo)

    # planted artifacts
    cols["chamber_id"] = np.full(n_rows, 3.0)  # constant
    cols["temp_mirror"] = 1.8 * cols["temp"] - 12.0  # exact affine duplicate
    cols["flow_total"] = 2.0 * cols["flow"]  # bound by the ratio rule below

    outlier_rows = [11, 53]
    y = Y.copy()
    y[outlier_rows, 0] += 40 * SCALE_A

    replicate_pairs = [(5, 90), (17, 121)]
    for a, b in replicate_pairs:
        for name in cols:
            cols[name][b] = cols[name][a]
        # replicates re-measure the outputs with fresh noise (already distinct)

    missing_cells = [(33, "aux03"), (77, "aux09"), (101, "aux01")]

    return {
        "columns": cols,
        "y1": y[:, 0],
        "y2": y[:, 1],
        "outlier_rows": outlier_rows,
        "replicate_pairs": replicate_pairs,
        "missing_cells": missing_cells,
        "n_rows": n_rows,
    }


def _format_cell(value, decimal: str) -> str:
    text = f"{value:.10g}"
    return text.replace(".", decimal) if decimal != "." else text


def write_fixture(out_dir: str, seed: int = 2024, n_rows: int = 220) -> FixtureFiles:
    """Write the two raw source files plus a ready-to-run config document."""
    os.makedirs(out_dir, exist_ok=True)
    table = generate_table(seed, n_rows)
    cols = table["columns"]
    names = list(cols.keys())
    missing = set(table["missing_cells"])

    split = int(0.6 * n_rows)
    file_a = os.path.join(out_dir, "line_a.csv")
    file_b = os.path.join(out_dir, "line_b.csv")

    def cell(i, name, decimal):
        if (i, name) in missing:
            return ""
        return _format_cell(cols[name][i], decimal)

    with open(file_a, "w") as fh:
        fh.write(",".join(["Run"] + names + ["Conversion", "Uniformity"]) + "\n")
        for i in range(split):
            row = [str(i)] + [cell(i, n, ".") for n in names]
            row += [_format_cell(table["y1"][i], "."), _format_cell(table["y2"][i], ".")]
            fh.write(",".join(row) + "\n")

    with open(file_b, "w") as fh:
        fh.write(";".join(["Run"] + names + ["Conversion", "Uniformity"]) + "\n")
        for i in range(split, n_rows):
            row = [str(i)] + [cell(i, n, ",") for n in names]
            row += [_format_cell(table["y1"][i], ","), _format_cell(table["y2"][i], ",")]
            fh.write(";".join(row) + "\n")

    config_path = os.path.join(out_dir, "config.yaml")
    with open(config_path, "w") as fh:
        fh.write(fixture_config_yaml(out_dir))
    return FixtureFiles(dir=out_dir, file_a=file_a, file_b=file_b, config=config_path)


def parameter_entries() -> list[dict]:
    params = []
    for name, (lo, hi) in zip(TRUE_NAMES, TRUE_BOUNDS):
        params.append({"name": name, "kind": "continuous", "bounds": [lo, hi]})
    for i, name in enumerate(DECOY_NAMES):
        lo, hi = 10.0 * (i + 1), 10.0 * (i + 1) + 25.0
        params.append({"name": name, "kind": "continuous", "bounds": [lo - 1.0, hi + 1.0]})
    params.append({"name": "chamber_id", "kind": "continuous", "bounds": [0.0, 10.0]})
    params.append({"name": "temp_mirror", "kind": "continuous", "bounds": [500.0, 1450.0]})
    params.append({"name": "flow_total", "kind": "continuous", "bounds": [-1.0, 201.0]})
    return params


def fixture_config_dict(data_dir: str, iterations: int = 60, population: int = 48) -> dict:
    role_map = {p["name"]: "input" for p in parameter_entries()}
    role_map["conversion"] = "output"
    role_map["uniformity"] = "output"
    column_map = {p["name"]: p["name"] for p in parameter_entries()}
    column_map.update({"Conversion": "conversion", "Uniformity": "uniformity", "Run": "run"})
    return {
        "seed": 424242,
        "sources": {
            "parameters": parameter_entries(),
            "outputs": [{"name": "conversion", "unit": "%"}, {"name": "uniformity", "unit": "%"}],
            "files": [
                {
                    "path": os.path.join(data_dir, "line_a.csv"),
                    "format": "delimited-table",
                    "delimiter": ",",
                    "decimal_separator": ".",
                    "column_map": column_map,
                    "role_map": role_map,
                },
                {
                    "path": os.path.join(data_dir, "line_b.csv"),
                    "format": "delimited-table",
                    "delimiter": ";",
                    "decimal_separator": ",",
                    "column_map": column_map,
                    "role_map": role_map,
                },
            ],
        },
        "rules": [
            {"kind": "ratio", "column": "flow_total", "source": "flow", "value": 2.0, "tolerance": 1e-6},
            {"kind": "bound", "column": "time", "lo": 10.0, "hi": 120.0, "tolerance": 0.0},
        ],
        "cleaning": {},
        "selection": {"k_max": 12, "model": {"family": "rbf-kernel", "hyperparameters": {"ridge_lambda": 0.1}}},
        "surrogate": {"family": "rbf-kernel", "hyperparameters": {"ridge_lambda": 0.1}},
        "objectives": [
            {"output": "conversion", "direction": "maximize"},
            {"output": "uniformity", "direction": "maximize"},
        ],
        "optimizer": {
            "population": population,
            "iterations": iterations,
            "rho": 0.2,
            "sigma": 0.1,
            "archive_cap": 120,
        },
        "service": {"top_k_recipes": 10},
    }


def fixture_config_yaml(data_dir: str) -> str:
    import yaml

    return yaml.safe_dump(fixture_config_dict(data_dir), sort_keys=False)
