import numpy as np
import pytest

from doeopt.core import Dataset, ExperimentRow, OutputSpec, ParameterSpec


def make_dataset(X, Y, input_names=None, output_names=None, bounds=None, sources=None):
    """Numeric dataset from plain arrays; bounds default to the observed
    range padded a little so nothing sits exactly on an edge."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d = X.shape
    input_names = input_names or [f"x{j+1}" for j in range(d)]
    output_names = output_names or [f"y{j+1}" for j in range(Y.shape[1])]
    specs = []
    for j, name in enumerate(input_names):
        if bounds and name in bounds:
            lo, hi = bounds[name]
        else:
            lo, hi = float(X[:, j].min()), float(X[:, j].max())
            pad = max(1e-6, 0.05 * (hi - lo))
            lo, hi = lo - pad, hi + pad
        specs.append(ParameterSpec(name=name, kind="continuous", bounds=(lo, hi)))
    rows = tuple(
        ExperimentRow(
            row_id=i,
            inputs=tuple(float(v) for v in X[i]),
            outputs=tuple(float(v) for v in Y[i]),
            source=(sources[i] if sources else "test"),
        )
        for i in range(n)
    )
    return Dataset(inputs=tuple(specs), outputs=tuple(OutputSpec(n) for n in output_names), rows=rows)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
