"""Multi-output surrogate models over the normalized input box.

One independent submodel per output (the dependencies between outputs are
deliberately not modeled; see the merit/Pareto machinery for how tradeoffs
are handled downstream). Three families:

  linear-ridge   closed-form ridge regression, lambda 1e-6
  rbf-kernel     Gaussian kernel ridge, median-distance bandwidth, lambda 1e-3
  mlp            fully-connected tanh net (2 x 32 default), full-batch
                 gradient descent (lr 0.1, halved at epochs 1000/1500,
                 2000 epochs), manual backprop

Inputs are encoded to [0, 1] coordinates and outputs z-scored through a
NormalizationRecord; every model carries it plus per-output train/test
metrics and the held-out residual spread that feeds the prediction bands.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    Dataset,
    MetricReport,
    NormalizationRecord,
    Value,
    adjusted_r2,
    normalization_record,
    r2_score,
    rmse,
    rng_for,
)
from .errors import (
    ContractViolation,
    ExtrapolationError,
    InvalidMeritError,
    TrainingDivergedError,
    ValidationError,
)

MODEL_SCHEMA = "model-v1"
FAMILIES = ("linear-ridge", "rbf-kernel", "mlp")

BAND_Z = 1.96  # two-sided 95% band over held-out residual spread
BOX_PAD = 0.1  # fraction of box width tolerated outside [0, 1] before extrapolation


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def flatten(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.weights] + [b.ravel() for b in self.biases])

    def assign_flat(self, flat: np.ndarray):
        pos = 0
        for w in self.weights:
            w[...] = flat[pos : pos + w.size].reshape(w.shape)
            pos += w.size
        for b in self.biases:
            b[...] = flat[pos : pos + b.size].reshape(b.shape)
            pos += b.size


@dataclass
class SubModel:
    """Trained regressor for one output, on z-scored targets."""

    family: str
    # linear-ridge
    coef: Optional[np.ndarray] = None
    intercept: float = 0.0
    # rbf-kernel
    x_train: Optional[np.ndarray] = None
    alpha: Optional[np.ndarray] = None
    bandwidth: float = 1.0
    # mlp
    mlp: Optional[MlpParams] = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.family == "linear-ridge":
            return X @ self.coef + self.intercept
        if self.family == "rbf-kernel":
            k = _rbf_kernel(X, self.x_train, self.bandwidth)
            return k @ self.alpha
        return _mlp_forward(self.mlp, X)[0][-1].ravel()


@dataclass
class SurrogateModel:
    family: str
    features: list[str]
    output_names: list[str]
    record: NormalizationRecord
    submodels: list[SubModel]
    metrics: list[MetricReport]
    residual_spread: list[float]  # per output, native units
    seed: int
    hyperparameters: dict = field(default_factory=dict)

    @property
    def n_model_features(self) -> int:
        """Number of encoded input coordinates the submodels consume."""
        return self.record.n_coords

    # -- prediction over normalized coordinates (the optimizer's view) ---

    def predict_normalized(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.record.n_coords:
            raise ContractViolation(f"expected {self.record.n_coords} coordinates, got {X.shape[1]}")
        Z = np.column_stack([sm.predict(X) for sm in self.submodels])
        return np.array([self.record.decode_outputs(z) for z in Z])

    # -- prediction in native units ---------------------------------------

    def predict(
        self, values: Sequence[Value], allow_extrapolation: bool = False
    ) -> tuple[np.ndarray, np.ndarray]:
        """Point prediction plus half-width uncertainty band per output.

        The band is constant-width: 1.96 x held-out residual spread. Inputs
        more than 10% of a box width outside the training box raise (or, when
        extrapolation is allowed, inflate the band x2).
        """
        x = self.record.encode_inputs(list(values))
        outside = (x < -BOX_PAD) | (x > 1.0 + BOX_PAD)
        extrapolating = bool(outside.any())
        if extrapolating and not allow_extrapolation:
            names = [self.record.coord_names()[i] for i in np.where(outside)[0]]
            raise ExtrapolationError(f"input outside the training box by >10% at {names}")
        y = self.predict_normalized(x[None, :])[0]
        band = np.array(self.residual_spread) * BAND_Z
        if extrapolating:
            band = band * 2.0
        return y, band

    def predict_slice(
        self, base: Sequence[Value], axis: str, n_steps: int, allow_extrapolation: bool = False
    ) -> list[tuple[float, np.ndarray, np.ndarray]]:
        """Sweep one feature across its full range, others frozen at base.

        Implemented as n_steps plain predict() calls so slice values can
        never drift from point predictions.
        """
        if axis not in self.features:
            raise ContractViolation(f"axis {axis!r} not in model features {self.features}")
        if n_steps < 2:
            raise ContractViolation("predict_slice needs n_steps >= 2")
        j = self.features.index(axis)
        codec = self.record.codecs[j]
        if codec.kind == "categorical":
            axis_values: list = list(codec.levels)[:n_steps]
        else:
            axis_values = list(np.linspace(codec.lo, codec.hi, n_steps))
        out = []
        for v in axis_values:
            values = list(base)
            values[j] = v
            y, band = self.predict(values, allow_extrapolation=allow_extrapolation)
            out.append((v, y, band))
        return out

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        subs = []
        for sm in self.submodels:
            d: dict = {"family": sm.family}
            if sm.family == "linear-ridge":
                d["coef"] = sm.coef.tolist()
                d["intercept"] = sm.intercept
            elif sm.family == "rbf-kernel":
                d["x_train"] = sm.x_train.tolist()
                d["alpha"] = sm.alpha.tolist()
                d["bandwidth"] = sm.bandwidth
            else:
                d["weights"] = [w.tolist() for w in sm.mlp.weights]
                d["biases"] = [b.tolist() for b in sm.mlp.biases]
            subs.append(d)
        return {
            "schema": MODEL_SCHEMA,
            "family": self.family,
            "features": self.features,
            "output_names": self.output_names,
            "record": self.record.to_dict(),
            "submodels": subs,
            "metrics": [m.__dict__ for m in self.metrics],
            "residual_spread": self.residual_spread,
            "seed": self.seed,
            "hyperparameters": self.hyperparameters,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SurrogateModel":
        if d.get("schema") != MODEL_SCHEMA:
            raise ValidationError(f"unknown model schema {d.get('schema')!r}")
        subs = []
        for s in d["submodels"]:
            fam = s["family"]
            if fam == "linear-ridge":
                subs.append(SubModel(family=fam, coef=np.array(s["coef"]), intercept=s["intercept"]))
            elif fam == "rbf-kernel":
                subs.append(
                    SubModel(
                        family=fam,
                        x_train=np.array(s["x_train"]),
                        alpha=np.array(s["alpha"]),
                        bandwidth=s["bandwidth"],
                    )
                )
            else:
                subs.append(
                    SubModel(
                        family=fam,
                        mlp=MlpParams(
                            weights=[np.array(w) for w in s["weights"]],
                            biases=[np.array(b) for b in s["biases"]],
                        ),
                    )
                )
        return cls(
            family=d["family"],
            features=list(d["features"]),
            output_names=list(d["output_names"]),
            record=NormalizationRecord.from_dict(d["record"]),
            submodels=subs,
            metrics=[MetricReport(**m) for m in d["metrics"]],
            residual_spread=list(d["residual_spread"]),
            seed=d["seed"],
            hyperparameters=d.get("hyperparameters", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "SurrogateModel":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Family internals
# ---------------------------------------------------------------------------


def _fit_linear_ridge(X: np.ndarray, y: np.ndarray, lam: float) -> SubModel:
    n, d = X.shape
    Xa = np.column_stack([X, np.ones(n)])
    penalty = lam * np.eye(d + 1)
    penalty[d, d] = 0.0  # intercept unpenalized
    w = np.linalg.solve(Xa.T @ Xa + penalty, Xa.T @ y)
    return SubModel(family="linear-ridge", coef=w[:d], intercept=float(w[d]))


def _rbf_kernel(A: np.ndarray, B: np.ndarray, bandwidth: float) -> np.ndarray:
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (2.0 * bandwidth * bandwidth))


def _median_bandwidth(X: np.ndarray) -> float:
    n = X.shape[0]
    if n < 2:
        return 1.0
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    dists = np.sqrt(d2[np.triu_indices(n, k=1)])
    med = float(np.median(dists))
    return med if med > 0 else 1.0


def _fit_kernel_ridge(X: np.ndarray, y: np.ndarray, lam: float, bandwidth: Optional[float]) -> SubModel:
    bw = bandwidth if bandwidth is not None else _median_bandwidth(X)
    K = _rbf_kernel(X, X, bw)
    alpha = np.linalg.solve(K + lam * np.eye(X.shape[0]), y)
    return SubModel(family="rbf-kernel", x_train=X.copy(), alpha=alpha, bandwidth=bw)


def _init_mlp(d_in: int, hidden: Sequence[int], rng: np.random.Generator) -> MlpParams:
    sizes = [d_in] + list(hidden) + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases)


def _mlp_forward(params: MlpParams, X: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Forward pass; returns (activations, pre-activations). Hidden layers
    are tanh, output is linear."""
    acts = [X]
    pres = []
    a = X
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        pres.append(z)
        a = z if i == last else np.tanh(z)
        acts.append(a)
    return acts, pres


def _mlp_backprop(params: MlpParams, X: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean-squared-error loss and its gradients w.r.t. every parameter."""
    n = X.shape[0]
    acts, pres = _mlp_forward(params, X)
    pred = acts[-1].ravel()
    err = pred - y
    loss = float(np.mean(err**2))
    delta = (2.0 / n) * err[:, None]  # dL/dz_out
    grads_w = [np.zeros_like(w) for w in params.weights]
    grads_b = [np.zeros_like(b) for b in params.biases]
    for i in reversed(range(len(params.weights))):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (1.0 - np.tanh(pres[i - 1]) ** 2)
    return loss, grads_w, grads_b


def _fit_mlp(X: np.ndarray, y: np.ndarray, hp: dict, rng: np.random.Generator, output_name: str) -> SubModel:
    hidden = hp.get("hidden_layers", [32, 32])
    epochs = int(hp.get("epochs", 2000))
    lr = float(hp.get("learning_rate", 0.1))
    decay_at = sorted(hp.get("decay_epochs", [1000, 1500]))
    params = _init_mlp(X.shape[1], hidden, rng)
    rate = lr
    for epoch in range(epochs):
        if epoch in decay_at:
            rate *= 0.5
        loss, grads_w, grads_b = _mlp_backprop(params, X, y)
        if not math.isfinite(loss):
            raise TrainingDivergedError(epoch, output_name)
        for w, g in zip(params.weights, grads_w):
            w -= rate * g
        for b, g in zip(params.biases, grads_b):
            b -= rate * g
    return SubModel(family="mlp", mlp=params)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def train_test_split(n: int, seed: int, test_fraction: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffled split; at least one test row."""
    rng = rng_for(seed, "split")
    idx = rng.permutation(n)
    n_test = max(1, int(round(test_fraction * n)))
    return np.sort(idx[n_test:]), np.sort(idx[:n_test])


def train(
    ds: Dataset,
    features: Sequence[str],
    family: str = "linear-ridge",
    hyperparameters: Optional[dict] = None,
    seed: int = 0,
    outputs: Optional[Sequence[str]] = None,
) -> SurrogateModel:
    """Fit one submodel per output on an 80/20 split of the cleaned rows.

    Rows missing any selected feature or any modeled output are excluded.
    Deterministic: identical (dataset, features, family, hyperparameters,
    seed) give bit-identical parameters.
    """
    if family not in FAMILIES:
        raise ValidationError(f"unknown surrogate family {family!r}; expected one of {FAMILIES}")
    if not features:
        raise ContractViolation("train needs a nonempty feature list")
    hp = dict(hyperparameters or {})
    output_names = list(outputs) if outputs else ds.output_names
    for name in output_names:
        ds.output_index(name)

    sub = ds.select_inputs(list(features))
    # drop rows missing a selected feature or a modeled output
    keep = []
    for r in sub.rows:
        if any(v is None for v in r.inputs):
            continue
        if any(r.outputs[sub.output_index(n)] is None for n in output_names):
            continue
        keep.append(r)
    sub = sub.with_rows(keep)
    if len(sub) < 10:
        raise ContractViolation(f"train needs >= 10 complete rows, have {len(sub)}")

    record = normalization_record(sub)
    X = record.encode_input_matrix([r.inputs for r in sub.rows])
    out_idx = {n: sub.output_index(n) for n in output_names}
    train_idx, test_idx = train_test_split(len(sub), seed)

    submodels: list[SubModel] = []
    metrics: list[MetricReport] = []
    spreads: list[float] = []
    p = record.n_coords
    for name in output_names:
        j = out_idx[name]
        std = record.output_stds[record.output_names.index(name)]
        y_nat = np.array([float(r.outputs[j]) for r in sub.rows])
        y = (y_nat - record.output_means[record.output_names.index(name)]) / std
        if family == "linear-ridge":
            sm = _fit_linear_ridge(X[train_idx], y[train_idx], float(hp.get("ridge_lambda", 1e-6)))
        elif family == "rbf-kernel":
            sm = _fit_kernel_ridge(
                X[train_idx], y[train_idx], float(hp.get("ridge_lambda", 1e-3)), hp.get("bandwidth")
            )
        else:
            sm = _fit_mlp(X[train_idx], y[train_idx], hp, rng_for(seed, "mlp", name), name)
        pred_train = sm.predict(X[train_idx]) * std + record.output_means[record.output_names.index(name)]
        pred_test = sm.predict(X[test_idx]) * std + record.output_means[record.output_names.index(name)]
        r2_tr = r2_score(pred_train, y_nat[train_idx])
        r2_te = r2_score(pred_test, y_nat[test_idx])
        adj = adjusted_r2(r2_te, len(test_idx), p) if len(test_idx) > p + 1 else r2_te
        metrics.append(
            MetricReport(
                rmse_train=rmse(pred_train, y_nat[train_idx]),
                rmse_test=rmse(pred_test, y_nat[test_idx]),
                r2_train=r2_tr,
                r2_test=r2_te,
                adjusted_r2_test=adj,
                n_train=len(train_idx),
                n_test=len(test_idx),
                n_features=p,
            )
        )
        residuals = pred_test - y_nat[test_idx]
        spreads.append(float(np.std(residuals)))
        submodels.append(sm)

    return SurrogateModel(
        family=family,
        features=list(features),
        output_names=output_names,
        record=record,
        submodels=submodels,
        metrics=metrics,
        residual_spread=spreads,
        seed=seed,
        hyperparameters=hp,
    )


# ---------------------------------------------------------------------------
# Screening, merit scalarization, gradient checking
# ---------------------------------------------------------------------------


def screen(model: SurrogateModel, overfit_ratio: float = 2.0, min_r2_test: float = 0.3) -> tuple[bool, list[str]]:
    """Overfit/underfit gate: reject when test RMSE runs away from train
    RMSE or held-out R2 is hopeless."""
    reasons = []
    for name, m in zip(model.output_names, model.metrics):
        if m.rmse_train > 0 and m.rmse_test > overfit_ratio * m.rmse_train:
            reasons.append(f"{name}: overfit (rmse_test {m.rmse_test:.4g} > {overfit_ratio} x rmse_train {m.rmse_train:.4g})")
        if m.r2_test < min_r2_test:
            reasons.append(f"{name}: underfit (r2_test {m.r2_test:.4g} < {min_r2_test})")
    return (not reasons), reasons


@dataclass(frozen=True)
class MeritFunction:
    """Signed weights collapsing the outputs to one score (+ maximize, - minimize)."""

    weights: tuple[float, ...]
    normalizations: Optional[tuple[tuple[float, float], ...]] = None  # (offset, scale) per output

    def __post_init__(self):
        if not any(w != 0.0 for w in self.weights):
            raise InvalidMeritError("merit function needs at least one nonzero weight")


def merit_scalarize(model: SurrogateModel, merit: MeritFunction) -> Callable[[np.ndarray], np.ndarray]:
    """Single-output view of the model: scalar(x) = sum_i w_i * norm_i(y_i(x)).

    Takes and returns normalized-coordinate batches like predict_normalized.
    """
    if len(merit.weights) != len(model.output_names):
        raise InvalidMeritError(
            f"merit has {len(merit.weights)} weights for {len(model.output_names)} outputs"
        )
    norms = merit.normalizations or tuple((0.0, 1.0) for _ in merit.weights)

    def scalar(X: np.ndarray) -> np.ndarray:
        Y = model.predict_normalized(X)
        total = np.zeros(Y.shape[0])
        for i, (w, (off, sc)) in enumerate(zip(merit.weights, norms)):
            total += w * ((Y[:, i] - off) / sc)
        return total

    return scalar


def gradient_check(model: SurrogateModel, x: np.ndarray, output_index: int = 0, h: float = 1e-5) -> float:
    """Max relative disagreement between backprop and central differences.

    Loss is the squared error of the chosen submodel against a zero target at
    the probe input; both gradient routes see the identical function.
    """
    sm = model.submodels[output_index]
    if sm.family != "mlp":
        raise ContractViolation("gradient_check applies to the mlp family")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.zeros(x.shape[0])
    _, grads_w, grads_b = _mlp_backprop(sm.mlp, x, y)
    analytic = np.concatenate([g.ravel() for g in grads_w] + [g.ravel() for g in grads_b])

    flat0 = sm.mlp.flatten()
    numeric = np.zeros_like(flat0)
    for i in range(flat0.size):
        for sign, slot in ((+1.0, 0), (-1.0, 1)):
            flat = flat0.copy()
            flat[i] += sign * h
            sm.mlp.assign_flat(flat)
            loss = float(np.mean((_mlp_forward(sm.mlp, x)[0][-1].ravel() - y) ** 2))
            if slot == 0:
                up = loss
            else:
                down = loss
        numeric[i] = (up - down) / (2.0 * h)
    sm.mlp.assign_flat(flat0)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
