"""Input-parameter ranking and subset selection.

Two complementary routes: a cheap correlation-based importance ranking that
feeds nested-model RMSE curves (train a fresh surrogate on the top-k ranked
features for k = 1..k_max and look for the sharp-drop-then-plateau shape),
and an exhaustive subset search for when the candidate pool is small enough
to afford it. Expert add/remove overrides are applied on top of whichever
route picked the automatic subset.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Dataset, ObjectiveSpec, adjusted_r2, derive_seed
from .errors import BudgetExceededError, ContractViolation, DoeOptError

CHOSEN_K_SLACK = 0.02  # chosen_k = smallest k within 2% of the minimum test RMSE


@dataclass(frozen=True)
class ImportanceRanking:
    """Inputs ordered by explanatory power, top score normalized to 1."""

    entries: tuple[tuple[str, float], ...]  # (name, score), descending
    sub_scores: dict[str, dict[str, float]] = field(default_factory=dict)  # name -> output -> |r|

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.entries]

    def top(self, k: int) -> list[str]:
        return self.names[:k]

    def to_dict(self) -> dict:
        return {
            "entries": [{"name": n, "score": s, "per_output": self.sub_scores.get(n, {})} for n, s in self.entries],
        }


@dataclass
class CurvePoint:
    k: int
    features: list[str]
    rmse_train: Optional[float]
    rmse_test: Optional[float]
    adjusted_r2_test: Optional[float]
    failed: bool = False

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "features": self.features,
            "rmse_train": self.rmse_train,
            "rmse_test": self.rmse_test,
            "adjusted_r2_test": self.adjusted_r2_test,
            "failed": self.failed,
        }


@dataclass
class SelectionCurve:
    points: list[CurvePoint]
    chosen_k: int
    chosen_features: list[str]
    added: list[str] = field(default_factory=list)
    removed: list[str] = field(default_factory=list)

    @property
    def final_features(self) -> list[str]:
        final = [f for f in self.chosen_features if f not in self.removed]
        final += [a for a in self.added if a not in final]
        return final

    def to_dict(self) -> dict:
        return {
            "points": [p.to_dict() for p in self.points],
            "chosen_k": self.chosen_k,
            "chosen_features": self.chosen_features,
            "added": self.added,
            "removed": self.removed,
            "final_features": self.final_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionCurve":
        return cls(
            points=[
                CurvePoint(
                    k=p["k"],
                    features=p["features"],
                    rmse_train=p["rmse_train"],
                    rmse_test=p["rmse_test"],
                    adjusted_r2_test=p["adjusted_r2_test"],
                    failed=p.get("failed", False),
                )
                for p in d["points"]
            ],
            chosen_k=d["chosen_k"],
            chosen_features=d["chosen_features"],
            added=d.get("added", []),
            removed=d.get("removed", []),
        )


# ---------------------------------------------------------------------------
# Ranking
# ---------------------------------------------------------------------------


def _input_as_numeric_columns(ds: Dataset, name: str) -> list[np.ndarray]:
    """Numeric view(s) of an input column: one array for numeric kinds, one
    0/1 indicator per level for categorical kinds."""
    spec = ds.input_spec(name)
    if spec.is_numeric:
        return [ds.numeric_input_column(name)]
    raw = ds.input_column(name)
    cols = []
    for lv in spec.levels:
        cols.append(np.array([math.nan if v is None else float(v == lv) for v in raw]))
    return cols


def _abs_pearson(x: np.ndarray, y: np.ndarray) -> float:
    ok = ~(np.isnan(x) | np.isnan(y))
    if ok.sum() < 3:
        return 0.0
    xs, ys = x[ok], y[ok]
    sx, sy = xs.std(), ys.std()
    if sx == 0.0:
        raise ContractViolation("zero-variance input survived cleaning")
    if sy == 0.0:
        return 0.0
    return abs(float(np.mean((xs - xs.mean()) * (ys - ys.mean())) / (sx * sy)))


def rank_importance(ds: Dataset, objectives: Sequence[ObjectiveSpec]) -> ImportanceRanking:
    """Rank inputs by max-over-objectives |Pearson r|, scaled so top = 1.

    Ties keep canonical column order. Deterministic: no sampling involved.
    """
    if len(ds) < 10:
        raise ContractViolation("rank_importance needs >= 10 rows")
    outputs = [o.output for o in objectives] if objectives else ds.output_names
    ycols = {name: ds.output_column(name) for name in outputs}
    sub_scores: dict[str, dict[str, float]] = {}
    raw_scores: list[tuple[str, float]] = []
    for spec in ds.inputs:
        xcols = _input_as_numeric_columns(ds, spec.name)
        per_output = {}
        for name, y in ycols.items():
            per_output[name] = max(_abs_pearson(x, y) for x in xcols)
        sub_scores[spec.name] = per_output
        raw_scores.append((spec.name, max(per_output.values())))
    top = max(s for _, s in raw_scores)
    if top > 0:
        snap = lambda s: 1.0 if abs(s / top - 1.0) < 1e-9 else s / top
        raw_scores = [(n, snap(s)) for n, s in raw_scores]
        sub_scores = {n: {o: snap(v) for o, v in d.items()} for n, d in sub_scores.items()}
    order = {name: i for i, name in enumerate(ds.input_names)}
    # rounded sort key so float-ulp near-ties still break by canonical order
    ranked = sorted(raw_scores, key=lambda t: (-round(t[1], 12), order[t[0]]))
    return ImportanceRanking(entries=tuple(ranked), sub_scores=sub_scores)


# ---------------------------------------------------------------------------
# Nested-model curve
# ---------------------------------------------------------------------------


def _fit_and_score(ds: Dataset, features: list[str], model_config: dict, seed: int) -> tuple[float, float, float]:
    """Train one surrogate and return (rmse_train, rmse_test, adj_r2_test).

    Multi-output models aggregate as the mean of per-output RMSEs scaled by
    that output's training spread, so no single unit dominates the curve.
    """
    from . import surrogate

    model = surrogate.train(
        ds,
        features=features,
        family=model_config.get("family", "linear-ridge"),
        hyperparameters=model_config.get("hyperparameters", {}),
        seed=seed,
        outputs=model_config.get("outputs"),
    )
    scales = [max(s, 1e-12) for s in model.record.output_stds]
    rmse_train = float(np.mean([m.rmse_train / s for m, s in zip(model.metrics, scales)]))
    rmse_test = float(np.mean([m.rmse_test / s for m, s in zip(model.metrics, scales)]))
    r2_test = float(np.mean([m.r2_test for m in model.metrics]))
    n_test = model.metrics[0].n_test
    p = model.n_model_features
    adj = adjusted_r2(r2_test, n_test, p) if n_test > p + 1 else r2_test
    return rmse_train, rmse_test, adj


def nested_rmse_curve(
    ds: Dataset,
    ranking: ImportanceRanking,
    model_config: dict,
    k_max: int,
    seed: int,
) -> SelectionCurve:
    """Train nested models on the top-k ranked features for k = 1..k_max.

    All points share one deterministic 80/20 split (derived from the seed)
    so the curve is comparable across k; chosen_k is the smallest k whose
    test RMSE lands within 2% of the curve minimum.
    """
    if k_max < 1 or k_max > len(ranking.entries):
        raise ContractViolation(f"k_max must be in 1..{len(ranking.entries)}")
    points: list[CurvePoint] = []
    for k in range(1, k_max + 1):
        features = ranking.top(k)
        try:
            rmse_train, rmse_test, adj = _fit_and_score(ds, features, model_config, derive_seed(seed, "nested"))
            points.append(CurvePoint(k=k, features=features, rmse_train=rmse_train, rmse_test=rmse_test, adjusted_r2_test=adj))
        except DoeOptError:
            points.append(CurvePoint(k=k, features=features, rmse_train=None, rmse_test=None, adjusted_r2_test=None, failed=True))
    usable = [p for p in points if not p.failed]
    if not usable:
        raise ContractViolation("every nested model failed to train")
    best = min(p.rmse_test for p in usable)
    chosen = next(p for p in usable if p.rmse_test <= best * (1.0 + CHOSEN_K_SLACK))
    return SelectionCurve(points=points, chosen_k=chosen.k, chosen_features=list(chosen.features))


# ---------------------------------------------------------------------------
# Exhaustive search
# ---------------------------------------------------------------------------


def exhaustive_search(
    ds: Dataset,
    candidates: Sequence[str],
    subset_sizes: Sequence[int],
    model_config: dict,
    seed: int,
    budget: int = 2000,
) -> list[tuple[list[str], float]]:
    """Score every candidate subset in the size range by test RMSE.

    Refuses upfront when the enumeration exceeds the fit budget — run the
    ranking first to shrink the pool. Returns (subset, score) sorted
    ascending by score, ties by subset order.
    """
    for name in candidates:
        ds.input_index(name)  # raises on unknown
    sizes = sorted(set(subset_sizes))
    if not sizes or sizes[0] < 1 or sizes[-1] > len(candidates):
        raise ContractViolation("subset sizes out of range")
    required = sum(math.comb(len(candidates), s) for s in sizes)
    if required > budget:
        raise BudgetExceededError(required, budget)
    results: list[tuple[list[str], float]] = []
    for size in sizes:
        for combo in itertools.combinations(candidates, size):
            features = list(combo)
            try:
                _, rmse_test, _ = _fit_and_score(
                    ds, features, model_config, derive_seed(seed, "subset", ",".join(features))
                )
                results.append((features, rmse_test))
            except DoeOptError:
                continue
    results.sort(key=lambda t: (t[1], t[0]))
    return results


def apply_expert_overrides(curve: SelectionCurve, add: Sequence[str], remove: Sequence[str], valid_names: Sequence[str]) -> SelectionCurve:
    """Apply expert add/remove lists on top of the automatic choice.

    Set semantics: adding an already-chosen name or removing twice is a
    no-op; the curve records the overrides but no retraining happens here.
    """
    valid = set(valid_names)
    for name in list(add) + list(remove):
        if name not in valid:
            raise ContractViolation(f"unknown feature {name!r}; valid names: {sorted(valid)}")
    for name in remove:
        if name not in curve.chosen_features and name not in curve.added:
            raise ContractViolation(f"cannot remove {name!r}: not currently selected")
    new_removed = sorted(set(curve.removed) | set(remove))
    new_added = sorted((set(curve.added) | set(add)) - set(new_removed))
    new_added = [a for a in new_added if a not in curve.chosen_features]
    return SelectionCurve(
        points=curve.points,
        chosen_k=curve.chosen_k,
        chosen_features=curve.chosen_features,
        added=new_added,
        removed=new_removed,
    )
