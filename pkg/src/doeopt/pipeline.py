"""End-to-end orchestration: ingest, clean, select, train, optimize, recipes.

A run lives in one directory of structured text artifacts (diff-able,
resumable, no database): every artifact is a deterministic function of
(raw data, config, seed), and the iteration log is append-only so the
dashboard can stream it with a cursor. Recipe reconstruction walks the
reduction ledger backwards to refill every original column of a reduced
optimizer solution.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import cleaning as cleaning_mod
from . import ingestion, moo, selection, surrogate
from .cleaning import (
    ConstraintRule,
    DroppedConstantColumn,
    DroppedCorrelatedColumn,
    DroppedUserExcluded,
    ReductionLedger,
    RuleBoundColumn,
)
from .config import PipelineConfig
from .core import Dataset, ParameterSpec, Value, dataset_from_dict, dataset_to_dict, derive_seed
from .errors import ContractViolation, StageError, ValidationError

STAGES = ("ingest", "clean", "select", "train", "optimize", "recipes")
STATUS_ORDER = ("created", "cleaning", "selecting", "training", "optimizing", "done")


# ---------------------------------------------------------------------------
# Deterministic artifact IO
# ---------------------------------------------------------------------------


def dumps_canonical(obj) -> str:
    """Stable JSON encoding: sorted keys, fixed separators, repr floats
    (shortest round-trip, <= 17 significant digits)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_artifact(run_dir: str, name: str, obj):
    path = os.path.join(run_dir, name)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        if name.endswith(".jsonl"):
            fh.write(obj)  # pre-rendered line document
        else:
            fh.write(dumps_canonical(obj))
            fh.write("\n")
    os.replace(tmp, path)


def read_artifact(run_dir: str, name: str):
    path = os.path.join(run_dir, name)
    with open(path) as fh:
        if name.endswith(".jsonl"):
            return fh.read()
        return json.load(fh)


def artifact_exists(run_dir: str, name: str) -> bool:
    return os.path.exists(os.path.join(run_dir, name))


# ---------------------------------------------------------------------------
# Run state
# ---------------------------------------------------------------------------


@dataclass
class RunState:
    run_id: str
    run_dir: str
    config: PipelineConfig
    status: str = "created"
    stage_error: Optional[str] = None
    raw_dataset: Optional[Dataset] = None
    cleaned: Optional[Dataset] = None
    ledger: Optional[ReductionLedger] = None
    ranking: Optional[selection.ImportanceRanking] = None
    curve: Optional[selection.SelectionCurve] = None
    model: Optional[surrogate.SurrogateModel] = None
    records: list[moo.IterationRecord] = field(default_factory=list)
    recipes: list[dict] = field(default_factory=list)
    steering_log: list[dict] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "run_id": self.run_id,
            "status": self.status,
            "stage_error": self.stage_error,
            "seed": self.config.seed,
            "objectives": [{"output": o.output, "direction": o.direction} for o in self.config.objectives],
            "n_iterations_done": len(self.records),
            "n_recipes": len(self.recipes),
            "final_features": self.curve.final_features if self.curve else None,
        }

    def persist_status(self):
        write_artifact(self.run_dir, "state.json", {
            "run_id": self.run_id,
            "status": self.status,
            "stage_error": self.stage_error,
            "seed": self.config.seed,
        })


def run_id_for(config: PipelineConfig) -> str:
    """Deterministic id: a content hash of (document, seed)."""
    import hashlib

    canon = dumps_canonical(config.raw)
    return "run-" + hashlib.blake2b(canon.encode(), digest_size=6).hexdigest()


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_ingest(state: RunState):
    cfg = state.config
    parsed = []
    reports = []
    for desc in cfg.sources:
        try:
            with open(desc.path, "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise StageError("ingest", f"cannot read source {desc.path!r}: {exc}") from exc
        rows, report = ingestion.parse_source(desc, data, cfg.parameters, cfg.outputs)
        parsed.append((rows, desc))
        reports.append(report.to_dict())
    state.raw_dataset = ingestion.homogenize(parsed, cfg.parameters, cfg.outputs)
    write_artifact(state.run_dir, "raw_dataset.json", dataset_to_dict(state.raw_dataset))
    write_artifact(state.run_dir, "ingest_reports.json", reports)


def stage_clean(state: RunState):
    cfg = state.config
    cleaned, ledger, violations = cleaning_mod.clean(
        state.raw_dataset, cfg.cleaning, objectives=cfg.objectives, rules=cfg.rules
    )
    state.cleaned = cleaned
    state.ledger = ledger
    write_artifact(state.run_dir, "cleaned_dataset.json", dataset_to_dict(cleaned))
    write_artifact(state.run_dir, "ledger.jsonl", ledger.to_jsonl())
    write_artifact(state.run_dir, "violations.json", [v.to_dict() for v in violations])


def stage_select(state: RunState, overrides_add: Sequence[str] = (), overrides_remove: Sequence[str] = ()):
    cfg = state.config
    ds = state.cleaned
    state.ranking = selection.rank_importance(ds, cfg.objectives)
    k_max = cfg.selection.k_max or len(ds.inputs)
    k_max = min(k_max, len(ds.inputs))
    model_config = dict(cfg.selection.model)
    model_config["outputs"] = cfg.objective_outputs()
    curve = selection.nested_rmse_curve(ds, state.ranking, model_config, k_max, derive_seed(cfg.seed, "select"))
    add = list(cfg.selection.overrides_add) + list(overrides_add)
    remove = list(cfg.selection.overrides_remove) + list(overrides_remove)
    if add or remove:
        curve = selection.apply_expert_overrides(curve, add, remove, ds.input_names)
    state.curve = curve
    # reduction bookkeeping: anything cleaned-but-not-final gets a ledgered
    # default so recipes can refill it. The cleaning ledger stays untouched in
    # ledger.jsonl; the extended one goes to reduction.jsonl, so re-running
    # this stage never duplicates entries.
    full = ReductionLedger(entries=list(state.ledger.entries))
    final = set(curve.final_features)
    for name in ds.input_names:
        if name in final:
            continue
        reason = "expert excluded" if name in curve.removed else f"not selected (chosen_k={curve.chosen_k})"
        full.append(
            DroppedUserExcluded(name=name, reason=reason, default_value=cleaning_mod._column_default(ds, name))
        )
    state.ledger = full
    write_artifact(state.run_dir, "ranking.json", state.ranking.to_dict())
    write_artifact(state.run_dir, "curve.json", curve.to_dict())
    write_artifact(state.run_dir, "reduction.jsonl", full.to_jsonl())


def stage_train(state: RunState):
    cfg = state.config
    features = state.curve.final_features
    if not features:
        raise StageError("train", "selection left no features")
    model = surrogate.train(
        state.cleaned,
        features=features,
        family=cfg.surrogate.family,
        hyperparameters=cfg.surrogate.hyperparameters,
        seed=derive_seed(cfg.seed, "train"),
        outputs=cfg.objective_outputs(),
    )
    ok, reasons = surrogate.screen(model, cfg.surrogate.screen_overfit_ratio, cfg.surrogate.screen_min_r2)
    write_artifact(state.run_dir, "screen.json", {"ok": ok, "reasons": reasons})
    if not ok and cfg.surrogate.screen_enforce:
        raise StageError("train", "model screening failed: " + "; ".join(reasons))
    state.model = model
    write_artifact(state.run_dir, "model.json", model.to_dict())


def _objective_stats(state: RunState) -> tuple[np.ndarray, np.ndarray]:
    """(worst, best) observed value per objective, orientation-aware."""
    ds = state.cleaned
    worst, best = [], []
    for obj in state.config.objectives:
        col = ds.output_column(obj.output)
        col = col[~np.isnan(col)]
        if obj.direction == "maximize":
            worst.append(float(col.min()))
            best.append(float(col.max()))
        else:
            worst.append(float(col.max()))
            best.append(float(col.min()))
    return np.array(worst), np.array(best)


def default_reference_point(state: RunState) -> list[float]:
    """5% beyond the worst observed experimental output, in the worse
    direction, fixed at run start."""
    worst, best = _objective_stats(state)
    ref = []
    for w, b, obj in zip(worst, best, state.config.objectives):
        span = abs(b - w) if b != w else max(abs(w), 1.0)
        sign = -1.0 if obj.direction == "maximize" else 1.0
        ref.append(w + sign * 0.05 * span)
    return ref


def build_optimizer_config(state: RunState) -> moo.OptimizerConfig:
    cfg = state.config
    opt = dict(cfg.optimizer)
    directions = tuple(o.direction for o in cfg.objectives)
    ref = opt.pop("reference_point", None)
    if ref is None:
        ref = default_reference_point(state)
    scale = opt.pop("wasserstein_scale", None)
    if scale is None:
        worst, best = _objective_stats(state)
        widths = np.abs(np.array(ref) - best)
        scale = [w if w > 0 else 1.0 for w in widths]
    return moo.OptimizerConfig(
        directions=directions,
        reference_point=tuple(ref),
        wasserstein_scale=tuple(scale),
        seed=derive_seed(cfg.seed, "optimize"),
        **opt,
    )


def experiment_seed_points(state: RunState) -> Optional[np.ndarray]:
    """Decision vectors of the nondominated cleaned experiments."""
    ds = state.cleaned
    model = state.model
    rows = []
    for r in ds.rows:
        vals = [r.inputs[ds.input_index(f)] for f in model.features]
        if any(v is None for v in vals):
            continue
        outs = [r.outputs[ds.output_index(o)] for o in state.config.objective_outputs()]
        if any(o is None for o in outs):
            continue
        rows.append((vals, outs))
    if not rows:
        return None
    ys = np.array([o for _, o in rows], dtype=float)
    nondom, _ = moo.pareto_filter(ys, tuple(o.direction for o in state.config.objectives))
    pts = [state.model.record.encode_inputs(rows[i][0]) for i in nondom]
    return np.clip(np.array(pts), 0.0, 1.0)


def stage_optimize(
    state: RunState,
    steering: Optional[moo.SteeringChannel] = None,
    on_iteration: Optional[Callable[[moo.IterationRecord], None]] = None,
    pause_wait: Optional[Callable[[], None]] = None,
):
    opt_config = build_optimizer_config(state)
    log_path = os.path.join(state.run_dir, "iterations.jsonl")
    events_path = os.path.join(state.run_dir, "events.jsonl")
    # truncate: the optimize stage is re-run as a unit
    open(log_path, "w").close()
    open(events_path, "w").close()

    def record_iteration(rec: moo.IterationRecord):
        state.records.append(rec)
        with open(log_path, "a") as fh:
            fh.write(dumps_canonical(rec.to_dict()) + "\n")
        if rec.steering:
            with open(events_path, "a") as fh:
                for ev in rec.steering:
                    entry = {"k_applied": rec.k, "event": ev}
                    state.steering_log.append(entry)
                    fh.write(dumps_canonical(entry) + "\n")
        if on_iteration is not None:
            on_iteration(rec)

    predict = state.model.predict_normalized
    if pause_wait is None and steering is not None:
        pause_wait = lambda: time.sleep(0.05)
    runner = moo.run(
        predict,
        state.model.record.n_coords,
        opt_config,
        steering=steering,
        seed_points=experiment_seed_points(state),
        on_iteration=record_iteration,
        pause_wait=pause_wait,
    )
    state.records = runner.records
    write_artifact(state.run_dir, "optimizer_config.json", {
        "population": opt_config.population,
        "iterations": opt_config.iterations,
        "rho": opt_config.rho,
        "sigma": opt_config.sigma,
        "crossover_prob": opt_config.crossover_prob,
        "directions": list(opt_config.directions),
        "reference_point": list(opt_config.reference_point),
        "archive_cap": opt_config.archive_cap,
        "wasserstein_order": opt_config.wasserstein_order,
        "wasserstein_scale": list(opt_config.wasserstein_scale),
        "seed": opt_config.seed,
    })


# ---------------------------------------------------------------------------
# Recipes
# ---------------------------------------------------------------------------


@dataclass
class Recipe:
    """Complete parameter assignment rebuilt from a reduced solution."""

    values: dict[str, Value]  # every ORIGINAL input column, native units
    flags: dict[str, str]  # column -> provenance note for non-optimized values
    predicted: dict[str, float]
    bands: dict[str, float]
    provenance: dict
    constraint_report: list[dict]
    valid: bool

    def to_dict(self) -> dict:
        return {
            "values": self.values,
            "flags": self.flags,
            "predicted": self.predicted,
            "bands": self.bands,
            "provenance": self.provenance,
            "constraint_report": self.constraint_report,
            "valid": self.valid,
        }


def reconstruct_recipe(
    reduced: dict[str, Value],
    ledger: ReductionLedger,
    rules: Sequence[ConstraintRule],
    input_specs: Sequence[ParameterSpec],
    provenance: Optional[dict] = None,
) -> Recipe:
    """Rebuild a full native-units assignment from the reduced vector.

    Walks the ledger in reverse: selection defaults first, then correlated
    columns from their affine relations, rule-bound columns from their rules,
    constants last. Every rule is re-validated; a violation marks the recipe
    invalid (it is returned either way, never swallowed).
    """
    values: dict[str, Value] = dict(reduced)
    flags: dict[str, str] = {}
    for entry in reversed(ledger.entries):
        if isinstance(entry, DroppedUserExcluded):
            if entry.name not in values:
                values[entry.name] = entry.default_value
                flags[entry.name] = f"default ({entry.reason})"
        elif isinstance(entry, DroppedCorrelatedColumn):
            if entry.kept not in values:
                raise ContractViolation(f"cannot restore {entry.name!r}: kept column {entry.kept!r} unknown")
            values[entry.name] = entry.a * float(values[entry.kept]) + entry.b
            flags[entry.name] = f"restored from {entry.kept} (affine)"
        elif isinstance(entry, RuleBoundColumn):
            rule = ConstraintRule.from_dict(entry.rule)
            solved = rule.solve(values)
            if solved is None:
                raise ContractViolation(f"cannot restore {entry.name!r}: rule source missing")
            values[entry.name] = solved
            flags[entry.name] = f"recomputed from rule {rule.expression()}"
        elif isinstance(entry, DroppedConstantColumn):
            values[entry.name] = entry.value
            flags[entry.name] = "constant column"
        # row-level and bounds entries do not affect a single recipe

    # integer parameters snap to whole units
    spec_by_name = {s.name: s for s in input_specs}
    for name, v in list(values.items()):
        spec = spec_by_name.get(name)
        if spec is not None and spec.kind == "integer" and v is not None:
            values[name] = float(round(float(v)))

    report = []
    valid = True
    for rule in rules:
        violation = rule.evaluate(values)
        ok = violation is None or violation <= rule.tolerance
        if not ok:
            valid = False
        report.append({
            "rule": rule.expression(),
            "violation": violation,
            "tolerance": rule.tolerance,
            "ok": ok,
        })
    missing = [s.name for s in input_specs if s.name not in values]
    if missing:
        raise ContractViolation(f"recipe incomplete, missing columns: {missing}")
    ordered = {s.name: values[s.name] for s in input_specs}
    return Recipe(
        values=ordered,
        flags=flags,
        predicted={},
        bands={},
        provenance=provenance or {},
        constraint_report=report,
        valid=valid,
    )


def hypervolume_contributions(front_y: np.ndarray, ref: Sequence[float], directions) -> np.ndarray:
    """Per-point hypervolume loss if removed; 0 for points outside the box."""
    total = moo.hypervolume_bounded(front_y, ref, directions)
    contrib = np.zeros(front_y.shape[0])
    for i in range(front_y.shape[0]):
        rest = np.delete(front_y, i, axis=0)
        rest_hv = moo.hypervolume_bounded(rest, ref, directions) if rest.shape[0] else 0.0
        contrib[i] = total - rest_hv
    return contrib


def stage_recipes(state: RunState):
    cfg = state.config
    if not state.records:
        raise StageError("recipes", "no optimizer iterations available")
    last = state.records[-1]
    front_x, front_y = last.front_x, last.front_y
    opt_cfg_doc = read_artifact(state.run_dir, "optimizer_config.json")
    ref = opt_cfg_doc["reference_point"]
    directions = tuple(o.direction for o in cfg.objectives)
    contrib = hypervolume_contributions(front_y, ref, directions)
    order = np.argsort(-contrib, kind="stable")
    top = order[: cfg.service.top_k_recipes]

    recipes = []
    for rank, idx in enumerate(top):
        x = front_x[int(idx)]
        native = state.model.record.decode_inputs(x)
        reduced = dict(zip(state.model.features, native))
        recipe = reconstruct_recipe(
            reduced,
            state.ledger,
            cfg.rules,
            state.raw_dataset.inputs,
            provenance={
                "run_id": state.run_id,
                "iteration": last.k,
                "archive_index": int(idx),
                "hypervolume_contribution": float(contrib[int(idx)]),
                "rank": rank,
            },
        )
        y, band = state.model.predict([reduced[f] for f in state.model.features], allow_extrapolation=True)
        recipe.predicted = dict(zip(state.model.output_names, (float(v) for v in y)))
        recipe.bands = dict(zip(state.model.output_names, (float(v) for v in band)))
        recipes.append(recipe.to_dict())
    state.recipes = recipes
    write_artifact(state.run_dir, "recipes.json", recipes)


# ---------------------------------------------------------------------------
# The whole pipeline
# ---------------------------------------------------------------------------


STAGE_STATUS = {
    "ingest": "cleaning",
    "clean": "cleaning",
    "select": "selecting",
    "train": "training",
    "optimize": "optimizing",
    "recipes": "optimizing",
}


def run_pipeline(
    config: PipelineConfig,
    run_dir: str,
    until: str = "recipes",
    resume: bool = True,
    steering: Optional[moo.SteeringChannel] = None,
    on_iteration: Optional[Callable[[moo.IterationRecord], None]] = None,
    selection_gate: Optional[Callable[[RunState], tuple[list[str], list[str]]]] = None,
    status_callback: Optional[Callable[[str], None]] = None,
    run_id_override: Optional[str] = None,
    pause_wait: Optional[Callable[[], None]] = None,
) -> RunState:
    """Execute stages through ``until``, resuming from persisted artifacts.

    ``selection_gate`` (used by the service's interactive mode) runs after
    cleaning and may return extra (add, remove) expert overrides; the engine
    blocks inside it until the user decides.
    """
    if until not in STAGES:
        raise ValidationError(f"unknown stage {until!r}")
    os.makedirs(run_dir, exist_ok=True)
    state = RunState(run_id=run_id_override or run_id_for(config), run_dir=run_dir, config=config)
    write_artifact(run_dir, "config.json", config.raw)

    def set_status(s: str):
        state.status = s
        state.persist_status()
        if status_callback is not None:
            status_callback(s)

    upto = STAGES.index(until)
    current = "ingest"
    try:
        current = "ingest"
        set_status("cleaning")
        if resume and artifact_exists(run_dir, "raw_dataset.json"):
            state.raw_dataset = dataset_from_dict(read_artifact(run_dir, "raw_dataset.json"))
        else:
            stage_ingest(state)
        if upto <= STAGES.index("ingest"):
            return state

        current = "clean"
        can_skip_clean = (
            resume
            and upto > STAGES.index("clean")
            and artifact_exists(run_dir, "cleaned_dataset.json")
            and artifact_exists(run_dir, "ledger.jsonl")
        )
        if can_skip_clean:
            state.cleaned = dataset_from_dict(read_artifact(run_dir, "cleaned_dataset.json"))
            state.ledger = ReductionLedger.from_jsonl(read_artifact(run_dir, "ledger.jsonl"))
        else:
            stage_clean(state)
        if upto <= STAGES.index("clean"):
            return state

        current = "select"
        set_status("selecting")
        extra_add: list[str] = []
        extra_remove: list[str] = []
        if selection_gate is not None:
            extra_add, extra_remove = selection_gate(state)
        stage_select(state, extra_add, extra_remove)
        if upto <= STAGES.index("select"):
            return state

        current = "train"
        set_status("training")
        stage_train(state)
        if upto <= STAGES.index("train"):
            return state

        current = "optimize"
        set_status("optimizing")
        stage_optimize(state, steering=steering, on_iteration=on_iteration, pause_wait=pause_wait)
        if upto <= STAGES.index("optimize"):
            return state

        current = "recipes"
        stage_recipes(state)
        set_status("done")
        return state
    except StageError as exc:
        state.status = "failed"
        state.stage_error = f"{exc.stage}: {exc.cause}"
        state.persist_status()
        raise
    except Exception as exc:  # noqa: BLE001 - every stage failure must land in state.json
        state.status = "failed"
        state.stage_error = f"{current}: {exc}"
        state.persist_status()
        raise


# ---------------------------------------------------------------------------
# Decision-space slices
# ---------------------------------------------------------------------------


def decision_slice(
    model: surrogate.SurrogateModel,
    axes: tuple[str, str],
    resolution: int,
    base: Sequence[Value],
    archive_x: Optional[np.ndarray] = None,
) -> dict:
    """resolution x resolution prediction grid over two features.

    Every cell carries the objective predictions at its center (computed by
    the same predict path as everything else) plus whether any archive point
    projects into the cell rectangle.
    """
    ax_x, ax_y = axes
    if ax_x == ax_y:
        raise ValidationError("decision_slice needs two distinct features")
    for ax in axes:
        if ax not in model.features:
            raise ValidationError(f"unknown feature {ax!r}")
    if resolution < 2:
        raise ValidationError("resolution must be >= 2")
    jx, jy = model.features.index(ax_x), model.features.index(ax_y)
    cx, cy = model.record.codecs[jx], model.record.codecs[jy]
    if cx.kind == "categorical" or cy.kind == "categorical":
        raise ValidationError("decision_slice axes must be numeric")
    xs = np.linspace(cx.lo, cx.hi, resolution)
    ys = np.linspace(cy.lo, cy.hi, resolution)

    slices = model.record.coord_slices()
    occupied = np.zeros((resolution, resolution), dtype=bool)
    if archive_x is not None and len(archive_x):
        ax_coords = np.asarray(archive_x)[:, slices[ax_x].start]
        ay_coords = np.asarray(archive_x)[:, slices[ax_y].start]
        ax_native = cx.lo + ax_coords * (cx.hi - cx.lo)
        ay_native = cy.lo + ay_coords * (cy.hi - cy.lo)
        half_w = (xs[1] - xs[0]) / 2.0
        half_h = (ys[1] - ys[0]) / 2.0
        for i, xv in enumerate(xs):
            for j, yv in enumerate(ys):
                hit = (np.abs(ax_native - xv) <= half_w) & (np.abs(ay_native - yv) <= half_h)
                occupied[i, j] = bool(hit.any())

    cells = []
    for i, xv in enumerate(xs):
        for j, yv in enumerate(ys):
            values = list(base)
            values[jx] = float(xv)
            values[jy] = float(yv)
            y, band = model.predict(values, allow_extrapolation=True)
            cells.append({
                "x": float(xv),
                "y": float(yv),
                "predicted": {n: float(v) for n, v in zip(model.output_names, y)},
                "band": {n: float(v) for n, v in zip(model.output_names, band)},
                "occupied": bool(occupied[i, j]),
            })
    return {
        "axes": {"x": ax_x, "y": ax_y},
        "resolution": resolution,
        "x_values": [float(v) for v in xs],
        "y_values": [float(v) for v in ys],
        "base": {f: base[k] for k, f in enumerate(model.features)},
        "cells": cells,
    }
