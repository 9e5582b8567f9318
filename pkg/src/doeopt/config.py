"""Configuration document: one YAML file, eight sections, strict keys.

Sections: sources, rules, cleaning, selection, surrogate, objectives,
optimizer, service, plus a top-level seed. Every unknown key anywhere is an
error — silently ignored keys in a process-recipe tool are how experiments
get burned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import yaml

from .cleaning import CleaningConfig, ConstraintRule
from .core import ObjectiveSpec, OutputSpec, ParameterSpec
from .errors import ValidationError
from .ingestion import SourceFileDescriptor

_TOP_KEYS = {"seed", "sources", "rules", "cleaning", "selection", "surrogate", "objectives", "optimizer", "service"}


def _check_keys(d: dict, allowed: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ValidationError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass
class SelectionConfig:
    k_max: Optional[int] = None  # default: all cleaned inputs
    model: dict = field(default_factory=lambda: {"family": "linear-ridge"})
    overrides_add: list[str] = field(default_factory=list)
    overrides_remove: list[str] = field(default_factory=list)
    metric: str = "rmse_test"

    def validate(self):
        if self.k_max is not None and self.k_max < 1:
            raise ValidationError("selection.k_max must be >= 1")
        if self.metric not in ("rmse_test", "adjusted_r2"):
            raise ValidationError("selection.metric must be rmse_test or adjusted_r2")


@dataclass
class SurrogateConfig:
    family: str = "mlp"
    hyperparameters: dict = field(default_factory=dict)
    screen_overfit_ratio: float = 2.0
    screen_min_r2: float = 0.3
    screen_enforce: bool = True
    allow_extrapolation: bool = False


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8700
    interactive_selection: bool = False
    top_k_recipes: int = 10
    long_poll_timeout: float = 25.0


@dataclass
class PipelineConfig:
    seed: int
    parameters: list[ParameterSpec]
    outputs: list[OutputSpec]
    sources: list[SourceFileDescriptor]
    rules: list[ConstraintRule]
    cleaning: CleaningConfig
    selection: SelectionConfig
    surrogate: SurrogateConfig
    objectives: list[ObjectiveSpec]
    optimizer: dict  # raw optimizer section; moo.OptimizerConfig is built at run time
    service: ServiceConfig
    raw: dict = field(default_factory=dict)  # the parsed document, echoed into runs

    def objective_outputs(self) -> list[str]:
        return [o.output for o in self.objectives]


def parse_config(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ValidationError("config document must be a mapping")
    _check_keys(doc, _TOP_KEYS, "config")

    src = doc.get("sources") or {}
    _check_keys(src, {"parameters", "outputs", "files"}, "sources")
    parameters = []
    for p in src.get("parameters", []):
        _check_keys(p, {"name", "kind", "bounds", "levels", "unit"}, f"sources.parameters[{p.get('name')}]")
        parameters.append(
            ParameterSpec(
                name=p["name"],
                kind=p.get("kind", "continuous"),
                bounds=tuple(p["bounds"]) if p.get("bounds") else None,
                levels=tuple(p["levels"]) if p.get("levels") else None,
                unit=p.get("unit", ""),
            )
        )
    if not parameters:
        raise ValidationError("sources.parameters must list at least one input parameter")
    outputs = []
    for o in src.get("outputs", []):
        _check_keys(o, {"name", "unit"}, "sources.outputs")
        outputs.append(OutputSpec(name=o["name"], unit=o.get("unit", "")))
    if not outputs:
        raise ValidationError("sources.outputs must list at least one output")
    sources = []
    for f in src.get("files", []):
        _check_keys(
            f,
            {"path", "format", "delimiter", "decimal_separator", "quote_char", "column_map", "role_map", "source_id"},
            "sources.files",
        )
        sources.append(SourceFileDescriptor(**f))
    if not sources:
        raise ValidationError("sources.files must list at least one file")

    rules = [ConstraintRule.from_dict(r) for r in doc.get("rules", []) or []]

    cl = doc.get("cleaning") or {}
    _check_keys(
        cl,
        {"correlation_threshold", "outlier_z_threshold", "replicate_tolerance", "replicate_aggregation", "strict_rules", "min_rows", "excluded_columns"},
        "cleaning",
    )
    cleaning = CleaningConfig(**cl)
    cleaning.validate()

    sel = doc.get("selection") or {}
    _check_keys(sel, {"k_max", "model", "overrides", "metric"}, "selection")
    overrides = sel.get("overrides") or {}
    _check_keys(overrides, {"add", "remove"}, "selection.overrides")
    model = sel.get("model") or {"family": "linear-ridge"}
    _check_keys(model, {"family", "hyperparameters"}, "selection.model")
    selection = SelectionConfig(
        k_max=sel.get("k_max"),
        model=model,
        overrides_add=list(overrides.get("add", [])),
        overrides_remove=list(overrides.get("remove", [])),
        metric=sel.get("metric", "rmse_test"),
    )
    selection.validate()

    sur = doc.get("surrogate") or {}
    _check_keys(
        sur,
        {"family", "hyperparameters", "screen_overfit_ratio", "screen_min_r2", "screen_enforce", "allow_extrapolation"},
        "surrogate",
    )
    surrogate_cfg = SurrogateConfig(**sur)

    objectives = []
    for o in doc.get("objectives", []) or []:
        _check_keys(o, {"output", "direction", "target_window"}, "objectives")
        objectives.append(
            ObjectiveSpec(
                output=o["output"],
                direction=o.get("direction", "maximize"),
                target_window=tuple(o["target_window"]) if o.get("target_window") else None,
            )
        )
    if not objectives:
        raise ValidationError("objectives section must name at least one objective")
    output_names = {o.name for o in outputs}
    for o in objectives:
        if o.output not in output_names:
            raise ValidationError(f"objective references unknown output {o.output!r}")
    if len(objectives) not in (2, 3):
        raise ValidationError("the Pareto optimizer needs 2 or 3 objectives")

    opt = dict(doc.get("optimizer") or {})
    _check_keys(
        opt,
        {"population", "iterations", "rho", "sigma", "crossover_prob", "sbx_eta", "reference_point", "archive_cap", "wasserstein_order", "wasserstein_scale", "convergence_samples"},
        "optimizer",
    )

    svc = doc.get("service") or {}
    _check_keys(svc, {"host", "port", "interactive_selection", "top_k_recipes", "long_poll_timeout"}, "service")
    service = ServiceConfig(**svc)

    seed = doc.get("seed")
    if seed is None:
        raise ValidationError("config needs a top-level seed")

    return PipelineConfig(
        seed=int(seed),
        parameters=parameters,
        outputs=outputs,
        sources=sources,
        rules=rules,
        cleaning=cleaning,
        selection=selection,
        surrogate=surrogate_cfg,
        objectives=objectives,
        optimizer=opt,
        service=service,
        raw=doc,
    )


def load_config(path: str) -> PipelineConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return parse_config(doc)
