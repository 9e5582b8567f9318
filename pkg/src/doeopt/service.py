"""HTTP/JSON API (v1) the dashboard consumes.

One directory per run under the store root; artifacts on disk are the source
of truth (the registry only holds live worker threads, steering channels and
override gates). Mutations are serialized per run; reads are plain snapshot
reads of atomically-written files. Iteration records stream through a
cursor-based long-poll over the append-only iteration log.

Floats travel as JSON numbers (repr round-trip, <= 17 significant digits);
NaN/Inf never appear on the wire — they are replaced by null and the path is
listed under "nonfinite_paths".
"""

from __future__ import annotations

import json
import math
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import moo, pipeline
from .config import parse_config
from .errors import DoeOptError, ValidationError

API_PREFIX = "/api/v1"


# ---------------------------------------------------------------------------
# Wire-format hygiene
# ---------------------------------------------------------------------------


def sanitize(obj, path: str = "$", bad: Optional[list] = None):
    """Replace non-finite floats with null, recording their paths."""
    if bad is None:
        bad = []
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            bad.append(path)
            return None, bad
        return obj, bad
    if isinstance(obj, dict):
        return {k: sanitize(v, f"{path}.{k}", bad)[0] for k, v in obj.items()}, bad
    if isinstance(obj, (list, tuple)):
        return [sanitize(v, f"{path}[{i}]", bad)[0] for i, v in enumerate(obj)], bad
    return obj, bad


def reply(payload: dict, status_code: int = 200) -> JSONResponse:
    clean, bad = sanitize(payload)
    if bad:
        clean["nonfinite_paths"] = bad
    return JSONResponse(content=clean, status_code=status_code)


# ---------------------------------------------------------------------------
# Run registry
# ---------------------------------------------------------------------------


@dataclass
class RunHandle:
    run_id: str
    run_dir: str
    status: str = "created"
    error: Optional[str] = None
    thread: Optional[threading.Thread] = None
    channel: moo.SteeringChannel = field(default_factory=moo.SteeringChannel)
    lock: threading.Lock = field(default_factory=threading.Lock)
    overrides_add: list = field(default_factory=list)
    overrides_remove: list = field(default_factory=list)
    overrides_event: threading.Event = field(default_factory=threading.Event)
    latest_k: int = 0
    new_record: threading.Condition = field(default_factory=threading.Condition)
    parked: threading.Event = field(default_factory=threading.Event)

    def summary(self) -> dict:
        return {
            "run_id": self.run_id,
            "status": self.status,
            "error": self.error,
            "latest_k": self.latest_k,
            "parked": self.parked.is_set(),
        }


class RunStore:
    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)
        self._lock = threading.Lock()
        self.runs: dict[str, RunHandle] = {}
        self._counter = 0
        # pick up persisted runs from a previous service process
        for name in sorted(os.listdir(root)):
            state_path = os.path.join(root, name, "state.json")
            if not os.path.isfile(state_path):
                continue
            with open(state_path) as fh:
                st = json.load(fh)
            handle = RunHandle(run_id=name, run_dir=os.path.join(root, name))
            handle.status = st.get("status", "created")
            handle.error = st.get("stage_error")
            handle.latest_k = _count_iterations(handle.run_dir)
            self.runs[name] = handle
            self._counter += 1

    def create(self, config_doc: dict, interactive: Optional[bool] = None) -> RunHandle:
        config = parse_config(config_doc)
        with self._lock:
            self._counter += 1
            run_id = f"run{self._counter:04d}"
            run_dir = os.path.join(self.root, run_id)
            handle = RunHandle(run_id=run_id, run_dir=run_dir)
            self.runs[run_id] = handle
        use_gate = config.service.interactive_selection if interactive is None else interactive

        def on_iteration(rec: moo.IterationRecord):
            handle.latest_k = rec.k
            handle.parked.clear()
            with handle.new_record:
                handle.new_record.notify_all()

        def status_callback(status: str):
            handle.status = status

        def selection_gate(state):
            handle.status = "selecting"
            handle.overrides_event.wait()
            return list(handle.overrides_add), list(handle.overrides_remove)

        def pause_wait():
            # the optimizer thread is sitting at an iteration boundary
            handle.parked.set()
            time.sleep(0.02)

        def worker():
            try:
                pipeline.run_pipeline(
                    config,
                    run_dir,
                    steering=handle.channel,
                    on_iteration=on_iteration,
                    selection_gate=selection_gate if use_gate else None,
                    status_callback=status_callback,
                    run_id_override=run_id,
                    pause_wait=pause_wait,
                )
                handle.status = "done"
            except Exception as exc:  # noqa: BLE001 - workers must never die silently
                handle.status = "failed"
                handle.error = str(exc)
            finally:
                with handle.new_record:
                    handle.new_record.notify_all()

        handle.thread = threading.Thread(target=worker, name=f"doeopt-{run_id}", daemon=True)
        handle.thread.start()
        return handle

    def get(self, run_id: str) -> RunHandle:
        handle = self.runs.get(run_id)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"no run {run_id!r}")
        return handle

    def list(self) -> list[dict]:
        return [self.runs[k].summary() for k in sorted(self.runs)]


def _count_iterations(run_dir: str) -> int:
    path = os.path.join(run_dir, "iterations.jsonl")
    if not os.path.isfile(path):
        return 0
    count = 0
    with open(path) as fh:
        for line in fh:
            if line.strip():
                count += 1
    return count


def _read_iterations(run_dir: str, after: int) -> list[dict]:
    path = os.path.join(run_dir, "iterations.jsonl")
    if not os.path.isfile(path):
        return []
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue  # partially-flushed tail line
            if rec.get("k", 0) > after:
                out.append(rec)
    return out


def _artifact_or_409(handle: RunHandle, name: str, needs: str):
    if not pipeline.artifact_exists(handle.run_dir, name):
        raise HTTPException(status_code=409, detail=f"run {handle.run_id} has no {needs} yet (status {handle.status})")
    return pipeline.read_artifact(handle.run_dir, name)


def _load_model(handle: RunHandle):
    from .surrogate import SurrogateModel

    doc = _artifact_or_409(handle, "model.json", "trained model")
    return SurrogateModel.from_dict(doc)


# ---------------------------------------------------------------------------
# App factory
# ---------------------------------------------------------------------------


def create_app(store_root: str) -> FastAPI:
    app = FastAPI(title="doeopt", version="1")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = RunStore(store_root)
    app.state.store = store

    @app.exception_handler(DoeOptError)
    async def _domain_error(request: Request, exc: DoeOptError):
        code = 400 if isinstance(exc, ValidationError) else 422
        return JSONResponse(status_code=code, content={"detail": str(exc)})

    @app.post(f"{API_PREFIX}/runs")
    def create_run(body: dict):
        config_doc = body.get("config")
        if config_doc is None:
            raise HTTPException(status_code=400, detail="body must carry a 'config' document")
        handle = store.create(config_doc)
        return reply({"run_id": handle.run_id}, status_code=201)

    @app.get(f"{API_PREFIX}/runs")
    def list_runs():
        return reply({"runs": store.list()})

    @app.get(f"{API_PREFIX}/runs/{{run_id}}")
    def get_run(run_id: str):
        handle = store.get(run_id)
        doc = handle.summary()
        if pipeline.artifact_exists(handle.run_dir, "curve.json"):
            curve = pipeline.read_artifact(handle.run_dir, "curve.json")
            doc["final_features"] = curve["final_features"]
        if pipeline.artifact_exists(handle.run_dir, "optimizer_config.json"):
            doc["optimizer"] = pipeline.read_artifact(handle.run_dir, "optimizer_config.json")
        if pipeline.artifact_exists(handle.run_dir, "screen.json"):
            doc["screen"] = pipeline.read_artifact(handle.run_dir, "screen.json")
        return reply(doc)

    @app.get(f"{API_PREFIX}/runs/{{run_id}}/curve")
    def get_curve(run_id: str):
        handle = store.get(run_id)
        curve = _artifact_or_409(handle, "curve.json", "selection curve")
        doc = {"curve": curve}
        if pipeline.artifact_exists(handle.run_dir, "ranking.json"):
            doc["ranking"] = pipeline.read_artifact(handle.run_dir, "ranking.json")
        return reply(doc)

    @app.get(f"{API_PREFIX}/runs/{{run_id}}/front")
    def get_front(run_id: str, k: Optional[int] = Query(default=None)):
        handle = store.get(run_id)
        records = _read_iterations(handle.run_dir, 0)
        if not records:
            raise HTTPException(status_code=409, detail="no iterations yet")
        if k is None:
            rec = records[-1]
        else:
            matches = [r for r in records if r["k"] == k]
            if not matches:
                raise HTTPException(status_code=404, detail=f"no iteration k={k}")
            rec = matches[0]
        model = _load_model(handle)
        points = []
        for idx, (x, y) in enumerate(zip(rec["front_x"], rec["front_y"])):
            native = model.record.decode_inputs(x)
            points.append(
                {
                    "index": idx,
                    "x": dict(zip(model.features, native)),
                    "y": dict(zip(model.output_names, y)),
                }
            )
        candidates = [
            {"y": dict(zip(model.output_names, y))} for y in rec["candidates_y"]
        ]
        return reply(
            {
                "k": rec["k"],
                "points": points,
                "candidates": candidates,
                "directions": [o["direction"] for o in _objectives(handle)],
                "outputs": model.output_names,
            }
        )

    @app.get(f"{API_PREFIX}/runs/{{run_id}}/metrics")
    def get_metrics(run_id: str):
        handle = store.get(run_id)
        records = _read_iterations(handle.run_dir, 0)
        series = [
            {
                "k": r["k"],
                "hypervolume": r["hypervolume"],
                "hypervolume_failed": r.get("hypervolume_failed"),
                "spacing": r["spacing"],
                "wasserstein_to_previous": r["wasserstein_to_previous"],
                "rho": r["rho"],
                "sigma": r["sigma"],
                "convergence_diagnostic": r.get("convergence_diagnostic"),
                "front_size": len(r["front_y"]),
            }
            for r in records
        ]
        return reply({"series": series})

    @app.get(f"{API_PREFIX}/runs/{{run_id}}/iterations")
    def get_iterations(run_id: str, after: int = Query(default=0), wait: float = Query(default=0.0)):
        handle = store.get(run_id)
        deadline = time.monotonic() + min(wait, 25.0)
        records = _read_iterations(handle.run_dir, after)
        while not records and time.monotonic() < deadline and handle.status in ("created", "cleaning", "selecting", "training", "optimizing", "paused"):
            with handle.new_record:
                handle.new_record.wait(timeout=0.2)
            records = _read_iterations(handle.run_dir, after)
        return reply({"records": records, "latest_k": handle.latest_k, "status": handle.status})

    @app.post(f"{API_PREFIX}/runs/{{run_id}}/steer")
    def steer(run_id: str, body: dict):
        handle = store.get(run_id)
        allowed = {"rho", "sigma", "pause", "resume", "stop"}
        unknown = set(body) - allowed
        if unknown:
            raise HTTPException(status_code=400, detail=f"unknown steering keys: {sorted(unknown)}")
        with handle.lock:
            if handle.status not in ("optimizing", "paused"):
                raise HTTPException(
                    status_code=409,
                    detail=f"run {run_id} is {handle.status}; steering applies only while optimizing",
                )
            rho = body.get("rho")
            sigma = body.get("sigma")
            if rho is not None and not (0.0 <= float(rho) <= 1.0):
                raise HTTPException(status_code=400, detail="rho must be in [0, 1]")
            if sigma is not None and float(sigma) <= 0:
                raise HTTPException(status_code=400, detail="sigma must be > 0")
            event = moo.SteeringEvent(
                rho=float(rho) if rho is not None else None,
                sigma=float(sigma) if sigma is not None else None,
                pause=bool(body.get("pause", False)),
                resume=bool(body.get("resume", False)),
                stop=bool(body.get("stop", False)),
            )
            handle.channel.post(event)
            if event.pause:
                handle.status = "paused"
            if event.resume:
                handle.status = "optimizing"
                handle.parked.clear()
        return reply({"accepted": True, "applies_from_k": handle.latest_k + 1})

    @app.post(f"{API_PREFIX}/runs/{{run_id}}/overrides")
    def overrides(run_id: str, body: dict):
        handle = store.get(run_id)
        unknown = set(body) - {"add", "remove"}
        if unknown:
            raise HTTPException(status_code=400, detail=f"unknown override keys: {sorted(unknown)}")
        with handle.lock:
            if handle.status not in ("created", "cleaning", "selecting"):
                raise HTTPException(
                    status_code=409,
                    detail=f"run {run_id} is {handle.status}; overrides are valid only before training",
                )
            handle.overrides_add = list(body.get("add", []))
            handle.overrides_remove = list(body.get("remove", []))
            handle.overrides_event.set()
        return reply({"accepted": True, "add": handle.overrides_add, "remove": handle.overrides_remove})

    @app.get(f"{API_PREFIX}/runs/{{run_id}}/slice")
    def get_slice(
        run_id: str,
        x: str,
        y: Optional[str] = Query(default=None),
        resolution: int = Query(default=25),
        base: Optional[str] = Query(default=None),
    ):
        handle = store.get(run_id)
        model = _load_model(handle)
        base_values = _parse_base(base, model)
        if y is None:
            steps = model.predict_slice(base_values, x, max(resolution, 2), allow_extrapolation=True)
            return reply(
                {
                    "axis": x,
                    "base": dict(zip(model.features, base_values)),
                    "points": [
                        {
                            "value": v,
                            "predicted": dict(zip(model.output_names, (float(t) for t in yv))),
                            "band": dict(zip(model.output_names, (float(t) for t in bv))),
                        }
                        for v, yv, bv in steps
                    ],
                }
            )
        archive = None
        records = _read_iterations(handle.run_dir, 0)
        if records:
            import numpy as np

            archive = np.array(records[-1]["front_x"], dtype=float)
        doc = pipeline.decision_slice(model, (x, y), resolution, base_values, archive_x=archive)
        return reply(doc)

    @app.get(f"{API_PREFIX}/runs/{{run_id}}/recipes")
    def get_recipes(run_id: str):
        handle = store.get(run_id)
        recipes = _artifact_or_409(handle, "recipes.json", "recipes")
        return reply({"recipes": recipes})

    @app.get(f"{API_PREFIX}/runs/{{run_id}}/recipes/{{n}}/export")
    def export_recipe(run_id: str, n: int):
        handle = store.get(run_id)
        recipes = _artifact_or_409(handle, "recipes.json", "recipes")
        if not (0 <= n < len(recipes)):
            raise HTTPException(status_code=404, detail=f"no recipe {n}")
        r = recipes[n]
        flat = dict(r["values"])
        for name, v in r["predicted"].items():
            flat[f"predicted_{name}"] = v
        flat["valid"] = r["valid"]
        flat["run_id"] = run_id
        flat["recipe_index"] = n
        return reply(flat)

    def _objectives(handle: RunHandle) -> list[dict]:
        cfg = pipeline.read_artifact(handle.run_dir, "config.json")
        return cfg["objectives"]

    def _parse_base(base: Optional[str], model) -> list:
        if base is None:
            # box midpoint per feature (levels: first level)
            values = []
            for codec in model.record.codecs:
                if codec.kind == "categorical":
                    values.append(codec.levels[0])
                else:
                    values.append((codec.lo + codec.hi) / 2.0)
            return values
        parts = base.split(",")
        if len(parts) != len(model.features):
            raise HTTPException(
                status_code=400,
                detail=f"base needs {len(model.features)} comma-separated values for {model.features}",
            )
        values = []
        for codec, raw in zip(model.record.codecs, parts):
            if codec.kind == "categorical":
                values.append(raw)
            else:
                try:
                    values.append(float(raw))
                except ValueError:
                    raise HTTPException(status_code=400, detail=f"bad base value {raw!r}") from None
        return values

    return app


def serve(store_root: str, host: str = "127.0.0.1", port: int = 8700):
    """Run the API service (blocking)."""
    import uvicorn

    uvicorn.run(create_app(store_root), host=host, port=port, log_level="warning")
