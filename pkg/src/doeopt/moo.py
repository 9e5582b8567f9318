"""Multi-objective optimizer and Pareto-front metrics.

The optimizer is an elitist evolutionary loop over the normalized decision
box [0, 1]^d with an explicit exploration fraction rho (share of each
generation drawn uniformly) and a Gaussian mutation scale sigma, both
steerable between iterations. Every iteration records the three front
metrics: hypervolume (performance), Schott spacing (quality) and the
2-Wasserstein drift to the previous front (stability).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from . import kernels
from .core import ObjectiveSpec, derive_seed, rng_for
from .errors import (
    ContractViolation,
    ReferenceViolationError,
    UndefinedMetricError,
    UnsupportedDimensionError,
)

# ---------------------------------------------------------------------------
# Dominance
# ---------------------------------------------------------------------------


def _signs(directions: Sequence) -> np.ndarray:
    out = []
    for d in directions:
        if isinstance(d, ObjectiveSpec):
            out.append(d.sign)
        elif d in ("maximize", "max", 1, 1.0):
            out.append(1.0)
        elif d in ("minimize", "min", -1, -1.0):
            out.append(-1.0)
        else:
            raise ContractViolation(f"bad objective direction {d!r}")
    return np.array(out, dtype=np.float64)


def dominates(a, b, directions) -> bool:
    """True iff a is at least as good as b everywhere and strictly better once."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    s = _signs(directions)
    if a.shape != b.shape or a.shape != s.shape:
        raise ContractViolation("dominates: shape mismatch")
    ga, gb = a * s, b * s
    return bool(np.all(ga >= gb) and np.any(ga > gb))


def pareto_filter(points, directions) -> tuple[list[int], list[int]]:
    """Split objective vectors into (nondominated indices, dominated indices).

    Duplicates of a nondominated vector are all kept; index order is
    preserved within each part.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ContractViolation("pareto_filter needs a nonempty 2-D point list")
    oriented = pts * _signs(directions)[None, :]
    mask = kernels.nondominated_mask(oriented)
    nondom = [i for i in range(len(mask)) if mask[i]]
    dom = [i for i in range(len(mask)) if not mask[i]]
    return nondom, dom


# ---------------------------------------------------------------------------
# Front metrics
# ---------------------------------------------------------------------------


def hypervolume(front, reference_point, directions) -> float:
    """Lebesgue measure of the region dominated by the front, bounded by the
    reference point. Exact sweep in 2-D, exact dimension sweep in 3-D.

    Every front point must be strictly better than the reference in all
    coordinates; anything else raises ReferenceViolationError.
    """
    pts = np.atleast_2d(np.asarray(front, dtype=np.float64))
    ref = np.asarray(reference_point, dtype=np.float64)
    s = _signs(directions)
    m = ref.shape[0]
    if pts.shape[1] != m or s.shape[0] != m:
        raise ContractViolation("hypervolume: dimension mismatch")
    if m not in (2, 3):
        raise UnsupportedDimensionError(f"hypervolume supports 2 or 3 objectives, got {m}")
    gains = (pts - ref[None, :]) * s[None, :]
    if pts.shape[0] == 0:
        return 0.0
    if np.any(gains <= 0):
        bad = int(np.argmax(np.any(gains <= 0, axis=1)))
        raise ReferenceViolationError(
            f"front point {pts[bad].tolist()} is not strictly better than reference {ref.tolist()}"
        )
    if m == 2:
        return float(kernels.hv2d(gains))
    return float(kernels.hv3d(gains))


def hypervolume_bounded(front, reference_point, directions) -> float:
    """Hypervolume of the part of the front strictly inside the reference box.

    Points not strictly better than the reference contribute nothing (their
    box is empty); an entirely-outside front has measure 0. This is the
    iteration metric the optimizer records, so early fronts that still
    straddle the reference produce a well-defined, monotone series.
    """
    pts = np.atleast_2d(np.asarray(front, dtype=np.float64))
    ref = np.asarray(reference_point, dtype=np.float64)
    s = _signs(directions)
    gains = (pts - ref[None, :]) * s[None, :]
    keep = np.all(gains > 0, axis=1)
    if not np.any(keep):
        return 0.0
    return hypervolume(pts[keep], reference_point, directions)


def spacing(front) -> float:
    """Schott spacing: stdev of nearest-neighbour L1 distances along the front."""
    pts = np.atleast_2d(np.asarray(front, dtype=np.float64))
    n = pts.shape[0]
    if n < 2:
        raise UndefinedMetricError("spacing needs at least 2 front points")
    d1 = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2)
    np.fill_diagonal(d1, np.inf)
    d = d1.min(axis=1)
    mean = d.mean()
    return float(np.sqrt(np.sum((d - mean) ** 2) / (n - 1)))


def wasserstein_2d(front_a, front_b, scale=None, order: int = 2) -> float:
    """Exact Wasserstein distance between two fronts as uniform point clouds.

    Coordinates are pre-scaled per objective by ``scale`` (defaults to 1s) so
    the metric is unit-balanced. Ground cost is Euclidean; order 2 solves the
    transportation LP on squared costs and returns the square root, order 1
    uses plain distances. Equal-size fronts reduce to an exact assignment
    problem; unequal sizes solve the uniform-measure transportation LP.
    """
    a = np.atleast_2d(np.asarray(front_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(front_b, dtype=np.float64))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ContractViolation("wasserstein_2d needs nonempty fronts")
    if a.shape[1] != b.shape[1]:
        raise ContractViolation("wasserstein_2d: dimension mismatch")
    if order not in (1, 2):
        raise ContractViolation("wasserstein order must be 1 or 2")
    if scale is not None:
        sc = np.asarray(scale, dtype=np.float64)
        a = a / sc[None, :]
        b = b / sc[None, :]
    # canonical argument order makes symmetry bitwise exact: both call orders
    # solve the identical LP
    if (a.shape[0], a.tobytes()) > (b.shape[0], b.tobytes()):
        a, b = b, a
    diff = a[:, None, :] - b[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    cost = dist**2 if order == 2 else dist
    n, m = cost.shape
    if n == m:
        # uniform equal masses: optimal plan is a permutation
        rows, cols = linear_sum_assignment(cost)
        total = float(cost[rows, cols].sum()) / n
    else:
        total = _transport_lp(cost, np.full(n, 1.0 / n), np.full(m, 1.0 / m))
    total = max(total, 0.0)
    return float(math.sqrt(total)) if order == 2 else float(total)


def _transport_lp(cost: np.ndarray, supply: np.ndarray, demand: np.ndarray) -> float:
    """Optimal transportation cost between discrete measures via linprog.

    Constraints are sparse: variable (i, j) appears in supply row i and
    demand row j; the last demand row is redundant and dropped.
    """
    from scipy.sparse import csr_matrix

    n, m = cost.shape
    var = np.arange(n * m)
    i_idx = var // m
    j_idx = var % m
    rows = np.concatenate([i_idx, n + j_idx[j_idx < m - 1]])
    cols = np.concatenate([var, var[j_idx < m - 1]])
    data = np.ones(rows.shape[0])
    a_eq = csr_matrix((data, (rows, cols)), shape=(n + m - 1, n * m))
    b_eq = np.concatenate([supply, demand[: m - 1]])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise ContractViolation(f"transportation LP failed: {res.message}")
    return float(res.fun)


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


@dataclass
class OptimizerConfig:
    population: int = 60
    iterations: int = 100
    seed: int = 0
    rho: float = 0.2  # exploration fraction
    sigma: float = 0.1  # mutation scale, normalized units
    crossover_prob: float = 0.9
    sbx_eta: float = 15.0
    directions: tuple[str, ...] = ("maximize", "maximize")
    reference_point: Optional[tuple[float, ...]] = None
    archive_cap: Optional[int] = 200
    wasserstein_order: int = 2
    wasserstein_scale: Optional[tuple[float, ...]] = None
    convergence_samples: int = 2048  # MC samples for the premature-convergence diagnostic

    def validate(self):
        if self.population < 4 or self.population % 2 != 0:
            raise ContractViolation("population must be even and >= 4")
        if self.iterations < 1:
            raise ContractViolation("iterations must be >= 1")
        if not (0.0 <= self.rho <= 1.0):
            raise ContractViolation("rho must be in [0, 1]")
        if self.sigma <= 0:
            raise ContractViolation("sigma must be > 0")
        if not (0.0 <= self.crossover_prob <= 1.0):
            raise ContractViolation("crossover probability must be in [0, 1]")
        if len(self.directions) not in (2, 3):
            raise UnsupportedDimensionError("optimizer supports 2 or 3 objectives")
        if self.archive_cap is not None and self.archive_cap < 4:
            raise ContractViolation("archive cap must be >= 4 (or None)")
        if self.wasserstein_order not in (1, 2):
            raise ContractViolation("wasserstein order must be 1 or 2")


@dataclass
class SteeringEvent:
    """One user steering action, applied at an iteration boundary."""

    rho: Optional[float] = None
    sigma: Optional[float] = None
    pause: bool = False
    resume: bool = False
    stop: bool = False

    def to_dict(self) -> dict:
        d: dict = {}
        if self.rho is not None:
            d["rho"] = self.rho
        if self.sigma is not None:
            d["sigma"] = self.sigma
        for flag in ("pause", "resume", "stop"):
            if getattr(self, flag):
                d[flag] = True
        return d


@dataclass
class IterationRecord:
    k: int
    candidates_x: np.ndarray  # (P, d) decision vectors evaluated this iteration
    candidates_y: np.ndarray  # (P, m) predicted objective vectors
    front_x: np.ndarray  # archive snapshot after the merge
    front_y: np.ndarray
    hypervolume: Optional[float]
    hypervolume_failed: Optional[str]
    spacing: Optional[float]
    wasserstein_to_previous: Optional[float]
    rho: float
    sigma: float
    convergence_diagnostic: float
    steering: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": "iter-v1",
            "k": self.k,
            "candidates_x": self.candidates_x.tolist(),
            "candidates_y": self.candidates_y.tolist(),
            "front_x": self.front_x.tolist(),
            "front_y": self.front_y.tolist(),
            "hypervolume": self.hypervolume,
            "hypervolume_failed": self.hypervolume_failed,
            "spacing": self.spacing,
            "wasserstein_to_previous": self.wasserstein_to_previous,
            "rho": self.rho,
            "sigma": self.sigma,
            "convergence_diagnostic": self.convergence_diagnostic,
            "steering": self.steering,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IterationRecord":
        return cls(
            k=d["k"],
            candidates_x=np.array(d["candidates_x"], dtype=np.float64).reshape(len(d["candidates_x"]), -1),
            candidates_y=np.array(d["candidates_y"], dtype=np.float64).reshape(len(d["candidates_y"]), -1),
            front_x=np.array(d["front_x"], dtype=np.float64).reshape(len(d["front_x"]), -1),
            front_y=np.array(d["front_y"], dtype=np.float64).reshape(len(d["front_y"]), -1),
            hypervolume=d["hypervolume"],
            hypervolume_failed=d.get("hypervolume_failed"),
            spacing=d["spacing"],
            wasserstein_to_previous=d["wasserstein_to_previous"],
            rho=d["rho"],
            sigma=d["sigma"],
            convergence_diagnostic=d.get("convergence_diagnostic", 0.0),
            steering=d.get("steering", []),
        )


class SteeringChannel:
    """Thread-safe queue of steering events drained at iteration boundaries."""

    def __init__(self):
        import threading

        self._lock = threading.Lock()
        self._events: list[SteeringEvent] = []

    def post(self, event: SteeringEvent):
        with self._lock:
            self._events.append(event)

    def drain(self) -> list[SteeringEvent]:
        with self._lock:
            events, self._events = self._events, []
        return events


@dataclass
class RunnerState:
    """Mutable optimizer session: archive plus per-iteration history."""

    config: OptimizerConfig
    predict: Callable[[np.ndarray], np.ndarray]  # (n, d) -> (n, m)
    n_coords: int
    archive_x: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    archive_y: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    records: list[IterationRecord] = field(default_factory=list)
    seed_points: Optional[np.ndarray] = None  # decision vectors of best experiments
    paused: bool = False
    stopped: bool = False

    def __post_init__(self):
        self.config.validate()
        if self.archive_x.size == 0:
            self.archive_x = np.zeros((0, self.n_coords))
            self.archive_y = np.zeros((0, len(self.config.directions)))


def latin_hypercube(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded LHS sample in the unit box: one point per axis-aligned stratum."""
    out = np.empty((n, d))
    for j in range(d):
        perm = rng.permutation(n)
        out[:, j] = (perm + rng.random(n)) / n
    return out


def _sbx_crossover(p1: np.ndarray, p2: np.ndarray, eta: float, prob: float, rng) -> np.ndarray:
    """Simulated-binary-style crossover producing one child."""
    child = p1.copy()
    for j in range(p1.shape[0]):
        if rng.random() < prob:
            u = rng.random()
            if u <= 0.5:
                beta = (2.0 * u) ** (1.0 / (eta + 1.0))
            else:
                beta = (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0))
            if rng.random() < 0.5:
                child[j] = 0.5 * ((1.0 + beta) * p1[j] + (1.0 - beta) * p2[j])
            else:
                child[j] = 0.5 * ((1.0 - beta) * p1[j] + (1.0 + beta) * p2[j])
    return child


def _crowding_truncate(x: np.ndarray, y: np.ndarray, cap: int, scale: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop points from the densest L1 neighbourhoods until len <= cap."""
    keep = list(range(x.shape[0]))
    ys = y / scale[None, :]
    while len(keep) > cap:
        sub = ys[keep]
        d1 = np.abs(sub[:, None, :] - sub[None, :, :]).sum(axis=2)
        np.fill_diagonal(d1, np.inf)
        nearest = d1.min(axis=1)
        drop = int(np.argmin(nearest))  # ties resolve to the lowest index
        keep.pop(drop)
    return x[keep], y[keep]


def _convergence_diagnostic(archive_x: np.ndarray, sigma: float, d: int, seed: int, n_samples: int) -> float:
    """Fraction of the decision box within Euclidean sigma of an archive point.

    Monte-Carlo estimate with a fixed derived seed; displayed so the user can
    judge whether the current tradeoff is collapsing onto a small region.
    """
    if archive_x.shape[0] == 0:
        return 0.0
    rng = np.random.default_rng(derive_seed(seed, "convergence"))
    samples = rng.random((n_samples, d))
    d2 = ((samples[:, None, :] - archive_x[None, :, :]) ** 2).sum(axis=2)
    covered = np.any(d2 <= sigma * sigma, axis=1)
    return float(np.mean(covered))


def step(state: RunnerState) -> IterationRecord:
    """Run one optimizer iteration: generate, evaluate, merge, measure."""
    cfg = state.config
    k = len(state.records) + 1
    rng = rng_for(cfg.seed, "iter", k)
    P = cfg.population
    d = state.n_coords

    if state.archive_x.shape[0] == 0:
        # iteration 1: Latin-hypercube exploration plus the best experiments
        n_lhs = math.ceil(P / 2)
        parts = [latin_hypercube(n_lhs, d, rng)]
        room = P - n_lhs
        if state.seed_points is not None and state.seed_points.shape[0] > 0 and room > 0:
            parts.append(state.seed_points[:room])
            room -= min(state.seed_points.shape[0], room)
        if room > 0:
            parts.append(rng.random((room, d)))
        cand = np.vstack(parts)
    else:
        n_explore = math.ceil(cfg.rho * P)
        n_exploit = P - n_explore
        explore = rng.random((n_explore, d))
        children = []
        arch = state.archive_x
        for _ in range(n_exploit):
            i1 = int(rng.integers(arch.shape[0]))
            i2 = int(rng.integers(arch.shape[0]))
            child = _sbx_crossover(arch[i1], arch[i2], cfg.sbx_eta, cfg.crossover_prob, rng)
            child = child + rng.normal(0.0, cfg.sigma, size=d)
            children.append(np.clip(child, 0.0, 1.0))
        exploit = np.array(children).reshape(n_exploit, d)
        cand = np.vstack([explore, exploit])

    cand_y = np.asarray(state.predict(cand), dtype=np.float64)
    if cand_y.shape != (cand.shape[0], len(cfg.directions)):
        raise ContractViolation(
            f"predict returned shape {cand_y.shape}, expected {(cand.shape[0], len(cfg.directions))}"
        )

    merged_x = np.vstack([state.archive_x, cand]) if state.archive_x.shape[0] else cand
    merged_y = np.vstack([state.archive_y, cand_y]) if state.archive_y.shape[0] else cand_y
    nondom, _ = pareto_filter(merged_y, cfg.directions)
    front_x, front_y = merged_x[nondom], merged_y[nondom]

    if cfg.archive_cap is not None and front_x.shape[0] > cfg.archive_cap:
        scale = np.asarray(cfg.wasserstein_scale or np.ones(front_y.shape[1]), dtype=np.float64)
        front_x, front_y = _crowding_truncate(front_x, front_y, cfg.archive_cap, scale)

    hv: Optional[float] = None
    hv_failed: Optional[str] = None
    if cfg.reference_point is None:
        hv_failed = "no reference point configured"
    else:
        try:
            hv = hypervolume_bounded(front_y, cfg.reference_point, cfg.directions)
        except (ReferenceViolationError, UnsupportedDimensionError) as exc:
            hv_failed = str(exc)

    sp = spacing(front_y) if front_y.shape[0] >= 2 else None

    wd: Optional[float] = None
    if state.records:
        prev = state.records[-1].front_y
        wd = wasserstein_2d(
            prev, front_y, scale=cfg.wasserstein_scale, order=cfg.wasserstein_order
        )

    record = IterationRecord(
        k=k,
        candidates_x=cand,
        candidates_y=cand_y,
        front_x=front_x,
        front_y=front_y,
        hypervolume=hv,
        hypervolume_failed=hv_failed,
        spacing=sp,
        wasserstein_to_previous=wd,
        rho=cfg.rho,
        sigma=cfg.sigma,
        convergence_diagnostic=_convergence_diagnostic(
            front_x, cfg.sigma, d, derive_seed(cfg.seed, "diag", k), cfg.convergence_samples
        ),
    )
    state.archive_x, state.archive_y = front_x, front_y
    state.records.append(record)
    return record


def run(
    predict: Callable[[np.ndarray], np.ndarray],
    n_coords: int,
    config: OptimizerConfig,
    steering: Optional[SteeringChannel] = None,
    seed_points: Optional[np.ndarray] = None,
    on_iteration: Optional[Callable[[IterationRecord], None]] = None,
    pause_wait: Optional[Callable[[], None]] = None,
) -> RunnerState:
    """Run N iterations, draining steering events at each boundary.

    ``predict`` maps a (n, d) matrix of normalized decision vectors to an
    (n, m) matrix of objective values. A stop event ends the run cleanly with
    the records produced so far; pause blocks until resume/stop (the caller
    provides the wait strategy via ``pause_wait``).
    """
    state = RunnerState(config=config, predict=predict, n_coords=n_coords, seed_points=seed_points)
    while len(state.records) < config.iterations and not state.stopped:
        applied: list[dict] = []
        if steering is not None:
            for ev in steering.drain():
                applied.append(ev.to_dict())
                _apply_event(state, ev)
        while state.paused and not state.stopped:
            if pause_wait is None or steering is None:
                break  # nothing can unpause us; treat as a no-op
            pause_wait()
            for ev in steering.drain():
                applied.append(ev.to_dict())
                _apply_event(state, ev)
        if state.stopped:
            break
        record = step(state)
        record.steering = applied
        if on_iteration is not None:
            on_iteration(record)
    return state


def _apply_event(state: RunnerState, ev: SteeringEvent):
    if ev.rho is not None:
        if not (0.0 <= ev.rho <= 1.0):
            raise ContractViolation("steering rho must be in [0, 1]")
        state.config.rho = float(ev.rho)
    if ev.sigma is not None:
        if ev.sigma <= 0:
            raise ContractViolation("steering sigma must be > 0")
        state.config.sigma = float(ev.sigma)
    if ev.pause:
        state.paused = True
    if ev.resume:
        state.paused = False
    if ev.stop:
        state.stopped = True
