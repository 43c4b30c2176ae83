"""Routing: turn a prediction matrix into per-task strategy assignments.

Four routes are provided:
  * weighted-sum scalarization (per-task argmax of w*acc - (1-w)*cost),
  * a Pareto sweep over a w grid,
  * budget-constrained global optimization via group-knapsack dynamic
    programming over integerized costs, with backtracking,
  * a per-task local baseline that enforces the budget independently,
plus an exhaustive brute-force solver used as a verification oracle.

Tie-breaking is deterministic everywhere: higher accuracy, then lower cost,
then lower strategy index (the weighted route breaks equal scores by lower
cost, then lower index).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# DP sentinel for unreachable (task-count, spent-budget) states. -inf + finite
# stays -inf, so sentinel cells can never leak a finite value into the table;
# transitions additionally test reachability explicitly.
NEG_INF = float("-inf")


class RoutingError(ValueError):
    """Invalid matrix, grid, or routing parameter."""


class InfeasibleBudgetError(RoutingError):
    """Even the all-min-cost assignment exceeds the rounded budget."""

    def __init__(self, min_total_cost: float, budget_total: float):
        self.min_total_cost = float(min_total_cost)
        self.budget_total = float(budget_total)
        super().__init__(
            f"budget infeasible: minimal achievable total cost {self.min_total_cost:.6g} "
            f"exceeds total budget {self.budget_total:.6g}")


class BruteForceCapError(RoutingError):
    """The enumeration space exceeds the configured cap."""


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    """Dense (tasks x strategies) accuracy/cost estimates feeding all routers."""

    accuracy: np.ndarray
    cost: np.ndarray
    task_ids: tuple[str, ...]
    strategy_ids: tuple[str, ...]

    def __post_init__(self):
        acc = np.asarray(self.accuracy, dtype=np.float64)
        cost = np.asarray(self.cost, dtype=np.float64)
        if acc.ndim != 2 or acc.shape != cost.shape:
            raise RoutingError(f"matrix shapes differ: accuracy {acc.shape}, cost {cost.shape}")
        if acc.size == 0:
            raise RoutingError("prediction matrix is empty")
        if not (np.all(np.isfinite(acc)) and np.all(np.isfinite(cost))):
            raise RoutingError("prediction matrix contains non-finite entries")
        if np.any(acc < 0) or np.any(acc > 1):
            raise RoutingError("accuracy estimates must lie in [0, 1]")
        if np.any(cost < 0):
            raise RoutingError("cost estimates must be non-negative")
        if len(self.task_ids) != acc.shape[0] or len(self.strategy_ids) != acc.shape[1]:
            raise RoutingError("id tuples do not match matrix shape")
        acc.setflags(write=False)
        cost.setflags(write=False)
        object.__setattr__(self, "accuracy", acc)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "task_ids", tuple(self.task_ids))
        object.__setattr__(self, "strategy_ids", tuple(self.strategy_ids))

    @property
    def n_tasks(self) -> int:
        return self.accuracy.shape[0]

    @property
    def n_strategies(self) -> int:
        return self.accuracy.shape[1]


@dataclass(frozen=True)
class Assignment:
    """One chosen strategy per task plus the predicted values of each choice."""

    task_ids: tuple[str, ...]
    strategy_ids: tuple[str, ...]
    chosen: tuple[int, ...]
    predicted_accuracy: tuple[float, ...]
    predicted_cost: tuple[float, ...]
    over_budget: tuple[bool, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.task_ids)
        if any(len(part) != n for part in (self.chosen, self.predicted_accuracy,
                                           self.predicted_cost, self.over_budget)):
            raise RoutingError("assignment lengths are inconsistent")
        for j in self.chosen:
            if not (0 <= j < len(self.strategy_ids)):
                raise RoutingError(f"chosen strategy index {j} out of range")

    @property
    def total_predicted_accuracy(self) -> float:
        return float(sum(self.predicted_accuracy))

    @property
    def total_predicted_cost(self) -> float:
        return float(sum(self.predicted_cost))

    @property
    def chosen_strategy_ids(self) -> tuple[str, ...]:
        return tuple(self.strategy_ids[j] for j in self.chosen)

    @property
    def over_budget_count(self) -> int:
        return sum(self.over_budget)


def _assignment(matrix: PredictionMatrix, chosen: Sequence[int], meta: dict,
                over_budget: Sequence[bool] | None = None) -> Assignment:
    idx = np.arange(matrix.n_tasks)
    chosen_arr = np.asarray(chosen, dtype=int)
    if over_budget is None:
        over_budget = [False] * matrix.n_tasks
    return Assignment(matrix.task_ids, matrix.strategy_ids, tuple(int(j) for j in chosen),
                      tuple(float(v) for v in matrix.accuracy[idx, chosen_arr]),
                      tuple(float(v) for v in matrix.cost[idx, chosen_arr]),
                      tuple(bool(b) for b in over_budget), meta)


def single_strategy_assignment(matrix: PredictionMatrix, strategy_id: str) -> Assignment:
    """Route every task to one fixed strategy (baseline construction)."""
    try:
        j = matrix.strategy_ids.index(strategy_id)
    except ValueError:
        raise RoutingError(f"strategy {strategy_id!r} is not a matrix column") from None
    return _assignment(matrix, [j] * matrix.n_tasks,
                       {"method": "single-strategy", "strategy_id": strategy_id})


# ----------------------------------------------------------------------------
# Unconstrained (weighted-sum) routing
# ----------------------------------------------------------------------------

def route_unconstrained(matrix: PredictionMatrix, w: float, normalize: bool = False) -> Assignment:
    """Per task, argmax of w * accuracy - (1 - w) * cost.

    With normalize set, costs are divided by the matrix-wide maximum first so
    that w in [0, 1] trades off quantities of comparable scale. Equal scores
    break toward lower cost, then lower strategy index.
    """
    if not (0.0 <= w <= 1.0):
        raise RoutingError(f"w must lie in [0, 1], got {w}")
    cost = matrix.cost
    scale = float(cost.max()) if normalize else 1.0
    if scale <= 0.0:
        scale = 1.0
    scores = w * matrix.accuracy - (1.0 - w) * (cost / scale)
    indices = np.arange(matrix.n_strategies)
    chosen = []
    for i in range(matrix.n_tasks):
        order = np.lexsort((indices, cost[i], -scores[i]))
        chosen.append(int(order[0]))
    return _assignment(matrix, chosen, {"method": "weighted", "w": float(w), "normalize": bool(normalize)})


@dataclass(frozen=True)
class SweepPoint:
    w: float
    assignment: Assignment
    mean_accuracy: float
    total_cost: float


def sweep_pareto(matrix: PredictionMatrix, w_grid: Iterable[float],
                 normalize: bool = True) -> list[SweepPoint]:
    """route_unconstrained at every w, ascending; aggregates are predicted values."""
    grid = [float(w) for w in w_grid]
    for w in grid:
        if not (0.0 <= w <= 1.0):
            raise RoutingError(f"sweep grid value {w} outside [0, 1]")
    points = []
    for w in sorted(grid):
        assignment = route_unconstrained(matrix, w, normalize=normalize)
        points.append(SweepPoint(w, assignment,
                                 assignment.total_predicted_accuracy / matrix.n_tasks,
                                 assignment.total_predicted_cost))
    return points


def default_w_grid(num_points: int = 21) -> list[float]:
    """Evenly spaced w values spanning [0, 1]."""
    if num_points < 2:
        raise RoutingError("w grid needs at least 2 points")
    return [i / (num_points - 1) for i in range(num_points)]


# ----------------------------------------------------------------------------
# Budget-constrained routing
# ----------------------------------------------------------------------------

def _integerize(cost: np.ndarray, resolution: int) -> np.ndarray:
    # ceiling (with a fuzz guard for exact products) so integerized costs
    # never under-count: a rounded-feasible assignment never overspends the
    # true budget, and refining the resolution only grows the feasible set
    return np.ceil(cost * resolution - 1e-9).astype(np.int64)


def route_constrained_global(matrix: PredictionMatrix, budget_per_task: float,
                             resolution: int = 1) -> Assignment:
    """Maximize total accuracy subject to sum(cost) <= n * budget_per_task.

    Costs are integerized at the given resolution (ceiling, in units of
    1/resolution) and the total budget is floored, so a returned assignment
    never overspends the budget, rounded or true. The table row for task i
    only spans the reachable band [min total, max total] of the first i
    tasks. Reported aggregates use the un-rounded costs.
    """
    if budget_per_task <= 0:
        raise RoutingError(f"budget_per_task must be positive, got {budget_per_task}")
    if int(resolution) != resolution or resolution < 1:
        raise RoutingError(f"resolution must be a positive integer, got {resolution}")
    resolution = int(resolution)
    n, n_strats = matrix.n_tasks, matrix.n_strategies
    acc, cost = matrix.accuracy, matrix.cost
    c_int = _integerize(cost, resolution)
    # 1e-9 guard keeps decimal budgets like 0.1 * 3 from flooring one unit low
    budget_int = int(math.floor(n * budget_per_task * resolution + 1e-9))
    min_total = float(cost.min(axis=1).sum())
    bmin = np.cumsum(c_int.min(axis=1))
    bmax = np.cumsum(c_int.max(axis=1))
    if int(bmin[-1]) > budget_int:
        raise InfeasibleBudgetError(min_total, n * budget_per_task)
    # spending beyond the max achievable total buys nothing
    budget_int = min(budget_int, int(bmax[-1]))
    width = budget_int + 1
    if n_strats > np.iinfo(np.int16).max:
        raise RoutingError("too many strategies for the DP choice table")

    prev = np.full(width, NEG_INF)
    prev[0] = 0.0
    choice = np.full((n, width), -1, dtype=np.int16)
    int_max = np.iinfo(np.int64).max
    for i in range(n):
        lo = int(bmin[i])
        hi = min(int(bmax[i]), budget_int)
        span = hi - lo + 1
        best_v = np.full(span, NEG_INF)
        best_a = np.full(span, -1.0)
        best_c = np.full(span, int_max)
        best_j = np.full(span, -1, dtype=np.int16)
        for j in range(n_strats):
            c = int(c_int[i, j])
            a = float(acc[i, j])
            v = np.full(span, NEG_INF)
            start = max(lo, c)
            if start <= hi:
                v[start - lo:] = prev[start - c: hi - c + 1] + a
            reachable = v > NEG_INF
            better = (v > best_v) | (reachable & (v == best_v) &
                                     ((a > best_a) | ((a == best_a) & (c < best_c))))
            best_v = np.where(better, v, best_v)
            best_a = np.where(better, a, best_a)
            best_c = np.where(better, c, best_c)
            best_j = np.where(better, np.int16(j), best_j)
        cur = np.full(width, NEG_INF)
        cur[lo:hi + 1] = best_v
        choice[i, lo:hi + 1] = best_j
        prev = cur

    if not np.any(prev > NEG_INF):
        raise InfeasibleBudgetError(min_total, n * budget_per_task)
    b = int(np.argmax(prev))  # first maximum: smallest rounded spend on ties
    chosen = [0] * n
    for i in range(n - 1, -1, -1):
        j = int(choice[i, b])
        if j < 0:
            raise RoutingError("DP backtracking reached an unreachable cell")
        chosen[i] = j
        b -= int(c_int[i, j])
    return _assignment(matrix, chosen, {
        "method": "global",
        "budget_per_task": float(budget_per_task),
        "resolution": resolution,
        "rounded_total_budget": budget_int,
    })


def route_constrained_local(matrix: PredictionMatrix, budget_per_task: float) -> Assignment:
    """Per task, highest accuracy among strategies costing <= budget_per_task.

    Tasks with no affordable strategy fall back to their min-cost strategy
    and are flagged over budget.
    """
    if budget_per_task <= 0:
        raise RoutingError(f"budget_per_task must be positive, got {budget_per_task}")
    acc, cost = matrix.accuracy, matrix.cost
    indices = np.arange(matrix.n_strategies)
    chosen = []
    over = []
    for i in range(matrix.n_tasks):
        feasible = np.where(cost[i] <= budget_per_task)[0]
        if feasible.size:
            order = np.lexsort((indices[feasible], cost[i, feasible], -acc[i, feasible]))
            chosen.append(int(feasible[order[0]]))
            over.append(False)
        else:
            chosen.append(int(np.argmin(cost[i])))
            over.append(True)
    return _assignment(matrix, chosen, {
        "method": "local",
        "budget_per_task": float(budget_per_task),
    }, over_budget=over)


def brute_force_constrained(matrix: PredictionMatrix, budget_per_task: float,
                            cap: int = 10 ** 6) -> Assignment:
    """Exact optimum by exhaustive enumeration over un-rounded costs."""
    n, n_strats = matrix.n_tasks, matrix.n_strategies
    if n_strats ** n > cap:
        raise BruteForceCapError(f"{n_strats}^{n} assignments exceed the cap of {cap}")
    budget_total = n * budget_per_task
    acc_rows = matrix.accuracy.tolist()
    cost_rows = matrix.cost.tolist()
    min_total = float(matrix.cost.min(axis=1).sum())
    if min_total > budget_total:
        raise InfeasibleBudgetError(min_total, budget_total)
    # min remaining cost below each level enables safe pruning (costs >= 0)
    min_rest = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        min_rest[i] = min_rest[i + 1] + min(cost_rows[i])
    best: tuple[float, float, tuple[int, ...]] | None = None

    def consider(acc_sum: float, cost_sum: float, combo: tuple[int, ...]) -> None:
        nonlocal best
        if best is None or (acc_sum, -cost_sum, tuple(-j for j in combo)) > (best[0], -best[1], tuple(-j for j in best[2])):
            best = (acc_sum, cost_sum, combo)

    stack: list[tuple[int, float, float, tuple[int, ...]]] = [(0, 0.0, 0.0, ())]
    while stack:
        i, acc_sum, cost_sum, combo = stack.pop()
        if i == n:
            consider(acc_sum, cost_sum, combo)
            continue
        for j in range(n_strats - 1, -1, -1):
            c = cost_sum + cost_rows[i][j]
            if c + min_rest[i + 1] <= budget_total + 1e-12:
                stack.append((i + 1, acc_sum + acc_rows[i][j], c, combo + (j,)))
    if best is None:
        raise InfeasibleBudgetError(min_total, budget_total)
    return _assignment(matrix, best[2], {
        "method": "brute-force",
        "budget_per_task": float(budget_per_task),
    })


# ----------------------------------------------------------------------------
# JSONL artifacts
# ----------------------------------------------------------------------------

def save_matrix(matrix: PredictionMatrix, path: str | Path) -> None:
    """One record per (task, strategy) pair, task-major, matching matrix order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for i, task_id in enumerate(matrix.task_ids):
            for j, strategy_id in enumerate(matrix.strategy_ids):
                fh.write(json.dumps({
                    "task_id": task_id,
                    "strategy_id": strategy_id,
                    "accuracy": float(matrix.accuracy[i, j]),
                    "cost": float(matrix.cost[i, j]),
                }) + "\n")


def load_matrix(path: str | Path) -> PredictionMatrix:
    path = Path(path)
    task_order: dict[str, int] = {}
    strategy_order: dict[str, int] = {}
    entries: dict[tuple[str, str], tuple[float, float]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                key = (obj["task_id"], obj["strategy_id"])
                entries[key] = (float(obj["accuracy"]), float(obj["cost"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise RoutingError(f"{path}:{lineno}: malformed matrix record ({exc})") from None
            task_order.setdefault(obj["task_id"], len(task_order))
            strategy_order.setdefault(obj["strategy_id"], len(strategy_order))
    if not entries:
        raise RoutingError(f"{path}: empty prediction matrix")
    task_ids = tuple(task_order)
    strategy_ids = tuple(strategy_order)
    acc = np.zeros((len(task_ids), len(strategy_ids)))
    cost = np.zeros_like(acc)
    for (tid, sid), (a, c) in entries.items():
        acc[task_order[tid], strategy_order[sid]] = a
        cost[task_order[tid], strategy_order[sid]] = c
    if len(entries) != acc.size:
        raise RoutingError(f"{path}: matrix is not dense ({len(entries)} records for {acc.size} cells)")
    return PredictionMatrix(acc, cost, task_ids, strategy_ids)


def save_assignment(assignment: Assignment, path: str | Path) -> None:
    """Per-task records followed by one summary record."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = assignment.meta
    extra = {}
    if "w" in meta:
        extra["objective_w"] = meta["w"]
    if "budget_per_task" in meta:
        extra["budget"] = meta["budget_per_task"]
    with open(path, "w", encoding="utf-8") as fh:
        for i, task_id in enumerate(assignment.task_ids):
            fh.write(json.dumps({
                "task_id": task_id,
                "strategy_id": assignment.strategy_ids[assignment.chosen[i]],
                **extra,
                "predicted_accuracy": assignment.predicted_accuracy[i],
                "predicted_cost": assignment.predicted_cost[i],
                "over_budget": assignment.over_budget[i],
            }) + "\n")
        fh.write(json.dumps({
            "summary": True,
            "strategy_ids": list(assignment.strategy_ids),
            "total_predicted_accuracy": assignment.total_predicted_accuracy,
            "total_predicted_cost": assignment.total_predicted_cost,
            "over_budget_count": assignment.over_budget_count,
            "meta": meta,
        }) + "\n")


def load_assignment(path: str | Path) -> Assignment:
    path = Path(path)
    rows = []
    summary = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RoutingError(f"{path}:{lineno}: malformed assignment record ({exc.msg})") from None
            if obj.get("summary"):
                summary = obj
            else:
                rows.append(obj)
    if summary is None or not rows:
        raise RoutingError(f"{path}: assignment file needs per-task records and a summary")
    strategy_ids = tuple(summary["strategy_ids"])
    index = {sid: j for j, sid in enumerate(strategy_ids)}
    try:
        return Assignment(
            tuple(r["task_id"] for r in rows),
            strategy_ids,
            tuple(index[r["strategy_id"]] for r in rows),
            tuple(float(r["predicted_accuracy"]) for r in rows),
            tuple(float(r["predicted_cost"]) for r in rows),
            tuple(bool(r["over_budget"]) for r in rows),
            summary.get("meta", {}),
        )
    except KeyError as exc:
        raise RoutingError(f"{path}: assignment record missing field {exc}") from None
