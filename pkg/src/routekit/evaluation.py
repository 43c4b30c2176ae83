"""Realized-performance evaluation of assignments against ground-truth labels.

Accuracy is reported as a percentage of tasks whose chosen strategy was
labeled correct; cost totals are realized scaled FLOPs of the chosen labels,
not predictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .data import Corpus
from .routing import Assignment


class EvaluationError(ValueError):
    """Missing labels or mismatched task sets."""


@dataclass(frozen=True)
class EvalReport:
    method: str
    n_tasks: int
    correct_count: int
    accuracy_percent: float
    total_cost: float
    mean_cost: float
    over_budget_count: int = 0

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "n_tasks": self.n_tasks,
            "correct_count": self.correct_count,
            "accuracy_percent": self.accuracy_percent,
            "total_cost": self.total_cost,
            "mean_cost": self.mean_cost,
            "over_budget_count": self.over_budget_count,
        }


def evaluate(assignment: Assignment, corpus: Corpus, method: str | None = None) -> EvalReport:
    """Realized accuracy/cost of an assignment under the corpus labels."""
    missing = []
    correct = 0
    total_cost = 0.0
    for task_id, strategy_id in zip(assignment.task_ids, assignment.chosen_strategy_ids):
        label = corpus.label(task_id, strategy_id)
        if label is None:
            missing.append((task_id, strategy_id))
            continue
        correct += label.accuracy
        total_cost += label.cost
    if missing:
        shown = ", ".join(f"({t!r}, {s!r})" for t, s in missing[:10])
        more = "" if len(missing) <= 10 else f" and {len(missing) - 10} more"
        raise EvaluationError(f"no ground-truth label for {shown}{more}")
    n = len(assignment.task_ids)
    if n == 0:
        raise EvaluationError("assignment covers no tasks")
    return EvalReport(
        method=method or assignment.meta.get("method", "unknown"),
        n_tasks=n,
        correct_count=correct,
        accuracy_percent=100.0 * correct / n,
        total_cost=total_cost,
        mean_cost=total_cost / n,
        over_budget_count=assignment.over_budget_count,
    )


def best_single_strategy(corpus: Corpus, among: list[str] | None = None) -> tuple[str, EvalReport]:
    """The fixed strategy with the highest realized accuracy over all tasks.

    Requires a complete label matrix on the corpus (restricted to `among`
    when given); accuracy ties break toward lower total cost, then lower
    strategy id.
    """
    strategy_ids = corpus.strategy_ids()
    if among is not None:
        missing = [sid for sid in among if sid not in strategy_ids]
        if missing:
            raise EvaluationError(f"corpus has no labels for strategies {missing}")
        strategy_ids = list(among)
    if not strategy_ids:
        raise EvaluationError("corpus has no labels")
    n = len(corpus.tasks)
    best: tuple[float, float, str] | None = None
    best_report: EvalReport | None = None
    for sid in sorted(strategy_ids):
        correct = 0
        total_cost = 0.0
        missing = [t.task_id for t in corpus.tasks if corpus.label(t.task_id, sid) is None]
        if missing:
            raise EvaluationError(
                f"strategy {sid!r} is not labeled on {len(missing)} task(s), e.g. {missing[:5]}")
        for task in corpus.tasks:
            label = corpus.label(task.task_id, sid)
            correct += label.accuracy
            total_cost += label.cost
        report = EvalReport(f"single:{sid}", n, correct, 100.0 * correct / n,
                            total_cost, total_cost / n)
        key = (report.accuracy_percent, -total_cost, sid)
        if best is None or (key[0], key[1]) > (best[0], best[1]):
            best = key
            best_report = report
    return best[2], best_report


@dataclass(frozen=True)
class StrategyTransitionRow:
    """Table row for tasks the router sent to one strategy."""

    strategy_id: str
    share_percent: float
    n_tasks: int
    baseline_accuracy_percent: float
    baseline_mean_cost: float
    routed_accuracy_percent: float
    routed_mean_cost: float
    transitions_percent: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TransitionReport:
    """Correctness transitions from a baseline assignment to a routed one.

    Buckets use C for correct and I for incorrect; the four percentages
    partition the task set.
    """

    n_tasks: int
    transitions_percent: dict
    per_strategy: tuple[StrategyTransitionRow, ...]

    def as_dict(self) -> dict:
        return {
            "n_tasks": self.n_tasks,
            "transitions_percent": dict(self.transitions_percent),
            "per_strategy": [
                {
                    "strategy_id": row.strategy_id,
                    "share_percent": row.share_percent,
                    "n_tasks": row.n_tasks,
                    "baseline_accuracy_percent": row.baseline_accuracy_percent,
                    "baseline_mean_cost": row.baseline_mean_cost,
                    "routed_accuracy_percent": row.routed_accuracy_percent,
                    "routed_mean_cost": row.routed_mean_cost,
                    "transitions_percent": dict(row.transitions_percent),
                }
                for row in self.per_strategy
            ],
        }


def render_eval_table(reports: list[EvalReport]) -> str:
    """Fixed-width text table: accuracy to one decimal, costs to two."""
    header = f"{'method':<28} {'acc%':>6} {'total_cost':>12} {'mean_cost':>10} {'n':>6} {'over':>5}"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(f"{r.method:<28} {r.accuracy_percent:>6.1f} {r.total_cost:>12.2f} "
                     f"{r.mean_cost:>10.2f} {r.n_tasks:>6d} {r.over_budget_count:>5d}")
    return "\n".join(lines)


BUCKETS = ("C->C", "I->C", "I->I", "C->I")


def _bucket(baseline_correct: int, routed_correct: int) -> str:
    return f"{'C' if baseline_correct else 'I'}->{'C' if routed_correct else 'I'}"


def transition_report(baseline: Assignment, routed: Assignment, corpus: Corpus) -> TransitionReport:
    """2x2 correct/incorrect transition percentages plus per-strategy shares."""
    if set(baseline.task_ids) != set(routed.task_ids):
        raise EvaluationError("baseline and routed assignments cover different task sets")
    base_choice = dict(zip(baseline.task_ids, baseline.chosen_strategy_ids))
    n = len(routed.task_ids)
    counts = {b: 0 for b in BUCKETS}
    per_strategy: dict[str, dict] = {}
    for task_id, routed_sid in zip(routed.task_ids, routed.chosen_strategy_ids):
        base_sid = base_choice[task_id]
        base_label = corpus.label(task_id, base_sid)
        routed_label = corpus.label(task_id, routed_sid)
        if base_label is None or routed_label is None:
            raise EvaluationError(f"missing label for task {task_id!r}")
        counts[_bucket(base_label.accuracy, routed_label.accuracy)] += 1
        row = per_strategy.setdefault(routed_sid, {
            "n": 0, "base_correct": 0, "base_cost": 0.0,
            "routed_correct": 0, "routed_cost": 0.0,
            "buckets": {b: 0 for b in BUCKETS},
        })
        row["n"] += 1
        row["base_correct"] += base_label.accuracy
        row["base_cost"] += base_label.cost
        row["routed_correct"] += routed_label.accuracy
        row["routed_cost"] += routed_label.cost
        row["buckets"][_bucket(base_label.accuracy, routed_label.accuracy)] += 1

    rows = []
    for sid in sorted(per_strategy, key=lambda s: -per_strategy[s]["n"]):
        row = per_strategy[sid]
        m = row["n"]
        rows.append(StrategyTransitionRow(
            strategy_id=sid,
            share_percent=100.0 * m / n,
            n_tasks=m,
            baseline_accuracy_percent=100.0 * row["base_correct"] / m,
            baseline_mean_cost=row["base_cost"] / m,
            routed_accuracy_percent=100.0 * row["routed_correct"] / m,
            routed_mean_cost=row["routed_cost"] / m,
            transitions_percent={b: 100.0 * row["buckets"][b] / m for b in BUCKETS},
        ))
    return TransitionReport(
        n_tasks=n,
        transitions_percent={b: 100.0 * counts[b] / n for b in BUCKETS},
        per_strategy=tuple(rows),
    )
