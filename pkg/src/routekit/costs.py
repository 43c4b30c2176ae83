"""Inference-cost accounting in scaled FLOPs.

A forward pass costs ~2 * param_count FLOPs per processed token; totals are
divided by 1e11 so values land in the tens. That scaled unit is used
everywhere: ground-truth labels, regressor targets, and routing budgets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .data import CorpusError, Strategy

FLOPS_SCALE = 1e11
FLOPS_PER_PARAM_TOKEN = 2.0


class CostError(ValueError):
    """Invalid usage record or unresolvable strategy."""


@dataclass(frozen=True)
class UsageRecord:
    """Token counts for one strategy invocation on one task."""

    task_id: str
    strategy_id: str
    prompt_tokens: int
    generated_tokens: int

    def __post_init__(self):
        for name in ("prompt_tokens", "generated_tokens"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise CostError(f"usage ({self.task_id!r}, {self.strategy_id!r}): {name} must be an integer >= 0")


@dataclass(frozen=True)
class UsageCost:
    """Computed scaled-FLOPs cost for one usage record."""

    task_id: str
    strategy_id: str
    cost: float


def flops_scaled(param_count: int, usage: UsageRecord) -> float:
    """Scaled inference FLOPs: 2 * params * (prompt + generated) / 1e11."""
    if param_count <= 0:
        raise CostError(f"param_count must be positive, got {param_count}")
    tokens = usage.prompt_tokens + usage.generated_tokens
    return FLOPS_PER_PARAM_TOKEN * float(param_count) * float(tokens) / FLOPS_SCALE


def label_costs(usages: Iterable[UsageRecord],
                strategies: Iterable[Strategy] | Mapping[str, Strategy]) -> list[UsageCost]:
    """Per-usage costs via flops_scaled; accuracy scoring stays external."""
    if isinstance(strategies, Mapping):
        by_id = dict(strategies)
    else:
        by_id = {s.strategy_id: s for s in strategies}
    out = []
    for usage in usages:
        strat = by_id.get(usage.strategy_id)
        if strat is None:
            raise CostError(f"unknown strategy_id {usage.strategy_id!r}")
        out.append(UsageCost(usage.task_id, usage.strategy_id, flops_scaled(strat.param_count, usage)))
    return out


def load_usages(path: str | Path) -> list[UsageRecord]:
    """Read a usages JSONL file (task_id, strategy_id, prompt_tokens, generated_tokens)."""
    path = Path(path)
    usages = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            try:
                usages.append(UsageRecord(obj["task_id"], obj["strategy_id"],
                                          obj["prompt_tokens"], obj["generated_tokens"]))
            except KeyError as exc:
                raise CorpusError(f"{path}:{lineno}: missing field {exc}") from None
            except CostError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
    return usages
