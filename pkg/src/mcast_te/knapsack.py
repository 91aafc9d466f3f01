"""0/1 knapsack used when rebalancing state entries under weighted storage.

Exact dynamic programming over the storage budget for desk-scale budgets;
for very large budgets a profit-scaling scheme bounds the error by the
configured precision.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Hashable, Sequence

_EXACT_BUDGET_LIMIT = 10_000


def knapsack_select(
    items: Sequence[tuple[int, int, Hashable]],
    budget: int,
    precision: Fraction = Fraction(1, 10),
) -> list[Hashable]:
    """Pick a max-profit subset of (profit, size, key) items within ``budget``.

    Profits and sizes are nonnegative ints (sizes >= 1). Deterministic: items
    are processed in the given order and ties resolve toward earlier items.
    """
    usable = [(p, s, k) for p, s, k in items if p > 0 and s <= budget]
    if not usable or budget <= 0:
        return []
    if budget <= _EXACT_BUDGET_LIMIT:
        return _exact_by_budget(usable, budget)
    return _profit_scaling(usable, budget, precision)


def _exact_by_budget(items, budget: int) -> list:
    n = len(items)
    dp = [0] * (budget + 1)
    take = [[False] * (budget + 1) for _ in range(n)]
    for i, (profit, size, _) in enumerate(items):
        row = take[i]
        for w in range(budget, size - 1, -1):
            cand = dp[w - size] + profit
            if cand > dp[w]:
                dp[w] = cand
                row[w] = True
    chosen = []
    w = budget
    for i in range(n - 1, -1, -1):
        if take[i][w]:
            chosen.append(items[i][2])
            w -= items[i][1]
    chosen.reverse()
    return chosen


def _profit_scaling(items, budget: int, precision: Fraction) -> list:
    # Min-size DP over scaled profits: classic (1 - eps) scheme.
    max_profit = max(p for p, _, _ in items)
    n = len(items)
    scale = max(1, (precision * max_profit / n).__floor__()) if precision > 0 else 1
    scaled = [(p // scale, s, k) for p, s, k in items]
    top = sum(p for p, _, _ in scaled)
    INF = budget + 1
    min_size = [0] + [INF] * top
    take = [[False] * (top + 1) for _ in range(n)]
    for i, (profit, size, _) in enumerate(scaled):
        row = take[i]
        for value in range(top, profit - 1, -1):
            below = min_size[value - profit]
            if below + size < min_size[value]:
                min_size[value] = below + size
                row[value] = True
    best_value = max(v for v in range(top + 1) if min_size[v] <= budget)
    chosen = []
    v = best_value
    for i in range(n - 1, -1, -1):
        if take[i][v]:
            chosen.append(items[i][2])
            v -= scaled[i][0]
    chosen.reverse()
    return chosen
