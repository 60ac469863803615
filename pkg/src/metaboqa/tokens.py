"""Token counting for prompt budgeting.

The default estimator is ceil(utf8_bytes / 3): deliberately conservative
(over-counts against common BPE tokenizers) so the 6000-token result
budget spills early rather than blowing a context window. A provider's
exact tokenizer can be plugged in via ``set_estimator`` on a gateway.
"""

from __future__ import annotations

import math
from typing import Callable

TokenEstimator = Callable[[str], int]

RESULT_BUDGET_TOKENS = 6000


def count_tokens(text: str) -> int:
    """Deterministic, monotone token estimate: ceil(len(utf8)/3)."""
    if not text:
        return 0
    return math.ceil(len(text.encode("utf-8")) / 3)


def within_result_budget(
    query: str,
    question: str,
    result_rows: str,
    estimate: TokenEstimator = count_tokens,
    budget: int = RESULT_BUDGET_TOKENS,
) -> bool:
    """True iff query + question + result rows fit the interpretation budget.

    Must be called on the exact strings that would be injected into the
    interpretation prompt, never on truncated previews.
    """
    total = estimate(query) + estimate(question) + estimate(result_rows)
    return total <= budget
