from hypothesis import given, strategies as st

from metaboqa.tokens import count_tokens, within_result_budget


def test_empty_counts_zero():
    assert count_tokens("") == 0


def test_three_thousand_bytes_is_one_thousand_tokens():
    assert count_tokens("a" * 3000) == 1000


def test_ceil_rounding():
    assert count_tokens("a") == 1
    assert count_tokens("ab") == 1
    assert count_tokens("abc") == 1
    assert count_tokens("abcd") == 2


def test_multibyte_counts_utf8_bytes():
    # one 3-byte character per token under the estimator
    assert count_tokens("€") == 1  # euro sign, 3 bytes
    assert count_tokens("€" * 4) == 4


@given(st.text(), st.text())
def test_monotone_under_concatenation(a, b):
    assert count_tokens(a + b) >= count_tokens(a)


@given(st.text(), st.text())
def test_subadditive_within_one(a, b):
    assert count_tokens(a) + count_tokens(b) >= count_tokens(a + b) - 1


def test_budget_far_under():
    assert within_result_budget("SELECT ?x WHERE {}", "short question", "a,b\n1,2\n")


def test_budget_empty_results():
    assert within_result_budget("q", "question", "")


def test_budget_boundary_exact():
    # components sized to land exactly on the boundary: 3 bytes = 1 token
    query = "q" * 300  # 100 tokens
    question = "u" * 300  # 100 tokens
    rows_at_budget = "r" * (5800 * 3)
    assert within_result_budget(query, question, rows_at_budget)
    rows_over = "r" * (5800 * 3 + 1)  # one byte over -> 5801 tokens -> 6001
    assert not within_result_budget(query, question, rows_over)
