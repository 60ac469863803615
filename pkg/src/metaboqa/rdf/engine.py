"""Evaluate parsed SELECT queries over an in-memory graph.

Implements the solved subset: BGP joins, FILTER expressions with SPARQL
error semantics (an erroring row is dropped, `||`/`&&` short-circuit
around errors), `*`/`+` property paths over a single predicate,
aggregates with GROUP BY, DISTINCT, ORDER BY, LIMIT and OFFSET.
"""

from __future__ import annotations

import math
import re
from typing import Iterator, Optional, Union

from ..errors import UnsupportedSparql
from .model import Graph, Iri, Literal, Term, number_literal
from .sparql import (
    Aggregate,
    Arith,
    BoolOp,
    Compare,
    Filter,
    FuncCall,
    Not,
    PathMod,
    SelectQuery,
    TriplePattern,
    Var,
)

Solution = dict[str, Term]


class _FilterError(Exception):
    """SPARQL expression type error; the row is dropped."""


def evaluate(graph: Graph, query: SelectQuery) -> tuple[list[str], list[Solution]]:
    triples = [p for p in query.patterns if isinstance(p, TriplePattern)]
    filters = [p for p in query.patterns if isinstance(p, Filter)]

    solutions: list[Solution] = [{}]
    for pattern in triples:
        solutions = [
            extended
            for sol in solutions
            for extended in _match(graph, pattern, sol)
        ]
        if not solutions:
            break

    for flt in filters:
        kept = []
        for sol in solutions:
            try:
                if _ebv(_eval(flt.expr, sol, None)) is True:
                    kept.append(sol)
            except _FilterError:
                pass
        solutions = kept

    has_aggregate = query.group_by or any(
        not isinstance(item, Var) and _contains_aggregate(item[0])
        for item in (query.projection or [])
    )
    if has_aggregate:
        rows = _aggregate_rows(query, solutions)
    else:
        rows = _project_rows(query, solutions)

    if query.distinct:
        var_order = query.projected_vars()
        seen = set()
        deduped = []
        for row in rows:
            key = tuple((v, row.get(v)) for v in var_order)
            if key not in seen:
                seen.add(key)
                deduped.append(row)
        rows = deduped

    for expr, ascending in reversed(query.order_by):
        rows.sort(key=lambda row: _sort_key(expr, row), reverse=not ascending)

    if query.offset:
        rows = rows[query.offset :]
    if query.limit is not None:
        rows = rows[: query.limit]

    return query.projected_vars(), rows


# -- pattern matching -------------------------------------------------------


def _match(graph: Graph, pattern: TriplePattern, sol: Solution) -> Iterator[Solution]:
    s = _resolve(pattern.s, sol)
    o = _resolve(pattern.o, sol)
    if isinstance(pattern.p, PathMod):
        yield from _match_path(graph, pattern, s, o, sol)
        return
    p = _resolve(pattern.p, sol)
    s_term = None if isinstance(s, Var) else s
    p_term = None if isinstance(p, Var) else p
    o_term = None if isinstance(o, Var) else o
    for ts, tp, to in graph.triples(s_term, p_term, o_term):
        extended = dict(sol)
        if isinstance(s, Var):
            extended[s.name] = ts
        if isinstance(p, Var):
            extended[p.name] = tp
        if isinstance(o, Var):
            if o.name in extended and extended[o.name] != to:
                continue
            extended[o.name] = to
        yield extended


def _match_path(graph, pattern, s, o, sol) -> Iterator[Solution]:
    pred = pattern.p.iri
    include_self = pattern.p.mod == "*"
    if not isinstance(s, Var):
        reachable = _closure(graph, s, pred, forward=True, include_start=include_self)
        if isinstance(o, Var):
            for node in sorted(reachable, key=str):
                extended = dict(sol)
                extended[o.name] = node
                yield extended
        elif o in reachable:
            yield dict(sol)
    elif not isinstance(o, Var):
        reachable = _closure(graph, o, pred, forward=False, include_start=include_self)
        for node in sorted(reachable, key=str):
            extended = dict(sol)
            extended[s.name] = node
            yield extended
    else:
        for start in sorted(graph.nodes(), key=str):
            reachable = _closure(graph, start, pred, forward=True, include_start=include_self)
            for node in sorted(reachable, key=str):
                extended = dict(sol)
                extended[s.name] = start
                extended[o.name] = node
                yield extended


def _closure(graph, start, pred, forward: bool, include_start: bool) -> set:
    seen: set = set()
    frontier = [start]
    while frontier:
        node = frontier.pop()
        if forward:
            steps = [t[2] for t in graph.triples(node, pred, None)]
        else:
            steps = [t[0] for t in graph.triples(None, pred, node)]
        for nxt in steps:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    if include_start:
        seen.add(start)
    return seen


def _resolve(term, sol: Solution):
    if isinstance(term, Var) and term.name in sol:
        return sol[term.name]
    return term


# -- expressions ------------------------------------------------------------


def _contains_aggregate(expr) -> bool:
    if isinstance(expr, Aggregate):
        return True
    if isinstance(expr, (Compare, Arith)):
        return _contains_aggregate(expr.left) or _contains_aggregate(expr.right)
    if isinstance(expr, BoolOp):
        return any(_contains_aggregate(a) for a in expr.args)
    if isinstance(expr, Not):
        return _contains_aggregate(expr.arg)
    if isinstance(expr, FuncCall):
        return any(_contains_aggregate(a) for a in expr.args)
    return False


def _eval(expr, sol: Solution, group: Optional[list[Solution]]):
    if isinstance(expr, Var):
        if expr.name not in sol:
            raise _FilterError(f"unbound variable ?{expr.name}")
        return sol[expr.name]
    if isinstance(expr, (Iri, Literal)):
        return expr
    if isinstance(expr, Compare):
        return _compare(expr.op, _eval(expr.left, sol, group), _eval(expr.right, sol, group))
    if isinstance(expr, BoolOp):
        return _bool_op(expr, sol, group)
    if isinstance(expr, Not):
        return not _ebv(_eval(expr.arg, sol, group))
    if isinstance(expr, Arith):
        left = _number(_eval(expr.left, sol, group))
        right = _number(_eval(expr.right, sol, group))
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if right == 0:
            raise _FilterError("division by zero")
        return left / right
    if isinstance(expr, FuncCall):
        return _call(expr, sol, group)
    if isinstance(expr, Aggregate):
        if group is None:
            raise _FilterError("aggregate outside grouping context")
        return _aggregate_value(expr, group)
    raise _FilterError(f"cannot evaluate {expr!r}")


def _bool_op(expr: BoolOp, sol, group):
    results = []
    for arg in expr.args:
        try:
            results.append(_ebv(_eval(arg, sol, group)))
        except _FilterError:
            results.append(None)
    if expr.op == "&&":
        if any(r is False for r in results):
            return False
        if any(r is None for r in results):
            raise _FilterError("error in && operand")
        return True
    if any(r is True for r in results):
        return True
    if any(r is None for r in results):
        raise _FilterError("error in || operand")
    return False


def _compare(op: str, left, right):
    ln, rn = _maybe_number(left), _maybe_number(right)
    if ln is not None and rn is not None:
        return _apply_cmp(op, ln, rn)
    if isinstance(left, Iri) or isinstance(right, Iri):
        if op not in ("=", "!="):
            raise _FilterError("IRIs only support = and !=")
        return (left == right) if op == "=" else (left != right)
    ls, rs = _string(left), _string(right)
    return _apply_cmp(op, ls, rs)


def _apply_cmp(op, a, b):
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _maybe_number(value) -> Optional[Union[int, float]]:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, Literal):
        num = value.numeric_value()
        if num is not None:
            return num
        # untyped literals holding numbers compare numerically in practice
        if value.datatype is None:
            try:
                return int(value.lexical)
            except ValueError:
                try:
                    return float(value.lexical)
                except ValueError:
                    return None
    return None


def _number(value) -> Union[int, float]:
    num = _maybe_number(value)
    if num is None:
        raise _FilterError(f"not a number: {value!r}")
    return num


def _string(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, Literal):
        return value.lexical
    if isinstance(value, Iri):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return str(value)
    raise _FilterError(f"not a string: {value!r}")


def _ebv(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return value != 0
    if isinstance(value, str):
        return len(value) > 0
    if isinstance(value, Literal):
        num = value.numeric_value()
        if num is not None:
            return num != 0
        if value.datatype and value.datatype.endswith("boolean"):
            return value.lexical == "true"
        return len(value.lexical) > 0
    raise _FilterError(f"no effective boolean value for {value!r}")


def _call(expr: FuncCall, sol, group):
    name = expr.name

    if name == "BOUND":
        arg = expr.args[0]
        if not isinstance(arg, Var):
            raise _FilterError("BOUND expects a variable")
        return arg.name in sol

    values = [_eval(a, sol, group) for a in expr.args]
    if name == "STR":
        return _string(values[0])
    if name == "LANG":
        v = values[0]
        return v.lang or "" if isinstance(v, Literal) else ""
    if name == "DATATYPE":
        v = values[0]
        if isinstance(v, Literal) and v.datatype:
            return Iri(v.datatype)
        raise _FilterError("DATATYPE of non-typed value")
    if name == "REGEX":
        flags = re.IGNORECASE if len(values) > 2 and "i" in _string(values[2]) else 0
        return re.search(_string(values[1]), _string(values[0]), flags) is not None
    if name == "CONTAINS":
        return _string(values[1]) in _string(values[0])
    if name == "STRSTARTS":
        return _string(values[0]).startswith(_string(values[1]))
    if name == "STRENDS":
        return _string(values[0]).endswith(_string(values[1]))
    if name == "LCASE":
        return _string(values[0]).lower()
    if name == "UCASE":
        return _string(values[0]).upper()
    if name == "STRLEN":
        return len(_string(values[0]))
    if name == "ABS":
        return abs(_number(values[0]))
    if name == "CEIL":
        return math.ceil(_number(values[0]))
    if name == "FLOOR":
        return math.floor(_number(values[0]))
    if name == "ROUND":
        return round(_number(values[0]))
    raise UnsupportedSparql(f"function {name} not implemented")


# -- aggregation and projection ----------------------------------------------


def _aggregate_value(agg: Aggregate, group: list[Solution]):
    if agg.func == "COUNT":
        if agg.arg is None:
            if agg.distinct:
                return len({tuple(sorted(s.items())) for s in group})
            return len(group)
        values = _agg_values(agg.arg, group)
        if agg.distinct:
            values = list(dict.fromkeys(values))
        return len(values)

    values = _agg_values(agg.arg, group)
    if agg.distinct:
        values = list(dict.fromkeys(values))
    if not values:
        if agg.func in ("SUM",):
            return 0
        raise _FilterError(f"{agg.func} over empty group")
    if agg.func in ("SUM", "AVG"):
        numbers = [_number(v) for v in values]
        total = sum(numbers)
        return total if agg.func == "SUM" else total / len(numbers)
    # MIN / MAX: numeric when possible, else lexical
    try:
        numbers = [_number(v) for v in values]
        return min(numbers) if agg.func == "MIN" else max(numbers)
    except _FilterError:
        strings = [_string(v) for v in values]
        return min(strings) if agg.func == "MIN" else max(strings)


def _agg_values(expr, group: list[Solution]) -> list:
    values = []
    for sol in group:
        try:
            values.append(_eval(expr, sol, None))
        except _FilterError:
            continue
    return values


def _to_term(value) -> Term:
    if isinstance(value, (Iri, Literal)):
        return value
    if isinstance(value, bool):
        return Literal("true" if value else "false", datatype="http://www.w3.org/2001/XMLSchema#boolean")
    if isinstance(value, (int, float)):
        return number_literal(value)
    return Literal(str(value))


def _group_key(sol: Solution, group_by: list[Var]):
    return tuple(sol.get(v.name) for v in group_by)


def _aggregate_rows(query: SelectQuery, solutions: list[Solution]) -> list[Solution]:
    if query.projection is None:
        raise UnsupportedSparql("SELECT * with aggregates is not supported")
    groups: dict[tuple, list[Solution]] = {}
    if query.group_by:
        for sol in solutions:
            groups.setdefault(_group_key(sol, query.group_by), []).append(sol)
    else:
        # implicit single group; aggregates over zero solutions still yield a row
        groups[()] = list(solutions)

    rows: list[Solution] = []
    for key in groups:
        members = groups[key]
        representative = members[0] if members else {}
        row: Solution = {}
        for item in query.projection:
            if isinstance(item, Var):
                if item.name in representative:
                    row[item.name] = representative[item.name]
            else:
                expr, alias = item
                try:
                    row[alias.name] = _to_term(_eval(expr, representative, members))
                except _FilterError:
                    pass
        rows.append(row)
    return rows


def _project_rows(query: SelectQuery, solutions: list[Solution]) -> list[Solution]:
    if query.projection is None:
        names = query.projected_vars()
        return [{n: sol[n] for n in names if n in sol} for sol in solutions]
    rows = []
    for sol in solutions:
        row: Solution = {}
        for item in query.projection:
            if isinstance(item, Var):
                if item.name in sol:
                    row[item.name] = sol[item.name]
            else:
                expr, alias = item
                try:
                    row[alias.name] = _to_term(_eval(expr, sol, None))
                except _FilterError:
                    pass
        rows.append(row)
    return rows


def _sort_key(expr, row: Solution):
    try:
        value = _eval(expr, row, None)
    except _FilterError:
        return (0, "")
    num = _maybe_number(value)
    if num is not None:
        return (1, num)
    if isinstance(value, Iri):
        return (3, value.value)
    return (2, _string(value))
