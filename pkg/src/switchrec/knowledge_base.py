"""Constraint-based eligibility rules for promoted items.

Rule files hold one rule per line::

    # comment
    @feature credit_score: numeric
    @feature region: categorical
    credit_card: credit_score >= 700 AND age >= 18
    loan: (income > 2000 OR credit_score > 650) AND NOT region = "X"
    gift: device_os IN ("ios", "android")

``@feature`` lines declare the schema. When a file declares nothing and no
schema is passed in, :data:`DEFAULT_SCHEMA` applies.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Union

from switchrec.domain import UserProfile

NUMERIC = "numeric"
CATEGORICAL = "categorical"

MAX_DEPTH = 32

DEFAULT_SCHEMA: Mapping[str, str] = {
    "credit_score": NUMERIC,
    "age": NUMERIC,
    "income": NUMERIC,
    "device_os": CATEGORICAL,
    "region": CATEGORICAL,
    "recency": NUMERIC,
    "frequency": NUMERIC,
    "monetary": NUMERIC,
}

_CMP_ALIASES = {"<": "<", "<=": "<=", "≤": "<=", "=": "=", "==": "=", ">=": ">=", "≥": ">=",
                ">": ">", "!=": "!=", "≠": "!=", "<>": "!="}
CATEGORICAL_OPS = frozenset({"=", "!="})


# -- expression tree ---------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Compare:
    feature: str
    op: str
    value: float | str


@dataclass(frozen=True)
class InSet:
    feature: str
    values: tuple[float | str, ...]


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class And:
    operands: tuple["Expr", ...]


@dataclass(frozen=True)
class Or:
    operands: tuple["Expr", ...]


Expr = Union[Const, Compare, InSet, Not, And, Or]


def depth(expr: Expr) -> int:
    if isinstance(expr, Not):
        return 1 + depth(expr.operand)
    if isinstance(expr, (And, Or)):
        return 1 + max(depth(e) for e in expr.operands)
    return 1


def features_of(expr: Expr) -> set[str]:
    if isinstance(expr, (Compare, InSet)):
        return {expr.feature}
    if isinstance(expr, Not):
        return features_of(expr.operand)
    if isinstance(expr, (And, Or)):
        return set().union(*(features_of(e) for e in expr.operands))
    return set()


def _fmt_literal(value: float | str) -> str:
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return repr(float(value)) if not float(value).is_integer() else str(int(value))


def to_text(expr: Expr) -> str:
    """Render an expression so that ``parse_expression(to_text(e)) == e``."""
    if isinstance(expr, Const):
        return "TRUE" if expr.value else "FALSE"
    if isinstance(expr, Compare):
        return f"{expr.feature} {expr.op} {_fmt_literal(expr.value)}"
    if isinstance(expr, InSet):
        return f"{expr.feature} IN ({', '.join(_fmt_literal(v) for v in expr.values)})"

    def sub(e: Expr) -> str:
        return f"({to_text(e)})" if isinstance(e, (And, Or)) else to_text(e)

    if isinstance(expr, Not):
        return f"NOT {sub(expr.operand)}"
    joiner = " AND " if isinstance(expr, And) else " OR "
    return joiner.join(sub(e) for e in expr.operands)


# -- rules -------------------------------------------------------------------

@dataclass(frozen=True)
class Rule:
    item_id: str
    expr: Expr
    line: int = field(default=0, compare=False)

    def __str__(self) -> str:
        return f"{self.item_id}: {to_text(self.expr)}"


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]
    schema: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_SCHEMA))

    def __post_init__(self) -> None:
        ids = [r.item_id for r in self.rules]
        if len(ids) != len(set(ids)):
            raise ValueError("at most one rule per item is allowed")

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def item_ids(self) -> list[str]:
        return [r.item_id for r in self.rules]

    def rule_for(self, item_id: str) -> Rule | None:
        for r in self.rules:
            if r.item_id == item_id:
                return r
        return None

    def to_text(self) -> str:
        lines = [f"@feature {name}: {kind}" for name, kind in self.schema.items()]
        lines += [str(r) for r in self.rules]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ParseIssue:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


class RuleParseError(ValueError):
    """Collects every problem found in a rule file."""

    def __init__(self, issues: list[ParseIssue]):
        self.issues = issues
        super().__init__("\n".join(str(i) for i in issues))


class _SyntaxError(Exception):
    pass


# -- tokenizer / parser ------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<op><=|>=|==|!=|<>|[<>=≤≥≠])
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<comma>,)
  | (?P<name>[A-Za-z_][A-Za-z0-9_.]*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"AND", "OR", "NOT", "IN", "TRUE", "FALSE"}


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise _SyntaxError(f"unexpected character {text[pos]!r} at column {pos + 1}")
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        value = m.group()
        if kind == "name" and value.upper() in _KEYWORDS:
            kind, value = "kw", value.upper()
        tokens.append((kind, value))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str]]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind: str, value: str | None = None) -> str:
        tok = self.peek()
        if tok is None or tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            got = "end of line" if tok is None else repr(tok[1])
            raise _SyntaxError(f"expected {want}, got {got}")
        self.pos += 1
        return tok[1]

    def at(self, kind: str, value: str | None = None) -> bool:
        tok = self.peek()
        return tok is not None and tok[0] == kind and (value is None or tok[1] == value)

    def parse(self) -> Expr:
        expr = self.parse_or()
        if self.peek() is not None:
            raise _SyntaxError(f"unexpected {self.peek()[1]!r}")
        return expr

    def parse_or(self) -> Expr:
        parts = [self.parse_and()]
        while self.at("kw", "OR"):
            self.pos += 1
            parts.append(self.parse_and())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def parse_and(self) -> Expr:
        parts = [self.parse_not()]
        while self.at("kw", "AND"):
            self.pos += 1
            parts.append(self.parse_not())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def parse_not(self) -> Expr:
        if self.at("kw", "NOT"):
            self.pos += 1
            return Not(self.parse_not())
        return self.parse_atom()

    def parse_literal(self) -> float | str:
        if self.at("string"):
            raw = self.take("string")[1:-1]
            return re.sub(r"\\(.)", r"\1", raw)
        if self.at("number"):
            return float(self.take("number"))
        tok = self.peek()
        raise _SyntaxError(f"expected a literal, got {'end of line' if tok is None else repr(tok[1])}")

    def parse_atom(self) -> Expr:
        if self.at("lparen"):
            self.pos += 1
            expr = self.parse_or()
            self.take("rparen")
            return expr
        if self.at("kw", "TRUE") or self.at("kw", "FALSE"):
            return Const(self.take("kw") == "TRUE")
        name = self.take("name")
        if self.at("kw", "IN"):
            self.pos += 1
            self.take("lparen")
            values = [self.parse_literal()]
            while self.at("comma"):
                self.pos += 1
                values.append(self.parse_literal())
            self.take("rparen")
            return InSet(name, tuple(values))
        op = _CMP_ALIASES[self.take("op")]
        return Compare(name, op, self.parse_literal())


def parse_expression(text: str) -> Expr:
    """Parse a bare boolean expression (no ``item_id:`` prefix)."""
    try:
        return _Parser(_tokenize(text)).parse()
    except _SyntaxError as exc:
        raise RuleParseError([ParseIssue(0, f"syntax error: {exc}")]) from None


def _type_issues(expr: Expr, schema: Mapping[str, str]) -> list[str]:
    out: list[str] = []

    def walk(e: Expr) -> None:
        if isinstance(e, (Compare, InSet)):
            kind = schema.get(e.feature)
            if kind is None:
                out.append(f"unknown feature {e.feature!r}")
                return
            values = (e.value,) if isinstance(e, Compare) else e.values
            if kind == CATEGORICAL:
                if isinstance(e, Compare) and e.op not in CATEGORICAL_OPS:
                    out.append(f"type mismatch: operator {e.op!r} on categorical feature {e.feature!r}")
                if any(not isinstance(v, str) for v in values):
                    out.append(f"type mismatch: numeric literal for categorical feature {e.feature!r}")
            elif any(isinstance(v, str) for v in values):
                out.append(f"type mismatch: string literal for numeric feature {e.feature!r}")
        elif isinstance(e, Not):
            walk(e.operand)
        elif isinstance(e, (And, Or)):
            for sub in e.operands:
                walk(sub)

    walk(expr)
    return out


_DECL_RE = re.compile(r"^@feature\s+([A-Za-z_][A-Za-z0-9_.]*)\s*:\s*(\w+)\s*$")
_RULE_RE = re.compile(r"^([^:\s][^:]*?)\s*:\s*(.*)$")


def parse_rules(text: str, schema: Mapping[str, str] | None = None) -> RuleSet:
    """Parse rule-file contents into a :class:`RuleSet`.

    Raises :class:`RuleParseError` carrying every issue with its line number.
    """
    issues: list[ParseIssue] = []
    declared: dict[str, str] = {}
    pending: list[tuple[int, str, Expr]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("@"):
            m = _DECL_RE.match(line)
            if m is None or m.group(2) not in (NUMERIC, CATEGORICAL):
                issues.append(ParseIssue(lineno, f"bad feature declaration {line!r}"))
            else:
                declared[m.group(1)] = m.group(2)
            continue
        m = _RULE_RE.match(line)
        if m is None:
            issues.append(ParseIssue(lineno, "syntax error: expected 'item_id: expression'"))
            continue
        item_id, body = m.group(1), m.group(2)
        try:
            expr = _Parser(_tokenize(body)).parse()
        except _SyntaxError as exc:
            issues.append(ParseIssue(lineno, f"syntax error: {exc}"))
            continue
        if depth(expr) > MAX_DEPTH:
            issues.append(ParseIssue(lineno, f"expression deeper than {MAX_DEPTH}"))
            continue
        pending.append((lineno, item_id, expr))

    effective = dict(schema) if schema is not None else {}
    effective.update(declared)
    if not effective:
        effective = dict(DEFAULT_SCHEMA)

    rules: list[Rule] = []
    seen: set[str] = set()
    for lineno, item_id, expr in pending:
        for msg in _type_issues(expr, effective):
            issues.append(ParseIssue(lineno, msg))
        if item_id in seen:
            issues.append(ParseIssue(lineno, f"duplicate rule for item {item_id!r}"))
        seen.add(item_id)
        rules.append(Rule(item_id, expr, lineno))

    if issues:
        raise RuleParseError(sorted(issues, key=lambda i: i.line))
    return RuleSet(tuple(rules), effective)


def _strip_comment(line: str) -> str:
    in_str = False
    escaped = False
    for i, ch in enumerate(line):
        if escaped:
            escaped = False
        elif ch == "\\":
            escaped = True
        elif ch == '"':
            in_str = not in_str
        elif ch == "#" and not in_str:
            return line[:i]
    return line


def load_rules(path: str | Path, schema: Mapping[str, str] | None = None) -> RuleSet:
    return parse_rules(Path(path).read_text(encoding="utf-8"), schema)


# -- evaluation --------------------------------------------------------------

def _as_number(value) -> float | None:
    if isinstance(value, bool):
        return float(value)
    if isinstance(value, (int, float)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, str):
        try:
            out = float(value)
        except ValueError:
            return None
        return out if math.isfinite(out) else None
    return None


def _compare(left, op: str, right) -> bool:
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == "=":
        return left == right
    if op == ">=":
        return left >= right
    if op == ">":
        return left > right
    return left != right


def _predicate(feature: str, values, profile: UserProfile, schema: Mapping[str, str], op: str | None) -> bool:
    raw = profile.get(feature)
    if raw is None or (isinstance(raw, str) and raw == ""):
        return False
    if schema.get(feature) == CATEGORICAL:
        value = str(raw)
        if op is None:
            return value in values
        return _compare(value, op, values[0])
    value = _as_number(raw)
    if value is None:
        return False
    if op is None:
        return value in values
    return _compare(value, op, values[0])


def evaluate(expr: Expr, profile: UserProfile, schema: Mapping[str, str] = DEFAULT_SCHEMA) -> bool:
    """Evaluate ``expr`` for one user. A predicate on a missing feature is false."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Compare):
        return _predicate(expr.feature, (expr.value,), profile, schema, expr.op)
    if isinstance(expr, InSet):
        return _predicate(expr.feature, expr.values, profile, schema, None)
    if isinstance(expr, Not):
        return not evaluate(expr.operand, profile, schema)
    if isinstance(expr, And):
        return all(evaluate(e, profile, schema) for e in expr.operands)
    return any(evaluate(e, profile, schema) for e in expr.operands)


def eligible_items(profile: UserProfile, rules: RuleSet) -> list[str]:
    return [r.item_id for r in rules if evaluate(r.expr, profile, rules.schema)]
