"""Expression trees stored as prefix token sequences.

Evaluation is vectorized over dataset rows and never raises on numeric
trouble: division by zero, logs of non-positive values, and overflow
flow through as inf/nan for the caller to score.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from autopl.expr.tokens import BINARY_SYMBOLS, Token, TokenKind

_UNARY_FNS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "log10": np.log10,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "square": lambda x: x * x,
    "sqrt": np.sqrt,
}

_BINARY_FNS: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}


def is_complete(tokens: Sequence[Token]) -> bool:
    """True when the prefix sequence closes exactly one expression."""
    if not tokens:
        return False
    slots = 1
    for i, t in enumerate(tokens):
        slots += t.arity - 1
        if slots == 0:
            return i == len(tokens) - 1
    return False


@dataclass(frozen=True)
class ExpressionTree:
    """A complete prefix sequence plus values for its constant slots.

    Constant placeholders default to 1.0 until a fit assigns them.
    """

    tokens: tuple[Token, ...]
    constants: tuple[float, ...] = field(default=())

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        if not is_complete(tokens):
            raise ValueError("token sequence is not a complete prefix expression")
        n_const = sum(1 for t in tokens if t.kind is TokenKind.CONST)
        consts = tuple(float(c) for c in self.constants)
        if not consts and n_const:
            consts = (1.0,) * n_const
        if len(consts) != n_const:
            raise ValueError(
                f"expected {n_const} constants, got {len(consts)}")
        object.__setattr__(self, "constants", consts)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def n_constants(self) -> int:
        return len(self.constants)

    def with_constants(self, constants: Sequence[float]) -> "ExpressionTree":
        return ExpressionTree(self.tokens, tuple(float(c) for c in constants))

    def key(self) -> tuple:
        """Structural identity ignoring fitted constant values."""
        return tuple((t.name, t.kind.value, t.value) for t in self.tokens)


def _leaf_values(tree: ExpressionTree) -> list[float | None]:
    # constant slot values by token position, prefix order
    values: list[float | None] = []
    it = iter(tree.constants)
    for t in tree.tokens:
        values.append(next(it) if t.kind is TokenKind.CONST else None)
    return values


def evaluate(tree: ExpressionTree, X: np.ndarray) -> np.ndarray:
    """Evaluate over rows of X, returning one value per row.

    Non-finite intermediate results propagate instead of raising.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-d (rows, features)")
    n = X.shape[0]
    const_vals = _leaf_values(tree)
    stack: list[np.ndarray] = []
    with np.errstate(all="ignore"):
        for pos in range(len(tree.tokens) - 1, -1, -1):
            t = tree.tokens[pos]
            if t.kind is TokenKind.VARIABLE:
                if t.var_index is None or t.var_index >= X.shape[1]:
                    raise ValueError(f"variable {t.name!r} outside feature matrix")
                stack.append(X[:, t.var_index])
            elif t.kind is TokenKind.LITERAL:
                stack.append(np.float64(t.value))
            elif t.kind is TokenKind.CONST:
                stack.append(np.float64(const_vals[pos]))
            elif t.kind is TokenKind.UNARY:
                stack.append(_UNARY_FNS[t.name](stack.pop()))
            else:
                a = stack.pop()
                b = stack.pop()
                stack.append(_BINARY_FNS[t.name](a, b))
    out = np.asarray(stack.pop(), dtype=float)
    if out.ndim == 0:
        out = np.full(n, float(out))
    return out


def _render_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return format(v, ".4g")


def to_infix(tree: ExpressionTree) -> str:
    """Human-readable infix string; fitted constants at 4 significant digits."""
    const_vals = _leaf_values(tree)
    pos = 0

    def walk() -> str:
        nonlocal pos
        t = tree.tokens[pos]
        here = pos
        pos += 1
        if t.kind is TokenKind.BINARY:
            a = walk()
            b = walk()
            return f"({a} {BINARY_SYMBOLS[t.name]} {b})"
        if t.kind is TokenKind.UNARY:
            u = walk()
            if t.name == "square":
                return f"({u})^2"
            return f"{t.name}({u})"
        if t.kind is TokenKind.VARIABLE:
            return t.name
        if t.kind is TokenKind.LITERAL:
            return _render_number(t.value)
        return format(const_vals[here], ".4g")

    out = walk()
    if pos != len(tree.tokens):
        raise ValueError("dangling tokens after expression")
    return out


@dataclass(frozen=True)
class ScanResult:
    variables: frozenset[str]
    trig_variables: frozenset[str]


def structural_scan(tree: ExpressionTree) -> ScanResult:
    """Which variables the tree reads, and which sit under sin/cos."""
    from autopl.expr.tokens import TRIG_NAMES

    variables: set[str] = set()
    trig_variables: set[str] = set()

    def walk(pos: int, in_trig: bool) -> int:
        t = tree.tokens[pos]
        nxt = pos + 1
        if t.kind is TokenKind.VARIABLE:
            variables.add(t.name)
            if in_trig:
                trig_variables.add(t.name)
        below = in_trig or t.name in TRIG_NAMES
        for _ in range(t.arity):
            nxt = walk(nxt, below)
        return nxt

    walk(0, False)
    return ScanResult(frozenset(variables), frozenset(trig_variables))


def tree_to_json(tree: ExpressionTree) -> str:
    items = []
    for t in tree.tokens:
        if t.kind is TokenKind.VARIABLE:
            items.append({"var": t.name, "i": t.var_index})
        elif t.kind is TokenKind.LITERAL:
            items.append({"lit": t.value})
        elif t.kind is TokenKind.CONST:
            items.append({"const": True})
        else:
            items.append({"op": t.name, "kind": t.kind.value})
    return json.dumps({"tokens": items, "constants": list(tree.constants)})


def tree_from_json(text: str) -> ExpressionTree:
    obj = json.loads(text)
    tokens: list[Token] = []
    for item in obj["tokens"]:
        if "var" in item:
            tokens.append(Token.variable(item["var"], int(item["i"])))
        elif "lit" in item:
            tokens.append(Token.literal(item["lit"]))
        elif "const" in item:
            tokens.append(Token.const())
        elif item.get("kind") == TokenKind.BINARY.value:
            tokens.append(Token.binary(item["op"]))
        else:
            tokens.append(Token.unary(item["op"]))
    return ExpressionTree(tuple(tokens), tuple(obj.get("constants", ())))
