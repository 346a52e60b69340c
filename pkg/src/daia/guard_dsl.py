"""Guard DSL: text format for the engagement transducer and its compiler.

A transducer file names an initial state and the four states, each with an
ordered rule list.  A rule is ``on <expr> -> <State> [relabel <policy>]``;
the first rule whose guard holds fires, and a state with no matching rule
self-loops.  Guards combine signal names with ``!``/``&&``/``||`` (tightest
to loosest) and the temporal window operators ``sustained(e, k)``,
``any_in(e, k)``, ``none_in(e, k)``, which look at the most recent k frames
(current frame included).  Temporal operators cannot nest.

Signals resolve against the classifier registry plus five derived names:
``intent`` (the appended intent-classifier bit), ``facing``, ``special_any``,
``both_stopped``, and ``any_moving``.  Compiled guards run on an integer
bitmask per frame, so evaluation is a handful of mask operations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .features import BANK_SIZE, bank_registry
from .states import STATE_ORDER, EngagementState


class SyntaxError(ValueError):  # noqa: A001 - the DSL's own syntax error
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class UnknownState(ValueError):
    """A state name outside the four engagement states."""


class DuplicateState(ValueError):
    """The same state is defined twice."""


class BadWindow(ValueError):
    """Temporal window below 1 frame."""


class NestedTemporal(ValueError):
    """Temporal operator inside another temporal operator."""


class UnknownSignal(ValueError):
    """Guard references a signal absent from the registry and derived list."""


class UnknownRelabelPolicy(ValueError):
    """Rule names a relabel policy the engine does not implement."""


STATE_NAMES = tuple(s.name for s in STATE_ORDER)
TEMPORAL_OPS = ("sustained", "any_in", "none_in")
RELABEL_POLICIES = ("speed_onset",)
INTENT_BIT = BANK_SIZE  # the intent decision rides just above the 37 posture bits


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Signal:
    name: str


@dataclass(frozen=True)
class Not:
    child: "Expr"


@dataclass(frozen=True)
class And:
    children: tuple["Expr", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["Expr", ...]


@dataclass(frozen=True)
class Temporal:
    op: str  # sustained | any_in | none_in
    child: "Expr"
    window: int


Expr = object  # Signal | Not | And | Or | Temporal


@dataclass(frozen=True)
class Rule:
    guard: Expr
    target: str
    relabel: Optional[str] = None


@dataclass(frozen=True)
class StateDef:
    name: str
    rules: tuple[Rule, ...]


@dataclass(frozen=True)
class FstSpec:
    initial: str
    states: tuple[StateDef, ...]

    def state(self, name: str) -> StateDef:
        for s in self.states:
            if s.name == name:
                return s
        raise KeyError(name)


# --------------------------------------------------------------------------
# Tokenizer
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # ident | int | punct | eof
    value: str
    line: int
    col: int


_PUNCT2 = ("->", "&&", "||")
_PUNCT1 = "(){},!"


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c in " \t\r":
            i += 1
            col += 1
        elif c == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif text[i : i + 2] in _PUNCT2:
            tokens.append(_Token("punct", text[i : i + 2], line, col))
            i += 2
            col += 2
        elif c in _PUNCT1:
            tokens.append(_Token("punct", c, line, col))
            i += 1
            col += 1
        elif c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("int", text[i:j], line, col))
            col += j - i
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], line, col))
            col += j - i
            i = j
        else:
            raise SyntaxError(f"unexpected character {c!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


# --------------------------------------------------------------------------
# Parser (recursive descent, precedence ! > && > ||)
# --------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.pos]

    def _fail(self, message: str):
        raise SyntaxError(message, self.cur.line, self.cur.col)

    def advance(self) -> _Token:
        t = self.cur
        self.pos += 1
        return t

    def expect_punct(self, value: str) -> None:
        if not (self.cur.kind == "punct" and self.cur.value == value):
            self._fail(f"expected {value!r}, got {self.cur.value or 'end of file'!r}")
        self.advance()

    def expect_ident(self, keyword: Optional[str] = None) -> str:
        if self.cur.kind != "ident" or (keyword is not None and self.cur.value != keyword):
            want = repr(keyword) if keyword else "a name"
            self._fail(f"expected {want}, got {self.cur.value or 'end of file'!r}")
        return self.advance().value

    def at_ident(self, value: str) -> bool:
        return self.cur.kind == "ident" and self.cur.value == value

    # expr := or ; or := and ("||" and)* ; and := unary ("&&" unary)*
    def parse_expr(self, in_temporal: bool) -> Expr:
        parts = [self.parse_and(in_temporal)]
        while self.cur.kind == "punct" and self.cur.value == "||":
            self.advance()
            parts.append(self.parse_and(in_temporal))
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def parse_and(self, in_temporal: bool) -> Expr:
        parts = [self.parse_unary(in_temporal)]
        while self.cur.kind == "punct" and self.cur.value == "&&":
            self.advance()
            parts.append(self.parse_unary(in_temporal))
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def parse_unary(self, in_temporal: bool) -> Expr:
        if self.cur.kind == "punct" and self.cur.value == "!":
            self.advance()
            return Not(self.parse_unary(in_temporal))
        return self.parse_primary(in_temporal)

    def parse_primary(self, in_temporal: bool) -> Expr:
        if self.cur.kind == "punct" and self.cur.value == "(":
            self.advance()
            e = self.parse_expr(in_temporal)
            self.expect_punct(")")
            return e
        if self.cur.kind == "ident" and self.cur.value in TEMPORAL_OPS:
            op_tok = self.advance()
            if in_temporal:
                raise NestedTemporal(f"{op_tok.line}:{op_tok.col}: temporal operator inside temporal window")
            self.expect_punct("(")
            child = self.parse_expr(True)
            self.expect_punct(",")
            if self.cur.kind != "int":
                self._fail("expected a window length")
            k_tok = self.advance()
            self.expect_punct(")")
            k = int(k_tok.value)
            if k < 1:
                raise BadWindow(f"{k_tok.line}:{k_tok.col}: window must be >= 1, got {k}")
            return Temporal(op_tok.value, child, k)
        if self.cur.kind == "ident":
            return Signal(self.advance().value)
        self._fail(f"expected an expression, got {self.cur.value or 'end of file'!r}")

    def parse_rule(self) -> Rule:
        self.expect_ident("on")
        guard = self.parse_expr(False)
        self.expect_punct("->")
        target = self.expect_ident()
        relabel = None
        if self.at_ident("relabel"):
            self.advance()
            relabel = self.expect_ident()
        return Rule(guard, target, relabel)

    def parse_file(self) -> FstSpec:
        self.expect_ident("initial")
        initial = self.expect_ident()
        states: list[StateDef] = []
        while self.at_ident("state"):
            self.advance()
            name = self.expect_ident()
            if name not in STATE_NAMES:
                raise UnknownState(f"state {name!r} is not an engagement state")
            if any(s.name == name for s in states):
                raise DuplicateState(f"state {name!r} defined twice")
            self.expect_punct("{")
            rules: list[Rule] = []
            while self.at_ident("on"):
                rules.append(self.parse_rule())
            self.expect_punct("}")
            states.append(StateDef(name, tuple(rules)))
        if self.cur.kind != "eof":
            self._fail(f"expected 'state', got {self.cur.value!r}")
        if len(states) != len(STATE_NAMES):
            self._fail(f"expected {len(STATE_NAMES)} state definitions, got {len(states)}")
        defined = {s.name for s in states}
        if initial not in defined:
            raise UnknownState(f"initial state {initial!r} is not defined")
        for s in states:
            for r in s.rules:
                if r.target not in defined:
                    raise UnknownState(f"rule target {r.target!r} is not defined")
        return FstSpec(initial, tuple(states))


def parse(text: str) -> FstSpec:
    return _Parser(text).parse_file()


# --------------------------------------------------------------------------
# Formatter (inverse of parse up to structural equality)
# --------------------------------------------------------------------------

def _format_expr(e: Expr, parent: str = "or") -> str:
    # parent in {"or", "and", "not"}: how tightly the context binds
    if isinstance(e, Signal):
        return e.name
    if isinstance(e, Temporal):
        return f"{e.op}({_format_expr(e.child, 'or')}, {e.window})"
    if isinstance(e, Not):
        return "!" + _format_expr(e.child, "not")
    if isinstance(e, And):
        body = " && ".join(_format_expr(c, "and") for c in e.children)
        return f"({body})" if parent in ("and", "not") else body
    if isinstance(e, Or):
        body = " || ".join(_format_expr(c, "or_child") for c in e.children)
        return f"({body})" if parent in ("and", "not", "or_child") else body
    raise TypeError(f"not an expression node: {e!r}")


def format_expr(e: Expr) -> str:
    return _format_expr(e)


def format_spec(spec: FstSpec) -> str:
    out = [f"initial {spec.initial}", ""]
    for s in spec.states:
        out.append(f"state {s.name} {{")
        for r in s.rules:
            line = f"  on {_format_expr(r.guard)} -> {r.target}"
            if r.relabel:
                line += f" relabel {r.relabel}"
            out.append(line)
        out.append("}")
        out.append("")
    return "\n".join(out)


# --------------------------------------------------------------------------
# Compilation to mask predicates
# --------------------------------------------------------------------------

def _group_indices(group: str) -> list[int]:
    return [i for i, _, g in bank_registry() if g == group]


def _derived_masks(bit_of: dict[str, int], intent_bit: int) -> dict[str, tuple[str, int]]:
    """Each derived signal is (mode, mask): mode 'any' or 'all' over mask bits."""

    def mask_of(names: Sequence[str]) -> int:
        m = 0
        for name in names:
            if name not in bit_of:
                return -1  # dependency missing in this registry
            m |= 1 << bit_of[name]
        return m

    special = [name for _, name, g in bank_registry() if g == "special"]
    table = {
        "intent": ("any", 1 << intent_bit),
        "facing": ("any", mask_of(["facing_sensor"])),
        "special_any": ("any", mask_of(special)),
        "both_stopped": ("all", mask_of(["r_speed_stopped", "l_speed_stopped"])),
        "any_moving": ("any", mask_of(["r_speed_slow", "r_speed_fast", "l_speed_slow", "l_speed_fast"])),
    }
    return {k: v for k, v in table.items() if v[1] != -1}


StaticFn = Callable[[int], bool]
GuardFn = Callable[[Sequence[int]], bool]


@dataclass(frozen=True)
class CompiledRule:
    guard: GuardFn
    target: EngagementState
    relabel: Optional[str]
    text: str  # formatted guard, for traces


@dataclass(frozen=True)
class TransitionTable:
    initial: EngagementState
    rules: dict[EngagementState, tuple[CompiledRule, ...]]
    max_window: int

    def next_state(
        self, state: EngagementState, history: Sequence[int]
    ) -> tuple[EngagementState, Optional[str], Optional[int]]:
        """First matching rule wins; no match self-loops. Returns (state, relabel, rule#)."""
        for k, rule in enumerate(self.rules[state]):
            if rule.guard(history):
                return rule.target, rule.relabel, k
        return state, None, None


def _compile_static(e: Expr, resolve: Callable[[str], tuple[str, int]]) -> StaticFn:
    if isinstance(e, Signal):
        mode, mask = resolve(e.name)
        if mode == "any":
            return lambda m: bool(m & mask)
        return lambda m: (m & mask) == mask
    if isinstance(e, Not):
        child = _compile_static(e.child, resolve)
        return lambda m: not child(m)
    if isinstance(e, And):
        parts = [_compile_static(c, resolve) for c in e.children]
        return lambda m: all(p(m) for p in parts)
    if isinstance(e, Or):
        parts = [_compile_static(c, resolve) for c in e.children]
        return lambda m: any(p(m) for p in parts)
    raise TypeError(f"temporal operator where an instantaneous expression is required: {e!r}")


def _compile_guard(e: Expr, resolve: Callable[[str], tuple[str, int]]) -> GuardFn:
    if isinstance(e, Temporal):
        inner = _compile_static(e.child, resolve)
        k = e.window
        if e.op == "sustained":
            # needs a full k-frame history: unknown past never satisfies "held throughout"
            return lambda h: len(h) >= k and all(inner(m) for m in h[-k:])
        if e.op == "any_in":
            return lambda h: any(inner(m) for m in h[-k:])
        return lambda h: not any(inner(m) for m in h[-k:])
    if isinstance(e, Not):
        child = _compile_guard(e.child, resolve)
        return lambda h: not child(h)
    if isinstance(e, And):
        parts = [_compile_guard(c, resolve) for c in e.children]
        return lambda h: all(p(h) for p in parts)
    if isinstance(e, Or):
        parts = [_compile_guard(c, resolve) for c in e.children]
        return lambda h: any(p(h) for p in parts)
    static = _compile_static(e, resolve)
    return lambda h: static(h[-1])


def _max_window(e: Expr) -> int:
    if isinstance(e, Temporal):
        return e.window
    if isinstance(e, Not):
        return _max_window(e.child)
    if isinstance(e, (And, Or)):
        return max(_max_window(c) for c in e.children)
    return 1


def _make_resolver(registry: Optional[Sequence[str]]) -> Callable[[str], tuple[str, int]]:
    if registry is None:
        registry = [name for _, name, _ in bank_registry()]
    bit_of = {name: i for i, name in enumerate(registry)}
    derived = _derived_masks(bit_of, intent_bit=len(registry))

    def resolve(name: str) -> tuple[str, int]:
        if name in bit_of:
            return "any", 1 << bit_of[name]
        if name in derived:
            return derived[name]
        raise UnknownSignal(f"unknown signal {name!r}")

    return resolve


def compile_guard(e: Expr, registry: Optional[Sequence[str]] = None) -> GuardFn:
    """Compile one guard expression against a registry (default: the bank)."""
    return _compile_guard(e, _make_resolver(registry))


def compile_spec(spec: FstSpec, registry: Optional[Sequence[str]] = None) -> TransitionTable:
    """Resolve signal names and build the executable transition table."""
    resolve = _make_resolver(registry)
    rules: dict[EngagementState, tuple[CompiledRule, ...]] = {}
    max_window = 1
    for sdef in spec.states:
        compiled = []
        for r in sdef.rules:
            if r.relabel is not None and r.relabel not in RELABEL_POLICIES:
                raise UnknownRelabelPolicy(f"unknown relabel policy {r.relabel!r}")
            compiled.append(
                CompiledRule(
                    guard=_compile_guard(r.guard, resolve),
                    target=EngagementState[r.target],
                    relabel=r.relabel,
                    text=format_expr(r.guard),
                )
            )
            max_window = max(max_window, _max_window(r.guard))
        rules[EngagementState[sdef.name]] = tuple(compiled)
    return TransitionTable(initial=EngagementState[spec.initial], rules=rules, max_window=max_window)


def make_input(mask: int, intent: int) -> int:
    """Pack a 37-bit classifier mask and the intent decision into one input word."""
    return mask | (1 << INTENT_BIT if intent else 0)


# The stock transducer: wait for the user to face the display, arm on an
# intention posture, call the action once movement is sustained, and repaint
# the frames back to where the hand actually started moving.
DEFAULT_FST_TEXT = """\
initial Disengagement

state Disengagement {
  on facing && !special_any -> Attention
}

state Attention {
  on !facing || special_any -> Disengagement
  on intent && any_in(both_stopped, 10) -> Intention
  on intent && sustained(any_moving, 5) -> Action relabel speed_onset
}

state Intention {
  on !facing || special_any -> Disengagement
  on sustained(!intent, 15) -> Attention
  on intent && sustained(any_moving, 5) -> Action relabel speed_onset
}

state Action {
  on !facing || special_any -> Disengagement
  on intent && sustained(both_stopped, 10) -> Intention
}
"""


def default_table() -> TransitionTable:
    return compile_spec(parse(DEFAULT_FST_TEXT))
