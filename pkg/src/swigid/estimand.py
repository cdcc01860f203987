"""Symbolic identification functionals.

An estimand is a tree of probability terms over value symbols, combined by
products, ratios and marginal sums, plus two binding forms: Substitute (a
notational restriction, rendered as an evaluation bar) and FixEval (pin a
symbol to a concrete state).  Expressions are immutable; ``simplify`` rewrites
to a normal form, ``evaluate`` computes against a joint table in whichever
arithmetic the table carries, and ``render``/``parse_machine`` give a
round-trippable machine text form.

Symbols carry the variable id and state count they range over, so sums can be
eliminated without consulting a graph.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .tables import JointTable


class EstimandError(ValueError):
    pass


class PositivityViolation(ArithmeticError):
    """Raised when evaluation conditions on (or divides by) a zero-probability
    event.  Carries the offending subexpression and the value context."""

    def __init__(self, term: "Expr", context: str):
        self.term = term
        self.context = context
        super().__init__(f"conditioning event has probability zero: {context}")


# ---------------------------------------------------------------------------
# Values and nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sym:
    """A value symbol ranging over the states of one variable."""

    name: str
    var: int
    k: int

    def __repr__(self) -> str:
        return f"Sym({self.name})"


@dataclass(frozen=True)
class Lit:
    """A concrete state label."""

    state: str

    def __repr__(self) -> str:
        return f"Lit({self.state})"


Value = Union[Sym, Lit]
Entry = tuple[int, Value]


@dataclass(frozen=True)
class Const:
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class ProbTerm:
    """p(of-entries | given-entries); an entry pairs a variable id with a
    symbol or literal state."""

    of: tuple[Entry, ...]
    given: tuple[Entry, ...] = ()

    def __post_init__(self):
        vs = [v for v, _ in self.of] + [v for v, _ in self.given]
        if len(set(vs)) != len(vs):
            raise EstimandError(f"repeated variable in probability term: {vs}")


@dataclass(frozen=True)
class Product:
    factors: tuple["Expr", ...]


@dataclass(frozen=True)
class Ratio:
    num: "Expr"
    den: "Expr"


@dataclass(frozen=True)
class MarginalSum:
    syms: tuple[Sym, ...]
    body: "Expr"

    def __post_init__(self):
        if len(set(self.syms)) != len(self.syms):
            raise EstimandError("repeated symbol in marginal sum")


@dataclass(frozen=True)
class Substitute:
    """Restriction: the body with each bound symbol replaced by its value;
    rendered as an evaluation bar and eliminated by ``simplify``."""

    bindings: tuple[tuple[Sym, Value], ...]
    body: "Expr"


@dataclass(frozen=True)
class FixEval:
    """Pin symbols to concrete states (used when a leftover context value is
    provably irrelevant); eliminated by ``simplify``."""

    bindings: tuple[tuple[Sym, Lit], ...]
    body: "Expr"


Expr = Union[Const, ProbTerm, Product, Ratio, MarginalSum, Substitute, FixEval]
Estimand = Expr

ONE = Const(Fraction(1))


# ---------------------------------------------------------------------------
# Symbol accounting
# ---------------------------------------------------------------------------


def _entry_syms(entries: Iterable[Entry]):
    for _, val in entries:
        if isinstance(val, Sym):
            yield val


def free_syms(e: Expr) -> frozenset[Sym]:
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, ProbTerm):
        return frozenset(_entry_syms(e.of)) | frozenset(_entry_syms(e.given))
    if isinstance(e, Product):
        out: frozenset[Sym] = frozenset()
        for f in e.factors:
            out |= free_syms(f)
        return out
    if isinstance(e, Ratio):
        return free_syms(e.num) | free_syms(e.den)
    if isinstance(e, MarginalSum):
        return free_syms(e.body) - set(e.syms)
    if isinstance(e, (Substitute, FixEval)):
        keys = {s for s, _ in e.bindings}
        vals = frozenset(v for _, v in e.bindings if isinstance(v, Sym))
        return (free_syms(e.body) - keys) | vals
    raise EstimandError(f"not an estimand node: {e!r}")


def all_syms(e: Expr) -> frozenset[Sym]:
    """Every symbol appearing anywhere, bound or free."""
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, ProbTerm):
        return frozenset(_entry_syms(e.of)) | frozenset(_entry_syms(e.given))
    if isinstance(e, Product):
        out: frozenset[Sym] = frozenset()
        for f in e.factors:
            out |= all_syms(f)
        return out
    if isinstance(e, Ratio):
        return all_syms(e.num) | all_syms(e.den)
    if isinstance(e, MarginalSum):
        return all_syms(e.body) | set(e.syms)
    if isinstance(e, (Substitute, FixEval)):
        out = all_syms(e.body) | {s for s, _ in e.bindings}
        return out | {v for _, v in e.bindings if isinstance(v, Sym)}
    raise EstimandError(f"not an estimand node: {e!r}")


def occurrences(e: Expr, s: Sym) -> int:
    """Free occurrences of ``s`` in ``e``."""
    if isinstance(e, Const):
        return 0
    if isinstance(e, ProbTerm):
        return sum(1 for v in _entry_syms(e.of) if v == s) + sum(
            1 for v in _entry_syms(e.given) if v == s
        )
    if isinstance(e, Product):
        return sum(occurrences(f, s) for f in e.factors)
    if isinstance(e, Ratio):
        return occurrences(e.num, s) + occurrences(e.den, s)
    if isinstance(e, MarginalSum):
        return 0 if s in e.syms else occurrences(e.body, s)
    if isinstance(e, (Substitute, FixEval)):
        n = sum(1 for _, v in e.bindings if v == s)
        if any(k == s for k, _ in e.bindings):
            return n
        return n + occurrences(e.body, s)
    raise EstimandError(f"not an estimand node: {e!r}")


def fresh_sym(base: Sym, taken: Iterable[Sym]) -> Sym:
    names = {t.name for t in taken}
    name = base.name + "'"
    while name in names:
        name += "'"
    return Sym(name, base.var, base.k)


def substitute(e: Expr, mapping: Mapping[Sym, Value]) -> Expr:
    """Replace free occurrences of each key symbol by its value."""
    if not mapping:
        return e
    if isinstance(e, Const):
        return e
    if isinstance(e, ProbTerm):
        sub = lambda ent: tuple(
            (v, mapping.get(val, val)) if isinstance(val, Sym) else (v, val)
            for v, val in ent
        )
        return ProbTerm(sub(e.of), sub(e.given))
    if isinstance(e, Product):
        return Product(tuple(substitute(f, mapping) for f in e.factors))
    if isinstance(e, Ratio):
        return Ratio(substitute(e.num, mapping), substitute(e.den, mapping))
    if isinstance(e, MarginalSum):
        bound = set(e.syms)
        inner = {k: v for k, v in mapping.items() if k not in bound}
        for v in inner.values():
            if isinstance(v, Sym) and v in bound:
                raise EstimandError(
                    f"substituting {v.name} here would capture it under a sum"
                )
        return MarginalSum(e.syms, substitute(e.body, inner))
    if isinstance(e, (Substitute, FixEval)):
        new_bind = tuple(
            (k, mapping.get(v, v) if isinstance(v, Sym) else v)
            for k, v in e.bindings
        )
        keys = {k for k, _ in e.bindings}
        inner = {k: v for k, v in mapping.items() if k not in keys}
        return type(e)(new_bind, substitute(e.body, inner))
    raise EstimandError(f"not an estimand node: {e!r}")


# ---------------------------------------------------------------------------
# Simplification
# ---------------------------------------------------------------------------


def simplify(e: Expr, max_passes: int = 200) -> Expr:
    """Rewrite to normal form: binding forms applied, constants folded,
    sums reduced by marginalization and factor pull-out, ratios flattened
    with common factors cancelled."""
    for _ in range(max_passes):
        nxt = _pass(e)
        if nxt == e:
            return e
        e = nxt
    raise EstimandError("simplification did not reach a fixed point")


def _pass(e: Expr) -> Expr:
    if isinstance(e, Const):
        return e
    if isinstance(e, ProbTerm):
        return ONE if not e.of else e
    if isinstance(e, Product):
        return _product([_pass(f) for f in e.factors])
    if isinstance(e, Ratio):
        return _ratio(_pass(e.num), _pass(e.den))
    if isinstance(e, MarginalSum):
        return _marg(e.syms, _pass(e.body))
    if isinstance(e, (Substitute, FixEval)):
        return substitute(_pass(e.body), dict(e.bindings))
    raise EstimandError(f"not an estimand node: {e!r}")


def _raw_product(factors: Sequence[Expr]) -> Expr:
    if not factors:
        return ONE
    if len(factors) == 1:
        return factors[0]
    return Product(tuple(factors))


def _product(factors: Sequence[Expr]) -> Expr:
    flat: list[Expr] = []
    for f in factors:
        if isinstance(f, Product):
            flat.extend(f.factors)
        else:
            flat.append(f)
    if any(isinstance(f, Ratio) for f in flat):
        # a quotient anywhere turns the whole product into one ratio
        nl: list[Expr] = []
        dl: list[Expr] = []
        for f in flat:
            _collect_ratio(f, nl, dl)
        return _ratio(_raw_product(nl), _raw_product(dl))
    const = Fraction(1)
    rest: list[Expr] = []
    for f in flat:
        if isinstance(f, Const):
            const *= f.value
        else:
            rest.append(f)
    if const == 0:
        return Const(Fraction(0))
    out = ([] if const == 1 else [Const(const)]) + rest
    if not out:
        return ONE
    if len(out) == 1:
        return out[0]
    return Product(tuple(out))


def _collect_ratio(e: Expr, num: list[Expr], den: list[Expr]) -> None:
    if isinstance(e, Product):
        for f in e.factors:
            _collect_ratio(f, num, den)
    elif isinstance(e, Ratio):
        _collect_ratio(e.num, num, den)
        _collect_ratio(e.den, den, num)
    else:
        num.append(e)


def _ratio(num: Expr, den: Expr) -> Expr:
    nl: list[Expr] = []
    dl: list[Expr] = []
    _collect_ratio(num, nl, dl)
    _collect_ratio(den, dl, nl)

    cn = Fraction(1)
    cd = Fraction(1)
    nl2: list[Expr] = []
    for f in nl:
        if isinstance(f, Const):
            cn *= f.value
        else:
            nl2.append(f)
    dl2: list[Expr] = []
    for f in dl:
        if isinstance(f, Const):
            cd *= f.value
        else:
            dl2.append(f)

    # cancel common factors (multiset, first match)
    for f in list(dl2):
        if f in nl2:
            nl2.remove(f)
            dl2.remove(f)

    if cd == 0:
        raise EstimandError("division by a zero constant")
    const = cn / cd

    # divide denominator terms into numerator terms chain-wise
    changed = True
    while changed:
        changed = False
        for i, d in enumerate(dl2):
            if not isinstance(d, ProbTerm):
                continue
            for j, n in enumerate(nl2):
                if not isinstance(n, ProbTerm):
                    continue
                rep = _chain_divide(n, d)
                if rep is not None:
                    nl2[j : j + 1] = [t for t in rep if t != ONE]
                    del dl2[i]
                    changed = True
                    break
            if changed:
                break

    top = _product(([] if const == 1 else [Const(const)]) + nl2)
    if not dl2:
        return top
    return Ratio(top, _product(dl2))


def _chain_divide(num: Expr, den: Expr) -> tuple[Expr, ...] | None:
    """p(O|G) / p(O2|G2) with O2 <= O, G <= G2 and G2-G <= O rewrites to
    p(G2-G | G) * p(O-(O2+(G2-G)) | O2+G2): divide out the tail of a chain
    of conditionals."""
    if not (isinstance(num, ProbTerm) and isinstance(den, ProbTerm)):
        return None
    o, g = dict(num.of), dict(num.given)
    o2, g2 = dict(den.of), dict(den.given)
    merged: dict[int, Value] = {}
    for d in (o, g, o2, g2):
        for v, val in d.items():
            if merged.setdefault(v, val) != val:
                return None
    if not (set(o2) <= set(o) and set(g) <= set(g2)):
        return None
    mid = set(g2) - set(g)
    if not mid <= set(o):
        return None
    tail = set(o) - set(o2) - mid
    ent = lambda vs: tuple(sorted(((v, merged[v]) for v in vs)))
    first = ProbTerm(ent(mid), ent(set(g)))
    second = ProbTerm(ent(tail), ent(set(o2) | set(g2)))
    out = tuple(t for t in (first, second) if t.of)
    return out if out else (ONE,)


def _marg(syms: Sequence[Sym], body: Expr) -> Expr:
    syms = list(syms)
    if not syms:
        return body
    if isinstance(body, MarginalSum):
        overlap = set(syms) & set(body.syms)
        if overlap:
            raise EstimandError(f"shadowed symbols under nested sums: {overlap}")
        return _marg(syms + list(body.syms), body.body)

    if isinstance(body, Ratio):
        # sum past a denominator that does not mention the bound symbols
        den_free = [s for s in syms if occurrences(body.den, s) == 0]
        if den_free:
            rest = [s for s in syms if s not in den_free]
            core: Expr = Ratio(_marg(den_free, body.num), body.den)
            return core if not rest else MarginalSum(tuple(rest), core)

    factors = list(body.factors) if isinstance(body, Product) else [body]

    # marginalize a symbol appearing exactly once, in one of-entry
    changed = True
    while changed:
        changed = False
        for s in sorted(syms, key=lambda t: (t.var, t.name)):
            if sum(occurrences(f, s) for f in factors) != 1:
                continue
            for i, f in enumerate(factors):
                if not (isinstance(f, ProbTerm) and occurrences(f, s) == 1):
                    continue
                if any(val == s for _, val in f.given):
                    break
                factors[i] = ProbTerm(
                    tuple(en for en in f.of if en[1] != s), f.given
                )
                syms.remove(s)
                changed = True
                break
            if changed:
                break

    # a symbol absent from the body contributes its state count
    mult = Fraction(1)
    for s in list(syms):
        if sum(occurrences(f, s) for f in factors) == 0:
            mult *= s.k
            syms.remove(s)

    inner = _product(factors)
    if not syms:
        return _product([Const(mult), inner])

    # pull factors free of every remaining bound symbol out of the sum
    if isinstance(inner, Product):
        free = [f for f in inner.factors if all(occurrences(f, s) == 0 for s in syms)]
        bound = [f for f in inner.factors if any(occurrences(f, s) > 0 for s in syms)]
        if free:
            return _product(
                [Const(mult)] + free + [MarginalSum(tuple(syms), _product(bound))]
            )
    return _product([Const(mult), MarginalSum(tuple(syms), inner)])


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _val_token(val: Value) -> str:
    return val.name if isinstance(val, Sym) else val.state


def _entry_token(var: int, val: Value, names: Sequence[str]) -> str:
    if isinstance(val, Sym) and val.var == var:
        return val.name
    return f"{names[var]}={_val_token(val)}"


def _text(e: Expr, names: Sequence[str]) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, ProbTerm):
        of = ",".join(_entry_token(v, val, names) for v, val in e.of)
        if e.given:
            gv = ",".join(_entry_token(v, val, names) for v, val in e.given)
            return f"p({of}|{gv})"
        return f"p({of})"
    if isinstance(e, Product):
        parts = []
        last = len(e.factors) - 1
        for i, f in enumerate(e.factors):
            s = _text(f, names)
            if isinstance(f, (Ratio, Substitute, FixEval, Product)) or (
                isinstance(f, MarginalSum) and i != last
            ):
                s = f"({s})"
            parts.append(s)
        return " ".join(parts)
    if isinstance(e, Ratio):
        ns = _text(e.num, names)
        ds = _text(e.den, names)
        if not isinstance(e.num, (ProbTerm, Const)):
            ns = f"[{ns}]"
        if not isinstance(e.den, (ProbTerm, Const)):
            ds = f"[{ds}]"
        return f"{ns} / {ds}"
    if isinstance(e, MarginalSum):
        body = _text(e.body, names)
        return f"Σ_{{{','.join(s.name for s in e.syms)}}} {body}"
    if isinstance(e, Substitute):
        b = ",".join(f"{s.name}={_val_token(v)}" for s, v in e.bindings)
        return f"[{_text(e.body, names)}]|_{{{b}}}"
    if isinstance(e, FixEval):
        b = ",".join(f"{s.name}→{v.state}" for s, v in e.bindings)
        return f"[{_text(e.body, names)}]|_{{{b}}}"
    raise EstimandError(f"not an estimand node: {e!r}")


def _machine(e: Expr, names: Sequence[str]) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, ProbTerm):
        of = " ".join(f"{names[v]}={_val_token(val)}" for v, val in e.of)
        if e.given:
            gv = " ".join(f"{names[v]}={_val_token(val)}" for v, val in e.given)
            return f"(p ({of}) ({gv}))"
        return f"(p ({of}))"
    if isinstance(e, Product):
        return f"(prod {' '.join(_machine(f, names) for f in e.factors)})"
    if isinstance(e, Ratio):
        return f"(ratio {_machine(e.num, names)} {_machine(e.den, names)})"
    if isinstance(e, MarginalSum):
        syms = " ".join(s.name for s in e.syms)
        return f"(sum ({syms}) {_machine(e.body, names)})"
    raise EstimandError(
        "binding forms do not survive simplification; cannot serialize"
    )


def render(e: Expr, names: Sequence[str], fmt: str = "text") -> str:
    """Text form renders the expression as written (restriction bars kept);
    machine form serializes the simplified normal form."""
    if fmt == "text":
        return _text(e, names)
    if fmt == "machine":
        return _machine(simplify(e), names)
    raise EstimandError(f"unknown render format {fmt!r}")


# ---------------------------------------------------------------------------
# Machine-format parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")
_CONST_RE = re.compile(r"^-?\d+(/\d+)?$")
_STATE_RE = re.compile(r"^\d+$")


def _tokenize(text: str) -> list[str]:
    toks = _TOKEN_RE.findall(text)
    if "".join(toks).replace("(", "").replace(")", "") != "".join(text.split()).replace(
        "(", ""
    ).replace(")", ""):
        raise EstimandError("unparseable characters in machine text")
    return toks


def _read(toks: list[str], pos: int):
    if pos >= len(toks):
        raise EstimandError("unexpected end of machine text")
    t = toks[pos]
    if t == "(":
        out = []
        pos += 1
        while pos < len(toks) and toks[pos] != ")":
            node, pos = _read(toks, pos)
            out.append(node)
        if pos >= len(toks):
            raise EstimandError("missing closing parenthesis")
        return out, pos + 1
    if t == ")":
        raise EstimandError("unexpected token ')'")
    return t, pos + 1


def parse_machine(text: str, g) -> Expr:
    """Parse the machine s-expression format against a graph's variables."""
    toks = _tokenize(text)
    tree, pos = _read(toks, 0)
    if pos != len(toks):
        raise EstimandError(f"unexpected token {toks[pos]!r} after expression")

    sym_var: dict[str, int] = {}

    def scan(node) -> None:
        if not isinstance(node, list) or not node:
            return
        if node[0] == "p":
            for part in node[1:]:
                if not isinstance(part, list):
                    raise EstimandError(f"unexpected token {part!r} in (p ...)")
                for ent in part:
                    if not isinstance(ent, str) or "=" not in ent:
                        raise EstimandError(f"bad entry {ent!r}; expected VAR=value")
                    vname, _, val = ent.partition("=")
                    try:
                        vid = g.id_of(vname)
                    except Exception:
                        raise EstimandError(f"unknown variable {vname!r}")
                    if not _STATE_RE.match(val):
                        prev = sym_var.setdefault(val, vid)
                        if prev != vid:
                            raise EstimandError(
                                f"symbol {val!r} used for two variables"
                            )
        else:
            for child in node[1:]:
                scan(child)

    scan(tree)

    def mksym(name: str) -> Sym:
        if name not in sym_var:
            raise EstimandError(
                f"symbol {name!r} never appears in a probability term"
            )
        vid = sym_var[name]
        return Sym(name, vid, g.decl(vid).k)

    def entry(ent: str) -> Entry:
        vname, _, val = ent.partition("=")
        vid = g.id_of(vname)
        if _STATE_RE.match(val):
            if val not in g.decl(vid).states:
                raise EstimandError(f"{val!r} is not a state of {vname}")
            return (vid, Lit(val))
        return (vid, mksym(val))

    def build(node) -> Expr:
        if isinstance(node, str):
            if _CONST_RE.match(node):
                return Const(Fraction(node))
            raise EstimandError(f"unexpected token {node!r}")
        if not node:
            raise EstimandError("empty expression ()")
        head = node[0]
        if head == "p":
            if len(node) not in (2, 3):
                raise EstimandError("(p ...) takes one or two entry lists")
            of = tuple(entry(x) for x in node[1])
            given = tuple(entry(x) for x in node[2]) if len(node) == 3 else ()
            return ProbTerm(of, given)
        if head == "prod":
            if len(node) < 2:
                raise EstimandError("(prod ...) needs at least one factor")
            return Product(tuple(build(x) for x in node[1:]))
        if head == "ratio":
            if len(node) != 3:
                raise EstimandError("(ratio ...) takes exactly two expressions")
            return Ratio(build(node[1]), build(node[2]))
        if head == "sum":
            if len(node) != 3 or not isinstance(node[1], list):
                raise EstimandError("(sum (syms) body) malformed")
            syms = tuple(mksym(s) for s in node[1])
            return MarginalSum(syms, build(node[2]))
        raise EstimandError(f"unexpected token {head!r}")

    return build(tree)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate(
    e: Expr,
    table: JointTable,
    bindings: Mapping | None = None,
    names: Sequence[str] | None = None,
) -> JointTable:
    """Evaluate against a joint table over variable-id axes.

    ``bindings`` maps symbols (or their names) to state labels or indices.
    Unbound free symbols become axes of the result, ordered by (variable,
    name).  Arithmetic follows the table: exact Fractions in, exact out.
    Conditioning on a zero-probability event raises PositivityViolation.
    """
    free = sorted(free_syms(e), key=lambda s: (s.var, s.name))
    env: dict[Sym, int] = {}
    if bindings:
        by_name: dict[str, Sym] = {}
        for s in free:
            by_name.setdefault(s.name, s)
        for key, state in bindings.items():
            s = key if isinstance(key, Sym) else by_name.get(str(key))
            if s is None:
                continue
            env[s] = table.state_index(s.var, state)
    out_syms = [s for s in free if s not in env]
    sizes = tuple(s.k for s in out_syms)
    exact = table.is_exact
    zero = Fraction(0) if exact else 0.0
    total = table.total()
    nametab = names

    def term_text(t: ProbTerm, env2) -> str:
        def tok(v, val):
            vn = nametab[v] if nametab else f"v{v}"
            if isinstance(val, Lit):
                return f"{vn}={val.state}"
            return f"{vn}={env2.get(val, '?')}"

        of = ",".join(tok(v, val) for v, val in t.of)
        gv = ",".join(tok(v, val) for v, val in t.given)
        return f"p({of}|{gv})" if t.given else f"p({of})"

    def resolve(var: int, val: Value, env2) -> int:
        if isinstance(val, Lit):
            return table.state_index(var, val.state)
        if val not in env2:
            raise EstimandError(f"unbound symbol {val.name!r}")
        return env2[val]

    def ev(x: Expr, env2):
        if isinstance(x, Const):
            return x.value if exact else float(x.value)
        if isinstance(x, ProbTerm):
            axes = tuple(v for v, _ in x.of) + tuple(v for v, _ in x.given)
            idx = tuple(resolve(v, val, env2) for v, val in x.of + x.given)
            joint = table.marginal(axes)[idx]
            if x.given:
                gaxes = tuple(v for v, _ in x.given)
                gidx = tuple(resolve(v, val, env2) for v, val in x.given)
                den = table.marginal(gaxes)[gidx]
                if den == 0:
                    raise PositivityViolation(x, term_text(x, env2))
                return joint / den
            return joint / total
        if isinstance(x, Product):
            out = Fraction(1) if exact else 1.0
            for f in x.factors:
                out = out * ev(f, env2)
            return out
        if isinstance(x, Ratio):
            den = ev(x.den, env2)
            if den == 0:
                raise PositivityViolation(x, "ratio denominator is zero")
            return ev(x.num, env2) / den
        if isinstance(x, MarginalSum):
            acc = zero
            grid = [range(s.k) for s in x.syms]
            for combo in np.ndindex(*[s.k for s in x.syms]) if grid else [()]:
                env3 = dict(env2)
                for s, i in zip(x.syms, combo):
                    env3[s] = int(i)
                acc = acc + ev(x.body, env3)
            return acc
        if isinstance(x, (Substitute, FixEval)):
            env3 = dict(env2)
            for s, v in x.bindings:
                if isinstance(v, Lit):
                    env3[s] = table.state_index(s.var, v.state)
                else:
                    if v not in env2:
                        raise EstimandError(f"unbound symbol {v.name!r}")
                    env3[s] = env2[v]
            return ev(x.body, env3)
        raise EstimandError(f"not an estimand node: {x!r}")

    if exact:
        vals = np.empty(int(np.prod(sizes, dtype=np.int64)) if sizes else 1, dtype=object)
        flat = 0
        for combo in np.ndindex(*sizes) if sizes else [()]:
            env2 = dict(env)
            for s, i in zip(out_syms, combo):
                env2[s] = int(i)
            vals[flat] = ev(e, env2)
            flat += 1
        vals = vals.reshape(sizes)
    else:
        vals = np.zeros(sizes, dtype=np.float64)
        for combo in np.ndindex(*sizes) if sizes else [()]:
            env2 = dict(env)
            for s, i in zip(out_syms, combo):
                env2[s] = int(i)
            if sizes:
                vals[combo] = ev(e, env2)
            else:
                vals = np.array(ev(e, env2), dtype=np.float64)

    labels = None
    if table.labels is not None:
        labels = []
        for s in out_syms:
            try:
                labels.append(table.labels[table.axis(s.var)])
            except KeyError:
                labels.append(None)
        labels = tuple(labels)
    return JointTable(tuple(out_syms), sizes, vals, labels)
