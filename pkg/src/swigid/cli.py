"""Command line interface.

Subcommands: ``project`` (latent projection), ``swig`` (build and print an
intervention graph), ``sep`` (separation queries), ``pocalc`` (the three
rewrite rules), ``identify`` (estimand or hedge), and ``verify`` (check an
identified estimand against the exact oracle on random models).

Exit codes: 0 on success, 2 when a query is not identified, 1 for usage,
parse, or verification errors.  Output is deterministic byte for byte.
"""

from __future__ import annotations

import argparse
import itertools
import json
import re
import sys
from typing import Sequence

from .estimand import EstimandError, Lit, Sym, evaluate, free_syms, render
from .graph import Admg, GraphError, latent_projection, parse_graph, serialize_graph
from .identify import (
    CounterfactualQuery,
    IdentifyError,
    identify,
    make_query,
    query_symbols,
    query_text,
)
from .oracle import (
    ModelError,
    Term,
    build_coupling,
    counterfactual_joint,
    factual_joint,
    random_scm,
)
from .pocalc import rule1, rule2, rule3
from .separation import swig_separated
from .swig import build_swig, parse_context, relabel_all_splits, value_symbol


class CliError(ValueError):
    """Usage or parse problem; message names the offending piece."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit(2); we reserve 2
        raise CliError(message)


# -- query parsing -----------------------------------------------------------------

_QTOK = re.compile(r"[A-Za-z_][A-Za-z0-9_']*|\d+|[(),|=]")


def _tokenize_query(text: str) -> list[str]:
    toks = []
    pos = 0
    for m in _QTOK.finditer(text):
        if text[pos : m.start()].strip():
            raise CliError(
                f"query: cannot read {text[pos:m.start()].strip()!r}"
            )
        toks.append(m.group(0))
        pos = m.end()
    if text[pos:].strip():
        raise CliError(f"query: cannot read {text[pos:].strip()!r}")
    return toks


def parse_query(text: str, g: Admg) -> CounterfactualQuery:
    """Parse ``P(Y(A=a), ... | Z(A=a)=z, ...)``.

    A term is VAR or VAR(VAR=value, ...); values are state labels or value
    symbols.  Intervention lists are unioned across terms and must agree.
    A treated variable written bare stands for its natural value.
    """
    toks = _tokenize_query(text)
    pos = 0

    def peek() -> str | None:
        return toks[pos] if pos < len(toks) else None

    def take(expect: str | None = None) -> str:
        nonlocal pos
        if pos >= len(toks):
            raise CliError(
                f"query: unexpected end after {' '.join(toks[max(0, pos - 3) : pos])!r}"
            )
        t = toks[pos]
        if expect is not None and t != expect:
            raise CliError(f"query: expected {expect!r}, found {t!r}")
        pos += 1
        return t

    def var_of(tok: str) -> int:
        try:
            return g.id_of(tok)
        except GraphError:
            raise CliError(f"query: unknown variable {tok!r}")

    interventions: dict[int, object] = {}

    def note_assign(v: int, val: str) -> None:
        old = interventions.get(v)
        if old is not None and old != val:
            raise CliError(
                f"query: conflicting values {old!r} and {val!r} for {g.name(v)}"
            )
        interventions[v] = val

    def term() -> int:
        tok = take()
        if not re.match(r"^[A-Za-z_]", tok):
            raise CliError(f"query: expected a variable, found {tok!r}")
        v = var_of(tok)
        if peek() == "(":
            take("(")
            while True:
                t = take()
                a = var_of(t)
                take("=")
                note_assign(a, take())
                if peek() == ",":
                    take(",")
                    continue
                take(")")
                break
        return v

    head = take()
    if head not in ("P", "p"):
        raise CliError(f"query: expected 'P', found {head!r}")
    take("(")
    outcomes = [term()]
    while peek() == ",":
        take(",")
        outcomes.append(term())
    conditioning: list[tuple[int, str | None]] = []
    if peek() == "|":
        take("|")
        while True:
            v = term()
            val = None
            if peek() == "=":
                take("=")
                val = take()
            if any(v == u for u, _ in conditioning):
                raise CliError(f"query: {g.name(v)} conditioned on twice")
            conditioning.append((v, val))
            if peek() == ",":
                take(",")
                continue
            break
    take(")")
    if pos != len(toks):
        raise CliError(f"query: trailing input {toks[pos]!r}")

    def as_value(v: int, tok: str | None):
        if tok is None:
            return None
        decl = g.decl(v)
        if tok in decl.states:
            return tok
        if tok.isdigit():
            raise CliError(f"query: {tok!r} is not a state of {g.name(v)}")
        return Sym(tok, v, decl.k)

    try:
        return make_query(
            g,
            outcomes,
            {v: as_value(v, val) for v, val in interventions.items()},
            {v: as_value(v, val) for v, val in conditioning},
        )
    except IdentifyError as e:
        raise CliError(f"query: {e}")


# -- shared helpers ----------------------------------------------------------------


def _read_graph(path: str) -> Admg:
    text = sys.stdin.read() if path == "-" else open(path).read()
    return parse_graph(text)


def _split_names(s: str | None) -> list[str]:
    return [t for t in (s or "").replace(",", " ").split() if t]


def _parse_assign(g: Admg, s: str | None) -> dict[int, str]:
    out = {}
    for part in _split_names(s):
        name, eq, state = part.partition("=")
        if not eq:
            raise CliError(f"--assign needs VAR=STATE, found {part!r}")
        out[g.id_of(name)] = state
    return out


def _parse_ctx_arg(g: Admg, s: str | None):
    return parse_context(s.replace(";", "\n"), g) if s else ()


def _node_token(sw, tok: str):
    base = sw.base
    for v in base.vertices:
        if base.name(v) == tok:
            return sw.random_node(v)
    for v in sw.treated:
        if value_symbol(base.name(v)) == tok:
            return sw.fixed_node(v)
    raise CliError(f"unknown vertex token {tok!r}")


def _emit(obj: dict) -> None:
    print(json.dumps(obj, indent=2))


# -- subcommands -------------------------------------------------------------------


def _cmd_project(args) -> int:
    g = _read_graph(args.graph)
    keep = [g.id_of(n) for n in _split_names(args.keep)] if args.keep else None
    print(serialize_graph(latent_projection(g, keep)), end="")
    return 0


def _cmd_swig(args) -> int:
    g = _read_graph(args.graph)
    treated = [g.id_of(n) for n in _split_names(args.treat)]
    ctx = _parse_ctx_arg(g, args.context)
    sw = build_swig(g, treated, assignment=_parse_assign(g, args.assign), context=ctx)
    if args.relabel_all:
        sw = relabel_all_splits(sw)
    print(sw.render())
    return 0


def _cmd_sep(args) -> int:
    g = _read_graph(args.graph)
    treated = [g.id_of(n) for n in _split_names(args.treat)]
    ctx = _parse_ctx_arg(g, args.context)
    sw = build_swig(g, treated, assignment=_parse_assign(g, args.assign), context=ctx)
    left = [_node_token(sw, t) for t in _split_names(args.left)]
    right = [_node_token(sw, t) for t in _split_names(args.right)]
    given = [_node_token(sw, t) for t in _split_names(args.given)]
    v = swig_separated(sw, left, right, given)
    if args.format == "machine":
        _emit(
            {
                "separated": v.separated,
                "witness_path": (
                    None
                    if v.witness_path is None
                    else [sw.node_token(n) for n in v.witness_path]
                ),
                "nondependence": None if v.nondependence is None else v.nondependence.text,
            }
        )
        return 0
    if v.separated:
        print("separated")
        if v.nondependence is not None:
            print(f"so: {v.nondependence.text}")
    else:
        path = " - ".join(sw.node_token(n) for n in v.witness_path)
        print(f"connected: {path}")
    return 0


def _cmd_pocalc(args) -> int:
    g = _read_graph(args.graph)
    ctx = _parse_ctx_arg(g, args.context)
    amap = _parse_assign(g, args.assign)

    def ids(s):
        return [g.id_of(n) for n in _split_names(s)]

    def treatspec(s):
        return {v: amap.get(v) for v in ids(s)}

    y, w = ids(args.y), ids(args.w)
    if args.rule == 1:
        app = rule1(g, treatspec(args.x), y, ids(args.z), w, context=ctx)
    elif args.rule == 2:
        app = rule2(g, treatspec(args.x), y, treatspec(args.z), w, context=ctx)
    else:
        if w:
            raise CliError("rule 3 takes no --w")
        app = rule3(g, treatspec(args.x), y, treatspec(args.z), context=ctx)
    print(f"premise: {app.premise}")
    if app.applies:
        print(f"applies: {app.conclusion(g)}")
    else:
        wp = app.verdict.witness_path
        path = " - ".join(app.swig.node_token(n) for n in wp) if wp else "?"
        print(f"refused: connecting path {path}")
    return 0


def _cmd_identify(args) -> int:
    g = _read_graph(args.graph)
    gp = latent_projection(g) if g.hidden else g
    query = parse_query(args.query, gp)
    res = identify(gp, query)
    names = [d.name for d in gp.decls]
    if args.format == "machine":
        out = {
            "query": query_text(gp, query),
            "identified": res.identified,
        }
        if res.identified:
            out["estimand"] = res.render_estimand("machine")
            out["districts"] = [
                {
                    "district": [gp.name(v) for v in t.district],
                    "target": t.target,
                    "estimand": render(t.estimand, names, "machine"),
                }
                for t in res.districts
            ]
        else:
            w = res.witness
            out["witness"] = {
                "inner": [gp.name(v) for v in w.inner],
                "outer": [gp.name(v) for v in w.outer],
                "district": [gp.name(v) for v in w.district],
                "ancestral_set": [gp.name(v) for v in w.ancestral_set],
                "violations": list(w.check()),
            }
        out["ancestral_set"] = [gp.name(v) for v in res.ancestral_set]
        out["notes"] = list(res.notes)
        _emit(out)
        return 0 if res.identified else 2
    if not res.identified:
        print(f"NOT IDENTIFIED: {query_text(gp, query)}")
        print(res.witness.describe())
        return 2
    print(res.describe())
    for t in res.districts:
        print(f"  {t.target} = {render(t.estimand, names)}")
    for n in res.notes:
        print(f"  note: {n}")
    return 0


def _cmd_verify(args) -> int:
    g = _read_graph(args.graph)
    if g.bidirected:
        raise CliError(
            "verify needs the hidden-variable form of the graph (no <-> edges)"
        )
    gp = latent_projection(g) if g.hidden else g
    query = parse_query(args.query, gp)
    res = identify(gp, query)
    if not res.identified:
        print(f"NOT IDENTIFIED: {query_text(gp, query)}")
        print(res.witness.describe())
        return 2
    print(f"{res.describe()}")
    nsyms = query_symbols(gp, query)
    value_syms = {
        val for _, val in query.interventions + query.conditioning
        if isinstance(val, Sym)
    }
    syms = sorted(
        set(free_syms(res.estimand))
        | value_syms
        | {nsyms[v] for v in query.outcomes},
        key=lambda s: (s.var, s.name),
    )
    out_ids = list(query.outcomes)
    cond_ids = [v for v, _ in query.conditioning]
    failures = 0
    for trial in range(args.random):
        seed = args.seed + trial
        scm = random_scm(g, seed=seed)
        rft = build_coupling(scm, args.coupling)
        table = factual_joint(rft)
        worst = 0.0
        for combo in itertools.product(*(range(s.k) for s in syms)):
            env = dict(zip(syms, combo))
            do = {}
            for v, val in query.interventions:
                do[v] = env[val] if val in env else gp.decl(v).states.index(val.state)
            terms = [Term(v, tuple(sorted(do.items()))) for v in out_ids + cond_ids]
            joint = counterfactual_joint(rft, terms)
            idx = tuple(env[nsyms[v]] for v in out_ids)
            cidx = tuple(
                env[val] if val in env else gp.decl(v).states.index(val.state)
                for v, val in query.conditioning
            )
            truth = joint.values[idx + cidx]
            if cond_ids:
                den = joint.values[(slice(None),) * len(out_ids) + cidx].sum()
                if den == 0:
                    continue
                truth = truth / den
            mine = evaluate(res.estimand, table, bindings=env).item()
            worst = max(worst, abs(float(mine) - float(truth)))
        ok = worst <= args.tol
        failures += 0 if ok else 1
        print(f"seed={seed} max|delta|={worst:.3e} {'ok' if ok else 'FAIL'}")
    print(f"{'PASS' if failures == 0 else 'FAIL'} ({args.random - failures}/{args.random} models within {args.tol:g})")
    return 0 if failures == 0 else 1


# -- argument wiring ----------------------------------------------------------------


def _build_parser() -> _Parser:
    p = _Parser(prog="swigid", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    q = sub.add_parser("project", help="latent projection onto the observed variables")
    q.add_argument("graph")
    q.add_argument("--keep", help="comma-separated subset of observed variables")
    q.set_defaults(fn=_cmd_project)

    q = sub.add_parser("swig", help="split a graph at treated vertices and print it")
    q.add_argument("graph")
    q.add_argument("--treat", required=True, help="comma-separated variables")
    q.add_argument("--assign", help="VAR=STATE,... concrete assignment")
    q.add_argument("--context", help="context rules, 'TAIL -> HEAD when VAR=STATE; ...'")
    q.add_argument("--relabel-all", action="store_true",
                   help="stamp every random vertex with the full treatment set")
    q.set_defaults(fn=_cmd_swig)

    q = sub.add_parser("sep", help="separation in an intervention graph")
    q.add_argument("graph")
    q.add_argument("--treat", default="", help="comma-separated variables")
    q.add_argument("--assign", help="VAR=STATE,...")
    q.add_argument("--context", help="context rules")
    q.add_argument("--left", required=True)
    q.add_argument("--right", required=True)
    q.add_argument("--given", default="")
    q.add_argument("--format", choices=("text", "machine"), default="text")
    q.set_defaults(fn=_cmd_sep)

    q = sub.add_parser("pocalc", help="apply one of the three rewrite rules")
    q.add_argument("rule", type=int, choices=(1, 2, 3))
    q.add_argument("graph")
    q.add_argument("--x", default="", help="intervention set")
    q.add_argument("--y", required=True, help="outcome set")
    q.add_argument("--z", required=True, help="set being dropped or exchanged")
    q.add_argument("--w", default="", help="conditioning set")
    q.add_argument("--assign", help="VAR=STATE,... bound values")
    q.add_argument("--context", help="context rules")
    q.set_defaults(fn=_cmd_pocalc)

    q = sub.add_parser("identify", help="reduce a counterfactual query")
    q.add_argument("graph")
    q.add_argument("query", help='e.g. "P(Y(A=a))" or "P(Y(A=a) | M(A=a)=m)"')
    q.add_argument("--format", choices=("text", "machine"), default="text")
    q.set_defaults(fn=_cmd_identify)

    q = sub.add_parser(
        "verify", help="check an estimand against the oracle on random models"
    )
    q.add_argument("graph", help="hidden-variable form (DAG, hidden vars allowed)")
    q.add_argument("query")
    q.add_argument("--random", type=int, default=3, metavar="N",
                   help="number of random models (default 3)")
    q.add_argument("--seed", type=int, default=7)
    q.add_argument("--tol", type=float, default=1e-9)
    q.add_argument("--coupling", choices=("IE", "single-world-comonotone"),
                   default="IE")
    q.set_defaults(fn=_cmd_verify)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (GraphError, IdentifyError, EstimandError, ModelError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e.filename}: no such file", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
