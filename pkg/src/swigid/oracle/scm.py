"""Discrete structural causal models with tabular CPTs.

A model is a DAG (possibly with hidden vertices) plus one conditional
probability table per variable, rows indexed by parent configurations in
C order (last parent fastest).  Models round-trip through a plain text
format; floats serialize via repr so parsing reproduces them bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graph import Admg, GraphError, VariableDecl


class ModelError(ValueError):
    pass


@dataclass
class DiscreteScm:
    decls: tuple[VariableDecl, ...]
    parents: dict[int, tuple[int, ...]]
    cpts: dict[int, np.ndarray]  # shape (*parent_state_counts, k_i)

    def __post_init__(self) -> None:
        self.decls = tuple(self.decls)
        ids = range(len(self.decls))
        self.parents = {i: tuple(sorted(self.parents.get(i, ()))) for i in ids}
        cpts = {}
        for i in ids:
            if i not in self.cpts:
                raise ModelError(f"no CPT for {self.decls[i].name}")
            want = tuple(self.decls[p].k for p in self.parents[i]) + (self.decls[i].k,)
            cpt = np.asarray(self.cpts[i], dtype=np.float64).reshape(want)
            if cpt.min() < 0:
                raise ModelError(f"negative probability in CPT of {self.decls[i].name}")
            sums = cpt.sum(axis=-1)
            if np.abs(sums - 1.0).max() > 1e-6:
                raise ModelError(f"CPT rows of {self.decls[i].name} do not sum to 1")
            cpts[i] = cpt
        self.cpts = cpts
        self.graph()  # raises on cycles

    def graph(self) -> Admg:
        directed = [(p, i) for i, ps in self.parents.items() for p in ps]
        return Admg(self.decls, directed, ())

    @property
    def k(self) -> tuple[int, ...]:
        return tuple(d.k for d in self.decls)

    def n_configs(self, i: int) -> int:
        out = 1
        for p in self.parents[i]:
            out *= self.decls[p].k
        return out

    def rows(self, i: int) -> np.ndarray:
        """CPT as a (n_configs, k_i) matrix, configurations in C order."""
        return self.cpts[i].reshape(self.n_configs(i), self.decls[i].k)


def random_scm(g: Admg, seed=None) -> DiscreteScm:
    """Random CPTs on the structure of ``g``: Dirichlet(1) rows with every
    entry clamped to at least 0.01, renormalized."""
    if g.bidirected:
        raise ModelError("structural models need explicit confounders, not <->")
    rng = np.random.default_rng(seed)
    cpts = {}
    for v in g.vertices:
        k = g.decl(v).k
        n_cfg = 1
        for p in g.parents(v):
            n_cfg *= g.decl(p).k
        rows = rng.dirichlet(np.ones(k), size=n_cfg)
        rows = np.maximum(rows, 0.01)
        rows /= rows.sum(axis=1, keepdims=True)
        shape = tuple(g.decl(p).k for p in g.parents(v)) + (k,)
        cpts[v] = rows.reshape(shape)
    return DiscreteScm(
        decls=g.decls,
        parents={v: g.parents(v) for v in g.vertices},
        cpts=cpts,
    )


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------
#
#   var A M Y
#   hidden H
#   cpt M | A H
#   0.2 0.8
#   0.5 0.5
#   0.30000000000000004 0.7
#   0.9 0.1
#
# Rows in C order over the parent list as written (which must be sorted by
# declaration); roots use "cpt A |".


def parse_model(text: str) -> DiscreteScm:
    decls: list[VariableDecl] = []
    names: dict[str, int] = {}
    blocks: dict[int, tuple[tuple[int, ...], list[list[float]]]] = {}
    current: int | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] in ("var", "hidden"):
            current = None
            for tok in parts[1:]:
                name, _, kpart = tok.partition(":")
                if name in names:
                    raise ModelError(f"line {lineno}: duplicate variable {name!r}")
                k = 2
                if kpart:
                    try:
                        k = int(kpart)
                    except ValueError:
                        raise ModelError(f"line {lineno}: bad state count {kpart!r}")
                    if k < 2:
                        raise ModelError(f"line {lineno}: state count must be >= 2")
                names[name] = len(decls)
                decls.append(
                    VariableDecl(
                        name, tuple(str(i) for i in range(k)), parts[0] == "hidden"
                    )
                )
        elif parts[0] == "cpt":
            body = parts[1:]
            if "|" in body:
                bar = body.index("|")
                head, ps = body[:bar], body[bar + 1 :]
            else:
                head, ps = body[:1], body[1:]
            if len(head) != 1:
                raise ModelError(f"line {lineno}: cpt names exactly one variable")
            for t in head + ps:
                if t not in names:
                    raise ModelError(f"line {lineno}: undeclared variable {t!r}")
            v = names[head[0]]
            pids = tuple(names[t] for t in ps)
            if pids != tuple(sorted(pids)):
                raise ModelError(
                    f"line {lineno}: parents must be listed in declaration order"
                )
            if v in blocks:
                raise ModelError(f"line {lineno}: second cpt for {head[0]!r}")
            blocks[v] = (pids, [])
            current = v
        else:
            if current is None:
                raise ModelError(f"line {lineno}: cannot parse {raw.strip()!r}")
            try:
                row = [float(t) for t in parts]
            except ValueError:
                raise ModelError(f"line {lineno}: bad probability in {raw.strip()!r}")
            blocks[current][1].append(row)

    for v in range(len(decls)):
        if v not in blocks:
            raise ModelError(f"no cpt for variable {decls[v].name!r}")
    parents = {}
    cpts = {}
    for v, (pids, rows) in blocks.items():
        n_cfg = 1
        for p in pids:
            n_cfg *= decls[p].k
        if len(rows) != n_cfg:
            raise ModelError(
                f"cpt for {decls[v].name!r} has {len(rows)} rows, needs {n_cfg}"
            )
        k = decls[v].k
        for row in rows:
            if len(row) != k:
                raise ModelError(
                    f"cpt row for {decls[v].name!r} has {len(row)} entries, needs {k}"
                )
        parents[v] = pids
        shape = tuple(decls[p].k for p in pids) + (k,)
        cpts[v] = np.array(rows, dtype=np.float64).reshape(shape)
    return DiscreteScm(tuple(decls), parents, cpts)


def serialize_model(scm: DiscreteScm) -> str:
    """Canonical text form; parse_model(serialize_model(m)) reproduces m
    bit-exactly."""
    lines = []
    for d in scm.decls:
        kw = "hidden" if d.hidden else "var"
        suffix = "" if d.k == 2 else f":{d.k}"
        lines.append(f"{kw} {d.name}{suffix}")
    for v in range(len(scm.decls)):
        ps = " ".join(scm.decls[p].name for p in scm.parents[v])
        lines.append(f"cpt {scm.decls[v].name} | {ps}".rstrip())
        for row in scm.rows(v):
            lines.append(" ".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Context-specific construction
# ---------------------------------------------------------------------------


def build_context_specific_scm(seed=7) -> DiscreteScm:
    """A model whose mechanisms drop an input in specific treatment contexts.

    Structure: A -> S, A -> M, S -> R, M -> R, M -> Y, R -> Y, U -> R,
    U -> M with S, U, R hidden.  S copies A deterministically.  M ignores U
    whenever A = 1, and R ignores U whenever S = 0; so under the intervention
    a = 1 the edge U -> M is absent, and under a = 0 the edge U -> R is
    absent, in the corresponding intervention graphs.
    """
    rng = np.random.default_rng(seed)

    def row(k=2):
        r = np.maximum(rng.dirichlet(np.ones(k)), 0.01)
        return r / r.sum()

    decls = (
        VariableDecl("A", ("0", "1")),
        VariableDecl("M", ("0", "1")),
        VariableDecl("Y", ("0", "1")),
        VariableDecl("S", ("0", "1"), hidden=True),
        VariableDecl("U", ("0", "1"), hidden=True),
        VariableDecl("R", ("0", "1"), hidden=True),
    )
    A, M, Y, S, U, R = range(6)
    parents = {A: (), M: (A, U), Y: (M, R), S: (A,), U: (), R: (M, S, U)}

    cpt_a = row()
    cpt_u = row()
    cpt_s = np.array([[1.0, 0.0], [0.0, 1.0]])  # S = A

    cpt_m = np.zeros((2, 2, 2))  # (a, u, m)
    cpt_m[0, 0] = row()
    cpt_m[0, 1] = row()
    cpt_m[1, 0] = cpt_m[1, 1] = row()  # ignores U when A = 1

    cpt_r = np.zeros((2, 2, 2, 2))  # (m, s, u, r)
    for m in (0, 1):
        cpt_r[m, 0, 0] = cpt_r[m, 0, 1] = row()  # ignores U when S = 0
        cpt_r[m, 1, 0] = row()
        cpt_r[m, 1, 1] = row()

    cpt_y = np.zeros((2, 2, 2))  # (m, r, y)
    for m in (0, 1):
        for r in (0, 1):
            cpt_y[m, r] = row()

    return DiscreteScm(
        decls,
        parents,
        {A: cpt_a, U: cpt_u, S: cpt_s, M: cpt_m, R: cpt_r, Y: cpt_y},
    )
