"""Response-function couplings over a discrete SCM.

Each variable's mechanism is encoded as a random response function: a map
from parent configurations to a value.  Response functions are independent
across variables; the coupling kind fixes the within-variable joint over
parent configurations:

* ``IE``: the value at each parent configuration is drawn independently, so
  every function from configurations to states gets the product probability.
* ``single-world-comonotone``: one shared uniform drives every configuration
  through its row's quantile function, so all potential responses of a
  variable move together.

Both couplings reproduce the same single-world (interventional) laws; they
differ on cross-world joints.  Probabilities are kept as exact Fractions
(CPT floats convert exactly) alongside float64 views for the fast kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..config import ERROR_SPACE_GUARD
from .scm import DiscreteScm, ModelError

KINDS = ("IE", "single-world-comonotone")


@dataclass
class ResponseFunctionTable:
    """Support and distribution of every variable's response function.

    ``responses[i]`` has shape (n_i, n_configs_i): row r gives the value the
    r-th response function assigns to each parent configuration (C order).
    """

    scm: DiscreteScm
    kind: str
    responses: dict[int, np.ndarray]
    probs: dict[int, np.ndarray]
    probs_exact: dict[int, tuple[Fraction, ...]]

    def n_responses(self, i: int) -> int:
        return self.responses[i].shape[0]

    def error_space(self) -> int:
        out = 1
        for i in range(len(self.scm.decls)):
            out *= self.n_responses(i)
        return out


def _ie_variable(rows: np.ndarray) -> tuple[np.ndarray, tuple[Fraction, ...]]:
    n_cfg, k = rows.shape
    n_r = k**n_cfg
    if n_r > ERROR_SPACE_GUARD:
        raise ModelError(
            f"{n_r} response functions for one variable exceeds the "
            f"enumeration guard {ERROR_SPACE_GUARD}"
        )
    resp = np.zeros((n_r, n_cfg), dtype=np.int8)
    r = np.arange(n_r)
    for c in range(n_cfg):
        # digit c of r in base k, first configuration slowest
        resp[:, c] = (r // k ** (n_cfg - 1 - c)) % k
    exact_rows = [[Fraction(float(x)) for x in row] for row in rows]
    probs = []
    for fn in resp:
        p = Fraction(1)
        for c, val in enumerate(fn):
            p *= exact_rows[c][val]
        probs.append(p)
    return resp, tuple(probs)


def _comonotone_variable(rows: np.ndarray) -> tuple[np.ndarray, tuple[Fraction, ...]]:
    n_cfg, k = rows.shape
    exact_rows = [[Fraction(float(x)) for x in row] for row in rows]
    cum = []
    for row in exact_rows:
        acc = Fraction(0)
        cs = []
        for x in row:
            acc += x
            cs.append(acc)
        cs[-1] = Fraction(1)
        cum.append(cs)
    cuts = sorted({Fraction(0), Fraction(1), *(c for cs in cum for c in cs)})
    support: dict[tuple[int, ...], Fraction] = {}
    for lo, hi in zip(cuts, cuts[1:]):
        if hi == lo:
            continue
        u = (lo + hi) / 2
        fn = tuple(
            next(s for s in range(k) if cum[c][s] >= u) for c in range(n_cfg)
        )
        support[fn] = support.get(fn, Fraction(0)) + (hi - lo)
    resp = np.array(sorted(support), dtype=np.int8).reshape(len(support), n_cfg)
    probs = tuple(support[tuple(int(v) for v in fn)] for fn in resp)
    return resp, probs


def build_coupling(scm: DiscreteScm, kind: str = "IE") -> ResponseFunctionTable:
    if kind not in KINDS:
        raise ModelError(f"unknown coupling kind {kind!r} (want one of {KINDS})")
    responses = {}
    probs = {}
    probs_exact = {}
    for i in range(len(scm.decls)):
        rows = scm.rows(i)
        if kind == "IE":
            resp, pe = _ie_variable(rows)
        else:
            resp, pe = _comonotone_variable(rows)
        tot = sum(pe)
        if tot != 1:  # CPT floats need not sum to an exact rational 1
            pe = tuple(p / tot for p in pe)
        responses[i] = resp
        probs_exact[i] = pe
        probs[i] = np.array([float(p) for p in pe], dtype=np.float64)
    return ResponseFunctionTable(scm, kind, responses, probs, probs_exact)
