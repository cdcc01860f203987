"""Error-space enumeration kernels.

Summing response-function probabilities into counterfactual joint cells is
the one hot loop in the package (the context-specific example enumerates
2^20 configurations).  Two float64 implementations share a flattened plan:
a jit-compiled serial loop and a chunked vectorized numpy fallback; the
backend is chosen by SWIGID_ORACLE_BACKEND (see config).  Exact-arithmetic
enumeration lives in joint.py and does not come through here.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn

        return wrap


@njit(cache=True)
def _joint_loop(
    n_r,
    err_stride,
    resp_flat,
    resp_off,
    n_cfg,
    par_flat,
    par_stride,
    par_off,
    par_cnt,
    probs_flat,
    probs_off,
    topo,
    do_mask,
    do_val,
    term_world,
    term_var,
    out_stride,
    out,
):
    n_vars = n_r.size
    n_err = 1
    for i in range(n_vars):
        n_err *= n_r[i]
    n_worlds = do_mask.shape[0]
    nat = np.zeros((n_worlds, n_vars), np.int64)
    r = np.zeros(n_vars, np.int64)
    for e in range(n_err):
        pr = 1.0
        for i in range(n_vars):
            ri = (e // err_stride[i]) % n_r[i]
            r[i] = ri
            pr *= probs_flat[probs_off[i] + ri]
        if pr == 0.0:
            continue
        for w in range(n_worlds):
            for t in range(n_vars):
                i = topo[t]
                cfg = 0
                for pj in range(par_cnt[i]):
                    p = par_flat[par_off[i] + pj]
                    if do_mask[w, p] == 1:
                        pv = do_val[w, p]
                    else:
                        pv = nat[w, p]
                    cfg += pv * par_stride[par_off[i] + pj]
                nat[w, i] = resp_flat[resp_off[i] + r[i] * n_cfg[i] + cfg]
        oi = 0
        for t in range(term_world.size):
            oi += nat[term_world[t], term_var[t]] * out_stride[t]
        out[oi] += pr


def joint_numba(plan, out: np.ndarray) -> None:
    _joint_loop(*plan, out)


def joint_numpy(plan, out: np.ndarray, chunk: int = 1 << 15) -> None:
    (
        n_r,
        err_stride,
        resp_flat,
        resp_off,
        n_cfg,
        par_flat,
        par_stride,
        par_off,
        par_cnt,
        probs_flat,
        probs_off,
        topo,
        do_mask,
        do_val,
        term_world,
        term_var,
        out_stride,
    ) = plan
    n_vars = n_r.size
    n_worlds = do_mask.shape[0]
    n_err = int(np.prod(n_r, dtype=np.int64))
    for lo in range(0, n_err, chunk):
        e = np.arange(lo, min(lo + chunk, n_err), dtype=np.int64)
        pr = np.ones(e.size, dtype=np.float64)
        r = np.empty((n_vars, e.size), dtype=np.int64)
        for i in range(n_vars):
            r[i] = (e // err_stride[i]) % n_r[i]
            pr *= probs_flat[probs_off[i] + r[i]]
        nat = np.zeros((n_worlds, n_vars, e.size), dtype=np.int64)
        for w in range(n_worlds):
            for i in topo:
                cfg = np.zeros(e.size, dtype=np.int64)
                for pj in range(par_cnt[i]):
                    p = par_flat[par_off[i] + pj]
                    if do_mask[w, p] == 1:
                        pv = do_val[w, p]
                    else:
                        pv = nat[w, p]
                    cfg += pv * par_stride[par_off[i] + pj]
                nat[w, i] = resp_flat[resp_off[i] + r[i] * n_cfg[i] + cfg]
        oi = np.zeros(e.size, dtype=np.int64)
        for t in range(term_world.size):
            oi += nat[term_world[t], term_var[t]] * out_stride[t]
        np.add.at(out, oi, pr)
