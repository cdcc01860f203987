"""Timing comparison of the two oracle enumeration kernels.

The hot loop of the oracle sweeps the full error space of a response-function
coupling (2^20 configurations on the six-variable benchmark graph) once per
distinct intervention world.  The default kernel is a numba @njit loop; the
fallback is a chunked vectorized numpy sweep selected by
SWIGID_ORACLE_BACKEND=numpy.  This script times both on the same model.

Run:  python3 benchmarks/bench_oracle.py [--repeat 5] [--seed 1]
"""

import argparse
import pathlib
import statistics
import time

from swigid.graph import parse_graph
from swigid.oracle import build_coupling, counterfactual_joint, random_scm
from swigid.oracle.joint import Term
from swigid.oracle.kernels import HAVE_NUMBA

GRAPH = pathlib.Path(__file__).resolve().parent.parent / "tests" / "graphs" / "torpedo.g"


def timed(fn, repeat):
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return runs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    g = parse_graph(GRAPH.read_text())
    scm = random_scm(g, seed=args.seed)
    rft = build_coupling(scm)
    a, m, y = g.id_of("A"), g.id_of("M"), g.id_of("Y")
    # p(Y(a, m)) for all four (a, m): four distinct worlds over 2^20 configs
    terms = [Term(y, ((a, i), (m, j))) for i in range(2) for j in range(2)]
    print(f"model: {GRAPH.name}, error space {rft.error_space()}, "
          f"{len(terms)} worlds")

    def run(backend):
        return counterfactual_joint(rft, terms, backend=backend)

    results = {}
    for backend in ("numba", "numpy"):
        if backend == "numba" and not HAVE_NUMBA:
            print("numba: not importable, skipped")
            continue
        run(backend)  # warm-up (jit compile / allocator)
        runs = timed(lambda: run(backend), args.repeat)
        results[backend] = run(backend)
        print(f"{backend:>6}: best {min(runs) * 1e3:8.1f} ms   "
              f"median {statistics.median(runs) * 1e3:8.1f} ms   "
              f"({args.repeat} runs)")

    if len(results) == 2:
        import numpy as np

        gap = float(np.max(np.abs(results["numba"].values - results["numpy"].values)))
        print(f"backend agreement: max|delta| = {gap:.3e}")


if __name__ == "__main__":
    main()
