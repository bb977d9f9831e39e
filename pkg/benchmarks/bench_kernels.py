"""Compare the compiled and pure-Python welfare kernels.

    python3 benchmarks/bench_kernels.py [--players N] [--items M] [--repeat R]

Builds a random coverage instance, checks that both backends agree, then
times welfare+gradient evaluation, column projection and a full ascent.
"""

import argparse
import timeit

import numpy as np

from riskaudit import _kernels
from riskaudit.valuations import CoverageValuation
from riskaudit.welfare import CoverageProblem


def random_instance(rng, n, m, elements=12):
    items = [str(j) for j in range(m)]
    reps = []
    for _ in range(n):
        names = [f"e{k}" for k in range(elements)]
        sets = {it: [e for e in names if rng.random() < 0.3] for it in items}
        weights = {e: float(rng.uniform(0.1, 3)) for e in names}
        reps.append(CoverageValuation.from_sets(sets, weights, items))
    return CoverageProblem(reps, items)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--players", type=int, default=8)
    ap.add_argument("--items", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    prob = random_instance(rng, args.players, args.items)
    arrays = (prob.eplayer, prob.eweight, prob.emask)
    x = rng.dirichlet(np.ones(args.players + 1), size=args.items).T[:-1].copy()
    y = rng.normal(size=x.shape)
    step = 1.0 / max(prob.lipschitz_bound(), 1e-12)

    backends = {name: _kernels.load_backend(name) for name in _kernels.available_backends()}
    results = {}
    for name, k in backends.items():
        results[name] = k.ascend(np.zeros_like(x), *arrays, step, 1e-7, 100_000)
    if len(results) == 2:
        diff = np.abs(results["cython"][0] - results["python"][0]).max()
        print(f"backends agree: max |x_cython - x_python| = {diff:.2e}")

    print(f"{args.players} players, {args.items} items, {len(prob.eweight)} elements; "
          f"ascent took {results[next(iter(results))][2]} iterations")
    print(f"{'kernel':<18}" + "".join(f"{n:>14}" for n in backends) + "   speedup")
    cases = {
        "welfare_and_grad": lambda k: k.welfare_and_grad(x, *arrays),
        "project_columns": lambda k: k.project_columns(y),
        "ascend": lambda k: k.ascend(np.zeros_like(x), *arrays, step, 1e-7, 100_000),
    }
    for label, fn in cases.items():
        times = {}
        for name, k in backends.items():
            number = 3 if label == "ascend" else 200
            best = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat))
            times[name] = best / number
        row = "".join(f"{times[n] * 1e6:>12.1f}us" for n in backends)
        speed = (f"{times['python'] / times['cython']:8.1f}x"
                 if {"python", "cython"} <= times.keys() else "")
        print(f"{label:<18}{row}{speed}")


if __name__ == "__main__":
    main()
