"""Compare the compiled jet kernels with the numpy fallback.

Run with ``python3 benchmarks/bench_jetcore.py``. Each case is timed with
``timeit`` under both backends and the outputs are compared for equality.
"""
import argparse
import timeit

import numpy as np

from hlab import jets
from hlab.builtins import example_problem
from hlab.conditions import check_lgh
from hlab.expr import evaluate, parse_scalar_field


def cases(m: int):
    rng = np.random.default_rng(0)
    n = 3
    X = rng.uniform(-1, 1, (m, n))
    Y = rng.uniform(-2, 2, (m, n))
    f = parse_scalar_field("sin(x1*y2) * (y1^2 + y3^2)^2 + exp(x2) * sqrt(1 + y1^2*y2^2) - x3*y3^3", n)
    pf = example_problem("ex1")
    return {
        "evaluate (n=3)": lambda: evaluate(f, X, Y).jet.h,
        "ex1 LGH check": lambda: np.array([r.max for r in check_lgh(pf.sode, pf.domain, theta=pf.theta,
                                                                  sigma=pf.sigma)]),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = ["python"]
    try:
        jets.use_backend("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled extension not built; timing the numpy fallback only")
    print(f"{'case':<18} " + " ".join(f"{b:>12}" for b in backends) + "   speedup  same")
    for name, fn in cases(args.samples).items():
        times, outs = [], []
        for b in backends:
            jets.use_backend(b)
            outs.append(fn())
            times.append(min(timeit.repeat(fn, number=1, repeat=args.repeat)))
        same = all(np.allclose(o, outs[0], rtol=1e-12, atol=1e-12) for o in outs)
        speed = times[-1] / times[0] if len(times) > 1 else 1.0
        print(f"{name:<18} " + " ".join(f"{t * 1e3:10.2f}ms" for t in times) + f"   {speed:6.2f}x  {same}")


if __name__ == "__main__":
    main()
