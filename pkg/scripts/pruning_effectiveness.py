"""Tree nodes visited by screening along a path, against the size of the rule space.

    python scripts/pruning_effectiveness.py --n 300 --features 6 --levels 5 --steps 20
"""

import argparse
import time

import numpy as np

from saferule import PathConfig, ProblemEncoding, run_path
from saferule.discretize import discretize_quantile


def make_data(n, d, levels, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    box = np.all(np.abs(X[:, :2]) < 0.8, axis=1)
    y = 2.0 * box + 1.0 * (X[:, min(2, d - 1)] > 0.5) + 0.3 * X[:, -1] + 0.5 * rng.normal(size=n)
    y = (y - y.mean()) / y.std()
    ds = discretize_quantile(X, levels)
    return ProblemEncoding("regression", X, ds.xbar, ds.s, y)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--features", type=int, default=6)
    ap.add_argument("--levels", type=int, default=5)
    ap.add_argument("--steps", type=int, default=20)
    ap.add_argument("--lambda-min-ratio", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    enc = make_data(args.n, args.features, args.levels, args.seed)
    t0 = time.perf_counter()
    res = run_path(enc, PathConfig(n_steps=args.steps, lambda_min_ratio=args.lambda_min_ratio))
    total = time.perf_counter() - t0
    print(f"alphabet sizes {enc.s}, tree nodes {res.tree_size:,}, lambda_max {res.lambda_max:.4g}")
    print(f"{'step':>4} {'lambda':>10} {'visited':>10} {'% tree':>8} {'survivors':>10} {'active':>7} {'sec':>6}")
    for k, st in enumerate(res.steps):
        print(f"{k:4d} {st.lam:10.4g} {st.nodes_visited:10d} {100 * st.nodes_visited / res.tree_size:7.3f}% "
              f"{st.survivors:10d} {st.state.n_active_rules:7d} {st.seconds:6.2f}"
              + (f"  stopped: {st.error}" if st.error else ""))
    print(f"total {total:.1f}s")


if __name__ == "__main__":
    main()
