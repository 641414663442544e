"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--depth 5] [--repeat 5]

Times polynomial evaluation of an H-tree right-hand side on a batch of
states, the pairwise fundamental-matrix norm maximum on a 7-time-unit grid,
and one full certification with each backend.
"""
import argparse
import timeit

import numpy as np

from approxde import kernels
from approxde.bounds import certify, fundamental_matrices, jacobian, lambda_bounds
from approxde.equivalence import coarsest_partition_frozen
from approxde.model import extend, gen_htree
from approxde.numerics import CompiledPolys, integrate, polynomial_field
from approxde.reference import build_constraints, solve_reference


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--batch", type=int, default=256)
    args = ap.parse_args()

    backends = {name: kernels.load_backend(name) for name in kernels.available_backends()}
    m, G = gen_htree(args.depth, 1e-4, 0)
    e = extend(m, params="frozen")
    z = solve_reference(e, build_constraints(e, coarsest_partition_frozen(m, G, 6e-4, "B"), "B"))
    comp = CompiledPolys(e.rhs_hat, e.size)
    X = np.random.default_rng(0).normal(size=(args.batch, e.size))
    traj = integrate(polynomial_field(e.rhs_hat), z, 7.0, 0.023)
    lams = fundamental_matrices(jacobian(e), traj)
    invs = np.linalg.inv(lams)

    print(f"H-tree depth {args.depth}: {e.size} variables, {len(traj.times)} grid points")
    print(f"{'kernel':<28}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    rows = {
        f"eval_terms (batch {args.batch})": lambda k: comp(X, backend=k),
        "max_pair_norm": lambda k: k.max_pair_norm(lams, invs),
        "lambda_bounds": lambda k: lambda_bounds(lams, 1.0, traj.dt, backend=k),
    }
    for label, fn in rows.items():
        t = {name: best(lambda k=k: fn(k), args.repeat) for name, k in backends.items()}
        speed = t["python"] / t["cython"] if "cython" in t else float("nan")
        print(f"{label:<28}" + "".join(f"{v * 1e3:>12.2f}ms" for v in t.values()) + f"{speed:>9.1f}x")

    # end to end, with the module-level backend swapped in
    t = {}
    for name, k in backends.items():
        old = (kernels.eval_terms, kernels.max_pair_norm)
        kernels.eval_terms, kernels.max_pair_norm = k.eval_terms, k.max_pair_norm
        try:
            t[name] = best(lambda: certify(e, z, 7.0, 0.023), max(1, args.repeat // 2))
        finally:
            kernels.eval_terms, kernels.max_pair_norm = old
    speed = t["python"] / t["cython"] if "cython" in t else float("nan")
    print(f"{'certify (end to end)':<28}" + "".join(f"{v * 1e3:>12.2f}ms" for v in t.values())
          + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
