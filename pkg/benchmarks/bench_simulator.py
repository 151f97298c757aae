"""Compare the numba and pure-numpy simulator backends.

Runs the same seeded configuration on both paths, checks the outputs are
bit-identical, and reports wall time and event throughput.

    python benchmarks/bench_simulator.py [--n 200] [--horizon 2000]
"""

import argparse
import time

from supermarket.distributions import Exponential
from supermarket.simulator import SimConfig, forced_backend, run


def timed(cfg, backend):
    with forced_backend(backend):
        t0 = time.perf_counter()
        res = run(cfg)
        return res, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--lambda", dest="lam", type=float, default=0.9)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--horizon", type=float, default=2000.0)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    cfg = SimConfig(n=args.n, lam=args.lam, d=args.d, dist=Exponential(1.0),
                    seed=args.seed, horizon=args.horizon, replications=2)
    # arrivals + departures, one of each per admitted customer
    approx_events = 2.0 * args.n * args.lam * args.horizon * 2  # two replications

    print(f"n={args.n} lambda={args.lam} d={args.d} horizon={args.horizon} "
          f"(~{approx_events:.3g} events)")
    # warm the JIT cache outside the timing
    with forced_backend("numba"):
        run(SimConfig(n=8, lam=0.5, d=2, dist=Exponential(1.0), seed=1,
                      horizon=20.0, warmup=5.0))

    res_nb, t_nb = timed(cfg, "numba")
    res_np, t_np = timed(cfg, "numpy")

    identical = (res_nb.tails == res_np.tails
                 and res_nb.sojourn_mean == res_np.sojourn_mean
                 and res_nb.littles_check == res_np.littles_check)
    print(f"{'backend':<8} {'seconds':>10} {'events/s':>12}")
    print(f"{'numba':<8} {t_nb:>10.3f} {approx_events / t_nb:>12.3g}")
    print(f"{'numpy':<8} {t_np:>10.3f} {approx_events / t_np:>12.3g}")
    print(f"speedup: {t_np / t_nb:.1f}x, outputs bit-identical: {identical}")
    if not identical:
        raise SystemExit("backend outputs diverged")


if __name__ == "__main__":
    main()
