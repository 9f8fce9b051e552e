"""Benchmark the numba-compiled hot kernels against the pure-numpy fallback.

Run: python3 benchmarks/bench_kernels.py
(With LATENTMC_NO_NUMBA=1 the compiled column degenerates to the fallback.)
"""

import time

import numpy as np

from latentmc import _kernels as k
from latentmc.distributions import make_rng


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = make_rng(0)
    K, T, N = 8, 168, 100
    pi0 = np.full(K, 1.0 / K)
    A = rng.random((K, K))
    A /= A.sum(axis=1, keepdims=True)
    lik = rng.random((T, K)) + 0.1

    print(f"numba active: {k.NUMBA_ACTIVE}")
    print(f"{'kernel':28s} {'numpy':>12s} {'active':>12s} {'speedup':>9s}")

    pairs = []

    alpha, c = k.hmm_forward_numpy(pi0, A, lik)
    beta = k.hmm_backward_numpy(A, lik, c)
    pairs.append(("hmm_forward", k.hmm_forward_numpy, k.hmm_forward, (pi0, A, lik)))
    pairs.append(("hmm_backward", k.hmm_backward_numpy, k.hmm_backward, (A, lik, c)))
    pairs.append(("hmm_pairwise", k.hmm_pairwise_numpy, k.hmm_pairwise, (alpha, beta, A, lik, c)))

    init_logp = np.log(pi0)
    trans_logp = np.log(np.broadcast_to(A, (T - 1, K, K)).copy())
    g = -np.log(-np.log(rng.random((N, T, K))))
    pairs.append(("sample_markov_paths", k.sample_markov_paths_numpy, k.sample_markov_paths,
                  (init_logp, trans_logp, g)))

    for name, ref, active, args in pairs:
        active(*args)  # warm up (JIT compile)
        loops = 200
        t_ref = timeit(lambda: [ref(*args) for _ in range(loops)])
        t_act = timeit(lambda: [active(*args) for _ in range(loops)])
        print(f"{name:28s} {t_ref / loops * 1e6:10.1f}us {t_act / loops * 1e6:10.1f}us {t_ref / t_act:8.2f}x")


if __name__ == "__main__":
    main()
