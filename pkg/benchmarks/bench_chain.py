"""Benchmark the chain-stepping backends against each other.

Usage: python benchmarks/bench_chain.py [steps]

Runs the same seeded measurement chain through the compiled kernel (if built)
and the pure numpy fallback, reports per-step cost and the speedup, and
checks that both backends picked identical outcome sequences.
"""

import sys
import time

import numpy as np

from qbinfer import _chain_py
from qbinfer.kernel import pack_instrument, run_packed_chain
from qbinfer.observables import DensityMatrix
from qbinfer.rand import random_commuting_readout
from qbinfer.rng import step_uniforms

try:
    from qbinfer import _chainkernel
except ImportError:
    _chainkernel = None


def bench(impl, name, kraus, offsets, effects, rho, uniforms):
    t0 = time.perf_counter()
    outcomes, probs, states, logprob = run_packed_chain(
        kraus, offsets, effects, rho, uniforms, impl=impl
    )
    dt = time.perf_counter() - t0
    n = uniforms.shape[0]
    print(f"{name:8s} {dt:8.3f} s  {dt / n * 1e6:8.2f} us/step")
    return outcomes, dt


def main():
    steps = int(sys.argv[1]) if len(sys.argv) > 1 else 100_000
    gen = np.random.default_rng(0)
    inst = random_commuting_readout(gen)
    rho = DensityMatrix.maximally_mixed(2)
    kraus, offsets, effects = pack_instrument(inst)
    uniforms = step_uniforms(12345, steps)
    print(f"qubit measurement chain, {steps} steps")
    out_py, t_py = bench(_chain_py, "python", kraus, offsets, effects, rho.matrix, uniforms)
    if _chainkernel is None:
        print("compiled kernel not built; nothing to compare")
        return
    out_cy, t_cy = bench(_chainkernel, "cython", kraus, offsets, effects, rho.matrix, uniforms)
    same = np.array_equal(out_py, out_cy)
    print(f"outcome sequences identical: {same}")
    print(f"speedup: {t_py / t_cy:.1f}x")
    if not same:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
