"""Pure numpy implementation of the sequential measurement stepping kernel.

Contract shared with the compiled twin in ``_chainkernel``: given stacked
Kraus operators grouped by outcome, effect matrices, an initial state and one
uniform per step, sample outcomes by inverse CDF over the outcome order and
update the state by the realized operation. The compiled module is preferred
at import time in :mod:`qbinfer.kernel`; this module is the fallback and the
reference for backend-agreement tests.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def sample_index(probs: np.ndarray, u: float) -> int:
    """First outcome whose running probability exceeds u; zero mass skipped."""
    cum = 0.0
    chosen = -1
    for x in range(probs.shape[0]):
        p = probs[x]
        if p <= 0.0:
            continue
        cum += p
        if u < cum:
            return x
    for x in range(probs.shape[0] - 1, -1, -1):
        if probs[x] > 0.0:
            chosen = x
            break
    return chosen


def run_chain_kernel(
    kraus: np.ndarray,
    offsets: np.ndarray,
    effects: np.ndarray,
    rho0: np.ndarray,
    uniforms: np.ndarray,
    outcomes_out: np.ndarray,
    probs_out: np.ndarray,
    states_out: np.ndarray,
) -> float:
    """Run the chain; fill outcome/probability/state records; return logprob.

    kraus    : (n_kraus, d, d) complex, rows grouped by outcome
    offsets  : (n_outcomes + 1,) int64 slices of `kraus` per outcome
    effects  : (n_outcomes, d, d) complex, sum_k K^dag K per outcome
    rho0     : (d, d) complex initial state
    uniforms : (n,) float64, one draw per step
    """
    n = uniforms.shape[0]
    n_out = effects.shape[0]
    rho = rho0.copy()
    probs = np.empty(n_out)
    logprob = 0.0
    for step in range(n):
        for x in range(n_out):
            p = np.einsum("ij,ji->", rho, effects[x]).real
            probs[x] = p if p > 0.0 else 0.0
        chosen = sample_index(probs, uniforms[step])
        t = np.zeros_like(rho)
        for k in range(offsets[chosen], offsets[chosen + 1]):
            t += kraus[k] @ rho @ kraus[k].conj().T
        rho = t / np.trace(t).real
        outcomes_out[step] = chosen
        probs_out[step] = probs[chosen]
        logprob += np.log(probs[chosen])
        states_out[step] = rho
    return float(logprob)
