"""Posterior state updates and seeded sequential-measurement sampling.

After observing outcome x of an instrument applied to a state rho, the
system is assigned ``sum_k K_k(x) rho K_k(x)^dag / P(x)``. Families of such
states reproduce the operation on every event as a probability-weighted sum,
and for zero-probability outcomes the update is deliberately an error rather
than a fabricated state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from ._chain_py import sample_index
from .errors import DimensionChainMismatch, ZeroEvidence, ZeroProbabilityOutcome
from .instruments import KrausInstrument, apply_on_event, induced_observable
from .kernel import pack_instrument, run_packed_chain
from .observables import DensityMatrix, OutcomeDistribution, induced_measure

PROB_FLOOR = 1e-12

FAMILY_STATE_TOL = 1e-10
FAMILY_MIX_TOL = 1e-9
PROPER_NULL_TOL = 1e-12
PROPER_LEAK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PosteriorFamily:
    """Posterior state per positive-probability outcome, with the outcome law.

    Instances produced by :func:`posterior_family` satisfy the update formula
    and the mixture identity; hand-built instances are not revalidated (which
    is what lets tests feed deliberately broken families to the properness
    check).
    """

    instrument: KrausInstrument
    prior: DensityMatrix
    states: dict[str, DensityMatrix]
    dist: OutcomeDistribution

    def state(self, label: str) -> DensityMatrix:
        if label not in self.states:
            raise ZeroProbabilityOutcome(
                f"outcome {label!r} has no posterior (probability below floor)"
            )
        return self.states[label]


def posterior_state(inst: KrausInstrument, rho: DensityMatrix, x: str) -> DensityMatrix:
    """Posterior after observing outcome x, normalized by its probability."""
    raw = apply_on_event(inst, [x], rho)
    p = float(np.trace(raw).real)
    if p <= PROB_FLOOR:
        raise ZeroProbabilityOutcome(f"outcome {x!r} has probability {p:.3e}")
    return DensityMatrix(raw / p)


def posterior_family(inst: KrausInstrument, rho: DensityMatrix) -> PosteriorFamily:
    """Family of posterior states over all positive-probability outcomes."""
    dist = induced_measure(induced_observable(inst), rho)
    states = {}
    for lab in inst.space.labels:
        if dist.prob(lab) > PROB_FLOOR:
            states[lab] = posterior_state(inst, rho, lab)
    fam = PosteriorFamily(inst, rho, states, dist)
    _validate_family(fam)
    return fam


def _validate_family(fam: PosteriorFamily) -> None:
    for lab, st in fam.states.items():
        raw = apply_on_event(fam.instrument, [lab], fam.prior)
        resid = float(np.abs(st.matrix * fam.dist.prob(lab) - raw).max())
        if resid > FAMILY_STATE_TOL:
            raise ValueError(f"posterior state residual {resid:.3e} at outcome {lab!r}")
    # Mixture identity on singletons extends to every event by additivity.
    total = np.zeros((fam.instrument.dim_out,) * 2, dtype=complex)
    for lab in fam.instrument.space.labels:
        raw = apply_on_event(fam.instrument, [lab], fam.prior)
        mixed = (
            fam.states[lab].matrix * fam.dist.prob(lab)
            if lab in fam.states
            else np.zeros_like(raw)
        )
        resid = float(np.abs(mixed - raw).max())
        if resid > FAMILY_MIX_TOL:
            raise ValueError(f"mixture identity residual {resid:.3e} at outcome {lab!r}")
        total += mixed
    full = apply_on_event(fam.instrument, fam.instrument.space.labels, fam.prior)
    resid = float(np.abs(total - full).max())
    if resid > FAMILY_MIX_TOL:
        raise ValueError(f"mixture identity residual {resid:.3e} on the full space")


def properness_check(fam: PosteriorFamily):
    """Check that posteriors give zero weight to the unconditioned output's kernel.

    Tests every eigenprojector of the unconditioned output state: projectors
    with vanishing expectation there must have vanishing expectation in every
    covered posterior. Returns ``(True, None)`` or ``(False, witness)`` where
    the witness records the violating projector, outcome and leaked value.
    """
    out_state = apply_on_event(fam.instrument, fam.instrument.space.labels, fam.prior)
    w, v = np.linalg.eigh((out_state + out_state.conj().T) / 2)
    for idx in range(w.size):
        proj = np.outer(v[:, idx], v[:, idx].conj())
        if float(np.trace(out_state @ proj).real) > PROPER_NULL_TOL:
            continue
        for lab, st in fam.states.items():
            leak = float(np.trace(st.matrix @ proj).real)
            if leak > PROPER_LEAK_TOL:
                return False, {"projector": proj, "outcome": lab, "value": leak}
    return True, None


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Seeded record of one sequential measurement run.

    ``states`` stacks the post-step density matrices as an (n, d, d) array;
    ``logprob`` is the natural log of the realized path probability.
    """

    seed: int
    outcomes: tuple[str, ...]
    states: np.ndarray
    probs: np.ndarray
    logprob: float

    def state(self, i: int) -> DensityMatrix:
        return DensityMatrix(self.states[i])

    def purities(self) -> np.ndarray:
        return np.einsum("nij,nji->n", self.states, self.states).real

    def __len__(self) -> int:
        return len(self.outcomes)


def _check_chainable(insts: list[KrausInstrument], prior: DensityMatrix) -> None:
    if insts[0].dim_in != prior.dim:
        raise DimensionChainMismatch(
            f"prior dimension {prior.dim} != first input dimension {insts[0].dim_in}"
        )
    for i in range(1, len(insts)):
        if insts[i].dim_in != insts[i - 1].dim_out:
            raise DimensionChainMismatch(f"step {i} dimensions do not chain")


def sample_trajectory(
    insts: list[KrausInstrument], prior: DensityMatrix, seed: int
) -> Trajectory:
    """Sample one outcome per step, updating the state by the realized operation.

    Step i consumes the i-th uniform of the Philox stream keyed by ``seed``
    and picks the first outcome (in label order) whose cumulative probability
    exceeds it; outcomes of zero probability never enter the support.
    """
    _check_chainable(insts, prior)
    n = len(insts)
    uniforms = rng.step_uniforms(seed, n)
    homogeneous = all(inst is insts[0] for inst in insts)
    if homogeneous and n > 1:
        kraus, offsets, effects = pack_instrument(insts[0])
        idx, probs, states, logprob = run_packed_chain(
            kraus, offsets, effects, prior.matrix, uniforms
        )
        labels = tuple(insts[0].space.labels[i] for i in idx)
        return Trajectory(int(seed), labels, states, probs, logprob)
    outcomes = []
    probs_list = []
    states = []
    rho = prior.matrix
    logprob = 0.0
    for step, inst in enumerate(insts):
        _, _, effects = pack_instrument(inst)
        step_probs = np.einsum("ij,xji->x", rho, effects).real
        step_probs[step_probs < 0] = 0.0
        chosen = sample_index(step_probs, uniforms[step])
        if chosen < 0 or step_probs[chosen] <= 0.0:
            raise ZeroProbabilityOutcome(f"no outcome with positive mass at step {step}")
        lab = inst.space.labels[chosen]
        raw = apply_on_event(inst, [lab], rho)
        rho = raw / np.trace(raw).real
        outcomes.append(lab)
        probs_list.append(step_probs[chosen])
        states.append(rho)
        logprob += float(np.log(step_probs[chosen]))
    return Trajectory(
        int(seed),
        tuple(outcomes),
        np.stack(states),
        np.array(probs_list),
        logprob,
    )


def classical_bayes_oracle(
    prior_weights, likelihood, observation: int
) -> np.ndarray:
    """Textbook Bayes update on a finite parameter set.

    ``likelihood[t, x]`` is the probability of observation x under parameter
    t. Kept deliberately independent of the operator machinery so it can
    serve as the oracle for diagonal-model recovery tests.
    """
    w = np.asarray(prior_weights, dtype=float)
    lik = np.asarray(likelihood, dtype=float)
    if w.ndim != 1 or lik.ndim != 2 or lik.shape[0] != w.size:
        raise ValueError("likelihood must be (n_params, n_outcomes)")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("prior weights must form a probability vector")
    if np.any(lik < 0) or np.any(np.abs(lik.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("likelihood rows must be probability vectors")
    num = w * lik[:, observation]
    evidence = num.sum()
    if evidence <= 0.0:
        raise ZeroEvidence(f"observation {observation} has zero prior predictive mass")
    return num / evidence
