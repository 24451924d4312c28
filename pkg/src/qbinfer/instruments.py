"""Completely positive instruments in Kraus form.

An instrument maps each outcome to a finite list of Kraus operators; the
operation on an event A is ``rho -> sum_{x in A} sum_k K_k(x) rho K_k(x)^dag``
and the total over all outcomes is trace preserving. Outcomes whose operation
is exactly zero (for example pruned products in a composition) may be absent
from the Kraus map while still being listed in the outcome space; they carry
zero effects and zero probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    CompletionFailure,
    DimensionChainMismatch,
    DimensionMismatch,
    IncompatibleOutcomeSpaces,
    NotCommuting,
    OutcomeExplosion,
    UnknownLabel,
)
from .linalg import as_cmatrix
from .observables import (
    DensityMatrix,
    OutcomeSpace,
    Povm,
    join_label,
    product_space,
)

INDEP_TOL = 1e-8
COMMUTE_TOL = 1e-8
DILATION_TOL = 1e-8
MAX_COMPOSITE_OUTCOMES = 10**6


@dataclass(frozen=True, eq=False)
class KrausInstrument:
    """Outcome-indexed Kraus lists with trace-preserving total."""

    dim_in: int
    dim_out: int
    space: OutcomeSpace
    kraus: dict[str, list[np.ndarray]]

    def __post_init__(self):
        ops: dict[str, list[np.ndarray]] = {}
        total = np.zeros((self.dim_in, self.dim_in), dtype=complex)
        for lab, lst in self.kraus.items():
            if lab not in self.space.labels:
                raise UnknownLabel(f"kraus list for unknown outcome {lab!r}")
            if len(lst) == 0:
                raise ValueError(f"outcome {lab!r} has an empty Kraus list")
            mats = []
            for i, k in enumerate(lst):
                a = np.asarray(k, dtype=complex)
                if a.shape != (self.dim_out, self.dim_in):
                    raise DimensionMismatch(
                        f"kraus[{lab}][{i}] has shape {a.shape}, expected "
                        f"({self.dim_out}, {self.dim_in})"
                    )
                if not np.all(np.isfinite(a.view(float))):
                    raise ValueError(f"kraus[{lab}][{i}] contains non-finite entries")
                a = a.copy()
                a.flags.writeable = False
                mats.append(a)
                total += a.conj().T @ a
            # Minimal-decomposition invariant: each list linearly independent.
            stacked = np.stack([m.reshape(-1) for m in mats])
            sv = np.linalg.svd(stacked, compute_uv=False)
            if len(mats) > 1 and sv[-1] <= INDEP_TOL * sv[0]:
                raise ValueError(
                    f"Kraus list for outcome {lab!r} is linearly dependent "
                    f"(smallest singular value ratio {sv[-1] / sv[0]:.3e})"
                )
            if len(mats) == 1 and sv[0] <= INDEP_TOL:
                raise ValueError(f"Kraus list for outcome {lab!r} is numerically zero")
            ops[lab] = mats
        defect = float(np.abs(total - np.eye(self.dim_in)).max())
        if defect > linalg.NORM_TOL:
            raise ValueError(f"completeness sum deviates from identity by {defect:.3e}")
        object.__setattr__(self, "kraus", ops)

    def kraus_for(self, label: str) -> list[np.ndarray]:
        """Kraus list of one outcome; empty for pruned (zero-operation) outcomes."""
        if label not in self.space.labels:
            raise UnknownLabel(f"unknown outcome {label!r}")
        return self.kraus.get(label, [])

    @property
    def n_outcomes(self) -> int:
        return len(self.space.labels)

    @staticmethod
    def channel(kraus_ops, dim: int | None = None, label: str = "x0") -> "KrausInstrument":
        """Single-outcome instrument (a channel)."""
        ops = [np.asarray(k, dtype=complex) for k in kraus_ops]
        d_out, d_in = ops[0].shape
        if dim is not None:
            d_out = d_in = dim
        return KrausInstrument(d_in, d_out, OutcomeSpace((label,)), {label: ops})

    @staticmethod
    def luders(povm: Povm) -> "KrausInstrument":
        """Instrument with Kraus operators the square roots of the effects."""
        kraus = {}
        for lab in povm.space.labels:
            w, v = linalg.eig_hermitian(povm.effect(lab))
            w = np.clip(w, 0.0, None)
            root = (v * np.sqrt(w)) @ v.conj().T
            kraus[lab] = [root]
        return KrausInstrument(povm.dim, povm.dim, povm.space, kraus)


def instrument_residuals(dim_in, dim_out, kraus) -> dict[str, float]:
    """Validation residuals for a candidate instrument (used by `validate`)."""
    total = np.zeros((dim_in, dim_in), dtype=complex)
    out: dict[str, float] = {}
    for lab, lst in kraus.items():
        mats = [np.asarray(k, dtype=complex) for k in lst]
        for a in mats:
            total += a.conj().T @ a
        stacked = np.stack([m.reshape(-1) for m in mats])
        sv = np.linalg.svd(stacked, compute_uv=False)
        out[f"independence[{lab}]"] = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    out["completeness"] = float(np.abs(total - np.eye(dim_in)).max())
    return out


def _resolve_event(inst: KrausInstrument, event) -> list[str]:
    labels = [event] if isinstance(event, str) else list(event)
    for lab in labels:
        if lab not in inst.space.labels:
            raise UnknownLabel(f"unknown outcome {lab!r}")
    return labels


def apply_on_event(inst: KrausInstrument, event, rho) -> np.ndarray:
    """Subnormalized output sum_{x in event} sum_k K_k(x) rho K_k(x)^dag."""
    labels = _resolve_event(inst, event)
    m = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else rho, dtype=complex)
    if m.shape != (inst.dim_in, inst.dim_in):
        raise DimensionMismatch(
            f"state has shape {m.shape}, instrument input dimension is {inst.dim_in}"
        )
    out = np.zeros((inst.dim_out, inst.dim_out), dtype=complex)
    for lab in labels:
        for k in inst.kraus_for(lab):
            out += k @ m @ k.conj().T
    return out


def dual_apply(inst: KrausInstrument, event, b) -> np.ndarray:
    """Heisenberg-picture action sum_{x in event} sum_k K_k(x)^dag b K_k(x)."""
    labels = _resolve_event(inst, event)
    bm = as_cmatrix(b, "observable")
    if bm.shape != (inst.dim_out, inst.dim_out):
        raise DimensionMismatch(
            f"observable has shape {bm.shape}, instrument output dimension is {inst.dim_out}"
        )
    out = np.zeros((inst.dim_in, inst.dim_in), dtype=complex)
    for lab in labels:
        for k in inst.kraus_for(lab):
            out += k.conj().T @ bm @ k
    return out


def induced_observable(inst: KrausInstrument) -> Povm:
    """POVM with effect(x) = sum_k K_k(x)^dag K_k(x); zero for pruned outcomes."""
    effects = {}
    for lab in inst.space.labels:
        e = np.zeros((inst.dim_in, inst.dim_in), dtype=complex)
        for k in inst.kraus_for(lab):
            e += k.conj().T @ k
        effects[lab] = (e + e.conj().T) / 2
    return Povm(inst.space, effects)


def outcome_probabilities(inst: KrausInstrument, rho: DensityMatrix):
    from .observables import induced_measure

    return induced_measure(induced_observable(inst), rho)


def _reduce_kraus_list(mats: list[np.ndarray], rel_tol: float = INDEP_TOL):
    """Replace a linearly dependent Kraus list by an action-equivalent basis.

    The Hilbert-Schmidt Gram spectrum (squared singular values of the stacked
    vectorized operators) decides whether reduction is needed; directions kept
    above ``rel_tol`` relative rebuild an orthogonal Kraus set representing the
    same completely positive map. Returns [] for a numerically zero map.
    """
    v = np.stack([m.reshape(-1) for m in mats])
    sv = np.linalg.svd(v, compute_uv=False)
    if sv[0] <= 1e-14:
        return []
    if len(mats) == 1 or sv[-1] > rel_tol * sv[0]:
        return list(mats)
    # T[(i,p),(l,q)] = sum_k K[i,p] conj(K[l,q]) determines the map linearly.
    t = v.T @ v.conj()
    w, y = np.linalg.eigh((t + t.conj().T) / 2)
    cutoff = (rel_tol * sv[0]) ** 2
    return [
        (np.sqrt(w[idx]) * y[:, idx]).reshape(mats[0].shape)
        for idx in range(w.size)
        if w[idx] > cutoff
    ]


def compose(insts: list[KrausInstrument]) -> KrausInstrument:
    """Sequential composition; outcomes are ordered tuples of factor outcomes.

    The Kraus list of (x1,...,xn) holds the ordered products K(xn)...K(x1).
    Product lists that came out linearly dependent are reduced to a basis with
    identical action; all-zero products are pruned from the Kraus map.
    """
    if len(insts) == 0:
        raise ValueError("compose needs at least one instrument")
    if len(insts) == 1:
        return insts[0]
    size = 1
    for i in range(1, len(insts)):
        if insts[i].dim_in != insts[i - 1].dim_out:
            raise DimensionChainMismatch(
                f"step {i} input dimension {insts[i].dim_in} != "
                f"previous output dimension {insts[i - 1].dim_out}"
            )
    for inst in insts:
        size *= inst.n_outcomes
        if size > MAX_COMPOSITE_OUTCOMES:
            raise OutcomeExplosion(f"composite outcome space exceeds {MAX_COMPOSITE_OUTCOMES}")
    space = product_space([i.space for i in insts])
    kraus: dict[str, list[np.ndarray]] = {}
    dim_in, dim_out = insts[0].dim_in, insts[-1].dim_out

    def build(step: int, parts: tuple[str, ...], mats: list[np.ndarray]):
        if step == len(insts):
            reduced = _reduce_kraus_list(mats)
            if reduced:
                kraus[join_label(parts)] = reduced
            return
        inst = insts[step]
        for lab in inst.space.labels:
            lst = inst.kraus_for(lab)
            if not lst:
                continue  # zero operation upstream kills every extension
            nxt = [k @ m for m in mats for k in lst] if mats else list(lst)
            build(step + 1, parts + (lab,), nxt)

    build(0, (), [])
    return KrausInstrument(dim_in, dim_out, space, kraus)


def sequential_marginals(insts: list[KrausInstrument]) -> list[Povm]:
    """Observable actually measured at each slot of a sequential scheme.

    Slot i carries the dual chain of all steps with the full outcome set
    except step i, which is resolved per outcome. For n = 1 this is just the
    induced observable.
    """
    if len(insts) == 1:
        return [induced_observable(insts[0])]
    for i in range(1, len(insts)):
        if insts[i].dim_in != insts[i - 1].dim_out:
            raise DimensionChainMismatch(f"step {i} dimensions do not chain")
    out = []
    for i, inst_i in enumerate(insts):
        effects = {}
        for lab in inst_i.space.labels:
            b = np.eye(insts[-1].dim_out, dtype=complex)
            for j in range(len(insts) - 1, -1, -1):
                if j == i:
                    b = dual_apply(insts[j], [lab], b)
                else:
                    b = dual_apply(insts[j], insts[j].space.labels, b)
            effects[lab] = (b + b.conj().T) / 2
        out.append(Povm(inst_i.space, effects))
    return out


def _matrix_basis(d: int):
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            yield (i, j), e


def joint_observable_commuting(insts: list[KrausInstrument]) -> Povm:
    """Joint observable of the factor observables when the duals commute.

    Certifies numerically, on the full matrix-unit basis, that each step's
    dual commutes with the dual of the composition of its predecessors, then
    returns the induced observable of the composition and checks that every
    factor observable is recovered as the matching marginal.
    """
    d = insts[0].dim_in
    for inst in insts:
        if inst.dim_in != d or inst.dim_out != d:
            raise DimensionChainMismatch("commuting-joint construction needs equal dimensions")
    for i in range(1, len(insts)):
        prefix = compose(insts[:i]) if i > 1 else insts[0]
        for lab_i in insts[i].space.labels:
            for lab_p in prefix.space.labels:
                for (bi, bj), e in _matrix_basis(d):
                    ab = dual_apply(insts[i], [lab_i], dual_apply(prefix, [lab_p], e))
                    ba = dual_apply(prefix, [lab_p], dual_apply(insts[i], [lab_i], e))
                    resid = float(np.abs(ab - ba).max())
                    if resid > COMMUTE_TOL:
                        raise NotCommuting(
                            f"duals of step {i} outcome {lab_i!r} and prefix outcome "
                            f"{lab_p!r} disagree on basis element ({bi},{bj}) "
                            f"by {resid:.3e}"
                        )
    composite = compose(insts)
    joint = induced_observable(composite)
    from .observables import marginal_observable

    for i, inst in enumerate(insts):
        factor = induced_observable(inst)
        marg = marginal_observable(joint, i) if len(insts) > 1 else joint
        for lab in factor.space.labels:
            resid = float(np.abs(factor.effect(lab) - marg.effect(lab)).max())
            if resid > COMMUTE_TOL:
                raise NotCommuting(
                    f"marginal {i} deviates from factor observable at outcome "
                    f"{lab!r} by {resid:.3e}"
                )
    return joint


@dataclass(frozen=True, eq=False)
class IndirectMeasurement:
    """Ancilla + unitary + pointer observable realizing an instrument."""

    ancilla_dim: int
    ancilla_state: DensityMatrix
    unitary: np.ndarray
    pointer: Povm

    def __post_init__(self):
        u = as_cmatrix(self.unitary, "unitary")
        if self.ancilla_state.dim != self.ancilla_dim:
            raise DimensionMismatch("ancilla state dimension mismatch")
        if u.shape[0] % self.ancilla_dim != 0:
            raise DimensionMismatch("unitary dimension not divisible by ancilla dimension")
        defect = float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())
        if defect > linalg.NORM_TOL:
            raise ValueError(f"unitary defect {defect:.3e}")
        if self.pointer.dim != self.ancilla_dim:
            raise DimensionMismatch("pointer must act on the ancilla")
        for lab in self.pointer.space.labels:
            p = self.pointer.effect(lab)
            if float(np.abs(p @ p - p).max()) > linalg.NORM_TOL:
                raise ValueError(f"pointer effect {lab!r} is not a projection")
        object.__setattr__(self, "unitary", _frozen(u))

    @property
    def system_dim(self) -> int:
        return self.unitary.shape[0] // self.ancilla_dim

    def dual_effect(self, a, label: str) -> np.ndarray:
        """Heisenberg action on the system: Phi_phi U^dag (a x pointer(x)) U."""
        d, dp = self.system_dim, self.ancilla_dim
        am = as_cmatrix(a, "observable")
        if am.shape[0] != d:
            raise DimensionMismatch("observable dimension mismatch")
        big = self.unitary.conj().T @ np.kron(am, self.pointer.effect(label)) @ self.unitary
        weighted = np.kron(np.eye(d), self.ancilla_state.matrix) @ big
        return np.trace(weighted.reshape(d, dp, d, dp), axis1=1, axis2=3)

    def instrument(self) -> KrausInstrument:
        """Recover the statistically equivalent Kraus instrument.

        Assembles, per outcome, the operator-frame matrix of the operation
        from the dual action on matrix units, then reads an orthogonal Kraus
        list off its eigenvectors.
        """
        d = self.system_dim
        kraus: dict[str, list[np.ndarray]] = {}
        for lab in self.pointer.space.labels:
            t = np.zeros((d * d, d * d), dtype=complex)
            for (l, i), e in _matrix_basis(d):
                dual = self.dual_effect(e, lab)
                t[i * d : (i + 1) * d, l * d : (l + 1) * d] = dual.T
            w, y = np.linalg.eigh((t + t.conj().T) / 2)
            mats = [
                (np.sqrt(w[idx]) * y[:, idx]).reshape(d, d)
                for idx in range(d * d)
                if w[idx] > 1e-10
            ]
            if mats:
                kraus[lab] = mats
        return KrausInstrument(d, d, self.pointer.space, kraus)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    a.flags.writeable = False
    return a


def dilate(inst: KrausInstrument) -> IndirectMeasurement:
    """Indirect-measurement realization with ancilla dimension = total Kraus count.

    The isometry stacks all Kraus slots, the unitary is its deterministic
    orthonormal completion (candidate columns taken from the canonical basis
    in order), the ancilla starts in the first basis vector and the pointer
    projects onto the slots of each outcome.
    """
    if inst.dim_in != inst.dim_out:
        raise DimensionMismatch("dilation requires equal input and output dimensions")
    d = inst.dim_in
    slots: list[tuple[str, np.ndarray]] = []
    for lab in inst.space.labels:
        for k in inst.kraus_for(lab):
            slots.append((lab, k))
    m = len(slots)
    if m < 1:
        raise ValueError("instrument has no Kraus operators")
    # V: system -> system x ancilla, psi |-> sum_s (K_s psi) x e_s
    v = np.zeros((d * m, d), dtype=complex)
    for s, (_, k) in enumerate(slots):
        for i in range(d):
            v[i * m + s, :] = v[i * m + s, :] + k[i, :]
    defect = float(np.abs(v.conj().T @ v - np.eye(d)).max())
    if defect > linalg.NORM_TOL:
        raise ValueError(f"isometry defect {defect:.3e}")
    # Unitary completion: columns psi_j x e_0 are fixed to V's columns.
    dim = d * m
    u = np.zeros((dim, dim), dtype=complex)
    fixed_cols = [j * m for j in range(d)]
    for j, col in enumerate(fixed_cols):
        u[:, col] = v[:, j]
    basis = [u[:, c] for c in fixed_cols]
    free_cols = [c for c in range(dim) if c not in fixed_cols]
    cursor = 0
    for c in free_cols:
        vec_new = None
        while cursor < dim:
            cand = np.zeros(dim, dtype=complex)
            cand[cursor] = 1.0
            cursor += 1
            for _ in range(2):  # two projection passes keep orthogonality tight
                for b in basis:
                    cand = cand - b * np.vdot(b, cand)
            norm = np.linalg.norm(cand)
            if norm > 1e-7:
                vec_new = cand / norm
                break
        if vec_new is None:
            raise CompletionFailure("orthonormal extension ran out of candidates")
        basis.append(vec_new)
        u[:, c] = vec_new
    pointer_effects = {}
    for lab in inst.space.labels:
        p = np.zeros((m, m), dtype=complex)
        for s, (slab, _) in enumerate(slots):
            if slab == lab:
                p[s, s] = 1.0
        pointer_effects[lab] = p
    ancilla0 = np.zeros(m, dtype=complex)
    ancilla0[0] = 1.0
    return IndirectMeasurement(
        ancilla_dim=m,
        ancilla_state=DensityMatrix.pure(ancilla0),
        unitary=u,
        pointer=Povm(inst.space, pointer_effects),
    )


def statistically_equivalent(a: IndirectMeasurement, b: IndirectMeasurement) -> bool:
    """True iff the reconstructed dual maps agree outcome by outcome."""
    if a.system_dim != b.system_dim:
        raise IncompatibleOutcomeSpaces("system dimensions differ")
    if a.pointer.space != b.pointer.space:
        raise IncompatibleOutcomeSpaces("outcome spaces differ")
    d = a.system_dim
    for lab in a.pointer.space.labels:
        for _, e in _matrix_basis(d):
            da = a.dual_effect(e, lab)
            db = b.dual_effect(e, lab)
            if float(np.abs(da - db).max()) > DILATION_TOL:
                return False
    return True
