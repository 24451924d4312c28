"""States and observables over finite outcome sets.

Outcome spaces are finite and ordered, so sigma-additivity degenerates to
finite additivity and every induced measure is a probability mass function.
Composite experiments use product labels: component labels joined with
:data:`LABEL_SEP`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    DimensionMismatch,
    InconsistentNullSet,
    MalformedProductLabels,
    NotAPovm,
    NotFullRank,
)
from .linalg import as_cmatrix

LABEL_SEP = ","

FULL_RANK_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Positive unit-trace operator; validated at construction."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_cmatrix(self.matrix, "density matrix")
        linalg.require_hermitian(m, linalg.HERM_TOL, "density matrix")
        if not linalg.is_psd(m, linalg.PSD_TOL):
            raise ValueError(
                f"density matrix has negative eigenvalue {linalg.min_eigenvalue(m):.3e}"
            )
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > linalg.NORM_TOL:
            raise ValueError(f"density matrix trace {tr!r} deviates from 1")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    @staticmethod
    def pure(vector) -> "DensityMatrix":
        v = np.asarray(vector, dtype=complex).reshape(-1)
        v = v / np.linalg.norm(v)
        return DensityMatrix(np.outer(v, v.conj()))

    @staticmethod
    def maximally_mixed(dim: int) -> "DensityMatrix":
        return DensityMatrix(np.eye(dim, dtype=complex) / dim)


def density_residuals(m) -> dict[str, float]:
    """Validation residuals for a candidate density matrix (used by `validate`)."""
    a = as_cmatrix(m, "state")
    return {
        "herm_defect": linalg.herm_defect(a),
        "min_eigenvalue": float(np.linalg.eigvalsh((a + a.conj().T) / 2)[0]),
        "trace_deviation": abs(float(np.trace(a).real) - 1.0),
    }


@dataclass(frozen=True)
class OutcomeSpace:
    """Finite ordered outcome set with an optional real embedding of the labels."""

    labels: tuple[str, ...]
    embedding: dict[str, float] | None = None

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if len(labels) == 0:
            raise ValueError("outcome space needs at least one label")
        if len(set(labels)) != len(labels):
            raise ValueError("outcome labels must be distinct")
        object.__setattr__(self, "labels", labels)
        if self.embedding is not None:
            missing = [x for x in labels if x not in self.embedding]
            if missing:
                raise ValueError(f"embedding missing labels {missing}")
            object.__setattr__(
                self, "embedding", {x: float(self.embedding[x]) for x in labels}
            )

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, OutcomeSpace)
            and self.labels == other.labels
            and self.embedding == other.embedding
        )

    def __hash__(self):
        return hash(self.labels)


def product_space(spaces: list[OutcomeSpace]) -> OutcomeSpace:
    """Ordered Cartesian product; labels joined with LABEL_SEP.

    Factors that are themselves products flatten, which is exactly the
    associativity wanted for composite experiments.
    """
    labels = [""]
    for i, sp in enumerate(spaces):
        sep = "" if i == 0 else LABEL_SEP
        labels = [a + sep + b for a in labels for b in sp.labels]
    return OutcomeSpace(tuple(labels))


def split_label(label: str) -> tuple[str, ...]:
    return tuple(label.split(LABEL_SEP))


def join_label(parts) -> str:
    return LABEL_SEP.join(parts)


@dataclass(frozen=True, eq=False)
class Povm:
    """One positive effect per outcome, summing to the identity."""

    space: OutcomeSpace
    effects: dict[str, np.ndarray]

    def __post_init__(self):
        effs = {}
        dim = None
        for lab in self.space.labels:
            if lab not in self.effects:
                raise NotAPovm(f"missing effect for outcome {lab!r}")
            e = as_cmatrix(self.effects[lab], f"effect[{lab}]")
            if dim is None:
                dim = e.shape[0]
            elif e.shape[0] != dim:
                raise DimensionMismatch("effects have inconsistent dimensions")
            linalg.require_hermitian(e, linalg.HERM_TOL, f"effect[{lab}]")
            if not linalg.is_psd(e, linalg.PSD_TOL):
                raise NotAPovm(
                    f"effect[{lab}] has negative eigenvalue "
                    f"{linalg.min_eigenvalue(e):.3e}"
                )
            e = e.copy()
            e.flags.writeable = False
            effs[lab] = e
        extra = set(self.effects) - set(self.space.labels)
        if extra:
            raise NotAPovm(f"effects for unknown labels {sorted(extra)}")
        total = sum(effs.values())
        defect = float(np.abs(total - np.eye(dim)).max())
        if defect > linalg.NORM_TOL:
            raise NotAPovm(f"effects sum deviates from identity by {defect:.3e}")
        object.__setattr__(self, "effects", effs)

    @property
    def dim(self) -> int:
        return next(iter(self.effects.values())).shape[0]

    def effect(self, label: str) -> np.ndarray:
        return self.effects[label]


def povm_residuals(space: OutcomeSpace, effects: dict[str, np.ndarray]) -> dict[str, float]:
    """Validation residuals for a candidate POVM."""
    out: dict[str, float] = {}
    total = None
    dim = None
    for lab in space.labels:
        e = as_cmatrix(effects[lab], f"effect[{lab}]")
        dim = e.shape[0] if dim is None else dim
        out[f"herm[{lab}]"] = linalg.herm_defect(e)
        out[f"min_eig[{lab}]"] = float(np.linalg.eigvalsh((e + e.conj().T) / 2)[0])
        total = e if total is None else total + e
    out["completeness"] = float(np.abs(total - np.eye(dim)).max())
    return out


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """Probability mass function over an outcome space."""

    space: OutcomeSpace
    probs: dict[str, float]

    def __post_init__(self):
        extra = set(self.probs) - set(self.space.labels)
        if extra:
            raise ValueError(f"probabilities for unknown labels {sorted(extra)}")
        ps = {}
        for lab in self.space.labels:
            p = float(self.probs.get(lab, 0.0))
            if p < 0:
                raise ValueError(f"negative probability {p!r} for outcome {lab!r}")
            ps[lab] = p
        total = sum(ps.values())
        if abs(total - 1.0) > linalg.NORM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probs", ps)

    def prob(self, label: str) -> float:
        return self.probs[label]

    def as_array(self) -> np.ndarray:
        return np.array([self.probs[x] for x in self.space.labels])


def clip_probabilities(values: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Clip round-off negatives in [-tol, 0) to zero and renormalize.

    Negatives below -tol signal a model bug and raise instead of being hidden.
    """
    if tol is None:
        tol = linalg.NORM_TOL
    v = np.asarray(values, dtype=float).copy()
    worst = v.min() if v.size else 0.0
    if worst < -tol:
        raise ValueError(f"probability {worst!r} below clipping tolerance -{tol}")
    v[v < 0] = 0.0
    total = v.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"probabilities sum to {total!r}, outside tolerance of 1")
    return v / total


def induced_measure(nu: Povm, rho: DensityMatrix) -> OutcomeDistribution:
    """Outcome distribution tr[rho * effect(x)] of measuring nu in state rho."""
    if nu.dim != rho.dim:
        raise DimensionMismatch(f"POVM dim {nu.dim} != state dim {rho.dim}")
    raw = []
    for lab in nu.space.labels:
        t = complex(np.trace(rho.matrix @ nu.effect(lab)))
        if abs(t.imag) > linalg.IMAG_TOL:
            raise NotAPovm(f"trace for outcome {lab!r} has imaginary part {t.imag:.3e}")
        raw.append(t.real)
    probs = clip_probabilities(np.array(raw))
    return OutcomeDistribution(nu.space, dict(zip(nu.space.labels, probs)))


def rn_derivative(nu: Povm, rho: DensityMatrix) -> dict[str, np.ndarray]:
    """Density of the POVM w.r.t. its induced measure: effect(x) / tr[rho effect(x)].

    Requires a full-rank reference state so no nonzero effect has zero mass;
    outcomes with an (exactly) zero effect map to the zero matrix.
    """
    if nu.dim != rho.dim:
        raise DimensionMismatch(f"POVM dim {nu.dim} != state dim {rho.dim}")
    if linalg.min_eigenvalue(rho.matrix) <= FULL_RANK_TOL:
        raise NotFullRank(
            f"reference state min eigenvalue {linalg.min_eigenvalue(rho.matrix):.3e}"
        )
    out = {}
    for lab in nu.space.labels:
        e = nu.effect(lab)
        mass = float(np.trace(rho.matrix @ e).real)
        if mass <= 1e-14:
            if float(np.abs(e).max()) > 1e-12:
                raise InconsistentNullSet(
                    f"outcome {lab!r}: effect nonzero but induced mass {mass:.3e}"
                )
            out[lab] = np.zeros_like(e)
        else:
            out[lab] = e / mass
    return out


def marginal_observable(joint: Povm, axis: int) -> Povm:
    """Marginal of a joint observable over product labels along one axis."""
    parts = [split_label(lab) for lab in joint.space.labels]
    arity = len(parts[0])
    if any(len(p) != arity for p in parts):
        raise MalformedProductLabels("product labels have inconsistent arity")
    if not 0 <= axis < arity:
        raise MalformedProductLabels(f"axis {axis} out of range for arity {arity}")
    # Component order along the axis: first appearance in the joint ordering.
    marg_labels: list[str] = []
    sums: dict[str, np.ndarray] = {}
    for lab, p in zip(joint.space.labels, parts):
        a = p[axis]
        if a not in sums:
            marg_labels.append(a)
            sums[a] = np.zeros((joint.dim, joint.dim), dtype=complex)
        sums[a] = sums[a] + joint.effect(lab)
    return Povm(OutcomeSpace(tuple(marg_labels)), sums)


def product_povm(povms: list[Povm]) -> Povm:
    """Joint observable of pairwise commuting POVMs on one system.

    Effect of an outcome tuple is the ordered product of the factor effects
    (Hermitized). Only valid for commuting factors; the constructor rejects
    the result otherwise because the products stop being positive.
    """
    space = product_space([p.space for p in povms])
    dim = povms[0].dim
    effects = {}
    for lab in space.labels:
        parts = split_label(lab)
        e = np.eye(dim, dtype=complex)
        for p, a in zip(povms, parts):
            e = e @ p.effect(a)
        effects[lab] = (e + e.conj().T) / 2
    return Povm(space, effects)
