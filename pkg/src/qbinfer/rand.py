"""Random states, unitaries and instruments for tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .instruments import KrausInstrument
from .observables import DensityMatrix, OutcomeSpace


def _ginibre(gen: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return gen.normal(size=(rows, cols)) + 1j * gen.normal(size=(rows, cols))


def random_density_matrix(gen: np.random.Generator, dim: int) -> DensityMatrix:
    g = _ginibre(gen, dim, dim)
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_unitary(gen: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(_ginibre(gen, dim, dim))
    ph = np.diag(r)
    return q * (ph.conj() / np.abs(ph))[None, :]


def random_hermitian(gen: np.random.Generator, dim: int) -> np.ndarray:
    g = _ginibre(gen, dim, dim)
    return (g + g.conj().T) / 2


def random_instrument(
    gen: np.random.Generator,
    dim: int,
    n_outcomes: int,
    kraus_per_outcome: int = 1,
    dim_out: int | None = None,
) -> KrausInstrument:
    """Instrument with Gaussian Kraus operators, normalized to completeness."""
    d_out = dim if dim_out is None else dim_out
    raw = [
        [_ginibre(gen, d_out, dim) for _ in range(kraus_per_outcome)]
        for _ in range(n_outcomes)
    ]
    total = sum(k.conj().T @ k for lst in raw for k in lst)
    w, v = np.linalg.eigh(total)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    labels = tuple(str(i) for i in range(n_outcomes))
    kraus = {lab: [k @ inv_sqrt for k in lst] for lab, lst in zip(labels, raw)}
    return KrausInstrument(dim, d_out, OutcomeSpace(labels), kraus)


def random_commuting_readout(
    gen: np.random.Generator,
    likelihood: np.ndarray | None = None,
    basis: np.ndarray | None = None,
    min_separation: float = 0.1,
) -> KrausInstrument:
    """Two-outcome qubit instrument whose Kraus operators share an eigenbasis.

    Kraus operator of outcome x is W diag(sqrt(p(x|1)), sqrt(p(x|2))) W^dag.
    The two likelihood rows are kept at least ``min_separation`` apart so the
    induced hypothesis test is informative.
    """
    if likelihood is None:
        while True:
            p0 = gen.uniform(0.55, 0.9)
            q0 = gen.uniform(0.1, 0.45)
            if abs(p0 - q0) >= min_separation:
                break
        likelihood = np.array([[p0, 1 - p0], [q0, 1 - q0]])
    w = np.eye(2, dtype=complex) if basis is None else basis
    kraus = {}
    for x in range(likelihood.shape[1]):
        diag = np.diag(np.sqrt(likelihood[:, x]).astype(complex))
        kraus[str(x)] = [w @ diag @ w.conj().T]
    labels = tuple(str(x) for x in range(likelihood.shape[1]))
    return KrausInstrument(2, 2, OutcomeSpace(labels), kraus)


def depolarizing_channel(p: float, unitary: np.ndarray | None = None) -> KrausInstrument:
    """Qubit channel mixing toward the maximally mixed state, optionally rotated."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    ident = np.eye(2, dtype=complex)
    u = ident if unitary is None else np.asarray(unitary, dtype=complex)
    ops = [
        np.sqrt(1 - 3 * p / 4) * (u @ ident),
        np.sqrt(p / 4) * (u @ sx),
        np.sqrt(p / 4) * (u @ sy),
        np.sqrt(p / 4) * (u @ sz),
    ]
    return KrausInstrument.channel(ops)


def amplitude_damping(gamma: float) -> KrausInstrument:
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return KrausInstrument.channel([k0, k1])


def luders_z() -> KrausInstrument:
    p0 = np.array([[1, 0], [0, 0]], dtype=complex)
    p1 = np.array([[0, 0], [0, 1]], dtype=complex)
    return KrausInstrument(2, 2, OutcomeSpace(("0", "1")), {"0": [p0], "1": [p1]})


def luders_x() -> KrausInstrument:
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    minus = np.array([1, -1], dtype=complex) / np.sqrt(2)
    return KrausInstrument(
        2,
        2,
        OutcomeSpace(("+", "-")),
        {"+": [np.outer(plus, plus.conj())], "-": [np.outer(minus, minus.conj())]},
    )


def noisy_readout(p_correct: float = 0.8) -> KrausInstrument:
    k0 = np.diag([np.sqrt(p_correct), np.sqrt(1 - p_correct)]).astype(complex)
    k1 = np.diag([np.sqrt(1 - p_correct), np.sqrt(p_correct)]).astype(complex)
    return KrausInstrument(2, 2, OutcomeSpace(("0", "1")), {"0": [k0], "1": [k1]})
