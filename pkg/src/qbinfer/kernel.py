"""Backend selection for the chain-stepping hot loop.

Prefers the compiled extension when it built; otherwise falls back to the
numpy implementation. Both expose the same ``run_chain_kernel`` contract and
the same sampling rule, so a given seed selects the same outcome sequence on
either backend (states may differ in the last float digits).
"""

from __future__ import annotations

import numpy as np

from . import _chain_py

try:  # pragma: no cover - depends on the build environment
    from . import _chainkernel as _impl
except ImportError:  # pragma: no cover
    _impl = _chain_py

CHAIN_BACKEND: str = _impl.BACKEND_NAME


def chain_backend() -> str:
    """Name of the active stepping backend: 'cython' or 'python'."""
    return CHAIN_BACKEND


def pack_instrument(inst) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack an instrument's Kraus lists and effects for the kernel."""
    d = inst.dim_in
    mats = []
    offsets = [0]
    for lab in inst.space.labels:
        lst = inst.kraus_for(lab)
        mats.extend(lst)
        offsets.append(offsets[-1] + len(lst))
    kraus = np.ascontiguousarray(np.stack(mats), dtype=complex)
    eff = np.zeros((len(inst.space.labels), d, d), dtype=complex)
    for i, lab in enumerate(inst.space.labels):
        for k in inst.kraus_for(lab):
            eff[i] += k.conj().T @ k
    return kraus, np.array(offsets, dtype=np.int64), np.ascontiguousarray(eff)


def run_packed_chain(
    kraus: np.ndarray,
    offsets: np.ndarray,
    effects: np.ndarray,
    rho0: np.ndarray,
    uniforms: np.ndarray,
    impl=None,
):
    """Allocate outputs and run the selected (or given) backend."""
    n = uniforms.shape[0]
    d = rho0.shape[0]
    outcomes = np.zeros(n, dtype=np.int64)
    probs = np.zeros(n)
    states = np.zeros((n, d, d), dtype=complex)
    backend = impl if impl is not None else _impl
    logprob = backend.run_chain_kernel(
        kraus,
        offsets,
        effects,
        np.array(rho0, dtype=complex, order="C"),  # copy: inputs may be frozen
        np.array(uniforms, dtype=float, order="C"),
        outcomes,
        probs,
        states,
    )
    return outcomes, probs, states, float(logprob)
