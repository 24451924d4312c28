"""Long-run behavior of repeated measurements and channel iteration.

A square instrument applied over and over generates a Markov chain of states;
this module records Cesaro averages and purity moments along seeded runs,
extracts channel spectra and fixed points, fits empirical convergence rates
against the spectral prediction, and witnesses the non-convergent unitary
orbit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .bayes import Trajectory
from .errors import (
    AlreadyConverged,
    CommutingInput,
    DimensionMismatch,
    NoSpectralGap,
    NotAProjection,
    PositivityCertificateFailed,
)
from .instruments import KrausInstrument, apply_on_event
from .kernel import pack_instrument, run_packed_chain
from .linalg import as_cmatrix, superop_matrix, trace_distance, trace_norm, unvec
from .observables import DensityMatrix

PERIPHERAL_TOL = 1e-9
FIXED_POINT_TOL = 1e-8
FIT_FLOOR = 1e-12
POSITIVITY_MIN_EIG = 1e-10


def checkpoints_for(n: int) -> list[int]:
    """Powers of two up to n, plus n itself."""
    pts = []
    k = 1
    while k <= n:
        pts.append(k)
        k *= 2
    if pts[-1] != n:
        pts.append(n)
    return pts


@dataclass(frozen=True, eq=False)
class ChainRun:
    """One seeded chain with running averages and purity moments at checkpoints."""

    trajectory: Trajectory
    cesaro: list[np.ndarray]
    moments: dict[int, list[float]]
    checkpoints: list[int]


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """Channel spectrum sorted by descending modulus, with gap and fixed point."""

    eigenvalues: np.ndarray
    gap: float
    fixed_point: DensityMatrix | None
    peripheral_count: int


def _unconditional_channel(inst: KrausInstrument):
    def phi(rho: np.ndarray) -> np.ndarray:
        return apply_on_event(inst, inst.space.labels, rho)

    return phi


def run_chain(
    inst: KrausInstrument,
    rho0: DensityMatrix,
    n: int,
    seed: int,
    moments: tuple[int, ...] = (2,),
) -> ChainRun:
    """Iterate sample-and-update n times from rho0 under one square instrument."""
    if inst.dim_in != inst.dim_out:
        raise DimensionMismatch("chain instrument must have equal dimensions")
    if inst.dim_in != rho0.dim:
        raise DimensionMismatch("initial state dimension mismatch")
    if n < 1:
        raise ValueError("chain length must be at least 1")
    uniforms = rng.step_uniforms(seed, n)
    kraus, offsets, effects = pack_instrument(inst)
    idx, probs, states, logprob = run_packed_chain(
        kraus, offsets, effects, rho0.matrix, uniforms
    )
    labels = tuple(inst.space.labels[i] for i in idx)
    traj = Trajectory(int(seed), labels, states, probs, logprob)
    pts = checkpoints_for(n)
    cesaro = []
    run_sum = np.zeros_like(rho0.matrix)
    prev = 0
    mom: dict[int, list[float]] = {int(m): [] for m in moments}
    for cp in pts:
        run_sum = run_sum + states[prev:cp].sum(axis=0)
        prev = cp
        cesaro.append(run_sum / cp)
        state = states[cp - 1]
        for m in mom:
            power = np.linalg.matrix_power(state, m)
            mom[m].append(float(np.trace(power).real))
    return ChainRun(traj, cesaro, mom, pts)


def cesaro_fixed_point_residual(run: ChainRun, inst: KrausInstrument) -> list[float]:
    """Trace-norm residual of each running average under the unconditional channel."""
    phi = _unconditional_channel(inst)
    return [float(trace_norm(phi(c) - c)) for c in run.cesaro]


def purity_moment_tail(run: ChainRun, m: int, window: int) -> float:
    """Max pairwise spread of tr(state^m) over the last `window` checkpoints."""
    seq = run.moments[int(m)]
    if window > len(seq):
        raise ValueError(f"window {window} exceeds {len(seq)} recorded checkpoints")
    tail = seq[-window:]
    return float(max(tail) - min(tail))


@dataclass(frozen=True, eq=False)
class IsometryReport:
    satisfied: bool
    lambdas: dict[int, float] | None
    violating_index: int | None = None
    residual: float | None = None


def isometry_condition(kraus, p, tol: float = 1e-8) -> IsometryReport:
    """Check that each operator compressed to range(p) is proportional to an isometry.

    Tests ``p a_i^dag a_i p = lambda_i p`` with ``lambda_i`` read off the
    trace; reports the first violating index and its residual otherwise.
    """
    pm = as_cmatrix(p, "projection")
    if float(np.abs(pm @ pm - pm).max()) > 1e-10 or float(np.abs(pm - pm.conj().T).max()) > 1e-10:
        raise NotAProjection("p must satisfy p^2 = p = p^dag within 1e-10")
    rank = int(round(float(np.trace(pm).real)))
    if rank < 2:
        raise NotAProjection("projection rank must be at least 2")
    lambdas: dict[int, float] = {}
    for i, k in enumerate(kraus):
        a = as_cmatrix(k, f"kraus[{i}]")
        compressed = pm @ a.conj().T @ a @ pm
        lam = float(np.trace(compressed).real) / rank
        resid = float(np.abs(compressed - lam * pm).max())
        if resid > tol:
            return IsometryReport(False, None, violating_index=i, residual=resid)
        lambdas[i] = lam
    return IsometryReport(True, lambdas)


def channel_spectrum(inst_or_kraus) -> SpectrumReport:
    """Eigenvalues of the channel's matrix, descending in modulus.

    When exactly one eigenvalue sits on the unit circle the fixed point is
    read off the leading eigenvector (Hermitized, trace-normalized) and
    verified against the channel.
    """
    if isinstance(inst_or_kraus, KrausInstrument):
        inst = inst_or_kraus
        if inst.dim_in != inst.dim_out:
            raise DimensionMismatch("spectrum needs a square channel")
        ops = [k for lab in inst.space.labels for k in inst.kraus_for(lab)]
    else:
        ops = list(inst_or_kraus)
    m = superop_matrix(ops)
    w, v = np.linalg.eig(m)
    order = np.lexsort((-w.imag, -w.real, -np.abs(w)))
    w = w[order]
    v = v[:, order]
    peripheral = int(np.sum(np.abs(w) >= 1.0 - PERIPHERAL_TOL))
    gap = float(1.0 - abs(w[1])) if w.size > 1 else 1.0
    fixed = None
    if peripheral == 1 and abs(w[0] - 1.0) <= 1e-6:
        cand = unvec(v[:, 0])
        cand = (cand + cand.conj().T) / 2
        tr = float(np.trace(cand).real)
        if abs(tr) > 1e-12:
            cand = cand / tr
            phi_cand = sum(k @ cand @ k.conj().T for k in ops)
            if trace_norm(phi_cand - cand) <= FIXED_POINT_TOL:
                fixed = DensityMatrix(cand)
    return SpectrumReport(w, gap, fixed, peripheral)


def _fit_log_decay(ns: np.ndarray, ds: np.ndarray):
    """Least-squares fit of log d ~ intercept - rate * n above the float floor."""
    mask = ds > FIT_FLOOR
    if not np.any(mask):
        raise AlreadyConverged("all distances at or below the floor")
    if int(mask.sum()) < 2:
        raise AlreadyConverged("not enough points above the floor to fit")
    x = ns[mask].astype(float)
    y = np.log(ds[mask])
    coeffs = np.polyfit(x, y, 1)
    fit = np.polyval(coeffs, x)
    residuals = y - fit
    return float(-coeffs[0]), float(coeffs[1]), residuals


def iterate_distance_curve(
    inst_or_kraus, rho0: DensityMatrix, n_range
) -> tuple[np.ndarray, np.ndarray, DensityMatrix]:
    """Trace distances of deterministic channel iterates to the fixed point.

    Requires a unique peripheral eigenvalue. Returns (iteration counts,
    distances, fixed point).
    """
    report = channel_spectrum(inst_or_kraus)
    if report.peripheral_count != 1 or report.fixed_point is None:
        raise NoSpectralGap(
            f"peripheral count {report.peripheral_count}; unique fixed point required"
        )
    if isinstance(inst_or_kraus, KrausInstrument):
        ops = _channel_ops(inst_or_kraus)
    else:
        ops = list(inst_or_kraus)
    target = report.fixed_point.matrix
    ns = np.array(sorted(int(x) for x in n_range))
    if ns.size < 2 or ns[0] < 1:
        raise ValueError("need at least two positive iteration counts")
    ds = np.zeros(ns.size)
    rho = rho0.matrix
    step = 0
    for i, n in enumerate(ns):
        while step < n:
            rho = sum(k @ rho @ k.conj().T for k in ops)
            step += 1
        ds[i] = trace_norm(rho - target)
    return ns, ds, report.fixed_point


def convergence_fit(
    inst_or_kraus, rho0: DensityMatrix, n_range
) -> tuple[float, float, np.ndarray]:
    """Fit the exponential approach of deterministic iterates to the fixed point.

    Returns (rate, intercept, fit residuals); the rate should match minus the
    log of the second eigenvalue modulus whenever the gap is clean.
    """
    ns, ds, _ = iterate_distance_curve(inst_or_kraus, rho0, n_range)
    return _fit_log_decay(ns, ds)


@dataclass(frozen=True)
class DrivingSpec:
    """Channel-selection process: independent draws or a finite-state Markov walk."""

    kind: str
    weights: tuple[float, ...] | None = None
    transition: tuple[tuple[float, ...], ...] | None = None
    initial: tuple[float, ...] | None = None

    @staticmethod
    def iid(weights) -> "DrivingSpec":
        w = tuple(float(x) for x in weights)
        if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError("iid weights must form a probability vector")
        return DrivingSpec("iid", weights=w)

    @staticmethod
    def markov(transition, initial) -> "DrivingSpec":
        t = tuple(tuple(float(x) for x in row) for row in transition)
        init = tuple(float(x) for x in initial)
        for row in t:
            if abs(sum(row) - 1.0) > 1e-9 or any(x < 0 for x in row):
                raise ValueError("transition rows must be probability vectors")
        if abs(sum(init) - 1.0) > 1e-9 or any(x < 0 for x in init):
            raise ValueError("initial distribution must be a probability vector")
        return DrivingSpec("markov", transition=t, initial=init)

    def sample_sequence(self, n: int, gen: np.random.Generator) -> np.ndarray:
        if self.kind == "iid":
            return gen.choice(len(self.weights), size=n, p=np.array(self.weights))
        if self.kind == "markov":
            t = np.array(self.transition)
            seq = np.zeros(n, dtype=np.int64)
            state = int(gen.choice(len(self.initial), p=np.array(self.initial)))
            for i in range(n):
                seq[i] = state
                state = int(gen.choice(t.shape[1], p=t[state]))
            return seq
        raise ValueError(f"unknown driving kind {self.kind!r}")


def _channel_ops(ch: KrausInstrument) -> list[np.ndarray]:
    return [k for lab in ch.space.labels for k in ch.kraus_for(lab)]


def certify_window_positivity(
    channels: list[KrausInstrument],
    driving: DrivingSpec,
    window: int,
    seed: int,
) -> None:
    """Certify that a sampled composition window is strictly positive.

    Applies the composed window to a basis of positive matrices and requires
    every image to be positive definite. Raises otherwise.
    """
    gen = rng.generator(seed, spawn_key=(0xC0,))
    seq = driving.sample_sequence(window, gen)
    d = channels[0].dim_in
    basis = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
        for j in range(i + 1, d):
            for phase in (1.0, 1.0j):
                v = np.zeros(d, dtype=complex)
                v[i] = 1.0
                v[j] = phase
                basis.append(np.outer(v, v.conj()) / 2)
    for b in basis:
        out = b
        for idx in seq:
            ops = _channel_ops(channels[int(idx)])
            out = sum(k @ out @ k.conj().T for k in ops)
        mineig = float(np.linalg.eigvalsh((out + out.conj().T) / 2)[0])
        if mineig <= POSITIVITY_MIN_EIG:
            raise PositivityCertificateFailed(
                f"window image has minimum eigenvalue {mineig:.3e}"
            )


def random_sequence_contraction(
    channels: list[KrausInstrument],
    driving: DrivingSpec,
    rho: DensityMatrix,
    sigma: DensityMatrix,
    n: int,
    seed: int,
    positivity_window: int | None = 8,
):
    """Contraction of a random channel sequence on a pair of initial states.

    Samples one sequence, pushes both states through it, records the trace
    distances and fits an exponential rate. ``positivity_window`` sizes the
    strict-positivity certificate; pass None to skip it for channel families
    that are contractive without being strictly positive (the certificate
    would reject them).
    """
    d = channels[0].dim_in
    for ch in channels:
        if ch.dim_in != ch.dim_out or ch.dim_in != d:
            raise DimensionMismatch("all channels must be square with equal dimension")
    if rho.dim != d or sigma.dim != d:
        raise DimensionMismatch("state dimensions must match the channels")
    if positivity_window is not None and positivity_window > 0:
        certify_window_positivity(channels, driving, positivity_window, seed)
    gen = rng.generator(seed)
    seq = driving.sample_sequence(n, gen)
    a, b = rho.matrix, sigma.matrix
    distances = np.zeros(n)
    for i, idx in enumerate(seq):
        ops = _channel_ops(channels[int(idx)])
        a = sum(k @ a @ k.conj().T for k in ops)
        b = sum(k @ b @ k.conj().T for k in ops)
        distances[i] = trace_distance(a, b)
    if np.all(distances <= FIT_FLOOR):
        return distances, 0.0
    rate, _, _ = _fit_log_decay(np.arange(1, n + 1), distances)
    return distances, rate


def nonconvergence_witness(
    u, rho0: DensityMatrix, n: int, threshold: float
) -> tuple[bool, float]:
    """Check that a unitary conjugation orbit keeps moving.

    Runs the deterministic orbit and returns ``(witnessed, min step
    distance)`` where witnessed means every consecutive step moved at least
    the threshold in trace norm. Commuting inputs cannot witness and raise.
    """
    um = as_cmatrix(u, "unitary")
    if float(np.abs(um.conj().T @ um - np.eye(um.shape[0])).max()) > 1e-9:
        raise ValueError("u must be unitary")
    if um.shape[0] != rho0.dim:
        raise DimensionMismatch("unitary and state dimensions differ")
    comm = um @ rho0.matrix - rho0.matrix @ um
    if float(np.abs(comm).max()) <= 1e-10:
        raise CommutingInput("state commutes with the unitary; the orbit is constant")
    rho = rho0.matrix
    min_step = np.inf
    for _ in range(n):
        nxt = um @ rho @ um.conj().T
        min_step = min(min_step, trace_distance(nxt, rho))
        rho = nxt
    return bool(min_step >= threshold), float(min_step)
