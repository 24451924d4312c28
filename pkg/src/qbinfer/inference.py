"""Posterior inference over a finite real parameter grid.

A parametric model pairs a parameter observable (a POVM whose outcomes are
embedded as the grid values) with a prior state; measuring it in the current
(prior or posterior) state yields a mass function over the grid, from which
point estimates, credible intervals, highest-density sets and tests follow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateWeight,
    DimensionMismatch,
    MalformedPartition,
)
from . import linalg
from .observables import DensityMatrix, Povm, induced_measure


@dataclass(frozen=True, eq=False)
class ParamModel:
    """Finite parameter grid with its observable, prior state, and optionally
    per-parameter states and prior weights for decision-theoretic use.

    The two prior representations (a single prior state versus per-parameter
    states with weights) are carried side by side and never converted into
    each other implicitly.
    """

    grid: tuple[float, ...]
    param_observable: Povm
    prior_state: DensityMatrix
    states_by_theta: dict[float, DensityMatrix] | None = None
    prior_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        grid = tuple(float(t) for t in self.grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("parameter grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        emb = self.param_observable.space.embedding
        if emb is None:
            raise ValueError("parameter observable needs a real embedding of its labels")
        values = [emb[lab] for lab in self.param_observable.space.labels]
        if len(values) != len(grid) or np.max(np.abs(np.array(values) - np.array(grid))) > 0:
            raise ValueError("observable embedding must list the grid values in order")
        if self.param_observable.dim != self.prior_state.dim:
            raise DimensionMismatch("observable and prior state dimensions differ")
        if self.states_by_theta is not None:
            sbt = {float(t): s for t, s in self.states_by_theta.items()}
            missing = [t for t in grid if t not in sbt]
            if missing:
                raise ValueError(f"states_by_theta missing grid values {missing}")
            object.__setattr__(self, "states_by_theta", sbt)
        if self.prior_weights is not None:
            w = tuple(float(x) for x in self.prior_weights)
            if len(w) != len(grid) or any(x < 0 for x in w):
                raise ValueError("prior weights must be nonnegative, one per grid point")
            if abs(sum(w) - 1.0) > linalg.NORM_TOL:
                raise ValueError(f"prior weights sum to {sum(w)!r}")
            object.__setattr__(self, "prior_weights", w)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.param_observable.space.labels

    def state_for(self, theta: float) -> DensityMatrix:
        from .errors import MissingThetaStates, UnknownTheta

        if self.states_by_theta is None:
            raise MissingThetaStates("model carries no per-parameter states")
        t = float(theta)
        if t not in self.states_by_theta:
            raise UnknownTheta(f"{theta!r} is not a grid value")
        return self.states_by_theta[t]


@dataclass(frozen=True, eq=False)
class PosteriorDist:
    """Mass function over the grid with its running-sum CDF."""

    grid: tuple[float, ...]
    mass: np.ndarray
    cdf: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if np.any(m < 0) or abs(m.sum() - 1.0) > linalg.NORM_TOL:
            raise ValueError("mass must be a probability vector")
        c = np.asarray(self.cdf, dtype=float)
        if np.any(np.diff(c) < -1e-15) or abs(c[-1] - 1.0) > linalg.NORM_TOL:
            raise ValueError("cdf must be nondecreasing and end at 1")
        m = m.copy()
        m.flags.writeable = False
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "mass", m)
        object.__setattr__(self, "cdf", c)

    @staticmethod
    def from_mass(grid, mass) -> "PosteriorDist":
        m = np.asarray(mass, dtype=float)
        return PosteriorDist(tuple(float(t) for t in grid), m, np.cumsum(m))


def posterior_parameter_distribution(
    model: ParamModel, state: DensityMatrix
) -> PosteriorDist:
    """Distribution of the parameter observable in the given state.

    With the prior state this is the prior parameter distribution; with a
    post-measurement state it is the posterior.
    """
    if state.dim != model.param_observable.dim:
        raise DimensionMismatch("state and parameter observable dimensions differ")
    dist = induced_measure(model.param_observable, state)
    mass = np.array([dist.prob(lab) for lab in model.labels])
    return PosteriorDist.from_mass(model.grid, mass)


@dataclass(frozen=True)
class EstimatorSpec:
    """One of: weighted posterior mean, posterior quantile, posterior mode."""

    kind: str
    weights: tuple[float, ...] | None = None
    p: float | None = None

    @staticmethod
    def weighted_mean(weights=None) -> "EstimatorSpec":
        w = None if weights is None else tuple(float(x) for x in weights)
        if w is not None and any(x < 0 for x in w):
            raise ValueError("mean weights must be nonnegative")
        return EstimatorSpec("weighted_mean", weights=w)

    @staticmethod
    def quantile(p: float) -> "EstimatorSpec":
        if not 0 < p < 1:
            raise ValueError("quantile level must lie in (0, 1)")
        return EstimatorSpec("quantile", p=float(p))

    @staticmethod
    def linear_loss(k0: float, k1: float) -> "EstimatorSpec":
        if k0 < 0 or k1 < 0 or k0 + k1 == 0:
            raise ValueError("linear loss weights must be nonnegative and not both zero")
        return EstimatorSpec.quantile(k1 / (k0 + k1))

    @staticmethod
    def mode() -> "EstimatorSpec":
        return EstimatorSpec("mode")


def point_estimate(dist: PosteriorDist, spec: EstimatorSpec) -> float:
    """Optimal action under the loss matching the spec.

    weighted_mean minimizes weighted squared error, quantile the asymmetric
    linear loss (inf convention over the grid), mode the small-window zero-one
    loss with ties broken toward the smaller grid value.
    """
    grid = np.array(dist.grid)
    if spec.kind == "weighted_mean":
        c = np.ones_like(grid) if spec.weights is None else np.array(spec.weights)
        if c.shape != grid.shape:
            raise ValueError("weight vector length must match the grid")
        denom = float(np.sum(c * dist.mass))
        if denom <= 0.0:
            raise DegenerateWeight("weighted mass vanishes")
        return float(np.sum(grid * c * dist.mass) / denom)
    if spec.kind == "quantile":
        for i in range(len(grid)):  # inf{theta in grid : F(theta) >= p}
            if dist.cdf[i] >= spec.p - 1e-12:
                return float(grid[i])
        return float(grid[-1])
    if spec.kind == "mode":
        best = int(np.argmax(dist.mass))  # argmax returns the first = smallest theta
        return float(grid[best])
    raise ValueError(f"unknown estimator kind {spec.kind!r}")


def credible_interval(dist: PosteriorDist, alpha: float) -> tuple[float, float, float]:
    """Shortest contiguous grid window with covered mass >= 1 - alpha.

    Ties in width break toward the smaller left endpoint; the full grid always
    qualifies, so the scan cannot fail. Returns (lo, hi, covered_mass).
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    grid = dist.grid
    n = len(grid)
    target = 1.0 - alpha
    best: tuple[float, float, float] | None = None
    for i in range(n):
        for j in range(i, n):
            covered = float(dist.mass[i : j + 1].sum())
            if covered >= target - 1e-12:
                width = grid[j] - grid[i]
                if best is None or width < best[1] - best[0] - 1e-15:
                    best = (grid[i], grid[j], covered)
                break  # widening j only adds width for this i
    assert best is not None
    return best


def hqpd_set(dist: PosteriorDist, alpha: float) -> tuple[float, ...]:
    """Highest-mass grid points, added in descending mass order (ties toward
    smaller theta) until they cover 1 - alpha. May be disconnected."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    order = sorted(range(len(dist.grid)), key=lambda i: (-dist.mass[i], dist.grid[i]))
    chosen: list[int] = []
    covered = 0.0
    for i in order:
        chosen.append(i)
        covered += float(dist.mass[i])
        if covered >= 1.0 - alpha - 1e-12:
            break
    chosen.sort()
    included = {i for i in chosen}
    inc_min = min(dist.mass[i] for i in chosen)
    exc = [dist.mass[i] for i in range(len(dist.grid)) if i not in included]
    if exc and inc_min < max(exc) - 1e-15:
        raise AssertionError("density threshold property violated")
    return tuple(dist.grid[i] for i in chosen)


def hypothesis_test(
    dist: PosteriorDist,
    partition: list[list[float]],
    costs: list[float],
    convention: str = "printed",
) -> int:
    """Index of the accepted cell of a grid partition.

    The default scores cell i by ``cost_i * P(theta in cell_i)`` and accepts
    the argmin (ties toward the smaller index). ``convention='complement'``
    scores by ``cost_i * (1 - P(theta in cell_i))`` instead; it is not the
    default and exists for comparison.
    """
    if len(partition) != len(costs):
        raise MalformedPartition("one cost per cell is required")
    if any(c < 0 for c in costs):
        raise MalformedPartition("costs must be nonnegative")
    seen: set[int] = set()
    masses = []
    for cell in partition:
        idxs = []
        for t in cell:
            t = float(t)
            if t not in dist.grid:
                raise MalformedPartition(f"{t!r} is not a grid value")
            idxs.append(dist.grid.index(t))
        if seen & set(idxs):
            raise MalformedPartition("cells overlap")
        seen.update(idxs)
        masses.append(float(sum(dist.mass[i] for i in idxs)))
    if seen != set(range(len(dist.grid))):
        raise MalformedPartition("cells do not cover the grid")
    if convention == "printed":
        scores = [c * m for c, m in zip(costs, masses)]
    elif convention == "complement":
        scores = [c * (1.0 - m) for c, m in zip(costs, masses)]
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return int(np.argmin(scores))  # argmin takes the first = smallest index
