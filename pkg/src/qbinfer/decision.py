"""Bayesian decision theory on finite toy problems.

Risks are computed by exact enumeration of the composite outcome space when
it is small enough (Monte Carlo otherwise), Bayes solutions by independent
pointwise minimization per outcome, and admissibility/minimax certificates by
exhaustive search over an explicitly enumerated rule class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .bayes import sample_trajectory
from .errors import BudgetExceeded, IncompatibleAction, MissingPriorWeights
from .inference import ParamModel, PosteriorDist
from .instruments import KrausInstrument, compose, induced_observable
from .observables import DensityMatrix, induced_measure, join_label

EXACT_OUTCOME_LIMIT = 10**4
ENUMERATION_LIMIT = 10**6
RULE_CLASS_LIMIT = 10**4

DOMINANCE_SLACK = 1e-12
DOMINANCE_MARGIN = 1e-9


@dataclass(frozen=True)
class LossSpec:
    """Loss family tag plus parameters; see the factory constructors."""

    kind: str
    weights: tuple[float, ...] | None = None  # weighted_quadratic, per grid point
    k0: float = 1.0
    k1: float = 1.0
    eps: float = 0.0
    cells: tuple[tuple[float, ...], ...] | None = None  # partition
    costs: tuple[float, ...] | None = None  # partition

    @staticmethod
    def weighted_quadratic(weights=None) -> "LossSpec":
        w = None if weights is None else tuple(float(x) for x in weights)
        if w is not None and any(x < 0 for x in w):
            raise ValueError("quadratic weights must be nonnegative")
        return LossSpec("weighted_quadratic", weights=w)

    @staticmethod
    def linear(k0: float, k1: float) -> "LossSpec":
        if k0 < 0 or k1 < 0:
            raise ValueError("linear loss slopes must be nonnegative")
        return LossSpec("linear", k0=float(k0), k1=float(k1))

    @staticmethod
    def zero_one(eps: float) -> "LossSpec":
        if eps <= 0:
            raise ValueError("zero-one window must be positive")
        return LossSpec("zero_one", eps=float(eps))

    @staticmethod
    def interval(k0: float, k1: float) -> "LossSpec":
        if k0 < 0 or k1 < 0:
            raise ValueError("interval loss weights must be nonnegative")
        return LossSpec("interval", k0=float(k0), k1=float(k1))

    @staticmethod
    def partition(cells, costs) -> "LossSpec":
        cs = tuple(tuple(float(t) for t in cell) for cell in cells)
        c = tuple(float(x) for x in costs)
        if len(cs) != len(c):
            raise ValueError("one cost per cell is required")
        if any(x < 0 for x in c):
            raise ValueError("partition costs must be nonnegative")
        flat = [t for cell in cs for t in cell]
        if len(set(flat)) != len(flat):
            raise ValueError("partition cells overlap")
        return LossSpec("partition", cells=cs, costs=c)


def loss_value(loss: LossSpec, grid: tuple[float, ...], theta: float, action) -> float:
    """Evaluate the loss of one action at one parameter value."""
    if loss.kind == "weighted_quadratic":
        y = float(action)
        c = 1.0 if loss.weights is None else loss.weights[grid.index(theta)]
        return c * (theta - y) ** 2
    if loss.kind == "linear":
        # k1 weights underestimation (y below theta), k0 overestimation, so the
        # optimal action is the k1/(k0+k1) posterior quantile.
        y = float(action)
        return loss.k1 * (theta - y) if theta >= y else loss.k0 * (y - theta)
    if loss.kind == "zero_one":
        y = float(action)
        return 0.0 if abs(theta - y) <= loss.eps else 1.0
    if loss.kind == "interval":
        try:
            lo, hi = float(action[0]), float(action[1])
        except (TypeError, IndexError) as exc:
            raise IncompatibleAction("interval loss needs a (lo, hi) action") from exc
        inside = lo <= theta <= hi
        return loss.k0 * (hi - lo) + loss.k1 * (0.0 if inside else 1.0)
    if loss.kind == "partition":
        try:
            i = int(action)
        except (TypeError, ValueError) as exc:
            raise IncompatibleAction("partition loss needs a cell index action") from exc
        if not 0 <= i < len(loss.costs):
            raise IncompatibleAction(f"cell index {i} out of range")
        return loss.costs[i] * (1.0 if theta in loss.cells[i] else 0.0)
    raise ValueError(f"unknown loss kind {loss.kind!r}")


@dataclass(frozen=True, eq=False)
class DecisionRule:
    """Assignment of an action to every composite outcome label."""

    mapping: dict[str, object]

    def action(self, label: str):
        if label not in self.mapping:
            raise KeyError(f"rule is not defined on outcome {label!r}")
        return self.mapping[label]


@dataclass(frozen=True, eq=False)
class RiskReport:
    per_theta: dict[float, float]
    bayes: float
    method: str
    mc_samples: int | None = None
    mc_seed: int | None = None
    stderr: float | None = None


def _composite(insts: list[KrausInstrument]) -> KrausInstrument:
    return insts[0] if len(insts) == 1 else compose(insts)


def _outcome_law(composite: KrausInstrument, state: DensityMatrix):
    dist = induced_measure(induced_observable(composite), state)
    return [(lab, dist.prob(lab)) for lab in composite.space.labels]


def _pick_method(method: str, composite: KrausInstrument) -> str:
    if method == "auto":
        return (
            "exact" if composite.n_outcomes <= EXACT_OUTCOME_LIMIT else "monte_carlo"
        )
    if method in ("exact", "monte_carlo"):
        return method
    raise ValueError(f"unknown risk method {method!r}")


def risk(
    model: ParamModel,
    insts: list[KrausInstrument],
    rule: DecisionRule,
    loss: LossSpec,
    theta: float,
    method: str = "auto",
    mc_samples: int = 10**4,
    mc_seed: int | None = None,
) -> float:
    """Expected loss of the rule at one parameter value.

    'auto' enumerates the composite outcome space exactly when it has at most
    10^4 outcomes and falls back to Monte Carlo over sampled trajectories
    otherwise (a seed is then required).
    """
    state = model.state_for(theta)
    composite = _composite(insts)
    if _pick_method(method, composite) == "exact":
        total = 0.0
        for lab, p in _outcome_law(composite, state):
            if p > 0.0:
                total += p * loss_value(loss, model.grid, theta, rule.action(lab))
        return total
    if mc_seed is None:
        raise ValueError("Monte Carlo risk needs a seed")
    values = _mc_losses(model, insts, rule, loss, theta, mc_samples, mc_seed)
    return float(values.mean())


def _mc_losses(model, insts, rule, loss, theta, n, seed) -> np.ndarray:
    state = model.state_for(theta)
    vals = np.zeros(n)
    for r in range(n):
        traj = sample_trajectory(insts, state, rng.replica_seed(seed, r))
        vals[r] = loss_value(loss, model.grid, theta, rule.action(join_label(traj.outcomes)))
    return vals


def bayes_risk(
    model: ParamModel,
    insts: list[KrausInstrument],
    rule: DecisionRule,
    loss: LossSpec,
    method: str = "auto",
    mc_samples: int = 10**4,
    mc_seed: int | None = None,
) -> RiskReport:
    """Prior-weighted risk across the grid."""
    if model.prior_weights is None:
        raise MissingPriorWeights("model carries no prior weights")
    composite = _composite(insts)
    exact = _pick_method(method, composite) == "exact"
    per_theta: dict[float, float] = {}
    stderrs = []
    for theta, w in zip(model.grid, model.prior_weights):
        if exact:
            per_theta[theta] = risk(model, insts, rule, loss, theta)
        else:
            if mc_seed is None:
                raise ValueError("Monte Carlo risk needs a seed")
            vals = _mc_losses(model, insts, rule, loss, theta, mc_samples, mc_seed)
            per_theta[theta] = float(vals.mean())
            stderrs.append(w * vals.std(ddof=1) / np.sqrt(mc_samples))
    bayes = float(sum(w * per_theta[t] for t, w in zip(model.grid, model.prior_weights)))
    if exact:
        return RiskReport(per_theta, bayes, "exact_enumeration")
    return RiskReport(
        per_theta,
        bayes,
        "monte_carlo",
        mc_samples=mc_samples,
        mc_seed=mc_seed,
        stderr=float(np.sqrt(np.sum(np.array(stderrs) ** 2))),
    )


def posterior_risk(dist: PosteriorDist, loss: LossSpec, action) -> float:
    """Expected loss of one action under a posterior parameter distribution."""
    return float(
        sum(
            dist.mass[i] * loss_value(loss, dist.grid, theta, action)
            for i, theta in enumerate(dist.grid)
        )
    )


def bayes_solution_enumerate(
    model: ParamModel,
    insts: list[KrausInstrument],
    loss: LossSpec,
    action_set: list,
) -> DecisionRule:
    """Pointwise Bayes solution over a finite action set.

    The Bayes risk splits as a sum over outcomes of posterior-weighted
    expected losses, so minimizing independently per outcome (ties toward the
    smaller action) attains the minimum over all rules into the action set.
    """
    if model.prior_weights is None:
        raise MissingPriorWeights("model carries no prior weights")
    composite = _composite(insts)
    if composite.n_outcomes * len(action_set) > ENUMERATION_LIMIT:
        raise BudgetExceeded("outcome count times action count exceeds the budget")
    laws = {
        theta: dict(_outcome_law(composite, model.state_for(theta)))
        for theta in model.grid
    }
    mapping: dict[str, object] = {}
    for lab in composite.space.labels:
        joint = np.array(
            [w * laws[t][lab] for t, w in zip(model.grid, model.prior_weights)]
        )
        best_action, best_score = None, np.inf
        for a in action_set:
            score = float(
                sum(wj * loss_value(loss, model.grid, t, a) for wj, t in zip(joint, model.grid))
            )
            if score < best_score - 1e-15:
                best_action, best_score = a, score
        mapping[lab] = best_action
    return DecisionRule(mapping)


def pointwise_posterior_solution(
    model: ParamModel,
    insts: list[KrausInstrument],
    loss: LossSpec,
    action_set: list,
) -> DecisionRule:
    """Rule that minimizes the quantum posterior risk outcome by outcome.

    The posterior here is the parameter-observable distribution in the
    updated state of the single prior state, which in general differs from
    the mixture posterior behind :func:`bayes_solution_enumerate`; reports
    diff the two rather than assuming they agree.
    """
    from .bayes import posterior_state
    from .inference import posterior_parameter_distribution

    composite = _composite(insts)
    if composite.n_outcomes * len(action_set) > ENUMERATION_LIMIT:
        raise BudgetExceeded("outcome count times action count exceeds the budget")
    dist0 = induced_measure(induced_observable(composite), model.prior_state)
    mapping: dict[str, object] = {}
    for lab in composite.space.labels:
        if dist0.prob(lab) > 1e-12:
            phi_x = posterior_state(composite, model.prior_state, lab)
            pdist = posterior_parameter_distribution(model, phi_x)
            scores = [posterior_risk(pdist, loss, a) for a in action_set]
            mapping[lab] = action_set[int(np.argmin(scores))]
        else:
            mapping[lab] = action_set[0]
    return DecisionRule(mapping)


def admissibility_check(
    model: ParamModel,
    insts: list[KrausInstrument],
    loss: LossSpec,
    rule: DecisionRule,
    rule_class: list[DecisionRule],
    slack: float = DOMINANCE_SLACK,
    margin: float = DOMINANCE_MARGIN,
):
    """Search the class for a rule dominating the given one.

    Returns ``(True, None)`` if nothing dominates, else ``(False, dominator)``.
    Dominance means risk no worse everywhere (within slack) and strictly
    better somewhere (by more than margin).
    """
    if len(rule_class) > RULE_CLASS_LIMIT:
        raise BudgetExceeded(f"rule class larger than {RULE_CLASS_LIMIT}")
    base = {t: risk(model, insts, rule, loss, t) for t in model.grid}
    for other in rule_class:
        if other is rule:
            continue
        risks = {t: risk(model, insts, other, loss, t) for t in model.grid}
        if all(risks[t] <= base[t] + slack for t in model.grid) and any(
            risks[t] < base[t] - margin for t in model.grid
        ):
            return False, other
    return True, None


def minimax_check(
    model: ParamModel,
    insts: list[KrausInstrument],
    loss: LossSpec,
    rule_class: list[DecisionRule],
    slack: float = DOMINANCE_SLACK,
):
    """Worst-case risk of each rule and the argmin set.

    Returns ``(minimax_indices, sup_risks)`` where indices point into the
    given class and sup_risks lists each rule's worst-case risk.
    """
    if len(rule_class) > RULE_CLASS_LIMIT:
        raise BudgetExceeded(f"rule class larger than {RULE_CLASS_LIMIT}")
    sup_risks = []
    for r in rule_class:
        sup_risks.append(max(risk(model, insts, r, loss, t) for t in model.grid))
    best = min(sup_risks)
    minimax = [i for i, s in enumerate(sup_risks) if s <= best + slack]
    return minimax, sup_risks


def enumerate_rules(outcome_labels, action_set) -> list[DecisionRule]:
    """All mappings from outcomes to actions (the full nonrandomized class)."""
    import itertools

    n = len(action_set) ** len(outcome_labels)
    if n > RULE_CLASS_LIMIT:
        raise BudgetExceeded(f"rule class of size {n} exceeds {RULE_CLASS_LIMIT}")
    rules = []
    for combo in itertools.product(action_set, repeat=len(outcome_labels)):
        rules.append(DecisionRule(dict(zip(outcome_labels, combo))))
    return rules
