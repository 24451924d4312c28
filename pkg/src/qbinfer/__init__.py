"""Sequential quantum measurement simulation and Bayesian inference.

Dense finite-dimensional states, POVMs and Kraus instruments; posterior state
updates along seeded measurement trajectories; grid-based parameter
inference and decision theory; channel spectra and long-run chain
diagnostics; plus a config-driven command line (``qbinfer``).
"""

from . import asymptotics, bayes, decision, inference, instruments, linalg, observables
from .asymptotics import (
    ChainRun,
    DrivingSpec,
    SpectrumReport,
    channel_spectrum,
    convergence_fit,
    nonconvergence_witness,
    run_chain,
)
from .bayes import (
    PosteriorFamily,
    Trajectory,
    classical_bayes_oracle,
    posterior_family,
    posterior_state,
    properness_check,
    sample_trajectory,
)
from .decision import (
    DecisionRule,
    LossSpec,
    RiskReport,
    admissibility_check,
    bayes_risk,
    bayes_solution_enumerate,
    minimax_check,
    posterior_risk,
    risk,
)
from .inference import (
    EstimatorSpec,
    ParamModel,
    PosteriorDist,
    credible_interval,
    hqpd_set,
    hypothesis_test,
    point_estimate,
    posterior_parameter_distribution,
)
from .instruments import (
    IndirectMeasurement,
    KrausInstrument,
    apply_on_event,
    compose,
    dilate,
    dual_apply,
    induced_observable,
    joint_observable_commuting,
    sequential_marginals,
    statistically_equivalent,
)
from .kernel import chain_backend
from .observables import (
    DensityMatrix,
    OutcomeDistribution,
    OutcomeSpace,
    Povm,
    induced_measure,
    marginal_observable,
    rn_derivative,
)

__version__ = "0.1.0"
