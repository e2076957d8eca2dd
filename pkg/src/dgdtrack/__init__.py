"""dgdtrack: decentralized gradient descent tracking simulator and bound verifier.

Simulates a network of agents running a fixed budget of DGD iterations per
time step on a temporally weighted streaming quadratic objective, computes
the exact tracking-error decomposition against closed-form oracles, and
certifies the theoretical envelopes (contraction, bias, drift, and the
uniform / discounted tracking-error bounds) numerically.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .dgd import StackedIterate, phi_step, run_inner
from .errors import (
    ConfigError,
    DgdTrackError,
    LogicError,
    NumericalError,
    ParameterError,
    TheoryDegeneracyError,
)
from .experiment import (
    ExperimentConfig,
    MonteCarloResult,
    RunTrace,
    measured_indices,
    monte_carlo,
    run_trial,
    write_manifest,
    write_results_csv,
)
from .network import (
    Graph,
    MixingMatrix,
    generate_rgg,
    graph_at_radius,
    graph_from_positions,
    graph_to_csv,
    max_stable_step,
    metropolis_mixing,
    mixing_to_csv,
)
from .oracle import (
    ErrorRecord,
    fixed_point,
    fixed_point_banach,
    fixed_point_residual,
    global_minimizer,
    measure,
)
from .streaming import (
    StreamState,
    dump_stream_csv,
    ingest_sample,
    init_stream,
    load_stream_csv,
    step_drift,
    weighted_gradient,
)
from .theory import (
    TheoryConstants,
    ate_discounted,
    ate_uniform,
    bias_bound,
    bound_discounted,
    bound_uniform,
    constants_from_problem,
    discounted_constants,
    discounted_sum,
    discounted_sum_curve,
    drift_bound_discounted,
    drift_bound_uniform,
    uniform_constants,
    uniform_sum,
    uniform_sum_curve,
)
from .validation import CheckResult, desk_config, run_validation
from .weighting import WeightScheme, discounted_scheme, recursion_coefficients, uniform_scheme, weights
