"""Full simulation runs and Monte-Carlo aggregation.

The time loop per run: stage and ingest the t+1 samples into the weighted
objective, run E inner DGD steps from the current iterate on that same
objective, then score the new iterate against the same objective's oracle
quantities.  Runs are embarrassingly parallel and individually seeded, so
aggregates never depend on thread count or scheduling.

Seed derivation (documented contract): every random draw comes from a
numpy SeedSequence rooted at the master seed with a named spawn key,

    shared topology   : spawn_key = (0,)
    per-run topology  : spawn_key = (run_index, 0)
    per-run samples   : spawn_key = (run_index, 1)

so each run is reproducible in isolation and the sample streams are
identical across sweeps of E, eta, gamma, or scheme (common random
numbers).
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._backend import BACKEND, dgd_inner_steps
from .errors import ConfigError, ParameterError
from .network import MixingMatrix, generate_rgg, max_stable_step, metropolis_mixing
from .oracle import _measure_with_fp, fixed_point, global_minimizer
from .streaming import dump_stream_csv, ingest_sample, init_stream, step_drift
from .theory import (
    TheoryConstants,
    ate_discounted,
    ate_uniform,
    bound_discounted,
    bound_uniform,
    constants_from_problem,
    discounted_constants,
    uniform_constants,
)
from .weighting import WeightScheme
from .dgd import StackedIterate

__all__ = [
    "ExperimentConfig",
    "RunTrace",
    "MonteCarloResult",
    "run_trial",
    "monte_carlo",
    "measured_indices",
    "write_results_csv",
    "write_manifest",
    "CSV_COLUMNS",
]

logger = logging.getLogger(__name__)

_GRAPH_STREAM = 0
_DATA_STREAM = 1

CSV_COLUMNS = ("t", "rms_te", "mean_fpte", "mean_bias", "bound", "mean_fp_residual", "n_runs")

# Beyond this many oracle solves per run we suggest (never set) a stride.
_STRIDE_SUGGESTION_THRESHOLD = 2000


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved parameters of one experiment cell (one scheme, one E)."""

    n_agents: int = 30
    dim: int = 50
    mu: float = 0.01
    L: float = 0.1
    eta: float = 0.05
    E: int = 5
    scheme: WeightScheme = field(default_factory=lambda: WeightScheme("uniform"))
    C_max: float = 10.0
    sigma2: float = 1.0
    horizon: int = 300
    n_runs: int = 50
    master_seed: int = 0
    measure_stride: int = 1
    initial_radius: float = 0.35
    growth_factor: float = 1.1
    shared_topology: bool = True
    homogeneous_data: bool = False
    dump_streams: bool = False
    allow_unstable_eta: bool = False

    def __post_init__(self):
        if self.n_agents < 1 or self.dim < 1:
            raise ParameterError(f"need n_agents >= 1 and dim >= 1, got "
                                 f"{self.n_agents}, {self.dim}")
        if not (0 < self.mu <= self.L):
            raise ParameterError(f"need 0 < mu <= L, got mu={self.mu}, L={self.L}")
        if not self.eta > 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if not self.C_max > 0:
            raise ParameterError(f"C_max must be positive, got {self.C_max}")
        if self.sigma2 < 0:
            raise ParameterError(f"sigma2 must be nonnegative, got {self.sigma2}")
        if self.horizon < 1:
            raise ParameterError(f"horizon must be >= 1, got {self.horizon}")
        if self.n_runs < 1:
            raise ParameterError(f"n_runs must be >= 1, got {self.n_runs}")
        if self.measure_stride < 1:
            raise ParameterError(f"measure_stride must be >= 1, got {self.measure_stride}")
        if self.E < 1:
            raise ParameterError(f"E must be >= 1, got {self.E}")
        if not (np.isfinite(self.initial_radius) and self.initial_radius > 0):
            raise ParameterError(f"initial_radius must be positive, got {self.initial_radius}")
        if not self.growth_factor > 1:
            raise ParameterError(f"growth_factor must be > 1, got {self.growth_factor}")

    def to_dict(self) -> dict:
        out = {
            "n_agents": self.n_agents, "dim": self.dim, "mu": self.mu, "L": self.L,
            "eta": self.eta, "E": self.E,
            "scheme": {"kind": self.scheme.kind} if self.scheme.gamma is None
            else {"kind": self.scheme.kind, "gamma": self.scheme.gamma},
            "C_max": self.C_max, "sigma2": self.sigma2, "horizon": self.horizon,
            "n_runs": self.n_runs, "master_seed": self.master_seed,
            "measure_stride": self.measure_stride, "initial_radius": self.initial_radius,
            "growth_factor": self.growth_factor, "shared_topology": self.shared_topology,
            "homogeneous_data": self.homogeneous_data, "dump_streams": self.dump_streams,
            "allow_unstable_eta": self.allow_unstable_eta,
        }
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(raw)
        if "scheme" in kwargs:
            sch = kwargs["scheme"]
            if isinstance(sch, dict):
                extra = set(sch) - {"kind", "gamma"}
                if extra:
                    raise ConfigError(f"unknown scheme keys: {sorted(extra)}")
                kwargs["scheme"] = WeightScheme(kind=sch.get("kind", "uniform"),
                                                gamma=sch.get("gamma"))
            elif not isinstance(sch, WeightScheme):
                raise ConfigError("scheme must be an object like {\"kind\": \"uniform\"}")
        return cls(**kwargs)


@dataclass
class RunTrace:
    """Everything measured during one run, indexed by the measured times.

    ``fp_drift[k]`` is the fixed-point displacement over the transition
    t_k - 1 -> t_k (only available at stride 1, NaN otherwise), and
    ``lemma4_rhs[k]`` is the matching generic drift certificate
    (1/mu) * ||grad_t(fp_t) - grad_{t-1}(fp_t)||.
    """

    run_index: int
    constants: TheoryConstants
    scheme_constants: dict
    lambda2: float
    lambdaN: float
    records: list
    bound_values: np.ndarray
    grad_norm_at_opt: np.ndarray
    grad_norm_at_fp: np.ndarray
    fp_norm: np.ndarray
    fp_drift: np.ndarray
    lemma4_rhs: np.ndarray

    @property
    def ts(self) -> np.ndarray:
        return np.array([r.t for r in self.records], dtype=np.int64)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


@dataclass
class MonteCarloResult:
    """Deterministic fold of R run traces onto the common measurement grid."""

    config: ExperimentConfig
    ts: np.ndarray
    rms_te: np.ndarray
    mean_fpte: np.ndarray
    min_fpte: np.ndarray
    max_fpte: np.ndarray
    mean_bias: np.ndarray
    min_bias: np.ndarray
    max_bias: np.ndarray
    bound: np.ndarray  # quadratic mean of per-run bounds, NaN below t0
    mean_bound: np.ndarray
    min_bound: np.ndarray
    max_bound: np.ndarray
    mean_fp_residual: np.ndarray
    traces: list


def measured_indices(horizon: int, stride: int) -> list:
    """Measurement grid: t = 1, 1+stride, ... plus the final index."""
    ts = list(range(1, horizon + 1, stride))
    if ts[-1] != horizon:
        ts.append(horizon)
    return ts


def _graph_rng(cfg: ExperimentConfig, run_index: int):
    if cfg.shared_topology:
        key = (_GRAPH_STREAM,)
    else:
        key = (run_index, _GRAPH_STREAM)
    return np.random.default_rng(np.random.SeedSequence(cfg.master_seed, spawn_key=key))


def _data_rng(cfg: ExperimentConfig, run_index: int):
    return np.random.default_rng(
        np.random.SeedSequence(cfg.master_seed, spawn_key=(run_index, _DATA_STREAM))
    )


def build_topology(cfg: ExperimentConfig, run_index: int = 0):
    """Graph + Metropolis mixing for a run (shared across runs by default)."""
    graph = generate_rgg(cfg.n_agents, cfg.initial_radius, cfg.growth_factor,
                         rng=_graph_rng(cfg, run_index))
    return graph, metropolis_mixing(graph)


def _scheme_constants(cfg: ExperimentConfig, tc: TheoryConstants) -> dict:
    if cfg.scheme.kind == "uniform":
        t0, a_const = uniform_constants(tc.alpha)
        return {"t0": t0, "A": a_const, "asymptote": ate_uniform(tc)}
    t0, a_gamma, floor = discounted_constants(tc.alpha, cfg.scheme.gamma)
    return {"t0": t0, "A_gamma": a_gamma, "floor": floor,
            "asymptote": ate_discounted(tc, cfg.scheme.gamma)}


def _bound_at(cfg, tc, sc, t):
    if t < sc["t0"]:
        return float("nan")
    if cfg.scheme.kind == "uniform":
        return bound_uniform(tc, sc["A"], sc["t0"], t)
    return bound_discounted(tc, sc["A_gamma"], sc["t0"], cfg.scheme.gamma, t)


def run_trial(cfg: ExperimentConfig, run_index: int, mix: MixingMatrix | None = None,
              stream_dump_path=None) -> RunTrace:
    """One seeded simulation: the coupled stream / DGD / oracle time loop.

    Deterministic given (master_seed, run_index).  ``mix`` can be injected
    by the Monte-Carlo driver to share one topology across runs; built from
    the run's own substream otherwise.
    """
    if mix is None:
        _, mix = build_topology(cfg, run_index)
    limit = max_stable_step(mix, cfg.mu, cfg.L)
    if cfg.eta > limit:
        if not cfg.allow_unstable_eta:
            raise ParameterError(
                f"eta={cfg.eta} exceeds the contraction limit {limit:.6g}; "
                "set allow_unstable_eta to override")
        logger.warning("eta=%g above the contraction limit %g: tracking bounds "
                       "no longer apply", cfg.eta, limit)
    data_rng = _data_rng(cfg, run_index)
    keep_history = stream_dump_path is not None
    state = init_stream(cfg.n_agents, cfg.dim, cfg.mu, cfg.L, cfg.C_max, cfg.sigma2,
                        data_rng, homogeneous=cfg.homogeneous_data, keep_history=keep_history)

    tc = constants_from_problem(cfg.mu, cfg.L, cfg.eta, cfg.E, cfg.n_agents, cfg.dim,
                                cfg.C_max, mix.lambda2)
    sc = _scheme_constants(cfg, tc)

    n_solves = len(measured_indices(cfg.horizon, cfg.measure_stride))
    if n_solves > _STRIDE_SUGGESTION_THRESHOLD:
        suggested = max(1, cfg.horizon // _STRIDE_SUGGESTION_THRESHOLD)
        logger.warning(
            "%d oracle solves scheduled for this run; consider measure_stride=%d "
            "(the stride is never changed silently)", n_solves, suggested)

    measured = set(measured_indices(cfg.horizon, cfg.measure_stride))
    per_step_drift = cfg.measure_stride == 1

    mixing = np.ascontiguousarray(mix.entries)
    w = np.zeros((cfg.n_agents, cfg.dim))

    fp = fixed_point(mix, state, cfg.eta, allow_unstable=cfg.allow_unstable_eta)
    tc = tc.with_init_dist(np.linalg.norm(fp.data))

    records, bounds = [], []
    grad_opt, grad_fp, fp_norms, drifts, lemma4 = [], [], [], [], []
    prev_fp = None
    prev_hessian = prev_target = None

    def observe(t, fp_t):
        iterate = StackedIterate(w.ravel().copy(), cfg.n_agents, cfg.dim)
        rec = _measure_with_fp(t, iterate, mix, state, cfg.eta, fp_t)
        records.append(rec)
        bounds.append(_bound_at(cfg, tc, sc, t))
        w_star = global_minimizer(state)
        stacked_star = np.tile(w_star, cfg.n_agents).reshape(cfg.n_agents, cfg.dim)
        grad_opt.append(np.linalg.norm(
            state.weighted_hessian * stacked_star - state.weighted_target))
        fp_blocks = fp_t.blocks()
        grad_fp.append(np.linalg.norm(
            state.weighted_hessian * fp_blocks - state.weighted_target))
        fp_norms.append(np.linalg.norm(fp_t.data))
        if per_step_drift and prev_fp is not None:
            drifts.append(np.linalg.norm(fp_t.data - prev_fp.data))
            old_grad = prev_hessian * fp_blocks - prev_target
            new_grad = state.weighted_hessian * fp_blocks - state.weighted_target
            lemma4.append(np.linalg.norm(new_grad - old_grad) / cfg.mu)
        else:
            drifts.append(float("nan"))
            lemma4.append(float("nan"))

    # t = 1: E inner steps on the first objective, scored against it
    dgd_inner_steps(mixing, state.weighted_hessian, state.weighted_target,
                    cfg.eta, cfg.E, w)
    if 1 in measured:
        observe(1, fp)
    prev_fp = fp

    for t in range(2, cfg.horizon + 1):
        if per_step_drift:
            prev_hessian = state.weighted_hessian
            prev_target = state.weighted_target
        step_drift(state, data_rng)
        ingest_sample(state, cfg.scheme)
        dgd_inner_steps(mixing, state.weighted_hessian, state.weighted_target,
                        cfg.eta, cfg.E, w)
        if t in measured:
            fp_t = fixed_point(mix, state, cfg.eta, allow_unstable=cfg.allow_unstable_eta)
            observe(t, fp_t)
            prev_fp = fp_t

    if stream_dump_path is not None:
        _atomic_file_write(stream_dump_path, lambda p: dump_stream_csv(state, p))

    return RunTrace(
        run_index=run_index,
        constants=tc,
        scheme_constants=sc,
        lambda2=mix.lambda2,
        lambdaN=mix.lambdaN,
        records=records,
        bound_values=np.array(bounds),
        grad_norm_at_opt=np.array(grad_opt),
        grad_norm_at_fp=np.array(grad_fp),
        fp_norm=np.array(fp_norms),
        fp_drift=np.array(drifts),
        lemma4_rhs=np.array(lemma4),
    )


def monte_carlo(cfg: ExperimentConfig, threads: int = 1,
                stream_dump_dir=None) -> MonteCarloResult:
    """Run R independent trials and fold them in run order.

    The fold is a deterministic reduction over run-indexed storage, so the
    aggregate is identical for any thread count.
    """
    shared_mix = None
    if cfg.shared_topology:
        _, shared_mix = build_topology(cfg)

    def dump_path(r):
        if stream_dump_dir is None:
            return None
        return os.path.join(stream_dump_dir, f"stream_run{r}.csv")

    traces = [None] * cfg.n_runs
    if threads <= 1:
        for r in range(cfg.n_runs):
            traces[r] = run_trial(cfg, r, mix=shared_mix, stream_dump_path=dump_path(r))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {
                r: pool.submit(run_trial, cfg, r, shared_mix, dump_path(r))
                for r in range(cfg.n_runs)
            }
            for r, fut in futures.items():
                traces[r] = fut.result()

    ts = np.array([rec.t for rec in traces[0].records], dtype=np.int64)
    te = np.array([tr.series("te") for tr in traces])
    fpte = np.array([tr.series("fpte") for tr in traces])
    bias = np.array([tr.series("bias") for tr in traces])
    fp_res = np.array([tr.series("fp_residual") for tr in traces])
    bound = np.array([tr.bound_values for tr in traces])

    return MonteCarloResult(
        config=cfg,
        ts=ts,
        rms_te=np.sqrt(np.mean(te**2, axis=0)),
        mean_fpte=fpte.mean(axis=0), min_fpte=fpte.min(axis=0), max_fpte=fpte.max(axis=0),
        mean_bias=bias.mean(axis=0), min_bias=bias.min(axis=0), max_bias=bias.max(axis=0),
        bound=np.sqrt(np.mean(bound**2, axis=0)),
        mean_bound=bound.mean(axis=0), min_bound=bound.min(axis=0), max_bound=bound.max(axis=0),
        mean_fp_residual=fp_res.mean(axis=0),
        traces=traces,
    )


def _atomic_file_write(path, write_fn):
    """Write via a temp file in the target directory, then atomic rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    os.close(fd)
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_results_csv(result: MonteCarloResult, path):
    """Emit the aggregate CSV.

    Columns (fixed order): t, rms_te, mean_fpte, mean_bias, bound,
    mean_fp_residual, n_runs.  The bound column is the quadratic mean of the
    per-run bounds (same aggregation as rms_te) and is NaN below the scheme's
    burn-in index t0, where no bound is asserted.  Floats carry 17
    significant digits.
    """

    def _write(p):
        with open(p, "w") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for k in range(len(result.ts)):
                row = [
                    str(int(result.ts[k])),
                    f"{result.rms_te[k]:.17g}",
                    f"{result.mean_fpte[k]:.17g}",
                    f"{result.mean_bias[k]:.17g}",
                    f"{result.bound[k]:.17g}",
                    f"{result.mean_fp_residual[k]:.17g}",
                    str(result.config.n_runs),
                ]
                fh.write(",".join(row) + "\n")

    _atomic_file_write(path, _write)


def write_manifest(result: MonteCarloResult, path):
    """Record the fully resolved config, seed derivation, and constants.

    The manifest's ``config`` block is itself a valid config: re-feeding the
    manifest to the run command reproduces the outputs bit for bit.
    """
    cfg = result.config
    tr0 = result.traces[0]
    tc = tr0.constants
    constants = {
        "kappa": tc.kappa, "alpha": tc.alpha, "C": tc.C, "G": tc.G,
        "Lambda": tc.Lambda if cfg.shared_topology else None,
        "lambda2": tr0.lambda2 if cfg.shared_topology else None,
        "lambdaN": tr0.lambdaN if cfg.shared_topology else None,
        "init_dist_per_run": [tr.constants.init_dist for tr in result.traces],
    }
    constants.update({k: v for k, v in tr0.scheme_constants.items()})
    tight_g = float(max(max(tr.grad_norm_at_opt.max(), tr.grad_norm_at_fp.max())
                        for tr in result.traces))
    diagnostics = {
        "tight_G": tight_g,
        "tight_G_note": "measured max gradient norm; diagnostic only, never used for certification",
        "backend": BACKEND,
    }
    payload = {
        "config": cfg.to_dict(),
        "seed_derivation": {
            "master_seed": cfg.master_seed,
            "graph_stream": "SeedSequence(master_seed, spawn_key=(0,))" if cfg.shared_topology
            else "SeedSequence(master_seed, spawn_key=(run_index, 0))",
            "data_stream": "SeedSequence(master_seed, spawn_key=(run_index, 1))",
        },
        "constants": constants,
        "diagnostics": diagnostics,
    }
    _atomic_file_write(path, lambda p: _write_json(p, payload))


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
