"""Cross-module invariant suites behind the ``validate`` subcommand.

Every check re-derives its ground truth independently of the code path it
certifies: connectivity by breadth-first search rather than the union-find
used in graph construction, blockwise mixing against an explicit Kronecker
product, accumulators against direct weighted sums over retained history,
the fixed point against both the dense solve and Banach iteration, and the
closed-form envelope constants against brute-force summation.

Simulation-based checks run on a desk-scale reduction of the given config
(horizon and run count capped, stride forced to 1) so the suite stays fast
at any configured problem size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dgd import StackedIterate, phi_step, run_inner
from .errors import DgdTrackError
from .experiment import ExperimentConfig, build_topology, monte_carlo
from .network import generate_rgg, max_stable_step, metropolis_mixing
from .oracle import fixed_point, fixed_point_banach
from .streaming import ingest_sample, init_stream, step_drift
from .theory import (
    bias_bound,
    discounted_constants,
    discounted_sum_curve,
    drift_bound_discounted,
    drift_bound_uniform,
    uniform_constants,
    uniform_sum_curve,
)
from .weighting import WeightScheme, recursion_coefficients, weights

__all__ = ["CheckResult", "desk_config", "run_validation"]

PASS, FAIL, SKIP = "PASS", "FAIL", "SKIP"

_VALIDATE_HORIZON_CAP = 80
_VALIDATE_RUNS_CAP = 3


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str

    @property
    def ok(self) -> bool:
        return self.status != FAIL


def desk_config() -> ExperimentConfig:
    """Small, fast configuration whose burn-in index fits inside the horizon."""
    return ExperimentConfig(
        n_agents=8, dim=3, mu=0.5, L=1.0, eta=0.1, E=3,
        scheme=WeightScheme("uniform"), C_max=2.0, sigma2=0.25,
        horizon=60, n_runs=3, master_seed=12345, measure_stride=1,
        initial_radius=0.5, growth_factor=1.1,
    )


def _reduced(cfg: ExperimentConfig) -> ExperimentConfig:
    return replace(cfg,
                   horizon=min(cfg.horizon, _VALIDATE_HORIZON_CAP),
                   n_runs=min(cfg.n_runs, _VALIDATE_RUNS_CAP),
                   measure_stride=1,
                   dump_streams=False)


def _bfs_components(n, edges):
    """Independent connectivity oracle (construction uses union-find)."""
    adj = {i: [] for i in range(n)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = set()
    comps = 0
    for start in range(n):
        if start in seen:
            continue
        comps += 1
        queue = [start]
        seen.add(start)
        while queue:
            node = queue.pop()
            for nb in adj[node]:
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
    return comps


def _check_mixing_raw(m, graph):
    """Invariant violations of a raw mixing matrix; names feed the report."""
    failures = []
    n = m.shape[0]
    if np.max(np.abs(m - m.T)) > 1e-12:
        failures.append("symmetry")
    if np.max(np.abs(m.sum(axis=1) - 1.0)) > 1e-12:
        failures.append("row-sum")
    if np.max(np.abs(m.sum(axis=0) - 1.0)) > 1e-12:
        failures.append("column-sum")
    eigvals = np.sort(np.linalg.eigvalsh((m + m.T) / 2.0))[::-1]
    if abs(eigvals[0] - 1.0) > 1e-10:
        failures.append("leading-eigenvalue")
    if eigvals[-1] <= -1.0:
        failures.append("smallest-eigenvalue")
    if n > 1 and not eigvals[1] < 1.0:
        failures.append("spectral-gap")
    edge_set = set(graph.edges)
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edge_set and m[i, j] != 0.0:
                failures.append("sparsity-pattern")
                break
    return failures


def run_validation(cfg: ExperimentConfig | None = None, mixing_mutator=None) -> list:
    """Run every invariant suite; returns one CheckResult per check.

    ``mixing_mutator`` is a test hook: it receives a writable copy of the
    mixing matrix before the matrix-invariant checks run, so deliberate
    corruption is reported by the violated invariant's name.
    """
    if cfg is None:
        cfg = desk_config()
    cfg = _reduced(cfg)
    results = []
    rng = np.random.default_rng(cfg.master_seed + 0xC0FFEE)

    graph, mix = build_topology(cfg)

    # -- mixing matrix invariants (hookable) --
    m_checked = mix.entries.copy()
    if mixing_mutator is not None:
        mixing_mutator(m_checked)
    failures = _check_mixing_raw(m_checked, graph)
    results.append(CheckResult(
        "mixing-invariants",
        FAIL if failures else PASS,
        f"violated: {', '.join(failures)}" if failures
        else f"symmetry/row-sum/column-sum/spectrum/sparsity ok (N={mix.n_agents})"))

    # -- graph generation --
    g1 = generate_rgg(cfg.n_agents, cfg.initial_radius, cfg.growth_factor,
                      np.random.default_rng(777))
    g2 = generate_rgg(cfg.n_agents, cfg.initial_radius, cfg.growth_factor,
                      np.random.default_rng(777))
    deterministic = (g1.edges == g2.edges and np.array_equal(g1.positions, g2.positions)
                     and g1.radius_used == g2.radius_used)
    connected = _bfs_components(g1.n_agents, g1.edges) == 1
    results.append(CheckResult(
        "rgg-generation", PASS if deterministic and connected else FAIL,
        f"deterministic={deterministic}, BFS-connected={connected}, "
        f"radius_used={g1.radius_used:.4g}"))

    # -- weight simplex and recursion/closed-form agreement --
    worst_sum = 0.0
    worst_rec = 0.0
    schemes = [WeightScheme("uniform")] + [WeightScheme("discounted", g)
                                           for g in (0.3, 0.7, 0.95)]
    for scheme in schemes:
        prev = None
        for t in range(1, 501):
            w_t = weights(scheme, t)
            worst_sum = max(worst_sum, abs(w_t.sum() - 1.0))
            if np.any(w_t < 0) or np.any(w_t > 1):
                worst_sum = math.inf
            if prev is not None:
                old_c, new_c = recursion_coefficients(scheme, t - 1)
                rebuilt = np.append(old_c * prev, new_c)
                worst_rec = max(worst_rec, float(np.max(np.abs(rebuilt - w_t))))
            prev = w_t
    ok = worst_sum <= 1e-12 and worst_rec <= 1e-12
    results.append(CheckResult(
        "weight-simplex-and-recursion", PASS if ok else FAIL,
        f"max |sum-1|={worst_sum:.2e}, max recursion gap={worst_rec:.2e} (t<=500)"))

    # -- accumulator recursion vs direct history sums --
    worst = 0.0
    for scheme in (WeightScheme("uniform"), WeightScheme("discounted", 0.7)):
        st = init_stream(3, 2, cfg.mu, cfg.L, cfg.C_max, cfg.sigma2,
                         np.random.default_rng(99), keep_history=True)
        for _ in range(199):
            step_drift(st, rng)
            ingest_sample(st, scheme)
            a = weights(scheme, st.t)
            direct_h = sum(a[i] * st.history[i][0] for i in range(st.t))
            direct_b = sum(a[i] * st.history[i][0] * st.history[i][1] for i in range(st.t))
            rel_h = np.max(np.abs(st.weighted_hessian - direct_h)) / np.max(np.abs(direct_h))
            rel_b = (np.max(np.abs(st.weighted_target - direct_b))
                     / max(np.max(np.abs(direct_b)), 1e-300))
            worst = max(worst, rel_h, rel_b)
    results.append(CheckResult(
        "accumulator-recursion-equivalence", PASS if worst <= 1e-9 else FAIL,
        f"max relative gap vs direct sums {worst:.2e} (t<=200, both schemes)"))

    # -- contraction of the one-step map and of the inner loop --
    limit = max_stable_step(mix, cfg.mu, cfg.L)
    if cfg.eta > limit and cfg.allow_unstable_eta:
        results.append(CheckResult(
            "contraction", SKIP,
            f"eta={cfg.eta} above the contraction limit {limit:.4g} with override: "
            "the one-step map need not contract; check skipped"))
    else:
        state = init_stream(cfg.n_agents, cfg.dim, cfg.mu, cfg.L, cfg.C_max,
                            cfg.sigma2, np.random.default_rng(5))
        factor = 1.0 - cfg.eta * cfg.mu
        worst_pair = 0.0
        for _ in range(100):
            u = StackedIterate(rng.normal(size=cfg.n_agents * cfg.dim), cfg.n_agents, cfg.dim)
            v = StackedIterate(rng.normal(size=cfg.n_agents * cfg.dim), cfg.n_agents, cfg.dim)
            lhs = np.linalg.norm(phi_step(mix, state, cfg.eta, u).data
                                 - phi_step(mix, state, cfg.eta, v).data)
            rhs = factor * np.linalg.norm(u.data - v.data)
            worst_pair = max(worst_pair, lhs / rhs)
        fp = fixed_point(mix, state, cfg.eta)
        worst_inner = 0.0
        for _ in range(20):
            w0 = StackedIterate(rng.normal(size=cfg.n_agents * cfg.dim), cfg.n_agents, cfg.dim)
            lhs = np.linalg.norm(run_inner(mix, state, cfg.eta, cfg.E, w0).data - fp.data)
            rhs = factor**cfg.E * np.linalg.norm(w0.data - fp.data)
            worst_inner = max(worst_inner, lhs / rhs)
        ok = worst_pair <= 1.0 + 1e-10 and worst_inner <= 1.0 + 1e-10
        results.append(CheckResult(
            "contraction", PASS if ok else FAIL,
            f"max pair ratio {worst_pair:.12f}, max inner-loop ratio {worst_inner:.12f} "
            f"vs (1-eta*mu)={factor:.6f}"))

    # -- blockwise mixing vs explicit Kronecker product (small instance) --
    small = generate_rgg(4, 0.6, 1.1, np.random.default_rng(21))
    small_mix = metropolis_mixing(small)
    small_state = init_stream(4, 3, 0.5, 1.0, 2.0, 0.25, np.random.default_rng(22))
    kron = np.kron(small_mix.entries, np.eye(3))
    worst = 0.0
    for _ in range(20):
        u = rng.normal(size=12)
        via_phi = phi_step(small_mix, small_state, 0.1, StackedIterate(u.copy(), 4, 3)).data
        grad = (small_state.weighted_hessian * u.reshape(4, 3)
                - small_state.weighted_target).ravel()
        explicit = kron @ u - 0.1 * grad
        worst = max(worst, float(np.max(np.abs(via_phi - explicit))))
    results.append(CheckResult(
        "blockwise-vs-kronecker", PASS if worst <= 1e-12 else FAIL,
        f"max abs gap {worst:.2e} on N=4, d=3"))

    # -- fixed point: decoupled vs dense vs Banach iteration --
    fp_dec = fixed_point(small_mix, small_state, 0.1, method="decoupled")
    fp_dense = fixed_point(small_mix, small_state, 0.1, method="dense")
    fp_ban = fixed_point_banach(small_mix, small_state, 0.1, n_steps=2000)
    gap_dense = float(np.max(np.abs(fp_dec.data - fp_dense.data)))
    gap_banach = float(np.linalg.norm(fp_dec.data - fp_ban.data))
    ok = gap_dense <= 1e-10 and gap_banach <= 1e-7
    results.append(CheckResult(
        "fixed-point-cross-check", PASS if ok else FAIL,
        f"decoupled vs dense {gap_dense:.2e}, vs Banach {gap_banach:.2e}"))

    # -- simulation-based certificates, both weighting schemes --
    if cfg.scheme.kind == "uniform":
        variants = [cfg, replace(cfg, scheme=WeightScheme("discounted", 0.7))]
    else:
        variants = [replace(cfg, scheme=WeightScheme("uniform")), cfg]
    for variant in variants:
        label = variant.scheme.label()
        try:
            result = monte_carlo(variant)
        except DgdTrackError as exc:
            results.append(CheckResult(f"simulation[{label}]", FAIL, str(exc)))
            continue
        results.extend(_certificate_checks(variant, result, label))

    # -- proposition envelope constants by brute-force summation --
    results.append(_proposition_check(cfg))

    return results


def _certificate_checks(cfg, result, label):
    checks = []
    tri_worst = -math.inf
    lemma2_worst = -math.inf
    bias_worst = -math.inf
    drift_env_worst = -math.inf
    drift_gen_worst = -math.inf
    dominated = 0
    violations = 0
    for tr in result.traces:
        tc = tr.constants
        fp_cap = tc.C * math.sqrt(cfg.n_agents * tc.kappa)
        for k, rec in enumerate(tr.records):
            tri_worst = max(tri_worst, rec.te - (rec.fpte + rec.bias))
            lemma2_worst = max(lemma2_worst, tr.fp_norm[k] - fp_cap)
            cap = bias_bound(tc, tr.grad_norm_at_opt[k], cfg.n_agents)
            bias_worst = max(bias_worst, rec.bias - cap)
            if not math.isnan(tr.fp_drift[k]):
                step_t = rec.t - 1
                if cfg.scheme.kind == "uniform":
                    env = drift_bound_uniform(tc.G, tc.mu, step_t)
                else:
                    env = drift_bound_discounted(tc.G, tc.mu, cfg.scheme.gamma, step_t)
                drift_env_worst = max(drift_env_worst, tr.fp_drift[k] - env)
                drift_gen_worst = max(drift_gen_worst, tr.fp_drift[k] - tr.lemma4_rhs[k])
            if rec.t >= tr.scheme_constants["t0"]:
                dominated += 1
                if rec.te > tr.bound_values[k]:
                    violations += 1
    checks.append(CheckResult(
        f"te-triangle-decomposition[{label}]", PASS if tri_worst <= 1e-9 else FAIL,
        f"max te-(fpte+bias) = {tri_worst:.2e}"))
    checks.append(CheckResult(
        f"fixed-point-boundedness[{label}]", PASS if lemma2_worst <= 1e-9 else FAIL,
        f"max ||fp|| - C*sqrt(N*kappa) = {lemma2_worst:.2e}"))
    checks.append(CheckResult(
        f"bias-certificate[{label}]", PASS if bias_worst <= 1e-9 else FAIL,
        f"max bias - eta*kappa*Lambda*||grad|| = {bias_worst:.2e}"))
    checks.append(CheckResult(
        f"drift-certificate[{label}]",
        PASS if drift_env_worst <= 1e-9 and drift_gen_worst <= 1e-9 else FAIL,
        f"max drift-envelope gap {drift_env_worst:.2e}, "
        f"max drift-generic gap {drift_gen_worst:.2e}"))
    checks.append(CheckResult(
        f"bound-domination[{label}]", PASS if violations == 0 else FAIL,
        f"{violations} violations over {dominated} certified points "
        f"(t0={result.traces[0].scheme_constants['t0']})"))
    return checks


def _proposition_check(cfg):
    # the envelope is exactly tight at t0 when A = t0*S(t0), so the
    # comparison is relative with an ulp-scale allowance
    t_max = 2000
    rel_tol = 1e-12
    worst_uniform = -math.inf
    worst_discounted = -math.inf
    alphas = sorted({0.5, 0.9, (1.0 - cfg.eta * cfg.mu) ** cfg.E})
    gammas = (0.3, 0.7)
    for alpha in alphas:
        t0, a_const = uniform_constants(alpha)
        curve = uniform_sum_curve(alpha, t_max + 1)
        for t in range(t0, t_max + 1):
            worst_uniform = max(worst_uniform, (t * curve[t - 1] - a_const) / a_const)
        for gamma in gammas:
            t0g, a_gamma, _ = discounted_constants(alpha, gamma)
            gcurve = discounted_sum_curve(gamma, alpha, t_max + 1)
            for t in range(t0g, t_max + 1):
                env = a_gamma * (1.0 - gamma) / (1.0 - gamma**t)
                worst_discounted = max(worst_discounted, (gcurve[t - 1] - env) / env)
    ok = worst_uniform <= rel_tol and worst_discounted <= rel_tol
    return CheckResult(
        "proposition-envelopes", PASS if ok else FAIL,
        f"max rel gap: uniform {worst_uniform:.2e}, discounted {worst_discounted:.2e} "
        "(t<=2000)")
