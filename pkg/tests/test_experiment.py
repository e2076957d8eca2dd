"""Experiment loop and Monte-Carlo aggregation tests."""

import os
from dataclasses import replace

import numpy as np
import pytest

from dgdtrack import (
    ExperimentConfig,
    ParameterError,
    WeightScheme,
    measured_indices,
    monte_carlo,
    run_trial,
    write_manifest,
    write_results_csv,
)

DESK = ExperimentConfig(
    n_agents=6, dim=3, mu=0.5, L=1.0, eta=0.1, E=3,
    C_max=2.0, sigma2=0.25, horizon=40, n_runs=3, master_seed=99,
    measure_stride=1, initial_radius=0.5,
)


class TestMeasuredIndices:
    def test_stride_one_is_every_index(self):
        assert measured_indices(5, 1) == [1, 2, 3, 4, 5]

    def test_stride_covers_final_index(self):
        assert measured_indices(10, 4) == [1, 5, 9, 10]
        assert measured_indices(9, 4) == [1, 5, 9]


class TestRunTrial:
    def test_deterministic_given_seed_and_run_index(self):
        a = run_trial(DESK, 1)
        b = run_trial(DESK, 1)
        assert np.array_equal(a.series("te"), b.series("te"))
        assert np.array_equal(a.bound_values, b.bound_values, equal_nan=True)
        assert a.constants == b.constants

    def test_different_runs_differ(self):
        a = run_trial(DESK, 0)
        b = run_trial(DESK, 1)
        assert not np.array_equal(a.series("te"), b.series("te"))

    def test_shared_topology_gives_same_lambda2_across_runs(self):
        a, b = run_trial(DESK, 0), run_trial(DESK, 5)
        assert a.lambda2 == b.lambda2
        per_run = replace(DESK, shared_topology=False)
        c, d = run_trial(per_run, 0), run_trial(per_run, 5)
        assert c.lambda2 != d.lambda2

    def test_records_strictly_increasing_in_t(self):
        tr = run_trial(replace(DESK, measure_stride=7), 0)
        ts = tr.ts
        assert np.all(np.diff(ts) > 0)
        assert ts[0] == 1 and ts[-1] == DESK.horizon

    def test_static_homogeneous_problem_converges_monotonically(self):
        cfg = replace(DESK, sigma2=0.0, homogeneous_data=True, horizon=80, n_runs=1)
        tr = run_trial(cfg, 0)
        te = tr.series("te")
        assert np.all(np.diff(te) <= 1e-12)  # contraction toward a static optimum
        assert te[-1] <= 1e-6 * te[0]
        assert np.all(tr.series("bias") <= 1e-8)

    def test_huge_inner_budget_pins_iterate_to_fixed_point(self):
        cfg = replace(DESK, E=10_000, horizon=5, n_runs=1)
        tr = run_trial(cfg, 0)
        assert np.all(tr.series("fpte")[1:] <= 1e-6)

    def test_fpte_recursion_inequality_links_consecutive_records(self):
        # FPTE(t+1) <= alpha * (FPTE(t) + drift(t -> t+1)), the engine's core relation
        tr = run_trial(DESK, 2)
        fpte = tr.series("fpte")
        alpha = tr.constants.alpha
        for k in range(1, len(fpte)):
            assert fpte[k] <= alpha * (fpte[k - 1] + tr.fp_drift[k]) + 1e-9

    def test_drift_and_lemma4_populated_at_stride_one(self):
        tr = run_trial(DESK, 0)
        assert np.isnan(tr.fp_drift[0])
        assert not np.any(np.isnan(tr.fp_drift[1:]))
        assert np.all(tr.fp_drift[1:] <= tr.lemma4_rhs[1:] + 1e-9)

    def test_drift_nan_at_larger_stride(self):
        tr = run_trial(replace(DESK, measure_stride=5), 0)
        assert np.all(np.isnan(tr.fp_drift))

    def test_bound_nan_exactly_below_t0(self):
        tr = run_trial(DESK, 0)
        t0 = tr.scheme_constants["t0"]
        for t, bound in zip(tr.ts, tr.bound_values):
            assert np.isnan(bound) == (t < t0)

    def test_unstable_eta_rejected_without_override(self):
        with pytest.raises(ParameterError):
            run_trial(replace(DESK, eta=2.0), 0)


class TestMonteCarlo:
    def test_single_run_reduces_to_trace(self):
        cfg = replace(DESK, n_runs=1)
        res = monte_carlo(cfg)
        te = res.traces[0].series("te")
        assert np.allclose(res.rms_te, te, rtol=1e-15)
        assert np.array_equal(res.mean_fpte, res.traces[0].series("fpte"))

    def test_rms_sandwiched_between_min_and_max(self):
        res = monte_carlo(DESK)
        te = np.array([tr.series("te") for tr in res.traces])
        assert np.all(res.rms_te >= te.min(axis=0) - 1e-15)
        assert np.all(res.rms_te <= te.max(axis=0) + 1e-15)

    def test_thread_count_does_not_change_results(self):
        serial = monte_carlo(DESK, threads=1)
        threaded = monte_carlo(DESK, threads=4)
        assert np.array_equal(serial.rms_te, threaded.rms_te)
        assert np.array_equal(serial.bound, threaded.bound, equal_nan=True)
        assert np.array_equal(serial.mean_fp_residual, threaded.mean_fp_residual)

    def test_fp_residual_gate_holds_everywhere(self):
        res = monte_carlo(DESK)
        assert np.all(res.mean_fp_residual <= 1e-8)


class TestOutputs:
    def test_csv_schema_and_digits(self, tmp_path):
        res = monte_carlo(replace(DESK, horizon=10, n_runs=2))
        path = tmp_path / "results.csv"
        write_results_csv(res, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,rms_te,mean_fpte,mean_bias,bound,mean_fp_residual,n_runs"
        assert len(lines) == 11
        first = lines[1].split(",")
        assert first[0] == "1" and first[-1] == "2"
        assert float(first[1]) == res.rms_te[0]  # 17 digits round-trip

    def test_no_partial_files_on_failure(self, tmp_path):
        res = monte_carlo(replace(DESK, horizon=5, n_runs=1))
        target = tmp_path / "sub" / "results.csv"
        write_results_csv(res, target)
        leftovers = [p for p in os.listdir(tmp_path / "sub") if p.endswith(".tmp")]
        assert leftovers == []

    def test_manifest_config_round_trips(self, tmp_path):
        import json

        cfg = replace(DESK, scheme=WeightScheme("discounted", 0.7), horizon=8)
        res = monte_carlo(cfg)
        path = tmp_path / "manifest.json"
        write_manifest(res, path)
        payload = json.loads(path.read_text())
        rebuilt = ExperimentConfig.from_dict(payload["config"])
        assert rebuilt == cfg
        assert payload["constants"]["t0"] == res.traces[0].scheme_constants["t0"]
        assert "tight_G" in payload["diagnostics"]

    def test_stream_dump_only_when_requested(self, tmp_path):
        cfg = replace(DESK, horizon=5, n_runs=2, dump_streams=True)
        monte_carlo(cfg, stream_dump_dir=str(tmp_path))
        assert sorted(os.listdir(tmp_path)) == ["stream_run0.csv", "stream_run1.csv"]

    def test_failed_write_leaves_nothing_behind(self, tmp_path):
        from dgdtrack.experiment import _atomic_file_write

        def exploding_writer(path):
            with open(path, "w") as fh:
                fh.write("partial")
            raise RuntimeError("disk on fire")

        target = tmp_path / "results.csv"
        with pytest.raises(RuntimeError):
            _atomic_file_write(target, exploding_writer)
        assert os.listdir(tmp_path) == []

    def test_stream_dump_replays_through_oracle(self, tmp_path):
        # the dumped samples + config reproduce the live run's oracle exactly
        from dgdtrack import fixed_point, global_minimizer, load_stream_csv, weights
        from dgdtrack.experiment import build_topology
        from dgdtrack.streaming import StreamState

        cfg = replace(DESK, horizon=6, n_runs=1, dump_streams=True)
        res = monte_carlo(cfg, stream_dump_dir=str(tmp_path))
        samples = load_stream_csv(tmp_path / "stream_run0.csv")
        a = weights(cfg.scheme, len(samples))
        replayed = StreamState(cfg.n_agents, cfg.dim, cfg.mu, cfg.L, cfg.C_max,
                               cfg.sigma2, samples[-1][0], samples[-1][1],
                               keep_history=False)
        replayed.weighted_hessian = sum(a[i] * samples[i][0]
                                        for i in range(len(samples)))
        replayed.weighted_target = sum(a[i] * samples[i][0] * samples[i][1]
                                       for i in range(len(samples)))
        _, mix = build_topology(cfg)
        fp = fixed_point(mix, replayed, cfg.eta)
        stacked_star = np.tile(global_minimizer(replayed), cfg.n_agents)
        replayed_bias = np.linalg.norm(fp.data - stacked_star)
        assert replayed_bias == pytest.approx(res.traces[0].records[-1].bias,
                                              rel=1e-9, abs=1e-12)
