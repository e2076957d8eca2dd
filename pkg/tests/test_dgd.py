"""DGD operator tests: contraction, composition, blockwise mixing."""

import logging

import numpy as np
import pytest

from dgdtrack import (
    LogicError,
    ParameterError,
    StackedIterate,
    fixed_point,
    generate_rgg,
    init_stream,
    max_stable_step,
    metropolis_mixing,
    phi_step,
    run_inner,
)

ETA = 0.1
MU, L = 0.5, 1.0


@pytest.fixture(scope="module")
def setup():
    mix = metropolis_mixing(generate_rgg(6, 0.5, 1.1, np.random.default_rng(1)))
    state = init_stream(6, 3, MU, L, 2.0, 0.25, np.random.default_rng(2))
    return mix, state


def rand_iterate(rng, n=6, d=3):
    return StackedIterate(rng.normal(size=n * d), n, d)


class TestStackedIterate:
    def test_block_layout_is_agent_major(self):
        w = StackedIterate(np.arange(6.0), 2, 3)
        assert np.array_equal(w.blocks(), [[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]])

    def test_length_mismatch_rejected(self):
        with pytest.raises(LogicError):
            StackedIterate(np.zeros(5), 2, 3)

    def test_non_finite_rejected(self):
        with pytest.raises(LogicError):
            StackedIterate(np.array([1.0, np.nan]), 2, 1)


class TestPhiStep:
    def test_single_agent_fixed_point_of_gradient_descent(self):
        # A = I, c fixed: w = c is stationary and M = [1] mixes nothing
        mix = metropolis_mixing(generate_rgg(1, 0.3, 1.1, np.random.default_rng(0)))
        state = init_stream(1, 3, 1.0, 1.0, 5.0, 0.0, np.random.default_rng(3))
        w = StackedIterate(state.centers.ravel().copy(), 1, 3)
        out = phi_step(mix, state, 0.5, w)
        assert np.allclose(out.data, w.data, atol=1e-15)

    def test_consensus_input_passes_through_mix(self, setup):
        mix, state = setup
        v = np.array([0.3, -1.2, 0.7])
        w = StackedIterate(np.tile(v, 6), 6, 3)
        out = phi_step(mix, state, ETA, w)
        expected = w.data - ETA * (state.weighted_hessian * w.blocks()
                                   - state.weighted_target).ravel()
        assert np.allclose(out.data, expected, atol=1e-12)

    def test_contraction_on_random_pairs(self, setup):
        mix, state = setup
        rng = np.random.default_rng(7)
        factor = 1.0 - ETA * MU
        for _ in range(100):
            u, v = rand_iterate(rng), rand_iterate(rng)
            lhs = np.linalg.norm(phi_step(mix, state, ETA, u).data
                                 - phi_step(mix, state, ETA, v).data)
            assert lhs <= factor * np.linalg.norm(u.data - v.data) * (1 + 1e-10)

    def test_affine_in_the_iterate(self, setup):
        mix, state = setup
        rng = np.random.default_rng(8)
        zero = phi_step(mix, state, ETA, StackedIterate.zeros(6, 3)).data
        for _ in range(20):
            u, v = rand_iterate(rng), rand_iterate(rng)
            both = phi_step(mix, state, ETA,
                            StackedIterate(u.data + v.data, 6, 3)).data
            gap = both - phi_step(mix, state, ETA, u).data \
                - phi_step(mix, state, ETA, v).data + zero
            assert np.max(np.abs(gap)) <= 1e-12

    def test_step_guard(self, setup):
        mix, state = setup
        limit = max_stable_step(mix, MU, L)
        with pytest.raises(ParameterError):
            phi_step(mix, state, limit * 1.01, rand_iterate(np.random.default_rng(9)))
        with pytest.raises(ParameterError):
            phi_step(mix, state, 0.0, rand_iterate(np.random.default_rng(9)))

    def test_step_guard_override_warns(self, setup, caplog):
        mix, state = setup
        limit = max_stable_step(mix, MU, L)
        with caplog.at_level(logging.WARNING, logger="dgdtrack.dgd"):
            phi_step(mix, state, limit * 1.01,
                     rand_iterate(np.random.default_rng(9)), allow_unstable=True)
        assert any("contraction limit" in rec.message for rec in caplog.records)

    def test_dimension_mismatch(self, setup):
        mix, state = setup
        with pytest.raises(LogicError):
            phi_step(mix, state, ETA, StackedIterate.zeros(5, 3))


class TestRunInner:
    def test_single_step_equals_phi(self, setup):
        mix, state = setup
        w = rand_iterate(np.random.default_rng(10))
        assert np.array_equal(run_inner(mix, state, ETA, 1, w).data,
                              phi_step(mix, state, ETA, w).data)

    def test_two_steps_equal_manual_composition_bitwise(self, setup):
        mix, state = setup
        w = rand_iterate(np.random.default_rng(11))
        once = phi_step(mix, state, ETA, phi_step(mix, state, ETA, w))
        assert np.array_equal(run_inner(mix, state, ETA, 2, w).data, once.data)

    def test_invalid_step_count(self, setup):
        mix, state = setup
        with pytest.raises(ParameterError):
            run_inner(mix, state, ETA, 0, rand_iterate(np.random.default_rng(12)))

    def test_contracts_toward_fixed_point(self, setup):
        mix, state = setup
        fp = fixed_point(mix, state, ETA)
        rng = np.random.default_rng(13)
        for n_steps in (1, 3, 7):
            factor = (1.0 - ETA * MU) ** n_steps
            for _ in range(30):
                w = rand_iterate(rng)
                lhs = np.linalg.norm(run_inner(mix, state, ETA, n_steps, w).data - fp.data)
                assert lhs <= factor * np.linalg.norm(w.data - fp.data) * (1 + 1e-10)

    def test_frozen_iteration_converges_within_predicted_budget(self, setup):
        mix, state = setup
        fp = fixed_point(mix, state, ETA)
        w = rand_iterate(np.random.default_rng(14))
        dist0 = np.linalg.norm(w.data - fp.data)
        target = 1e-10
        budget = int(np.ceil(np.log(target / dist0) / np.log(1.0 - ETA * MU))) + 10
        w = run_inner(mix, state, ETA, budget, w)
        residual = np.linalg.norm(phi_step(mix, state, ETA, w).data - w.data)
        assert residual <= 1e-10


class TestBlockwiseMixing:
    @pytest.mark.parametrize("n,d", [(2, 1), (3, 2), (4, 3)])
    def test_matches_explicit_kronecker(self, n, d):
        mix = metropolis_mixing(generate_rgg(n, 0.8, 1.1, np.random.default_rng(n)))
        state = init_stream(n, d, MU, L, 2.0, 0.25, np.random.default_rng(n + 50))
        kron = np.kron(mix.entries, np.eye(d))
        rng = np.random.default_rng(99)
        for _ in range(20):
            u = rng.normal(size=n * d)
            grad = (state.weighted_hessian * u.reshape(n, d)
                    - state.weighted_target).ravel()
            explicit = kron @ u - ETA * grad
            via_phi = phi_step(mix, state, ETA, StackedIterate(u.copy(), n, d)).data
            assert np.max(np.abs(via_phi - explicit)) <= 1e-12
