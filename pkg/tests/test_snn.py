"""Edge network semantics: init, thresholds, basis, substep, plasticity, gate."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neuroedge.errors import InvalidDimension
from neuroedge.snn import (
    GateDecision,
    GateMode,
    LearningConfig,
    NetworkState,
    SupervisionGate,
    compute_thresholds,
    decode_control,
    dendritic_basis,
    gate_step,
    init_network,
    network_substep,
    plasticity_update,
    supervision_due,
)


def small_net(seed=0, n=4, k=1, p=8, **overrides):
    kwargs = dict(
        seed=seed,
        n_neurons=n,
        decoded_dim=k,
        n_basis=p,
        decoder_variance=1.0,
        leak=0.001,
        rate_l2_cost=0.001,
        spike_l1_cost=0.001,
        feedback_gain=10.0,
        learning_rate=0.001,
    )
    kwargs.update(overrides)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return init_network(**kwargs)


class TestInitNetwork:
    def test_same_seed_identical(self):
        p1, s1 = small_net(seed=42)
        p2, s2 = small_net(seed=42)
        np.testing.assert_array_equal(p1.decoder, p2.decoder)
        np.testing.assert_array_equal(p1.basis_weights, p2.basis_weights)
        np.testing.assert_array_equal(p1.basis_offsets, p2.basis_offsets)
        np.testing.assert_array_equal(s1.slow_weights, s2.slow_weights)

    def test_decoder_sample_variance(self):
        params, _ = small_net(seed=1, n=30, k=1, p=8, decoder_variance=10.0)
        sample_var = np.var(params.decoder)
        assert 6.0 <= sample_var <= 14.0

    def test_no_warning_above_noise_margin(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            init_network(0, 50, 3, 16, 1e-3, 1e-4, 1e-4, 1e-4, 250.0, 1e-3)

    def test_warns_when_too_small(self):
        with pytest.warns(UserWarning):
            init_network(0, 2, 1, 4, 1.0, 1e-3, 1e-3, 1e-3, 1.0, 1e-3)

    def test_fast_weights_identity(self):
        params, _ = small_net(seed=3)
        expected = params.decoder.T @ params.decoder + params.rate_l2_cost * np.eye(4)
        np.testing.assert_allclose(params.fast_weights, expected, atol=1e-12)

    def test_zero_initial_state(self):
        _, state = small_net()
        assert not state.potentials.any()
        assert not state.rates.any()
        assert not state.slow_weights.any()

    def test_invalid_dimensions(self):
        with pytest.raises(InvalidDimension):
            small_net(n=0)
        with pytest.raises(InvalidDimension):
            small_net(decoder_variance=0.0)


class TestThresholds:
    def test_unit_column(self):
        decoder = np.array([[1.0], [0.0]])  # K=2, one neuron
        t = compute_thresholds(decoder, 0.001, 0.001)
        np.testing.assert_allclose(t, [0.501])

    def test_zero_column(self):
        assert compute_thresholds(np.zeros((2, 1)), 0.0, 0.0)[0] == 0.0

    def test_quadratic_scaling(self):
        t = compute_thresholds(np.array([[2.0], [0.0]]), 0.0, 0.0)
        np.testing.assert_allclose(t, [2.0])


class TestDendriticBasis:
    def test_zero_inputs(self):
        psi = dendritic_basis(np.zeros((3, 5)), np.zeros(5), np.zeros(3))
        np.testing.assert_array_equal(psi, np.zeros(5))

    def test_tanh_unit(self):
        psi = dendritic_basis(np.ones((1, 1)), np.zeros(1), np.ones(1))
        assert abs(psi[0] - 0.761594) <= 1e-6

    @given(st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_bounded(self, seed):
        # strict bound holds wherever float64 tanh has not rounded to 1
        # (|input| < ~19); extreme inputs saturate to exactly +-1.0
        rng = np.random.default_rng(seed)
        psi = dendritic_basis(
            rng.normal(size=(4, 16)), rng.normal(size=16), rng.normal(size=4)
        )
        assert np.all(np.abs(psi) < 1.0)
        saturated = dendritic_basis(
            rng.normal(size=(4, 16)), rng.normal(size=16), rng.normal(size=4) * 1e6
        )
        assert np.all(np.abs(saturated) <= 1.0)


class TestDecodeControl:
    def test_identity_decoder(self):
        params, state = small_net(n=2, k=2, decoder_variance=1.0)
        params.decoder = np.eye(2)
        state.rates = np.array([1.0, 2.0])
        np.testing.assert_array_equal(decode_control(params, state), [1.0, 2.0])

    def test_zero_rates(self):
        params, state = small_net()
        np.testing.assert_array_equal(decode_control(params, state), [0.0])

    def test_dot_product(self):
        params, state = small_net(n=2, k=1)
        params.decoder = np.array([[1.0, -1.0]])
        state.rates = np.array([3.0, 1.0])
        np.testing.assert_array_equal(decode_control(params, state), [2.0])


class TestNetworkSubstep:
    def test_quiescent_network_stays_silent(self):
        params, state = small_net()
        state.rates = np.array([0.5, 0.25, 0.0, 0.0])
        params.basis_weights[:] = 0.0
        params.basis_offsets[:] = 0.0
        before = state.rates.copy()
        fired = network_substep(params, state, None, None, 0.1)
        assert fired == []
        np.testing.assert_array_equal(state.potentials, np.zeros(4))
        np.testing.assert_allclose(state.rates, before * (1 - 0.001 * 0.1))

    def test_over_threshold_neuron_fires(self):
        params, state = small_net(n=2, k=1)
        params.thresholds = np.array([0.5, 0.5])
        state.potentials = np.array([0.6, 0.2])
        fired = network_substep(params, state, None, None, 1e-9)
        assert fired == [0]
        assert state.rates[0] > 0.0
        assert state.spike_log[0][2] == 0

    def test_rate_decay_value(self):
        params, state = small_net(n=1, k=1)
        params.thresholds = np.array([1e9])  # never fire
        state.rates = np.array([1.0])
        network_substep(params, state, None, None, 0.1)
        np.testing.assert_allclose(state.rates, [0.9999])

    def test_fast_weight_column_applied(self):
        params, state = small_net(n=2, k=1)
        params.thresholds = np.array([0.5, 0.5])
        state.potentials = np.array([0.9, 0.3])
        sigma_before = state.potentials.copy()
        network_substep(params, state, None, None, 1e-12)
        np.testing.assert_allclose(
            state.potentials,
            sigma_before - params.fast_weights[:, 0],
            atol=1e-9,
        )

    def test_self_reset_below_threshold(self):
        # firing drops the firer by 2T - nu, so from sigma <= 2T it lands
        # strictly below threshold
        params, state = small_net(n=3, k=1)
        t0 = params.thresholds[0]
        state.potentials = np.array([1.9 * t0, 0.0, 0.0])
        network_substep(params, state, None, None, 1e-12)
        assert state.potentials[0] < params.thresholds[0]

    def test_tie_breaks_to_lowest_index(self):
        params, state = small_net(n=2, k=1)
        params.thresholds = np.array([0.5, 0.5])
        params.fast_weights = np.eye(2)
        state.potentials = np.array([0.7, 0.7])
        fired = network_substep(params, state, None, None, 1e-12)
        assert fired == [0]

    def test_error_feedback_term(self):
        params, state = small_net(n=2, k=1)
        params.thresholds = np.array([1e9, 1e9])
        error = np.array([2.0])
        network_substep(params, state, None, error, 0.1)
        expected = 0.1 * params.feedback_gain * (params.decoder.T @ error).ravel()
        np.testing.assert_allclose(state.potentials, expected, atol=1e-12)

    def test_command_encoding_term(self):
        params, state = small_net(n=2, k=1)
        params.thresholds = np.array([1e9, 1e9])
        command = np.array([1.5])
        network_substep(params, state, command, None, 0.1)
        expected = 0.1 * (params.encoder @ command)
        np.testing.assert_allclose(state.potentials, expected, atol=1e-12)


class TestPlasticity:
    def test_zero_error_no_change(self):
        params, state = small_net()
        state.rates = np.array([1.0, 0.5, 0.0, 2.0])
        before = state.slow_weights.copy()
        plasticity_update(params, state, np.zeros(1))
        np.testing.assert_array_equal(state.slow_weights, before)

    def test_outer_product_value(self):
        params, state = small_net(n=2, k=2, p=2)
        params.decoder = np.eye(2)
        params.basis_weights = np.zeros((2, 2))
        params.basis_offsets = np.array([math.atanh(1.0 - 1e-12), math.atanh(1.0 - 1e-12)])
        # force psi == [1, 1] up to float rounding by saturating tanh
        params.basis_offsets = np.array([100.0, 100.0])
        plasticity_update(params, state, np.array([0.5, -0.5]))
        np.testing.assert_allclose(
            state.slow_weights, [[5e-4, 5e-4], [-5e-4, -5e-4]], atol=1e-12
        )

    def test_depends_only_on_basis_and_projected_error(self):
        params, state1 = small_net(seed=5)
        _, state2 = small_net(seed=5)
        state1.rates = np.array([1.0, 2.0, 0.0, 0.5])
        state2.rates = state1.rates.copy()
        state1.potentials = np.ones(4)  # potentials must not matter
        plasticity_update(params, state1, np.array([0.3]))
        plasticity_update(params, state2, np.array([0.3]))
        np.testing.assert_array_equal(state1.slow_weights, state2.slow_weights)


def gate_cfg(e_th=0.1, warmup=50, interval=50):
    return LearningConfig(
        error_threshold=np.array([e_th]), warmup_steps=warmup, check_interval=interval
    )


class TestSupervisionGate:
    def test_warmup_learns_and_requests(self):
        gate = SupervisionGate()
        cfg = gate_cfg()
        decision = gate_step(gate, cfg, 10, np.array([0.5]))
        assert decision == GateDecision(learn=True, request_supervision=True)
        assert gate.mode is GateMode.WARMUP

    def test_warmup_boundary(self):
        gate = SupervisionGate()
        cfg = gate_cfg()
        for step in range(50):
            gate_step(gate, cfg, step, np.array([0.01]))
            assert gate.mode is GateMode.WARMUP
        gate_step(gate, cfg, 50, np.array([0.01]))
        assert gate.mode is GateMode.AUTONOMOUS

    def test_autonomous_check_below_threshold(self):
        gate = SupervisionGate(mode=GateMode.AUTONOMOUS)
        cfg = gate_cfg(warmup=0)
        decision = gate_step(gate, cfg, 100, np.array([0.05]))
        assert gate.mode is GateMode.AUTONOMOUS
        assert decision.learn is False
        assert decision.request_supervision is True

    def test_autonomous_check_crossing_arms_relearn(self):
        gate = SupervisionGate(mode=GateMode.AUTONOMOUS)
        cfg = gate_cfg(warmup=0)
        decision = gate_step(gate, cfg, 100, np.array([0.2]))
        assert gate.mode is GateMode.RELEARN
        # the crossing check itself only measures; learning starts next step
        assert decision.learn is False
        assert supervision_due(gate, cfg, 101) is True

    def test_non_check_step_not_supervised(self):
        gate = SupervisionGate(mode=GateMode.AUTONOMOUS)
        cfg = gate_cfg(warmup=0)
        assert supervision_due(gate, cfg, 101) is False
        decision = gate_step(gate, cfg, 101, None)
        assert decision == GateDecision(learn=False, request_supervision=False)

    def test_relearn_exits_only_on_check_steps(self):
        gate = SupervisionGate(mode=GateMode.RELEARN)
        cfg = gate_cfg(warmup=0)
        # small error off-check: stays in relearn and keeps learning
        decision = gate_step(gate, cfg, 120, np.array([0.01]))
        assert gate.mode is GateMode.RELEARN
        assert decision.learn is True
        # small error on the next check: back to autonomous
        for step in range(121, 150):
            gate_step(gate, cfg, step, np.array([0.01]))
        gate_step(gate, cfg, 150, np.array([0.01]))
        assert gate.mode is GateMode.AUTONOMOUS
        assert gate.relearn_windows[-1][1] == 151

    def test_relearn_persists_on_large_error_at_check(self):
        gate = SupervisionGate(mode=GateMode.RELEARN)
        cfg = gate_cfg(warmup=0)
        gate_step(gate, cfg, 150, np.array([0.5]))
        assert gate.mode is GateMode.RELEARN

    def test_windows_recorded(self):
        gate = SupervisionGate()
        cfg = gate_cfg(warmup=2, interval=4)
        # steps 0,1 warmup; step 4 check crosses; relearn 5..8, exits at check 8
        errors = {0: 0.01, 1: 0.01, 4: 0.9, 5: 0.9, 6: 0.9, 7: 0.9, 8: 0.01}
        for step in range(10):
            due = supervision_due(gate, cfg, step)
            e = np.array([errors[step]]) if due else None
            gate_step(gate, cfg, step, e)
        assert gate.relearn_windows == [(5, 9)]
        assert gate.mode is GateMode.AUTONOMOUS


class TestLearningConfigValidation:
    def test_positive_thresholds_required(self):
        with pytest.raises(InvalidDimension):
            LearningConfig(error_threshold=np.array([0.0]))

    def test_update_cadence(self):
        cfg = LearningConfig(
            error_threshold=np.array([0.1]),
            substeps_per_step=1000,
            weight_update_period=0.01,
        )
        assert cfg.update_every(0.1) == 100
        assert cfg.update_step_stride(0.1) == 1
        slow = LearningConfig(
            error_threshold=np.array([0.1]),
            substeps_per_step=100,
            weight_update_period=0.5,
        )
        assert slow.update_step_stride(0.1) == 5
