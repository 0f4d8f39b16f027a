"""Tests for error models and plan simulation."""

from __future__ import annotations

import numpy as np
import pytest

from xtalk.channels import min_choi_eigenvalue, tp_residual, unitary_superop
from xtalk.design import PlanParams, build_plan, default_registry
from xtalk.regions import DeviceLayout, Partition, Region, one_partition
from xtalk.simulator import (
    circuit_layers,
    crosstalk_free_model,
    detection_crosstalk,
    ladder_crosstalk_model,
    operation_crosstalk_coherent,
    operation_crosstalk_depolarizing,
    run_plan,
    simulate_circuit,
)

ATOL = 1e-10
REGISTRY = default_registry()


def single_qubit_oracle(gates, p_local):
    """Independent 1-qubit simulation: raw 2x2 density-matrix algebra."""
    rho = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    for name in gates:
        u = REGISTRY.unitary(name)
        rho = u @ rho @ u.conj().T
        rho = (1 - p_local) * rho + p_local * np.trace(rho) * np.eye(2) / 2
    return np.real(np.diag(rho))


def layers_for(n_qubits, per_qubit_gates):
    """Layer specs for single-qubit regions given per-qubit gate sequences."""
    depth = len(per_qubit_gates[0])
    return [
        tuple(((q,), per_qubit_gates[q][t]) for q in range(n_qubits))
        for t in range(depth)
    ]


def random_gates(rng, depth):
    names = REGISTRY.names_for_size(1)
    return tuple(names[g] for g in rng.integers(len(names), size=depth))


class TestCrosstalkFreeModel:
    def test_all_idle_is_identity(self):
        model = crosstalk_free_model(3, p_local=0.0)
        probs = simulate_circuit(model, layers_for(3, [("I",) * 4] * 3))
        want = np.zeros(8)
        want[0] = 1.0
        assert np.allclose(probs, want, atol=ATOL)

    def test_single_xhalf_is_unbiased(self):
        model = crosstalk_free_model(1, p_local=0.0)
        probs = simulate_circuit(model, layers_for(1, [("Xhalf",)]))
        assert np.allclose(probs, [0.5, 0.5], atol=ATOL)

    def test_factorizes_into_single_qubit_oracle(self):
        rng = np.random.default_rng(10)
        model = crosstalk_free_model(2, p_local=1e-2)
        for _ in range(10):
            g0, g1 = random_gates(rng, 12), random_gates(rng, 12)
            joint = simulate_circuit(model, layers_for(2, [g0, g1]))
            product = np.kron(single_qubit_oracle(g0, 1e-2), single_qubit_oracle(g1, 1e-2))
            assert np.max(np.abs(joint - product)) < ATOL

    def test_rate_validation(self):
        with pytest.raises(ValueError):
            crosstalk_free_model(2, p_local=-0.1)


class TestOperationCrosstalkDepolarizing:
    def test_zero_rate_reduces_to_baseline(self):
        rng = np.random.default_rng(11)
        base = crosstalk_free_model(2, p_local=5e-3)
        model = operation_crosstalk_depolarizing(2, 0, 1, 0.0, p_local=5e-3)
        for _ in range(10):
            layers = layers_for(2, [random_gates(rng, 8), random_gates(rng, 8)])
            assert np.max(np.abs(simulate_circuit(model, layers)
                                 - simulate_circuit(base, layers))) < ATOL

    def test_full_depolarization_of_target(self):
        model = operation_crosstalk_depolarizing(2, 0, 1, 1.0, p_local=0.0)
        probs = simulate_circuit(model, layers_for(2, [("Xhalf",), ("I",)]))
        marginal_q1 = np.array([probs[0b00] + probs[0b10], probs[0b01] + probs[0b11]])
        assert np.allclose(marginal_q1, [0.5, 0.5], atol=ATOL)

    def test_yhalf_does_not_trigger(self):
        base = crosstalk_free_model(2, p_local=0.0)
        model = operation_crosstalk_depolarizing(2, 0, 1, 1.0, p_local=0.0)
        layers = layers_for(2, [("Yhalf",), ("Yhalf",)])
        assert np.max(np.abs(simulate_circuit(model, layers)
                             - simulate_circuit(base, layers))) < ATOL

    def test_index_collision_rejected(self):
        with pytest.raises(ValueError):
            operation_crosstalk_depolarizing(2, 1, 1, 0.1)


class TestOperationCrosstalkCoherent:
    def test_zero_angle_joint_equals_xhalf(self):
        model = operation_crosstalk_coherent(2, 0, 1, 0.0, p_local=0.0)
        layer = (((0,), "Xhalf"), ((1,), "I"))
        factors = model.factors(layer)
        joint = [sop for qubits, sop in factors if qubits == (0, 1)]
        assert len(joint) == 1
        want = unitary_superop(np.kron(REGISTRY.unitary("Xhalf"), np.eye(2)))
        assert np.max(np.abs(joint[0] - want)) < ATOL

    def test_zero_angle_distributions_match_baseline(self):
        rng = np.random.default_rng(12)
        base = crosstalk_free_model(2, p_local=1e-2)
        model = operation_crosstalk_coherent(2, 0, 1, 0.0, p_local=1e-2)
        for _ in range(10):
            layers = layers_for(2, [random_gates(rng, 10), random_gates(rng, 10)])
            assert np.max(np.abs(simulate_circuit(model, layers)
                                 - simulate_circuit(base, layers))) < ATOL

    def test_dependence_signal_scales_quadratically(self):
        # The statistical footprint of the coupling, the per-sample
        # dependence of the target result on the source setting over random
        # length-30 circuits, grows as the angle squared, which is why
        # detecting it needs more samples.  Exact distributions are used as
        # cell weights, so the fit has no sampling noise.
        from xtalk.data import CellTable, VariableSpec
        from xtalk.stats import g2_test

        layout = DeviceLayout.fully_connected(2)
        plan = build_plan(
            one_partition(layout),
            PlanParams(depth=30, bag_size=10, n_contexts=5, p_idle_context=0.0, n_reps=1),
            42,
        )
        settings = plan.settings_matrix()

        def exact_table(model):
            columns = {"S0": [], "S1": [], "R0": [], "R1": []}
            weights = []
            for c in range(plan.n_circuits):
                probs = simulate_circuit(model, circuit_layers(plan, c, model.registry))
                for o in range(4):
                    columns["S0"].append(settings[c, 0])
                    columns["S1"].append(settings[c, 1])
                    columns["R0"].append(o >> 1)
                    columns["R1"].append(o & 1)
                    weights.append(probs[o])
            encoded = {}
            specs = []
            for m, sid in enumerate(("S0", "S1")):
                values, codes = np.unique(columns[sid], return_inverse=True)
                encoded[sid] = codes
                specs.append(VariableSpec(sid, "setting", m, len(values)))
            for m, rid in enumerate(("R0", "R1")):
                encoded[rid] = np.array(columns[rid])
                specs.append(VariableSpec(rid, "result", m, 2))
            return CellTable(specs, encoded, np.array(weights))

        angles = np.array([0.02, 0.04, 0.08])
        signals = []
        for angle in angles:
            table = exact_table(operation_crosstalk_coherent(2, 0, 1, angle, p_local=0.0))
            result = g2_test(table, "S0", "R1", ("S1",))
            signals.append(result.g2 / table.n_total)
        slope = np.polyfit(np.log(angles), np.log(signals), 1)[0]
        assert 1.5 <= slope <= 2.5

    def test_trigger_is_unconditional_on_target_gate(self):
        # deviation from baseline appears even when the target runs non-idle
        model = operation_crosstalk_coherent(2, 0, 1, 0.3, p_local=0.0)
        base = crosstalk_free_model(2, p_local=0.0)
        layers = layers_for(2, [("Xhalf",) * 10, ("Yhalf",) * 10])
        assert np.max(np.abs(simulate_circuit(model, layers)
                             - simulate_circuit(base, layers))) > 1e-3


class TestDetectionCrosstalk:
    def test_zero_flip_matches_ideal_povm(self):
        rng = np.random.default_rng(14)
        base = crosstalk_free_model(2, p_local=1e-2)
        model = detection_crosstalk(0.0, p_local=1e-2)
        for _ in range(5):
            layers = layers_for(2, [random_gates(rng, 6), random_gates(rng, 6)])
            assert np.max(np.abs(simulate_circuit(model, layers)
                                 - simulate_circuit(base, layers))) < ATOL

    def test_flip_probability_on_one_zero_state(self):
        # two Xhalf layers on qubit 0 prepare |10> exactly
        model = detection_crosstalk(0.25, p_local=0.0)
        layers = layers_for(2, [("Xhalf", "Xhalf"), ("I", "I")])
        probs = simulate_circuit(model, layers)
        assert np.allclose(probs, [0.0, 0.0, 0.75, 0.25], atol=ATOL)

    def test_effects_validated(self):
        model = detection_crosstalk(0.3)
        total = sum(model.povm.effects)
        assert np.max(np.abs(total - np.eye(4))) < ATOL


class TestLadderModel:
    def layout(self):
        return DeviceLayout.ladder(3)

    def idle_layers(self, overrides=None, depth=1):
        gates = {q: ("I",) * depth for q in range(6)}
        gates.update(overrides or {})
        return layers_for(6, [gates[q] for q in range(6)])

    def test_zero_rate_is_baseline(self):
        rng = np.random.default_rng(15)
        base = crosstalk_free_model(6, p_local=1e-2)
        model = ladder_crosstalk_model(self.layout(), 0.0, p_local=1e-2, p_idle_error=1e-2)
        layers = layers_for(6, [random_gates(rng, 5) for _ in range(6)])
        assert np.max(np.abs(simulate_circuit(model, layers)
                             - simulate_circuit(base, layers))) < ATOL

    def test_bottom_row_gate_depolarizes_vertical_neighbor(self):
        model = ladder_crosstalk_model(self.layout(), 1.0, p_local=0.0)
        probs = simulate_circuit(model, self.idle_layers({3: ("Xhalf", "Xhalf")}, depth=2))
        # qubit 0 fully mixed, qubit 3 back to |1>... Xhalf twice flips it
        marg_q0 = probs.reshape(2, 32).sum(axis=1)
        assert np.allclose(marg_q0, [0.5, 0.5], atol=ATOL)

    def test_top_row_gates_never_add_crosstalk(self):
        base = crosstalk_free_model(6, p_local=0.0)
        model = ladder_crosstalk_model(self.layout(), 1.0, p_local=0.0)
        layers = self.idle_layers({0: ("Xhalf",), 1: ("Yhalf",), 2: ("Xhalf",)})
        assert np.max(np.abs(simulate_circuit(model, layers)
                             - simulate_circuit(base, layers))) < ATOL

    def test_idle_rate_differs_from_gate_rate(self):
        model = ladder_crosstalk_model(self.layout(), 0.0, p_local=0.0, p_idle_error=1.0)
        # one Xhalf on qubit 0: every other qubit idles and gets fully mixed
        probs = simulate_circuit(model, self.idle_layers({0: ("Xhalf",)}))
        assert probs == pytest.approx(np.full(64, 1 / 64), abs=ATOL)

    def test_wrong_layout_rejected(self):
        with pytest.raises(ValueError):
            ladder_crosstalk_model(DeviceLayout.fully_connected(6), 0.1)


class TestModelInvariants:
    def sample_layer_specs(self):
        rng = np.random.default_rng(16)
        return [
            tuple(((q,), g) for q, g in enumerate(
                [REGISTRY.names_for_size(1)[i] for i in rng.integers(3, size=2)]))
            for _ in range(10)
        ]

    @pytest.mark.parametrize("factory", [
        lambda: crosstalk_free_model(2, 1e-2),
        lambda: operation_crosstalk_depolarizing(2, 0, 1, 1e-2, 1e-2),
        lambda: operation_crosstalk_coherent(2, 0, 1, 2e-2, 1e-2),
        lambda: detection_crosstalk(1e-2, 1e-2),
    ])
    def test_all_layer_factors_tp_and_cp(self, factory):
        model = factory()
        for layer in self.sample_layer_specs():
            for _, sop in model.factors(layer):
                assert tp_residual(sop) < ATOL
                assert min_choi_eigenvalue(sop) > -ATOL

    def test_ladder_layer_factors_tp_and_cp(self):
        rng = np.random.default_rng(17)
        model = ladder_crosstalk_model(DeviceLayout.ladder(3), 1e-2, 1e-2, 5e-3)
        names = REGISTRY.names_for_size(1)
        for _ in range(5):
            layer = tuple(((q,), names[i]) for q, i in enumerate(rng.integers(3, size=6)))
            for _, sop in model.factors(layer):
                assert tp_residual(sop) < ATOL
                assert min_choi_eigenvalue(sop) > -ATOL

    def test_distributions_normalized_across_plan(self):
        plan = build_plan(
            one_partition(DeviceLayout.fully_connected(2)),
            PlanParams(depth=8, bag_size=5, n_contexts=3, p_idle_context=0.2, n_reps=3),
            21,
        )
        model = operation_crosstalk_coherent(2, 0, 1, 5e-2, 1e-2)
        for c in range(plan.n_circuits):
            probs = simulate_circuit(model, circuit_layers(plan, c, model.registry))
            assert abs(probs.sum() - 1.0) < ATOL
            assert probs.min() >= 0


class TestRunPlan:
    def make_plan(self, n_reps=2000, depth=8):
        layout = DeviceLayout.fully_connected(2)
        params = PlanParams(depth=depth, bag_size=5, n_contexts=3,
                            p_idle_context=0.2, n_reps=n_reps)
        return build_plan(one_partition(layout), params, 33)

    def test_empirical_frequencies_match_product_oracle(self):
        plan = self.make_plan(n_reps=4000)
        model = crosstalk_free_model(2, p_local=1e-2)
        dataset = run_plan(model, plan, 44)
        counts = dataset.counts()
        for c in range(plan.n_circuits):
            g0 = plan.subcircuit_layers(c, 0)
            g1 = plan.subcircuit_layers(c, 1)
            want = np.kron(single_qubit_oracle(g0, 1e-2), single_qubit_oracle(g1, 1e-2))
            freq = counts[c] / dataset.n_reps
            bound = 4 * np.sqrt(want * (1 - want) / dataset.n_reps).sum() + 1e-9
            assert np.abs(freq - want).sum() < bound

    def test_single_rep_yields_one_record_per_circuit(self):
        plan = self.make_plan(n_reps=1)
        dataset = run_plan(crosstalk_free_model(2, 0.0), plan, 1)
        records = list(dataset.iter_records())
        assert len(records) == plan.n_circuits
        assert {r["circuit"] for r in records} == set(range(plan.n_circuits))

    def test_fixed_seed_is_byte_identical(self):
        plan = self.make_plan(n_reps=50)
        model = crosstalk_free_model(2, 1e-2)
        a = run_plan(model, plan, 55)
        b = run_plan(model, plan, 55)
        assert a.digest() == b.digest()
        assert list(a.iter_records()) == list(b.iter_records())

    def test_different_seeds_differ(self):
        plan = self.make_plan(n_reps=50)
        model = crosstalk_free_model(2, 1e-2)
        assert run_plan(model, plan, 55).digest() != run_plan(model, plan, 56).digest()

    def test_dimension_mismatch_rejected(self):
        plan = self.make_plan(n_reps=1)
        with pytest.raises(ValueError):
            run_plan(crosstalk_free_model(3, 0.0), plan, 0)

    def test_eight_qubit_limit_supported(self):
        model = crosstalk_free_model(8, p_local=0.0)
        gates = [("Xhalf",)] + [("I",)] * 7
        probs = simulate_circuit(model, layers_for(8, gates))
        assert probs.shape == (256,)
        assert probs[0] == pytest.approx(0.5, abs=ATOL)
        assert probs[128] == pytest.approx(0.5, abs=ATOL)
        with pytest.raises(ValueError):
            crosstalk_free_model(9)

    def test_factorized_model_factorizes_across_2regions(self):
        # forward locality witness: exact joint = product of region marginals
        layout = DeviceLayout.fully_connected(4)
        partition = Partition(4, (Region((0, 1)), Region((2, 3))))
        params = PlanParams(depth=5, bag_size=4, n_contexts=2, n_reps=2)
        plan = build_plan(partition, params, 66)
        model = crosstalk_free_model(4, p_local=2e-2)
        for c in range(plan.n_circuits):
            probs = simulate_circuit(model, circuit_layers(plan, c, model.registry))
            joint = probs.reshape(4, 4)
            marg_a = joint.sum(axis=1)
            marg_b = joint.sum(axis=0)
            assert np.max(np.abs(joint - np.outer(marg_a, marg_b))) < ATOL
