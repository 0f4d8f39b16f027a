"""Markovian error models and exact simulation of experiment plans.

A model maps every circuit layer (the per-region gate assignment at one
depth position) to a list of local superoperator factors applied in order.
Factored application keeps the cost at O(4^n) per factor instead of
materializing 4^n x 4^n layer matrices.  Circuit outcome distributions are
computed exactly and then sampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_probability
from .channels import (
    apply_superop,
    depolarizing_superop,
    outcome_probabilities,
    unitary_from_hamiltonian,
    unitary_superop,
    zero_state_vec,
)
from .data import Dataset
from .design import ExperimentPlan, GateRegistry, default_registry
from .regions import DeviceLayout

__all__ = [
    "ComputationalPOVM",
    "EffectsPOVM",
    "ErrorModel",
    "crosstalk_free_model",
    "operation_crosstalk_depolarizing",
    "operation_crosstalk_coherent",
    "detection_crosstalk",
    "ladder_crosstalk_model",
    "simulate_circuit",
    "run_plan",
]

MAX_QUBITS = 8

_PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_PAULI_Z = np.diag([1.0, -1.0]).astype(complex)

_ATOL = 1e-10


class ComputationalPOVM:
    """Ideal measurement of every qubit in the computational basis."""

    def probabilities(self, state: np.ndarray, n_qubits: int) -> np.ndarray:
        return outcome_probabilities(state, n_qubits)


class EffectsPOVM:
    """Explicit effect operators indexed by the global outcome integer."""

    def __init__(self, effects):
        self.effects = [np.asarray(e, dtype=complex) for e in effects]
        d = self.effects[0].shape[0]
        total = sum(self.effects)
        if np.max(np.abs(total - np.eye(d))) > _ATOL:
            raise ValueError("POVM effects do not sum to the identity")
        for i, e in enumerate(self.effects):
            if np.max(np.abs(e - e.conj().T)) > _ATOL:
                raise ValueError(f"POVM effect {i} is not Hermitian")
            if np.linalg.eigvalsh(e)[0] < -_ATOL:
                raise ValueError(f"POVM effect {i} is not positive semidefinite")

    def probabilities(self, state: np.ndarray, n_qubits: int) -> np.ndarray:
        d = 2 ** n_qubits
        rho = state.reshape(d, d)
        return np.array([float(np.real(np.trace(e @ rho))) for e in self.effects])


@dataclass(eq=False)
class ErrorModel:
    """Preparation, per-layer channel factors, and measurement for n qubits.

    ``layer_factors`` maps a layer spec, a tuple of (region qubits, gate
    name) pairs, to the ordered list of (qubits, superoperator) factors that
    implement the layer.  Results are cached per layer spec.
    """

    n_qubits: int
    layer_factors: object
    povm: object = field(default_factory=ComputationalPOVM)
    prep: np.ndarray | None = None
    registry: GateRegistry = field(default_factory=default_registry)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}] for dense simulation")
        if self.prep is not None:
            d = 2 ** self.n_qubits
            rho = np.asarray(self.prep, dtype=complex).reshape(d, d)
            if abs(np.trace(rho) - 1.0) > _ATOL:
                raise ValueError("preparation state must have unit trace")
            if np.linalg.eigvalsh((rho + rho.conj().T) / 2.0)[0] < -_ATOL:
                raise ValueError("preparation state must be positive semidefinite")

    def initial_state(self) -> np.ndarray:
        if self.prep is None:
            return zero_state_vec(self.n_qubits)
        return np.asarray(self.prep, dtype=complex).reshape((2,) * (2 * self.n_qubits)).copy()

    def factors(self, layer) -> list:
        cached = self._cache.get(layer)
        if cached is None:
            cached = self.layer_factors(layer)
            self._cache[layer] = cached
        return cached


def _gate_superops(registry: GateRegistry) -> dict:
    cache: dict = {}

    def get(name: str) -> np.ndarray:
        sop = cache.get(name)
        if sop is None:
            sop = unitary_superop(registry.unitary(name))
            cache[name] = sop
        return sop

    return get


def _local_noise_factors(layer, registry: GateRegistry, p_gate: float, p_idle: float):
    """Single-qubit depolarization after every gate; idles may use their own rate."""
    factors = []
    gate_noise = depolarizing_superop(p_gate) if p_gate > 0 else None
    idle_noise = depolarizing_superop(p_idle) if p_idle > 0 else None
    for qubits, gate in layer:
        for pos, q in enumerate(qubits):
            noise = idle_noise if registry.is_idle_at(gate, pos) else gate_noise
            if noise is not None:
                factors.append(((q,), noise))
    return factors


def _check_qubit(name: str, q: int, n_qubits: int) -> int:
    if not 0 <= q < n_qubits:
        raise ValueError(f"{name} qubit {q} outside [0, {n_qubits})")
    return int(q)


def crosstalk_free_model(n_qubits: int, p_local: float = 0.0,
                         registry: GateRegistry | None = None) -> ErrorModel:
    """Tensor-product model: ideal gates, each followed by local depolarization.

    Every layer factorizes across regions and every local gate acts
    identically in every layer, so this model is the crosstalk-free
    baseline.
    """
    check_probability("p_local", p_local)
    registry = registry or default_registry()
    gate_sop = _gate_superops(registry)

    def factors(layer):
        out = [(qubits, gate_sop(gate)) for qubits, gate in layer]
        out += _local_noise_factors(layer, registry, p_local, p_local)
        return out

    return ErrorModel(n_qubits=n_qubits, layer_factors=factors, registry=registry)


def operation_crosstalk_depolarizing(n_qubits: int, source: int, target: int,
                                     p_crosstalk: float, p_local: float = 0.0,
                                     registry: GateRegistry | None = None) -> ErrorModel:
    """Half-X gates on ``source`` depolarize ``target`` at rate ``p_crosstalk``.

    All other behavior matches the crosstalk-free baseline; p_crosstalk=0
    reduces to it exactly.
    """
    check_probability("p_crosstalk", p_crosstalk)
    check_probability("p_local", p_local)
    source = _check_qubit("source", source, n_qubits)
    target = _check_qubit("target", target, n_qubits)
    if source == target:
        raise ValueError("source and target qubits must differ")
    registry = registry or default_registry()
    gate_sop = _gate_superops(registry)
    extra = depolarizing_superop(p_crosstalk)

    def factors(layer):
        out = [(qubits, gate_sop(gate)) for qubits, gate in layer]
        if p_crosstalk > 0:
            for qubits, gate in layer:
                if source in qubits and registry.local_name(gate, qubits.index(source)) == "Xhalf":
                    out.append(((target,), extra))
                    break
        out += _local_noise_factors(layer, registry, p_local, p_local)
        return out

    return ErrorModel(n_qubits=n_qubits, layer_factors=factors, registry=registry)


def operation_crosstalk_coherent(n_qubits: int, source: int, target: int,
                                 zz_angle: float, p_local: float = 0.0,
                                 registry: GateRegistry | None = None) -> ErrorModel:
    """Half-X gates on ``source`` carry a weak ZZ rotation onto ``target``.

    When the source region runs Xhalf, its ideal map is replaced by the
    joint two-qubit unitary exp(-i/2 [pi/2 X(x)I + zz_angle/2 Z(x)Z]) on
    (source, target).  The substitution fires whenever the source runs
    Xhalf, regardless of what the target region runs in that layer; the
    target's own gate is applied first.  At zz_angle=0 the joint unitary is
    exactly Xhalf on the source.
    """
    check_probability("p_local", p_local)
    source = _check_qubit("source", source, n_qubits)
    target = _check_qubit("target", target, n_qubits)
    if source == target:
        raise ValueError("source and target qubits must differ")
    registry = registry or default_registry()
    gate_sop = _gate_superops(registry)
    generator = 0.5 * (np.pi / 2.0) * np.kron(_PAULI_X, np.eye(2)) \
        + 0.5 * (zz_angle / 2.0) * np.kron(_PAULI_Z, _PAULI_Z)
    joint = unitary_superop(unitary_from_hamiltonian(generator))

    def factors(layer):
        out = []
        fired = False
        for qubits, gate in layer:
            if qubits == (source,) and gate == "Xhalf":
                fired = True
                continue
            out.append((qubits, gate_sop(gate)))
        if fired:
            out.append(((source, target), joint))
        out += _local_noise_factors(layer, registry, p_local, p_local)
        return out

    return ErrorModel(n_qubits=n_qubits, layer_factors=factors, registry=registry)


def detection_crosstalk(flip_prob: float, p_local: float = 0.0,
                        registry: GateRegistry | None = None) -> ErrorModel:
    """Two-qubit readout crosstalk: a |1> on qubit 0 flips qubit 1's bit.

    Gates follow the crosstalk-free baseline; the POVM reports outcome 1x
    with the second bit flipped with probability ``flip_prob``.
    """
    check_probability("flip_prob", flip_prob)
    check_probability("p_local", p_local)
    registry = registry or default_registry()
    gate_sop = _gate_superops(registry)

    def proj(i: int) -> np.ndarray:
        e = np.zeros((4, 4), dtype=complex)
        e[i, i] = 1.0
        return e

    effects = [
        proj(0b00),
        proj(0b01),
        (1.0 - flip_prob) * proj(0b10) + flip_prob * proj(0b11),
        (1.0 - flip_prob) * proj(0b11) + flip_prob * proj(0b10),
    ]

    def factors(layer):
        out = [(qubits, gate_sop(gate)) for qubits, gate in layer]
        out += _local_noise_factors(layer, registry, p_local, p_local)
        return out

    return ErrorModel(n_qubits=2, layer_factors=factors, povm=EffectsPOVM(effects),
                      registry=registry)


def ladder_crosstalk_model(layout: DeviceLayout, p_crosstalk: float,
                           p_local: float = 0.0, p_idle_error: float = 0.0,
                           registry: GateRegistry | None = None) -> ErrorModel:
    """Six-qubit ladder with bottom-row gates depolarizing vertical neighbors.

    Any non-idle single-qubit gate on qubits 3, 4, 5 composes an extra
    depolarization at rate ``p_crosstalk`` on qubits 0, 1, 2 respectively.
    Non-idle gates are followed by depolarization at ``p_local`` and idles
    at ``p_idle_error``.
    """
    check_probability("p_crosstalk", p_crosstalk)
    check_probability("p_local", p_local)
    check_probability("p_idle_error", p_idle_error)
    if layout != DeviceLayout.ladder(3):
        raise ValueError("this model is defined on the 2x3 ladder layout")
    registry = registry or default_registry()
    gate_sop = _gate_superops(registry)
    extra = depolarizing_superop(p_crosstalk)
    idle_1q = registry.idle_name(1)

    def factors(layer):
        out = [(qubits, gate_sop(gate)) for qubits, gate in layer]
        if p_crosstalk > 0:
            for qubits, gate in layer:
                for pos, q in enumerate(qubits):
                    if q < 3:
                        continue
                    local = registry.local_name(gate, pos)
                    if local is not None and local != idle_1q:
                        out.append(((q - 3,), extra))
        out += _local_noise_factors(layer, registry, p_local, p_idle_error)
        return out

    return ErrorModel(n_qubits=6, layer_factors=factors, registry=registry)


def circuit_layers(plan: ExperimentPlan, circuit_index: int, registry: GateRegistry):
    """The layer specs of one plan circuit: depth tuples of (qubits, gate)."""
    region_layers = [
        plan.subcircuit_layers(circuit_index, m, registry)
        for m in range(plan.n_regions)
    ]
    qubit_tuples = [r.qubits for r in plan.partition.regions]
    return [
        tuple((qubit_tuples[m], region_layers[m][t]) for m in range(plan.n_regions))
        for t in range(plan.params.depth)
    ]


def simulate_circuit(model: ErrorModel, layers) -> np.ndarray:
    """Exact outcome distribution of one circuit under the model."""
    state = model.initial_state()
    n = model.n_qubits
    for layer in layers:
        for qubits, sop in model.factors(layer):
            state = apply_superop(state, sop, qubits, n)
    probs = model.povm.probabilities(state, n)
    total = probs.sum()
    if abs(total - 1.0) > _ATOL or probs.min() < -_ATOL:
        raise RuntimeError("simulated outcome distribution is not normalized")
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def run_plan(model: ErrorModel, plan: ExperimentPlan, rng_seed=None) -> Dataset:
    """Simulate every circuit of a plan and sample its repetitions.

    Each circuit's exact distribution is computed once and sampled
    ``n_reps`` times with a per-circuit random stream derived from the
    master seed, so results do not depend on simulation order.
    """
    if model.n_qubits != plan.n_qubits:
        raise ValueError(
            f"model has {model.n_qubits} qubits but plan targets {plan.n_qubits}"
        )
    if isinstance(rng_seed, np.random.Generator):
        raise TypeError("run_plan needs an integer seed or SeedSequence, not a Generator, "
                        "so per-circuit streams can be derived reproducibly")
    n_out = 2 ** model.n_qubits
    seed = int(rng_seed) if isinstance(rng_seed, (int, np.integer)) else None
    root = rng_seed if isinstance(rng_seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(plan.n_circuits)

    outcomes = np.zeros((plan.n_circuits, plan.params.n_reps), dtype=np.uint8)
    for c in range(plan.n_circuits):
        probs = simulate_circuit(model, circuit_layers(plan, c, model.registry))
        rng = np.random.default_rng(children[c])
        outcomes[c] = rng.choice(n_out, size=plan.params.n_reps, p=probs).astype(np.uint8)

    params = {
        "depth": plan.params.depth,
        "bag_size": plan.params.bag_size,
        "n_contexts": plan.params.n_contexts,
        "p_idle_context": plan.params.p_idle_context,
        "n_reps": plan.params.n_reps,
        "design_seed": plan.seed,
        "simulate_seed": seed,
    }
    return Dataset(
        regions=tuple(r.qubits for r in plan.partition.regions),
        settings=plan.settings_matrix(),
        outcomes=outcomes,
        schedule_mode=plan.params.schedule,
        schedule_order=None if plan.schedule_order is None else plan.schedule_order.copy(),
        params=params,
        seed=seed,
    )
