"""Randomized experiment plans for crosstalk detection.

Each region of a partition gets a *bag* of random fixed-depth subcircuits.
The plan iterates every bag entry as a target while the other regions run
randomly drawn context subcircuits, with the all-idle subcircuit boosted by
a configurable probability.  The analysis later treats the bag index run on
each region as that region's categorical *setting*.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ._validation import as_rng, check_positive_int, check_probability
from .regions import Partition, Region

__all__ = [
    "IDLE_SETTING",
    "ConfigurationError",
    "GateRegistry",
    "default_registry",
    "Subcircuit",
    "PlanParams",
    "ExperimentPlan",
    "sample_bag",
    "build_plan",
    "default_params",
]

# Setting value reserved for the idle context subcircuit, distinct from any
# bag index.
IDLE_SETTING = -1

_SQRT2 = np.sqrt(2.0)

_XHALF = np.array([[1.0, -1.0j], [-1.0j, 1.0]]) / _SQRT2
_YHALF = np.array([[1.0, -1.0], [1.0, 1.0]]) / _SQRT2
_EYE2 = np.eye(2, dtype=complex)
_CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)


class ConfigurationError(ValueError):
    """A gate registry or plan configuration that cannot be used."""


class GateRegistry:
    """Named gate unitaries, keyed by the region size they act on.

    ``components`` maps a multi-qubit gate name to its per-qubit factor
    names when the gate is a tensor product of single-qubit gates; genuinely
    entangling gates map to ``None``.
    """

    def __init__(self, unitaries: dict, idle_names: dict, components: dict | None = None):
        self._unitaries = {name: np.asarray(u, dtype=complex) for name, u in unitaries.items()}
        self._idle_names = dict(idle_names)
        self._components = dict(components or {})
        self._by_size: dict = {}
        for name, u in self._unitaries.items():
            dim = u.shape[0]
            size = int(np.log2(dim))
            if u.shape != (dim, dim) or 2 ** size != dim:
                raise ConfigurationError(f"gate {name!r} has non-qubit shape {u.shape}")
            self._by_size.setdefault(size, []).append(name)
        for size, names in self._by_size.items():
            names.sort()
        for size, idle in self._idle_names.items():
            if idle not in self._unitaries:
                raise ConfigurationError(f"idle gate {idle!r} for size {size} is not registered")

    def names_for_size(self, size: int) -> tuple:
        return tuple(self._by_size.get(size, ()))

    def unitary(self, name: str) -> np.ndarray:
        try:
            return self._unitaries[name]
        except KeyError:
            raise ConfigurationError(f"gate {name!r} is not registered") from None

    def size_of(self, name: str) -> int:
        return int(np.log2(self.unitary(name).shape[0]))

    def idle_name(self, size: int) -> str:
        try:
            return self._idle_names[size]
        except KeyError:
            raise ConfigurationError(f"no idle gate registered for region size {size}") from None

    def local_name(self, name: str, position: int) -> str | None:
        """Single-qubit gate acting at ``position`` within ``name``, if defined."""
        if self.size_of(name) == 1:
            return name
        comps = self._components.get(name)
        return None if comps is None else comps[position]

    def is_idle_at(self, name: str, position: int) -> bool:
        local = self.local_name(name, position)
        return local is not None and local == self._idle_names.get(1)


def default_registry() -> GateRegistry:
    """Idle and half-rotation gates for 1-regions; their products plus a
    controlled-Z for 2-regions."""
    ones = {"I": _EYE2, "Xhalf": _XHALF, "Yhalf": _YHALF}
    unitaries = dict(ones)
    components = {}
    for a, b in itertools.product(ones, ones):
        name = f"{a}:{b}"
        unitaries[name] = np.kron(ones[a], ones[b])
        components[name] = (a, b)
    unitaries["CZ"] = _CZ
    components["CZ"] = None
    return GateRegistry(unitaries, {1: "I", 2: "I:I"}, components)


_DEFAULT_REGISTRY = default_registry()


@dataclass(frozen=True)
class Subcircuit:
    """A fixed-depth sequence of gate names applied to one region."""

    region: Region
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    def __len__(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class PlanParams:
    """Knobs of the lightweight experiment design.

    depth:            number of layers in every subcircuit
    bag_size:         subcircuits drawn per region
    n_contexts:       random contexts each target subcircuit is run in
    p_idle_context:   probability a context draw is replaced by all-idle
    n_reps:           repetitions of every scheduled circuit
    schedule:         "rasterized" (round-robin repetitions) or "randomized"
    """

    depth: int
    bag_size: int
    n_contexts: int
    p_idle_context: float = 0.0
    n_reps: int = 1000
    schedule: str = "rasterized"

    def __post_init__(self):
        check_positive_int("depth", self.depth)
        check_positive_int("bag_size", self.bag_size)
        check_positive_int("n_contexts", self.n_contexts)
        check_positive_int("n_reps", self.n_reps)
        check_probability("p_idle_context", self.p_idle_context)
        if self.schedule not in ("rasterized", "randomized"):
            raise ValueError(f"schedule must be 'rasterized' or 'randomized', got {self.schedule!r}")


def default_params(n_regions: int, signal_regime: str = "low", bag_size: int = 20,
                   depth: int = 20, n_reps: int = 1000, idle_is_quiet: bool = True) -> PlanParams:
    """Reasonable defaults given the region count and expected signal regime.

    In the low signal-to-noise regime (crosstalk comparable to local errors)
    each target runs in ``bag_size / 2`` contexts; in the high regime
    ``bag_size / 4`` suffices.  When the idle is the least noisy operation,
    idle boosting with probability ``1 / n_regions`` is recommended.
    ``n_reps`` should be as large as feasible and no less than 1000.
    """
    check_positive_int("n_regions", n_regions)
    if signal_regime not in ("low", "high"):
        raise ValueError(f"signal_regime must be 'low' or 'high', got {signal_regime!r}")
    if n_regions == 1:
        warnings.warn("a single-region plan has no contexts to vary; it cannot witness crosstalk")
    n_contexts = max(1, bag_size // (2 if signal_regime == "low" else 4))
    p_idle = 1.0 / n_regions if idle_is_quiet else 0.0
    return PlanParams(
        depth=depth,
        bag_size=bag_size,
        n_contexts=n_contexts,
        p_idle_context=p_idle,
        n_reps=max(1000, n_reps),
    )


def sample_bag(region: Region, depth: int, bag_size: int, rng_seed=None,
               registry: GateRegistry = _DEFAULT_REGISTRY, max_retries: int = 100) -> list:
    """Draw ``bag_size`` depth-``depth`` subcircuits uniformly at random.

    The whole bag is redrawn (up to ``max_retries`` times) until every
    registered gate for the region size appears in at least one subcircuit.
    """
    check_positive_int("depth", depth)
    check_positive_int("bag_size", bag_size)
    gates = registry.names_for_size(len(region))
    if not gates:
        raise ConfigurationError(f"no gates registered for region size {len(region)}")
    if len(gates) > depth * bag_size:
        raise ConfigurationError(
            f"{len(gates)} gates cannot all appear in {bag_size} subcircuits of depth {depth}"
        )
    rng = as_rng(rng_seed)
    for _ in range(max_retries):
        draws = rng.integers(len(gates), size=(bag_size, depth))
        if len(np.unique(draws)) == len(gates):
            return [Subcircuit(region, tuple(gates[g] for g in row)) for row in draws]
    raise ConfigurationError(f"could not cover all gates in {max_retries} bag draws")


def _sample_assignments(n_regions: int, bag_size: int, n_contexts: int,
                        p_idle_context: float, rng: np.random.Generator):
    """Raw per-circuit setting assignments, before duplicate removal.

    Yields one tuple of per-region bag indices (or IDLE_SETTING) for each
    (target region, target subcircuit, context) triple.
    """
    for target in range(n_regions):
        for nu in range(bag_size):
            for _ in range(n_contexts):
                assign = [0] * n_regions
                assign[target] = nu
                for k in range(n_regions):
                    if k == target:
                        continue
                    if rng.random() < p_idle_context:
                        assign[k] = IDLE_SETTING
                    else:
                        assign[k] = int(rng.integers(bag_size))
                yield tuple(assign)


@dataclass(frozen=True, eq=False)
class ExperimentPlan:
    """All scheduled circuits for one partition.

    ``circuits`` holds one tuple of per-region bag indices per unique
    circuit; ``IDLE_SETTING`` marks the reserved all-idle context.  The
    schedule pairs a circuit index with a repetition index; rasterized
    schedules are stored implicitly.
    """

    partition: Partition
    params: PlanParams
    bags: tuple
    circuits: tuple
    seed: int | None = None
    schedule_order: np.ndarray | None = None

    def __post_init__(self):
        if len(self.bags) != len(self.partition):
            raise ValueError("one bag per region is required")
        if any(len(c) != len(self.partition) for c in self.circuits):
            raise ValueError("every circuit must assign one subcircuit per region")
        if len(set(self.circuits)) != len(self.circuits):
            raise ValueError("plan circuits contain duplicates")
        limit = len(self.partition) * self.params.bag_size * self.params.n_contexts
        if len(self.circuits) > limit:
            raise ValueError("plan holds more circuits than targets x contexts allow")

    @property
    def n_qubits(self) -> int:
        return self.partition.n_qubits

    @property
    def n_regions(self) -> int:
        return len(self.partition)

    @property
    def n_circuits(self) -> int:
        return len(self.circuits)

    def idle_layers(self, region_index: int, registry: GateRegistry = _DEFAULT_REGISTRY) -> tuple:
        size = len(self.partition.regions[region_index])
        return (registry.idle_name(size),) * self.params.depth

    def subcircuit_layers(self, circuit_index: int, region_index: int,
                          registry: GateRegistry = _DEFAULT_REGISTRY) -> tuple:
        setting = self.circuits[circuit_index][region_index]
        if setting == IDLE_SETTING:
            return self.idle_layers(region_index, registry)
        return self.bags[region_index][setting].layers

    def iter_schedule(self):
        """Yield (circuit index, repetition index) pairs in execution order."""
        if self.schedule_order is not None:
            for c, r in self.schedule_order:
                yield int(c), int(r)
        else:
            for r in range(self.params.n_reps):
                for c in range(self.n_circuits):
                    yield c, r

    def settings_matrix(self) -> np.ndarray:
        return np.array(self.circuits, dtype=np.int32).reshape(self.n_circuits, self.n_regions)

    def to_json(self) -> str:
        doc = {
            "n_qubits": self.n_qubits,
            "partition": self.partition.to_lists(),
            "params": {**asdict(self.params), "rng_seed": self.seed},
            "bags": [[list(sc.layers) for sc in bag] for bag in self.bags],
            "circuits": [list(c) for c in self.circuits],
            "schedule": [[c, r] for c, r in self.iter_schedule()],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentPlan":
        doc = json.loads(text)
        params = {k: v for k, v in doc["params"].items() if k != "rng_seed"}
        partition = Partition(doc["n_qubits"], tuple(Region(tuple(r)) for r in doc["partition"]))
        bags = tuple(
            tuple(Subcircuit(region, tuple(layers)) for layers in bag)
            for region, bag in zip(partition.regions, doc["bags"])
        )
        plan = cls(
            partition=partition,
            params=PlanParams(**params),
            bags=bags,
            circuits=tuple(tuple(c) for c in doc["circuits"]),
            seed=doc["params"].get("rng_seed"),
            schedule_order=np.array(doc["schedule"], dtype=np.int64).reshape(-1, 2),
        )
        return plan

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def build_plan(partition: Partition, params: PlanParams, rng_seed=None,
               registry: GateRegistry = _DEFAULT_REGISTRY) -> ExperimentPlan:
    """Generate the full experiment plan for one partition.

    Bags are sampled first, then every bag entry of every region is iterated
    as a target in ``n_contexts`` random contexts.  Circuits that assign
    identical gate sequences to every region are deduplicated, keeping first
    occurrences.  The schedule rasterizes repetitions so that repetition r of
    every circuit precedes repetition r+1 of any circuit; ``randomized``
    shuffles all (circuit, repetition) pairs instead.
    """
    if len(partition) == 0:
        raise ValueError("partition has no regions")
    rng = as_rng(rng_seed)
    seed = rng_seed if isinstance(rng_seed, (int, np.integer)) else None

    bags = tuple(
        tuple(sample_bag(region, params.depth, params.bag_size, rng, registry))
        for region in partition.regions
    )

    def content(assign):
        return tuple(
            bags[k][idx].layers if idx != IDLE_SETTING else
            (registry.idle_name(len(partition.regions[k])),) * params.depth
            for k, idx in enumerate(assign)
        )

    circuits = []
    seen = set()
    for assign in _sample_assignments(len(partition), params.bag_size,
                                      params.n_contexts, params.p_idle_context, rng):
        key = content(assign)
        if key not in seen:
            seen.add(key)
            circuits.append(assign)

    schedule_order = None
    if params.schedule == "randomized":
        pairs = np.array(
            [(c, r) for r in range(params.n_reps) for c in range(len(circuits))],
            dtype=np.int64,
        )
        rng.shuffle(pairs, axis=0)
        schedule_order = pairs

    return ExperimentPlan(
        partition=partition,
        params=params,
        bags=bags,
        circuits=tuple(circuits),
        seed=seed,
        schedule_order=schedule_order,
    )
