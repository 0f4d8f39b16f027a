"""Device layouts, regions, and randomized qubit partitioning.

A *region* is a set of one or two qubits that experiments treat as an
independent unit.  A *partition* splits every qubit of a device into
disjoint regions.  Crosstalk tests iterate over collections of partitions
that together expose every pair of 2-regions at least once.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_rng, check_probability

__all__ = [
    "DeviceLayout",
    "Region",
    "Partition",
    "PartitionSet",
    "one_partition",
    "enumerate_two_regions",
    "random_two_partition",
    "partition_cover",
    "cover_size",
]


def _norm_edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class DeviceLayout:
    """An n-qubit device with the qubit pairs that support 2-qubit gates.

    ``coupling_edges`` holds unordered index pairs; a 2-region is only
    allowed on a pair that appears here.
    """

    n_qubits: int
    coupling_edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        edges = frozenset(_norm_edge(int(a), int(b)) for a, b in self.coupling_edges)
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-loop edge ({a}, {b}) is not allowed")
            if not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                raise ValueError(f"edge ({a}, {b}) references a qubit outside [0, {self.n_qubits})")
        object.__setattr__(self, "coupling_edges", edges)

    @classmethod
    def fully_connected(cls, n_qubits: int) -> "DeviceLayout":
        return cls(n_qubits, frozenset(itertools.combinations(range(n_qubits), 2)))

    @classmethod
    def linear(cls, n_qubits: int) -> "DeviceLayout":
        return cls(n_qubits, frozenset((q, q + 1) for q in range(n_qubits - 1)))

    @classmethod
    def ladder(cls, n_columns: int) -> "DeviceLayout":
        """A 2 x n_columns grid: qubits 0..n-1 on the top row, n..2n-1 below."""
        top = range(n_columns)
        edges = set()
        for q in top:
            if q + 1 < n_columns:
                edges.add((q, q + 1))
                edges.add((n_columns + q, n_columns + q + 1))
            edges.add((q, n_columns + q))
        return cls(2 * n_columns, frozenset(edges))

    @property
    def is_fully_connected(self) -> bool:
        return len(self.coupling_edges) == self.n_qubits * (self.n_qubits - 1) // 2

    def allows_pair(self, a: int, b: int) -> bool:
        return _norm_edge(a, b) in self.coupling_edges


@dataclass(frozen=True, order=True)
class Region:
    """A sorted tuple of one or two qubit indices."""

    qubits: tuple

    def __post_init__(self):
        qubits = tuple(int(q) for q in self.qubits)
        if len(qubits) not in (1, 2):
            raise ValueError(f"a region holds 1 or 2 qubits, got {qubits}")
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"region qubits must be distinct, got {qubits}")
        object.__setattr__(self, "qubits", tuple(sorted(qubits)))

    def __len__(self) -> int:
        return len(self.qubits)

    def __iter__(self):
        return iter(self.qubits)


@dataclass(frozen=True)
class Partition:
    """Disjoint regions that together cover every qubit of the device."""

    n_qubits: int
    regions: tuple

    def __post_init__(self):
        regions = tuple(r if isinstance(r, Region) else Region(tuple(r)) for r in self.regions)
        regions = tuple(sorted(regions, key=lambda r: r.qubits))
        covered = [q for r in regions for q in r.qubits]
        if len(covered) != len(set(covered)):
            raise ValueError("partition regions overlap")
        if set(covered) != set(range(self.n_qubits)):
            raise ValueError(f"partition does not cover exactly qubits 0..{self.n_qubits - 1}")
        object.__setattr__(self, "regions", regions)

    def __len__(self) -> int:
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    def two_regions(self) -> tuple:
        return tuple(r for r in self.regions if len(r) == 2)

    def validate_against(self, layout: DeviceLayout) -> None:
        if self.n_qubits != layout.n_qubits:
            raise ValueError("partition and layout disagree on qubit count")
        for region in self.regions:
            if len(region) == 2 and not layout.allows_pair(*region.qubits):
                raise ValueError(f"region {region.qubits} is not an allowed 2-region")

    def to_lists(self) -> list:
        return [list(r.qubits) for r in self.regions]


@dataclass(frozen=True)
class PartitionSet:
    """A collection of partitions of the same device."""

    n_qubits: int
    partitions: tuple

    def __post_init__(self):
        for p in self.partitions:
            if p.n_qubits != self.n_qubits:
                raise ValueError("all partitions in a set must share n_qubits")

    def __len__(self) -> int:
        return len(self.partitions)

    def __iter__(self):
        return iter(self.partitions)

    def to_json(self) -> str:
        doc = {"n": self.n_qubits, "partitions": [p.to_lists() for p in self.partitions]}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PartitionSet":
        doc = json.loads(text)
        parts = tuple(Partition(doc["n"], tuple(Region(tuple(r)) for r in p)) for p in doc["partitions"])
        return cls(doc["n"], parts)


def one_partition(layout: DeviceLayout) -> Partition:
    """The unique partition of the device into single-qubit regions."""
    return Partition(layout.n_qubits, tuple(Region((q,)) for q in range(layout.n_qubits)))


def enumerate_two_regions(layout: DeviceLayout) -> list:
    """Every allowed 2-region, i.e. one region per coupling edge, sorted."""
    return [Region(e) for e in sorted(layout.coupling_edges)]


def _partition_from_matching(n_qubits: int, matching) -> Partition:
    matched = {q for e in matching for q in e}
    regions = [Region(e) for e in matching]
    regions += [Region((q,)) for q in range(n_qubits) if q not in matched]
    return Partition(n_qubits, tuple(regions))


def _sample_complete_matching(n_qubits: int, rng: np.random.Generator) -> list:
    """Uniform (near-)perfect matching of the complete graph.

    Pairing the lowest unmatched qubit with a uniform pick among the rest is
    exactly uniform over perfect matchings; for odd n the unmatched qubit is
    drawn uniformly first.
    """
    pool = list(range(n_qubits))
    if n_qubits % 2 == 1:
        lone = int(rng.integers(n_qubits))
        pool.remove(lone)
    matching = []
    while pool:
        a = pool.pop(0)
        b = pool.pop(int(rng.integers(len(pool))))
        matching.append((a, b))
    return matching


_MAX_MAXIMAL_MATCHINGS = 500_000
_maximal_matching_cache: dict = {}


def _enumerate_maximal_matchings(layout: DeviceLayout) -> tuple:
    """All maximal matchings of the coupling graph, as sorted edge tuples.

    Branch on the smallest undecided vertex: match it along each available
    edge, or exclude it outright.  A leaf is kept only when no coupling edge
    has both endpoints unmatched, which is exactly maximality.
    """
    cached = _maximal_matching_cache.get(layout)
    if cached is not None:
        return cached

    edges = sorted(layout.coupling_edges)
    neighbors = {q: [] for q in range(layout.n_qubits)}
    for a, b in edges:
        neighbors[a].append(b)
        neighbors[b].append(a)

    results = []

    def recurse(matched: set, excluded: set, matching: list):
        if len(results) > _MAX_MAXIMAL_MATCHINGS:
            raise RuntimeError("too many maximal matchings to enumerate for this layout")
        pivot = None
        for q in range(layout.n_qubits):
            if q in matched or q in excluded:
                continue
            if any(u not in matched for u in neighbors[q]):
                pivot = q
                break
        if pivot is None:
            # maximal iff every edge touches a matched qubit
            if all(a in matched or b in matched for a, b in edges):
                results.append(tuple(sorted(matching)))
            return
        for u in neighbors[pivot]:
            if u in matched or u in excluded:
                continue
            matching.append(_norm_edge(pivot, u))
            matched.update((pivot, u))
            recurse(matched, excluded, matching)
            matched.difference_update((pivot, u))
            matching.pop()
        # leave the pivot unmatched; an unmatched neighbor later kills the leaf
        if not any(u in excluded and u not in matched for u in neighbors[pivot]):
            excluded.add(pivot)
            recurse(matched, excluded, matching)
            excluded.remove(pivot)

    recurse(set(), set(), [])
    out = tuple(sorted(set(results)))
    _maximal_matching_cache[layout] = out
    return out


def random_two_partition(layout: DeviceLayout, rng_seed=None) -> Partition:
    """A uniformly random 2-partition of the device.

    Fully connected layouts draw a uniform perfect matching (one singleton
    region remains for odd n).  Constrained layouts draw uniformly over the
    maximal matchings of the coupling graph, with unmatched qubits emitted
    as 1-regions.  A layout with no edges yields the 1-partition.
    """
    rng = as_rng(rng_seed)
    if not layout.coupling_edges:
        return one_partition(layout)
    if layout.is_fully_connected:
        matching = _sample_complete_matching(layout.n_qubits, rng)
    else:
        options = _enumerate_maximal_matchings(layout)
        matching = options[int(rng.integers(len(options)))]
    return _partition_from_matching(layout.n_qubits, matching)


def cover_size(layout: DeviceLayout, epsilon: float) -> int:
    """Number of random 2-partitions needed to cover all 2-region pairs.

    Evaluates ceil(n^2 (2 ln R - ln eps)) with R the number of allowed
    2-regions; natural logarithms throughout.
    """
    check_probability("epsilon", epsilon)
    if epsilon == 0.0 or epsilon == 1.0:
        raise ValueError("epsilon must lie strictly inside (0, 1)")
    n_regions = len(layout.coupling_edges)
    if n_regions < 2:
        return 0
    n = layout.n_qubits
    return math.ceil(n * n * (2.0 * math.log(n_regions) - math.log(epsilon)))


def _disjoint_region_pairs(layout: DeviceLayout):
    regions = enumerate_two_regions(layout)
    for r1, r2 in itertools.combinations(regions, 2):
        if not set(r1.qubits) & set(r2.qubits):
            yield r1, r2


def _complete_partition(layout: DeviceLayout, fixed_regions) -> Partition:
    """Extend fixed 2-regions to a full partition, greedily matching the rest."""
    used = {q for r in fixed_regions for q in r.qubits}
    regions = list(fixed_regions)
    for a, b in sorted(layout.coupling_edges):
        if a not in used and b not in used:
            regions.append(Region((a, b)))
            used.update((a, b))
    regions += [Region((q,)) for q in range(layout.n_qubits) if q not in used]
    return Partition(layout.n_qubits, tuple(regions))


def partition_cover(layout: DeviceLayout, epsilon: float = 0.05, rng_seed=None,
                    mode: str = "random") -> PartitionSet:
    """A set of 2-partitions that covers every disjoint pair of 2-regions.

    ``mode="random"`` draws the randomized-bound number of independent
    uniform 2-partitions, which covers every pair except with probability at
    most ``epsilon``.  ``mode="brute"`` deterministically emits one partition
    per disjoint pair of allowed 2-regions, guaranteeing coverage.
    """
    if mode not in ("random", "brute"):
        raise ValueError(f"mode must be 'random' or 'brute', got {mode!r}")
    if mode == "random":
        size = cover_size(layout, epsilon)
        if layout.n_qubits < 4:
            warnings.warn("the randomized cover bound is not meaningful below 4 qubits")
        if not layout.is_fully_connected:
            warnings.warn(
                "coverage bound is heuristic for constrained connectivity; "
                "consider mode='brute' for a deterministic guarantee"
            )
        rng = as_rng(rng_seed)
        parts = tuple(random_two_partition(layout, rng) for _ in range(size))
        return PartitionSet(layout.n_qubits, parts)

    parts = []
    seen = set()
    for r1, r2 in _disjoint_region_pairs(layout):
        partition = _complete_partition(layout, (r1, r2))
        key = tuple(r.qubits for r in partition.regions)
        if key not in seen:
            seen.add(key)
            parts.append(partition)
    return PartitionSet(layout.n_qubits, tuple(parts))
