"""Settings/results datasets and their categorical views.

A trial record is one repetition of one circuit: the per-region setting
labels plus the measured bit string of every region.  Datasets store the
per-circuit outcome samples compactly and expand to records only for
line-delimited JSON serialization, which is also the ingestion contract for
hardware data.  Statistical analysis runs on a ``CellTable``: the weighted
contingency cells of all settings/results variables, which carry exactly
the same counts as the raw records.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

__all__ = ["VariableSpec", "Dataset", "CellTable", "DataFormatError", "setting_id", "result_id"]


class DataFormatError(ValueError):
    """A dataset file or record stream that violates the format contract."""


def setting_id(region_index: int) -> str:
    return f"S{region_index}"


def result_id(region_index: int) -> str:
    return f"R{region_index}"


@dataclass(frozen=True)
class VariableSpec:
    """One analysis variable: a region's setting label or measured result.

    ``cardinality`` is the size of the variable's value set: the number of
    distinct settings realized by the design, or 2^k for a k-qubit region's
    result.
    """

    id: str
    kind: str
    region: int
    cardinality: int

    def __post_init__(self):
        if self.kind not in ("setting", "result"):
            raise ValueError(f"kind must be 'setting' or 'result', got {self.kind!r}")
        if self.cardinality < 1:
            raise ValueError("cardinality must be >= 1")


def _region_values(outcomes: np.ndarray, region, n_qubits: int) -> np.ndarray:
    """Per-region result integers extracted from global outcome indices."""
    values = np.zeros_like(outcomes, dtype=np.int64)
    width = len(region)
    for i, q in enumerate(region):
        bit = (outcomes >> (n_qubits - 1 - q)) & 1
        values |= bit.astype(np.int64) << (width - 1 - i)
    return values


def _bits_for_region(outcome: int, region, n_qubits: int) -> str:
    return "".join(str((outcome >> (n_qubits - 1 - q)) & 1) for q in region)


@dataclass(eq=False)
class Dataset:
    """Sampled (or ingested) trials for every circuit of a plan.

    ``settings`` has one row of per-region setting labels per circuit;
    ``outcomes`` holds the sampled global outcome index of every repetition,
    in repetition order.  The schedule orders records for serialization only
    and does not affect analysis.
    """

    regions: tuple
    settings: np.ndarray
    outcomes: np.ndarray
    schedule_mode: str = "rasterized"
    schedule_order: np.ndarray | None = None
    params: dict | None = None
    seed: int | None = None

    def __post_init__(self):
        self.regions = tuple(tuple(int(q) for q in r) for r in self.regions)
        self.settings = np.asarray(self.settings)
        self.outcomes = np.asarray(self.outcomes)
        if self.settings.shape[0] != self.outcomes.shape[0]:
            raise ValueError("settings and outcomes disagree on circuit count")
        if self.settings.shape[1] != len(self.regions):
            raise ValueError("settings width must equal the region count")

    @property
    def n_qubits(self) -> int:
        return sum(len(r) for r in self.regions)

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def n_circuits(self) -> int:
        return self.settings.shape[0]

    @property
    def n_reps(self) -> int:
        return self.outcomes.shape[1]

    def counts(self) -> np.ndarray:
        """Per-circuit outcome counts, shape (n_circuits, 2^n)."""
        n_out = 2 ** self.n_qubits
        out = np.zeros((self.n_circuits, n_out), dtype=np.int64)
        for c in range(self.n_circuits):
            out[c] = np.bincount(self.outcomes[c], minlength=n_out)
        return out

    def variable_specs(self) -> list:
        specs = []
        for m in range(self.n_regions):
            observed = len(np.unique(self.settings[:, m]))
            specs.append(VariableSpec(setting_id(m), "setting", m, observed))
        for m, region in enumerate(self.regions):
            specs.append(VariableSpec(result_id(m), "result", m, 2 ** len(region)))
        return specs

    def cell_table(self) -> "CellTable":
        return CellTable.from_dataset(self)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.regions).encode())
        h.update(np.ascontiguousarray(self.settings, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.outcomes, dtype=np.int64).tobytes())
        return h.hexdigest()

    def iter_schedule(self):
        if self.schedule_order is not None:
            for c, r in self.schedule_order:
                yield int(c), int(r)
        else:
            for r in range(self.n_reps):
                for c in range(self.n_circuits):
                    yield c, r

    def iter_records(self):
        """Yield one record dict per repetition, in schedule order."""
        n = self.n_qubits
        settings_lists = self.settings.tolist()
        for c, r in self.iter_schedule():
            outcome = int(self.outcomes[c, r])
            yield {
                "circuit": c,
                "rep": r,
                "settings": settings_lists[c],
                "results": [_bits_for_region(outcome, region, n) for region in self.regions],
            }

    def header(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "regions": [list(r) for r in self.regions],
            "n_circuits": self.n_circuits,
            "n_reps": self.n_reps,
            "schedule": self.schedule_mode,
            "params": self.params,
            "seed": self.seed,
        }

    def to_jsonl(self, path, header: bool = True) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(json.dumps({"header": self.header()}, sort_keys=True))
                fh.write("\n")
            for record in self.iter_records():
                fh.write(json.dumps(record, sort_keys=True))
                fh.write("\n")

    @classmethod
    def from_records(cls, records, regions=None, header: dict | None = None) -> "Dataset":
        """Reassemble a dataset from trial records.

        Region structure is taken from ``regions``/``header`` when given and
        inferred positionally from the first record otherwise.  Every circuit
        must carry the same settings in all its records and the same number
        of repetitions as every other circuit.
        """
        records = list(records)
        if not records:
            raise DataFormatError("no records to ingest")
        if regions is None and header is not None:
            regions = [tuple(r) for r in header.get("regions", [])] or None
        first = records[0]
        widths = [len(bits) for bits in first["results"]]
        if regions is None:
            regions = []
            q = 0
            for w in widths:
                regions.append(tuple(range(q, q + w)))
                q += w
        regions = tuple(tuple(r) for r in regions)
        n = sum(len(r) for r in regions)

        per_circuit_settings: dict = {}
        per_circuit_reps: dict = {}
        schedule = np.empty((len(records), 2), dtype=np.int64)
        for idx, rec in enumerate(records):
            c, r = int(rec["circuit"]), int(rec["rep"])
            schedule[idx] = (c, r)
            settings = tuple(int(s) for s in rec["settings"])
            known = per_circuit_settings.setdefault(c, settings)
            if known != settings:
                raise DataFormatError(f"circuit {c} appears with inconsistent settings")
            bits = rec["results"]
            if [len(b) for b in bits] != [len(reg) for reg in regions]:
                raise DataFormatError(f"record {idx} results do not match the region sizes")
            outcome = 0
            for reg, b in zip(regions, bits):
                for q, ch in zip(reg, b):
                    if ch not in "01":
                        raise DataFormatError(f"record {idx} has non-binary result {b!r}")
                    outcome |= int(ch) << (n - 1 - q)
            per_circuit_reps.setdefault(c, {})[r] = outcome

        n_circuits = len(per_circuit_settings)
        if sorted(per_circuit_settings) != list(range(n_circuits)):
            raise DataFormatError("circuit indices must cover 0..n_circuits-1")
        rep_counts = {len(v) for v in per_circuit_reps.values()}
        if len(rep_counts) != 1:
            raise DataFormatError("all circuits must have the same number of repetitions")
        n_reps = rep_counts.pop()
        settings = np.array([per_circuit_settings[c] for c in range(n_circuits)], dtype=np.int32)
        outcomes = np.zeros((n_circuits, n_reps), dtype=np.int64)
        for c, reps in per_circuit_reps.items():
            if sorted(reps) != list(range(n_reps)):
                raise DataFormatError(f"circuit {c} repetition indices are not 0..{n_reps - 1}")
            for r, o in reps.items():
                outcomes[c, r] = o

        params = header.get("params") if header else None
        seed = header.get("seed") if header else None
        return cls(
            regions=regions,
            settings=settings,
            outcomes=outcomes,
            schedule_mode="explicit",
            schedule_order=schedule,
            params=params,
            seed=seed,
        )

    @classmethod
    def from_jsonl(cls, path) -> "Dataset":
        """Read a line-delimited JSON dataset; reports bad lines by number."""
        records = []
        header = None
        bad_lines = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    bad_lines.append(lineno)
                    continue
                if "header" in obj:
                    header = obj["header"]
                    continue
                if not all(k in obj for k in ("circuit", "rep", "settings", "results")):
                    bad_lines.append(lineno)
                    continue
                records.append(obj)
        if bad_lines:
            shown = ", ".join(str(x) for x in bad_lines[:20])
            more = "" if len(bad_lines) <= 20 else f" (+{len(bad_lines) - 20} more)"
            raise DataFormatError(f"malformed records on lines: {shown}{more}")
        return cls.from_records(records, header=header)


class CellTable:
    """Weighted contingency cells over settings/results variables.

    Each row is one observed combination of all variable values with its
    multiplicity; every contingency count derived from it equals the count
    over the raw trial records.  Columns hold dense codes 0..cardinality-1;
    ``labels`` maps codes back to original values.
    """

    def __init__(self, specs, columns: dict, weights: np.ndarray, labels: dict | None = None):
        self.specs = list(specs)
        self.columns = {k: np.asarray(v, dtype=np.int64) for k, v in columns.items()}
        self.weights = np.asarray(weights, dtype=np.float64)
        self.labels = labels or {
            s.id: np.arange(s.cardinality) for s in self.specs
        }
        self._by_id = {s.id: s for s in self.specs}
        n_cells = len(self.weights)
        for s in self.specs:
            col = self.columns[s.id]
            if col.shape != (n_cells,):
                raise ValueError(f"column {s.id} has wrong shape")
            if col.size and (col.min() < 0 or col.max() >= s.cardinality):
                raise ValueError(f"column {s.id} has codes outside [0, {s.cardinality})")

    def __contains__(self, var_id: str) -> bool:
        return var_id in self._by_id

    def spec(self, var_id: str) -> VariableSpec:
        try:
            return self._by_id[var_id]
        except KeyError:
            raise KeyError(f"unknown variable {var_id!r}") from None

    @property
    def ids(self) -> list:
        return [s.id for s in self.specs]

    @property
    def n_total(self) -> float:
        return float(self.weights.sum())

    def observed_cardinality(self, var_id: str) -> int:
        mask = self.weights > 0
        return len(np.unique(self.columns[var_id][mask]))

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "CellTable":
        counts = dataset.counts()
        circ_idx, out_idx = np.nonzero(counts)
        weights = counts[circ_idx, out_idx].astype(np.float64)
        columns = {}
        labels = {}
        specs = []
        for m in range(dataset.n_regions):
            raw = dataset.settings[circ_idx, m]
            values, codes = np.unique(raw, return_inverse=True)
            sid = setting_id(m)
            columns[sid] = codes
            labels[sid] = values
            specs.append(VariableSpec(sid, "setting", m, len(values)))
        for m, region in enumerate(dataset.regions):
            rid = result_id(m)
            card = 2 ** len(region)
            columns[rid] = _region_values(out_idx, region, dataset.n_qubits)
            labels[rid] = np.arange(card)
            specs.append(VariableSpec(rid, "result", m, card))
        return cls(specs, columns, weights, labels)
