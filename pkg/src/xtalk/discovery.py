"""Skeleton discovery over settings/results variables and crosstalk graphs.

Runs the order-independent skeleton phase of constraint-based structure
discovery: starting from the complete graph (minus design priors), edges
are removed when a conditional-independence test accepts at some
conditioning set drawn from a level-frozen adjacency snapshot.  Surviving
edges are classified as expected (within one region) or crosstalk (across
regions) and weighted by total-variation distances.  Edge orientation is
deliberately not performed; the skeleton alone witnesses crosstalk.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field

from sklearn.base import BaseEstimator

from .data import CellTable, Dataset
from .stats import CITestResult, TvdSummary, edge_tvd, g2_test

__all__ = [
    "SkeletonGraph",
    "CrosstalkGraph",
    "EdgeRecord",
    "design_priors",
    "bonferroni_alpha",
    "pc_skeleton",
    "build_crosstalk_graph",
    "CrosstalkDetector",
]


def _pair(u: str, v: str) -> tuple:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class CITestRecord:
    i: str
    j: str
    cond: tuple
    result: CITestResult


@dataclass(eq=False)
class SkeletonGraph:
    """Undirected skeleton over variables, with separation bookkeeping.

    ``sepsets`` maps each pair removed by a test to the conditioning set
    that separated it; ``prior_removed`` pairs were excluded up front by the
    design and were never tested.
    """

    nodes: tuple
    edges: set
    sepsets: dict
    prior_removed: set
    per_test_alpha: float
    tests: list = field(default_factory=list)
    excluded_nodes: tuple = ()
    cond_size_capped: bool = False

    def adjacent(self, node: str) -> list:
        return sorted(
            v for pair in self.edges for v in pair if node in pair and v != node
        )

    def has_edge(self, u: str, v: str) -> bool:
        return _pair(u, v) in self.edges


def design_priors(specs) -> set:
    """Pairs whose independence is known by design: all setting pairs.

    Settings on different regions are randomized independently by the plan
    generator, so their edges can be removed before any testing.
    """
    setting_ids = [s.id for s in specs if s.kind == "setting"]
    return {_pair(a, b) for a, b in itertools.combinations(setting_ids, 2)}


def bonferroni_alpha(alpha: float, n_initial_edges: int) -> float:
    """Per-test significance giving weak family-wise control at ``alpha``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha!r}")
    if n_initial_edges < 1:
        raise ValueError("the initial graph must contain at least one edge")
    return alpha / n_initial_edges


def pc_skeleton(table: CellTable, alpha: float = 0.01, priors=None,
                bonferroni: bool = False, max_cond_size: int | None = None) -> SkeletonGraph:
    """Order-independent skeleton discovery by hierarchical G squared tests.

    Levels test conditioning sets of growing size n.  Within a level the
    adjacency sets are frozen, so the removed-edge set does not depend on
    node or pair iteration order.  For each ordered adjacent pair (X, Y)
    with enough snapshot neighbors, every size-n subset of the snapshot
    adjacency of X (minus Y) is tested in lexicographic order; the first
    accepted independence (p above the per-test alpha) removes the edge and
    is recorded as the pair's separating set.  The loop ends when no pair
    admits a size-n conditioning set.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha!r}")

    usable = []
    excluded = []
    for spec in table.specs:
        if table.observed_cardinality(spec.id) < 2:
            excluded.append(spec.id)
        else:
            usable.append(spec.id)
    if excluded:
        warnings.warn(
            f"excluding degenerate single-valued variables: {', '.join(sorted(excluded))}"
        )
    if len(usable) < 2:
        raise ValueError("need at least two non-degenerate variables")
    nodes = tuple(sorted(usable))

    priors = {frozenset(p) for p in (priors or ())}
    prior_removed = set()
    edges = set()
    for u, v in itertools.combinations(nodes, 2):
        pair = _pair(u, v)
        if frozenset(pair) in priors:
            prior_removed.add(pair)
        else:
            edges.add(pair)

    per_test_alpha = bonferroni_alpha(alpha, max(1, len(edges))) if bonferroni else alpha
    cap = len(nodes) - 2 if max_cond_size is None else max_cond_size

    sepsets = {}
    tests = []
    capped = False
    level = 0
    while True:
        snapshot = {
            node: sorted(v for pair in edges for v in pair if node in pair and v != node)
            for node in nodes
        }
        eligible = [
            (x, y)
            for x in nodes
            for y in nodes
            if x != y and _pair(x, y) in edges
            and len([v for v in snapshot[x] if v != y]) >= level
        ]
        if not eligible:
            break
        if level > cap:
            capped = True
            break
        for x, y in eligible:
            pair = _pair(x, y)
            if pair not in edges:
                continue
            candidates = [v for v in snapshot[x] if v != y]
            for cond in itertools.combinations(candidates, level):
                result = g2_test(table, x, y, cond)
                tests.append(CITestRecord(x, y, cond, result))
                if result.p_value > per_test_alpha:
                    edges.discard(pair)
                    sepsets[pair] = tuple(cond)
                    break
        level += 1

    return SkeletonGraph(
        nodes=nodes,
        edges=edges,
        sepsets=sepsets,
        prior_removed=prior_removed,
        per_test_alpha=per_test_alpha,
        tests=tests,
        excluded_nodes=tuple(sorted(excluded)),
        cond_size_capped=capped,
    )


@dataclass(frozen=True)
class EdgeRecord:
    """One surviving skeleton edge with its classification and weight."""

    u: str
    v: str
    kind: str
    tvd: TvdSummary | None = None
    tvd_source: str | None = None
    tvd_target: str | None = None


@dataclass(eq=False)
class CrosstalkGraph:
    """Classified skeleton: expected edges stay inside one region, crosstalk
    edges connect variables of different regions."""

    skeleton: SkeletonGraph
    specs: list
    edges: list
    alpha: float
    bonferroni: bool
    dataset_digest: str | None = None

    @property
    def crosstalk_edges(self) -> list:
        return [e for e in self.edges if e.kind == "crosstalk"]

    @property
    def expected_edges(self) -> list:
        return [e for e in self.edges if e.kind == "expected"]

    def has_crosstalk(self) -> bool:
        return bool(self.crosstalk_edges)

    def to_dot(self) -> str:
        """Graphviz rendering: expected edges blue, crosstalk edges red with
        'max (median)' TVD labels."""
        lines = ["graph crosstalk {"]
        by_kind = {"setting": "box", "result": "ellipse"}
        for spec in sorted(self.specs, key=lambda s: s.id):
            lines.append(f'  "{spec.id}" [shape={by_kind[spec.kind]}];')
        for edge in sorted(self.edges, key=lambda e: (e.u, e.v)):
            attrs = [f'class="{edge.kind}"']
            if edge.kind == "crosstalk":
                attrs.append("color=red")
                if edge.tvd is not None and edge.tvd.computable:
                    attrs.append(f'label="{edge.tvd.max_tvd:.3g} ({edge.tvd.median_tvd:.3g})"')
                else:
                    attrs.append('label="tvd n/a"')
            else:
                attrs.append("color=blue")
            lines.append(f'  "{edge.u}" -- "{edge.v}" [{", ".join(attrs)}];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_report(self) -> dict:
        """JSON-serializable analysis report with all tests and sepsets."""
        def tvd_doc(e):
            if e.tvd is None:
                return None
            return {
                "computable": e.tvd.computable,
                "max": e.tvd.max_tvd,
                "median": e.tvd.median_tvd,
                "n_pairs": e.tvd.n_pairs,
                "argmax": None if e.tvd.argmax is None else [
                    None if v is None else int(v) for v in e.tvd.argmax
                ],
                "source": e.tvd_source,
                "target": e.tvd_target,
            }

        return {
            "alpha": self.alpha,
            "bonferroni": self.bonferroni,
            "per_test_alpha": self.skeleton.per_test_alpha,
            "dataset_digest": self.dataset_digest,
            "crosstalk_detected": self.has_crosstalk(),
            "cond_size_capped": self.skeleton.cond_size_capped,
            "variables": [
                {"id": s.id, "kind": s.kind, "region": s.region, "cardinality": s.cardinality}
                for s in self.specs
            ],
            "excluded_variables": list(self.skeleton.excluded_nodes),
            "edges": [
                {"u": e.u, "v": e.v, "kind": e.kind, "tvd": tvd_doc(e)}
                for e in sorted(self.edges, key=lambda e: (e.u, e.v))
            ],
            "prior_removed": sorted(list(p) for p in self.skeleton.prior_removed),
            "sepsets": {
                f"{u}--{v}": list(s) for (u, v), s in sorted(self.skeleton.sepsets.items())
            },
            "tests": [
                {
                    "i": t.i,
                    "j": t.j,
                    "cond": list(t.cond),
                    "g2": t.result.g2,
                    "df": t.result.df,
                    "p_value": t.result.p_value,
                    "degenerate": t.result.degenerate,
                    "sparse": t.result.sparse,
                }
                for t in self.skeleton.tests
            ],
        }

    def to_report_json(self) -> str:
        return json.dumps(self.to_report(), sort_keys=True, indent=2)


def _tvd_direction(table: CellTable, u: str, v: str) -> tuple:
    """Pick the source/target orientation for TVD weighting.

    Settings drive results; between two variables of the same kind the
    lower region index is used as the source.
    """
    su, sv = table.spec(u), table.spec(v)
    if su.kind == "setting" and sv.kind == "result":
        return u, v
    if sv.kind == "setting" and su.kind == "result":
        return v, u
    return (u, v) if su.region <= sv.region else (v, u)


def build_crosstalk_graph(skeleton: SkeletonGraph, table: CellTable,
                          alpha: float | None = None, bonferroni: bool = False,
                          tvd_on_expected: bool = False,
                          dataset_digest: str | None = None) -> CrosstalkGraph:
    """Classify surviving edges by region and weight crosstalk edges by TVD.

    An edge is crosstalk exactly when its endpoints belong to different
    regions.  Edges whose TVD stratification finds no common setting are
    retained with a not-computable weight.
    """
    specs = [table.spec(node) for node in skeleton.nodes]
    edges = []
    for u, v in sorted(skeleton.edges):
        kind = "crosstalk" if table.spec(u).region != table.spec(v).region else "expected"
        tvd = None
        src = dst = None
        if kind == "crosstalk" or tvd_on_expected:
            src, dst = _tvd_direction(table, u, v)
            tvd = edge_tvd(table, src, dst)
        edges.append(EdgeRecord(u=u, v=v, kind=kind, tvd=tvd, tvd_source=src, tvd_target=dst))
    return CrosstalkGraph(
        skeleton=skeleton,
        specs=specs,
        edges=edges,
        alpha=alpha if alpha is not None else skeleton.per_test_alpha,
        bonferroni=bonferroni,
        dataset_digest=dataset_digest,
    )


class CrosstalkDetector(BaseEstimator):
    """Estimator interface to the full analysis: fit on a dataset, read off
    the crosstalk graph.

    Parameters
    ----------
    alpha : float
        Significance level for the conditional-independence tests.
    bonferroni : bool
        Divide alpha by the initial edge count for weak family-wise control.
    use_design_priors : bool
        Remove setting-setting edges before testing, as justified by the
        randomized experiment design.
    max_cond_size : int or None
        Cap on the conditioning-set size; None allows up to the variable
        count minus two.  Hitting the cap is reported on the skeleton.
    tvd_on_expected : bool
        Also compute TVD weights for expected (intra-region) edges.

    Attributes
    ----------
    skeleton_ : SkeletonGraph
    graph_ : CrosstalkGraph
    crosstalk_edges_ : list of (u, v) pairs
    has_crosstalk_ : bool
    """

    def __init__(self, alpha: float = 0.01, bonferroni: bool = False,
                 use_design_priors: bool = True, max_cond_size: int | None = None,
                 tvd_on_expected: bool = False):
        self.alpha = alpha
        self.bonferroni = bonferroni
        self.use_design_priors = use_design_priors
        self.max_cond_size = max_cond_size
        self.tvd_on_expected = tvd_on_expected

    @staticmethod
    def _as_table(data) -> tuple:
        if isinstance(data, CellTable):
            return data, None
        if isinstance(data, Dataset):
            return data.cell_table(), data.digest()
        raise TypeError(
            f"expected a Dataset or CellTable, got {type(data).__name__}"
        )

    def fit(self, X, y=None) -> "CrosstalkDetector":
        """Run skeleton discovery and edge classification on the dataset."""
        table, digest = self._as_table(X)
        priors = design_priors(table.specs) if self.use_design_priors else None
        self.skeleton_ = pc_skeleton(
            table,
            alpha=self.alpha,
            priors=priors,
            bonferroni=self.bonferroni,
            max_cond_size=self.max_cond_size,
        )
        self.graph_ = build_crosstalk_graph(
            self.skeleton_,
            table,
            alpha=self.alpha,
            bonferroni=self.bonferroni,
            tvd_on_expected=self.tvd_on_expected,
            dataset_digest=digest,
        )
        self.crosstalk_edges_ = [(e.u, e.v) for e in self.graph_.crosstalk_edges]
        self.has_crosstalk_ = self.graph_.has_crosstalk()
        return self
