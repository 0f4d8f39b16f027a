"""Categorical statistics for settings/results data.

Provides the log-likelihood-ratio (G squared) conditional-independence
test with chi-squared p-values, a self-contained chi-squared survival
function, and the total-variation edge weights used to rank detected
crosstalk edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import CellTable, setting_id

__all__ = ["CITestResult", "TvdSummary", "chi2_sf", "g2_test", "edge_tvd"]

_SPARSE_FLAG_FRACTION = 0.2


@dataclass(frozen=True)
class CITestResult:
    """Outcome of one conditional-independence test.

    ``degenerate`` marks tests where either tested variable took a single
    observed value, in which case independence holds trivially and p = 1.
    ``sparse`` flags tables with more than 20% empty cells, a hint that more
    repetitions are needed.
    """

    g2: float
    df: int
    p_value: float
    degenerate: bool = False
    empty_cell_fraction: float = 0.0

    @property
    def sparse(self) -> bool:
        return self.empty_cell_fraction > _SPARSE_FLAG_FRACTION


def _gamma_upper_series(a: float, z: float) -> float:
    """Regularized lower P(a, z) by power series; use for z < a + 1."""
    term = 1.0 / a
    total = term
    k = 0
    while True:
        k += 1
        term *= z / (a + k)
        total += term
        if abs(term) < abs(total) * 1e-16 or k > 10_000:
            break
    log_p = -z + a * math.log(z) - math.lgamma(a)
    return total * math.exp(log_p)


def _gamma_upper_contfrac(a: float, z: float) -> float:
    """Regularized upper Q(a, z) by Lentz continued fraction; for z >= a + 1."""
    tiny = 1e-300
    b = z + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0 else 1.0 / tiny
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    log_q = -z + a * math.log(z) - math.lgamma(a)
    return math.exp(log_q) * h


def chi2_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-squared distribution.

    Evaluates the regularized upper incomplete gamma Q(df/2, x/2) with a
    series/continued-fraction split, accurate to well below 1e-10 over the
    working range.
    """
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x!r}")
    if df < 1:
        raise ValueError(f"df must be a positive integer, got {df!r}")
    if x == 0.0:
        return 1.0
    a = df / 2.0
    z = x / 2.0
    if z < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _gamma_upper_series(a, z)))
    return min(1.0, max(0.0, _gamma_upper_contfrac(a, z)))


def _group_sums(keys: np.ndarray, weights: np.ndarray):
    """Unique keys with summed weights."""
    uniq, inverse = np.unique(keys, return_inverse=True)
    sums = np.bincount(inverse, weights=weights, minlength=len(uniq))
    return uniq, sums


def _conditioning_codes_masked(table: CellTable, cond, mask) -> tuple[np.ndarray, int]:
    """Composite code of the conditioning assignment and its cardinality."""
    code = np.zeros(int(np.count_nonzero(mask)), dtype=np.int64)
    card = 1
    for var in cond:
        spec = table.spec(var)
        if math.log2(max(card, 1)) + math.log2(spec.cardinality) > 50:
            raise ValueError("conditioning set cardinality overflows the composite code")
        code = code * spec.cardinality + table.columns[var][mask]
        card *= spec.cardinality
    return code, card


def g2_test(table: CellTable, i: str, j: str, cond=()) -> CITestResult:
    """G squared test of conditional independence of ``i`` and ``j`` given ``cond``.

    Computes G2 = 2 sum n_ijA ln(n_ijA n_A / (n_iA n_jA)) over the observed
    cells, with empty cells contributing zero.  Degrees of freedom sum
    (r_a - 1)(c_a - 1) over the observed conditioning strata, where r_a and
    c_a count the values of i and j with support in stratum a; on tables
    where every stratum has full support this equals the textbook
    (|Xi| - 1)(|Xj| - 1)|XA|.  Per-stratum adjustment keeps the reference
    distribution honest when most strata are structurally empty, which a
    randomized design routinely produces under deep conditioning.
    """
    cond = tuple(cond)
    if i == j:
        raise ValueError("the two tested variables must differ")
    if i in cond or j in cond:
        raise ValueError("conditioning set must not contain the tested variables")
    if len(table.weights) == 0 or table.n_total == 0:
        raise ValueError("empty dataset")
    spec_i = table.spec(i)
    spec_j = table.spec(j)

    positive_w = table.weights > 0
    xi = table.columns[i][positive_w]
    xj = table.columns[j][positive_w]
    w = table.weights[positive_w]

    observed_i = len(np.unique(xi))
    observed_j = len(np.unique(xj))
    if observed_i < 2 or observed_j < 2:
        return CITestResult(g2=0.0, df=0, p_value=1.0, degenerate=True)

    ci, cj = spec_i.cardinality, spec_j.cardinality
    a_code, a_card = _conditioning_codes_masked(table, cond, positive_w)
    key_ia = a_code * ci + xi
    key_ja = a_code * cj + xj
    key_ija = key_ia * cj + xj

    uniq_ija, n_ija = _group_sums(key_ija, w)
    uniq_ia, n_ia = _group_sums(key_ia, w)
    uniq_ja, n_ja = _group_sums(key_ja, w)
    uniq_a, n_a = _group_sums(a_code, w)

    # decompose the joint keys to look up their marginals
    cell_j = uniq_ija % cj
    cell_ia = uniq_ija // cj
    cell_a = cell_ia // ci
    pos_ia = np.searchsorted(uniq_ia, cell_ia)
    pos_ja = np.searchsorted(uniq_ja, cell_a * cj + cell_j)
    pos_a = np.searchsorted(uniq_a, cell_a)

    g2 = 2.0 * float(np.sum(n_ija * (np.log(n_ija) + np.log(n_a[pos_a])
                                     - np.log(n_ia[pos_ia])
                                     - np.log(n_ja[pos_ja]))))
    g2 = max(g2, 0.0)

    # per-stratum support counts for the adjusted degrees of freedom
    rows_per_a = np.bincount(np.searchsorted(uniq_a, uniq_ia // ci), minlength=len(uniq_a))
    cols_per_a = np.bincount(np.searchsorted(uniq_a, uniq_ja // cj), minlength=len(uniq_a))
    df = int(np.sum(np.maximum(rows_per_a - 1, 0) * np.maximum(cols_per_a - 1, 0)))
    if df == 0:
        return CITestResult(g2=g2, df=0, p_value=1.0, degenerate=True)

    total_cells = float(ci) * float(cj) * float(a_card)
    empty_fraction = 1.0 - float(len(uniq_ija)) / total_cells
    return CITestResult(
        g2=g2,
        df=df,
        p_value=chi2_sf(g2, df),
        empty_cell_fraction=empty_fraction,
    )


@dataclass(frozen=True)
class TvdSummary:
    """Max/median absolute-difference distance between conditional
    distributions of the target variable across source values.

    The distance follows the analysis convention without the conventional
    1/2 factor, so values range over [0, 2].  ``computable`` is False when
    no pair of source values shares an evaluable comparison.
    """

    max_tvd: float | None
    median_tvd: float | None
    argmax: tuple | None
    n_pairs: int
    computable: bool


def _pairwise_tvd(counts: np.ndarray, row_labels, stratum_label):
    """All pairwise distances between the normalized rows of a counts matrix."""
    totals = counts.sum(axis=1)
    present = np.nonzero(totals > 0)[0]
    out = []
    for a_pos in range(len(present)):
        for b_pos in range(a_pos + 1, len(present)):
            ra, rb = present[a_pos], present[b_pos]
            d = float(np.abs(counts[ra] / totals[ra] - counts[rb] / totals[rb]).sum())
            out.append((d, (row_labels[ra], row_labels[rb], stratum_label)))
    return out


def edge_tvd(table: CellTable, x: str, y: str) -> TvdSummary:
    """Quantify the dependence of ``y``'s distribution on the value of ``x``.

    For every pair of ``x`` values, sums the absolute differences between
    the two conditional distributions of ``y`` and reports the maximum and
    the median over all computed pairs.  When ``x`` is a setting and ``y``
    the result of a different region, distributions are compared only
    within strata that share the target region's own setting, and the
    maximization runs over all such common strata.
    """
    if x == y:
        raise ValueError("the two variables must differ")
    spec_x = table.spec(x)
    spec_y = table.spec(y)
    xs = table.columns[x]
    ys = table.columns[y]
    w = table.weights
    cx, cy = spec_x.cardinality, spec_y.cardinality
    x_labels = table.labels[x]

    stratifier = None
    if (spec_x.kind == "setting" and spec_y.kind == "result"
            and spec_x.region != spec_y.region):
        own = setting_id(spec_y.region)
        if own in table:
            stratifier = own

    distances = []
    if stratifier is None:
        counts = np.zeros((cx, cy))
        np.add.at(counts, (xs, ys), w)
        distances.extend(_pairwise_tvd(counts, x_labels, None))
    else:
        strat = table.columns[stratifier]
        strat_labels = table.labels[stratifier]
        for s in np.unique(strat):
            mask = strat == s
            counts = np.zeros((cx, cy))
            np.add.at(counts, (xs[mask], ys[mask]), w[mask])
            distances.extend(_pairwise_tvd(counts, x_labels, strat_labels[s]))

    if not distances:
        return TvdSummary(None, None, None, 0, computable=False)
    values = np.array([d for d, _ in distances])
    best = int(np.argmax(values))
    return TvdSummary(
        max_tvd=float(values[best]),
        median_tvd=float(np.median(values)),
        argmax=distances[best][1],
        n_pairs=len(distances),
        computable=True,
    )
