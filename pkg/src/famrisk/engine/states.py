"""Pared genotype state space, founder priors, and transmission.

A genotype state assigns each selected gene a level: 0 (no pathogenic
variant), 1 (carrier), and, for genes under the multi-variant toggle,
2 (more than one variant allele). Paring keeps only states whose carried
count (levels >= 1) is at most M, which bounds the space by
sum_k C(|genes|, k) instead of 2^|genes|.

Transmission treats a level-1 carrier as heterozygous (transmits the
variant with probability 1/2); level-2 parents transmit with probability
1. A child's level for a multi-variant gene is the number of variant
alleles received; for ordinary genes it is 1 when at least one parent
transmitted. Transmission mass that lands outside the pared space is
simply dropped, and the final posterior normalization absorbs it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product

import numpy as np

from famrisk.engine.settings import ResolvedSettings
from famrisk.errors import InfeasibleConstraints
from famrisk.kb import KnowledgeBase, carrier_prior, effective_allele_frequency


@dataclass(frozen=True, eq=False)
class StateSpace:
    genes: tuple[str, ...]
    max_carried: int
    multi_variant_genes: tuple[str, ...]
    # (n_states, n_genes) uint8 level matrix
    levels: np.ndarray
    # (n_states,) carried-gene bitmask, bit i <-> genes[i]
    masks: np.ndarray
    labels: tuple[str, ...]

    def __len__(self) -> int:
        return self.levels.shape[0]

    @property
    def n_genes(self) -> int:
        return len(self.genes)

    def carried_counts(self) -> np.ndarray:
        return np.bitwise_count(self.masks)

    def carrier_states(self, gene: str) -> np.ndarray:
        """Boolean vector: states in which ``gene`` is carried."""
        gi = self.genes.index(gene)
        return self.levels[:, gi] > 0

    def index_of(self, carried: dict[str, int]) -> int:
        """State index for a {gene: level} assignment (absent genes 0)."""
        key = tuple(carried.get(g, 0) for g in self.genes)
        return self._index[key]

    def state_label(self, idx: int) -> str:
        return self.labels[idx]

    def __post_init__(self):
        index = {tuple(int(v) for v in row): i for i, row in enumerate(self.levels)}
        object.__setattr__(self, "_index", index)


def state_label(genes: tuple[str, ...], levels: tuple[int, ...]) -> str:
    parts = []
    for g, lv in zip(genes, levels):
        if lv == 1:
            parts.append(g)
        elif lv >= 2:
            parts.append(f"{g}*2")
    return "+".join(parts) if parts else "none"


@lru_cache(maxsize=16)
def _build_space(
    genes: tuple[str, ...], max_carried: int, multi: tuple[str, ...]
) -> StateSpace:
    max_level = [2 if g in multi else 1 for g in genes]
    rows: list[tuple[int, ...]] = []
    n = len(genes)
    for k in range(0, max_carried + 1):
        for subset in combinations(range(n), k):
            for assignment in product(*[range(1, max_level[i] + 1) for i in subset]):
                row = [0] * n
                for pos, lv in zip(subset, assignment):
                    row[pos] = lv
                rows.append(tuple(row))
    levels = np.array(rows, dtype=np.uint8).reshape(len(rows), n)
    masks = np.zeros(len(rows), dtype=np.uint32)
    for i in range(n):
        masks |= (levels[:, i] > 0).astype(np.uint32) << np.uint32(i)
    labels = tuple(state_label(genes, r) for r in rows)
    return StateSpace(
        genes=genes,
        max_carried=max_carried,
        multi_variant_genes=multi,
        levels=levels,
        masks=masks,
        labels=labels,
    )


def build_state_space(resolved: ResolvedSettings) -> StateSpace:
    return _build_space(
        resolved.genes, resolved.max_carried, resolved.multi_variant_genes
    )


# -- founder prior ---------------------------------------------------------


def founder_prior(
    space: StateSpace, kb: KnowledgeBase, ancestry: str
) -> np.ndarray:
    """Independent-gene prior over the pared space, renormalized to sum 1.

    Ordinary genes put Hardy-Weinberg carrier mass 2f(1-f)+f^2 on level 1;
    multi-variant genes split it into 2f(1-f) on level 1 and f^2 on
    level 2.
    """
    per_gene: list[np.ndarray] = []
    for g in space.genes:
        if g in space.multi_variant_genes:
            f = effective_allele_frequency(kb, g, ancestry)
            per_gene.append(
                np.array([(1.0 - f) ** 2, 2.0 * f * (1.0 - f), f * f])
            )
        else:
            p = carrier_prior(kb, g, ancestry)
            per_gene.append(np.array([1.0 - p, p, 0.0]))
    table = np.stack(per_gene)  # (n_genes, 3)
    prior = np.prod(
        table[np.arange(space.n_genes)[None, :], space.levels.astype(np.intp)], axis=1
    )
    total = prior.sum()
    if total <= 0.0:
        raise InfeasibleConstraints("founder prior has no mass on the pared space")
    return prior / total


# -- transmission ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Transmission:
    """Sparse child-state distribution for every ordered parent-state pair.

    Entry ``j`` says: parents in joint state ``pair[j] = f * n + m`` produce
    a child in state ``child[j]`` with probability ``prob[j]``. Probabilities
    for a fixed pair sum to <= 1; the deficit is mass pared away.
    """

    n_states: int
    pair: np.ndarray  # int64
    child: np.ndarray  # int64
    prob: np.ndarray  # float64

    def dense(self) -> np.ndarray:
        """(n, n, n) array T[f, m, c]; oracle-sized spaces only."""
        t = np.zeros((self.n_states,) * 3)
        f, m = divmod(self.pair, self.n_states)
        t[f, m, self.child] = self.prob
        return t


def _transmit_prob(level: int) -> float:
    # level-1 carriers are treated as heterozygous
    return (0.0, 0.5, 1.0)[level]


@lru_cache(maxsize=16)
def _build_transmission(
    genes: tuple[str, ...], max_carried: int, multi: tuple[str, ...]
) -> Transmission:
    space = _build_space(genes, max_carried, multi)
    if not multi:
        return _binary_transmission(space)
    return _general_transmission(space)


def build_transmission(space: StateSpace) -> Transmission:
    return _build_transmission(
        space.genes, space.max_carried, space.multi_variant_genes
    )


def _binary_transmission(space: StateSpace) -> Transmission:
    """All-binary fast path, vectorized on carried-set bitmasks.

    For parents with carried masks a, b the child's mask c must satisfy
    c subset-of (a | b); a gene carried by both parents reaches the child
    with probability 3/4, a gene carried by one parent with 1/2.
    """
    masks = space.masks.astype(np.uint32)
    n = len(space)
    a = np.repeat(masks, n).astype(np.uint32)  # father state per pair
    b = np.tile(masks, n).astype(np.uint32)  # mother state per pair
    union = a | b
    both = a & b
    one = union & ~both
    n_one = np.bitwise_count(one).astype(np.float64)
    base = 0.5**n_one  # genes carried by one parent, child either way

    pairs: list[np.ndarray] = []
    children: list[np.ndarray] = []
    probs: list[np.ndarray] = []
    pair_ids = np.arange(n * n, dtype=np.int64)
    for ci, cmask in enumerate(masks):
        ok = (np.uint32(cmask) & ~union) == 0
        if not ok.any():
            continue
        hit_both = np.bitwise_count(np.uint32(cmask) & both[ok]).astype(np.float64)
        miss_both = np.bitwise_count(both[ok] & ~np.uint32(cmask)).astype(np.float64)
        p = base[ok] * 0.75**hit_both * 0.25**miss_both
        pairs.append(pair_ids[ok])
        children.append(np.full(int(ok.sum()), ci, dtype=np.int64))
        probs.append(p)
    return Transmission(
        n_states=n,
        pair=np.concatenate(pairs),
        child=np.concatenate(children),
        prob=np.concatenate(probs),
    )


def _general_transmission(space: StateSpace) -> Transmission:
    """Mixed binary/multi-variant path.

    Enumerates, per unordered parent pair, the product distribution over
    the genes either parent carries, then keeps combinations inside the
    pared space. Symmetric in the parents, so only f <= m is computed.
    """
    n = len(space)
    levels = space.levels
    index = {tuple(int(v) for v in row): i for i, row in enumerate(levels)}
    is_multi = [g in space.multi_variant_genes for g in space.genes]

    pair_list: list[int] = []
    child_list: list[int] = []
    prob_list: list[float] = []

    def child_dist(gl_f: int, gl_m: int, multi_gene: bool) -> list[tuple[int, float]]:
        tf, tm = _transmit_prob(gl_f), _transmit_prob(gl_m)
        p0 = (1.0 - tf) * (1.0 - tm)
        p2 = tf * tm
        p1 = 1.0 - p0 - p2
        if multi_gene:
            out = [(0, p0), (1, p1), (2, p2)]
        else:
            out = [(0, p0), (1, p1 + p2)]
        return [(lv, p) for lv, p in out if p > 0.0]

    for fi in range(n):
        for mi in range(fi, n):
            lf, lm = levels[fi], levels[mi]
            active = [g for g in range(space.n_genes) if lf[g] or lm[g]]
            combos: list[tuple[dict[int, int], float]] = [({}, 1.0)]
            for g in active:
                dist = child_dist(int(lf[g]), int(lm[g]), is_multi[g])
                combos = [
                    ({**assign, g: lv}, p * q)
                    for assign, p in combos
                    for lv, q in dist
                ]
            for assign, p in combos:
                carried = sum(1 for lv in assign.values() if lv)
                if carried > space.max_carried:
                    continue
                key = tuple(assign.get(g, 0) for g in range(space.n_genes))
                ci = index[key]
                pair_list.append(fi * n + mi)
                child_list.append(ci)
                prob_list.append(p)
                if fi != mi:
                    pair_list.append(mi * n + fi)
                    child_list.append(ci)
                    prob_list.append(p)

    return Transmission(
        n_states=n,
        pair=np.asarray(pair_list, dtype=np.int64),
        child=np.asarray(child_list, dtype=np.int64),
        prob=np.asarray(prob_list, dtype=np.float64),
    )
