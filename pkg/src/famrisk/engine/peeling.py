"""Exact pedigree peeling over the pared genotype space.

The pedigree is viewed as a bipartite graph of individuals and nuclear
families (one node per parent couple with children). When that graph is a
tree - guaranteed after loop breaking - the proband's genotype posterior
is computed exactly by passing messages toward the proband:

* message from family F to a parent x: sum over the other parent's states
  of that parent's value times, for every child, the child's
  transmission-weighted state sum;
* message from family F to a child x: the transmission-weighted sum over
  both parents' joint states, folding in the siblings' sums.

A member's "value" toward F combines its founder prior (founders only),
its phenotype likelihood, and the messages from its other families.
Messages are normalized family by family so magnitudes stay tame; the
final posterior normalization makes the result invariant to that scaling.
Childless partners and anyone else not genetically connected to the
proband factor out of the posterior entirely and are skipped.
"""

from __future__ import annotations

import numpy as np

from famrisk.engine.likelihood import LikelihoodContext
from famrisk.engine.settings import ResolvedSettings
from famrisk.engine.states import (
    StateSpace,
    build_transmission,
    founder_prior,
)
from famrisk.errors import (
    InfeasibleConstraints,
    LoopDetected,
    StateSpaceOverflow,
)
from famrisk.kb import KnowledgeBase

DEFAULT_STATE_CAP = 5_000_000  # states x members guard


class _Family:
    __slots__ = ("father", "mother", "children")

    def __init__(self, father: int, mother: int, children: tuple[int, ...]):
        self.father = father
        self.mother = mother
        self.children = children

    def members(self) -> tuple[int, ...]:
        return (self.father, self.mother) + self.children


def _build_families(rows) -> list[_Family]:
    couples: dict[tuple[int, int], list[int]] = {}
    for r in rows:
        if r.father is not None and r.mother is not None:
            couples.setdefault((r.father, r.mother), []).append(r.id)
    return [
        _Family(father, mother, tuple(sorted(kids)))
        for (father, mother), kids in sorted(couples.items())
    ]


def _reachable_component(
    start: int, adjacency: dict[int, list[int]], families: list[_Family]
) -> tuple[set[int], set[int]]:
    """Individuals and families connected to ``start``; raises on a cycle."""
    seen_i: set[int] = {start}
    seen_f: set[int] = set()
    # nodes are ("i", id) | ("f", idx); track the edge we arrived by
    stack: list[tuple[str, int, tuple[str, int] | None]] = [("i", start, None)]
    visited: set[tuple[str, int]] = {("i", start)}
    while stack:
        kind, key, came_from = stack.pop()
        if kind == "i":
            neighbours = [("f", fi) for fi in adjacency.get(key, [])]
        else:
            neighbours = [("i", m) for m in families[key].members()]
        for nxt in neighbours:
            if nxt == came_from:
                continue
            if nxt in visited:
                raise LoopDetected(
                    "pedigree contains a mating loop; break loops before peeling"
                )
            visited.add(nxt)
            if nxt[0] == "i":
                seen_i.add(nxt[1])
            else:
                seen_f.add(nxt[1])
            stack.append((nxt[0], nxt[1], (kind, key)))
    return seen_i, seen_f


class _Peeler:
    def __init__(
        self,
        rows,
        kb: KnowledgeBase,
        resolved: ResolvedSettings,
        space: StateSpace,
        likelihoods: dict[int, np.ndarray],
    ):
        self.rows = {r.id: r for r in rows}
        self.kb = kb
        self.space = space
        self.likelihoods = likelihoods
        self.n = len(space)
        self.families = _build_families(rows)
        self.adjacency: dict[int, list[int]] = {}
        for fi, fam in enumerate(self.families):
            for member in fam.members():
                self.adjacency.setdefault(member, []).append(fi)
        for lst in self.adjacency.values():
            lst.sort()
        self.transmission = build_transmission(space)
        self._priors: dict[str, np.ndarray] = {}
        self._resolved = resolved
        self._messages: dict[tuple[int, int], np.ndarray] = {}
        self._child_sums: dict[tuple[int, int], np.ndarray] = {}

    def prior_for(self, member_id: int) -> np.ndarray | None:
        row = self.rows[member_id]
        if row.father is not None:
            return None
        if row.ancestry not in self._priors:
            self._priors[row.ancestry] = founder_prior(
                self.space, self.kb, row.ancestry
            )
        return self._priors[row.ancestry]

    def value_excluding(self, member_id: int, excluded_family: int | None) -> np.ndarray:
        v = self.likelihoods[member_id].copy()
        prior = self.prior_for(member_id)
        if prior is not None:
            v *= prior
        for fi in self.adjacency.get(member_id, []):
            if fi != excluded_family:
                v *= self.message(fi, member_id)
        return v

    def child_sum(self, family_idx: int, child_id: int) -> np.ndarray:
        """S_c[f, m] = sum_c T(c | f, m) * value(child=c), as an (n, n) grid."""
        key = (family_idx, child_id)
        if key not in self._child_sums:
            vc = self.value_excluding(child_id, family_idx)
            t = self.transmission
            flat = np.bincount(
                t.pair, weights=t.prob * vc[t.child], minlength=self.n * self.n
            )
            self._child_sums[key] = flat.reshape(self.n, self.n)
        return self._child_sums[key]

    def message(self, family_idx: int, target_id: int) -> np.ndarray:
        key = (family_idx, target_id)
        if key in self._messages:
            return self._messages[key]
        fam = self.families[family_idx]
        if target_id == fam.father or target_id == fam.mother:
            grid = np.ones((self.n, self.n))
            for c in fam.children:
                grid *= self.child_sum(family_idx, c)
            if target_id == fam.father:
                vm = self.value_excluding(fam.mother, family_idx)
                msg = grid @ vm
            else:
                vf = self.value_excluding(fam.father, family_idx)
                msg = vf @ grid
        else:
            vf = self.value_excluding(fam.father, family_idx)
            vm = self.value_excluding(fam.mother, family_idx)
            grid = np.outer(vf, vm)
            for c in fam.children:
                if c != target_id:
                    grid *= self.child_sum(family_idx, c)
            t = self.transmission
            msg = np.bincount(
                t.child,
                weights=t.prob * grid.reshape(-1)[t.pair],
                minlength=self.n,
            )
        total = msg.sum()
        if total <= 0.0:
            raise InfeasibleConstraints(
                "recorded data leave no genotype configuration possible"
            )
        msg = msg / total
        self._messages[key] = msg
        return msg


def peel_pedigree(
    rows,
    kb: KnowledgeBase,
    resolved: ResolvedSettings,
    space: StateSpace,
    *,
    likelihoods: dict[int, np.ndarray] | None = None,
    context: LikelihoodContext | None = None,
    state_cap: int = DEFAULT_STATE_CAP,
) -> np.ndarray:
    """Posterior genotype distribution of the proband; sums to 1.

    ``rows`` must have every age resolved (impute first). Raises
    LoopDetected on a mating loop, StateSpaceOverflow when
    ``len(space) * len(rows)`` exceeds ``state_cap``, and
    InfeasibleConstraints when the recorded data admit no genotype.
    """
    rows = list(rows)
    if len(space) * len(rows) > state_cap:
        raise StateSpaceOverflow(
            f"{len(space)} states x {len(rows)} members exceeds the "
            f"cap of {state_cap}"
        )
    proband = next((r for r in rows if r.proband), None)
    if proband is None:
        raise InfeasibleConstraints("no proband row")

    if likelihoods is None:
        ctx = context or LikelihoodContext(kb, resolved, space)
        likelihoods = {r.id: ctx.member_likelihood(r) for r in rows}

    peeler = _Peeler(rows, kb, resolved, space, likelihoods)
    # walk the proband's component first: detects loops and tells us which
    # families actually bear on the posterior
    _reachable_component(proband.id, peeler.adjacency, peeler.families)

    post = peeler.value_excluding(proband.id, None)
    total = post.sum()
    if total <= 0.0:
        raise InfeasibleConstraints(
            "recorded data leave no genotype configuration possible"
        )
    return post / total
