"""Multiple imputation of missing ages.

Produces K completed copies of the model input table. Unknown ages are
filled by sampling generation gaps from a triangular distribution on
[15, 50] years with mode 28 (parent = oldest resolved child + gap, child
= youngest resolved parent - gap), after propagating hard bounds
(diagnosis and surgery ages below, parents at least 15 years older than
any child, the bundle's maximum age above) to a fixed point. Unknown
diagnosis and surgery ages are then drawn uniformly up to the member's
resolved age.

A loop clone and its original are the same person, so each clone pair
shares one set of draws. Everything is driven by a generator seeded with
(seed, table index): the same inputs give byte-identical tables, and a
table with nothing missing comes back untouched K times.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from famrisk.engine.settings import ResolvedSettings
from famrisk.errors import InfeasibleConstraints
from famrisk.kb import KnowledgeBase

GAP_MIN = 15
GAP_MODE = 28
GAP_MAX = 50
_MAX_TRIES = 40


def impute_ages(
    rows, kb: KnowledgeBase, resolved: ResolvedSettings
) -> list[tuple]:
    """K completed tables (tuples of rows, original order preserved)."""
    rows = list(rows)
    plan = _ImputationPlan(rows, kb.max_age)
    tables = []
    for k in range(resolved.imputations):
        rng = np.random.default_rng([resolved.seed, k])
        tables.append(plan.complete(rng))
    return tables


class _ImputationPlan:
    """Bounds and sampling order shared by the K tables."""

    def __init__(self, rows, max_age: int):
        self.rows = rows
        self.max_age = max_age
        # clone pairs share one identity: work on root ids throughout
        self.root = {
            r.id: r.clone_of if r.clone_of is not None else r.id for r in rows
        }
        self.known: dict[int, int] = {}
        self.lo: dict[int, int] = {}
        self.hi: dict[int, int] = {}
        for r in rows:
            if r.clone_of is not None:
                continue
            if r.age is not None:
                self.known[r.id] = r.age
            else:
                floor = [0]
                floor += [a for _, a in r.diagnoses if a is not None]
                floor += [a for _, a in r.surgeries if a is not None]
                self.lo[r.id] = max(floor)
                self.hi[r.id] = max_age
        # (parent root, child root) edges, deduplicated, deterministic order
        edges = set()
        for r in rows:
            if r.father is not None:
                edges.add((self.root[r.father], self.root[r.id]))
            if r.mother is not None:
                edges.add((self.root[r.mother], self.root[r.id]))
        self.edges = sorted(edges)
        self.parents_of: dict[int, list[int]] = {}
        self.children_of: dict[int, list[int]] = {}
        for p, c in self.edges:
            self.parents_of.setdefault(c, []).append(p)
            self.children_of.setdefault(p, []).append(c)
        self._propagate_bounds()
        self.unknown = [
            r.id for r in rows if r.clone_of is None and r.age is None
        ]

    def _eff_lo(self, root_id: int) -> int:
        return self.known.get(root_id, self.lo.get(root_id, 0))

    def _eff_hi(self, root_id: int) -> int:
        return self.known.get(root_id, self.hi.get(root_id, self.max_age))

    def _propagate_bounds(self) -> None:
        # a known-vs-known violation is user data and is left alone; only
        # members that still need a value can become infeasible
        for _ in range(len(self.rows) + 2):
            changed = False
            for p, c in self.edges:
                if p in self.lo:
                    want = self._eff_lo(c) + GAP_MIN
                    if want > self.lo[p]:
                        self.lo[p] = want
                        changed = True
                if c in self.hi:
                    want = self._eff_hi(p) - GAP_MIN
                    if want < self.hi[c]:
                        self.hi[c] = want
                        changed = True
            if not changed:
                break
        for rid in self.lo:
            if self.lo[rid] > self.hi[rid]:
                raise InfeasibleConstraints(
                    f"no feasible age for individual {rid}: recorded events "
                    f"require at least {self.lo[rid]} but relatives cap it "
                    f"at {self.hi[rid]}"
                )

    # -- one completed table -------------------------------------------

    def complete(self, rng: np.random.Generator) -> tuple:
        ages = dict(self.known)
        pending = list(self.unknown)
        while pending:
            progressed = False
            for rid in list(pending):
                value = self._sample_from_neighbours(rid, ages, rng)
                if value is not None:
                    ages[rid] = value
                    pending.remove(rid)
                    progressed = True
            if not progressed:
                # no aged relative anywhere nearby (childless partner of an
                # unaged chain): fall back to the static bounds
                rid = pending.pop(0)
                ages[rid] = int(rng.integers(self.lo[rid], self.hi[rid] + 1))

        # clones can precede their originals in table order, so resolve
        # every original first (rng draws in row order), then emit
        completed: dict[int, tuple] = {}
        for r in self.rows:
            if r.clone_of is not None:
                continue
            age = ages[r.id]
            diagnoses = tuple(
                (c, a if a is not None else int(rng.integers(0, age + 1)))
                for c, a in r.diagnoses
            )
            surgeries = tuple(
                (s, a if a is not None else int(rng.integers(0, age + 1)))
                for s, a in r.surgeries
            )
            done = r
            if age != r.age or diagnoses != r.diagnoses or surgeries != r.surgeries:
                done = replace(r, age=age, diagnoses=diagnoses, surgeries=surgeries)
            completed[r.id] = done

        out = []
        for r in self.rows:
            if r.clone_of is None:
                out.append(completed[r.id])
                continue
            donor = completed[r.clone_of]
            out.append(
                replace(
                    r,
                    age=donor.age,
                    diagnoses=donor.diagnoses,
                    surgeries=donor.surgeries,
                )
            )
        return tuple(out)

    def _sample_from_neighbours(
        self, rid: int, ages: dict[int, int], rng: np.random.Generator
    ) -> int | None:
        child_ages = [
            ages[c] for c in self.children_of.get(rid, []) if c in ages
        ]
        parent_ages = [
            ages[p] for p in self.parents_of.get(rid, []) if p in ages
        ]
        if not child_ages and not parent_ages:
            return None
        lo = self.lo[rid]
        hi = self.hi[rid]
        if child_ages:
            lo = max(lo, max(child_ages) + GAP_MIN)
        if parent_ages:
            hi = min(hi, min(parent_ages) - GAP_MIN)
        if lo > hi:
            # sequential sampling wedged itself; honour the static bounds
            lo, hi = self.lo[rid], self.hi[rid]
        for _ in range(_MAX_TRIES):
            gap = rng.triangular(GAP_MIN, GAP_MODE, GAP_MAX)
            if child_ages:
                candidate = int(round(max(child_ages) + gap))
            else:
                candidate = int(round(min(parent_ages) - gap))
            if lo <= candidate <= hi:
                return candidate
        return int(rng.integers(lo, hi + 1))
