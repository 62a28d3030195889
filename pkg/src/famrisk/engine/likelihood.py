"""Per-individual phenotype likelihood over the genotype state space.

For each selected, sex-applicable cancer the member contributes one term
per state, built from the state's combined annual hazard curve (the
elementwise max of the baseline and every carried gene's race-adjusted
curve):

* diagnosed at age ``a``: ``h(a) * prod(1 - h(t) for t < a)``
* cancer-free to age ``a`` (current age, or age at death):
  ``prod(1 - h(t) for t < a)`` - an empty product for a newborn.

Tumor-marker results multiply in one likelihood ratio per carried gene;
germline panel results zero out incompatible states (a PLP kills every
state not carrying the gene, a negative or benign result kills every
state carrying it). Prophylactic surgery, when the toggle is on, zeroes
the affected organs' hazards from the surgery age onward for every state
alike.

Only genes with a penetrance curve for a given cancer and sex can move
that cancer's term, so states are grouped by their carried set restricted
to those genes and each distinct group is evaluated once.
"""

from __future__ import annotations

import numpy as np

from famrisk.engine.settings import ResolvedSettings
from famrisk.engine.states import StateSpace
from famrisk.errors import MissingAge
from famrisk.kb import KnowledgeBase

_HAZARD_CAP = 1.0 - 1e-12


class LikelihoodContext:
    """Caches bundle-derived curves across the members of one run."""

    def __init__(
        self, kb: KnowledgeBase, resolved: ResolvedSettings, space: StateSpace
    ):
        self.kb = kb
        self.resolved = resolved
        self.space = space
        self._adjusted: dict[tuple[str, str, str, str], np.ndarray | None] = {}
        self._baseline: dict[tuple[str, str], np.ndarray] = {}
        # cancer -> surgery kinds that remove its organ
        self._removers: dict[str, tuple[str, ...]] = {}
        for cancer in resolved.cancers + ((resolved.cbc_name,) if resolved.cbc_name else ()):
            organ = kb.cancer(cancer).organ
            kinds = tuple(
                kind
                for kind, organs in sorted(kb.surgery_organs.items())
                if organ in organs
            )
            self._removers[cancer] = kinds

    # -- curve assembly ------------------------------------------------

    def adjusted_gene_hazard(
        self, gene: str, cancer: str, sex: str, race: str
    ) -> np.ndarray | None:
        """Race-adjusted annual hazard of ``gene`` for (cancer, sex)."""
        key = (gene, cancer, sex, race)
        if key not in self._adjusted:
            spec = self.kb.gene(gene)
            curve = spec.penetrance.get((cancer, sex))
            if curve is None:
                self._adjusted[key] = None
            else:
                mult = spec.race_adjustments.get(race, 1.0)
                self._adjusted[key] = np.clip(
                    curve.annual_hazard * mult, 0.0, _HAZARD_CAP
                )
        return self._adjusted[key]

    def baseline_hazard(self, cancer: str, sex: str) -> np.ndarray:
        key = (cancer, sex)
        if key not in self._baseline:
            self._baseline[key] = self.kb.baseline_hazard(cancer, sex)
        return self._baseline[key]

    def relevant_genes(self, cancer: str, sex: str, race: str) -> list[int]:
        """Indices of selected genes whose curves can move this cancer."""
        out = []
        for gi, g in enumerate(self.space.genes):
            if self.adjusted_gene_hazard(g, cancer, sex, race) is not None:
                out.append(gi)
        return out

    def combined_hazard(
        self, carried: tuple[int, ...], cancer: str, sex: str, race: str
    ) -> np.ndarray:
        """Elementwise max of the baseline and the carried genes' curves."""
        curves = [self.baseline_hazard(cancer, sex)]
        for gi in carried:
            c = self.adjusted_gene_hazard(self.space.genes[gi], cancer, sex, race)
            if c is not None:
                curves.append(c)
        return np.maximum.reduce(curves)

    def removal_age(self, row, cancer: str) -> int | None:
        """Age the cancer's organ was removed, when the toggle applies."""
        if not self.resolved.apply_prophylactic:
            return None
        ages = [
            row.surgery_age(kind)
            for kind in self._removers.get(cancer, ())
            if row.has_surgery(kind)
        ]
        ages = [a for a in ages if a is not None]
        return min(ages) if ages else None

    # -- per-member likelihood -------------------------------------------

    def member_likelihood(self, row) -> np.ndarray:
        if row.age is None:
            raise MissingAge(f"individual {row.id} has no age; impute first")
        space = self.space
        like = np.ones(len(space))

        for cancer in self.resolved.cancers:
            spec = self.kb.cancer(cancer)
            if not spec.allows_sex(row.sex):
                continue
            dx_age = row.diagnosis_age(cancer)
            if row.has_diagnosis(cancer) and dx_age is None:
                raise MissingAge(
                    f"individual {row.id} has an unaged {cancer} diagnosis"
                )
            cutoff = self.removal_age(row, cancer)
            like *= self._cancer_terms(row, cancer, dx_age, cutoff)

        for (cancer, marker), status in row.markers:
            like *= self._marker_factor(cancer, marker, status)

        if not row.proband or self.resolved.use_proband_germline:
            self._apply_germline(row, like)
        return like

    def _cancer_terms(
        self, row, cancer: str, dx_age: int | None, cutoff: int | None
    ) -> np.ndarray:
        """One term per state, evaluated once per distinct effective group."""
        space = self.space
        rel = self.relevant_genes(cancer, row.sex, row.race)
        rel_mask = np.uint32(0)
        for gi in rel:
            rel_mask |= np.uint32(1 << gi)
        eff = space.masks & rel_mask
        uniq, inverse = np.unique(eff, return_inverse=True)

        values = np.empty(len(uniq))
        for ui, mask in enumerate(uniq):
            carried = tuple(gi for gi in rel if mask & np.uint32(1 << gi))
            h = self.combined_hazard(carried, cancer, row.sex, row.race)
            if cutoff is not None:
                h = h.copy()
                h[cutoff:] = 0.0
            if dx_age is not None:
                values[ui] = h[dx_age] * np.prod(1.0 - h[:dx_age])
            else:
                values[ui] = np.prod(1.0 - h[: row.age])
        return values[inverse]

    def _marker_factor(self, cancer: str, marker: str, status: str) -> np.ndarray:
        """Likelihood-ratio product over carried genes; level 2 counts once."""
        space = self.space
        per_gene = np.array(
            [
                self.kb.marker_lr.get((cancer, marker, status, g), 1.0)
                for g in space.genes
            ]
        )
        carried = space.levels > 0
        return np.prod(np.where(carried, per_gene[None, :], 1.0), axis=1)

    def _apply_germline(self, row, like: np.ndarray) -> None:
        for gene, status in row.tests:
            if gene not in self.space.genes:
                continue  # tested but not selected for this run
            gi = self.space.genes.index(gene)
            if status == "plp":
                like[self.space.levels[:, gi] == 0] = 0.0
            elif status in ("negative", "blb"):
                like[self.space.levels[:, gi] > 0] = 0.0


def phenotype_likelihood(
    row, kb: KnowledgeBase, resolved: ResolvedSettings, space: StateSpace
) -> np.ndarray:
    """Single-row convenience wrapper around :class:`LikelihoodContext`."""
    return LikelihoodContext(kb, resolved, space).member_likelihood(row)
