"""Knowledge-base domain types and query operations.

The knowledge base is a versioned, immutable bundle of gene-cancer
parameters: allele frequencies with ancestry overrides, per-gene annual
hazard (penetrance) curves with race multipliers, average-risk baseline
curves, an all-cause life table, tumor-marker likelihood ratios, and
contralateral-breast relative-risk modifiers.

Age convention used throughout the engine:

* ``annual_hazard[t]`` is the probability of a first diagnosis during year
  ``t`` of life conditional on being diagnosis-free when year ``t`` starts.
* The derived cumulative curve ``F(a) = 1 - prod(1 - h(t) for t <= a)`` is
  the probability of a diagnosis by the END of year ``a``.
* A person of age ``a`` has completed years ``0 .. a-1``; censoring an
  unaffected person of age ``a`` therefore contributes
  ``prod(1 - h(t) for t < a)``, which is an empty product at age 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from famrisk.errors import (
    RangeError,
    SexMismatch,
    UnknownAncestry,
    UnknownCancer,
    UnknownGene,
)

SEXES = ("female", "male")
SEX_RESTRICTIONS = ("any", "female", "male")


@dataclass(frozen=True)
class HazardCurve:
    """Per-year probability of first diagnosis, ages 0..max_age."""

    annual_hazard: np.ndarray  # float64, length max_age + 1

    def __post_init__(self):
        h = np.asarray(self.annual_hazard, dtype=float)
        object.__setattr__(self, "annual_hazard", h)
        if h.ndim != 1:
            raise RangeError("hazard curve must be one-dimensional")
        if np.any(h < 0.0) or np.any(h >= 1.0):
            raise RangeError("annual hazards must lie in [0, 1)")

    def cumulative(self) -> np.ndarray:
        """F(a) = 1 - prod_{t<=a}(1 - h(t)); non-decreasing, <= 1."""
        return 1.0 - np.cumprod(1.0 - self.annual_hazard)

    def __len__(self) -> int:
        return len(self.annual_hazard)


def hazard_from_cumulative(cumulative: np.ndarray) -> np.ndarray:
    """Invert the cumulative convention back to annual hazards."""
    f = np.asarray(cumulative, dtype=float)
    if np.any(np.diff(f) < -1e-12) or np.any(f < 0) or np.any(f > 1):
        raise RangeError("cumulative curve must be non-decreasing within [0, 1]")
    prev = np.concatenate([[0.0], f[:-1]])
    surv = 1.0 - prev
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(surv > 0, (f - prev) / surv, 0.0)
    return np.clip(h, 0.0, 1.0 - 1e-15)


@dataclass(frozen=True)
class GeneSpec:
    name: str
    allele_frequency: float
    ancestry_adjustments: dict[str, float] = field(default_factory=dict)
    # (cancer, sex) -> HazardCurve; curves exist only for associated pairs
    penetrance: dict[tuple[str, str], HazardCurve] = field(default_factory=dict)
    # race label -> multiplicative factor applied to every curve of this gene
    race_adjustments: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.allele_frequency < 0.5):
            raise RangeError(
                f"allele frequency for {self.name} must be in (0, 0.5), "
                f"got {self.allele_frequency}"
            )
        for ancestry, f in self.ancestry_adjustments.items():
            if not (0.0 < f < 0.5):
                raise RangeError(
                    f"ancestry override {self.name}/{ancestry} out of (0, 0.5)"
                )
        for race, mult in self.race_adjustments.items():
            if mult < 0:
                raise RangeError(f"race multiplier {self.name}/{race} negative")


@dataclass(frozen=True)
class CancerSpec:
    name: str
    sex_restriction: str = "any"  # any | female | male
    organ: str = ""
    # outcome-only entries (contralateral breast) are predicted, never
    # entered as a diagnosis and never given an input-table column
    outcome_only: bool = False

    def __post_init__(self):
        if self.sex_restriction not in SEX_RESTRICTIONS:
            raise RangeError(f"bad sex restriction {self.sex_restriction!r}")
        if not self.organ:
            raise RangeError(f"cancer {self.name} has an empty organ")

    def allows_sex(self, sex: str) -> bool:
        return self.sex_restriction == "any" or self.sex_restriction == sex


@dataclass(frozen=True)
class KnowledgeBase:
    """Immutable after load; safe for unrestricted concurrent reads."""

    version: str
    max_age: int
    genes: tuple[GeneSpec, ...]
    cancers: tuple[CancerSpec, ...]
    # (cancer, sex) -> cumulative average-risk curve, ages 0..max_age
    baseline_risk: dict[tuple[str, str], np.ndarray]
    # sex -> per-year survival probability (all-cause), ages 0..max_age
    life_table: dict[str, np.ndarray]
    # (cancer, marker, status, gene) -> likelihood ratio
    marker_lr: dict[tuple[str, str, str, str], float]
    # (modifier, value) -> relative risk on the contralateral-breast hazard
    cbc_table: dict[tuple[str, str], float]
    races: tuple[str, ...] = ()
    ancestries: tuple[str, ...] = ()
    # cancer -> marker names collectable for that cancer
    markers: dict[str, tuple[str, ...]] = field(default_factory=dict)
    # surgery kind -> organs whose hazards the surgery removes
    surgery_organs: dict[str, tuple[str, ...]] = field(default_factory=dict)
    # preset name -> {"genes": [...], "cancers": [...]}
    models: dict[str, dict[str, tuple[str, ...]]] = field(default_factory=dict)
    default_race: str = ""
    default_ancestry: str = ""

    def __post_init__(self):
        names = [g.name for g in self.genes]
        if len(set(names)) != len(names):
            raise RangeError("gene names must be unique")
        cnames = [c.name for c in self.cancers]
        if len(set(cnames)) != len(cnames):
            raise RangeError("cancer names must be unique")
        object.__setattr__(self, "_gene_index", {g.name: g for g in self.genes})
        object.__setattr__(self, "_cancer_index", {c.name: c for c in self.cancers})

    # -- lookups -------------------------------------------------------

    def gene(self, name: str) -> GeneSpec:
        try:
            return self._gene_index[name]
        except KeyError:
            raise UnknownGene(f"unknown gene {name!r}") from None

    def cancer(self, name: str) -> CancerSpec:
        try:
            return self._cancer_index[name]
        except KeyError:
            raise UnknownCancer(f"unknown cancer {name!r}") from None

    def has_gene(self, name: str) -> bool:
        return name in self._gene_index

    def has_cancer(self, name: str) -> bool:
        return name in self._cancer_index

    @property
    def gene_names(self) -> list[str]:
        return [g.name for g in self.genes]

    @property
    def cancer_names(self) -> list[str]:
        return [c.name for c in self.cancers]

    def regular_cancers(self) -> list[CancerSpec]:
        """Cancers that can be entered as a diagnosis (non outcome-only)."""
        return [c for c in self.cancers if not c.outcome_only]

    def baseline_hazard(self, cancer: str, sex: str) -> np.ndarray:
        """Annual-hazard view of the average-risk baseline curve."""
        spec = self.cancer(cancer)
        if not spec.allows_sex(sex):
            raise SexMismatch(f"{cancer} is restricted to {spec.sex_restriction}")
        return hazard_from_cumulative(self.baseline_risk[(cancer, sex)])


# -- operations ----------------------------------------------------------


def effective_allele_frequency(kb: KnowledgeBase, gene: str, ancestry: str) -> float:
    """Ancestry override when one exists for the gene, else the base f."""
    spec = kb.gene(gene)
    if ancestry not in kb.ancestries:
        raise UnknownAncestry(f"ancestry {ancestry!r} not in bundle enumeration")
    return spec.ancestry_adjustments.get(ancestry, spec.allele_frequency)


def carrier_prior(kb: KnowledgeBase, gene: str, ancestry: str) -> float:
    """Hardy-Weinberg carrier probability 2f(1-f) + f^2."""
    f = effective_allele_frequency(kb, gene, ancestry)
    return 2.0 * f * (1.0 - f) + f * f


def baseline_cumulative_risk(
    kb: KnowledgeBase, cancer: str, sex: str, age_from: int, age_to: int
) -> float:
    """Average-risk probability of a first diagnosis in (age_from, age_to].

    Conditioned on being diagnosis-free at ``age_from``:
    ``(F(to) - F(from)) / (1 - F(from))``.
    """
    spec = kb.cancer(cancer)
    if not spec.allows_sex(sex):
        raise SexMismatch(f"{cancer} is restricted to {spec.sex_restriction}")
    if not (0 <= age_from <= age_to <= kb.max_age):
        raise RangeError(f"need 0 <= {age_from} <= {age_to} <= {kb.max_age}")
    curve = kb.baseline_risk[(cancer, sex)]
    f_from = curve[age_from]
    f_to = curve[age_to]
    if f_from >= 1.0:
        return 0.0
    return float((f_to - f_from) / (1.0 - f_from))
