"""Pedigree value types.

A Pedigree is an immutable value; every builder operation returns a new
instance with the revision bumped.  Structural invariants that need no
knowledge bundle (parent linkage, age ordering) are enforced here; checks
that depend on bundle content (sex-restricted cancers, marker names) live
in the builder and validator, which receive a KnowledgeBase.

Individual ids are small integers assigned by the builder; the proband is
always id 1.  Sex is "female" or "male"; a missing value of any optional
field is None.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from famrisk.errors import (
    DiagnosisAfterDeath,
    InvalidAge,
    UnknownIndividual,
    ValidationFailed,
)

SEXES = ("female", "male")
TRI_STATE = ("yes", "no", "unknown")

#: panel-finding classifications; genes tested without a finding are negative
CLASSIFICATIONS = ("PLP", "VUS", "BLB")

SURGERY_KINDS = ("bilateral_mastectomy", "hysterectomy", "bilateral_oophorectomy")
FEMALE_ONLY_SURGERIES = ("hysterectomy", "bilateral_oophorectomy")


def _check_age(value, what: str):
    if value is None:
        return
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise InvalidAge(f"{what} must be a non-negative integer, got {value!r}")


@dataclass(frozen=True)
class CancerDiagnosis:
    cancer_name: str
    age_at_diagnosis: int | None = None
    is_model_cancer: bool = True

    def __post_init__(self):
        if not self.cancer_name:
            raise ValidationFailed("cancer name must be non-empty")
        _check_age(self.age_at_diagnosis, "diagnosis age")


@dataclass(frozen=True)
class Surgery:
    kind: str
    age_at_surgery: int | None = None

    def __post_init__(self):
        if self.kind not in SURGERY_KINDS:
            raise ValidationFailed(f"unknown surgery kind {self.kind!r}")
        _check_age(self.age_at_surgery, "surgery age")


@dataclass(frozen=True)
class Finding:
    classification: str
    nucleotide: str | None = None
    protein: str | None = None
    zygosity: str | None = None

    def __post_init__(self):
        if self.classification not in CLASSIFICATIONS:
            raise ValidationFailed(
                f"classification must be one of {CLASSIFICATIONS}, "
                f"got {self.classification!r}"
            )


@dataclass(frozen=True)
class PanelResult:
    """Genes tested without an explicit finding count as negative."""

    panel_name: str
    genes_tested: frozenset[str]
    findings: dict[str, Finding] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "genes_tested", frozenset(self.genes_tested))
        extra = set(self.findings) - self.genes_tested
        if extra:
            raise ValidationFailed(f"findings for untested genes: {sorted(extra)}")

    def status(self, gene: str) -> str | None:
        """'PLP' | 'VUS' | 'BLB' | 'negative' for tested genes, None otherwise."""
        if gene in self.findings:
            return self.findings[gene].classification
        if gene in self.genes_tested:
            return "negative"
        return None


@dataclass(frozen=True)
class TumorMarkers:
    """Observed marker statuses keyed by (cancer, marker); untested = absent."""

    statuses: dict[tuple[str, str], str] = field(default_factory=dict)

    def __post_init__(self):
        for key, status in self.statuses.items():
            if status not in ("positive", "negative"):
                raise ValidationFailed(f"marker {key} status {status!r}")


@dataclass(frozen=True)
class CBCModifiers:
    """Inputs for the contralateral-breast-cancer risk tab; None = unknown.

    Values must match the bundle's modifier table; enforced where a bundle
    is in scope (update_individual / validate).
    """

    first_breast_cancer_type: str | None = None
    anti_estrogen_therapy: str | None = None
    high_risk_preneoplasia: str | None = None
    birads_density: str | None = None
    tumor_size: str | None = None

    FIELD_TO_MODIFIER = {
        "first_breast_cancer_type": "first_breast_cancer_type",
        "anti_estrogen_therapy": "anti_estrogen_therapy",
        "high_risk_preneoplasia": "high_risk_preneoplasia",
        "birads_density": "birads_density",
        "tumor_size": "tumor_size",
    }

    def items(self):
        for field_name, modifier in self.FIELD_TO_MODIFIER.items():
            value = getattr(self, field_name)
            if value is not None:
                yield modifier, value


@dataclass(frozen=True)
class Individual:
    id: int
    sex: str
    age: int | None = None
    deceased: bool = False
    race: str | None = None
    hispanic_ethnicity: str = "unknown"
    ancestry: str | None = None
    mother_id: int | None = None
    father_id: int | None = None
    cancers: tuple[CancerDiagnosis, ...] = ()
    surgeries: tuple[Surgery, ...] = ()
    panel: PanelResult | None = None
    markers: TumorMarkers | None = None
    cbc: CBCModifiers | None = None
    is_clone_of: int | None = None
    auto_created: bool = False

    def __post_init__(self):
        if self.sex not in SEXES:
            raise ValidationFailed(f"sex must be one of {SEXES}, got {self.sex!r}")
        if self.hispanic_ethnicity not in TRI_STATE:
            raise ValidationFailed(f"ethnicity {self.hispanic_ethnicity!r}")
        _check_age(self.age, "age")
        if (self.mother_id is None) != (self.father_id is None):
            raise ValidationFailed("parents must be both set or both unset")
        object.__setattr__(self, "cancers", tuple(self.cancers))
        object.__setattr__(self, "surgeries", tuple(self.surgeries))
        seen = set()
        for dx in self.cancers:
            if dx.is_model_cancer:
                if dx.cancer_name in seen:
                    raise ValidationFailed(
                        f"duplicate diagnosis of {dx.cancer_name}; only the first "
                        "primary is modeled"
                    )
                seen.add(dx.cancer_name)
            if self.age is not None and dx.age_at_diagnosis is not None:
                if dx.age_at_diagnosis > self.age:
                    if self.deceased:
                        raise DiagnosisAfterDeath(
                            f"{dx.cancer_name} at {dx.age_at_diagnosis} but death "
                            f"age {self.age}"
                        )
                    raise InvalidAge(
                        f"{dx.cancer_name} diagnosis age {dx.age_at_diagnosis} "
                        f"exceeds current age {self.age}"
                    )
        for s in self.surgeries:
            if (
                self.age is not None
                and s.age_at_surgery is not None
                and s.age_at_surgery > self.age
            ):
                raise InvalidAge(
                    f"{s.kind} at {s.age_at_surgery} exceeds age {self.age}"
                )

    @property
    def has_parents(self) -> bool:
        return self.mother_id is not None

    def diagnosis_of(self, cancer_name: str) -> CancerDiagnosis | None:
        for dx in self.cancers:
            if dx.is_model_cancer and dx.cancer_name == cancer_name:
                return dx
        return None

    def surgery_of(self, kind: str) -> Surgery | None:
        for s in self.surgeries:
            if s.kind == kind:
                return s
        return None


def _norm_union(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Pedigree:
    pedigree_id: str
    proband_id: int
    revision: int
    next_id: int
    members: tuple[Individual, ...]
    # partner pairs in creation order; children attach to their parents' union
    unions: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        by_id = {}
        for ind in self.members:
            if ind.id in by_id:
                raise ValidationFailed(f"duplicate individual id {ind.id}")
            by_id[ind.id] = ind
        object.__setattr__(self, "_by_id", by_id)
        if self.proband_id not in by_id:
            raise ValidationFailed("proband missing from pedigree")

    def member(self, individual_id: int) -> Individual:
        try:
            return self._by_id[individual_id]
        except KeyError:
            raise UnknownIndividual(f"no individual {individual_id}") from None

    def has_member(self, individual_id: int) -> bool:
        return individual_id in self._by_id

    @property
    def proband(self) -> Individual:
        return self._by_id[self.proband_id]

    def children_of(self, individual_id: int) -> list[Individual]:
        return [
            m
            for m in self.members
            if individual_id in (m.mother_id, m.father_id)
        ]

    def children_of_union(self, union: tuple[int, int]) -> list[Individual]:
        pair = _norm_union(*union)
        return [
            m
            for m in self.members
            if m.has_parents and _norm_union(m.father_id, m.mother_id) == pair
        ]

    def unions_of(self, individual_id: int) -> list[tuple[int, int]]:
        return [u for u in self.unions if individual_id in u]

    def _with(self, **changes) -> "Pedigree":
        return replace(self, **changes)

    def with_members(
        self, members: dict[int, Individual], unions=None, next_id=None
    ) -> "Pedigree":
        """New revision with the given member map (and optional union list)."""
        ordered = tuple(members[k] for k in sorted(members))
        return replace(
            self,
            members=ordered,
            revision=self.revision + 1,
            unions=self.unions if unions is None else tuple(unions),
            next_id=self.next_id if next_id is None else next_id,
        )

    def member_map(self) -> dict[int, Individual]:
        return dict(self._by_id)
