"""Builder operations.

Every operation takes a Pedigree value and returns a new one with the
revision incremented.  Operations either succeed with all structural
invariants intact or raise without modifying anything, so a pedigree that
ever existed is always valid (the validator can still flag content-level
warnings such as missing ages).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from famrisk.errors import (
    CannotRemoveProband,
    InvalidAge,
    MarkerWithoutCancer,
    CBCWithoutBreastCancer,
    SexConflict,
    SexRestrictedCancer,
    SlotOccupied,
    UnknownGene,
    ValidationFailed,
    WouldOrphanChildren,
)
from famrisk.kb.model import KnowledgeBase
from famrisk.pedigree.model import (
    FEMALE_ONLY_SURGERIES,
    SEXES,
    Individual,
    Pedigree,
    _norm_union,
)

RELATIONS = (
    "parent",
    "partner",
    "child",
    "sibling",
    "half_sibling_via_mother",
    "half_sibling_via_father",
)


def _opposite(sex: str) -> str:
    return "male" if sex == "female" else "female"


def create_pedigree(
    pedigree_id: str, proband_sex: str, proband_age: int, max_age: int = 95
) -> Pedigree:
    if not pedigree_id:
        raise ValidationFailed("pedigree id must be non-empty")
    if proband_sex not in SEXES:
        raise SexConflict(f"proband sex must be one of {SEXES}")
    if not isinstance(proband_age, int) or not (0 <= proband_age <= max_age):
        raise InvalidAge(f"proband age must be in [0, {max_age}]")
    proband = Individual(id=1, sex=proband_sex, age=proband_age)
    return Pedigree(
        pedigree_id=pedigree_id,
        proband_id=1,
        revision=1,
        next_id=2,
        members=(proband,),
    )


@dataclass(frozen=True)
class CoreCounts:
    daughters: int = 0
    sons: int = 0
    sisters: int = 0
    brothers: int = 0
    maternal_aunts: int = 0
    maternal_uncles: int = 0
    paternal_aunts: int = 0
    paternal_uncles: int = 0

    def __post_init__(self):
        for name, value in vars(self).items():
            if not isinstance(value, int) or value < 0:
                raise ValidationFailed(f"count {name} must be >= 0")


class _Draft:
    """Mutable scratch copy of a pedigree during one builder operation."""

    def __init__(self, p: Pedigree):
        self.p = p
        self.members = p.member_map()
        self.unions = list(p.unions)
        self.next_id = p.next_id

    def fresh(self, **fields) -> Individual:
        ind = Individual(id=self.next_id, **fields)
        self.members[ind.id] = ind
        self.next_id += 1
        return ind

    def ensure_union(self, a: int, b: int) -> tuple[int, int]:
        pair = _norm_union(a, b)
        if pair not in self.unions:
            self.unions.append(pair)
        return pair

    def parents_for_union(self, pair: tuple[int, int]) -> tuple[int, int]:
        """(father_id, mother_id) for a partner pair."""
        a, b = pair
        if self.members[a].sex == "male":
            father, mother = a, b
        else:
            father, mother = b, a
        if self.members[father].sex != "male" or self.members[mother].sex != "female":
            raise SexConflict("a union needs one male and one female co-parent")
        return father, mother

    def commit(self) -> Pedigree:
        return self.p.with_members(self.members, self.unions, self.next_id)


def _ensure_parents(d: _Draft, child_id: int) -> tuple[int, int]:
    """Return (father_id, mother_id), auto-creating founder parents once."""
    child = d.members[child_id]
    if child.has_parents:
        return child.father_id, child.mother_id
    father = d.fresh(sex="male", auto_created=True)
    mother = d.fresh(sex="female", auto_created=True)
    d.ensure_union(father.id, mother.id)
    d.members[child_id] = replace(
        child, father_id=father.id, mother_id=mother.id
    )
    return father.id, mother.id


def _add_child(d: _Draft, father_id: int, mother_id: int, sex: str) -> Individual:
    d.ensure_union(father_id, mother_id)
    return d.fresh(sex=sex, father_id=father_id, mother_id=mother_id)


def _partner_for_children(d: _Draft, anchor_id: int) -> tuple[int, int]:
    """Union used when adding a child to anchor: latest union, else new auto
    partner of the opposite sex."""
    existing = [u for u in d.unions if anchor_id in u]
    if existing:
        return d.parents_for_union(existing[-1])
    partner = d.fresh(sex=_opposite(d.members[anchor_id].sex), auto_created=True)
    pair = d.ensure_union(anchor_id, partner.id)
    return d.parents_for_union(pair)


def add_core_relatives(p: Pedigree, counts: CoreCounts) -> Pedigree:
    """First-screen expansion around the proband.

    Parents are always added; grandparents appear on a side only when that
    side contributes aunts or uncles.
    """
    d = _Draft(p)
    father_id, mother_id = _ensure_parents(d, p.proband_id)

    for _ in range(counts.sisters):
        _add_child(d, father_id, mother_id, "female")
    for _ in range(counts.brothers):
        _add_child(d, father_id, mother_id, "male")

    if counts.daughters or counts.sons:
        pf, pm = _partner_for_children(d, p.proband_id)
        for _ in range(counts.daughters):
            _add_child(d, pf, pm, "female")
        for _ in range(counts.sons):
            _add_child(d, pf, pm, "male")

    for parent_id, aunts, uncles in (
        (mother_id, counts.maternal_aunts, counts.maternal_uncles),
        (father_id, counts.paternal_aunts, counts.paternal_uncles),
    ):
        if aunts + uncles == 0:
            continue
        gf, gm = _ensure_parents(d, parent_id)
        for _ in range(aunts):
            _add_child(d, gf, gm, "female")
        for _ in range(uncles):
            _add_child(d, gf, gm, "male")

    return d.commit()


def add_relative(p: Pedigree, anchor_id: int, relation: str, sex: str) -> Pedigree:
    """Attach one new relative to the anchor; co-parents are auto-created
    wherever a child link needs one."""
    if relation not in RELATIONS:
        raise ValidationFailed(f"relation must be one of {RELATIONS}")
    if sex not in SEXES:
        raise SexConflict(f"sex must be one of {SEXES}")
    anchor = p.member(anchor_id)
    d = _Draft(p)

    if relation == "parent":
        if anchor.has_parents:
            raise SlotOccupied(f"individual {anchor_id} already has parents")
        if sex == "male":
            father = d.fresh(sex="male")
            mother = d.fresh(sex="female", auto_created=True)
        else:
            mother = d.fresh(sex="female")
            father = d.fresh(sex="male", auto_created=True)
        d.ensure_union(father.id, mother.id)
        d.members[anchor_id] = replace(
            anchor, father_id=father.id, mother_id=mother.id
        )
    elif relation == "partner":
        if sex == anchor.sex:
            raise SexConflict("a co-parenting partner must be of the opposite sex")
        partner = d.fresh(sex=sex)
        d.ensure_union(anchor_id, partner.id)
    elif relation == "child":
        pf, pm = _partner_for_children(d, anchor_id)
        _add_child(d, pf, pm, sex)
    elif relation == "sibling":
        father_id, mother_id = _ensure_parents(d, anchor_id)
        _add_child(d, father_id, mother_id, sex)
    else:
        via = "mother" if relation.endswith("mother") else "father"
        shared = getattr(anchor, f"{via}_id")
        if shared is None:
            raise SlotOccupied(
                f"individual {anchor_id} has no recorded {via} to share"
            )
        partner = d.fresh(sex=_opposite(d.members[shared].sex), auto_created=True)
        pair = d.ensure_union(shared, partner.id)
        pf, pm = d.parents_for_union(pair)
        _add_child(d, pf, pm, sex)

    return d.commit()


def remove_individual(p: Pedigree, individual_id: int) -> Pedigree:
    """Remove one relative.

    Refused for the proband, for anyone with children still present, and
    for removals that would cut a non-auto-created member off the family.
    Childless auto-created co-parents left dangling are swept out with the
    removal.
    """
    if individual_id == p.proband_id:
        raise CannotRemoveProband("the proband anchors the pedigree")
    p.member(individual_id)
    if p.children_of(individual_id):
        raise WouldOrphanChildren(
            f"individual {individual_id} has children; remove or relink them first"
        )

    members = p.member_map()
    unions = list(p.unions)

    def drop(mid: int):
        del members[mid]
        unions[:] = [u for u in unions if mid not in u]

    drop(individual_id)

    # sweep auto co-parents whose only tie was the removed branch
    changed = True
    while changed:
        changed = False
        for mid, ind in list(members.items()):
            if not ind.auto_created or mid == p.proband_id:
                continue
            has_children = any(
                mid in (m.mother_id, m.father_id) for m in members.values()
            )
            if not has_children and not ind.has_parents:
                drop(mid)
                changed = True

    _check_connected(p, members, unions)
    return p.with_members(members, unions)


def _check_connected(p: Pedigree, members: dict, unions: list):
    edges: dict[int, set[int]] = {mid: set() for mid in members}
    for m in members.values():
        if m.has_parents:
            for pid in (m.mother_id, m.father_id):
                if pid in members:
                    edges[m.id].add(pid)
                    edges[pid].add(m.id)
    for a, b in unions:
        if a in members and b in members:
            edges[a].add(b)
            edges[b].add(a)
    seen = {p.proband_id}
    stack = [p.proband_id]
    while stack:
        for nxt in edges[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    stranded = set(members) - seen
    if stranded:
        raise WouldOrphanChildren(
            f"removal would disconnect individuals {sorted(stranded)}"
        )


def update_individual(
    p: Pedigree, individual_id: int, kb: KnowledgeBase, **patch
) -> Pedigree:
    """Apply a field patch, checking content invariants against the bundle."""
    current = p.member(individual_id)
    for key in ("id", "mother_id", "father_id", "is_clone_of", "auto_created"):
        if key in patch:
            raise ValidationFailed(f"{key} cannot be patched directly")
    updated = replace(current, **patch)
    _check_against_kb(p, updated, kb)

    members = p.member_map()
    members[individual_id] = updated
    return p.with_members(members)


def _check_against_kb(p: Pedigree, ind: Individual, kb: KnowledgeBase):
    if ind.age is not None and ind.age > kb.max_age:
        raise InvalidAge(f"age {ind.age} exceeds bundle maximum {kb.max_age}")
    if ind.race is not None and ind.race not in kb.races:
        raise ValidationFailed(f"race {ind.race!r} not in bundle enumeration")
    if ind.ancestry is not None and ind.ancestry not in kb.ancestries:
        raise ValidationFailed(f"ancestry {ind.ancestry!r} not in bundle enumeration")

    if ind.sex == "male":
        for kind in FEMALE_ONLY_SURGERIES:
            if ind.surgery_of(kind):
                raise SexConflict(f"{kind} recorded for a male individual")

    regular = {c.name: c for c in kb.regular_cancers()}
    for dx in ind.cancers:
        if not dx.is_model_cancer:
            if dx.cancer_name in regular:
                raise ValidationFailed(
                    f"{dx.cancer_name} is a model cancer; record it as one"
                )
            continue
        spec = regular.get(dx.cancer_name)
        if spec is None:
            raise ValidationFailed(
                f"unknown model cancer {dx.cancer_name!r}; flag free-text "
                "entries with is_model_cancer=False"
            )
        if not spec.allows_sex(ind.sex):
            raise SexRestrictedCancer(
                f"{dx.cancer_name} is restricted to {spec.sex_restriction}s"
            )
        if dx.age_at_diagnosis is not None and dx.age_at_diagnosis > kb.max_age:
            raise InvalidAge(f"diagnosis age {dx.age_at_diagnosis} out of range")

    if ind.markers is not None:
        for (cancer, marker), _ in ind.markers.statuses.items():
            if marker not in kb.markers.get(cancer, ()):
                raise ValidationFailed(f"no marker {marker!r} for {cancer!r}")
            if ind.diagnosis_of(cancer) is None:
                raise MarkerWithoutCancer(
                    f"{cancer} markers require a {cancer} diagnosis"
                )

    if ind.cbc is not None:
        if ind.diagnosis_of("breast") is None:
            raise CBCWithoutBreastCancer(
                "contralateral-risk inputs require a breast cancer diagnosis"
            )
        for modifier, value in ind.cbc.items():
            if (modifier, value) not in kb.cbc_table:
                raise ValidationFailed(f"unknown {modifier} value {value!r}")

    if ind.panel is not None:
        known = {g.name for g in kb.genes}
        unknown = ind.panel.genes_tested - known
        if unknown:
            raise UnknownGene(f"panel names unknown genes {sorted(unknown)}")

    # a sex change must not contradict existing parent roles
    for child in p.children_of(ind.id):
        if child.father_id == ind.id and ind.sex != "male":
            raise SexConflict(f"{ind.id} is recorded as a father and must be male")
        if child.mother_id == ind.id and ind.sex != "female":
            raise SexConflict(f"{ind.id} is recorded as a mother and must be female")
