"""Builder, validation, loop-breaking, and table serialization."""

import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from famrisk.errors import (
    CannotRemoveProband,
    CBCWithoutBreastCancer,
    DiagnosisAfterDeath,
    InvalidAge,
    MarkerWithoutCancer,
    SexConflict,
    SexRestrictedCancer,
    SlotOccupied,
    ValidationFailed,
    WouldOrphanChildren,
)
from famrisk.pedigree import (
    CancerDiagnosis,
    CBCModifiers,
    CoreCounts,
    Finding,
    Individual,
    PanelResult,
    Pedigree,
    Surgery,
    TumorMarkers,
    add_core_relatives,
    add_relative,
    create_pedigree,
    detect_and_break_loops,
    pedigree_from_table,
    remove_individual,
    table_from_csv,
    to_model_table,
    update_individual,
    validate_pedigree,
)
from famrisk.pedigree.loops import _find_cycle


@pytest.fixture
def proband():
    return create_pedigree("fam-001", "female", 40)


# ------------------------------------------------------------------ create


def test_create_minimal(proband):
    assert len(proband.members) == 1
    assert proband.proband.sex == "female"
    assert proband.revision == 1


def test_create_bad_age():
    with pytest.raises(InvalidAge):
        create_pedigree("fam-001", "female", -1)
    with pytest.raises(InvalidAge):
        create_pedigree("fam-001", "female", 96)


# ------------------------------------------------------------ core screen


def test_core_all_zeros_adds_parents(proband):
    p = add_core_relatives(proband, CoreCounts())
    assert len(p.members) == 3  # parents are unconditional
    assert p.proband.father_id is not None


def test_core_maternal_aunt_pulls_grandparents(proband):
    p = add_core_relatives(proband, CoreCounts(maternal_aunts=1))
    assert len(p.members) == 6
    mother = p.member(p.proband.mother_id)
    assert mother.has_parents
    aunt = [m for m in p.members if m.sex == "female" and m.mother_id == mother.mother_id and m.id != mother.id]
    assert len(aunt) == 1
    # no aunts on the paternal side -> no paternal grandparents
    father = p.member(p.proband.father_id)
    assert not father.has_parents


def test_core_daughters_get_auto_partner(proband):
    p = add_core_relatives(proband, CoreCounts(daughters=2))
    assert len(p.members) == 6
    daughters = [m for m in p.members if m.mother_id == 1]
    assert len(daughters) == 2
    partner_ids = {d.father_id for d in daughters}
    assert len(partner_ids) == 1
    partner = p.member(partner_ids.pop())
    assert partner.auto_created and partner.sex == "male"


# ---------------------------------------------------------- add relative


def test_add_niece(proband):
    p = add_core_relatives(proband, CoreCounts(sisters=1))
    sister = next(m for m in p.members if m.id not in (1, 2, 3))
    p = add_relative(p, sister.id, "child", "female")
    niece = p.member(p.next_id - 1)
    assert sister.id in (niece.father_id, niece.mother_id)
    other = niece.father_id if niece.mother_id == sister.id else niece.mother_id
    assert p.member(other).auto_created


def test_add_great_grandparent_chain(proband):
    p = add_core_relatives(proband, CoreCounts(maternal_aunts=1))
    grandfather = p.member(p.member(p.proband.mother_id).father_id)
    p = add_relative(p, grandfather.id, "parent", "male")
    great = p.member(p.member(grandfather.id).father_id)
    assert not great.has_parents
    assert not validate_pedigree_blocking(p)


def test_add_parent_slot_occupied(proband):
    p = add_core_relatives(proband, CoreCounts())
    with pytest.raises(SlotOccupied):
        add_relative(p, 1, "parent", "male")


def test_add_same_sex_partner_rejected(proband):
    with pytest.raises(SexConflict):
        add_relative(proband, 1, "partner", "female")


def test_half_sibling_shares_one_parent(proband):
    p = add_core_relatives(proband, CoreCounts())
    p = add_relative(p, 1, "half_sibling_via_mother", "male")
    half = p.member(p.next_id - 1)
    assert half.mother_id == p.proband.mother_id
    assert half.father_id != p.proband.father_id


def test_sibling_autocreates_parents(proband):
    p = add_relative(proband, 1, "sibling", "male")
    brother = p.member(p.next_id - 1)
    assert brother.father_id == p.proband.father_id != None  # noqa: E711
    assert len(p.members) == 4


def validate_pedigree_blocking(p):
    from famrisk.kb import load_bundle

    return validate_pedigree(p, load_bundle("kb-synth-1")).blocking


# --------------------------------------------------------------- removal


def test_remove_childless_aunt(proband):
    p = add_core_relatives(proband, CoreCounts(maternal_aunts=1))
    aunt = max(m.id for m in p.members)
    p2 = remove_individual(p, aunt)
    assert len(p2.members) == len(p.members) - 1


def test_remove_proband_refused(proband):
    with pytest.raises(CannotRemoveProband):
        remove_individual(proband, 1)


def test_remove_parent_with_children_refused(proband):
    p = add_core_relatives(proband, CoreCounts())
    with pytest.raises(WouldOrphanChildren):
        remove_individual(p, p.proband.mother_id)


def test_remove_child_sweeps_auto_partner(proband):
    p = add_core_relatives(proband, CoreCounts(daughters=1))
    daughter = next(m for m in p.members if m.mother_id == 1)
    p2 = remove_individual(p, daughter.id)
    # daughter and her auto-created co-parent both gone
    assert len(p2.members) == len(p.members) - 2
    assert all(not m.auto_created or p2.children_of(m.id) for m in p2.members if m.id not in (2, 3))


def test_remove_keeps_explicit_partner_guard(proband):
    p = add_relative(proband, 1, "partner", "male")
    partner = p.next_id - 1
    p = add_relative(p, 1, "child", "female")
    child = p.next_id - 1
    # removing the child leaves the explicit partner linked via the union
    p2 = remove_individual(p, child)
    assert p2.has_member(partner)


def test_revision_strictly_increases(proband):
    p1 = add_core_relatives(proband, CoreCounts())
    p2 = add_relative(p1, 1, "child", "male")
    p3 = remove_individual(p2, p2.next_id - 1)
    revs = [proband.revision, p1.revision, p2.revision, p3.revision]
    assert revs == sorted(set(revs))


# ---------------------------------------------------------------- update


def test_update_diagnosis_accepted(kb, proband):
    p = add_core_relatives(proband, CoreCounts(sisters=1))
    sister = next(m.id for m in p.members if m.id not in (1, 2, 3))
    p = update_individual(
        p, sister, kb, age=50,
        cancers=(CancerDiagnosis("breast", 45),),
    )
    assert p.member(sister).diagnosis_of("breast").age_at_diagnosis == 45


def test_update_sex_restricted_cancer(kb, proband):
    p = add_core_relatives(proband, CoreCounts(brothers=1))
    brother = next(m.id for m in p.members if m.sex == "male" and m.has_parents)
    with pytest.raises(SexRestrictedCancer):
        update_individual(p, brother, kb, cancers=(CancerDiagnosis("ovarian", 40),))


def test_update_marker_without_cancer(kb, proband):
    with pytest.raises(MarkerWithoutCancer):
        update_individual(
            p := proband, 1, kb,
            markers=TumorMarkers({("breast", "ER"): "positive"}),
        )


def test_update_cbc_without_breast_cancer(kb, proband):
    with pytest.raises(CBCWithoutBreastCancer):
        update_individual(
            proband, 1, kb, cbc=CBCModifiers(anti_estrogen_therapy="yes")
        )


def test_diagnosis_after_death(kb, proband):
    with pytest.raises(DiagnosisAfterDeath):
        update_individual(
            proband, 1, kb, deceased=True, age=50,
            cancers=(CancerDiagnosis("breast", 60),),
        )


def test_update_free_text_cancer_allowed(kb, proband):
    p = update_individual(
        proband, 1, kb,
        cancers=(CancerDiagnosis("angiosarcoma-other", 35, is_model_cancer=False),),
    )
    report = validate_pedigree(p, kb)
    assert not report.blocking
    assert any("excluded" in line for line in report.assumptions)


def test_update_hysterectomy_on_male(kb, proband):
    p = add_core_relatives(proband, CoreCounts())
    with pytest.raises(SexConflict):
        update_individual(p, 2, kb, surgeries=(Surgery("hysterectomy", 40),))


# -------------------------------------------------------------- validate


def test_validate_missing_age_warns(kb, proband):
    p = add_core_relatives(proband, CoreCounts())
    report = validate_pedigree(p, kb)
    assert not report.blocking
    assert any("age unknown" in w for w in report.warnings)


def test_validate_father_marked_female_blocks(kb):
    members = (
        Individual(id=1, sex="female", age=30, mother_id=3, father_id=2),
        Individual(id=2, sex="female"),  # father with wrong sex
        Individual(id=3, sex="female"),
    )
    p = Pedigree("bad", 1, 1, 4, members, ((2, 3),))
    report = validate_pedigree(p, kb)
    assert report.blocking
    assert any("father" in e and "male" in e for e in report.errors)


def test_validate_plp_heterozygous_note(kb, proband):
    p = update_individual(
        proband, 1, kb,
        panel=PanelResult("panel", frozenset({"BRCA1"}), {"BRCA1": Finding("PLP")}),
    )
    report = validate_pedigree(p, kb)
    assert any("heterozygous" in a for a in report.assumptions)


def test_validate_disconnected_blocks(kb):
    members = (
        Individual(id=1, sex="female", age=30),
        Individual(id=2, sex="male", age=60),  # floating relative
    )
    p = Pedigree("bad", 1, 1, 3, members)
    report = validate_pedigree(p, kb)
    assert report.blocking


# ------------------------------------------------------------------ loops


def _I(id, sex, f=None, m=None):
    return Individual(id=id, sex=sex, father_id=f, mother_id=m)


def cousin_marriage():
    """Proband's parents are first cousins via shared grandparents 8, 9."""
    members = (
        _I(1, "female", 2, 3),
        _I(2, "male", 4, 5),
        _I(3, "female", 7, 6),
        _I(4, "male", 8, 9),
        _I(5, "female"),
        _I(6, "female", 8, 9),
        _I(7, "male"),
        _I(8, "male"),
        _I(9, "female"),
    )
    return Pedigree("loop", 1, 1, 10, members, ((2, 3), (4, 5), (6, 7), (8, 9)))


def test_break_cousin_loop(kb):
    p = cousin_marriage()
    assert _find_cycle(p) is not None
    broken, pairs = detect_and_break_loops(p)
    assert len(pairs) == 1
    assert _find_cycle(broken) is None
    original, clone = pairs[0]
    c = broken.member(clone)
    assert c.is_clone_of == original
    assert not c.has_parents  # clones re-enter as founders
    assert not validate_pedigree(broken, kb).blocking


def test_break_loop_idempotent():
    broken, _ = detect_and_break_loops(cousin_marriage())
    again, pairs = detect_and_break_loops(broken)
    assert pairs == []
    assert again is broken


def test_tree_is_identity(proband):
    p = add_core_relatives(proband, CoreCounts(sisters=2, maternal_aunts=1))
    same, pairs = detect_and_break_loops(p)
    assert same is p and pairs == []


def test_double_loop_two_clones():
    # the cousin marriage plus a second union between the same sibships:
    # father's brother 13 married mother's sister 14 -> two independent loops
    base = cousin_marriage()
    members = base.members + (
        _I(13, "male", 4, 5),
        _I(14, "female", 7, 6),
        _I(15, "female", 13, 14),
    )
    unions = base.unions + ((13, 14),)
    p = Pedigree("dbl", 1, 1, 16, members, unions)
    broken, pairs = detect_and_break_loops(p)
    assert len(pairs) == 2
    assert _find_cycle(broken) is None


def test_clone_carries_phenotype(kb):
    p = cousin_marriage()
    p = update_individual(p, 2, kb, age=70, cancers=(CancerDiagnosis("colorectal", 55),))
    broken, pairs = detect_and_break_loops(p)
    original, clone = pairs[0]
    assert original == 2
    c = broken.member(clone)
    assert c.diagnosis_of("colorectal").age_at_diagnosis == 55
    assert c.age == 70


# ------------------------------------------------------------------ table


def test_table_three_members(kb, proband):
    p = add_core_relatives(proband, CoreCounts())
    t = to_model_table(p, kb)
    assert len(t.rows) == 3
    # founders precede the proband
    assert [r.id for r in t.rows] == [2, 3, 1]
    row = t.proband_row
    assert (row.father, row.mother) == (2, 3)
    assert row.race == kb.default_race  # default filled in


def test_table_row_order_topological(kb, proband):
    p = add_core_relatives(proband, CoreCounts(maternal_aunts=1, daughters=1))
    t = to_model_table(p, kb)
    pos = {r.id: i for i, r in enumerate(t.rows)}
    for r in t.rows:
        if r.father is not None:
            assert pos[r.father] < pos[r.id]
            assert pos[r.mother] < pos[r.id]


def test_table_free_text_cancer_excluded(kb, proband):
    p = update_individual(
        proband, 1, kb,
        cancers=(CancerDiagnosis("angiosarcoma-other", 35, is_model_cancer=False),),
    )
    t = to_model_table(p, kb)
    assert t.proband_row.diagnoses == ()


def test_table_roundtrip_identical(kb, proband):
    p = add_core_relatives(proband, CoreCounts(sisters=1, daughters=1, paternal_uncles=1))
    sister = next(m.id for m in p.members if m.has_parents and m.id != 1 and m.sex == "female")
    p = update_individual(
        p, sister, kb, age=50, race="Black", ancestry="Italian",
        cancers=(CancerDiagnosis("breast", 45),),
        markers=TumorMarkers({("breast", "ER"): "positive", ("breast", "CK14"): "negative"}),
        surgeries=(Surgery("bilateral_oophorectomy", 47),),
        panel=PanelResult("p", frozenset({"BRCA1", "G3"}), {"BRCA1": Finding("PLP")}),
    )
    p = update_individual(
        p, 1, kb, cancers=(CancerDiagnosis("breast", 38),),
        cbc=CBCModifiers(first_breast_cancer_type="dcis", anti_estrogen_therapy="yes"),
    )
    csv1 = to_model_table(p, kb).to_csv()
    rebuilt = pedigree_from_table(table_from_csv(csv1, kb))
    csv2 = to_model_table(rebuilt, kb).to_csv()
    assert csv1 == csv2


def test_table_injective_on_model_fields(kb, proband):
    p = add_core_relatives(proband, CoreCounts(sisters=1))
    base = to_model_table(p, kb).to_csv()
    variants = [
        update_individual(p, 1, kb, age=41),
        update_individual(p, 1, kb, deceased=True),
        update_individual(p, 1, kb, race="Asian"),
        update_individual(p, 1, kb, cancers=(CancerDiagnosis("thyroid", 30),)),
        update_individual(p, 1, kb, surgeries=(Surgery("hysterectomy", 39),)),
        update_individual(p, 1, kb, panel=PanelResult("p", frozenset({"G5"}))),
    ]
    tables = [to_model_table(v, kb).to_csv() for v in variants]
    assert len({base, *tables}) == len(tables) + 1


def test_table_rejects_blocking_pedigree(kb):
    members = (
        Individual(id=1, sex="female", age=30),
        Individual(id=2, sex="male", age=60),
    )
    p = Pedigree("bad", 1, 1, 3, members)
    with pytest.raises(ValidationFailed):
        to_model_table(p, kb)


# ------------------------------------------------- builder property tests

RELATIONS = ("parent", "partner", "child", "sibling",
             "half_sibling_via_mother", "half_sibling_via_father")


def apply_random_ops(draw, n_ops: int):
    """Random successful builder-op sequence; invalid picks are skipped."""
    p = create_pedigree(
        "prop",
        draw(st.sampled_from(("female", "male"))),
        draw(st.integers(min_value=0, max_value=95)),
    )
    p = add_core_relatives(
        p,
        CoreCounts(
            daughters=draw(st.integers(0, 2)),
            sons=draw(st.integers(0, 2)),
            sisters=draw(st.integers(0, 2)),
            brothers=draw(st.integers(0, 2)),
            maternal_aunts=draw(st.integers(0, 1)),
            maternal_uncles=draw(st.integers(0, 1)),
            paternal_aunts=draw(st.integers(0, 1)),
            paternal_uncles=draw(st.integers(0, 1)),
        ),
    )
    for _ in range(n_ops):
        ids = sorted(m.id for m in p.members)
        anchor = draw(st.sampled_from(ids))
        op = draw(st.sampled_from(("add", "add", "add", "remove")))
        if op == "add":
            relation = draw(st.sampled_from(RELATIONS))
            sex = draw(st.sampled_from(("female", "male")))
            try:
                p = add_relative(p, anchor, relation, sex)
            except (SlotOccupied, SexConflict):
                continue
        else:
            try:
                p = remove_individual(p, anchor)
            except (CannotRemoveProband, WouldOrphanChildren):
                continue
    return p


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_builder_sequences_always_valid(kb_prop, data):
    p = apply_random_ops(data.draw, n_ops=8)
    report = validate_pedigree(p, kb_prop)
    assert report.errors == []
    broken, pairs = detect_and_break_loops(p)
    assert pairs == []  # builder relations cannot create loops
    again, pairs2 = detect_and_break_loops(broken)
    assert pairs2 == []


@pytest.fixture(scope="module")
def kb_prop():
    from famrisk.kb import load_bundle

    return load_bundle("kb-synth-1")
