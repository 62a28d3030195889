"""Risk-engine behavior: state space, priors, transmission, likelihood,
peeling vs. enumeration, imputation, and risk curves.

Derived expectations are recomputed here with independent per-year
products over curves read straight from the bundle, never through the
engine's own combination code.
"""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from famrisk.engine import (
    RunSettings,
    build_state_space,
    enumerate_posterior,
    founder_prior,
    impute_ages,
    peel_pedigree,
    phenotype_likelihood,
    run_model,
)
from famrisk.engine.likelihood import LikelihoodContext
from famrisk.engine.risk import (
    cbc_risk_curves,
    conditional_risk_curve,
    future_risk_curves,
    risk_horizons,
)
from famrisk.engine.runner import oracle_posterior
from famrisk.engine.settings import resolve_settings
from famrisk.engine.states import build_transmission
from famrisk.errors import (
    CancerNotApplicable,
    InfeasibleConstraints,
    LoopDetected,
    NotApplicable,
    RangeError,
    StateSpaceOverflow,
    TooLarge,
    UnknownGene,
    ValidationFailed,
)
from famrisk.kb import carrier_prior
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
    create_pedigree,
    to_model_table,
    update_individual,
)
from famrisk.pedigree.model import _norm_union


def custom(genes, cancers=("breast", "ovarian"), M=None, **kw):
    return RunSettings(
        model_name="custom",
        genes=tuple(genes),
        cancers=tuple(cancers),
        max_carried=M if M is not None else len(genes),
        **kw,
    )


def resolved_for(kb, genes, cancers=("breast", "ovarian"), M=None, **kw):
    return resolve_settings(custom(genes, cancers, M, **kw), kb)


def lone_proband(sex="female", age=0, pid="fam-x"):
    return create_pedigree(pid, sex, age)


# ------------------------------------------------------------ state space


def test_state_space_sizes(kb):
    r = resolve_settings(RunSettings(), kb)
    space = build_state_space(r)
    # sum_{k<=2} C(22, k)
    assert len(space) == 1 + 22 + 231
    assert space.labels[0] == "none"
    assert len(set(space.labels)) == len(space)


def test_state_space_m1(kb):
    space = build_state_space(resolved_for(kb, ("BRCA1", "BRCA2", "G3"), M=1))
    assert len(space) == 4
    assert set(space.labels) == {"none", "BRCA1", "BRCA2", "G3"}


def test_multi_variant_state_space(kb):
    r = resolved_for(kb, ("BRCA1", "BRCA2", "G3"), M=3, brca_multi_variant=True)
    space = build_state_space(r)
    # BRCA1/BRCA2 get an extra level: product over subsets of (2,2,1)-sized
    # level choices = 18 states
    assert len(space) == 18
    assert "BRCA1*2" in space.labels
    assert "BRCA1*2+BRCA2*2+G3" in space.labels


@given(m=st.integers(min_value=1, max_value=4))
def test_paring_bound_holds(kb, m):
    space = build_state_space(
        resolved_for(kb, ("BRCA1", "BRCA2", "G3", "G4", "G5"), M=m)
    )
    assert int(space.carried_counts().max()) == m
    expected = sum(math.comb(5, k) for k in range(m + 1))
    assert len(space) == expected


def test_index_of_roundtrip(kb):
    space = build_state_space(resolved_for(kb, ("BRCA1", "G3"), M=2))
    idx = space.index_of({"G3": 1})
    assert space.labels[idx] == "G3"
    assert space.index_of({}) == 0


# ---------------------------------------------------------- founder prior


def two_gene_kb_with_prior(kb, p=0.01):
    """Bundle variant whose first two genes have carrier prior exactly p."""
    f = 1.0 - math.sqrt(1.0 - p)
    g1 = dataclasses.replace(
        kb.genes[0], allele_frequency=f, ancestry_adjustments={}
    )
    g2 = dataclasses.replace(
        kb.genes[1], allele_frequency=f, ancestry_adjustments={}
    )
    return dataclasses.replace(kb, genes=(g1, g2) + kb.genes[2:])


def test_prior_two_genes_unpared(kb):
    kb2 = two_gene_kb_with_prior(kb)
    names = (kb2.genes[0].name, kb2.genes[1].name)
    space = build_state_space(resolved_for(kb2, names, M=2))
    prior = founder_prior(space, kb2, "none")
    by_label = dict(zip(space.labels, prior))
    assert by_label["none"] == pytest.approx(0.9801, abs=1e-12)
    assert by_label[names[0]] == pytest.approx(0.0099, abs=1e-12)
    assert by_label[names[1]] == pytest.approx(0.0099, abs=1e-12)
    assert by_label["+".join(names)] == pytest.approx(0.0001, abs=1e-12)


def test_prior_pared_renormalizes(kb):
    kb2 = two_gene_kb_with_prior(kb)
    names = (kb2.genes[0].name, kb2.genes[1].name)
    space = build_state_space(resolved_for(kb2, names, M=1))
    prior = founder_prior(space, kb2, "none")
    total = 0.9801 + 0.0099 + 0.0099
    assert prior == pytest.approx(
        np.array([0.9801, 0.0099, 0.0099]) / total, abs=1e-12
    )
    assert prior.sum() == pytest.approx(1.0, abs=1e-12)


def test_prior_uses_ancestry_override(kb):
    space = build_state_space(resolved_for(kb, ("BRCA1", "BRCA2"), M=2))
    base = founder_prior(space, kb, "none")
    aj = founder_prior(space, kb, "AshkenaziJewish")
    gi = space.labels.index("BRCA1")
    assert aj[gi] > base[gi]  # founder-enriched frequency


def test_prior_multi_variant_levels(kb):
    r = resolved_for(kb, ("BRCA1", "G3"), M=2, brca_multi_variant=True)
    space = build_state_space(r)
    prior = founder_prior(space, kb, "none")
    f = kb.gene("BRCA1").allele_frequency
    by_label = dict(zip(space.labels, prior))
    # the two levels split the Hardy-Weinberg carrier mass
    combined = by_label["BRCA1"] + by_label["BRCA1*2"]
    ratio = combined / by_label["none"]
    expected = (2 * f * (1 - f) + f * f) / (1 - f) ** 2
    assert ratio == pytest.approx(expected, rel=1e-12)
    assert by_label["BRCA1*2"] / by_label["BRCA1"] == pytest.approx(
        f / (2 * (1 - f)), rel=1e-12
    )


def test_prior_sums_to_one_every_ancestry(kb):
    space = build_state_space(resolve_settings(RunSettings(), kb))
    for ancestry in kb.ancestries:
        assert founder_prior(space, kb, ancestry).sum() == pytest.approx(
            1.0, abs=1e-12
        )


# ----------------------------------------------------------- transmission


def test_transmission_no_de_novo(kb):
    space = build_state_space(resolved_for(kb, ("BRCA1", "BRCA2"), M=2))
    t = build_transmission(space).dense()
    gi = space.labels.index("BRCA1")
    assert t[0, 0, gi] == 0.0
    assert t[0, 0, 0] == 1.0


def test_transmission_single_het_parent(kb):
    space = build_state_space(resolved_for(kb, ("BRCA1", "BRCA2"), M=2))
    t = build_transmission(space).dense()
    gi = space.labels.index("BRCA1")
    assert t[gi, 0, gi] == 0.5
    assert t[gi, 0, 0] == 0.5
    # symmetric in the parents
    assert np.array_equal(t[gi, 0, :], t[0, gi, :])


def test_transmission_both_het(kb):
    space = build_state_space(resolved_for(kb, ("BRCA1", "BRCA2"), M=2))
    t = build_transmission(space).dense()
    gi = space.labels.index("BRCA1")
    assert t[gi, gi, gi] == 0.75
    assert t[gi, gi, 0] == 0.25


def test_transmission_mass_conserved_without_paring(kb):
    space = build_state_space(resolved_for(kb, ("BRCA1", "BRCA2", "G3"), M=3))
    t = build_transmission(space).dense()
    assert t.sum(axis=2) == pytest.approx(np.ones((8, 8)), abs=1e-12)


def test_transmission_paring_drops_mass(kb):
    # parents carrying different genes can produce a double-carrier child;
    # with M=1 that state does not exist and its mass is dropped
    space = build_state_space(resolved_for(kb, ("BRCA1", "BRCA2"), M=1))
    t = build_transmission(space).dense()
    a = space.labels.index("BRCA1")
    b = space.labels.index("BRCA2")
    assert t[a, b, :].sum() == pytest.approx(0.75, abs=1e-12)
    assert t[a, b, 0] == 0.25
    assert t[a, b, a] == 0.25
    assert t[a, b, b] == 0.25


def test_transmission_multi_variant_always_transmits(kb):
    r = resolved_for(kb, ("BRCA1", "G3"), M=2, brca_multi_variant=True)
    space = build_state_space(r)
    t = build_transmission(space).dense()
    two = space.labels.index("BRCA1*2")
    one = space.labels.index("BRCA1")
    # a two-variant parent passes a variant allele with certainty
    assert t[two, 0, one] == 1.0
    assert t[two, 0, 0] == 0.0
    assert t[two, two, two] == 1.0
    assert t[two, one, two] == 0.5
    assert t[two, one, one] == 0.5


def test_general_builder_matches_binary_fast_path(kb):
    from famrisk.engine.states import _binary_transmission, _general_transmission

    space = build_state_space(resolved_for(kb, ("BRCA1", "BRCA2", "G3"), M=2))
    fast = _binary_transmission(space).dense()
    slow = _general_transmission(space).dense()
    np.testing.assert_allclose(fast, slow, atol=1e-15)


# ------------------------------------------------------------- likelihood


def year_product(hazard, dx_age=None, censor_age=None):
    """Independent per-year oracle: plain Python loop over years."""
    out = 1.0
    if dx_age is not None:
        for t in range(dx_age):
            out *= 1.0 - hazard[t]
        return out * hazard[dx_age]
    for t in range(censor_age):
        out *= 1.0 - hazard[t]
    return out


def combined(kb, carried_genes, cancer, sex, race="White"):
    curves = [kb.baseline_hazard(cancer, sex)]
    for g in carried_genes:
        spec = kb.gene(g)
        c = spec.penetrance.get((cancer, sex))
        if c is not None:
            mult = spec.race_adjustments.get(race, 1.0)
            curves.append(np.minimum(c.annual_hazard * mult, 1 - 1e-12))
    return np.maximum.reduce(curves)


def member_row(kb, resolved, pedigree, member_id):
    table = to_model_table(
        pedigree, kb, default_race=resolved.default_race,
        default_ancestry=resolved.default_ancestry,
    )
    return table.row(member_id)


def test_newborn_likelihood_is_one(kb):
    r = resolved_for(kb, ("BRCA1", "BRCA2"), ("breast", "ovarian", "colorectal"))
    space = build_state_space(r)
    row = member_row(kb, r, lone_proband(age=0), 1)
    like = phenotype_likelihood(row, kb, r, space)
    np.testing.assert_array_equal(like, np.ones(len(space)))


def test_likelihood_matches_year_product_oracle(kb):
    r = resolved_for(kb, ("BRCA1", "BRCA2"), ("breast", "ovarian"))
    space = build_state_space(r)
    p = lone_proband(age=48)
    p = update_individual(p, 1, kb, cancers=(CancerDiagnosis("breast", 40),))
    row = member_row(kb, r, p, 1)
    like = phenotype_likelihood(row, kb, r, space)
    for label, carried in [("none", ()), ("BRCA1", ("BRCA1",)),
                           ("BRCA1+BRCA2", ("BRCA1", "BRCA2"))]:
        expected = year_product(
            combined(kb, carried, "breast", "female"), dx_age=40
        ) * year_product(
            combined(kb, carried, "ovarian", "female"), censor_age=48
        )
        assert like[space.labels.index(label)] == pytest.approx(
            expected, rel=1e-12
        ), label


def test_likelihood_race_multiplier_applied(kb):
    r = resolved_for(kb, ("BRCA1",), ("breast",))
    space = build_state_space(r)
    p = Pedigree(
        pedigree_id="fam-race",
        proband_id=1,
        revision=1,
        next_id=2,
        members=(
            Individual(
                id=1, sex="female", age=50, race="Black",
                cancers=(CancerDiagnosis("breast", 45),),
            ),
        ),
        unions=(),
    )
    row = member_row(kb, r, p, 1)
    like = phenotype_likelihood(row, kb, r, space)
    expected = year_product(
        combined(kb, ("BRCA1",), "breast", "female", race="Black"), dx_age=45
    )
    assert like[1] == pytest.approx(expected, rel=1e-12)
    # the multiplier actually moves the number
    plain = year_product(combined(kb, ("BRCA1",), "breast", "female"), dx_age=45)
    assert like[1] != pytest.approx(plain, rel=1e-9)


def test_likelihood_deceased_censors_at_death_age(kb):
    r = resolved_for(kb, ("BRCA1",), ("breast",))
    space = build_state_space(r)
    p = Pedigree(
        pedigree_id="fam-dead", proband_id=1, revision=1, next_id=2,
        members=(
            Individual(id=1, sex="female", age=61, deceased=True),
        ),
        unions=(),
    )
    row = member_row(kb, r, p, 1)
    like = phenotype_likelihood(row, kb, r, space)
    expected = year_product(
        combined(kb, ("BRCA1",), "breast", "female"), censor_age=61
    )
    assert like[1] == pytest.approx(expected, rel=1e-12)


def test_marker_ratios_multiply_carried_genes(kb):
    r = resolved_for(kb, ("BRCA1", "BRCA2"), ("breast", "ovarian"))
    space = build_state_space(r)
    p = lone_proband(age=50)
    base_ped = update_individual(
        p, 1, kb, cancers=(CancerDiagnosis("breast", 42),)
    )
    marked = update_individual(
        base_ped, 1, kb,
        markers=TumorMarkers({("breast", "ER"): "positive",
                              ("breast", "HER2"): "negative"}),
    )
    base = phenotype_likelihood(member_row(kb, r, base_ped, 1), kb, r, space)
    with_lr = phenotype_likelihood(member_row(kb, r, marked, 1), kb, r, space)
    for i, label in enumerate(space.labels):
        factor = 1.0
        for g in ("BRCA1", "BRCA2"):
            if g in label:
                factor *= kb.marker_lr.get(("breast", "ER", "positive", g), 1.0)
                factor *= kb.marker_lr.get(("breast", "HER2", "negative", g), 1.0)
        assert with_lr[i] == pytest.approx(base[i] * factor, rel=1e-12), label


def test_germline_constraints(kb):
    r = resolved_for(kb, ("BRCA1", "BRCA2"))
    space = build_state_space(r)
    carrier = space.carrier_states("BRCA1")

    def with_status(finding):
        p = lone_proband(age=30)
        findings = {"BRCA1": finding} if finding else {}
        p = update_individual(
            p, 1, kb,
            panel=PanelResult("p", frozenset({"BRCA1"}), findings),
        )
        return phenotype_likelihood(member_row(kb, r, p, 1), kb, r, space)

    plp = with_status(Finding("PLP", "c.1A>G", "p.M1V", "het"))
    assert np.all(plp[~carrier] == 0.0)
    assert np.all(plp[carrier] > 0.0)

    negative = with_status(None)  # tested, nothing found
    assert np.all(negative[carrier] == 0.0)

    blb = with_status(Finding("BLB", "c.5T>C", "p.L2P", "het"))
    assert np.all(blb[carrier] == 0.0)

    vus = with_status(Finding("VUS", "c.9G>A", "p.W3*", "het"))
    assert np.all(vus > 0.0)  # no constraint either way


def test_proband_germline_toggle(kb):
    r_off = resolved_for(kb, ("BRCA1", "BRCA2"), use_proband_germline=False)
    space = build_state_space(r_off)
    p = lone_proband(age=30)
    p = update_individual(
        p, 1, kb,
        panel=PanelResult(
            "p", frozenset({"BRCA1"}),
            {"BRCA1": Finding("PLP", "c.1A>G", "p.M1V", "het")},
        ),
    )
    row = member_row(kb, r_off, p, 1)
    like = phenotype_likelihood(row, kb, r_off, space)
    assert np.all(like > 0.0)  # proband findings ignored

    # the same finding on a relative always constrains
    r_on = resolved_for(kb, ("BRCA1", "BRCA2"), use_proband_germline=False)
    ped = create_pedigree("fam-rel", "female", 40)
    ped = add_core_relatives(ped, CoreCounts())
    ped = update_individual(
        ped, 3, kb, age=70,
        panel=PanelResult(
            "p", frozenset({"BRCA1"}),
            {"BRCA1": Finding("PLP", "c.1A>G", "p.M1V", "het")},
        ),
    )
    mrow = member_row(kb, r_on, ped, 3)
    mlike = phenotype_likelihood(mrow, kb, r_on, space)
    assert np.all(mlike[~space.carrier_states("BRCA1")] == 0.0)


def test_prophylactic_surgery_truncates_hazard(kb):
    r = resolved_for(kb, ("BRCA1",), ("ovarian",))
    space = build_state_space(r)
    p = lone_proband(age=60)
    p = update_individual(
        p, 1, kb, surgeries=(Surgery("bilateral_oophorectomy", 42),)
    )
    row = member_row(kb, r, p, 1)
    like = phenotype_likelihood(row, kb, r, space)
    h = combined(kb, ("BRCA1",), "ovarian", "female").copy()
    h[42:] = 0.0
    assert like[1] == pytest.approx(year_product(h, censor_age=60), rel=1e-12)

    r_off = resolved_for(kb, ("BRCA1",), ("ovarian",), apply_prophylactic=False)
    like_off = phenotype_likelihood(member_row(kb, r_off, p, 1), kb, r_off, space)
    full = combined(kb, ("BRCA1",), "ovarian", "female")
    assert like_off[1] == pytest.approx(year_product(full, censor_age=60), rel=1e-12)
    assert like_off[1] < like[1]  # surviving intact ovaries is stronger evidence


def test_diagnosis_after_organ_removal_is_impossible(kb):
    r = resolved_for(kb, ("BRCA1",), ("breast",))
    space = build_state_space(r)
    p = lone_proband(age=50)
    p = update_individual(
        p, 1, kb,
        cancers=(CancerDiagnosis("breast", 47),),
        surgeries=(Surgery("bilateral_mastectomy", 45),),
    )
    row = member_row(kb, r, p, 1)
    like = phenotype_likelihood(row, kb, r, space)
    assert np.all(like == 0.0)
    with pytest.raises(InfeasibleConstraints):
        peel_pedigree([row], kb, r, space)


# ---------------------------------------------------------------- peeling


def test_lone_newborn_recovers_prior(kb):
    r = resolve_settings(RunSettings(), kb)
    space = build_state_space(r)
    row = member_row(kb, r, lone_proband(age=0), 1)
    post = peel_pedigree([row], kb, r, space)
    prior = founder_prior(space, kb, r.default_ancestry)
    np.testing.assert_allclose(post, prior, rtol=0, atol=1e-15)


def test_peel_matches_enumeration_fixed_family(kb):
    p = create_pedigree("fam-5", "female", 44)
    p = add_core_relatives(p, CoreCounts(sisters=1, daughters=1))
    sister = next(
        m.id for m in p.members if m.sex == "female" and m.mother_id == 3
    )
    p = update_individual(
        p, sister, kb, age=51, cancers=(CancerDiagnosis("ovarian", 47),)
    )
    s = custom(("BRCA1", "BRCA2"), ("breast", "ovarian", "pancreatic"), seed=5)
    space, peeled, enumerated = oracle_posterior(p, kb, s)
    np.testing.assert_allclose(peeled, enumerated, rtol=0, atol=1e-9)
    assert peeled.sum() == pytest.approx(1.0, abs=1e-9)


def test_peel_matches_enumeration_with_markers_and_tests(kb):
    p = create_pedigree("fam-mix", "male", 37)
    p = add_core_relatives(p, CoreCounts(brothers=1, sons=1))
    p = update_individual(
        p, 3, kb, age=66,
        cancers=(CancerDiagnosis("colorectal", 52),),
        markers=TumorMarkers({("colorectal", "MMR_IHC"): "positive"}),
    )
    p = update_individual(
        p, 2, kb, age=70,
        panel=PanelResult(
            "p", frozenset({"G3", "G4"}),
            {"G3": Finding("PLP", "c.2T>C", "p.M1T", "het")},
        ),
    )
    s = custom(("G3", "G4", "G5"), ("colorectal", "endometrial"), seed=9)
    space, peeled, enumerated = oracle_posterior(p, kb, s)
    np.testing.assert_allclose(peeled, enumerated, rtol=0, atol=1e-9)
    # father PLP in G3: proband inherits it with probability noticeably
    # above the population prior
    g3 = [i for i, lab in enumerate(space.labels) if "G3" in lab]
    assert peeled[g3].sum() > 10 * carrier_prior(kb, "G3", "none")


def test_peel_ignores_disconnected_childless_partner(kb):
    from famrisk.pedigree import add_relative

    base = create_pedigree("fam-a", "female", 42)
    with_partner = add_relative(base, 1, "partner", "male")
    r = resolved_for(kb, ("BRCA1", "BRCA2"), M=2)
    space = build_state_space(r)
    post_base = peel_pedigree(
        [member_row(kb, r, base, 1)], kb, r, space
    )
    rows = to_model_table(
        with_partner, kb, default_race=r.default_race,
        default_ancestry=r.default_ancestry,
    ).rows
    completed = impute_ages(rows, kb, r)[0]
    post_partner = peel_pedigree(completed, kb, r, space)
    np.testing.assert_allclose(post_base, post_partner, atol=1e-15)


def cousin_marriage_pedigree():
    """Proband's parents are first cousins via shared grandparents 2, 3."""
    mk = Individual
    members = (
        mk(id=1, sex="female", age=30, father_id=9, mother_id=8),
        mk(id=2, sex="male", age=95),
        mk(id=3, sex="female", age=94),
        mk(id=4, sex="male", age=78, father_id=2, mother_id=3),
        mk(id=5, sex="female", age=76),
        mk(id=6, sex="female", age=74, father_id=2, mother_id=3),
        mk(id=7, sex="male", age=77),
        mk(id=8, sex="female", age=52, father_id=4, mother_id=5),
        mk(id=9, sex="male", age=54, father_id=7, mother_id=6),
    )
    unions = (
        _norm_union(2, 3), _norm_union(4, 5), _norm_union(7, 6),
        _norm_union(9, 8),
    )
    return Pedigree(
        pedigree_id="fam-loop", proband_id=1, revision=1, next_id=10,
        members=members, unions=unions,
    )


def test_peel_raises_on_loop(kb):
    p = cousin_marriage_pedigree()
    r = resolved_for(kb, ("BRCA1", "BRCA2"))
    space = build_state_space(r)
    rows = to_model_table(
        p, kb, default_race=r.default_race, default_ancestry=r.default_ancestry
    ).rows
    with pytest.raises(LoopDetected):
        peel_pedigree(rows, kb, r, space)


def test_state_space_overflow_guard(kb):
    r = resolve_settings(RunSettings(), kb)
    space = build_state_space(r)
    row = member_row(kb, r, lone_proband(age=40), 1)
    with pytest.raises(StateSpaceOverflow):
        peel_pedigree([row], kb, r, space, state_cap=10)


def test_contradictory_germline_is_infeasible(kb):
    # both parents tested negative but the child has a PLP: no de novo
    # events exist in this model, so no configuration survives
    p = create_pedigree("fam-bad", "female", 30)
    p = add_core_relatives(p, CoreCounts())
    negative = PanelResult("p", frozenset({"BRCA1"}), {})
    p = update_individual(p, 2, kb, age=60, panel=negative)
    p = update_individual(p, 3, kb, age=58, panel=negative)
    p = update_individual(
        p, 1, kb,
        panel=PanelResult(
            "p", frozenset({"BRCA1"}),
            {"BRCA1": Finding("PLP", "c.1A>G", "p.M1V", "het")},
        ),
    )
    with pytest.raises(InfeasibleConstraints):
        run_model(p, kb, RunSettings(model_name="fam3pro11", seed=2))


def test_enumeration_too_large_guard(kb):
    r = resolve_settings(RunSettings(), kb)  # 254 states
    space = build_state_space(r)
    rows = [member_row(kb, r, lone_proband(age=40), 1)] * 4
    with pytest.raises(TooLarge):
        enumerate_posterior(rows, kb, r, space)


# ------------------------------------------------------------- imputation


def test_imputation_noop_when_complete(kb):
    r = resolve_settings(RunSettings(imputations=3), kb)
    p = create_pedigree("fam-full", "female", 50)
    p = add_core_relatives(p, CoreCounts())
    p = update_individual(p, 2, kb, age=80)
    p = update_individual(p, 3, kb, age=77)
    rows = to_model_table(
        p, kb, default_race=r.default_race, default_ancestry=r.default_ancestry
    ).rows
    tables = impute_ages(rows, kb, r)
    assert len(tables) == 3
    assert tables[0] == tables[1] == tables[2] == tuple(rows)


def test_imputed_parent_age_within_generation_bounds(kb):
    # child aged 40: an unknown mother lands in [55, 90]
    p = create_pedigree("fam-gap", "female", 40)
    p = add_core_relatives(p, CoreCounts())
    rows = to_model_table(
        p, kb, default_race="White", default_ancestry="none"
    ).rows
    seen = set()
    for seed in range(40):
        r = resolve_settings(RunSettings(seed=seed, imputations=2), kb)
        for table in impute_ages(rows, kb, r):
            for row in table:
                if row.id in (2, 3):
                    assert 55 <= row.age <= 90
                    seen.add(row.age)
    assert len(seen) > 10  # actually sampling, not a constant


def test_imputation_deterministic_and_seed_sensitive(kb):
    p = create_pedigree("fam-det", "male", 35)
    p = add_core_relatives(p, CoreCounts(brothers=2))
    rows = to_model_table(
        p, kb, default_race="White", default_ancestry="none"
    ).rows
    r7 = resolve_settings(RunSettings(seed=7, imputations=2), kb)
    a = impute_ages(rows, kb, r7)
    b = impute_ages(rows, kb, r7)
    assert a == b
    r8 = resolve_settings(RunSettings(seed=8, imputations=2), kb)
    c = impute_ages(rows, kb, r8)
    assert a != c


def test_imputation_fills_event_ages(kb):
    p = create_pedigree("fam-ev", "female", 58)
    p = add_core_relatives(p, CoreCounts())
    p = update_individual(
        p, 3, kb, deceased=True,
        cancers=(CancerDiagnosis("breast", None),),
        surgeries=(Surgery("hysterectomy", None),),
    )
    rows = to_model_table(
        p, kb, default_race="White", default_ancestry="none"
    ).rows
    r = resolve_settings(RunSettings(seed=0, imputations=4), kb)
    for table in impute_ages(rows, kb, r):
        mother = next(row for row in table if row.id == 3)
        assert mother.age is not None
        assert mother.diagnosis_age("breast") is not None
        assert mother.diagnosis_age("breast") <= mother.age
        assert mother.surgery_age("hysterectomy") <= mother.age


def test_imputation_infeasible_bounds(kb):
    # unknown-age child with a diagnosis at 50, mother known to be 60:
    # the child would have to be both >= 50 and <= 45
    mk = Individual
    p = Pedigree(
        pedigree_id="fam-inf", proband_id=1, revision=1, next_id=4,
        members=(
            mk(id=1, sex="female", age=None, mother_id=2, father_id=3,
               cancers=(CancerDiagnosis("breast", 50),)),
            mk(id=2, sex="female", age=60),
            mk(id=3, sex="male", age=62),
        ),
        unions=(_norm_union(2, 3),),
    )
    rows = to_model_table(
        p, kb, default_race="White", default_ancestry="none"
    ).rows
    r = resolve_settings(RunSettings(seed=1), kb)
    with pytest.raises(InfeasibleConstraints):
        impute_ages(rows, kb, r)


def test_clone_pairs_share_imputed_ages(kb):
    from famrisk.pedigree import detect_and_break_loops

    p = cousin_marriage_pedigree()
    # strip the cloned individual's age so the pair actually needs a draw
    members = tuple(
        dataclasses.replace(m, age=None) if m.id == 4 else m for m in p.members
    )
    p = dataclasses.replace(p, members=members)
    broken, pairs = detect_and_break_loops(p)
    assert pairs
    original, clone = pairs[0]
    assert original == 4  # lowest id on the loop
    rows = to_model_table(
        broken, kb, default_race="White", default_ancestry="none"
    ).rows
    r = resolve_settings(RunSettings(seed=13, imputations=3), kb)
    for table in impute_ages(rows, kb, r):
        by_id = {row.id: row for row in table}
        assert by_id[original].age == by_id[clone].age


# ------------------------------------------------------------ risk curves


def proband_with_history(kb, age=45, dx=()):
    p = create_pedigree("fam-risk", "female", age)
    if dx:
        p = update_individual(p, 1, kb, cancers=tuple(dx))
    return p


def run_and_posterior(kb, p, settings):
    r = resolve_settings(settings, kb)
    space = build_state_space(r)
    table = to_model_table(
        p, kb, default_race=r.default_race, default_ancestry=r.default_ancestry
    )
    rows = impute_ages(table.rows, kb, r)[0]
    post = peel_pedigree(rows, kb, r, space)
    return r, space, table.proband_row, post


def test_risk_horizons_include_max_age(kb):
    r = resolve_settings(RunSettings(risk_intervals=(1, 5, 10)), kb)
    assert risk_horizons(45, r, kb) == [46, 50, 55, 95]
    assert risk_horizons(94, r, kb) == [95]
    assert risk_horizons(95, r, kb) == [95]


def test_empty_interval_risk_is_zero(kb):
    h = kb.baseline_hazard("breast", "female")
    curve = conditional_risk_curve(h, 95, "net", kb.life_table["female"])
    assert curve.tolist() == [0.0]


def test_net_risk_matches_baseline_formula(kb):
    # the hazard-product path must agree with the cumulative-curve path
    from famrisk.kb import baseline_cumulative_risk

    h = kb.baseline_hazard("colorectal", "male")
    curve = conditional_risk_curve(h, 40, "net", kb.life_table["male"])
    for horizon in (41, 50, 70, 95):
        expected = baseline_cumulative_risk(kb, "colorectal", "male", 40, horizon)
        assert curve[horizon - 40] == pytest.approx(expected, abs=1e-12)


def test_crude_below_net_everywhere(kb):
    p = proband_with_history(kb, age=38)
    _, space, row, post = run_and_posterior(kb, p, RunSettings(seed=4))
    for mode_pair in ["breast", "ovarian", "colorectal", "pancreatic"]:
        r_net = resolve_settings(RunSettings(penetrance_mode="net"), kb)
        r_crude = resolve_settings(RunSettings(penetrance_mode="crude"), kb)
        _, net, net_base = future_risk_curves(
            post, row, mode_pair, kb, r_net, space
        )
        _, crude, crude_base = future_risk_curves(
            post, row, mode_pair, kb, r_crude, space
        )
        assert np.all(crude <= net + 1e-15)
        assert np.all(crude_base <= net_base + 1e-15)
        assert crude[-1] < net[-1]  # the discount actually bites by age 95


def test_risk_curves_monotone_and_bounded(kb):
    p = proband_with_history(kb, age=30)
    r, space, row, post = run_and_posterior(kb, p, RunSettings(seed=6))
    for cancer in r.cancers:
        try:
            horizons, risk, base = future_risk_curves(
                post, row, cancer, kb, r, space
            )
        except CancerNotApplicable:
            continue
        assert np.all(np.diff(risk) >= -1e-15)
        assert np.all(risk <= 1.0) and np.all(risk >= 0.0)
        assert np.all(np.diff(base) >= -1e-15)


def test_degenerate_posterior_gives_baseline_curve(kb):
    r = resolve_settings(RunSettings(), kb)
    space = build_state_space(r)
    post = np.zeros(len(space))
    post[0] = 1.0  # all mass on the empty state
    row = member_row(kb, r, proband_with_history(kb, age=40), 1)
    _, risk, base = future_risk_curves(post, row, "breast", kb, r, space)
    np.testing.assert_allclose(risk, base, atol=1e-15)


def test_risk_not_applicable_reasons(kb):
    r = resolve_settings(RunSettings(), kb)
    space = build_state_space(r)
    post = founder_prior(space, kb, "none")

    male = member_row(kb, r, create_pedigree("fam-m", "male", 40), 1)
    with pytest.raises(CancerNotApplicable):
        future_risk_curves(post, male, "ovarian", kb, r, space)

    dx = member_row(
        kb, r,
        proband_with_history(kb, age=50, dx=(CancerDiagnosis("breast", 44),)), 1,
    )
    with pytest.raises(CancerNotApplicable):
        future_risk_curves(post, dx, "breast", kb, r, space)

    p = create_pedigree("fam-s", "female", 50)
    p = update_individual(
        p, 1, kb, surgeries=(Surgery("bilateral_oophorectomy", 44),)
    )
    removed = member_row(kb, r, p, 1)
    with pytest.raises(CancerNotApplicable):
        future_risk_curves(post, removed, "ovarian", kb, r, space)


def test_cbc_requires_breast_history_and_intact_breast(kb):
    r = resolve_settings(RunSettings(), kb)
    space = build_state_space(r)
    post = founder_prior(space, kb, "none")

    plain = member_row(kb, r, proband_with_history(kb, age=50), 1)
    with pytest.raises(NotApplicable):
        cbc_risk_curves(post, plain, kb, r, space)

    p = proband_with_history(kb, age=50, dx=(CancerDiagnosis("breast", 45),))
    p = update_individual(
        p, 1, kb, surgeries=(Surgery("bilateral_mastectomy", 46),)
    )
    with pytest.raises(NotApplicable):
        cbc_risk_curves(post, member_row(kb, r, p, 1), kb, r, space)


def test_cbc_modifier_product_oracle(kb):
    r = resolve_settings(RunSettings(penetrance_mode="net"), kb)
    space = build_state_space(r)
    post = np.zeros(len(space))
    post[0] = 1.0

    p = proband_with_history(kb, age=50, dx=(CancerDiagnosis("breast", 45),))
    p = update_individual(
        p, 1, kb,
        cbc=CBCModifiers(first_breast_cancer_type="dcis",
                         anti_estrogen_therapy="yes"),
    )
    row = member_row(kb, r, p, 1)
    horizons, risk, base = cbc_risk_curves(post, row, kb, r, space)

    rr = kb.cbc_table[("first_breast_cancer_type", "dcis")]
    rr *= kb.cbc_table[("anti_estrogen_therapy", "yes")]
    h = kb.baseline_hazard("contralateral_breast", "female") * rr
    expected = conditional_risk_curve(h, 50, "net", kb.life_table["female"])
    np.testing.assert_allclose(
        risk, expected[[t - 50 for t in horizons]], atol=1e-12
    )
    # neutral modifiers leave the genotype-mixed baseline curve untouched
    p0 = proband_with_history(kb, age=50, dx=(CancerDiagnosis("breast", 45),))
    _, risk0, base0 = cbc_risk_curves(
        post, member_row(kb, r, p0, 1), kb, r, space
    )
    np.testing.assert_allclose(risk0, base0, atol=1e-15)


def test_cbc_mixes_gene_curves(kb):
    # a BRCA1-carrying posterior must raise the contralateral curve
    r = resolve_settings(RunSettings(penetrance_mode="net"), kb)
    space = build_state_space(r)
    p = proband_with_history(kb, age=50, dx=(CancerDiagnosis("breast", 45),))
    row = member_row(kb, r, p, 1)

    empty = np.zeros(len(space))
    empty[0] = 1.0
    brca1 = np.zeros(len(space))
    brca1[space.labels.index("BRCA1")] = 1.0
    _, base_curve, _ = cbc_risk_curves(empty, row, kb, r, space)
    _, carrier_curve, _ = cbc_risk_curves(brca1, row, kb, r, space)
    assert carrier_curve[-1] > base_curve[-1]


# --------------------------------------------------------------- run_model


def sample_family(kb):
    p = create_pedigree("fam-run", "female", 45)
    p = add_core_relatives(p, CoreCounts(sisters=2, maternal_aunts=1))
    sister = next(
        m.id for m in p.members
        if m.sex == "female" and m.mother_id == 3 and m.id != 1
    )
    p = update_individual(
        p, sister, kb, age=48, cancers=(CancerDiagnosis("breast", 40),)
    )
    return p


def test_run_model_defaults(kb):
    res = run_model(sample_family(kb), kb, RunSettings(seed=42))
    assert len(res.carrier_posterior) == 22
    assert len(res.future_risk) == 17
    assert res.cbc_risk is not None  # 18th cancer, prediction-only
    assert res.parameter_trace["max_carried"] == 2
    assert res.parameter_trace["settings"]["model_name"] == "fam3pro22"
    assert res.parameter_trace["bundle_version"] == kb.version
    total = sum(res.joint_posterior.values())
    assert total == pytest.approx(1.0, abs=1e-9)
    assert res.non_carrier_probability == res.joint_posterior["none"]
    # an unaffected 45-year-old's own breast risk is reported
    assert res.future_risk["breast"]["status"] == "ok"
    assert res.future_risk["breast"]["horizons"][-1] == 95
    # but prostate is not applicable for her
    assert res.future_risk["prostate"]["status"] == "not_applicable"


def test_run_model_bytes_deterministic(kb):
    p = sample_family(kb)
    blobs = {
        run_model(p, kb, RunSettings(seed=23)).canonical_json()
        for _ in range(3)
    }
    assert len(blobs) == 1


def test_run_model_k_invariant_when_ages_known(kb):
    p = create_pedigree("fam-k", "female", 52)
    p = add_core_relatives(p, CoreCounts())
    p = update_individual(p, 2, kb, age=80)
    p = update_individual(p, 3, kb, age=79)
    one = run_model(p, kb, RunSettings(imputations=1, seed=0))
    three = run_model(p, kb, RunSettings(imputations=3, seed=99))
    a = one.canonical_dict()
    b = three.canonical_dict()
    # identical up to the recorded settings themselves
    for key in ("carrier_posterior", "joint_posterior", "future_risk", "cbc_risk"):
        assert a[key] == b[key]


def test_run_model_m_clamped_and_flagged(kb):
    p = create_pedigree("fam-m2", "female", 40)
    small = custom(("BRCA1", "BRCA2", "G3"), M=3, seed=1)
    clamped = dataclasses.replace(small, max_carried=50)
    res_exact = run_model(p, kb, small)
    res_clamped = run_model(p, kb, clamped)
    assert (
        res_exact.carrier_posterior == res_clamped.carrier_posterior
    )
    assert res_exact.parameter_trace["approximations"] == []
    pared = run_model(p, kb, dataclasses.replace(small, max_carried=1))
    assert any("paring" in a for a in pared.parameter_trace["approximations"])


def test_run_model_loop_handling(kb):
    p = cousin_marriage_pedigree()
    res = run_model(p, kb, RunSettings(model_name="fam3pro11", seed=3))
    assert res.parameter_trace["clone_pairs"]
    assert any("loop" in line for line in res.console_log)
    with pytest.raises(LoopDetected):
        run_model(
            p, kb,
            RunSettings(model_name="fam3pro11", seed=3, auto_break_loops=False),
        )


def test_run_model_validation_failure(kb):
    mk = Individual
    p = Pedigree(
        pedigree_id="fam-bad", proband_id=1, revision=1, next_id=3,
        members=(
            mk(id=1, sex="female", age=30),
            mk(id=2, sex="male", age=111),  # beyond the bundle's max age
        ),
        unions=(_norm_union(1, 2),),
    )
    with pytest.raises(ValidationFailed) as err:
        run_model(p, kb, RunSettings())
    assert err.value.report is not None
    assert err.value.report.blocking


def test_run_model_joint_absent_for_m1(kb):
    p = create_pedigree("fam-j", "female", 35)
    res = run_model(p, kb, custom(("BRCA1", "BRCA2"), M=1, seed=0))
    assert res.joint_posterior is None
    res2 = run_model(p, kb, custom(("BRCA1", "BRCA2"), M=2, seed=0))
    assert set(res2.joint_posterior) == {"none", "BRCA1", "BRCA2", "BRCA1+BRCA2"}


def test_settings_validation(kb):
    with pytest.raises(UnknownGene):
        resolve_settings(custom(("NOPE",)), kb)
    with pytest.raises(RangeError):
        resolve_settings(RunSettings(model_name="fam3pro99"), kb)
    with pytest.raises(RangeError):
        resolve_settings(RunSettings(risk_intervals=(5, 5)), kb)
    with pytest.raises(RangeError):
        resolve_settings(RunSettings(risk_intervals=(-1,)), kb)
    with pytest.raises(RangeError):
        resolve_settings(RunSettings(imputations=0), kb)
    with pytest.raises(RangeError):
        resolve_settings(RunSettings(penetrance_mode="gross"), kb)
    with pytest.raises(RangeError):
        resolve_settings(RunSettings(default_race="Martian"), kb)
    r = resolve_settings(RunSettings(model_name="fam3pro11"), kb)
    assert len(r.genes) == 11
    assert len(r.cancers) == 11
    assert r.predict_cbc


# randomized cross-check, small scale; the acceptance suite runs the
# full 200-pedigree version
@hyp_settings(max_examples=15, deadline=None)
@given(data=st.data())
def test_peel_vs_enumeration_property(kb, data):
    n_extra = data.draw(st.integers(min_value=0, max_value=3), label="extra")
    genes = data.draw(
        st.sampled_from([("BRCA1",), ("BRCA1", "G5"), ("BRCA2", "G3")]),
        label="genes",
    )
    seed = data.draw(st.integers(min_value=0, max_value=999), label="seed")
    p = create_pedigree("fam-prop", "female", 40)
    p = add_core_relatives(
        p, CoreCounts(sisters=min(n_extra, 2), daughters=n_extra % 2)
    )
    if data.draw(st.booleans(), label="affected"):
        p = update_individual(
            p, 3, kb, age=72, cancers=(CancerDiagnosis("breast", 55),)
        )
    s = custom(genes, ("breast", "ovarian"), seed=seed)
    space, peeled, enumerated = oracle_posterior(p, kb, s, joint_cap=40_000_000)
    np.testing.assert_allclose(peeled, enumerated, rtol=0, atol=1e-9)
