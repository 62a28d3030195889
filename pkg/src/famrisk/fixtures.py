"""Shared demonstration pedigree.

A mid-size family used by the benchmark command, the acceptance suite,
and the browser walkthrough: a proband with early breast cancer, her
parents, two sisters (one affected), aunts on both sides, and all four
grandparents.  Two relatives have unknown ages so a run exercises age
imputation, and the proband carries tumor-marker and second-breast-cancer
inputs so every result section is populated.
"""

from __future__ import annotations

from famrisk.kb import KnowledgeBase
from famrisk.pedigree import (
    CancerDiagnosis,
    CBCModifiers,
    CoreCounts,
    PanelResult,
    Pedigree,
    TumorMarkers,
    add_core_relatives,
    create_pedigree,
    update_individual,
)


def example_pedigree(kb: KnowledgeBase) -> Pedigree:
    """Thirteen members across three generations, ids stable by build order:
    proband 1, father 2, mother 3, sisters 4-5, maternal aunts 6-7 with
    grandparents 8-9, paternal aunt 10 with grandparents 11-12, and a
    maternal uncle 13."""
    p = create_pedigree("fam-example", "female", 43)
    p = add_core_relatives(
        p,
        CoreCounts(
            sisters=2, maternal_aunts=2, paternal_aunts=1, maternal_uncles=1
        ),
    )

    p = update_individual(
        p, 1, kb,
        cancers=(CancerDiagnosis("breast", 40),),
        markers=TumorMarkers({("breast", "ER"): "positive"}),
        cbc=CBCModifiers(
            first_breast_cancer_type="pure_invasive",
            anti_estrogen_therapy="yes",
        ),
        panel=PanelResult("demo-panel", frozenset({"BRCA2"})),
    )
    p = update_individual(p, 2, kb, age=71)
    p = update_individual(p, 3, kb, age=68)
    p = update_individual(
        p, 4, kb, age=47, cancers=(CancerDiagnosis("breast", 44),)
    )
    p = update_individual(p, 5, kb, age=39)
    p = update_individual(p, 6, kb, age=64)
    p = update_individual(
        p, 7, kb, age=61, cancers=(CancerDiagnosis("ovarian", 58),)
    )
    p = update_individual(p, 8, kb, deceased=True)  # age imputed
    p = update_individual(p, 9, kb, age=92, deceased=True)
    p = update_individual(p, 10, kb, age=66)
    p = update_individual(p, 11, kb, deceased=True)  # age imputed
    p = update_individual(p, 12, kb, age=95, deceased=True)
    p = update_individual(p, 13, kb, age=58)
    return p
