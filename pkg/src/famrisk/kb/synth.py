"""Shipped synthetic desk-scale bundle ("kb-synth-1").

All values here are SYNTHETIC.  They follow the documented bundle schema
and have plausible shapes (hazards ramp with age, carrier curves exceed
the average-risk baseline, founder ancestries raise BRCA1/BRCA2 allele
frequencies) but none of them is a published estimate and none should be
used for clinical decisions.  Content is generated by closed formulas, so
the bundle is bit-for-bit reproducible.
"""

from __future__ import annotations

import numpy as np

from famrisk.kb.model import CancerSpec, GeneSpec, HazardCurve, KnowledgeBase

SYNTH_VERSION = "kb-synth-1"
MAX_AGE = 95

RACES = ("White", "Black", "Asian", "NativeAmerican", "Other")
ANCESTRIES = ("none", "AshkenaziJewish", "Italian")

BREAST_MARKERS = ("ER", "PR", "HER2", "CK5.6", "CK14")
COLORECTAL_MARKERS = ("MSI", "MMR_IHC")

# (name, sex_restriction, organ); order fixes input-table column order
REGULAR_CANCERS = (
    ("breast", "any", "breast"),
    ("ovarian", "female", "ovary"),
    ("colorectal", "any", "colon"),
    ("endometrial", "female", "endometrium"),
    ("pancreatic", "any", "pancreas"),
    ("prostate", "male", "prostate"),
    ("gastric", "any", "stomach"),
    ("melanoma", "any", "skin"),
    ("brain", "any", "brain"),
    ("kidney", "any", "kidney"),
    ("thyroid", "any", "thyroid"),
    ("leukemia", "any", "blood"),
    ("small_intestine", "any", "small_intestine"),
    ("urinary_bladder", "any", "bladder"),
    ("hepatobiliary", "any", "liver"),
    ("osteosarcoma", "any", "bone"),
    ("soft_tissue_sarcoma", "any", "soft_tissue"),
)

CBC_NAME = "contralateral_breast"

SURGERY_ORGANS = {
    "bilateral_mastectomy": ("breast",),
    "hysterectomy": ("endometrium",),
    "bilateral_oophorectomy": ("ovary",),
}


def _ages() -> np.ndarray:
    return np.arange(MAX_AGE + 1, dtype=float)


def _ramp_hazard(peak: float, onset: float) -> np.ndarray:
    """Quadratic ramp from onset to age 90, flat at peak afterwards."""
    t = _ages()
    x = np.clip((t - onset) / (90.0 - onset), 0.0, 1.0)
    return peak * x * x


def _round6(arr: np.ndarray) -> np.ndarray:
    # short decimal forms keep the CSV files compact and readable
    return np.round(arr, 6)


def _gene_names() -> list[str]:
    return ["BRCA1", "BRCA2"] + [f"G{k}" for k in range(3, 23)]


def _placeholder_assoc(k: int) -> list[int]:
    """Deterministic cancer indices for placeholder gene G<k>."""
    n = len(REGULAR_CANCERS)
    assoc = {(k - 3) % n, (2 * k + 1) % n}
    if k % 2 == 0:
        assoc.add((5 * k + 3) % n)
    return sorted(assoc)


def _curves_for(
    cancer: str, restriction: str, peak_female: float, peak_male: float, onset: float
) -> dict[tuple[str, str], HazardCurve]:
    curves = {}
    if restriction in ("any", "female") and peak_female > 0:
        curves[(cancer, "female")] = HazardCurve(
            _round6(_ramp_hazard(peak_female, onset))
        )
    if restriction in ("any", "male") and peak_male > 0:
        curves[(cancer, "male")] = HazardCurve(_round6(_ramp_hazard(peak_male, onset)))
    return curves


def build_synthetic_kb() -> KnowledgeBase:
    restriction = {name: r for name, r, _ in REGULAR_CANCERS}
    restriction[CBC_NAME] = "any"

    cancers = tuple(
        CancerSpec(name=name, sex_restriction=r, organ=organ)
        for name, r, organ in REGULAR_CANCERS
    ) + (
        CancerSpec(name=CBC_NAME, sex_restriction="any", organ="breast", outcome_only=True),
    )

    genes: list[GeneSpec] = []

    brca1_pen = {}
    brca1_pen.update(_curves_for("breast", "any", 0.035, 0.002, 25))
    brca1_pen.update(_curves_for("ovarian", "female", 0.02, 0.0, 32))
    brca1_pen.update(_curves_for("pancreatic", "any", 0.006, 0.006, 40))
    brca1_pen.update(_curves_for(CBC_NAME, "any", 0.03, 0.002, 25))
    genes.append(
        GeneSpec(
            name="BRCA1",
            allele_frequency=0.003,
            ancestry_adjustments={"AshkenaziJewish": 0.012, "Italian": 0.005},
            penetrance=brca1_pen,
            race_adjustments={"Black": 1.1, "Asian": 0.9},
        )
    )

    brca2_pen = {}
    brca2_pen.update(_curves_for("breast", "any", 0.025, 0.004, 25))
    brca2_pen.update(_curves_for("ovarian", "female", 0.012, 0.0, 35))
    brca2_pen.update(_curves_for("pancreatic", "any", 0.008, 0.008, 40))
    brca2_pen.update(_curves_for("prostate", "male", 0.0, 0.02, 40))
    brca2_pen.update(_curves_for("melanoma", "any", 0.005, 0.005, 30))
    brca2_pen.update(_curves_for(CBC_NAME, "any", 0.02, 0.002, 25))
    genes.append(
        GeneSpec(
            name="BRCA2",
            allele_frequency=0.004,
            ancestry_adjustments={"AshkenaziJewish": 0.011, "Italian": 0.0065},
            penetrance=brca2_pen,
            race_adjustments={"Black": 1.05, "NativeAmerican": 0.95},
        )
    )

    for k in range(3, 23):
        name = f"G{k}"
        peak = 0.004 + 0.0015 * (k % 5)
        onset = 25.0 + 3.0 * (k % 6)
        pen: dict[tuple[str, str], HazardCurve] = {}
        for ci in _placeholder_assoc(k):
            cancer, r, _ = REGULAR_CANCERS[ci]
            male_factor = 0.1 if cancer == "breast" else 0.9
            pen.update(_curves_for(cancer, r, peak, peak * male_factor, onset))
        freq = 0.0008 + 0.0003 * ((k * 7) % 9)
        ancestry = {"AshkenaziJewish": 0.002} if k == 5 else {}
        race = {RACES[k % 5]: round(1.0 + ((k % 3) - 1) * 0.15, 6)}
        genes.append(
            GeneSpec(
                name=name,
                allele_frequency=round(freq, 6),
                ancestry_adjustments=ancestry,
                penetrance=pen,
                race_adjustments=race,
            )
        )

    baseline_risk: dict[tuple[str, str], np.ndarray] = {}
    all_cancers = list(REGULAR_CANCERS) + [(CBC_NAME, "any", "breast")]
    for ci, (cancer, r, _) in enumerate(all_cancers):
        peak = 0.0008 + 0.0004 * ((ci * 7) % 5)
        onset = 25.0 + 5.0 * (ci % 4)
        for sex in ("female", "male"):
            if r != "any" and r != sex:
                continue
            factor = 1.0 if sex == "female" else 0.9
            if cancer in ("breast", CBC_NAME) and sex == "male":
                factor = 0.08
            # small floor keeps every diagnosis age possible at baseline
            hazard = np.maximum(_round6(_ramp_hazard(peak * factor, onset)), 1e-06)
            cumulative = 1.0 - np.cumprod(1.0 - hazard)
            baseline_risk[(cancer, sex)] = cumulative

    life_table = {}
    t = _ages()
    for sex, factor in (("female", 1.0), ("male", 1.25)):
        mortality = np.minimum((0.0002 + 0.0001 * np.exp(t / 12.5)) * factor, 0.5)
        life_table[sex] = _round6(1.0 - mortality)

    marker_lr: dict[tuple[str, str, str, str], float] = {}

    def add_lr(cancer, marker, status, gene, lr):
        marker_lr[(cancer, marker, status, gene)] = lr

    for gene, scale in (("BRCA1", 1.0), ("BRCA2", 0.6)):
        add_lr("breast", "ER", "negative", gene, 1.0 + 1.1 * scale)
        add_lr("breast", "ER", "positive", gene, 1.0 - 0.26 * scale)
        add_lr("breast", "PR", "negative", gene, 1.0 + 0.6 * scale)
        add_lr("breast", "PR", "positive", gene, 1.0 - 0.15 * scale)
        add_lr("breast", "HER2", "negative", gene, 1.0 + 0.3 * scale)
        add_lr("breast", "HER2", "positive", gene, 1.0 - 0.4 * scale)
        add_lr("breast", "CK5.6", "positive", gene, 1.0 + 0.9 * scale)
        add_lr("breast", "CK5.6", "negative", gene, 1.0 - 0.08 * scale)
        add_lr("breast", "CK14", "positive", gene, 1.0 + 0.7 * scale)
        add_lr("breast", "CK14", "negative", gene, 1.0 - 0.05 * scale)
    for gene, scale in (("G3", 1.0), ("G4", 0.5)):
        add_lr("colorectal", "MSI", "positive", gene, 1.0 + 3.0 * scale)
        add_lr("colorectal", "MSI", "negative", gene, 1.0 - 0.65 * scale)
        add_lr("colorectal", "MMR_IHC", "positive", gene, 1.0 + 2.2 * scale)
        add_lr("colorectal", "MMR_IHC", "negative", gene, 1.0 - 0.5 * scale)
    marker_lr = {k: round(v, 6) for k, v in marker_lr.items()}

    cbc_table = {
        ("first_breast_cancer_type", "pure_invasive"): 1.0,
        ("first_breast_cancer_type", "mixed_invasive"): 1.1,
        ("first_breast_cancer_type", "dcis"): 0.9,
        ("anti_estrogen_therapy", "yes"): 0.7,
        ("anti_estrogen_therapy", "no"): 1.0,
        ("high_risk_preneoplasia", "yes"): 1.4,
        ("high_risk_preneoplasia", "no"): 1.0,
        ("birads_density", "a"): 0.8,
        ("birads_density", "b"): 1.0,
        ("birads_density", "c"): 1.2,
        ("birads_density", "d"): 1.45,
        ("tumor_size", "t1"): 1.0,
        ("tumor_size", "t2"): 1.15,
        ("tumor_size", "t3"): 1.3,
    }

    gene_names = _gene_names()
    regular_names = [name for name, _, _ in REGULAR_CANCERS]
    models = {
        "fam3pro22": {
            "genes": tuple(gene_names),
            "cancers": tuple(regular_names + [CBC_NAME]),
        },
        "fam3pro11": {
            "genes": tuple(gene_names[:11]),
            "cancers": tuple(regular_names[:11] + [CBC_NAME]),
        },
    }

    return KnowledgeBase(
        version=SYNTH_VERSION,
        max_age=MAX_AGE,
        genes=tuple(genes),
        cancers=cancers,
        baseline_risk=baseline_risk,
        life_table=life_table,
        marker_lr=marker_lr,
        cbc_table=cbc_table,
        races=RACES,
        ancestries=ANCESTRIES,
        markers={"breast": BREAST_MARKERS, "colorectal": COLORECTAL_MARKERS},
        surgery_organs=SURGERY_ORGANS,
        models=models,
        default_race="White",
        default_ancestry="none",
    )
