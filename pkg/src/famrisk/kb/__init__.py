from famrisk.kb.model import (
    CancerSpec,
    GeneSpec,
    HazardCurve,
    KnowledgeBase,
    baseline_cumulative_risk,
    carrier_prior,
    effective_allele_frequency,
)
from famrisk.kb.io import ensure_synth_bundle, load_bundle, save_bundle
from famrisk.kb.synth import SYNTH_VERSION, build_synthetic_kb

__all__ = [
    "CancerSpec",
    "GeneSpec",
    "HazardCurve",
    "KnowledgeBase",
    "baseline_cumulative_risk",
    "carrier_prior",
    "effective_allele_frequency",
    "ensure_synth_bundle",
    "load_bundle",
    "save_bundle",
    "SYNTH_VERSION",
    "build_synthetic_kb",
]
