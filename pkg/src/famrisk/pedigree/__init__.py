"""Family pedigree data model, builder operations, validation, and the
flat model-input table the risk engine consumes."""

from famrisk.pedigree.builder import (
    CoreCounts,
    add_core_relatives,
    add_relative,
    create_pedigree,
    remove_individual,
    update_individual,
)
from famrisk.pedigree.loops import detect_and_break_loops
from famrisk.pedigree.model import (
    CancerDiagnosis,
    CBCModifiers,
    Finding,
    Individual,
    PanelResult,
    Pedigree,
    Surgery,
    TumorMarkers,
)
from famrisk.pedigree.serialize import (
    member_patch_from_dict,
    pedigree_from_dict,
    pedigree_from_json,
    pedigree_to_dict,
    pedigree_to_json,
)
from famrisk.pedigree.table import (
    ModelInputTable,
    pedigree_from_table,
    table_from_csv,
    to_model_table,
)
from famrisk.pedigree.validate import ValidationReport, validate_pedigree

__all__ = [
    "CBCModifiers",
    "CancerDiagnosis",
    "CoreCounts",
    "Finding",
    "Individual",
    "ModelInputTable",
    "PanelResult",
    "Pedigree",
    "Surgery",
    "TumorMarkers",
    "ValidationReport",
    "add_core_relatives",
    "add_relative",
    "create_pedigree",
    "detect_and_break_loops",
    "member_patch_from_dict",
    "pedigree_from_dict",
    "pedigree_from_json",
    "pedigree_from_table",
    "pedigree_to_dict",
    "pedigree_to_json",
    "remove_individual",
    "table_from_csv",
    "to_model_table",
    "update_individual",
    "validate_pedigree",
]
