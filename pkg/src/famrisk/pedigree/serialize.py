"""JSON round-trip for pedigrees.

The wire shape is plain dict/list/scalar so it can be stored, diffed, and
shipped over HTTP unchanged.  Every field of the in-memory model survives a
round trip, including free-text cancers, panel metadata, unions, and the
auto-created / clone bookkeeping flags.  Collections with unordered keys
(marker statuses, panel findings) are emitted sorted so serializing the
same pedigree twice yields identical bytes.
"""

from __future__ import annotations

import json

from famrisk.errors import SchemaError
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

PEDIGREE_SCHEMA = 1


def _finding_to_dict(f: Finding) -> dict:
    return {
        "classification": f.classification,
        "nucleotide": f.nucleotide,
        "protein": f.protein,
        "zygosity": f.zygosity,
    }


def _individual_to_dict(ind: Individual) -> dict:
    d = {
        "id": ind.id,
        "sex": ind.sex,
        "age": ind.age,
        "deceased": ind.deceased,
        "race": ind.race,
        "hispanic_ethnicity": ind.hispanic_ethnicity,
        "ancestry": ind.ancestry,
        "mother_id": ind.mother_id,
        "father_id": ind.father_id,
        "cancers": [
            {
                "cancer_name": dx.cancer_name,
                "age_at_diagnosis": dx.age_at_diagnosis,
                "is_model_cancer": dx.is_model_cancer,
            }
            for dx in ind.cancers
        ],
        "surgeries": [
            {"kind": s.kind, "age_at_surgery": s.age_at_surgery}
            for s in ind.surgeries
        ],
        "panel": None,
        "markers": None,
        "cbc": None,
        "is_clone_of": ind.is_clone_of,
        "auto_created": ind.auto_created,
    }
    if ind.panel is not None:
        d["panel"] = {
            "panel_name": ind.panel.panel_name,
            "genes_tested": sorted(ind.panel.genes_tested),
            "findings": {
                gene: _finding_to_dict(f)
                for gene, f in sorted(ind.panel.findings.items())
            },
        }
    if ind.markers is not None:
        d["markers"] = [
            {"cancer": cancer, "marker": marker, "status": status}
            for (cancer, marker), status in sorted(ind.markers.statuses.items())
        ]
    if ind.cbc is not None:
        d["cbc"] = {
            name: getattr(ind.cbc, name)
            for name in CBCModifiers.FIELD_TO_MODIFIER
        }
    return d


def _individual_from_dict(d: dict) -> Individual:
    panel = None
    if d.get("panel") is not None:
        p = d["panel"]
        panel = PanelResult(
            panel_name=p["panel_name"],
            genes_tested=frozenset(p["genes_tested"]),
            findings={
                gene: Finding(**f) for gene, f in p.get("findings", {}).items()
            },
        )
    markers = None
    if d.get("markers") is not None:
        markers = TumorMarkers(
            statuses={
                (m["cancer"], m["marker"]): m["status"] for m in d["markers"]
            }
        )
    cbc = None
    if d.get("cbc") is not None:
        cbc = CBCModifiers(**d["cbc"])
    return Individual(
        id=d["id"],
        sex=d["sex"],
        age=d.get("age"),
        deceased=d.get("deceased", False),
        race=d.get("race"),
        hispanic_ethnicity=d.get("hispanic_ethnicity", "unknown"),
        ancestry=d.get("ancestry"),
        mother_id=d.get("mother_id"),
        father_id=d.get("father_id"),
        cancers=tuple(CancerDiagnosis(**dx) for dx in d.get("cancers", ())),
        surgeries=tuple(Surgery(**s) for s in d.get("surgeries", ())),
        panel=panel,
        markers=markers,
        cbc=cbc,
        is_clone_of=d.get("is_clone_of"),
        auto_created=d.get("auto_created", False),
    )


#: member fields that arrive as JSON structures and need model types
_STRUCTURED_FIELDS = ("cancers", "surgeries", "panel", "markers", "cbc")


def member_patch_from_dict(patch: dict) -> dict:
    """Coerce a JSON-shaped field patch into model values for
    update_individual; scalar fields pass through untouched."""
    out = dict(patch)
    if "cancers" in out and out["cancers"] is not None:
        out["cancers"] = tuple(
            CancerDiagnosis(**dx) for dx in out["cancers"]
        )
    if "surgeries" in out and out["surgeries"] is not None:
        out["surgeries"] = tuple(Surgery(**s) for s in out["surgeries"])
    if "panel" in out and out["panel"] is not None:
        p = out["panel"]
        out["panel"] = PanelResult(
            panel_name=p["panel_name"],
            genes_tested=frozenset(p["genes_tested"]),
            findings={
                gene: Finding(**f) for gene, f in p.get("findings", {}).items()
            },
        )
    if "markers" in out and out["markers"] is not None:
        out["markers"] = TumorMarkers(
            statuses={
                (m["cancer"], m["marker"]): m["status"]
                for m in out["markers"]
            }
        )
    if "cbc" in out and out["cbc"] is not None:
        out["cbc"] = CBCModifiers(**out["cbc"])
    return out


def pedigree_to_dict(pedigree: Pedigree) -> dict:
    return {
        "schema": PEDIGREE_SCHEMA,
        "pedigree_id": pedigree.pedigree_id,
        "proband_id": pedigree.proband_id,
        "revision": pedigree.revision,
        "next_id": pedigree.next_id,
        "members": [_individual_to_dict(m) for m in pedigree.members],
        "unions": [list(u) for u in pedigree.unions],
    }


def pedigree_from_dict(data: dict) -> Pedigree:
    schema = data.get("schema")
    if schema != PEDIGREE_SCHEMA:
        raise SchemaError(f"unsupported pedigree schema {schema!r}")
    try:
        return Pedigree(
            pedigree_id=data["pedigree_id"],
            proband_id=data["proband_id"],
            revision=data["revision"],
            next_id=data["next_id"],
            members=tuple(_individual_from_dict(m) for m in data["members"]),
            unions=tuple((u[0], u[1]) for u in data.get("unions", ())),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed pedigree document: {exc}") from exc


def pedigree_to_json(pedigree: Pedigree, *, indent: int | None = None) -> str:
    return json.dumps(pedigree_to_dict(pedigree), sort_keys=True, indent=indent)


def pedigree_from_json(text: str) -> Pedigree:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError("pedigree document must be a JSON object")
    return pedigree_from_dict(data)
