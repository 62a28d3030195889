"""The flat per-individual table consumed by the risk engine.

Column layout (one row per individual, founders before descendants,
ties by id):

    sex, age, race, ethnicity, ancestry, id, father, mother,
    <cancer>, <cancer>_age            per bundle cancer (diagnosable ones),
    <cancer>_<marker>                 per bundle tumor marker,
    <surgery>, <surgery>_age          per bundle surgery kind,
    test_<gene>                       per bundle gene,
    proband, deceased, clone_of,
    cbc_first_type, cbc_anti_estrogen, cbc_preneoplasia,
    cbc_birads, cbc_tumor_size

The prefix through test_<gene> is the documented model-input layout; the
trailing columns carry state the engine and round-tripping need (proband
selection, censoring at death, loop clones, contralateral-risk inputs).
Unknown values serialize as empty strings; indicators as 0/1.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

from famrisk.errors import SchemaError, ValidationFailed
from famrisk.kb.model import KnowledgeBase
from famrisk.pedigree.model import (
    CBCModifiers,
    CancerDiagnosis,
    Finding,
    Individual,
    PanelResult,
    Pedigree,
    Surgery,
    TumorMarkers,
    _norm_union,
)
from famrisk.pedigree.validate import validate_pedigree

CBC_COLUMNS = (
    ("cbc_first_type", "first_breast_cancer_type"),
    ("cbc_anti_estrogen", "anti_estrogen_therapy"),
    ("cbc_preneoplasia", "high_risk_preneoplasia"),
    ("cbc_birads", "birads_density"),
    ("cbc_tumor_size", "tumor_size"),
)

TEST_STATUSES = ("plp", "vus", "blb", "negative")


@dataclass(frozen=True)
class MemberRow:
    """One individual, fully resolved against a bundle's enumerations."""

    id: int
    sex: str
    age: int | None
    race: str
    ethnicity: str
    ancestry: str
    father: int | None = None
    mother: int | None = None
    # (cancer, age-or-None) for recorded first primaries, bundle order
    diagnoses: tuple[tuple[str, int | None], ...] = ()
    # ((cancer, marker), "positive"|"negative")
    markers: tuple[tuple[tuple[str, str], str], ...] = ()
    surgeries: tuple[tuple[str, int | None], ...] = ()
    # (gene, "plp"|"vus"|"blb"|"negative") for tested genes only
    tests: tuple[tuple[str, str], ...] = ()
    cbc: tuple[tuple[str, str], ...] = ()
    proband: bool = False
    deceased: bool = False
    clone_of: int | None = None

    def diagnosis_age(self, cancer: str) -> int | None:
        for name, age in self.diagnoses:
            if name == cancer:
                return age
        return None

    def has_diagnosis(self, cancer: str) -> bool:
        return any(name == cancer for name, _ in self.diagnoses)

    def surgery_age(self, kind: str) -> int | None:
        for name, age in self.surgeries:
            if name == kind:
                return age
        return None

    def has_surgery(self, kind: str) -> bool:
        return any(name == kind for name, _ in self.surgeries)

    def test_status(self, gene: str) -> str | None:
        for name, status in self.tests:
            if name == gene:
                return status
        return None


@dataclass(frozen=True)
class ModelInputTable:
    columns: tuple[str, ...]
    rows: tuple[MemberRow, ...]
    # per-column serialization for an all-absent row ("0" indicators, "")
    defaults: tuple[str, ...] = ()

    def row(self, individual_id: int) -> MemberRow:
        for r in self.rows:
            if r.id == individual_id:
                return r
        raise KeyError(individual_id)

    @property
    def proband_row(self) -> MemberRow:
        for r in self.rows:
            if r.proband:
                return r
        raise ValidationFailed("table has no proband row")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(self.columns)
        for r in self.rows:
            writer.writerow(_serialize_row(r, self.columns, self.defaults))
        return buf.getvalue()


def _opt(value) -> str:
    return "" if value is None else str(value)


def _serialize_row(
    r: MemberRow, columns: tuple[str, ...], defaults: tuple[str, ...]
) -> list[str]:
    values = {
        "sex": r.sex,
        "age": _opt(r.age),
        "race": r.race,
        "ethnicity": r.ethnicity,
        "ancestry": r.ancestry,
        "id": str(r.id),
        "father": _opt(r.father),
        "mother": _opt(r.mother),
        "proband": "1" if r.proband else "0",
        "deceased": "1" if r.deceased else "0",
        "clone_of": _opt(r.clone_of),
    }
    for name, age in r.diagnoses:
        values[name] = "1"
        values[f"{name}_age"] = _opt(age)
    for (cancer, marker), status in r.markers:
        values[f"{cancer}_{marker}"] = status
    for kind, age in r.surgeries:
        values[kind] = "1"
        values[f"{kind}_age"] = _opt(age)
    for gene, status in r.tests:
        values[f"test_{gene}"] = status
    for col, modifier in CBC_COLUMNS:
        if dict(r.cbc).get(modifier):
            values[col] = dict(r.cbc)[modifier]
    return [
        values.get(col, default) for col, default in zip(columns, defaults)
    ]


def columns_for(kb: KnowledgeBase) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """(column names, per-column defaults) in documented order."""
    cols = ["sex", "age", "race", "ethnicity", "ancestry", "id", "father", "mother"]
    defaults = [""] * 8
    for spec in kb.regular_cancers():
        cols += [spec.name, f"{spec.name}_age"]
        defaults += ["0", ""]
    for cancer in sorted(kb.markers):
        for marker in kb.markers[cancer]:
            cols.append(f"{cancer}_{marker}")
            defaults.append("")
    for kind in sorted(kb.surgery_organs):
        cols += [kind, f"{kind}_age"]
        defaults += ["0", ""]
    for gene in kb.genes:
        cols.append(f"test_{gene.name}")
        defaults.append("")
    cols += ["proband", "deceased", "clone_of"]
    defaults += ["0", "0", ""]
    cols.extend(col for col, _ in CBC_COLUMNS)
    defaults += [""] * len(CBC_COLUMNS)
    return tuple(cols), tuple(defaults)


def to_model_table(
    p: Pedigree,
    kb: KnowledgeBase,
    default_race: str | None = None,
    default_ancestry: str | None = None,
) -> ModelInputTable:
    """Serialize a validated pedigree for the engine.

    Unknown race/ancestry fall back to the given defaults, then to the
    bundle defaults.  Free-text cancers are dropped here; they never enter
    the likelihood.
    """
    report = validate_pedigree(p, kb)
    if report.blocking:
        raise ValidationFailed("pedigree failed validation", report=report)
    race_default = default_race or kb.default_race
    ancestry_default = default_ancestry or kb.default_ancestry
    if race_default not in kb.races:
        raise ValidationFailed(f"default race {race_default!r} not in bundle")
    if ancestry_default not in kb.ancestries:
        raise ValidationFailed(f"default ancestry {ancestry_default!r} not in bundle")

    cancer_order = {c.name: i for i, c in enumerate(kb.regular_cancers())}
    gene_order = {g.name: i for i, g in enumerate(kb.genes)}
    marker_order = {
        (cancer, marker): i
        for i, (cancer, marker) in enumerate(
            (c, m) for c in sorted(kb.markers) for m in kb.markers[c]
        )
    }

    rows = []
    for ind in _topological(p):
        diagnoses = tuple(
            (dx.cancer_name, dx.age_at_diagnosis)
            for dx in sorted(
                (d for d in ind.cancers if d.is_model_cancer),
                key=lambda d: cancer_order[d.cancer_name],
            )
        )
        markers = ()
        if ind.markers is not None:
            markers = tuple(
                sorted(ind.markers.statuses.items(), key=lambda kv: marker_order[kv[0]])
            )
        surgeries = tuple(
            (s.kind, s.age_at_surgery)
            for s in sorted(ind.surgeries, key=lambda s: s.kind)
        )
        tests = ()
        if ind.panel is not None:
            tests = tuple(
                (gene, ind.panel.status(gene).lower())
                for gene in sorted(ind.panel.genes_tested, key=gene_order.get)
            )
        cbc = ()
        if ind.cbc is not None:
            cbc = tuple(ind.cbc.items())
        rows.append(
            MemberRow(
                id=ind.id,
                sex=ind.sex,
                age=ind.age,
                race=ind.race or race_default,
                ethnicity=ind.hispanic_ethnicity,
                ancestry=ind.ancestry or ancestry_default,
                father=ind.father_id,
                mother=ind.mother_id,
                diagnoses=diagnoses,
                markers=markers,
                surgeries=surgeries,
                tests=tests,
                cbc=cbc,
                proband=ind.id == p.proband_id,
                deceased=ind.deceased,
                clone_of=ind.is_clone_of,
            )
        )
    columns, defaults = columns_for(kb)
    return ModelInputTable(columns=columns, rows=tuple(rows), defaults=defaults)


def _topological(p: Pedigree) -> list[Individual]:
    """Founders first, then individuals whose parents are already placed,
    ties broken by id."""
    import heapq

    placed: set[int] = set()
    out: list[Individual] = []
    ready = [
        m.id for m in p.members if not m.has_parents or not (
            p.has_member(m.father_id) and p.has_member(m.mother_id)
        )
    ]
    heapq.heapify(ready)
    pending = {m.id for m in p.members} - set(ready)
    while ready:
        mid = heapq.heappop(ready)
        if mid in placed:
            continue
        placed.add(mid)
        out.append(p.member(mid))
        for cid in sorted(pending):
            child = p.member(cid)
            if child.father_id in placed and child.mother_id in placed:
                pending.discard(cid)
                heapq.heappush(ready, cid)
    if pending:
        # parent cycles surface as validation errors before we get here
        raise ValidationFailed(f"cannot order individuals {sorted(pending)}")
    return out


def table_from_csv(text: str, kb: KnowledgeBase) -> ModelInputTable:
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise SchemaError("empty table") from None
    expected, defaults = columns_for(kb)
    if header != expected:
        raise SchemaError(
            f"table header mismatch: expected {len(expected)} documented "
            f"columns, got {len(header)}"
        )
    rows = []
    for raw in reader:
        if not raw:
            continue
        if len(raw) != len(header):
            raise SchemaError(f"row for id {raw[:6]}...: wrong column count")
        rows.append(_parse_row(dict(zip(header, raw)), kb))
    return ModelInputTable(columns=expected, rows=tuple(rows), defaults=defaults)


def _parse_int(value: str, what: str) -> int | None:
    if value == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise SchemaError(f"{what}: expected integer, got {value!r}") from None


def _parse_row(cells: dict[str, str], kb: KnowledgeBase) -> MemberRow:
    diagnoses = []
    for spec in kb.regular_cancers():
        if cells[spec.name] == "1":
            diagnoses.append((spec.name, _parse_int(cells[f"{spec.name}_age"], spec.name)))
        elif cells[spec.name] != "0":
            raise SchemaError(f"{spec.name}: indicator must be 0/1")
    markers = []
    for cancer in sorted(kb.markers):
        for marker in kb.markers[cancer]:
            status = cells[f"{cancer}_{marker}"]
            if status == "":
                continue
            if status not in ("positive", "negative"):
                raise SchemaError(f"{cancer}_{marker}: bad status {status!r}")
            markers.append(((cancer, marker), status))
    surgeries = []
    for kind in sorted(kb.surgery_organs):
        if cells[kind] == "1":
            surgeries.append((kind, _parse_int(cells[f"{kind}_age"], kind)))
    tests = []
    for gene in kb.genes:
        status = cells[f"test_{gene.name}"]
        if status == "":
            continue
        if status not in TEST_STATUSES:
            raise SchemaError(f"test_{gene.name}: bad status {status!r}")
        tests.append((gene.name, status))
    cbc = []
    for col, modifier in CBC_COLUMNS:
        if cells[col]:
            cbc.append((modifier, cells[col]))
    return MemberRow(
        id=_parse_int(cells["id"], "id"),
        sex=cells["sex"],
        age=_parse_int(cells["age"], "age"),
        race=cells["race"],
        ethnicity=cells["ethnicity"],
        ancestry=cells["ancestry"],
        father=_parse_int(cells["father"], "father"),
        mother=_parse_int(cells["mother"], "mother"),
        diagnoses=tuple(diagnoses),
        markers=tuple(markers),
        surgeries=tuple(surgeries),
        tests=tuple(tests),
        cbc=tuple(cbc),
        proband=cells["proband"] == "1",
        deceased=cells["deceased"] == "1",
        clone_of=_parse_int(cells["clone_of"], "clone_of"),
    )


def pedigree_from_table(
    table: ModelInputTable, pedigree_id: str = "imported"
) -> Pedigree:
    """Rebuild a Pedigree value from a table (inverse of to_model_table).

    Free-text cancers and panel metadata (nucleotide/protein strings) are
    not table content, so they do not survive the round trip.
    """
    probands = [r.id for r in table.rows if r.proband]
    if len(probands) != 1:
        raise ValidationFailed(f"table must mark exactly 1 proband, got {len(probands)}")
    members = []
    unions = set()
    for r in table.rows:
        cancers = tuple(
            CancerDiagnosis(cancer_name=name, age_at_diagnosis=age)
            for name, age in r.diagnoses
        )
        surgeries = tuple(
            Surgery(kind=kind, age_at_surgery=age) for kind, age in r.surgeries
        )
        panel = None
        if r.tests:
            panel = PanelResult(
                panel_name="imported",
                genes_tested=frozenset(g for g, _ in r.tests),
                findings={
                    g: Finding(classification=s.upper())
                    for g, s in r.tests
                    if s != "negative"
                },
            )
        markers = TumorMarkers(statuses=dict(r.markers)) if r.markers else None
        cbc = None
        if r.cbc:
            by_modifier = dict(r.cbc)
            cbc = CBCModifiers(
                first_breast_cancer_type=by_modifier.get("first_breast_cancer_type"),
                anti_estrogen_therapy=by_modifier.get("anti_estrogen_therapy"),
                high_risk_preneoplasia=by_modifier.get("high_risk_preneoplasia"),
                birads_density=by_modifier.get("birads_density"),
                tumor_size=by_modifier.get("tumor_size"),
            )
        members.append(
            Individual(
                id=r.id,
                sex=r.sex,
                age=r.age,
                deceased=r.deceased,
                race=r.race or None,
                hispanic_ethnicity=r.ethnicity or "unknown",
                ancestry=r.ancestry or None,
                mother_id=r.mother,
                father_id=r.father,
                cancers=cancers,
                surgeries=surgeries,
                panel=panel,
                markers=markers,
                cbc=cbc,
                is_clone_of=r.clone_of,
            )
        )
        if r.father is not None:
            unions.add(_norm_union(r.father, r.mother))
    return Pedigree(
        pedigree_id=pedigree_id,
        proband_id=probands[0],
        revision=1,
        next_id=max(r.id for r in table.rows) + 1,
        members=tuple(sorted(members, key=lambda m: m.id)),
        unions=tuple(sorted(unions)),
    )
