"""Pre-run pedigree validation.

Produces the console-style report shown before a model run: blocking
errors, warnings (non-blocking data gaps), and modeling assumptions the
engine will apply.  Builder-produced pedigrees should never trigger the
structural errors; they matter for pedigrees read back from files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from famrisk.kb.model import KnowledgeBase
from famrisk.pedigree.model import FEMALE_ONLY_SURGERIES, Individual, Pedigree


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    assumptions: list[str] = field(default_factory=list)

    @property
    def blocking(self) -> bool:
        return bool(self.errors)

    def lines(self) -> list[str]:
        out = []
        for tag, bucket in (
            ("ERROR", self.errors),
            ("WARNING", self.warnings),
            ("NOTE", self.assumptions),
        ):
            out.extend(f"{tag}: {msg}" for msg in bucket)
        if not self.errors:
            out.append("OK: pedigree passed validation")
        return out

    def __str__(self) -> str:
        return "\n".join(self.lines())


def validate_pedigree(p: Pedigree, kb: KnowledgeBase) -> ValidationReport:
    r = ValidationReport()
    _structure(p, r)
    for ind in p.members:
        _content(p, ind, kb, r)
    clones = [m for m in p.members if m.is_clone_of is not None]
    for clone in clones:
        r.assumptions.append(
            f"individual {clone.id} is a loop-breaking clone of "
            f"{clone.is_clone_of}; results are approximate"
        )
    return r


def _structure(p: Pedigree, r: ValidationReport):
    ids = {m.id for m in p.members}
    for m in p.members:
        if (m.mother_id is None) != (m.father_id is None):
            r.errors.append(f"individual {m.id}: one parent link missing")
        for role, pid, want in (
            ("father", m.father_id, "male"),
            ("mother", m.mother_id, "female"),
        ):
            if pid is None:
                continue
            if pid not in ids:
                r.errors.append(f"individual {m.id}: {role} {pid} not in pedigree")
            elif p.member(pid).sex != want:
                r.errors.append(
                    f"individual {m.id}: {role} {pid} is not {want}"
                )
            if pid == m.id:
                r.errors.append(f"individual {m.id} is their own {role}")

    # ancestor cycles (a person above themselves in the parent DAG)
    state: dict[int, int] = {}

    def visit(mid: int) -> bool:
        if state.get(mid) == 2:
            return True
        if state.get(mid) == 1:
            return False
        state[mid] = 1
        m = p.member(mid)
        for pid in (m.mother_id, m.father_id):
            if pid is not None and pid in ids and not visit(pid):
                return False
        state[mid] = 2
        return True

    for mid in ids:
        if not visit(mid):
            r.errors.append(f"ancestor cycle involving individual {mid}")
            break

    # connectivity through the proband (parent edges + partner unions)
    edges: dict[int, set[int]] = {mid: set() for mid in ids}
    for m in p.members:
        for pid in (m.mother_id, m.father_id):
            if pid is not None and pid in ids:
                edges[m.id].add(pid)
                edges[pid].add(m.id)
    for a, b in p.unions:
        if a in ids and b in ids:
            edges[a].add(b)
            edges[b].add(a)
    seen = {p.proband_id}
    stack = [p.proband_id]
    while stack:
        for nxt in edges[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    stranded = ids - seen
    if stranded:
        r.errors.append(f"individuals {sorted(stranded)} not linked to the proband")


def _content(p: Pedigree, ind: Individual, kb: KnowledgeBase, r: ValidationReport):
    who = f"individual {ind.id}"
    if ind.age is None:
        r.warnings.append(f"{who}: age unknown; it will be imputed")
    elif ind.age > kb.max_age:
        r.errors.append(f"{who}: age {ind.age} exceeds bundle maximum {kb.max_age}")
    if ind.race is None:
        r.warnings.append(f"{who}: race unknown; run default applies")
    if ind.ancestry is None:
        r.warnings.append(f"{who}: ancestry unknown; run default applies")

    regular = {c.name: c for c in kb.regular_cancers()}
    for dx in ind.cancers:
        if not dx.is_model_cancer:
            r.assumptions.append(
                f"{who}: cancer {dx.cancer_name!r} is outside the model and "
                "is excluded from the likelihood"
            )
            continue
        spec = regular.get(dx.cancer_name)
        if spec is None:
            r.errors.append(f"{who}: unknown model cancer {dx.cancer_name!r}")
            continue
        if not spec.allows_sex(ind.sex):
            r.errors.append(
                f"{who}: {dx.cancer_name} not applicable to {ind.sex} individuals"
            )
        if dx.age_at_diagnosis is None:
            r.warnings.append(
                f"{who}: {dx.cancer_name} diagnosis age unknown; it will be imputed"
            )

    for s in ind.surgeries:
        if ind.sex == "male" and s.kind in FEMALE_ONLY_SURGERIES:
            r.errors.append(f"{who}: {s.kind} recorded for a male individual")
        if s.age_at_surgery is None:
            r.warnings.append(
                f"{who}: {s.kind} age unknown; it will be imputed"
            )

    if ind.markers is not None:
        for (cancer, marker), _ in sorted(ind.markers.statuses.items()):
            if marker not in kb.markers.get(cancer, ()):
                r.errors.append(f"{who}: no marker {marker!r} defined for {cancer!r}")
            elif ind.diagnosis_of(cancer) is None:
                r.errors.append(
                    f"{who}: marker {marker} recorded without a {cancer} diagnosis"
                )

    if ind.cbc is not None:
        if ind.diagnosis_of("breast") is None:
            r.errors.append(
                f"{who}: contralateral-risk inputs without a breast cancer diagnosis"
            )
        for modifier, value in ind.cbc.items():
            if (modifier, value) not in kb.cbc_table:
                r.errors.append(f"{who}: unknown {modifier} value {value!r}")

    if ind.panel is not None:
        known = {g.name for g in kb.genes}
        for gene in sorted(ind.panel.genes_tested - known):
            r.errors.append(f"{who}: panel names unknown gene {gene}")
        for gene in sorted(ind.panel.findings):
            status = ind.panel.findings[gene].classification
            if status == "PLP" and gene in known:
                r.assumptions.append(
                    f"{who}: pathogenic finding in {gene} is assumed to be "
                    "heterozygous for any PV"
                )
            elif status == "VUS":
                r.assumptions.append(
                    f"{who}: {gene} variant of unknown significance carries "
                    "no evidence either way"
                )
