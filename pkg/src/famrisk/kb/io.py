"""Bundle serialization: a directory of UTF-8 CSV tables plus a JSON manifest.

Layout::

    manifest.json      version, max_age, enumerations, presets, checksums
    genes.csv          gene, allele_frequency
    gene_ancestry.csv  gene, ancestry, allele_frequency
    gene_race.csv      gene, race, hazard_multiplier
    cancers.csv        cancer, sex_restriction, organ, outcome_only
    penetrance.csv     gene, cancer, sex, age, hazard
    baseline.csv       cancer, sex, age, cumulative_risk
    life_table.csv     sex, age, survival
    marker_lr.csv      cancer, marker, status, gene, lr
    cbc_modifiers.csv  modifier, value, rr

Row order and float formatting are canonical, so load followed by save
reproduces the input byte for byte.  The manifest carries a sha256 per CSV
file; a mismatch on load is a ChecksumError.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from famrisk.errors import ChecksumError, DanglingRefError, RangeError, SchemaError
from famrisk.kb.model import (
    SEXES,
    CancerSpec,
    GeneSpec,
    HazardCurve,
    KnowledgeBase,
)

CSV_FILES = (
    "genes.csv",
    "gene_ancestry.csv",
    "gene_race.csv",
    "cancers.csv",
    "penetrance.csv",
    "baseline.csv",
    "life_table.csv",
    "marker_lr.csv",
    "cbc_modifiers.csv",
)

#: name of the shipped synthetic desk-scale bundle, resolvable by load_bundle
SYNTH_BUNDLE_NAME = "kb-synth-1"


def _fmt(x: float) -> str:
    return repr(float(x))


def _read_csv(path: Path, columns: tuple[str, ...]) -> list[dict[str, str]]:
    if not path.exists():
        raise SchemaError(f"bundle is missing {path.name}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != columns:
            raise SchemaError(
                f"{path.name}: expected header {','.join(columns)}, "
                f"got {','.join(reader.fieldnames or [])}"
            )
        rows = list(reader)
    for row in rows:
        if any(v is None for v in row.values()):
            raise SchemaError(f"{path.name}: short row {row}")
    return rows


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _require(manifest: dict, key: str):
    if key not in manifest:
        raise SchemaError(f"manifest is missing {key!r}")
    return manifest[key]


def _curve_from_rows(
    rows: list[tuple[int, float]], max_age: int, what: str
) -> np.ndarray:
    ages = [a for a, _ in rows]
    if sorted(ages) != list(range(max_age + 1)):
        raise SchemaError(f"{what}: ages must cover 0..{max_age} exactly")
    values = np.empty(max_age + 1)
    for age, v in rows:
        values[age] = v
    return values


def load_bundle(path: str | os.PathLike) -> KnowledgeBase:
    """Load and fully validate a bundle directory.

    The shipped synthetic bundle can be loaded by its name
    ``"kb-synth-1"`` without materializing it by hand.
    """
    if str(path) == SYNTH_BUNDLE_NAME:
        path = ensure_synth_bundle()
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise SchemaError(f"{root}: no manifest.json (not a bundle directory)")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))

    version = _require(manifest, "version")
    max_age = int(_require(manifest, "max_age"))
    races = tuple(_require(manifest, "races"))
    ancestries = tuple(_require(manifest, "ancestries"))
    markers = {c: tuple(ms) for c, ms in _require(manifest, "markers").items()}
    surgery_organs = {
        k: tuple(v) for k, v in _require(manifest, "surgeries").items()
    }
    models = {
        name: {"genes": tuple(m["genes"]), "cancers": tuple(m["cancers"])}
        for name, m in _require(manifest, "models").items()
    }
    default_race = _require(manifest, "default_race")
    default_ancestry = _require(manifest, "default_ancestry")
    checksums = _require(manifest, "checksums")

    for name in CSV_FILES:
        if name not in checksums:
            raise SchemaError(f"manifest checksums missing {name}")
        actual = _sha256(root / name) if (root / name).exists() else None
        if actual is None:
            raise SchemaError(f"bundle is missing {name}")
        if actual != checksums[name]:
            raise ChecksumError(f"{name}: checksum mismatch")

    gene_rows = _read_csv(root / "genes.csv", ("gene", "allele_frequency"))
    ancestry_rows = _read_csv(
        root / "gene_ancestry.csv", ("gene", "ancestry", "allele_frequency")
    )
    race_rows = _read_csv(
        root / "gene_race.csv", ("gene", "race", "hazard_multiplier")
    )
    cancer_rows = _read_csv(
        root / "cancers.csv", ("cancer", "sex_restriction", "organ", "outcome_only")
    )
    pen_rows = _read_csv(
        root / "penetrance.csv", ("gene", "cancer", "sex", "age", "hazard")
    )
    baseline_rows = _read_csv(
        root / "baseline.csv", ("cancer", "sex", "age", "cumulative_risk")
    )
    life_rows = _read_csv(root / "life_table.csv", ("sex", "age", "survival"))
    marker_rows = _read_csv(
        root / "marker_lr.csv", ("cancer", "marker", "status", "gene", "lr")
    )
    cbc_rows = _read_csv(root / "cbc_modifiers.csv", ("modifier", "value", "rr"))

    gene_names = [r["gene"] for r in gene_rows]
    cancer_names = [r["cancer"] for r in cancer_rows]
    gene_set = set(gene_names)
    cancer_set = set(cancer_names)

    cancers = tuple(
        CancerSpec(
            name=r["cancer"],
            sex_restriction=r["sex_restriction"],
            organ=r["organ"],
            outcome_only=r["outcome_only"] == "1",
        )
        for r in cancer_rows
    )

    ancestry_adj: dict[str, dict[str, float]] = {}
    for r in ancestry_rows:
        if r["gene"] not in gene_set:
            raise DanglingRefError(f"gene_ancestry.csv names unknown gene {r['gene']!r}")
        if r["ancestry"] not in ancestries:
            raise DanglingRefError(
                f"gene_ancestry.csv names unknown ancestry {r['ancestry']!r}"
            )
        ancestry_adj.setdefault(r["gene"], {})[r["ancestry"]] = float(
            r["allele_frequency"]
        )

    race_adj: dict[str, dict[str, float]] = {}
    for r in race_rows:
        if r["gene"] not in gene_set:
            raise DanglingRefError(f"gene_race.csv names unknown gene {r['gene']!r}")
        if r["race"] not in races:
            raise DanglingRefError(f"gene_race.csv names unknown race {r['race']!r}")
        race_adj.setdefault(r["gene"], {})[r["race"]] = float(r["hazard_multiplier"])

    pen_grouped: dict[tuple[str, str, str], list[tuple[int, float]]] = {}
    for r in pen_rows:
        if r["gene"] not in gene_set:
            raise DanglingRefError(
                f"penetrance.csv names unknown gene {r['gene']!r}"
            )
        if r["cancer"] not in cancer_set:
            raise DanglingRefError(
                f"penetrance.csv names unknown cancer {r['cancer']!r}"
            )
        if r["sex"] not in SEXES:
            raise SchemaError(f"penetrance.csv: bad sex {r['sex']!r}")
        pen_grouped.setdefault((r["gene"], r["cancer"], r["sex"]), []).append(
            (int(r["age"]), float(r["hazard"]))
        )

    genes = []
    for row in gene_rows:
        name = row["gene"]
        penetrance = {}
        for (g, cancer, sex), rows in pen_grouped.items():
            if g != name:
                continue
            curve = _curve_from_rows(rows, max_age, f"penetrance {g}/{cancer}/{sex}")
            penetrance[(cancer, sex)] = HazardCurve(curve)
        genes.append(
            GeneSpec(
                name=name,
                allele_frequency=float(row["allele_frequency"]),
                ancestry_adjustments=ancestry_adj.get(name, {}),
                penetrance=penetrance,
                race_adjustments=race_adj.get(name, {}),
            )
        )

    baseline_grouped: dict[tuple[str, str], list[tuple[int, float]]] = {}
    for r in baseline_rows:
        if r["cancer"] not in cancer_set:
            raise DanglingRefError(
                f"baseline.csv names unknown cancer {r['cancer']!r}"
            )
        if r["sex"] not in SEXES:
            raise SchemaError(f"baseline.csv: bad sex {r['sex']!r}")
        baseline_grouped.setdefault((r["cancer"], r["sex"]), []).append(
            (int(r["age"]), float(r["cumulative_risk"]))
        )
    baseline_risk = {}
    for key, rows in baseline_grouped.items():
        curve = _curve_from_rows(rows, max_age, f"baseline {key[0]}/{key[1]}")
        if np.any(curve < 0) or np.any(curve > 1):
            raise RangeError(f"baseline {key}: probabilities out of [0, 1]")
        if np.any(np.diff(curve) < 0):
            raise RangeError(f"baseline {key}: cumulative curve decreases")
        baseline_risk[key] = curve
    for spec in cancers:
        for sex in SEXES:
            if spec.allows_sex(sex) and (spec.name, sex) not in baseline_risk:
                raise SchemaError(f"baseline.csv missing curve for {spec.name}/{sex}")

    life_grouped: dict[str, list[tuple[int, float]]] = {}
    for r in life_rows:
        if r["sex"] not in SEXES:
            raise SchemaError(f"life_table.csv: bad sex {r['sex']!r}")
        life_grouped.setdefault(r["sex"], []).append(
            (int(r["age"]), float(r["survival"]))
        )
    life_table = {}
    for sex in SEXES:
        if sex not in life_grouped:
            raise SchemaError(f"life_table.csv missing sex {sex}")
        curve = _curve_from_rows(life_grouped[sex], max_age, f"life table {sex}")
        if np.any(curve <= 0) or np.any(curve > 1):
            raise RangeError("life table survival must lie in (0, 1]")
        life_table[sex] = curve

    marker_lr = {}
    for r in marker_rows:
        if r["cancer"] not in cancer_set:
            raise DanglingRefError(
                f"marker_lr.csv names unknown cancer {r['cancer']!r}"
            )
        if r["gene"] not in gene_set:
            raise DanglingRefError(f"marker_lr.csv names unknown gene {r['gene']!r}")
        if r["marker"] not in markers.get(r["cancer"], ()):
            raise DanglingRefError(
                f"marker_lr.csv: {r['marker']!r} not a marker of {r['cancer']!r}"
            )
        lr = float(r["lr"])
        if lr < 0:
            raise RangeError("marker likelihood ratios must be non-negative")
        marker_lr[(r["cancer"], r["marker"], r["status"], r["gene"])] = lr

    cbc_table = {}
    for r in cbc_rows:
        rr = float(r["rr"])
        if rr < 0:
            raise RangeError("CBC relative risks must be non-negative")
        cbc_table[(r["modifier"], r["value"])] = rr

    for kind, organs in surgery_organs.items():
        known_organs = {c.organ for c in cancers}
        for organ in organs:
            if organ not in known_organs:
                raise DanglingRefError(
                    f"surgery {kind} names unknown organ {organ!r}"
                )

    for preset, m in models.items():
        for g in m["genes"]:
            if g not in gene_set:
                raise DanglingRefError(f"model {preset} names unknown gene {g!r}")
        for c in m["cancers"]:
            if c not in cancer_set:
                raise DanglingRefError(f"model {preset} names unknown cancer {c!r}")

    return KnowledgeBase(
        version=version,
        max_age=max_age,
        genes=tuple(genes),
        cancers=cancers,
        baseline_risk=baseline_risk,
        life_table=life_table,
        marker_lr=marker_lr,
        cbc_table=cbc_table,
        races=races,
        ancestries=ancestries,
        markers=markers,
        surgery_organs=surgery_organs,
        models=models,
        default_race=default_race,
        default_ancestry=default_ancestry,
    )


def save_bundle(kb: KnowledgeBase, path: str | os.PathLike) -> None:
    """Write the bundle in canonical form (stable order and formatting)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)

    def write(name: str, header: tuple[str, ...], rows):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        (root / name).write_text(buf.getvalue(), encoding="utf-8")

    gene_order = {g.name: i for i, g in enumerate(kb.genes)}
    cancer_order = {c.name: i for i, c in enumerate(kb.cancers)}

    write(
        "genes.csv",
        ("gene", "allele_frequency"),
        [(g.name, _fmt(g.allele_frequency)) for g in kb.genes],
    )
    write(
        "gene_ancestry.csv",
        ("gene", "ancestry", "allele_frequency"),
        [
            (g.name, anc, _fmt(f))
            for g in kb.genes
            for anc, f in sorted(g.ancestry_adjustments.items())
        ],
    )
    write(
        "gene_race.csv",
        ("gene", "race", "hazard_multiplier"),
        [
            (g.name, race, _fmt(m))
            for g in kb.genes
            for race, m in sorted(g.race_adjustments.items())
        ],
    )
    write(
        "cancers.csv",
        ("cancer", "sex_restriction", "organ", "outcome_only"),
        [
            (c.name, c.sex_restriction, c.organ, "1" if c.outcome_only else "0")
            for c in kb.cancers
        ],
    )
    write(
        "penetrance.csv",
        ("gene", "cancer", "sex", "age", "hazard"),
        [
            (g.name, cancer, sex, str(age), _fmt(h))
            for g in kb.genes
            for (cancer, sex) in sorted(
                g.penetrance, key=lambda k: (cancer_order[k[0]], k[1])
            )
            for age, h in enumerate(g.penetrance[(cancer, sex)].annual_hazard)
        ],
    )
    write(
        "baseline.csv",
        ("cancer", "sex", "age", "cumulative_risk"),
        [
            (cancer, sex, str(age), _fmt(v))
            for (cancer, sex) in sorted(
                kb.baseline_risk, key=lambda k: (cancer_order[k[0]], k[1])
            )
            for age, v in enumerate(kb.baseline_risk[(cancer, sex)])
        ],
    )
    write(
        "life_table.csv",
        ("sex", "age", "survival"),
        [
            (sex, str(age), _fmt(v))
            for sex in sorted(kb.life_table)
            for age, v in enumerate(kb.life_table[sex])
        ],
    )
    write(
        "marker_lr.csv",
        ("cancer", "marker", "status", "gene", "lr"),
        [
            (cancer, marker, status, gene, _fmt(lr))
            for (cancer, marker, status, gene), lr in sorted(
                kb.marker_lr.items(),
                key=lambda kv: (
                    cancer_order[kv[0][0]],
                    kv[0][1],
                    kv[0][2],
                    gene_order[kv[0][3]],
                ),
            )
        ],
    )
    write(
        "cbc_modifiers.csv",
        ("modifier", "value", "rr"),
        [
            (modifier, value, _fmt(rr))
            for (modifier, value), rr in sorted(kb.cbc_table.items())
        ],
    )

    manifest = {
        "version": kb.version,
        "max_age": kb.max_age,
        "races": list(kb.races),
        "ancestries": list(kb.ancestries),
        "markers": {c: list(ms) for c, ms in sorted(kb.markers.items())},
        "surgeries": {k: list(v) for k, v in sorted(kb.surgery_organs.items())},
        "models": {
            name: {"genes": list(m["genes"]), "cancers": list(m["cancers"])}
            for name, m in sorted(kb.models.items())
        },
        "default_race": kb.default_race,
        "default_ancestry": kb.default_ancestry,
        "checksums": {name: _sha256(root / name) for name in CSV_FILES},
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def ensure_synth_bundle(cache_dir: str | os.PathLike | None = None) -> Path:
    """Materialize the shipped synthetic bundle on disk and return its path.

    Content is deterministic, so an existing copy is reused as-is.
    """
    from famrisk.kb.synth import build_synthetic_kb

    base = Path(
        cache_dir
        or os.environ.get("FAMRISK_BUNDLE_CACHE")
        or Path(tempfile.gettempdir()) / "famrisk-bundles"
    )
    target = base / SYNTH_BUNDLE_NAME
    if not (target / "manifest.json").exists():
        save_bundle(build_synthetic_kb(), target)
    return target
