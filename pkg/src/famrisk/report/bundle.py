"""Downloadable archives and the printable HTML report.

The run bundle carries eight documented entry kinds: the posterior table,
the risk table, the plot-data JSON, the rendered plot SVGs, the model
input table, the family-tree SVG, the parameter trace, and a data
dictionary describing all of them.  A printable HTML report rides along
in lieu of typeset PDF.  Zip members get a fixed timestamp so identical
inputs produce identical archive bytes.
"""

from __future__ import annotations

import csv
import html
import io
import json
import zipfile
from pathlib import Path

from famrisk.engine.runner import RunResult
from famrisk.kb import KnowledgeBase
from famrisk.pedigree import Pedigree, detect_and_break_loops, to_model_table
from famrisk.report.plots import (
    carrier_plot_svg,
    future_risk_plot_svg,
    plot_data,
)
from famrisk.report.tables import (
    cbc_cancer_name,
    posterior_table_csv,
    risk_table_csv,
)
from famrisk.report.treesvg import family_tree_svg

#: the eight documented entry kinds of a run bundle
RUN_BUNDLE_KINDS: dict[str, tuple[str, ...]] = {
    "posterior_table": ("posterior_table.csv",),
    "risk_table": ("risk_table.csv",),
    "plot_data": ("plot_data.json",),
    "plot_svgs": ("plots/carrier_probability.svg", "plots/future_risk.svg"),
    "pedigree_table": ("pedigree_table.csv",),
    "family_tree": ("family_tree.svg",),
    "parameter_trace": ("parameter_trace.json",),
    "data_dictionary": ("data_dictionary.txt",),
}

RUN_BUNDLE_ENTRIES: tuple[str, ...] = tuple(
    path for paths in RUN_BUNDLE_KINDS.values() for path in paths
) + ("report.html",)

PEDIGREE_BUNDLE_ENTRIES: tuple[str, ...] = (
    "pedigree_table.csv",
    "family_tree.svg",
    "cancer_history.csv",
    "genetic_results.csv",
    "data_dictionary.txt",
)

# fixed member timestamp: zip stores no zone, this is the format epoch
_ZIP_TIME = (1980, 1, 1, 0, 0, 0)


def _zip_bytes(files: dict[str, str | bytes]) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for name, content in files.items():
            info = zipfile.ZipInfo(name, date_time=_ZIP_TIME)
            info.compress_type = zipfile.ZIP_DEFLATED
            if isinstance(content, str):
                content = content.encode()
            zf.writestr(info, content)
    return buf.getvalue()


def _model_table(result: RunResult, pedigree: Pedigree, kb: KnowledgeBase):
    """Rebuild the exact table the run consumed (clones included)."""
    trace = result.parameter_trace
    working = pedigree
    if trace.get("clone_pairs"):
        working, _ = detect_and_break_loops(pedigree)
    return to_model_table(
        working,
        kb,
        default_race=trace.get("default_race"),
        default_ancestry=trace.get("default_ancestry"),
    )


def _run_data_dictionary(columns: tuple[str, ...]) -> str:
    lines = [
        "Run bundle contents",
        "===================",
        "",
        "posterior_table.csv",
        "  label,kind,probability. One row per plotted bar: the non-carrier",
        "  mass (kind=non_carrier), each gene's carrier probability",
        "  (kind=carrier), and, when the run allowed more than one carried",
        "  gene, each multi-gene state's joint probability (kind=joint).",
        "",
        "risk_table.csv",
        "  cancer,horizon_age,risk,baseline,note. Cumulative future risk in",
        "  (current age, horizon_age] per cancer, next to the population",
        "  baseline for an average-risk person of the same sex and age.",
        "  Cancers the proband cannot develop appear once with the reason in",
        "  the note column and empty numbers.",
        "",
        "plot_data.json",
        "  The exact numbers behind both plots, verbatim from the result",
        "  payload: carrier labels/probabilities with the 2.5% threshold,",
        "  and per-cancer horizon/risk/baseline arrays.",
        "",
        "plots/carrier_probability.svg, plots/future_risk.svg",
        "  Rendered versions of the two plots.",
        "",
        "pedigree_table.csv",
        "  The flat model input table the engine consumed, one row per",
        "  individual (loop-breaking clones included), founders first.",
        "  Columns:",
        "    " + ", ".join(columns),
        "",
        "family_tree.svg",
        "  Family tree drawing: squares are male, circles female, filled",
        "  symbols have a recorded model cancer, a slash marks the deceased,",
        "  and the box and arrow mark the proband.",
        "",
        "parameter_trace.json",
        "  Settings as submitted plus everything resolved against the",
        "  knowledge bundle (gene/cancer lists, paring cap, defaults, seed,",
        "  state count, clones, approximations) for traceability.",
        "",
        "data_dictionary.txt",
        "  This file.",
        "",
        "report.html",
        "  Printable single-page report embedding the plots and tables.",
        "",
    ]
    return "\n".join(lines)


def _pedigree_data_dictionary(columns: tuple[str, ...]) -> str:
    lines = [
        "Pedigree bundle contents",
        "========================",
        "",
        "pedigree_table.csv",
        "  Flat model input table, one row per individual, founders first.",
        "  Columns:",
        "    " + ", ".join(columns),
        "",
        "family_tree.svg",
        "  Family tree drawing (squares male, circles female, fill = cancer",
        "  history, slash = deceased, box and arrow = proband).",
        "",
        "cancer_history.csv",
        "  individual_id,cancer,age_at_diagnosis,modeled. All recorded",
        "  diagnoses including free-text cancers outside the model",
        "  (modeled=no), which never enter the likelihood.",
        "",
        "genetic_results.csv",
        "  individual_id,panel,gene,status,nucleotide,protein,zygosity.",
        "  One row per tested gene; genes on the panel without a finding",
        "  are status=negative.",
        "",
        "data_dictionary.txt",
        "  This file.",
        "",
    ]
    return "\n".join(lines)


def _cancer_history_csv(pedigree: Pedigree) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["individual_id", "cancer", "age_at_diagnosis", "modeled"])
    for m in pedigree.members:
        for dx in m.cancers:
            w.writerow([
                m.id,
                dx.cancer_name,
                "" if dx.age_at_diagnosis is None else dx.age_at_diagnosis,
                "yes" if dx.is_model_cancer else "no",
            ])
    return buf.getvalue()


def _genetic_results_csv(pedigree: Pedigree) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow([
        "individual_id", "panel", "gene", "status",
        "nucleotide", "protein", "zygosity",
    ])
    for m in pedigree.members:
        if m.panel is None:
            continue
        for gene in sorted(m.panel.genes_tested):
            finding = m.panel.findings.get(gene)
            w.writerow([
                m.id,
                m.panel.panel_name,
                gene,
                m.panel.status(gene),
                finding.nucleotide if finding else "",
                finding.protein if finding else "",
                finding.zygosity if finding else "",
            ])
    return buf.getvalue()


def _inline_svg(svg: str) -> str:
    # drop the XML prolog so the drawing can sit inside the HTML body
    start = svg.find("<svg")
    return svg[start:] if start >= 0 else svg


def _html_table(csv_text: str) -> str:
    rows = list(csv.reader(io.StringIO(csv_text)))
    out = ["<table>"]
    for i, row in enumerate(rows):
        tag = "th" if i == 0 else "td"
        cells = "".join(f"<{tag}>{html.escape(c)}</{tag}>" for c in row)
        out.append(f"<tr>{cells}</tr>")
    out.append("</table>")
    return "\n".join(out)


def report_html(
    result: RunResult, pedigree: Pedigree, kb: KnowledgeBase
) -> str:
    """Single-page printable report: plots, tables, console log, trace."""
    cbc = cbc_cancer_name(kb)
    trace_json = json.dumps(result.parameter_trace, indent=2, sort_keys=True)
    console = html.escape("\n".join(result.console_log))
    return f"""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Risk report: {html.escape(pedigree.pedigree_id)}</title>
<style>
body {{ font-family: sans-serif; margin: 2em; color: #222; }}
h1 {{ font-size: 1.4em; }} h2 {{ font-size: 1.1em; margin-top: 2em; }}
table {{ border-collapse: collapse; font-size: 0.85em; }}
th, td {{ border: 1px solid #bbb; padding: 2px 8px; text-align: left; }}
pre {{ background: #f5f5f5; padding: 1em; font-size: 0.8em; overflow-x: auto; }}
svg {{ max-width: 100%; height: auto; }}
</style>
</head>
<body>
<h1>Hereditary cancer risk report &mdash; pedigree
 {html.escape(pedigree.pedigree_id)}</h1>
<p>Knowledge bundle {html.escape(kb.version)}, pedigree revision
 {pedigree.revision}, proband {pedigree.proband_id}.</p>
<h2>Mutation carrier probabilities</h2>
{_inline_svg(carrier_plot_svg(result))}
{_html_table(posterior_table_csv(result))}
<h2>Future cancer risks</h2>
{_inline_svg(future_risk_plot_svg(result, cbc))}
{_html_table(risk_table_csv(result, cbc))}
<h2>Family tree</h2>
{_inline_svg(family_tree_svg(pedigree))}
<h2>Console output</h2>
<pre>{console}</pre>
<h2>Parameter trace</h2>
<pre>{html.escape(trace_json)}</pre>
</body>
</html>
"""


def _run_files(
    result: RunResult, pedigree: Pedigree, kb: KnowledgeBase
) -> dict[str, str]:
    cbc = cbc_cancer_name(kb)
    table = _model_table(result, pedigree, kb)
    return {
        "posterior_table.csv": posterior_table_csv(result),
        "risk_table.csv": risk_table_csv(result, cbc),
        "plot_data.json": json.dumps(
            plot_data(result, cbc), sort_keys=True, indent=2
        ),
        "plots/carrier_probability.svg": carrier_plot_svg(result),
        "plots/future_risk.svg": future_risk_plot_svg(result, cbc),
        "pedigree_table.csv": table.to_csv(),
        "family_tree.svg": family_tree_svg(pedigree),
        "parameter_trace.json": json.dumps(
            result.parameter_trace, sort_keys=True, indent=2
        ),
        "data_dictionary.txt": _run_data_dictionary(table.columns),
        "report.html": report_html(result, pedigree, kb),
    }


def build_run_bundle(
    result: RunResult, pedigree: Pedigree, kb: KnowledgeBase
) -> bytes:
    """Zip archive with every documented run-bundle entry."""
    return _zip_bytes(_run_files(result, pedigree, kb))


def write_run_files(
    result: RunResult,
    pedigree: Pedigree,
    kb: KnowledgeBase,
    out_dir: str | Path,
) -> list[Path]:
    """Write the bundle entries plus result.json into a directory.

    This is the headless report path: figures land as SVG files next to
    the delimited tables instead of inside an archive.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = dict(_run_files(result, pedigree, kb))
    files["result.json"] = json.dumps(
        result.to_dict(), sort_keys=True, indent=2
    )
    written = []
    for name, content in files.items():
        path = out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content)
        written.append(path)
    return written


def build_pedigree_bundle(
    pedigree: Pedigree,
    kb: KnowledgeBase,
    default_race: str | None = None,
    default_ancestry: str | None = None,
) -> bytes:
    """Zip archive for downloading a pedigree without running the model."""
    table = to_model_table(
        pedigree, kb,
        default_race=default_race, default_ancestry=default_ancestry,
    )
    files = {
        "pedigree_table.csv": table.to_csv(),
        "family_tree.svg": family_tree_svg(pedigree),
        "cancer_history.csv": _cancer_history_csv(pedigree),
        "genetic_results.csv": _genetic_results_csv(pedigree),
        "data_dictionary.txt": _pedigree_data_dictionary(table.columns),
    }
    return _zip_bytes(files)
