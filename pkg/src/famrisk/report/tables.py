"""Delimited tables backing the two result plots.

Numbers are written with ``repr`` so the CSV cell parses back to the exact
float in the result payload; downstream consumers must not see values that
differ from the JSON by a rounding step.
"""

from __future__ import annotations

import csv
import io

from famrisk.engine.runner import RunResult
from famrisk.kb import KnowledgeBase


def cbc_cancer_name(kb: KnowledgeBase) -> str:
    """Bundle name of the outcome-only second-breast-primary cancer."""
    regular = {c.name for c in kb.regular_cancers()}
    extras = [c.name for c in kb.cancers if c.name not in regular]
    return extras[0] if extras else "contralateral_breast"


def _fmt(x: float) -> str:
    return repr(float(x))


def posterior_table_csv(result: RunResult) -> str:
    """Carrier probability per gene, the non-carrier mass, and any joint
    multi-gene probabilities, in payload order."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["label", "kind", "probability"])
    w.writerow(["none", "non_carrier", _fmt(result.non_carrier_probability)])
    for gene, p in result.carrier_posterior.items():
        w.writerow([gene, "carrier", _fmt(p)])
    if result.joint_posterior:
        for label, p in result.joint_posterior.items():
            if label == "none" or "+" not in label:
                continue
            w.writerow([label, "joint", _fmt(p)])
    return buf.getvalue()


def risk_table_csv(result: RunResult, cbc_label: str = "contralateral_breast") -> str:
    """Future-risk and baseline values per cancer and horizon age.

    Cancers the proband cannot develop get a single row whose note column
    carries the reason; the numeric columns stay empty.
    """
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["cancer", "horizon_age", "risk", "baseline", "note"])

    def emit(name: str, entry: dict):
        if entry["status"] != "ok":
            w.writerow([name, "", "", "", entry["reason"]])
            return
        rows = zip(entry["horizons"], entry["risk"], entry["baseline"])
        for age, risk, base in rows:
            w.writerow([name, age, _fmt(risk), _fmt(base), ""])

    for cancer, entry in result.future_risk.items():
        emit(cancer, entry)
    if result.cbc_risk is not None:
        emit(cbc_label, result.cbc_risk)
    return buf.getvalue()
