"""End-to-end model run: one pedigree in, one result out.

Pipeline: validate the pedigree (blocking issues abort), break mating
loops when allowed, flatten to the model input table, impute missing ages
into K completed tables, peel each table, average the K posteriors, then
turn the averaged posterior into carrier probabilities and future-risk
curves. Everything downstream of the seed is deterministic: serializing
the same run twice gives byte-identical JSON, which is why the timing
block stays out of the canonical payload.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from famrisk.engine.enumeration import DEFAULT_JOINT_CAP, enumerate_posterior
from famrisk.engine.imputation import impute_ages
from famrisk.engine.likelihood import LikelihoodContext
from famrisk.engine.peeling import peel_pedigree
from famrisk.engine.risk import cbc_risk_curves, future_risk_curves
from famrisk.engine.settings import ResolvedSettings, RunSettings, resolve_settings
from famrisk.engine.states import StateSpace, build_state_space
from famrisk.errors import (
    CancerNotApplicable,
    NotApplicable,
    ValidationFailed,
)
from famrisk.kb import KnowledgeBase
from famrisk.pedigree import (
    Pedigree,
    detect_and_break_loops,
    to_model_table,
    validate_pedigree,
)

RESULT_SCHEMA = 1


@dataclass
class RunResult:
    """Everything a run produces; canonical JSON excludes timing."""

    carrier_posterior: dict[str, float]
    non_carrier_probability: float
    joint_posterior: dict[str, float] | None
    future_risk: dict[str, dict]
    cbc_risk: dict | None
    console_log: list[str]
    parameter_trace: dict
    timing: dict[str, float] = field(default_factory=dict)

    def canonical_dict(self) -> dict:
        return {
            "schema": RESULT_SCHEMA,
            "carrier_posterior": self.carrier_posterior,
            "non_carrier_probability": self.non_carrier_probability,
            "joint_posterior": self.joint_posterior,
            "future_risk": self.future_risk,
            "cbc_risk": self.cbc_risk,
            "console_log": self.console_log,
            "parameter_trace": self.parameter_trace,
        }

    def canonical_json(self) -> bytes:
        return json.dumps(
            self.canonical_dict(), sort_keys=True, separators=(",", ":")
        ).encode()

    def to_dict(self) -> dict:
        out = self.canonical_dict()
        out["timing"] = self.timing
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunResult":
        return cls(
            carrier_posterior=data["carrier_posterior"],
            non_carrier_probability=data["non_carrier_probability"],
            joint_posterior=data.get("joint_posterior"),
            future_risk=data["future_risk"],
            cbc_risk=data.get("cbc_risk"),
            console_log=data["console_log"],
            parameter_trace=data["parameter_trace"],
            timing=data.get("timing", {}),
        )


def _curve_entry(horizons, risk, baseline) -> dict:
    return {
        "status": "ok",
        "horizons": [int(h) for h in horizons],
        "risk": [float(r) for r in risk],
        "baseline": [float(b) for b in baseline],
    }


def _na_entry(reason: str) -> dict:
    return {"status": "not_applicable", "reason": reason}


def carrier_marginals(
    posterior: np.ndarray, space: StateSpace
) -> tuple[dict[str, float], float]:
    """Per-gene carrier probability and the empty-state probability.

    The carrier marginal is computed as one minus the non-carrier mass so
    a gene whose non-carrier states were all excluded comes out exactly 1.
    """
    carrier = {}
    for gi, gene in enumerate(space.genes):
        non = float(posterior[space.levels[:, gi] == 0].sum())
        carrier[gene] = min(1.0, max(0.0, 1.0 - non))
    return carrier, float(posterior[0])


def run_model(
    pedigree: Pedigree, kb: KnowledgeBase, settings: RunSettings
) -> RunResult:
    """Run the full pipeline; deterministic given (inputs, seed)."""
    wall_start = time.perf_counter()
    timing: dict[str, float] = {}
    resolved = resolve_settings(settings, kb)

    t = time.perf_counter()
    report = validate_pedigree(pedigree, kb)
    console = report.lines()
    if report.blocking:
        raise ValidationFailed(
            "pedigree has blocking validation errors", report=report
        )
    timing["validate"] = time.perf_counter() - t

    t = time.perf_counter()
    clone_pairs: list[tuple[int, int]] = []
    working = pedigree
    if settings.auto_break_loops:
        working, clone_pairs = detect_and_break_loops(pedigree)
        for original, clone in clone_pairs:
            console.append(
                f"NOTE: mating loop broken by cloning individual "
                f"{original} as {clone}"
            )
    table = to_model_table(
        working,
        kb,
        default_race=resolved.default_race,
        default_ancestry=resolved.default_ancestry,
    )
    timing["table"] = time.perf_counter() - t

    t = time.perf_counter()
    missing = sum(1 for r in table.rows if r.age is None)
    tables = impute_ages(table.rows, kb, resolved)
    if missing:
        console.append(
            f"NOTE: imputed {missing} missing age(s) over "
            f"{resolved.imputations} table(s), seed {resolved.seed}"
        )
    timing["impute"] = time.perf_counter() - t

    t = time.perf_counter()
    space = build_state_space(resolved)
    context = LikelihoodContext(kb, resolved, space)
    if all(tbl == tables[0] for tbl in tables[1:]):
        # nothing was imputed (or every draw agreed): K identical tables
        # give one posterior, exactly
        posterior = peel_pedigree(
            tables[0], kb, resolved, space, context=context
        )
    else:
        posteriors = [
            peel_pedigree(rows, kb, resolved, space, context=context)
            for rows in tables
        ]
        posterior = np.mean(posteriors, axis=0)
    timing["peel"] = time.perf_counter() - t

    t = time.perf_counter()
    carrier, non_carrier = carrier_marginals(posterior, space)
    joint = None
    if resolved.max_carried >= 2:
        joint = {
            space.labels[i]: float(p) for i, p in enumerate(posterior)
        }

    proband_row = table.proband_row
    future: dict[str, dict] = {}
    for cancer in resolved.cancers:
        try:
            horizons, risk, baseline = future_risk_curves(
                posterior, proband_row, cancer, kb, resolved, space, context
            )
            future[cancer] = _curve_entry(horizons, risk, baseline)
        except CancerNotApplicable as exc:
            future[cancer] = _na_entry(str(exc))

    cbc_entry = None
    if resolved.predict_cbc:
        try:
            horizons, risk, baseline = cbc_risk_curves(
                posterior, proband_row, kb, resolved, space, context
            )
            cbc_entry = _curve_entry(horizons, risk, baseline)
        except NotApplicable as exc:
            cbc_entry = _na_entry(str(exc))
    timing["risk"] = time.perf_counter() - t

    approximations = []
    if resolved.max_carried < len(resolved.genes):
        approximations.append(
            f"paring: at most {resolved.max_carried} of "
            f"{len(resolved.genes)} genes carried simultaneously"
        )
    if clone_pairs:
        approximations.append(
            f"loop breaking duplicated {len(clone_pairs)} individual(s)"
        )
    if missing:
        approximations.append(
            f"{missing} age(s) multiply imputed (K={resolved.imputations})"
        )

    trace = {
        "settings": asdict(settings),
        "resolved_genes": list(resolved.genes),
        "resolved_cancers": list(resolved.cancers),
        "predict_cbc": resolved.predict_cbc,
        "max_carried": resolved.max_carried,
        "default_race": resolved.default_race,
        "default_ancestry": resolved.default_ancestry,
        "bundle_version": kb.version,
        "seed": resolved.seed,
        "state_count": len(space),
        "clone_pairs": [[a, b] for a, b in clone_pairs],
        "approximations": approximations,
        "pedigree_id": pedigree.pedigree_id,
        "pedigree_revision": pedigree.revision,
        "proband_id": pedigree.proband_id,
        "member_count": len(table.rows),
    }
    console.append(
        f"OK: peeled {len(table.rows)} member(s) over {len(space)} "
        f"genotype state(s)"
    )

    timing["total"] = time.perf_counter() - wall_start
    return RunResult(
        carrier_posterior=carrier,
        non_carrier_probability=non_carrier,
        joint_posterior=joint,
        future_risk=future,
        cbc_risk=cbc_entry,
        console_log=console,
        parameter_trace=trace,
        timing=timing,
    )


def oracle_posterior(
    pedigree: Pedigree,
    kb: KnowledgeBase,
    settings: RunSettings,
    *,
    joint_cap: int = DEFAULT_JOINT_CAP,
) -> tuple[StateSpace, np.ndarray, np.ndarray]:
    """(space, peeled, enumerated) posteriors for cross-checking.

    Runs the same table/likelihood path as run_model but with a single
    imputation table, then computes the posterior both ways.
    """
    resolved = resolve_settings(settings, kb)
    report = validate_pedigree(pedigree, kb)
    if report.blocking:
        raise ValidationFailed(
            "pedigree has blocking validation errors", report=report
        )
    working, _ = detect_and_break_loops(pedigree)
    table = to_model_table(
        working,
        kb,
        default_race=resolved.default_race,
        default_ancestry=resolved.default_ancestry,
    )
    rows = impute_ages(table.rows, kb, resolved)[0]
    space = build_state_space(resolved)
    context = LikelihoodContext(kb, resolved, space)
    likelihoods = {r.id: context.member_likelihood(r) for r in rows}
    peeled = peel_pedigree(
        rows, kb, resolved, space, likelihoods=likelihoods
    )
    enumerated = enumerate_posterior(
        rows, kb, resolved, space, likelihoods=likelihoods, joint_cap=joint_cap
    )
    return space, peeled, enumerated
