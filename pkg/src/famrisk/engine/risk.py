"""Future cancer risk for the proband, mixed over the genotype posterior.

For one cancer and one genotype state with combined annual hazard h, the
conditional probability of a first diagnosis in (t0, t] given being
diagnosis-free at t0 telescopes to ``1 - prod(1 - h(v) for t0 < v <= t)``
and is accumulated year by year as ``h(u) * prod(1 - h(v) for t0 < v < u)``.
Crude mode multiplies each year's term by the all-cause survival from the
life table accumulated from t0 up to that year, so crude <= net pointwise;
net mode skips the discount. The reported curve is the posterior-weighted
mixture of the per-state curves, with the average-risk baseline computed
the same way for the overlay.

The contralateral-breast curve is built identically from the bundle's
outcome-only entry, with the recorded modifier relative risks scaling the
per-state hazard before mixing.
"""

from __future__ import annotations

import numpy as np

from famrisk.engine.likelihood import LikelihoodContext
from famrisk.engine.settings import ResolvedSettings
from famrisk.engine.states import StateSpace
from famrisk.errors import CancerNotApplicable, NotApplicable
from famrisk.kb import KnowledgeBase

_HAZARD_CAP = 1.0 - 1e-12


def risk_horizons(t0: int, resolved: ResolvedSettings, kb: KnowledgeBase) -> list[int]:
    """Proband age plus each configured offset, clipped to and always
    including the bundle's maximum age."""
    horizons = {t0 + i for i in resolved.risk_intervals if t0 + i <= kb.max_age}
    horizons.add(kb.max_age)
    return sorted(horizons)


def conditional_risk_curve(
    hazard: np.ndarray,
    t0: int,
    mode: str,
    life: np.ndarray | None,
) -> np.ndarray:
    """Cumulative conditional incidence indexed by horizon offset.

    Returns ``cum`` with ``cum[j]`` = risk in (t0, t0+j]; ``cum[0] = 0``.
    ``life`` is the per-year all-cause survival used in crude mode.
    """
    top = len(hazard) - 1
    u = hazard[t0 + 1 : top + 1]
    prefix = np.concatenate([[1.0], np.cumprod(1.0 - u[:-1])]) if len(u) else u
    q = u * prefix
    if mode == "crude" and len(q):
        q = q * np.cumprod(life[t0:top])
    return np.concatenate([[0.0], np.cumsum(q)])


def _mixed_curve(
    posterior: np.ndarray,
    space: StateSpace,
    t0: int,
    mode: str,
    life: np.ndarray,
    hazard_for_group,
    relevant: list[int],
) -> np.ndarray:
    """Posterior mixture of per-state curves, one evaluation per distinct
    carried set restricted to ``relevant`` gene indices."""
    rel_mask = np.uint32(0)
    for gi in relevant:
        rel_mask |= np.uint32(1 << gi)
    eff = space.masks & rel_mask
    uniq, inverse = np.unique(eff, return_inverse=True)
    weights = np.zeros(len(uniq))
    np.add.at(weights, inverse, posterior)
    mixed = None
    for ui, mask in enumerate(uniq):
        if weights[ui] == 0.0:
            continue
        carried = tuple(gi for gi in relevant if mask & np.uint32(1 << gi))
        curve = conditional_risk_curve(hazard_for_group(carried), t0, mode, life)
        mixed = weights[ui] * curve if mixed is None else mixed + weights[ui] * curve
    if mixed is None:  # no posterior mass at all cannot happen post-peeling
        mixed = conditional_risk_curve(hazard_for_group(()), t0, mode, life)
    return mixed


def future_risk_curves(
    posterior: np.ndarray,
    proband_row,
    cancer: str,
    kb: KnowledgeBase,
    resolved: ResolvedSettings,
    space: StateSpace,
    context: LikelihoodContext | None = None,
) -> tuple[list[int], np.ndarray, np.ndarray]:
    """(horizons, mixed risk, baseline risk) for one diagnosable cancer.

    Raises CancerNotApplicable when the proband's sex rules the cancer
    out, the cancer is already diagnosed, or its organ has been removed.
    """
    ctx = context or LikelihoodContext(kb, resolved, space)
    spec = kb.cancer(cancer)
    if not spec.allows_sex(proband_row.sex):
        raise CancerNotApplicable(
            f"{cancer} is restricted to {spec.sex_restriction}"
        )
    if proband_row.has_diagnosis(cancer):
        raise CancerNotApplicable(f"{cancer} is already diagnosed")
    if _organ_removed(proband_row, cancer, kb):
        raise CancerNotApplicable(f"the {spec.organ} was removed by surgery")

    t0 = proband_row.age
    sex, race = proband_row.sex, proband_row.race
    life = kb.life_table[sex]
    mode = resolved.penetrance_mode
    horizons = risk_horizons(t0, resolved, kb)

    relevant = ctx.relevant_genes(cancer, sex, race)
    mixed = _mixed_curve(
        posterior,
        space,
        t0,
        mode,
        life,
        lambda carried: ctx.combined_hazard(carried, cancer, sex, race),
        relevant,
    )
    baseline = conditional_risk_curve(ctx.baseline_hazard(cancer, sex), t0, mode, life)
    offsets = [h - t0 for h in horizons]
    return horizons, mixed[offsets], baseline[offsets]


def cbc_risk_curves(
    posterior: np.ndarray,
    proband_row,
    kb: KnowledgeBase,
    resolved: ResolvedSettings,
    space: StateSpace,
    context: LikelihoodContext | None = None,
) -> tuple[list[int], np.ndarray, np.ndarray]:
    """(horizons, mixed risk, baseline risk) for the contralateral breast.

    Requires a first breast-cancer diagnosis and an intact contralateral
    breast; NotApplicable otherwise (and when the run predicts no
    outcome-only cancer).
    """
    if not resolved.predict_cbc:
        raise NotApplicable("contralateral prediction is not selected")
    cbc = resolved.cbc_name
    ctx = context or LikelihoodContext(kb, resolved, space)
    organ = kb.cancer(cbc).organ
    first = [
        c.name
        for c in kb.regular_cancers()
        if c.organ == organ and proband_row.has_diagnosis(c.name)
    ]
    if not first:
        raise NotApplicable("no breast-cancer diagnosis recorded")
    if _organ_removed(proband_row, cbc, kb):
        raise NotApplicable("bilateral mastectomy recorded")

    rr = 1.0
    for modifier, value in proband_row.cbc:
        rr *= kb.cbc_table[(modifier, value)]

    t0 = proband_row.age
    sex, race = proband_row.sex, proband_row.race
    life = kb.life_table[sex]
    mode = resolved.penetrance_mode
    horizons = risk_horizons(t0, resolved, kb)

    def hazard_for(carried: tuple[int, ...]) -> np.ndarray:
        h = ctx.combined_hazard(carried, cbc, sex, race)
        return np.clip(h * rr, 0.0, _HAZARD_CAP)

    relevant = ctx.relevant_genes(cbc, sex, race)
    mixed = _mixed_curve(posterior, space, t0, mode, life, hazard_for, relevant)
    baseline = conditional_risk_curve(ctx.baseline_hazard(cbc, sex), t0, mode, life)
    offsets = [h - t0 for h in horizons]
    return horizons, mixed[offsets], baseline[offsets]


def _organ_removed(row, cancer: str, kb: KnowledgeBase) -> bool:
    organ = kb.cancer(cancer).organ
    return any(
        row.has_surgery(kind)
        for kind, organs in kb.surgery_organs.items()
        if organ in organs
    )
