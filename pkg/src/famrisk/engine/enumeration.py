"""Brute-force joint-genotype enumeration, the reference for peeling.

Walks every assignment of pared states to every member, multiplying
founder priors, parent-to-child transmission probabilities, and the same
phenotype likelihood vectors the peeler uses, then marginalizes onto the
proband. Exponential in family size by construction; guarded by a hard
cap on the joint state count so it stays a verification tool.
"""

from __future__ import annotations

import numpy as np

from famrisk.engine.likelihood import LikelihoodContext
from famrisk.engine.settings import ResolvedSettings
from famrisk.engine.states import StateSpace, build_transmission, founder_prior
from famrisk.errors import InfeasibleConstraints, TooLarge
from famrisk.kb import KnowledgeBase

DEFAULT_JOINT_CAP = 10_000_000
_CHUNK = 500_000


def enumerate_posterior(
    rows,
    kb: KnowledgeBase,
    resolved: ResolvedSettings,
    space: StateSpace,
    *,
    likelihoods: dict[int, np.ndarray] | None = None,
    context: LikelihoodContext | None = None,
    joint_cap: int = DEFAULT_JOINT_CAP,
) -> np.ndarray:
    """Exact proband posterior by full enumeration; sums to 1.

    Raises TooLarge when ``len(space) ** len(rows)`` exceeds ``joint_cap``.
    """
    rows = list(rows)
    n = len(space)
    total = n ** len(rows)
    if total > joint_cap:
        raise TooLarge(
            f"joint space {n}^{len(rows)} = {total} exceeds the cap of {joint_cap}"
        )

    if likelihoods is None:
        ctx = context or LikelihoodContext(kb, resolved, space)
        likelihoods = {r.id: ctx.member_likelihood(r) for r in rows}

    position = {r.id: j for j, r in enumerate(rows)}
    proband = next((r for r in rows if r.proband), None)
    if proband is None:
        raise InfeasibleConstraints("no proband row")

    priors: dict[str, np.ndarray] = {}
    for r in rows:
        if r.father is None and r.ancestry not in priors:
            priors[r.ancestry] = founder_prior(space, kb, r.ancestry)

    needs_transmission = any(r.father is not None for r in rows)
    dense_t = None
    if needs_transmission:
        if n**3 > 80_000_000:
            raise TooLarge(
                f"dense transmission table {n}^3 is too large to materialize"
            )
        dense_t = build_transmission(space).dense()

    accum = np.zeros(n)
    strides = [n**j for j in range(len(rows))]
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        digits = [(idx // strides[j]) % n for j in range(len(rows))]
        factor = np.ones(len(idx))
        for j, r in enumerate(rows):
            d = digits[j]
            factor *= likelihoods[r.id][d]
            if r.father is None:
                factor *= priors[r.ancestry][d]
            else:
                df = digits[position[r.father]]
                dm = digits[position[r.mother]]
                factor *= dense_t[df, dm, d]
        accum += np.bincount(digits[position[proband.id]], weights=factor, minlength=n)

    s = accum.sum()
    if s <= 0.0:
        raise InfeasibleConstraints(
            "recorded data leave no genotype configuration possible"
        )
    return accum / s
