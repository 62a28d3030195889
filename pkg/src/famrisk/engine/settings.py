"""Run settings and their resolution against a knowledge base.

A run is configured by a model preset (or an explicit gene/cancer
selection), the paring bound M on the number of simultaneously carried
genes, risk horizons, population defaults, and a handful of toggles.
Resolution validates everything against the bundle once, up front, so the
engine proper never has to re-check names.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from famrisk.errors import RangeError, UnknownCancer, UnknownGene
from famrisk.kb import KnowledgeBase

PENETRANCE_MODES = ("crude", "net")

# genes that distinguish "one variant" from "more than one variant" when
# the multi-variant toggle is on
MULTI_VARIANT_GENES = ("BRCA1", "BRCA2")


@dataclass(frozen=True)
class RunSettings:
    """User-facing configuration for a single model run.

    ``genes`` and ``cancers`` default to the preset named by
    ``model_name``; pass explicit tuples to override (order is ignored,
    the bundle order wins).
    """

    model_name: str = "fam3pro22"
    genes: tuple[str, ...] | None = None
    cancers: tuple[str, ...] | None = None
    max_carried: int = 2  # M: paring bound on simultaneously carried genes
    risk_intervals: tuple[int, ...] = (1, 5, 10)
    default_race: str | None = None
    default_ancestry: str | None = None
    imputations: int = 3  # K: completed age tables averaged per run
    penetrance_mode: str = "crude"
    apply_prophylactic: bool = True
    use_proband_germline: bool = True
    brca_multi_variant: bool = False
    auto_break_loops: bool = True
    seed: int = 0

    def resolve(self, kb: KnowledgeBase) -> "ResolvedSettings":
        return resolve_settings(self, kb)

    @classmethod
    def from_dict(cls, data: dict) -> "RunSettings":
        """Build from a JSON-shaped dict; lists become tuples, unknown
        keys are rejected so typos fail loudly."""
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise RangeError(f"unknown settings: {sorted(extra)}")
        kwargs = dict(data)
        for name in ("genes", "cancers", "risk_intervals"):
            if kwargs.get(name) is not None:
                kwargs[name] = tuple(kwargs[name])
        return cls(**kwargs)


@dataclass(frozen=True)
class ResolvedSettings:
    """Settings after validation against a bundle.

    ``genes`` and ``cancers`` are in bundle order; ``cancers`` holds only
    diagnosable cancers, with outcome-only prediction tracked separately
    by ``predict_cbc``.
    """

    run: RunSettings
    genes: tuple[str, ...]
    cancers: tuple[str, ...]
    max_carried: int
    default_race: str
    default_ancestry: str
    predict_cbc: bool
    cbc_name: str = ""
    multi_variant_genes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def seed(self) -> int:
        return self.run.seed

    @property
    def imputations(self) -> int:
        return self.run.imputations

    @property
    def penetrance_mode(self) -> str:
        return self.run.penetrance_mode

    @property
    def apply_prophylactic(self) -> bool:
        return self.run.apply_prophylactic

    @property
    def use_proband_germline(self) -> bool:
        return self.run.use_proband_germline

    @property
    def risk_intervals(self) -> tuple[int, ...]:
        return self.run.risk_intervals


def resolve_settings(settings: RunSettings, kb: KnowledgeBase) -> ResolvedSettings:
    """Validate ``settings`` against ``kb`` and fix bundle ordering.

    M is clamped to the number of selected genes (a one-gene run with the
    default M=2 is legitimate); everything else out of range raises.
    """
    if settings.genes is None or settings.cancers is None:
        if settings.model_name not in kb.models:
            raise RangeError(
                f"unknown model preset {settings.model_name!r}; "
                f"bundle offers {sorted(kb.models)}"
            )
        preset = kb.models[settings.model_name]

    if settings.genes is None:
        wanted_genes = set(preset["genes"])
    else:
        wanted_genes = set(settings.genes)
        for g in wanted_genes:
            if not kb.has_gene(g):
                raise UnknownGene(f"gene {g!r} not in bundle")
    if not wanted_genes:
        raise RangeError("a run needs at least one gene")

    if settings.cancers is None:
        wanted_cancers = set(preset["cancers"])
    else:
        wanted_cancers = set(settings.cancers)
        for c in wanted_cancers:
            if not kb.has_cancer(c):
                raise UnknownCancer(f"cancer {c!r} not in bundle")
    if not wanted_cancers:
        raise RangeError("a run needs at least one cancer")

    genes = tuple(g.name for g in kb.genes if g.name in wanted_genes)
    regular = tuple(
        c.name for c in kb.cancers if not c.outcome_only and c.name in wanted_cancers
    )
    outcome_only = [
        c.name for c in kb.cancers if c.outcome_only and c.name in wanted_cancers
    ]
    if not regular:
        raise RangeError("a run needs at least one diagnosable cancer")

    if settings.max_carried < 1:
        raise RangeError(f"max carried genes must be >= 1, got {settings.max_carried}")
    max_carried = min(settings.max_carried, len(genes))

    if settings.imputations < 1:
        raise RangeError(f"imputation count must be >= 1, got {settings.imputations}")
    if settings.penetrance_mode not in PENETRANCE_MODES:
        raise RangeError(f"penetrance mode must be one of {PENETRANCE_MODES}")

    intervals = settings.risk_intervals
    if not intervals:
        raise RangeError("at least one risk interval is required")
    if any(i <= 0 for i in intervals):
        raise RangeError("risk intervals must be positive")
    if any(b <= a for a, b in zip(intervals, intervals[1:])):
        raise RangeError("risk intervals must be strictly increasing")

    race = settings.default_race if settings.default_race is not None else kb.default_race
    if race not in kb.races:
        raise RangeError(f"default race {race!r} not in bundle enumeration")
    ancestry = (
        settings.default_ancestry
        if settings.default_ancestry is not None
        else kb.default_ancestry
    )
    if ancestry not in kb.ancestries:
        raise RangeError(f"default ancestry {ancestry!r} not in bundle enumeration")

    multi = ()
    if settings.brca_multi_variant:
        multi = tuple(g for g in genes if g in MULTI_VARIANT_GENES)

    return ResolvedSettings(
        run=settings,
        genes=genes,
        cancers=regular,
        max_carried=max_carried,
        default_race=race,
        default_ancestry=ancestry,
        predict_cbc=bool(outcome_only),
        cbc_name=outcome_only[0] if outcome_only else "",
        multi_variant_genes=multi,
    )
