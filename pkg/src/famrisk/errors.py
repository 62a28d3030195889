"""Exception taxonomy shared across the workbench.

Every error that crosses a module boundary has a named class here so the
service layer can map them to stable wire codes and the CLI to exit codes.
"""


class FamriskError(Exception):
    """Base class for all workbench errors."""

    #: stable machine-readable code; defaults to the class name
    code: str = ""

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)

    @property
    def wire_code(self) -> str:
        return self.code or self.__class__.__name__


# knowledge base -----------------------------------------------------------

class SchemaError(FamriskError):
    """Bundle file or manifest is missing a required field or file."""


class ChecksumError(SchemaError):
    """Bundle file content does not match the manifest checksum."""


class RangeError(FamriskError):
    """A probability or frequency is outside its documented bounds."""


class DanglingRefError(FamriskError):
    """A curve or table row names a gene/cancer absent from the bundle."""


class UnknownGene(FamriskError):
    pass


class UnknownAncestry(FamriskError):
    pass


class UnknownCancer(FamriskError):
    pass


class SexMismatch(FamriskError):
    """Sex-restricted cancer queried or recorded for the other sex."""


# pedigree ------------------------------------------------------------------

class InvalidAge(FamriskError):
    pass


class DuplicatePedigreeId(FamriskError):
    pass


class UnknownIndividual(FamriskError):
    pass


class SlotOccupied(FamriskError):
    """Adding a parent where both parent slots are already filled."""


class SexConflict(FamriskError):
    """Linkage would require an individual of the opposite sex."""


class CannotRemoveProband(FamriskError):
    pass


class WouldOrphanChildren(FamriskError):
    pass


class DiagnosisAfterDeath(FamriskError):
    """Diagnosis or surgery age exceeds the current or death age."""


class SexRestrictedCancer(FamriskError):
    pass


class MarkerWithoutCancer(FamriskError):
    pass


class CBCWithoutBreastCancer(FamriskError):
    pass


class ValidationFailed(FamriskError):
    """Pedigree has blocking validation errors; see the attached report."""

    def __init__(self, message: str = "", report=None):
        super().__init__(message)
        self.report = report


# engine --------------------------------------------------------------------

class MissingAge(FamriskError):
    """An individual reached the likelihood with an unresolved age."""


class LoopDetected(FamriskError):
    """Pedigree contains a loop and automatic loop breaking is disabled."""


class StateSpaceOverflow(FamriskError):
    """Pared state space times members exceeds the configured cap."""


class InfeasibleConstraints(FamriskError):
    """No age assignment can satisfy the recorded constraints."""


class CancerNotApplicable(FamriskError):
    """Future risk requested for a cancer the proband cannot develop."""


class NotApplicable(FamriskError):
    """Contralateral-breast risk requested without a qualifying history."""


class TooLarge(FamriskError):
    """Joint enumeration would exceed the oracle guard."""


class EngineError(FamriskError):
    """Numerical failure inside the engine (e.g. zero total likelihood)."""


# service -------------------------------------------------------------------

class DuplicateUser(FamriskError):
    pass


class BadCredentials(FamriskError):
    """Single error for unknown user and wrong password alike."""


class Forbidden(FamriskError):
    pass


class NotFound(FamriskError):
    pass


class Conflict(FamriskError):
    """Stale revision or duplicate id at the persistence layer."""


class LockHeld(FamriskError):
    """Another session currently holds the pedigree mutation lock."""


class NotReady(FamriskError):
    """Run artifacts requested before the job finished."""


class QuotaExceeded(FamriskError):
    """Per-user concurrent job cap reached."""
