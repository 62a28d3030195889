"""famrisk: hereditary cancer risk workbench.

A data-driven Mendelian risk engine plus the plumbing around it: a
knowledge-base loader, a fully linked pedigree builder, an exact
peeling-paring likelihood engine with brute-force oracle, a multi-user
HTTP service with a run queue, and a batch CLI.
"""

__version__ = "0.1.0"

from famrisk import errors

__all__ = ["errors", "__version__"]
