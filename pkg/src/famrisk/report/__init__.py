"""Result rendering: delimited tables, SVG plots, the family-tree image,
the printable HTML report, and the downloadable archives."""

from famrisk.report.bundle import (
    PEDIGREE_BUNDLE_ENTRIES,
    RUN_BUNDLE_ENTRIES,
    RUN_BUNDLE_KINDS,
    build_pedigree_bundle,
    build_run_bundle,
    report_html,
    write_run_files,
)
from famrisk.report.plots import (
    CARRIER_THRESHOLD,
    carrier_plot_svg,
    future_risk_plot_svg,
    plot_data,
)
from famrisk.report.tables import posterior_table_csv, risk_table_csv
from famrisk.report.treesvg import family_tree_svg

__all__ = [
    "CARRIER_THRESHOLD",
    "PEDIGREE_BUNDLE_ENTRIES",
    "RUN_BUNDLE_ENTRIES",
    "RUN_BUNDLE_KINDS",
    "build_pedigree_bundle",
    "build_run_bundle",
    "carrier_plot_svg",
    "family_tree_svg",
    "future_risk_plot_svg",
    "plot_data",
    "posterior_table_csv",
    "report_html",
    "risk_table_csv",
    "write_run_files",
]
