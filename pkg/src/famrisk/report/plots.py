"""SVG plot rendering for run results.

Both plots are drawn headless (Agg) and serialized to SVG with a fixed
hash salt and no date metadata, so rendering the same result twice gives
identical bytes.  ``plot_data`` exposes the exact numbers behind the
plots for clients that draw their own charts; nothing here recomputes a
value, every number is lifted verbatim from the result payload.
"""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from famrisk.engine.runner import RunResult

#: clinical testing-referral cutoff drawn on every carrier plot
CARRIER_THRESHOLD = 0.025

_SVG_RC = {"svg.hashsalt": "famrisk", "svg.fonttype": "none"}


def plot_data(result: RunResult, cbc_label: str = "contralateral_breast") -> dict:
    """Numbers backing both plots, lifted verbatim from the result."""
    labels = ["none"] + list(result.carrier_posterior)
    probabilities = [result.non_carrier_probability] + [
        result.carrier_posterior[g] for g in result.carrier_posterior
    ]
    curves = {
        cancer: entry
        for cancer, entry in result.future_risk.items()
        if entry["status"] == "ok"
    }
    if result.cbc_risk is not None and result.cbc_risk["status"] == "ok":
        curves[cbc_label] = result.cbc_risk
    return {
        "carrier": {
            "labels": labels,
            "probabilities": probabilities,
            "threshold": CARRIER_THRESHOLD,
        },
        "future_risk": curves,
    }


def _render(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def carrier_plot_svg(result: RunResult) -> str:
    """Bar chart of per-gene carrier probabilities plus the non-carrier
    mass, with the dashed red referral-threshold line."""
    data = plot_data(result)["carrier"]
    labels, values = data["labels"], data["probabilities"]
    with plt.rc_context(_SVG_RC):
        width = max(6.0, 0.35 * len(labels) + 1.5)
        fig, ax = plt.subplots(figsize=(width, 4.0))
        ax.bar(range(len(labels)), values, color="#4878a8")
        ax.axhline(
            CARRIER_THRESHOLD,
            color="red",
            linestyle="--",
            linewidth=1.0,
            label=f"{CARRIER_THRESHOLD:.1%} threshold",
        )
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=90, fontsize=7)
        ax.set_ylabel("carrier probability")
        ax.set_title("Mutation carrier probabilities")
        ax.legend(loc="upper right", fontsize=8)
        fig.tight_layout()
        return _render(fig)


def future_risk_plot_svg(
    result: RunResult, cbc_label: str = "contralateral_breast"
) -> str:
    """Future-risk curves per cancer (solid) against the population
    baseline (dashed, same color), from the proband's age to the bundle's
    age ceiling."""
    curves = plot_data(result, cbc_label)["future_risk"]
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(8.0, 5.0))
        cmap = plt.get_cmap("tab20")
        for i, (cancer, entry) in enumerate(sorted(curves.items())):
            color = cmap(i % 20)
            ax.plot(
                entry["horizons"],
                entry["risk"],
                color=color,
                marker="o",
                markersize=3,
                label=cancer,
            )
            ax.plot(
                entry["horizons"],
                entry["baseline"],
                color=color,
                linestyle="--",
                linewidth=0.8,
            )
        ax.set_xlabel("age")
        ax.set_ylabel("cumulative future risk")
        ax.set_title("Future cancer risks vs. population baseline")
        if curves:
            ax.legend(loc="upper left", fontsize=7, ncol=2)
        fig.tight_layout()
        return _render(fig)
