"""Report rendering: delimited tables plus figures for each CLI command."""
from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import NoEmm
from .pricing import emm_witness


def _scenario_table(path, market, extra_cols):
    header = ["scenario", "prob"] + [f"dS_{j + 1}" for j in range(market.n_assets)] + ["H"]
    header += list(extra_cols)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for i in range(market.space.k):
            row = [i + 1, format(market.space.weights[i], ".12g")]
            row += [format(v, ".12g") for v in market.delta_s[i]]
            row.append(format(market.claim.values[i], ".12g"))
            row += [format(col[i], ".12g") for col in extra_cols.values()]
            out.writerow(row)


def _bar(path, values, title, ylabel, labels=None):
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = np.arange(len(values))
    ax.bar(xs, values, color="#39648c")
    ax.axhline(0.0, color="black", linewidth=0.8)
    if labels is not None:
        ax.set_xticks(xs, labels)
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render(command: str, payload: dict, context: dict, outdir: str) -> None:
    """Write report.csv and the command's figures into outdir."""
    os.makedirs(outdir, exist_ok=True)
    table = os.path.join(outdir, "report.csv")

    if command == "risk":
        market, pos = context["market"], context["position"]
        _scenario_table(table, market, {"position": pos.values})
        _bar(
            os.path.join(outdir, "fig_position.png"),
            pos.values,
            f"Unhedged book (risk value {payload['value']:.6g})",
            "book value",
        )
        return

    if command == "hedge":
        sol = context["solution"]
        h = np.asarray(payload["h"])
        if "market" in context:
            market = context["market"]
            pos = market.delta_s @ h - market.delta_claim
            extra = {"position": pos}
            if sol.witness is not None:
                extra["witness_density"] = sol.witness.density
            _scenario_table(table, market, extra)
            if sol.witness is not None:
                _bar(
                    os.path.join(outdir, "fig_witness.png"),
                    sol.witness.density,
                    "Worst-case density at the optimum",
                    "dQ/dP",
                )
        else:
            gm = context["gaussian"]
            with open(table, "w", newline="", encoding="utf-8") as fh:
                out = csv.writer(fh)
                out.writerow(["asset", "mu", "h"])
                for j in range(gm.n_assets):
                    out.writerow([j + 1, format(gm.mu[j], ".12g"), format(h[j], ".12g")])
        _bar(
            os.path.join(outdir, "fig_weights.png"),
            h,
            f"Optimal hedge (value {payload['value']:.6g})",
            "weight",
            labels=[f"h{j + 1}" for j in range(h.size)],
        )
        return

    if command == "price":
        with open(table, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh)
            keys = ["sp", "bp", "superhedge", "subhedge", "arbitrage_free", "complete"]
            out.writerow(keys)
            out.writerow([payload[k] for k in keys])
        fig, ax = plt.subplots(figsize=(7, 2.8))
        finite = [
            (name, payload[name])
            for name in ("subhedge", "bp", "sp", "superhedge")
            if isinstance(payload[name], float)
        ]
        if len(finite) >= 2 and finite[0][0] == "subhedge" and finite[-1][0] == "superhedge":
            ax.hlines(0, finite[0][1], finite[-1][1], color="#39648c", linewidth=3)
        for name, x in finite:
            ax.plot([x], [0], "o", color="#9c2f2f")
            ax.annotate(name, (x, 0), textcoords="offset points", xytext=(0, 10), ha="center")
        ax.set_yticks([])
        ax.set_title("Price interval")
        fig.tight_layout()
        fig.savefig(os.path.join(outdir, "fig_prices.png"), dpi=120)
        plt.close(fig)
        return

    market = context["market"]
    rows = [["arbitrage_free", payload["arbitrage_free"]], ["complete", payload["complete"]]]
    try:
        witness = emm_witness(market)
        masses = market.space.weights * witness.density
        rows += [[f"emm_mass_{i + 1}", format(m, ".12g")] for i, m in enumerate(masses)]
        _bar(
            os.path.join(outdir, "fig_emm.png"),
            masses,
            "Martingale mass with maximal minimum",
            "mass",
        )
    except NoEmm:
        pass
    with open(table, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["key", "value"])
        out.writerows(rows)
