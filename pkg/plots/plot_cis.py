#!/usr/bin/env python3
"""Render state-space and input-set figures from `cis run` JSON outputs.

    plot_cis.py --kind state   --in out.json [more.json ...] --out fig.png
    plot_cis.py --kind input   --in out.json --out fig.png
    plot_cis.py --kind compare --in a.json b.json [...] --out fig.png

`state` draws the invariant-set boxes of one or more runs over the region
outline; `input` draws the certified input sets from the controller table
(bands against the first state coordinate for one input, polygons for two);
`compare` is `state` with per-run styling tuned for overlays.  Reads only
the schema-1 output documents; renders deterministically (fixed figure
geometry, no timestamps).
"""
from __future__ import annotations

import argparse
import json
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Polygon as MplPolygon
from matplotlib.patches import Rectangle

SCHEMA = 1
FIGSIZE = (6.4, 4.0)
DPI = 150
# per-run styles: fill color, edge color, hatch
STYLES = [
    ("#9ecae1", "#3182bd", None),
    ("#fdd0a2", "#e6550d", "///"),
    ("#a1d99b", "#31a354", "\\\\\\"),
    ("#dadaeb", "#756bb1", "xxx"),
]


def load_doc(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != SCHEMA:
        raise SystemExit(f"{path}: unsupported schema {doc.get('schema')!r} (expected {SCHEMA})")
    return doc


def run_label(doc: dict) -> str:
    run = doc["config"]["run"]
    if run["algorithm"] == "baseline":
        return f"baseline (n_u = {run['n_u']})"
    return run["algorithm"]


def _omega_bounds(doc: dict):
    los = np.array([ob["lo"] for ob in doc["config"]["omega"]])
    his = np.array([ob["hi"] for ob in doc["config"]["omega"]])
    return los.min(axis=0), his.max(axis=0)


def _draw_boxes(ax, boxes, style, label):
    face, edge, hatch = style
    first = True
    for b in boxes:
        lo, hi = b["lo"], b["hi"]
        ax.add_patch(
            Rectangle(
                (lo[0], lo[1]),
                hi[0] - lo[0],
                hi[1] - lo[1],
                facecolor=face,
                edgecolor=edge,
                hatch=hatch,
                linewidth=0.2,
                alpha=0.75,
                label=label if first else None,
            )
        )
        first = False


def render_state(docs: list[dict], xlabel="x1", ylabel="x2"):
    """Figure of invariant-set boxes, one style per run, over the region outline."""
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    lo, hi = _omega_bounds(docs[0])
    if len(lo) != 2:
        raise SystemExit("state plots require a 2-D state space")
    for ob in docs[0]["config"]["omega"]:
        ax.add_patch(
            Rectangle(
                (ob["lo"][0], ob["lo"][1]),
                ob["hi"][0] - ob["lo"][0],
                ob["hi"][1] - ob["lo"][1],
                facecolor="none",
                edgecolor="black",
                linewidth=1.0,
                linestyle="--",
                label="region of interest",
            )
        )
    for k, doc in enumerate(docs):
        _draw_boxes(ax, doc["cis"], STYLES[k % len(STYLES)], run_label(doc))
    pad = 0.05 * (hi - lo)
    ax.set_xlim(lo[0] - pad[0], hi[0] + pad[0])
    ax.set_ylim(lo[1] - pad[1], hi[1] + pad[1])
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig


def plot_state(docs: list[dict], out: str, xlabel="x1", ylabel="x2") -> None:
    fig = render_state(docs, xlabel=xlabel, ylabel=ylabel)
    fig.savefig(out)
    plt.close(fig)


def render_inputs(doc: dict, xlabel="x1", ylabel="u"):
    """Figure of the certified input sets from the controller table.

    One input: a band of u-extents drawn against the first state coordinate.
    Two inputs: the input-set polygons in the u-plane.
    """
    entries = doc.get("controller", [])
    if not entries:
        raise SystemExit("output has no controller table to plot")
    m = len(entries[0]["inputs"][0]["V"][0]) if entries[0]["inputs"] else 1
    if m > 2:
        raise SystemExit(f"input plots support at most two inputs, got m = {m}")
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    face, edge, _ = STYLES[0]
    if m == 1:
        u_lo = doc["config"]["system"]["u_lo"][0]
        u_hi = doc["config"]["system"]["u_hi"][0]
        for e in entries:
            x0, x1 = e["box"]["lo"][0], e["box"]["hi"][0]
            for part in e["inputs"]:
                vs = np.array(part["V"]).ravel()
                lo_u, hi_u = float(vs.min()), float(vs.max())
                if hi_u - lo_u < 1e-12:  # degenerate input set: a single u value
                    ax.plot([x0, x1], [lo_u, lo_u], color=edge, linewidth=1.0)
                else:
                    ax.add_patch(
                        Rectangle(
                            (x0, lo_u),
                            x1 - x0,
                            hi_u - lo_u,
                            facecolor=face,
                            edgecolor="none",
                            alpha=0.8,
                        )
                    )
        for bound in (u_lo, u_hi):
            ax.axhline(bound, color="black", linewidth=1.0, linestyle="--")
        lo, hi = _omega_bounds(doc)
        ax.set_xlim(lo[0], hi[0])
        span = u_hi - u_lo
        ax.set_ylim(u_lo - 0.1 * span, u_hi + 0.1 * span)
    else:
        for e in entries:
            for part in e["inputs"]:
                vs = np.array(part["V"])
                if len(vs) >= 3:
                    ax.add_patch(
                        MplPolygon(vs, facecolor=face, edgecolor=edge, alpha=0.5, linewidth=0.3)
                    )
                elif len(vs) == 2:
                    ax.plot(vs[:, 0], vs[:, 1], color=edge, linewidth=0.8)
                else:
                    ax.plot(vs[:, 0], vs[:, 1], marker=".", color=edge, markersize=2)
        ax.autoscale_view()
        ylabel = "u2"
        xlabel = "u1"
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    return fig


def plot_inputs(doc: dict, out: str, xlabel="x1", ylabel="u") -> None:
    fig = render_inputs(doc, xlabel=xlabel, ylabel=ylabel)
    fig.savefig(out)
    plt.close(fig)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="plot_cis.py", description=__doc__.splitlines()[0])
    ap.add_argument("--kind", choices=["state", "input", "compare"], required=True)
    ap.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="OUT_JSON")
    ap.add_argument("--out", required=True, metavar="IMAGE")
    ap.add_argument("--xlabel", default=None)
    ap.add_argument("--ylabel", default=None)
    args = ap.parse_args(argv)
    docs = [load_doc(p) for p in args.inputs]
    if args.kind in ("state", "compare"):
        plot_state(
            docs, args.out, xlabel=args.xlabel or "x1", ylabel=args.ylabel or "x2"
        )
    else:
        if len(docs) != 1:
            raise SystemExit("input plots take exactly one output document")
        plot_inputs(
            docs[0], args.out, xlabel=args.xlabel or "x1", ylabel=args.ylabel or "u"
        )
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
