"""Render experiment figures from fedmc CSV outputs.

This layer only draws: every number it plots comes straight from the CSV
files (plus presentation-level aggregation like trial means and the 2-D
embedding of an exact distance matrix). Output is deterministic: fixed
style, fixed DPI, seeded embedding, and no timestamp metadata, so rendering
the same CSV twice yields byte-identical images.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("landscape-contour", "traverse", "barrier-sweep",
         "dropout-vs-width", "noise-stats", "distance-embedding")

_REQUIRED = {
    "landscape-contour": ["a", "b", "dataset", "loss", "accuracy"],
    "traverse": ["nu", "dataset", "loss", "acc"],
    "barrier-sweep": ["round_or_pair", "B", "absolute_barrier", "argmax_a"],
    "dropout-vs-width": ["run", "stage_round", "width", "keep_frac", "trial",
                         "dataset", "eps_d"],
    "noise-stats": ["run", "mean", "max", "min"],
    "distance-embedding": ["label"],
}

_STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
}

_CMAPS = ("viridis", "plasma", "cividis", "magma")
_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple",
           "tab:brown", "tab:pink", "tab:gray")


class SchemaError(ValueError):
    """A CSV input does not match the documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple
    title: str = ""
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {', '.join(KINDS)}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")


def _read_csv(path, required):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in required:
            if column not in header:
                raise SchemaError(f"{path}: missing column {column!r} "
                                  f"(have {header})")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return header, rows


def _floats(rows, column):
    return np.array([float(r[column]) for r in rows])


def _save(fig, out):
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata={"Software": None})
    plt.close(fig)


def _landscape_contour(spec, out):
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    series = 0
    for path in spec.inputs:
        _, rows = _read_csv(path, _REQUIRED[spec.kind])
        datasets = sorted({r["dataset"] for r in rows})
        for name in datasets:
            sub = [r for r in rows if r["dataset"] == name]
            a = _floats(sub, "a")
            b = _floats(sub, "b")
            z = _floats(sub, "loss")
            a_coords = np.unique(a)
            b_coords = np.unique(b)
            grid = np.full((a_coords.size, b_coords.size), np.nan)
            ai = np.searchsorted(a_coords, a)
            bi = np.searchsorted(b_coords, b)
            grid[ai, bi] = z
            cmap = _CMAPS[series % len(_CMAPS)]
            cs = ax.contour(a_coords, b_coords, grid.T, levels=8, cmap=cmap,
                            linewidths=1.0, alpha=0.9)
            cs.collections[0].set_label(name) if hasattr(cs, "collections") \
                else None
            series += 1
    ax.plot([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], "k*", markersize=9)
    ax.set_xlabel("a")
    ax.set_ylabel("b")
    ax.set_title(spec.title or "loss landscape")
    _save(fig, out)


def _traverse(spec, out):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    series = 0
    for path in spec.inputs:
        _, rows = _read_csv(path, _REQUIRED[spec.kind])
        stem = Path(path).stem
        for name in sorted({r["dataset"] for r in rows}):
            sub = [r for r in rows if r["dataset"] == name]
            nu = _floats(sub, "nu")
            order = np.argsort(nu)
            label = f"{stem}:{name}" if len(spec.inputs) > 1 else name
            ax.plot(nu[order], _floats(sub, "loss")[order], marker="o",
                    markersize=3, color=_COLORS[series % len(_COLORS)],
                    label=label)
            series += 1
    ax.set_xlabel("position along path")
    ax.set_ylabel("loss")
    ax.set_title(spec.title or "traversing loss")
    ax.legend(fontsize=7)
    _save(fig, out)


def _numeric_round(value: str):
    tail = value.rsplit("-r", 1)[-1] if "-r" in value else value
    try:
        return float(tail)
    except ValueError:
        return None


def _barrier_sweep(spec, out):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for k, path in enumerate(spec.inputs):
        _, rows = _read_csv(path, _REQUIRED[spec.kind])
        xs = [_numeric_round(r["round_or_pair"]) for r in rows]
        ys = _floats(rows, "B")
        if all(x is not None for x in xs):
            order = np.argsort(xs)
            ax.plot(np.array(xs)[order], ys[order], marker="o", markersize=3,
                    color=_COLORS[k % len(_COLORS)], label=Path(path).stem)
        else:
            ticks = np.arange(len(rows))
            ax.plot(ticks, ys, marker="s", linestyle="none",
                    color=_COLORS[k % len(_COLORS)], label=Path(path).stem)
            ax.set_xticks(ticks)
            ax.set_xticklabels([r["round_or_pair"] for r in rows],
                               rotation=30, ha="right", fontsize=7)
    ax.set_xlabel("round")
    ax.set_ylabel("barrier")
    ax.set_title(spec.title or "barrier along training")
    ax.legend(fontsize=7)
    _save(fig, out)


def _dropout_vs_width(spec, out):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    series = 0
    for path in spec.inputs:
        _, rows = _read_csv(path, _REQUIRED[spec.kind])
        groups = sorted({(r["run"], r["stage_round"], r["dataset"])
                         for r in rows})
        for run, stage, dataset in groups:
            sub = [r for r in rows if (r["run"], r["stage_round"],
                                       r["dataset"]) == (run, stage, dataset)]
            widths = sorted({int(float(r["width"])) for r in sub})
            means = []
            stds = []
            for w in widths:
                vals = _floats([r for r in sub
                                if int(float(r["width"])) == w], "eps_d")
                means.append(vals.mean())
                stds.append(vals.std())
            label = f"{run} r{stage} {dataset}"
            ax.errorbar(widths, means, yerr=stds, marker="o", markersize=3,
                        capsize=2, color=_COLORS[series % len(_COLORS)],
                        label=label)
            series += 1
    ax.set_xscale("log")
    ax.set_xlabel("hidden neurons")
    ax.set_ylabel("dropout error")
    ax.set_title(spec.title or "dropout stability")
    ax.legend(fontsize=7)
    _save(fig, out)


def _noise_stats(spec, out):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    offset = 0
    for path in spec.inputs:
        _, rows = _read_csv(path, _REQUIRED[spec.kind])
        xs = np.arange(offset, offset + len(rows))
        means = _floats(rows, "mean")
        lo = means - _floats(rows, "min")
        hi = _floats(rows, "max") - means
        ax.errorbar(xs, means, yerr=[lo, hi], linestyle="none", marker="o",
                    capsize=3, color=_COLORS[offset % len(_COLORS)])
        for x, r in zip(xs, rows):
            ax.annotate(r["run"], (x, float(r["mean"])), fontsize=7,
                        xytext=(0, 6), textcoords="offset points",
                        ha="center")
        offset += len(rows)
    ax.set_xticks([])
    ax.set_ylabel("noise norm")
    ax.set_title(spec.title or "neuron update noise (mean with min-max range)")
    _save(fig, out)


def _distance_embedding(spec, out):
    from sklearn.manifold import MDS

    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    for path in spec.inputs:
        header, rows = _read_csv(path, _REQUIRED[spec.kind])
        labels = [r["label"] for r in rows]
        if header[1:] != labels:
            raise SchemaError(f"{path}: distance matrix columns {header[1:]} "
                              f"do not match row labels")
        matrix = np.array([[float(r[c]) for c in header[1:]] for r in rows])
        coords = MDS(n_components=2, dissimilarity="precomputed",
                     random_state=0, n_init=4,
                     normalized_stress="auto").fit_transform(matrix)
        series = sorted({lab.rsplit("-", 1)[0] for lab in labels})
        for idx, lab in enumerate(labels):
            color = _COLORS[series.index(lab.rsplit("-", 1)[0])
                            % len(_COLORS)]
            ax.plot(coords[idx, 0], coords[idx, 1], "o", markersize=4,
                    color=color)
            ax.annotate(lab, coords[idx], fontsize=6, xytext=(2, 2),
                        textcoords="offset points")
    ax.set_title(spec.title or "checkpoint distances (2-d embedding)")
    ax.set_xticks([])
    ax.set_yticks([])
    _save(fig, out)


_RENDERERS = {
    "landscape-contour": _landscape_contour,
    "traverse": _traverse,
    "barrier-sweep": _barrier_sweep,
    "dropout-vs-width": _dropout_vs_width,
    "noise-stats": _noise_stats,
    "distance-embedding": _distance_embedding,
}


def render(spec: FigureSpec, out) -> None:
    """Validate the inputs against the figure kind's schema and draw it."""
    with plt.rc_context(_STYLE):
        _RENDERERS[spec.kind](spec, out)
