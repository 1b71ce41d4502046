"""Render collide-charge CSV outputs into publication-style figures.

This package only reads the documented CSV schemas and draws; every
physical quantity comes from the simulation side. Three figure kinds:

- regimes: level-population snapshots (one panel per snapshot CSV),
- trajectories: ergotropy fan of an ensemble run, colored by fuel class,
- histograms: two stationary level distributions side by side.

Output is deterministic for identical inputs; no timestamps are embedded.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
# deterministic element ids so repeated SVG renders are byte-identical
matplotlib.rcParams["svg.hashsalt"] = "collide-charge"

import matplotlib.pyplot as plt
import pandas as pd

__all__ = ["SchemaError", "FigureJob", "render"]

FIGURE_KINDS = ("regimes", "trajectories", "histograms")

SNAPSHOT_COLUMNS = ["step", "level", "prob"]
ENSEMBLE_COLUMNS = ["run", "step", "state_class", "mean_energy",
                    "ergotropy", "leaked_mass"]
STATIONARY_COLUMNS = ["level", "p_a", "p_b"]

# Fuel-class palette: passive green, active red, maximally mixed orange.
CLASS_COLORS = {
    "strictly-passive": "tab:green",
    "active": "tab:red",
    "maximally-mixed": "tab:orange",
}


class SchemaError(ValueError):
    """An input CSV does not match its declared schema."""


@dataclass(frozen=True)
class FigureJob:
    kind: str
    inputs: tuple
    output: Path

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {FIGURE_KINDS}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")
        for path in self.inputs:
            if not Path(path).exists():
                raise SchemaError(f"input file not found: {path}")


def load_table(path, required: list) -> pd.DataFrame:
    frame = pd.read_csv(path)
    for column in required:
        if column not in frame.columns:
            raise SchemaError(f"{path}: missing column '{column}'")
    if frame.empty:
        raise SchemaError(f"{path}: no data rows")
    numeric = [c for c in required if c != "state_class"]
    for column in numeric:
        converted = pd.to_numeric(frame[column], errors="coerce")
        if converted.isna().any():
            raise SchemaError(f"{path}: non-numeric values in column "
                              f"'{column}'")
        frame[column] = converted
    return frame


def _render_regimes(job: FigureJob) -> plt.Figure:
    panels = []
    for path in job.inputs:
        frame = load_table(path, SNAPSHOT_COLUMNS)
        for step, group in frame.groupby("step", sort=True):
            panels.append((int(step), group))
    fig, axes = plt.subplots(1, len(panels),
                             figsize=(4.0 * len(panels), 3.2), squeeze=False)
    for ax, (step, group) in zip(axes[0], panels):
        occupied = group[group["prob"] > 1e-12]
        top = int(occupied["level"].max()) if not occupied.empty else 10
        view = group[group["level"] <= top + 2]
        ax.bar(view["level"], view["prob"], width=1.0, color="tab:blue",
               edgecolor="none")
        ax.set_title(f"after {step} collisions")
        ax.set_xlabel("battery level")
        ax.set_ylabel("population")
    fig.tight_layout()
    return fig


def _render_trajectories(job: FigureJob) -> plt.Figure:
    if len(job.inputs) != 1:
        raise SchemaError("trajectories takes exactly one ensemble CSV")
    frame = load_table(job.inputs[0], ENSEMBLE_COLUMNS)
    unknown = set(frame["state_class"].unique()) - set(CLASS_COLORS)
    if unknown:
        raise SchemaError(f"{job.inputs[0]}: unknown values in column "
                          f"'state_class': {sorted(unknown)}")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    seen = {}
    for run, group in frame.groupby("run", sort=True):
        state_class = group["state_class"].iloc[0]
        color = CLASS_COLORS[state_class]
        line, = ax.plot(group["step"], group["ergotropy"], color=color,
                        linewidth=1.0, alpha=0.8)
        seen.setdefault(state_class, line)
    ax.set_xlabel("collision number")
    ax.set_ylabel("ergotropy")
    ax.legend([seen[c] for c in sorted(seen)], sorted(seen), loc="upper left")
    fig.tight_layout()
    return fig


def _render_histograms(job: FigureJob) -> plt.Figure:
    frame = load_table(job.inputs[0], STATIONARY_COLUMNS)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    occupied = frame[(frame["p_a"] > 1e-9) | (frame["p_b"] > 1e-9)]
    top = int(occupied["level"].max()) if not occupied.empty else 10
    view = frame[frame["level"] <= top + 2]
    ax.bar(view["level"] - 0.2, view["p_a"], width=0.4,
           color="tab:green", alpha=0.8, label="first protocol")
    ax.bar(view["level"] + 0.2, view["p_b"], width=0.4,
           color="tab:blue", alpha=0.8, label="second protocol")
    ax.set_xlabel("battery level")
    ax.set_ylabel("stationary population")
    ax.legend()
    if len(job.inputs) > 1:
        fuel = load_table(job.inputs[1], ["level", "prob"])
        inset = ax.inset_axes([0.62, 0.5, 0.33, 0.4])
        inset.bar(fuel["level"], fuel["prob"], color="tab:gray")
        inset.set_title("fuel populations", fontsize=8)
        inset.tick_params(labelsize=7)
    fig.tight_layout()
    return fig


_RENDERERS = {
    "regimes": _render_regimes,
    "trajectories": _render_trajectories,
    "histograms": _render_histograms,
}


def render(job: FigureJob) -> Path:
    """Draw the requested figure and write it to ``job.output``.

    Deterministic: identical inputs produce byte-identical files (date
    metadata is stripped for vector formats).
    """
    fig = _RENDERERS[job.kind](job)
    output = Path(job.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Date": None} if output.suffix in (".svg", ".pdf") else None
    try:
        fig.savefig(output, dpi=150, metadata=metadata)
    finally:
        plt.close(fig)
    return output
