"""Two-dimensional hyperplane loss/accuracy grids through three models, and
trajectory distance exports."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ShapeError
from .model import LossKind, ModelParams, evaluate


@dataclass(frozen=True)
class PlaneSpec:
    """Plane origin + a(axis1 - origin) + b(axis2 - origin), sampled on a
    regular (a, b) grid."""

    origin: ModelParams
    axis1: ModelParams
    axis2: ModelParams
    a_range: tuple = (-0.5, 1.5)
    b_range: tuple = (-0.5, 1.5)
    resolution: int = 25

    def __post_init__(self):
        if not (self.origin.compatible_with(self.axis1)
                and self.origin.compatible_with(self.axis2)):
            raise ShapeError("the three anchor models must share one architecture")
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")
        for name in ("a_range", "b_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be (min, max) with min < max")

    def a_coords(self) -> np.ndarray:
        return np.linspace(self.a_range[0], self.a_range[1], self.resolution)

    def b_coords(self) -> np.ndarray:
        return np.linspace(self.b_range[0], self.b_range[1], self.resolution)


@dataclass(frozen=True)
class GridResult:
    """losses[i, j] / accuracies[i, j] at (a_coords[i], b_coords[j])."""

    dataset: str
    a_coords: np.ndarray
    b_coords: np.ndarray
    losses: np.ndarray
    accuracies: np.ndarray


def plane_model(spec: PlaneSpec, a: float, b: float) -> ModelParams:
    """Explicit model at plane coordinates (a, b)."""
    origin = spec.origin
    hidden = (origin.hidden + a * (spec.axis1.hidden - origin.hidden)
              + b * (spec.axis2.hidden - origin.hidden))
    readout = (origin.readout + a * (spec.axis1.readout - origin.readout)
               + b * (spec.axis2.readout - origin.readout))
    return ModelParams(origin.arch, hidden, readout)


def hyperplane_grid(spec: PlaneSpec, eval_sets: dict, kind: LossKind) -> dict:
    """Evaluate every grid cell on every named dataset.

    Returns {name: GridResult}. Cells are evaluated in a fixed row-major
    order; the result does not depend on evaluation order.
    """
    if not eval_sets:
        raise ValueError("need at least one evaluation dataset")
    a_coords = spec.a_coords()
    b_coords = spec.b_coords()
    shape = (a_coords.size, b_coords.size)
    losses = {name: np.empty(shape) for name in eval_sets}
    accs = {name: np.empty(shape) for name in eval_sets}
    for i, a in enumerate(a_coords):
        for j, b in enumerate(b_coords):
            point = plane_model(spec, float(a), float(b))
            for name, data in eval_sets.items():
                value, acc = evaluate(point, data, kind)
                losses[name][i, j] = value
                accs[name][i, j] = acc
    return {name: GridResult(name, a_coords.copy(), b_coords.copy(),
                             losses[name], accs[name])
            for name in eval_sets}


@dataclass(frozen=True)
class TrajectoryDistances:
    labels: tuple
    matrix: np.ndarray        # full symmetric pairwise L2, zero diagonal
    to_reference: np.ndarray  # distance of each checkpoint to the reference


def trajectory_distances(checkpoints, labels=None,
                         reference: ModelParams | None = None) -> TrajectoryDistances:
    """Pairwise L2 distances between checkpoints (flattened parameters) plus
    each checkpoint's distance to a reference (default: the first one)."""
    models = list(checkpoints)
    if len(models) < 2:
        raise ValueError("need at least two checkpoints")
    head = models[0]
    for m in models[1:]:
        if not head.compatible_with(m):
            raise ShapeError("checkpoints have different architectures")
    if labels is None:
        labels = tuple(str(i) for i in range(len(models)))
    labels = tuple(labels)
    if len(labels) != len(models):
        raise ValueError("one label per checkpoint required")
    if reference is None:
        reference = models[0]
    elif not reference.compatible_with(head):
        raise ShapeError("reference has a different architecture")

    def dist(a: ModelParams, b: ModelParams) -> float:
        return math.sqrt(float(np.sum((a.hidden - b.hidden) ** 2)) +
                         float(np.sum((a.readout - b.readout) ** 2)))

    n = len(models)
    matrix = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            matrix[i, j] = matrix[j, i] = dist(models[i], models[j])
    to_ref = np.array([dist(m, reference) for m in models])
    return TrajectoryDistances(labels, matrix, to_ref)
