"""Ground-truth quality measures for experiment rows."""
from __future__ import annotations

import numpy as np

from .. import _kernels
from ..errors import NumericalError, ShapeError
from ..matching import cost
from ..prototype import Instance, Prototype, objective


def misclustered_percentage(prototype: Prototype, truth) -> float:
    """Share of items whose strongest prototype membership disagrees with the truth.

    Each item goes to the slot with the largest membership coordinate (ties to
    the lowest slot); slots are aligned to truth labels by a maximum-agreement
    assignment, so slot order and label names do not matter.
    """
    truth = np.asarray(truth)
    if truth.ndim != 1 or prototype.d != truth.shape[0]:
        raise ShapeError(f"prototype dimension {prototype.d} does not match {truth.shape[0]} items")
    k = prototype.k
    _, truth_ids = np.unique(truth, return_inverse=True)
    m = max(k, int(truth_ids.max()) + 1)
    assigned = prototype.points.argmax(axis=0)
    agree = np.zeros((m, m))
    np.add.at(agree, (assigned, truth_ids), 1.0)
    perm = _kernels.hungarian(-agree)
    matched = agree[np.arange(m), perm].sum()
    return 100.0 * (truth.shape[0] - matched) / truth.shape[0]


def x_over_ave(full: Prototype, coreset_proto: Prototype, inst: Instance, metric="sq") -> float:
    """Matching cost between the two prototypes over the full solution's mean cost per pattern."""
    x = cost(full.as_pattern(), coreset_proto.as_pattern(), metric)
    ave = objective(inst, full, metric) / inst.pattern_weights.sum()
    if ave == 0.0:
        if x == 0.0:
            return 0.0
        raise NumericalError("average cost is zero but the prototypes differ")
    return x / ave
