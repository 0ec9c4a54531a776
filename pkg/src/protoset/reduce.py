"""Random projection of an instance and lifting of a low-dimensional prototype."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .matching import GroundMetric
from .prototype import Instance, Prototype, assign, update_prototype

DEFAULT_JL_CONSTANT = 4.0


@dataclass(frozen=True)
class Projection:
    matrix: np.ndarray  # (m, d), entries +-1/sqrt(m)
    seed: int | None = None

    @property
    def source_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def target_dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.matrix.T


def target_dim(n: int, k: int, eps: float, d: int | None = None, constant: float = DEFAULT_JL_CONSTANT) -> int:
    """ceil(C * ln(n k) / eps^2), capped at ``d``; a return value equal to d means "skip"."""
    if not 0 < eps < 1:
        raise ConfigError(f"eps must lie in (0, 1), got {eps}")
    m = max(1, math.ceil(constant * math.log(n * k) / eps**2))
    return m if d is None else min(m, d)


def rademacher(m: int, d: int, rng=None) -> Projection:
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = np.random.default_rng(rng)
    signs = gen.integers(0, 2, size=(m, d), dtype=np.int8) * 2 - 1
    matrix = signs.astype(np.float64) / math.sqrt(m)
    matrix.setflags(write=False)
    return Projection(matrix, None if seed is None else int(seed))


def jl_project(inst: Instance, m: int, rng=None, metric=GroundMetric.SQ) -> tuple[Instance, Projection]:
    """Map every point of every pattern through one m x d Rademacher matrix."""
    metric = GroundMetric.parse(metric)
    if metric is GroundMetric.L1:
        raise ConfigError("random projection does not preserve l1 matching costs")
    if not 1 <= m <= inst.d:
        raise ConfigError(f"target dimension must lie in [1, {inst.d}], got {m}")
    proj = rademacher(m, inst.d, rng)
    projected = Instance(proj.apply(inst.points), inst.weights, inst.pattern_weights)
    return projected, proj


def lift_solution(original: Instance, projected: Instance, low_q: Prototype, metric=GroundMetric.SQ) -> Prototype:
    """Carry a prototype for ``projected`` back to the space of ``original``.

    One pass: match every projected pattern to ``low_q``, then rebuild each
    slot from the corresponding original points with those matchings.
    """
    metric = GroundMetric.parse(metric)
    if projected.n != original.n or projected.k != original.k:
        raise ShapeError("projected instance does not correspond to the original")
    _, plans = assign(projected, low_q, metric)
    if metric.weighted:
        # slots with no inflow fall back to the mean of all original points
        mean = np.broadcast_to(original.points.reshape(-1, original.d).mean(axis=0), (low_q.k, original.d))
        previous = Prototype(mean, low_q.weights)
    else:
        previous = None
    lifted, _ = update_prototype(original, plans, metric, previous=previous)
    return lifted
