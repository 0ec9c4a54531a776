"""Matching-cost kernels between two k-point sets.

Unweighted sets are compared by the cheapest bijection between their points
under squared-Euclidean or Manhattan ground cost.  Weighted sets with equal
integer total weight are compared by earth mover's distance, computed as an
integral min-cost flow with Euclidean (``EMD1``) or squared-Euclidean
(``EMD2``) ground cost.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._parallel import map_chunks
from .errors import DataError, ShapeError

# relative slack for floating comparisons, scaled by the larger operand
REL_TOL = 1e-9
BRUTE_FORCE_MAX_K = 8


class GroundMetric(str, enum.Enum):
    SQ = "sq"
    L1 = "l1"
    EMD1 = "emd1"
    EMD2 = "emd2"

    @property
    def weighted(self) -> bool:
        return self in (GroundMetric.EMD1, GroundMetric.EMD2)

    @property
    def squared(self) -> bool:
        """True when the ground cost is a squared distance (relaxed triangle only)."""
        return self in (GroundMetric.SQ, GroundMetric.EMD2)

    @property
    def degree(self) -> int:
        """Homogeneity degree of the ground cost under scaling of coordinates."""
        return 2 if self.squared else 1

    @property
    def code(self) -> int:
        if self is GroundMetric.L1:
            return _kernels.L1
        if self is GroundMetric.EMD1:
            return _kernels.EUCLID
        return _kernels.SQ

    @classmethod
    def parse(cls, value) -> "GroundMetric":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DataError(f"unknown metric {value!r}; expected one of sq, l1, emd1, emd2") from None


def _as_points(points) -> np.ndarray:
    arr = np.array(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"points must be a non-empty k x d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError("points contain NaN or Inf")
    arr.setflags(write=False)
    return arr


def _as_weights(weights, k: int) -> np.ndarray:
    raw = np.asarray(weights)
    if raw.shape != (k,):
        raise ShapeError(f"expected {k} weights, got shape {raw.shape}")
    if raw.dtype.kind == "f":
        if not np.all(np.isfinite(raw)) or np.any(raw != np.round(raw)):
            raise DataError("weights must be integers")
    elif raw.dtype.kind not in "iu":
        raise DataError("weights must be integers")
    arr = raw.astype(np.int64)
    if np.any(arr < 0):
        raise DataError("weights must be non-negative")
    if arr.sum() <= 0:
        raise DataError("total weight must be positive")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pattern:
    """A k-point set in R^d, optionally with non-negative integer point weights."""

    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        pts = _as_points(self.points)
        object.__setattr__(self, "points", pts)
        if self.weights is not None:
            object.__setattr__(self, "weights", _as_weights(self.weights, pts.shape[0]))

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def total_weight(self) -> int | None:
        return None if self.weights is None else int(self.weights.sum())

    def __eq__(self, other):
        if not isinstance(other, Pattern):
            return NotImplemented
        if not np.array_equal(self.points, other.points):
            return False
        if (self.weights is None) != (other.weights is None):
            return False
        return self.weights is None or np.array_equal(self.weights, other.weights)

    __hash__ = None


@dataclass(frozen=True)
class MatchResult:
    cost: float
    permutation: np.ndarray  # point j of A is matched to point permutation[j] of B


@dataclass(frozen=True)
class FlowResult:
    cost: float
    flow: np.ndarray  # flow[j, l]: integral mass moved from a_j to b_l


def _check_pair(a: Pattern, b: Pattern) -> None:
    if a.k != b.k or a.d != b.d:
        raise ShapeError(f"incompatible patterns: ({a.k}, {a.d}) vs ({b.k}, {b.d})")


def _unweighted_metric(metric) -> GroundMetric:
    metric = GroundMetric.parse(metric)
    if metric.weighted:
        raise DataError(f"{metric.value} is a weighted metric; use emd()")
    return metric


def ground_cost_matrix(a: np.ndarray, b: np.ndarray, metric) -> np.ndarray:
    return _kernels.ground_matrix(
        np.ascontiguousarray(a, dtype=np.float64), np.ascontiguousarray(b, dtype=np.float64), GroundMetric.parse(metric).code
    )


def match_cost(a: Pattern, b: Pattern, metric=GroundMetric.SQ) -> MatchResult:
    """Exact minimum-cost bijection between the points of ``a`` and ``b``."""
    metric = _unweighted_metric(metric)
    _check_pair(a, b)
    cm = ground_cost_matrix(a.points, b.points, metric)
    perm = _kernels.hungarian(cm)
    return MatchResult(float(_kernels.assignment_cost(cm, perm)), perm)


def approx_match_cost(a: Pattern, b: Pattern, metric=GroundMetric.SQ) -> float:
    """Cost of the greedy matching: points of ``a`` in order, each to its nearest free point of ``b``.

    Always an upper bound on :func:`match_cost`; no constant-factor guarantee.
    Weighted patterns get the analogous greedy transport plan under EMD metrics.
    """
    metric = GroundMetric.parse(metric)
    _check_pair(a, b)
    cm = ground_cost_matrix(a.points, b.points, metric)
    if metric.weighted:
        _check_weights(a, b)
        return float(_kernels.flow_cost(cm, _kernels.greedy_transport(cm, a.weights, b.weights)))
    return float(_kernels.assignment_cost(cm, _kernels.greedy(cm)))


def brute_force_match(a: Pattern, b: Pattern, metric=GroundMetric.SQ) -> MatchResult:
    """Exhaustive minimum over all k! permutations. Refuses k > 8."""
    metric = _unweighted_metric(metric)
    _check_pair(a, b)
    if a.k > BRUTE_FORCE_MAX_K:
        raise DataError(f"brute force refused for k={a.k} > {BRUTE_FORCE_MAX_K}")
    diff = a.points[:, None, :] - b.points[None, :, :]
    if metric is GroundMetric.SQ:
        cm = np.sum(diff * diff, axis=2)
    else:
        cm = np.sum(np.abs(diff), axis=2)
    rows = np.arange(a.k)
    best_cost, best_perm = np.inf, None
    for perm in itertools.permutations(range(a.k)):
        cost = float(cm[rows, perm].sum())
        if cost < best_cost:
            best_cost, best_perm = cost, perm
    return MatchResult(best_cost, np.array(best_perm, dtype=np.int64))


def _check_weights(a: Pattern, b: Pattern) -> None:
    if a.weights is None or b.weights is None:
        raise DataError("EMD requires weighted patterns")
    if a.total_weight != b.total_weight:
        raise ShapeError(f"unequal total weights {a.total_weight} != {b.total_weight}")


def emd(a: Pattern, b: Pattern, metric=GroundMetric.EMD2) -> FlowResult:
    """Earth mover's distance with an integral optimal flow."""
    metric = GroundMetric.parse(metric)
    if not metric.weighted:
        raise DataError(f"emd() needs emd1 or emd2, got {metric.value}")
    if a.d != b.d:
        raise ShapeError(f"dimension mismatch {a.d} != {b.d}")
    _check_weights(a, b)
    cm = ground_cost_matrix(a.points, b.points, metric)
    flow = _kernels.transport(cm, a.weights, b.weights)
    return FlowResult(float(_kernels.flow_cost(cm, flow)), flow)


def cost(a: Pattern, b: Pattern, metric=GroundMetric.SQ) -> float:
    """Matching cost under any metric: exact bijection, or EMD for weighted metrics."""
    metric = GroundMetric.parse(metric)
    if metric.weighted:
        return emd(a, b, metric).cost
    return match_cost(a, b, metric).cost


def batch_costs(points, q_points, metric, weights=None, q_weights=None, approx=False):
    """Costs from every pattern in an (n, k, d) stack to one k-point set.

    Returns ``(costs, plans)`` where plans are (n, k) permutations for
    unweighted metrics and (n, k, k) integral flows for EMD metrics.
    """
    metric = GroundMetric.parse(metric)
    points = np.ascontiguousarray(points, dtype=np.float64)
    q_points = np.ascontiguousarray(q_points, dtype=np.float64)
    if points.ndim != 3 or points.shape[2] != q_points.shape[1]:
        raise ShapeError(f"cannot match stack {points.shape} against prototype {q_points.shape}")
    n = points.shape[0]
    if metric.weighted:
        if weights is None or q_weights is None:
            raise DataError("EMD metrics need point weights on both sides")
        q_weights = np.ascontiguousarray(q_weights, dtype=np.int64)
        weights = np.ascontiguousarray(weights, dtype=np.int64)
        if np.any(weights.sum(axis=1) != q_weights.sum()):
            raise ShapeError("unequal total weights between patterns and prototype")
        return map_chunks(
            lambda p, w: _kernels.batch_transport(p, w, q_points, q_weights, metric.code, approx),
            n,
            points,
            weights,
        )
    if points.shape[1] != q_points.shape[0]:
        raise ShapeError(f"k mismatch: {points.shape[1]} vs {q_points.shape[0]}")
    return map_chunks(lambda p: _kernels.batch_match(p, q_points, metric.code, approx), n, points)


def verify_match_triangle(a: Pattern, b: Pattern, c: Pattern, eps: float = 0.5, metric=GroundMetric.SQ) -> bool:
    """Check the triangle-type inequalities that hold for ``metric`` on one triple.

    Squared ground costs (sq, emd2) satisfy only the relaxed triangle
    M(A,B) <= 2 M(A,C) + 2 M(C,B) and the perturbation bound
    |M(A,B) - M(A,C)| <= (1 + 1/eps) M(B,C) + eps M(A,B).
    Unsquared costs (l1, emd1) satisfy the plain triangle inequality.
    """
    metric = GroundMetric.parse(metric)
    if eps <= 0:
        raise DataError("eps must be positive")
    ab = cost(a, b, metric)
    ac = cost(a, c, metric)
    cb = cost(c, b, metric)
    bc = cost(b, c, metric)
    slack = REL_TOL * max(ab, ac, cb, bc)
    if not metric.squared:
        return ab <= ac + cb + slack
    relaxed = ab <= 2 * ac + 2 * cb + slack
    perturb = abs(ab - ac) <= (1 + 1 / eps) * bc + eps * ab + slack
    return relaxed and perturb
