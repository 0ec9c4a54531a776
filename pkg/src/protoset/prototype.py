"""Instances, the prototype objective, and the alternating-minimization solver."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .errors import DataError, NumericalError, ShapeError
from .matching import REL_TOL, GroundMetric, Pattern, batch_costs

log = logging.getLogger(__name__)

DEFAULT_MAX_ROUNDS = 100
DEFAULT_REL_TOL = 1e-6
WEISZFELD_STEPS = 50


def _readonly(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    """n patterns stored as one (n, k, d) stack.

    ``pattern_weights`` multiplies each pattern's contribution to the
    objective and to the prototype update; coresets are consumed this way.
    """

    points: np.ndarray
    weights: np.ndarray | None = None
    pattern_weights: np.ndarray | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 3 or min(pts.shape) < 1:
            raise ShapeError(f"instance points must be a non-empty (n, k, d) array, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise DataError("instance contains NaN or Inf coordinates")
        object.__setattr__(self, "points", _readonly(pts))
        n, k, _ = pts.shape
        if self.weights is not None:
            w = np.asarray(self.weights)
            if w.shape != (n, k):
                raise ShapeError(f"weights must have shape ({n}, {k}), got {w.shape}")
            if w.dtype.kind == "f" and np.any(w != np.round(w)):
                raise DataError("point weights must be integers")
            w = w.astype(np.int64)
            if np.any(w < 0):
                raise DataError("point weights must be non-negative")
            totals = w.sum(axis=1)
            if totals[0] <= 0 or np.any(totals != totals[0]):
                raise ShapeError("all patterns must share one positive total weight W")
            object.__setattr__(self, "weights", _readonly(w))
        pw = np.ones(n) if self.pattern_weights is None else np.array(self.pattern_weights, dtype=np.float64)
        if pw.shape != (n,) or not np.all(np.isfinite(pw)) or np.any(pw < 0):
            raise DataError("pattern weights must be n finite non-negative reals")
        object.__setattr__(self, "pattern_weights", _readonly(pw))

    @classmethod
    def from_patterns(cls, patterns: Sequence[Pattern], pattern_weights=None) -> "Instance":
        if not patterns:
            raise DataError("an instance needs at least one pattern")
        shapes = {(p.k, p.d) for p in patterns}
        if len(shapes) != 1:
            raise ShapeError(f"patterns disagree on (k, d): {sorted(shapes)}")
        flags = {p.weights is None for p in patterns}
        if len(flags) != 1:
            raise ShapeError("mixing weighted and unweighted patterns")
        weights = None if flags == {True} else np.stack([p.weights for p in patterns])
        return cls(np.stack([p.points for p in patterns]), weights, pattern_weights)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def k(self) -> int:
        return self.points.shape[1]

    @property
    def d(self) -> int:
        return self.points.shape[2]

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    @property
    def total_weight(self) -> int | None:
        return None if self.weights is None else int(self.weights[0].sum())

    def pattern(self, i: int) -> Pattern:
        return Pattern(self.points[i], None if self.weights is None else self.weights[i])

    @property
    def patterns(self) -> list[Pattern]:
        return [self.pattern(i) for i in range(self.n)]

    def subset(self, indices, pattern_weights=None) -> "Instance":
        idx = np.asarray(indices, dtype=np.int64)
        weights = None if self.weights is None else self.weights[idx]
        pw = self.pattern_weights[idx] if pattern_weights is None else pattern_weights
        return Instance(self.points[idx], weights, pw)

    def canonical_bytes(self) -> bytes:
        """The pattern-file serialization (meta line + one line per pattern)."""
        meta = {"n": self.n, "k": self.k, "d": self.d}
        if self.weighted:
            meta["W"] = self.total_weight
        lines = [json.dumps({"meta": meta}, separators=(",", ":"))]
        for i in range(self.n):
            rec = {"id": i, "points": self.points[i].tolist()}
            if self.weighted:
                rec["weights"] = self.weights[i].tolist()
            lines.append(json.dumps(rec, separators=(",", ":")))
        return ("\n".join(lines) + "\n").encode("utf-8")

    @cached_property
    def fingerprint(self) -> str:
        """FNV-1a 64-bit hash of :meth:`canonical_bytes`, lowercase hex."""
        data = np.frombuffer(self.canonical_bytes(), dtype=np.uint8)
        return f"{int(_kernels.fnv1a64(data)):016x}"

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        same_w = (self.weights is None and other.weights is None) or (
            self.weights is not None and other.weights is not None and np.array_equal(self.weights, other.weights)
        )
        return (
            same_w
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.pattern_weights, other.pattern_weights)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Prototype:
    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        p = Pattern(self.points, self.weights)
        object.__setattr__(self, "points", p.points)
        object.__setattr__(self, "weights", p.weights)

    @classmethod
    def from_pattern(cls, pattern: Pattern) -> "Prototype":
        return cls(pattern.points, pattern.weights)

    def as_pattern(self) -> Pattern:
        return Pattern(self.points, self.weights)

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Prototype):
            return NotImplemented
        return self.as_pattern() == other.as_pattern()

    __hash__ = None


@dataclass
class SolveReport:
    prototype: Prototype
    objective_history: list[float]
    rounds: int
    converged: bool
    empty_slots: list[int] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objective_history[-1]


def _check_compatible(inst: Instance, q: Prototype, metric: GroundMetric) -> None:
    if q.d != inst.d:
        raise ShapeError(f"prototype dimension {q.d} != instance dimension {inst.d}")
    if metric.weighted:
        if not inst.weighted or q.weights is None:
            raise DataError(f"{metric.value} needs weighted instance and prototype")
        if int(q.weights.sum()) != inst.total_weight:
            raise ShapeError("prototype total weight differs from the instance's W")
    elif q.k != inst.k:
        raise ShapeError(f"prototype has {q.k} points, patterns have {inst.k}")


def assign(inst: Instance, q: Prototype, metric=GroundMetric.SQ, approx: bool = False):
    """Per-pattern matching costs to ``q`` (unweighted by pattern weight) and the plans."""
    metric = GroundMetric.parse(metric)
    _check_compatible(inst, q, metric)
    return batch_costs(inst.points, q.points, metric, inst.weights, q.weights, approx=approx)


def objective(inst: Instance, q: Prototype, metric=GroundMetric.SQ) -> float:
    """Sum over patterns of pattern_weight * matching cost to ``q``."""
    costs, _ = assign(inst, q, metric)
    return float(np.sum(inst.pattern_weights * costs))


class PivotChoice(NamedTuple):
    index: int
    value: float
    costs: np.ndarray  # matching cost of every pattern to the chosen pivot


def pick_init(inst: Instance, trials: int = 3, rng=None, metric=GroundMetric.SQ) -> PivotChoice:
    """Best of ``trials`` uniformly drawn input patterns as a starting prototype.

    A single uniform draw is a (2a+2)-approximation with probability 1 - 1/a;
    keeping the best of t draws raises that to 1 - 1/a**t.
    """
    metric = GroundMetric.parse(metric)
    if trials < 1:
        raise DataError("trials must be >= 1")
    rng = np.random.default_rng(rng)
    candidates = rng.integers(0, inst.n, size=trials)
    seen = {}
    best = None
    for idx in candidates.tolist():
        if idx not in seen:
            costs, _ = assign(inst, Prototype.from_pattern(inst.pattern(idx)), metric)
            seen[idx] = (float(np.sum(inst.pattern_weights * costs)), costs)
        value, costs = seen[idx]
        if best is None or value < best.value:
            best = PivotChoice(idx, value, costs)
    return best


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Lower weighted median: the first sorted value whose cumulative weight reaches half."""
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cum = np.cumsum(w)
    return float(v[np.searchsorted(cum, cum[-1] / 2.0, side="left")])


def geometric_median(points: np.ndarray, weights: np.ndarray, starts, steps: int = WEISZFELD_STEPS) -> np.ndarray:
    """Weiszfeld iterations from the best of ``starts``.

    A step is kept only if it lowers the weighted distance sum, so the result
    is never worse than any start point.
    """
    mask = weights > 0
    pts, w = points[mask], weights[mask]

    def value(z):
        return float(np.sum(w * np.sqrt(np.sum((pts - z) ** 2, axis=1))))

    scored = [(value(z), i) for i, z in enumerate(starts)]
    current, best = min(scored)
    y = np.array(starts[best], dtype=np.float64)
    for _ in range(steps):
        dist = np.sqrt(np.sum((pts - y) ** 2, axis=1))
        far = dist > 1e-12 * (1.0 + np.abs(y).max())
        if not np.any(far):
            break
        coef = w[far] / dist[far]
        cand = coef @ pts[far] / coef.sum()
        new = value(cand)
        if not new < current:
            break
        improved = current - new
        y, current = cand, new
        if improved <= REL_TOL * current:
            break
    return y


def update_prototype(inst: Instance, plans, metric=GroundMetric.SQ, previous: Prototype | None = None):
    """Optimal prototype for fixed matchings.

    ``plans`` are the per-pattern permutations (pattern point j -> slot
    plans[i, j]) or, for EMD metrics, (k, k) flows from pattern points to
    prototype slots.  Per slot: weighted mean (sq, emd2), coordinate-wise
    lower weighted median (l1), Weiszfeld geometric median (emd1).  Slots that
    receive no mass keep their ``previous`` location.

    Returns ``(prototype, empty_slots)``.
    """
    metric = GroundMetric.parse(metric)
    plans = np.asarray(plans)
    pw = inst.pattern_weights
    n, k, d = inst.points.shape
    if metric.weighted:
        if previous is None or previous.weights is None:
            raise DataError("EMD updates need the previous weighted prototype")
        kq = previous.k
        if plans.shape != (n, k, kq):
            raise ShapeError(f"flows must have shape {(n, k, kq)}, got {plans.shape}")
        # mass[i, j, s]: weight of pattern i's point j flowing into slot s
        mass = plans * pw[:, None, None]
        flat_pts = inst.points.reshape(n * k, d)
        flat_mass = mass.reshape(n * k, kq)
    else:
        if plans.shape != (n, k) or np.any(np.sort(plans, axis=1) != np.arange(k)):
            raise DataError("matchings must be one permutation of range(k) per pattern")
        kq = k
        # gather[i, s]: the point of pattern i that is matched to slot s
        inverse = np.argsort(plans, axis=1)
        gathered = np.take_along_axis(inst.points, inverse[:, :, None], axis=1)
    out = np.empty((kq, d))
    empty = []
    for s in range(kq):
        if metric.weighted:
            w_s = flat_mass[:, s]
            pts = flat_pts
        else:
            w_s = pw
            pts = gathered[:, s, :]
        total = float(np.sum(w_s))
        if not total > 0:
            if previous is None:
                raise NumericalError(f"slot {s} received no mass and there is no previous location")
            out[s] = previous.points[s]
            empty.append(s)
            continue
        if metric in (GroundMetric.SQ, GroundMetric.EMD2):
            out[s] = (w_s @ pts) / total
        elif metric is GroundMetric.L1:
            out[s] = [weighted_median(pts[:, t], w_s) for t in range(d)]
        else:
            starts = [(w_s @ pts) / total]
            if previous is not None and previous.d == d:
                starts.insert(0, previous.points[s])
            out[s] = geometric_median(pts, w_s, starts)
    if not np.all(np.isfinite(out)):
        raise NumericalError("prototype update produced non-finite coordinates")
    weights = None if previous is None else previous.weights
    return Prototype(out, weights if metric.weighted else None), empty


def alternating_minimize(
    inst: Instance,
    init: Prototype,
    metric=GroundMetric.SQ,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    rel_tol: float = DEFAULT_REL_TOL,
) -> SolveReport:
    """Alternate exact matchings and per-slot prototype updates.

    ``objective_history[0]`` is the objective at ``init``; each later entry
    follows one update.  Stops when the relative improvement drops below
    ``rel_tol``, when an update leaves the prototype unchanged, or after
    ``max_rounds`` updates.  EMD prototype weights stay at ``init``'s weights.
    """
    metric = GroundMetric.parse(metric)
    if max_rounds < 1:
        raise DataError("max_rounds must be >= 1")
    if rel_tol < 0:
        raise DataError("rel_tol must be >= 0")
    q = init
    costs, plans = assign(inst, q, metric)
    value = float(np.sum(inst.pattern_weights * costs))
    history = [value]
    empty: set[int] = set()
    rounds = 0
    converged = value == 0.0
    while not converged and rounds < max_rounds:
        new_q, new_empty = update_prototype(inst, plans, metric, previous=q)
        if new_q == q:
            converged = True
            break
        rounds += 1
        empty.update(new_empty)
        costs, plans = assign(inst, new_q, metric)
        new_value = float(np.sum(inst.pattern_weights * costs))
        if not np.isfinite(new_value):
            raise NumericalError(f"objective became non-finite in round {rounds}")
        history.append(new_value)
        q = new_q
        if (value - new_value) / max(value, np.finfo(float).eps) < rel_tol:
            converged = True
        value = new_value
    log.debug("alternating_minimize: %d rounds, objective %.6g -> %.6g", rounds, history[0], history[-1])
    return SolveReport(q, history, rounds, converged, sorted(empty))
