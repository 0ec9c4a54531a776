"""Sensitivity bounds, importance-sampled coresets, and empirical coreset checks.

Every pattern gets an upper bound on its sensitivity computed from its
matching cost to a pivot pattern; patterns are then drawn i.i.d. with
probability proportional to that bound and re-weighted by the inverse
probability, which makes the weighted objective an unbiased estimate of the
full objective for any fixed prototype.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .matching import GroundMetric
from .prototype import Instance, Prototype, alternating_minimize, assign, objective

DEFAULT_ALPHA = 3.0
DEFAULT_SIZE_CONSTANT = 0.5


@dataclass(frozen=True)
class SensitivityProfile:
    pivot_index: int
    alpha: float
    delta_tilde: float  # sum of all costs to the pivot
    t_upper: np.ndarray
    t_sum: float
    costs_to_pivot: np.ndarray
    metric: GroundMetric
    cost_mode: str
    fingerprint: str

    @property
    def n(self) -> int:
        return self.t_upper.shape[0]

    @property
    def probabilities(self) -> np.ndarray:
        return self.t_upper / self.t_sum


@dataclass(frozen=True)
class Coreset:
    indices: np.ndarray
    weights: np.ndarray  # (1/r) * T / t_l per entry
    fingerprint: str
    t_sum: float
    alpha: float
    pivot_index: int
    delta_tilde: float
    seed: int | None = None

    @property
    def sample_size(self) -> int:
        return self.indices.shape[0]

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.weights.tolist()))

    def as_instance(self, inst: Instance) -> Instance:
        """The sampled patterns as a weighted instance (duplicates kept as separate entries)."""
        return inst.subset(self.indices, pattern_weights=self.weights)

    @classmethod
    def full_support(cls, inst: Instance) -> "Coreset":
        """Every pattern once with weight 1; evaluates exactly to the full objective."""
        return cls(np.arange(inst.n), np.ones(inst.n), inst.fingerprint, float(inst.n), 0.0, 0, 0.0)


def first_term_constant(alpha: float, metric) -> float:
    # squared costs only obey the relaxed triangle; plain metrics get 2(a+1)
    return 8.0 * (alpha + 1.0) if GroundMetric.parse(metric).squared else 2.0 * (alpha + 1.0)


def sensitivity_bounds(alpha: float, costs: np.ndarray, delta_tilde: float, n: int, metric=GroundMetric.SQ) -> np.ndarray:
    """t_i = c(alpha) * M(P_i, P_pivot) / delta_tilde + (4 alpha + 16) / n."""
    floor = (4.0 * alpha + 16.0) / n
    if delta_tilde == 0.0:
        return np.full(costs.shape[0], floor)
    return first_term_constant(alpha, metric) * costs / delta_tilde + floor


def sensitivities(
    inst: Instance,
    pivot: int,
    alpha: float = DEFAULT_ALPHA,
    cost_mode: str = "exact",
    metric=GroundMetric.SQ,
    costs: np.ndarray | None = None,
) -> SensitivityProfile:
    """Sensitivity upper bounds anchored at pattern ``pivot``.

    ``costs`` may pass precomputed exact costs to the pivot (as returned by
    :func:`protoset.prototype.pick_init`).  ``cost_mode="approx"`` uses the
    greedy matching instead; the bounds then inflate by its approximation
    factor and the sum is no longer capped by 12 alpha + 24.
    """
    metric = GroundMetric.parse(metric)
    if not alpha > 1:
        raise ConfigError(f"alpha must exceed 1, got {alpha}")
    if cost_mode not in ("exact", "approx"):
        raise ConfigError(f"cost_mode must be exact or approx, got {cost_mode!r}")
    if not 0 <= pivot < inst.n:
        raise DataError(f"pivot {pivot} out of range for n={inst.n}")
    if costs is None or cost_mode == "approx":
        q = Prototype.from_pattern(inst.pattern(pivot))
        costs, _ = assign(inst, q, metric, approx=cost_mode == "approx")
    costs = np.array(costs, dtype=np.float64)
    costs[pivot] = 0.0
    delta = float(np.sum(costs))
    t = sensitivity_bounds(alpha, costs, delta, inst.n, metric)
    for arr in (t, costs):
        arr.setflags(write=False)
    return SensitivityProfile(pivot, float(alpha), delta, t, float(np.sum(t)), costs, metric, cost_mode, inst.fingerprint)


def sample_coreset(profile: SensitivityProfile, r: int, rng=None, seed: int | None = None) -> Coreset:
    """Draw ``r`` patterns i.i.d. from t_i / T; each entry weighs (1/r) * T / t_i."""
    if r < 1:
        raise ConfigError("sample size must be >= 1")
    rng = np.random.default_rng(rng if rng is not None else seed)
    idx = rng.choice(profile.n, size=r, replace=True, p=profile.probabilities)
    weights = profile.t_sum / (r * profile.t_upper[idx])
    return Coreset(
        idx.astype(np.int64),
        weights,
        profile.fingerprint,
        profile.t_sum,
        profile.alpha,
        profile.pivot_index,
        profile.delta_tilde,
        seed,
    )


def weighted_objective(inst: Instance, cs: Coreset, q: Prototype, metric=GroundMetric.SQ) -> float:
    if cs.fingerprint != inst.fingerprint:
        raise DataError("coreset was sampled from a different instance")
    return objective(cs.as_instance(inst), q, metric)


def recommended_size(k: int, d: int, eps: float, constant: float = DEFAULT_SIZE_CONSTANT) -> int:
    """ceil(C * (kd / eps^2) * ln(max(kd / eps, e))); callers clamp to [1, n]."""
    if k < 1 or d < 1:
        raise ConfigError("k and d must be >= 1")
    if not 0 < eps < 1:
        raise ConfigError(f"eps must lie in (0, 1), got {eps}")
    kd = k * d
    return max(1, math.ceil(constant * (kd / eps**2) * math.log(max(kd / eps, math.e))))


def probe_prototypes(inst: Instance, cs: Coreset, probes: int, rng, metric=GroundMetric.SQ) -> list[Prototype]:
    """Random prototypes around the pivot with matching cost to it at most 4L/n.

    Only these matter: any k-point set farther than 4L/n from the pivot
    costs more than the pivot itself.
    """
    metric = GroundMetric.parse(metric)
    rng = np.random.default_rng(rng)
    pivot = inst.pattern(cs.pivot_index)
    radius = 4.0 * cs.delta_tilde / inst.n
    out = []
    for _ in range(probes):
        noise = rng.standard_normal(pivot.points.shape)
        # cost of the identity matching between pivot and pivot + noise
        per_point = np.sum(np.abs(noise), axis=1) if metric is GroundMetric.L1 else np.sqrt(np.sum(noise**2, axis=1))
        if metric.squared:
            per_point = per_point**2
        base = float(np.sum(per_point if pivot.weights is None else pivot.weights * per_point))
        target = rng.uniform() * radius
        scale = 0.0 if base == 0.0 else (target / base) ** (1.0 / metric.degree)
        out.append(Prototype(pivot.points + scale * noise, pivot.weights))
    return out


def validate_coreset(
    inst: Instance,
    cs: Coreset,
    probes: int = 100,
    rng=None,
    metric=GroundMetric.SQ,
    include_solution: bool = True,
) -> float:
    """Max relative error |full - coreset| / full over probe prototypes.

    Probes lie within matching cost 4L/n of the pivot; with ``include_solution``
    the alternating-minimization result on the full instance is probed too.
    """
    metric = GroundMetric.parse(metric)
    if probes < 1:
        raise ConfigError("probes must be >= 1")
    if cs.fingerprint != inst.fingerprint:
        raise DataError("coreset was sampled from a different instance")
    candidates = probe_prototypes(inst, cs, probes, rng, metric)
    if include_solution:
        init = Prototype.from_pattern(inst.pattern(cs.pivot_index))
        candidates.append(alternating_minimize(inst, init, metric).prototype)
    sub = cs.as_instance(inst)
    worst = 0.0
    for q in candidates:
        full = objective(inst, q, metric)
        approx = objective(sub, q, metric)
        if full == 0.0:
            err = 0.0 if approx == 0.0 else math.inf
        else:
            err = abs(full - approx) / full
        worst = max(worst, err)
    return worst
