"""Independent reference computations used only by the tests."""
import itertools

import numpy as np


def compositions(total, parts, caps):
    """All non-negative integer vectors of length ``parts`` summing to ``total`` with v[i] <= caps[i]."""
    if parts == 1:
        if total <= caps[0]:
            yield (total,)
        return
    for first in range(min(total, caps[0]) + 1):
        for rest in compositions(total - first, parts - 1, caps[1:]):
            yield (first,) + rest


def integral_flows(supply, demand):
    """Every integral k1 x k2 matrix with the given row and column sums."""
    supply = list(map(int, supply))
    demand = list(map(int, demand))

    def rows(i, left):
        if i == len(supply):
            if all(v == 0 for v in left):
                yield []
            return
        for row in compositions(supply[i], len(demand), left):
            for tail in rows(i + 1, [a - b for a, b in zip(left, row)]):
                yield [row] + tail

    for mat in rows(0, demand):
        yield np.array(mat, dtype=np.int64).reshape(len(supply), len(demand))


def ground(a, b, kind):
    diff = np.asarray(a, float)[:, None, :] - np.asarray(b, float)[None, :, :]
    if kind == "l1":
        return np.abs(diff).sum(axis=2)
    sq = (diff**2).sum(axis=2)
    return np.sqrt(sq) if kind == "emd1" else sq


def brute_force_emd(a_pts, a_w, b_pts, b_w, kind):
    cm = ground(a_pts, b_pts, kind)
    return min(float((f * cm).sum()) for f in integral_flows(a_w, b_w))


def brute_force_perm_cost(a, b, kind="sq"):
    cm = ground(a, b, kind)
    k = cm.shape[0]
    return min(sum(cm[j, p[j]] for j in range(k)) for p in itertools.permutations(range(k)))


def random_weights(rng, k, total):
    """Random non-negative integers of length k summing to total."""
    return rng.multinomial(total, np.ones(k) / k)
