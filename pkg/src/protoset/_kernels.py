"""Compiled inner loops: ground-cost matrices, Hungarian, greedy, transport, FNV-1a.

Everything here works on plain arrays and releases the GIL so that the
thread pool in ``_parallel`` can run chunks concurrently.
"""
import numpy as np
from numba import njit

# ground cost codes
SQ = 0
L1 = 1
EUCLID = 2

_jit = njit(cache=True, nogil=True)


@_jit
def ground_matrix(a, b, code):
    k1, d = a.shape
    k2 = b.shape[0]
    out = np.empty((k1, k2))
    for j in range(k1):
        for l in range(k2):
            acc = 0.0
            if code == L1:
                for t in range(d):
                    acc += abs(a[j, t] - b[l, t])
            else:
                for t in range(d):
                    diff = a[j, t] - b[l, t]
                    acc += diff * diff
                if code == EUCLID:
                    acc = np.sqrt(acc)
            out[j, l] = acc
    return out


@_jit
def hungarian(cost):
    """Shortest-augmenting-path Hungarian with row/column potentials, O(k^3).

    Returns ``perm`` with row ``j`` assigned to column ``perm[j]``.
    """
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.empty(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = np.inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = np.inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    perm = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        perm[p[j] - 1] = j - 1
    return perm


@_jit
def greedy(cost):
    """Rows in input order, each to its cheapest unused column (lowest index on ties)."""
    n = cost.shape[0]
    taken = np.zeros(n, dtype=np.bool_)
    perm = np.empty(n, dtype=np.int64)
    for j in range(n):
        best = np.inf
        arg = -1
        for l in range(n):
            if not taken[l] and (arg == -1 or cost[j, l] < best):
                best = cost[j, l]
                arg = l
        taken[arg] = True
        perm[j] = arg
    return perm


@_jit
def assignment_cost(cost, perm):
    acc = 0.0
    for j in range(perm.shape[0]):
        acc += cost[j, perm[j]]
    return acc


@_jit
def transport(cost, supply, demand):
    """Integral min-cost transportation by successive shortest paths.

    Network: source -> supply nodes -> demand nodes -> sink, supply/demand arcs
    capacitated by the integer weights.  Dijkstra runs densely on reduced costs
    with Johnson potentials; every augmentation pushes an integer amount, so the
    final flow is integral.
    """
    k1 = supply.shape[0]
    k2 = demand.shape[0]
    V = k1 + k2 + 2
    s = 0
    t = V - 1
    total = 0
    for j in range(k1):
        total += supply[j]
    cap = np.zeros((V, V), dtype=np.int64)
    c = np.zeros((V, V))
    for j in range(k1):
        cap[s, 1 + j] = supply[j]
    for l in range(k2):
        cap[1 + k1 + l, t] = demand[l]
    for j in range(k1):
        for l in range(k2):
            cap[1 + j, 1 + k1 + l] = total
            c[1 + j, 1 + k1 + l] = cost[j, l]
            c[1 + k1 + l, 1 + j] = -cost[j, l]
    pot = np.zeros(V)
    dist = np.empty(V)
    prev = np.empty(V, dtype=np.int64)
    done = np.empty(V, dtype=np.bool_)
    sent = 0
    while sent < total:
        dist[:] = np.inf
        prev[:] = -1
        done[:] = False
        dist[s] = 0.0
        for _ in range(V):
            u = -1
            best = np.inf
            for w in range(V):
                if not done[w] and dist[w] < best:
                    best = dist[w]
                    u = w
            if u == -1:
                break
            done[u] = True
            for w in range(V):
                if cap[u, w] > 0 and not done[w]:
                    nd = dist[u] + c[u, w] + pot[u] - pot[w]
                    if nd < dist[w]:
                        dist[w] = nd
                        prev[w] = u
        if dist[t] == np.inf:
            break
        dt = dist[t]
        for w in range(V):
            pot[w] += dist[w] if dist[w] < dt else dt
        push = total - sent
        w = t
        while w != s:
            u = prev[w]
            if cap[u, w] < push:
                push = cap[u, w]
            w = u
        w = t
        while w != s:
            u = prev[w]
            cap[u, w] -= push
            cap[w, u] += push
            w = u
        sent += push
    flow = np.empty((k1, k2), dtype=np.int64)
    for j in range(k1):
        for l in range(k2):
            flow[j, l] = cap[1 + k1 + l, 1 + j]
    return flow


@_jit
def greedy_transport(cost, supply, demand):
    """Feasible integral flow: each source in order ships to its cheapest open sinks."""
    k1 = supply.shape[0]
    k2 = demand.shape[0]
    left = demand.copy()
    flow = np.zeros((k1, k2), dtype=np.int64)
    for j in range(k1):
        rem = supply[j]
        while rem > 0:
            best = np.inf
            arg = -1
            for l in range(k2):
                if left[l] > 0 and (arg == -1 or cost[j, l] < best):
                    best = cost[j, l]
                    arg = l
            if arg == -1:
                break
            amt = rem if rem < left[arg] else left[arg]
            flow[j, arg] += amt
            left[arg] -= amt
            rem -= amt
    return flow


@_jit
def flow_cost(cost, flow):
    acc = 0.0
    for j in range(flow.shape[0]):
        for l in range(flow.shape[1]):
            if flow[j, l] != 0:
                acc += flow[j, l] * cost[j, l]
    return acc


@_jit
def batch_match(points, q, code, approx):
    n, k, _ = points.shape
    costs = np.empty(n)
    perms = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        cm = ground_matrix(points[i], q, code)
        perm = greedy(cm) if approx else hungarian(cm)
        perms[i] = perm
        costs[i] = assignment_cost(cm, perm)
    return costs, perms


@_jit
def batch_transport(points, weights, q, qw, code, approx):
    n, k, _ = points.shape
    kq = q.shape[0]
    costs = np.empty(n)
    flows = np.empty((n, k, kq), dtype=np.int64)
    for i in range(n):
        cm = ground_matrix(points[i], q, code)
        if approx:
            f = greedy_transport(cm, weights[i], qw)
        else:
            f = transport(cm, weights[i], qw)
        flows[i] = f
        costs[i] = flow_cost(cm, f)
    return costs, flows


@_jit
def fnv1a64(data):
    h = np.uint64(0xCBF29CE484222325)
    prime = np.uint64(0x100000001B3)
    for i in range(data.shape[0]):
        h ^= np.uint64(data[i])
        h *= prime
    return h
