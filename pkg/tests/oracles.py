"""Brute-force reference implementations used as test oracles."""

import math


def dbscan_oracle(points, eps, min_pts):
    """Brute-force DBSCAN: core points by counting, clusters as connected core components,
    border points attached to the earliest-discovered adjacent cluster."""
    n = len(points)
    nb = [[j for j in range(n) if math.dist(points[i], points[j]) <= eps] for i in range(n)]
    core = [len(nb[i]) >= min_pts for i in range(n)]
    comp = [-1] * n
    order = []
    for i in range(n):
        if not core[i] or comp[i] != -1:
            continue
        c = len(order)
        order.append(i)
        stack = [i]
        comp[i] = c
        while stack:
            p = stack.pop()
            for q in nb[p]:
                if core[q] and comp[q] == -1:
                    comp[q] = c
                    stack.append(q)
    labels = list(comp)
    for i in range(n):
        if not core[i]:
            adj = [comp[q] for q in nb[i] if core[q]]
            labels[i] = min(adj) if adj else -1
    return labels


def partition(labels):
    groups = {}
    for i, l in enumerate(labels):
        groups.setdefault(l, set()).add(i)
    noise = frozenset(groups.pop(-1, set()))
    return noise, {frozenset(g) for g in groups.values()}
