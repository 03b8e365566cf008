"""Brute-force reference implementations used only by the tests."""
from collections import deque
from itertools import combinations

import numpy as np


def flood_fill_labels(mask) -> list[frozenset]:
    """8-connected components of ``mask`` as sets of (y, x), by BFS."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for y0 in range(h):
        for x0 in range(w):
            if not mask[y0, x0] or seen[y0, x0]:
                continue
            comp = set()
            queue = deque([(y0, x0)])
            seen[y0, x0] = True
            while queue:
                y, x = queue.popleft()
                comp.add((y, x))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            queue.append((ny, nx))
            comps.append(frozenset(comp))
    return comps


def brute_erode(mask, se):
    h, w = mask.shape
    r = se.shape[0] // 2
    offs = [(dy - r, dx - r) for dy, dx in zip(*np.nonzero(se))]
    out = np.zeros_like(mask, dtype=bool)
    for y in range(h):
        for x in range(w):
            out[y, x] = all(
                not (0 <= y + dy < h and 0 <= x + dx < w) or mask[y + dy, x + dx] for dy, dx in offs
            )
    return out


def brute_dilate(mask, se):
    h, w = mask.shape
    r = se.shape[0] // 2
    offs = [(dy - r, dx - r) for dy, dx in zip(*np.nonzero(se))]
    out = np.zeros_like(mask, dtype=bool)
    for y in range(h):
        for x in range(w):
            out[y, x] = any(0 <= y + dy < h and 0 <= x + dx < w and mask[y + dy, x + dx] for dy, dx in offs)
    return out


def brute_otsu(values, counts, n_levels):
    """Cut indices maximising between-class variance, by enumeration."""
    values = np.asarray(values, float)
    counts = np.asarray(counts, float)
    mu = np.average(values, weights=counts)
    best, best_cuts = -1.0, None
    for cuts in combinations(range(1, len(values)), n_levels - 1):
        edges = [0, *cuts, len(values)]
        between = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            w = counts[a:b].sum()
            m = np.average(values[a:b], weights=counts[a:b])
            between += w * (m - mu) ** 2
        if between > best + 1e-9:
            best, best_cuts = between, list(cuts)
    return best_cuts


def brute_assignment(pred, det, gates):
    """Best gated partial matching: most pairs first, then least total distance.

    Enumerates every partial one-to-one matching depth-first. Returns
    (n_pairs, total_cost).
    """
    n, m = len(pred), len(det)
    if n == 0 or m == 0:
        return (0, 0.0)
    dist = np.linalg.norm(np.asarray(pred, float)[:, None] - np.asarray(det, float)[None], axis=2)
    best = [0, 0.0]

    def visit(i, used, k, cost):
        if i == n:
            if k > best[0] or (k == best[0] and cost < best[1] - 1e-12):
                best[0], best[1] = k, cost
            return
        visit(i + 1, used, k, cost)
        for j in range(m):
            if j not in used and dist[i, j] <= gates[i]:
                visit(i + 1, used | {j}, k + 1, cost + dist[i, j])

    visit(0, frozenset(), 0, 0.0)
    return best[0], best[1]
