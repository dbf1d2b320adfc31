"""Slow, obviously-correct reference implementations used to check the library.

Nothing here imports the code under test beyond plain data types.
"""
from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np


# lines

def tls_line(points):
    """Orthogonal-regression line through ``points`` as (unit normal, offset), normal.y >= 0."""
    p = np.asarray(points, dtype=float)
    c = p.mean(axis=0)
    _, _, vt = np.linalg.svd(p - c)
    n = vt[-1]
    if n[1] < 0 or (n[1] == 0 and n[0] < 0):
        n = -n
    return n, float(n @ c)


def exhaustive_consensus_line(points, tol):
    """Best line over *every* point pair by inlier count, refit by TLS on its inliers."""
    p = np.asarray(points, dtype=float)
    best = None
    for i, j in itertools.combinations(range(len(p)), 2):
        d = p[j] - p[i]
        ln = math.hypot(*d)
        if ln < 1e-12:
            continue
        n = np.array([-d[1], d[0]]) / ln
        inl = np.flatnonzero(np.abs(p @ n - n @ p[i]) <= tol)
        if best is None or len(inl) > len(best):
            best = inl
    n, off = tls_line(p[best])
    return n, off, best


# clustering

def eps_graph_dbscan(points, eps, min_pts):
    """DBSCAN by definition: full distance matrix, core-core components, border attachment.

    Returns ``(core mask, core component id per point or -1, neighbour matrix)``.
    """
    p = np.asarray(points, dtype=float)
    d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
    nb = d <= eps
    core = nb.sum(1) >= min_pts
    comp = np.full(len(p), -1)
    c = 0
    for s in range(len(p)):
        if not core[s] or comp[s] >= 0:
            continue
        comp[s] = c
        q = deque([s])
        while q:
            u = q.popleft()
            for v in np.flatnonzero(nb[u] & core):
                if comp[v] < 0:
                    comp[v] = c
                    q.append(v)
        c += 1
    return core, comp, nb


def partition(labels):
    """Labels as a set of frozensets (noise excluded), for label-free comparison."""
    labels = np.asarray(labels)
    return {frozenset(np.flatnonzero(labels == k).tolist()) for k in np.unique(labels) if k >= 0}


# grids

def flood_components(mask):
    """4-connected component count by BFS."""
    mask = np.asarray(mask, dtype=bool)
    seen = np.zeros_like(mask)
    h, w = mask.shape
    n = 0
    for r, c in zip(*np.nonzero(mask)):
        if seen[r, c]:
            continue
        n += 1
        seen[r, c] = True
        q = deque([(r, c)])
        while q:
            y, x = q.popleft()
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and not seen[yy, xx]:
                    seen[yy, xx] = True
                    q.append((yy, xx))
    return n


def count_wall_runs(labels):
    """Maximal straight runs of boundary between differing cells (empty = -1 outside too)."""
    lab = np.pad(np.asarray(labels), 1, constant_values=-1)
    runs = 0
    # horizontal boundaries sit between row r and r+1; a run continues while
    # the label pair across the boundary stays a boundary
    for r in range(lab.shape[0] - 1):
        prev = False
        for c in range(lab.shape[1]):
            here = lab[r, c] != lab[r + 1, c]
            runs += here and not prev
            prev = here
    for c in range(lab.shape[1] - 1):
        prev = False
        for r in range(lab.shape[0]):
            here = lab[r, c] != lab[r, c + 1]
            runs += here and not prev
            prev = here
    return runs


# polygons

def shoelace(corners):
    c = np.asarray(corners, dtype=float)
    s = 0.0
    for i in range(len(c)):
        x0, y0 = c[i]
        x1, y1 = c[(i + 1) % len(c)]
        s += x0 * y1 - x1 * y0
    return abs(s) / 2


def winding_inside(pt, corners):
    """Point-in-polygon by winding number (independent of the even-odd crossing test)."""
    c = np.asarray(corners, dtype=float)
    x, y = pt
    wn = 0
    for i in range(len(c)):
        (x0, y0), (x1, y1) = c[i], c[(i + 1) % len(c)]
        cross = (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)
        if y0 <= y < y1 and cross > 0:
            wn += 1
        elif y1 <= y < y0 and cross < 0:
            wn -= 1
    return wn != 0


# tours

def best_pair_adjacent_tour(endpoints):
    """Minimum closed-tour cost over all orders and orientations of segments.

    ``endpoints`` is a list of (a, b) pairs. Each segment is walked end to end
    at no cost; only jumps between segments are paid. Segment 0 is fixed first
    and forward to remove rotations and reversals.
    """
    e = [(np.asarray(a, float), np.asarray(b, float)) for a, b in endpoints]
    n = len(e)
    best = math.inf
    for perm in itertools.permutations(range(1, n)):
        for flips in itertools.product((False, True), repeat=n - 1):
            walk = [e[0]] + [(e[s][1], e[s][0]) if f else e[s] for s, f in zip(perm, flips)]
            cost = sum(math.dist(walk[k][1], walk[(k + 1) % n][0]) for k in range(n))
            best = min(best, cost)
    return best


# loss

def hand_loss(pred, gt, alpha):
    """Vote loss written out seed by seed with plain floats."""
    def l1s(a):
        a = abs(a)
        return 0.5 * a * a if a < 1 else a - 0.5

    def nrm(u, v):
        return math.sqrt(sum((a - b) ** 2 for a, b in zip(u, v)))

    m = len(pred[0])
    room = wall = 0.0
    for i in range(m):
        straight = nrm(gt[0][i], pred[0][i]) + nrm(gt[1][i], pred[1][i])
        swapped = nrm(gt[0][i], pred[1][i]) + nrm(gt[1][i], pred[0][i])
        room += l1s(min(straight, swapped))
        wall += l1s(nrm(gt[2][i], pred[2][i]))
    room /= m
    wall /= m
    return room + alpha * wall, room, wall


def eps_graph_labels(points, eps, min_pts):
    """Full DBSCAN labelling: components numbered by lowest core index, border to lowest id."""
    core, comp, nb = eps_graph_dbscan(points, eps, min_pts)
    labels = comp.copy()
    for i in np.flatnonzero(~core):
        ids = comp[nb[i] & core]
        if len(ids):
            labels[i] = ids.min()
    return labels


# instances

def blobs(seed, n_max=300):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 6))
    n = int(rng.integers(5, n_max + 1))
    centres = rng.uniform(0, 1, (k, 3))
    spread = rng.uniform(0.005, 0.05, k)
    who = rng.integers(0, k, n)
    pts = centres[who] + rng.normal(0, 1, (n, 3)) * spread[who, None]
    noise = rng.random(n) < 0.1
    pts[noise] = rng.uniform(0, 1, (noise.sum(), 3))
    return pts, float(rng.uniform(0.01, 0.08)), int(rng.integers(1, 10))
