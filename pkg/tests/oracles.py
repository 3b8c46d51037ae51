"""Slow, direct reference implementations used to check the vectorized code.

Nothing here imports the code under test.
"""

import math
from collections import deque


def simam_scalar(x, lam):
    """Element-by-element SimAM on nested lists [N][C][H][W]."""
    out = []
    for sample in x:
        out_s = []
        for ch in sample:
            h, w = len(ch), len(ch[0])
            n = h * w - 1
            total = 0.0
            for row in ch:
                for val in row:
                    total += val
            mean = total / (h * w)
            dsum = 0.0
            for row in ch:
                for val in row:
                    dsum += (val - mean) ** 2
            v = dsum / n
            out_c = []
            for row in ch:
                out_r = []
                for val in row:
                    e_inv = (val - mean) ** 2 / (4.0 * (v + lam)) + 0.5
                    out_r.append(val * (1.0 / (1.0 + math.exp(-e_inv))))
                out_c.append(out_r)
            out_s.append(out_c)
        out.append(out_s)
    return out


def flood_fill_components(mask):
    """8-connected components of a list-of-lists boolean mask via BFS.

    Returns a set of frozensets of (row, col).
    """
    h, w = len(mask), len(mask[0])
    seen = [[False] * w for _ in range(h)]
    comps = set()
    for r in range(h):
        for c in range(w):
            if not mask[r][c] or seen[r][c]:
                continue
            members = []
            queue = deque([(r, c)])
            seen[r][c] = True
            while queue:
                y, x = queue.popleft()
                members.append((y, x))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny][nx] and not seen[ny][nx]:
                            seen[ny][nx] = True
                            queue.append((ny, nx))
            comps.add(frozenset(members))
    return comps


def median_scalar(img, window):
    """Median of each window with edge replication, by sorting."""
    h, w = len(img), len(img[0])
    half = window // 2
    out = [[0] * w for _ in range(h)]
    for r in range(h):
        for c in range(w):
            vals = []
            for dy in range(-half, half + 1):
                for dx in range(-half, half + 1):
                    y = min(max(r + dy, 0), h - 1)
                    x = min(max(c + dx, 0), w - 1)
                    vals.append(img[y][x])
            vals.sort()
            out[r][c] = vals[len(vals) // 2]
    return out


def otsu_exhaustive(values):
    """Best split p < t / p >= t by direct between-class variance at every t."""
    best_t, best_var = None, -1.0
    n = len(values)
    for t in range(256):
        lo = [v for v in values if v < t]
        hi = [v for v in values if v >= t]
        if not lo or not hi:
            continue
        m0, m1 = sum(lo) / len(lo), sum(hi) / len(hi)
        var = (len(lo) / n) * (len(hi) / n) * (m0 - m1) ** 2
        if var > best_var + 1e-12:
            best_t, best_var = t, var
    return best_t, best_var


def min_rect_by_angle_scan(points, steps=90 * 200):
    """Smallest axis-aligned box area over rotations in [0, 90) degrees."""
    best = None
    for i in range(steps):
        t = math.radians(90.0 * i / steps)
        ct, st = math.cos(t), math.sin(t)
        us = [x * ct + y * st for x, y in points]
        vs = [-x * st + y * ct for x, y in points]
        du, dv = max(us) - min(us), max(vs) - min(vs)
        area = du * dv
        if best is None or area < best[0]:
            best = (area, max(du, dv), min(du, dv))
    return best


def pixel_square_corners(pixels, hull_only=True):
    """Corners of the unit squares of a set of (row, col) pixels as (x, y).

    With ``hull_only`` the corners are reduced to scipy's convex hull vertices,
    which leaves every rotated bounding box unchanged.
    """
    pts = set()
    for r, c in pixels:
        pts.update({(c, r), (c + 1, r), (c, r + 1), (c + 1, r + 1)})
    pts = sorted(pts)
    if hull_only and len(pts) > 3:
        from scipy.spatial import ConvexHull

        pts = [pts[i] for i in ConvexHull(pts).vertices]
    return pts
