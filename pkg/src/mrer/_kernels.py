"""Compiled inner loops for line-of-sight and breadth-first search."""

import numba
import numpy as np

UNKNOWN = 0
FREE = 1
OCCUPIED = 2

# neighbour order is part of the determinism contract
DX4 = np.array([1, 0, -1, 0], dtype=np.int64)
DY4 = np.array([0, 1, 0, -1], dtype=np.int64)


@numba.njit(cache=True)
def los_mask(cells, ox, oy, tx, ty, line_x, line_y, line_len):
    h, w = cells.shape
    out = np.zeros((h, w), dtype=np.bool_)
    out[oy, ox] = True
    for k in range(tx.shape[0]):
        x = ox + tx[k]
        y = oy + ty[k]
        if x < 0 or y < 0 or x >= w or y >= h:
            continue
        if cells[y, x] == UNKNOWN:
            continue
        clear = True
        for j in range(line_len[k]):
            if cells[oy + line_y[k, j], ox + line_x[k, j]] != FREE:
                clear = False
                break
        if clear:
            out[y, x] = True
    return out


@numba.njit(cache=True)
def bfs_field(passable, sx, sy):
    h, w = passable.shape
    dist = np.full((h, w), -1, dtype=np.int32)
    if not passable[sy, sx]:
        return dist
    qx = np.empty(h * w, dtype=np.int64)
    qy = np.empty(h * w, dtype=np.int64)
    head = 0
    tail = 1
    qx[0] = sx
    qy[0] = sy
    dist[sy, sx] = 0
    while head < tail:
        x = qx[head]
        y = qy[head]
        head += 1
        d = dist[y, x] + 1
        for n in range(4):
            nx = x + DX4[n]
            ny = y + DY4[n]
            if nx < 0 or ny < 0 or nx >= w or ny >= h:
                continue
            if dist[ny, nx] >= 0 or not passable[ny, nx]:
                continue
            dist[ny, nx] = d
            qx[tail] = nx
            qy[tail] = ny
            tail += 1
    return dist


@numba.njit(cache=True)
def descend(dist, tx, ty):
    """Walk from (tx, ty) down a BFS field to its source; returns xs, ys source-first."""
    h, w = dist.shape
    n = dist[ty, tx] + 1
    xs = np.empty(n, dtype=np.int64)
    ys = np.empty(n, dtype=np.int64)
    x = tx
    y = ty
    i = n - 1
    xs[i] = x
    ys[i] = y
    while dist[y, x] > 0:
        d = dist[y, x]
        for k in range(4):
            nx = x + DX4[k]
            ny = y + DY4[k]
            if nx < 0 or ny < 0 or nx >= w or ny >= h:
                continue
            if dist[ny, nx] == d - 1:
                x = nx
                y = ny
                break
        i -= 1
        xs[i] = x
        ys[i] = y
    return xs, ys


@numba.njit(cache=True)
def fill_gaps(raw, cells):
    """4-connected fill of ``raw`` over Free cells inside its 8-neighbourhood ring."""
    h, w = raw.shape
    out = np.zeros((h, w), dtype=np.bool_)
    ring = np.zeros((h, w), dtype=np.bool_)
    qx = np.empty(h * w, dtype=np.int64)
    qy = np.empty(h * w, dtype=np.int64)
    tail = 0
    for y in range(h):
        for x in range(w):
            if not raw[y, x]:
                continue
            for yy in range(max(0, y - 1), min(h, y + 2)):
                for xx in range(max(0, x - 1), min(w, x + 2)):
                    ring[yy, xx] = True
            c = cells[y, x]
            if c == FREE:
                out[y, x] = True
                qx[tail] = x
                qy[tail] = y
                tail += 1
            elif c == OCCUPIED:
                out[y, x] = True
    head = 0
    while head < tail:
        x = qx[head]
        y = qy[head]
        head += 1
        for n in range(4):
            nx = x + DX4[n]
            ny = y + DY4[n]
            if nx < 0 or ny < 0 or nx >= w or ny >= h:
                continue
            if out[ny, nx] or not ring[ny, nx] or cells[ny, nx] != FREE:
                continue
            out[ny, nx] = True
            qx[tail] = nx
            qy[tail] = ny
            tail += 1
    return out


@numba.njit(cache=True)
def disk_union_count(mask, xs, ys, radius):
    """Number of ``mask`` cells within Euclidean ``radius`` of any (xs[i], ys[i])."""
    h, w = mask.shape
    r = int(np.floor(radius))
    r2 = radius * radius
    span = np.zeros(r + 1, dtype=np.int64)  # half-width of the disk per row offset
    for dy in range(r + 1):
        k = 0
        while (k + 1) * (k + 1) + dy * dy <= r2:
            k += 1
        span[dy] = k
    hit = np.zeros((h, w), dtype=np.bool_)
    total = 0
    for i in range(xs.shape[0]):
        ox = xs[i]
        oy = ys[i]
        for y in range(max(0, oy - r), min(h, oy + r + 1)):
            k = span[abs(y - oy)]
            for x in range(max(0, ox - k), min(w, ox + k + 1)):
                if mask[y, x] and not hit[y, x]:
                    hit[y, x] = True
                    total += 1
    return total
