"""Loop kernels for the morphology engine.

Each function here is self-contained (no calls to other Python helpers) so it
compiles under ``numba.njit`` unchanged and also runs as plain Python on the
fallback backend.  Images are 2-D; neighbourhoods are passed as parallel
``dr``/``dc`` offset arrays.
"""
import heapq

import numpy as np


def reconstruct_dilate(marker, mask, domain, dr, dc):
    """Grey reconstruction by dilation (hybrid raster-scan + FIFO)."""
    h, w = mask.shape
    n = dr.shape[0]
    out = marker.copy()

    # forward scan, causal neighbours only
    for r in range(h):
        for c in range(w):
            if not domain[r, c]:
                continue
            v = out[r, c]
            for k in range(n):
                rr = r + dr[k]
                cc = c + dc[k]
                if rr < r or (rr == r and cc < c):
                    if 0 <= rr < h and 0 <= cc < w and domain[rr, cc]:
                        if out[rr, cc] > v:
                            v = out[rr, cc]
            if v > mask[r, c]:
                v = mask[r, c]
            out[r, c] = v

    cap = h * w + 16
    queue = np.empty(cap, dtype=np.int64)
    head = 0
    size = 0

    # backward scan, anti-causal neighbours; seed the queue
    for r in range(h - 1, -1, -1):
        for c in range(w - 1, -1, -1):
            if not domain[r, c]:
                continue
            v = out[r, c]
            for k in range(n):
                rr = r + dr[k]
                cc = c + dc[k]
                if rr > r or (rr == r and cc > c):
                    if 0 <= rr < h and 0 <= cc < w and domain[rr, cc]:
                        if out[rr, cc] > v:
                            v = out[rr, cc]
            if v > mask[r, c]:
                v = mask[r, c]
            out[r, c] = v
            for k in range(n):
                rr = r + dr[k]
                cc = c + dc[k]
                if rr > r or (rr == r and cc > c):
                    if 0 <= rr < h and 0 <= cc < w and domain[rr, cc]:
                        if out[rr, cc] < v and out[rr, cc] < mask[rr, cc]:
                            if size == cap:
                                grown = np.empty(cap * 2, dtype=np.int64)
                                for i in range(size):
                                    grown[i] = queue[(head + i) % cap]
                                queue = grown
                                head = 0
                                cap = cap * 2
                            queue[(head + size) % cap] = r * w + c
                            size += 1
                            break

    # FIFO propagation
    while size > 0:
        p = queue[head]
        head = (head + 1) % cap
        size -= 1
        r = p // w
        c = p % w
        v = out[r, c]
        for k in range(n):
            rr = r + dr[k]
            cc = c + dc[k]
            if 0 <= rr < h and 0 <= cc < w and domain[rr, cc]:
                if out[rr, cc] < v and out[rr, cc] != mask[rr, cc]:
                    nv = mask[rr, cc]
                    if v < nv:
                        nv = v
                    out[rr, cc] = nv
                    if size == cap:
                        grown = np.empty(cap * 2, dtype=np.int64)
                        for i in range(size):
                            grown[i] = queue[(head + i) % cap]
                        queue = grown
                        head = 0
                        cap = cap * 2
                    queue[(head + size) % cap] = rr * w + cc
                    size += 1
    return out


def label_zones(f, domain, lam, dr, dc):
    """Union-find labelling of lambda-flat zones; ids dense from 1 in raster order."""
    h, w = f.shape
    n = dr.shape[0]
    parent = np.arange(h * w)
    for r in range(h):
        for c in range(w):
            if not domain[r, c]:
                continue
            p = r * w + c
            for k in range(n):
                rr = r + dr[k]
                cc = c + dc[k]
                if not (rr < r or (rr == r and cc < c)):
                    continue
                if rr < 0 or rr >= h or cc < 0 or cc >= w or not domain[rr, cc]:
                    continue
                if abs(f[r, c] - f[rr, cc]) > lam:
                    continue
                a = p
                while parent[a] != a:
                    parent[a] = parent[parent[a]]
                    a = parent[a]
                b = rr * w + cc
                while parent[b] != b:
                    parent[b] = parent[parent[b]]
                    b = parent[b]
                if a < b:
                    parent[b] = a
                elif b < a:
                    parent[a] = b

    labels = np.zeros((h, w), dtype=np.int32)
    dense = np.zeros(h * w, dtype=np.int32)
    nxt = 0
    for r in range(h):
        for c in range(w):
            if not domain[r, c]:
                continue
            a = r * w + c
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            if dense[a] == 0:
                nxt += 1
                dense[a] = nxt
            labels[r, c] = dense[a]
    return labels


def area_open(f, domain, area, dr, dc, order):
    """Area opening by union-find over pixels sorted by decreasing value.

    ``order`` lists the flat indices of domain pixels, highest value first
    (stable among ties).
    """
    h, w = f.shape
    n = dr.shape[0]
    flat = f.ravel()
    parent = np.full(h * w, -1, dtype=np.int64)
    size = np.zeros(h * w, dtype=np.int64)
    for idx in range(order.shape[0]):
        p = order[idx]
        parent[p] = p
        size[p] = 1
        r = p // w
        c = p % w
        for k in range(n):
            rr = r + dr[k]
            cc = c + dc[k]
            if rr < 0 or rr >= h or cc < 0 or cc >= w or not domain[rr, cc]:
                continue
            q = rr * w + cc
            if parent[q] < 0:
                continue
            root = q
            while parent[root] != root:
                parent[root] = parent[parent[root]]
                root = parent[root]
            if root == p:
                continue
            if flat[root] == flat[p] or size[root] < area:
                size[p] += size[root]
                parent[root] = p
            else:
                size[p] = area

    out = flat.copy()
    for idx in range(order.shape[0] - 1, -1, -1):
        p = order[idx]
        if parent[p] != p:
            out[p] = out[parent[p]]
    return out.reshape((h, w))


def watershed_flood(prio, labels, domain, dr, dc):
    """Marker flooding with a hierarchical queue; FIFO among equal priorities.

    ``prio`` is an int64 image (quantised levels); ``labels`` holds the markers
    and is filled in place.  Pixels are labelled when pushed, so no divide
    lines are produced.
    """
    h, w = prio.shape
    n = dr.shape[0]
    heap = [(np.int64(0), np.int64(0), np.int64(0))]
    heap.pop()
    age = np.int64(0)
    for r in range(h):
        for c in range(w):
            if domain[r, c] and labels[r, c] != 0:
                heapq.heappush(heap, (prio[r, c], age, np.int64(r * w + c)))
                age += 1
    while len(heap) > 0:
        item = heapq.heappop(heap)
        p = item[2]
        r = p // w
        c = p % w
        lab = labels[r, c]
        for k in range(n):
            rr = r + dr[k]
            cc = c + dc[k]
            if rr < 0 or rr >= h or cc < 0 or cc >= w:
                continue
            if not domain[rr, cc] or labels[rr, cc] != 0:
                continue
            labels[rr, cc] = lab
            heapq.heappush(heap, (prio[rr, cc], age, np.int64(rr * w + cc)))
            age += 1
    return labels
