"""Reference implementations of the hot loops.  The compiled module
``_ckernels`` exposes the same functions with the same signatures."""
from __future__ import annotations

import heapq
import math

import numpy as np

RIGHT, UP, LEFT, DOWN = 0, 1, 2, 3


def trace_integer_line(s, x0, y0, p, q, c, nxt, let, limit=-1):
    """Letter codes crossed in one period by the closed line of holonomy
    ``(p, q)`` through ``(x0, y0)`` in square ``s``, stopping after
    ``limit`` square crossings when ``limit >= 0``.

    ``c = q·x0 − p·y0``; events are ordered by comparing the integer
    ``q·m − p·m'`` against ``c`` so the order is exact.
    """
    sp = 1 if p > 0 else (-1 if p < 0 else 0)
    sq = 1 if q > 0 else (-1 if q < 0 else 0)
    mv = 1 if p > 0 else 0  # next vertical line (relative to the square)
    mh = 1 if q > 0 else 0
    ox = oy = 0
    out = []
    nv, nh = abs(p), abs(q)
    steps = nv + nh if limit < 0 else min(nv + nh, limit)
    for _ in range(steps):
        if nv == 0:
            vert = False
        elif nh == 0:
            vert = True
        else:
            lhs = sp * sq * (q * (mv + ox) - p * (mh + oy))
            rhs = sp * sq * c
            if lhs == rhs:
                raise RuntimeError("closed line passes through a cone point")
            vert = lhs < rhs
        if vert:
            d = RIGHT if p > 0 else LEFT
            ox += sp
            nv -= 1
        else:
            d = UP if q > 0 else DOWN
            oy += sq
            nh -= 1
        code = let[4 * s + d]
        if code >= 0:
            out.append(int(code))
        s = int(nxt[4 * s + d])
    return np.array(out, dtype=np.int8)


def trace_corner_line(s, x0, y0, p, q, nxt, let):
    """Straight segment of primitive holonomy ``(p, q)`` from corner
    ``(x0, y0)`` of square ``s`` to the next lattice point.

    Returns ``(codes, last_square, cx, cy)`` with ``(cx, cy)`` the corner of
    ``last_square`` where the segment ends.
    """
    sp = 1 if p > 0 else (-1 if p < 0 else 0)
    sq = 1 if q > 0 else (-1 if q < 0 else 0)
    ox = oy = 0
    out = []
    # interior events: vertical lines x = x0 + j·sp, j = 1..|p|-1 relative to
    # the start corner, and likewise horizontal; at most one crossing per line
    # because the segment never returns.
    jv, jh = 1, 1
    nv, nh = abs(p) - 1 if p else 0, abs(q) - 1 if q else 0
    # lines through the start corner are crossed immediately when the
    # segment leaves along the square's inside; square s already contains the
    # start of the segment, so skip them.
    while nv > 0 or nh > 0:
        if nv == 0:
            vert = False
        elif nh == 0:
            vert = True
        else:
            # t_v = jv/|p|, t_h = jh/|q|
            a, b = jv * abs(q), jh * abs(p)
            if a == b:
                raise RuntimeError("holonomy is not primitive")
            vert = a < b
        if vert:
            d = RIGHT if p > 0 else LEFT
            ox += sp
            jv += 1
            nv -= 1
        else:
            d = UP if q > 0 else DOWN
            oy += sq
            jh += 1
            nh -= 1
        code = let[4 * s + d]
        if code >= 0:
            out.append(int(code))
        s = int(nxt[4 * s + d])
    # the corner of the last square where the segment ends
    ex = x0 + p - ox
    ey = y0 + q - oy
    return np.array(out, dtype=np.int64), s, int(ex), int(ey)


def dijkstra_layered(indptr, indices, eX, eY, zs, log_k, gl_x, gl_w,
                     src_node, src_layer, targets, boundary, blocked):
    """Shortest paths on (2-D graph) × (z layers) with up to 26 moves per node.

    Every 2-D edge may be combined with a layer change of -1, 0, +1; a node
    may also move vertically alone.  Edge weight is the solv length of the
    straight piece with linearly interpolated height, integrated with the
    supplied Gauss–Legendre rule.  Returns ``(dist, touched)`` for each
    target index ``node*nz + layer``; ``touched`` marks targets whose best
    path visits a boundary node (``boundary`` is indexed like the targets).
    """
    nz = len(zs)
    INF = math.inf
    dist = {}
    touch = {}
    src = src_node * nz + src_layer
    dist[src] = 0.0
    touch[src] = bool(boundary[src])
    remaining = set(int(t) for t in targets)
    done = set()
    heap = [(0.0, src)]
    gx = np.asarray(gl_x, dtype=float)
    gw = np.asarray(gl_w, dtype=float)
    while heap and remaining:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        remaining.discard(v)
        u2, lu = divmod(v, nz)
        tu = touch[v]
        z0 = zs[lu]
        for dl in (-1, 0, 1):
            lv = lu + dl
            if lv < 0 or lv >= nz:
                continue
            z1 = zs[lv]
            dz = z1 - z0
            # pure vertical move
            if dl != 0:
                w = abs(dz) * log_k
                _relax(heap, dist, touch, done, u2 * nz + lv, d + w, tu or bool(boundary[u2 * nz + lv]))
            for e in range(indptr[u2], indptr[u2 + 1]):
                w2 = int(indices[e])
                if blocked[w2]:
                    continue
                a, b = eX[e], eY[e]
                if dl == 0:
                    ez = math.exp(log_k * z0)
                    w = math.sqrt((ez * a) ** 2 + (b / ez) ** 2)
                else:
                    zz = 0.5 * (z0 + z1) + 0.5 * dz * gx
                    ez = np.exp(log_k * zz)
                    w = 0.5 * float(np.dot(gw, np.sqrt((ez * a) ** 2 + (b / ez) ** 2 + (log_k * dz) ** 2)))
                _relax(heap, dist, touch, done, w2 * nz + lv, d + w, tu or bool(boundary[w2 * nz + lv]))
    out = np.array([dist.get(int(t), INF) if int(t) in done else INF for t in targets])
    tch = np.array([touch.get(int(t), False) for t in targets], dtype=bool)
    return out, tch


def _relax(heap, dist, touch, done, v, nd, t):
    if v in done:
        return
    old = dist.get(v)
    if old is None or nd < old:
        dist[v] = nd
        touch[v] = t
        heapq.heappush(heap, (nd, v))



def leaf_distances(frames, leaf_inv, cap, tol=1e-10):
    """Distance in the unit tangent bundle from each frame to the nearest
    lifted leaf, or ``cap`` when no leaf is closer.

    ``frames`` and ``leaf_inv`` are ``(n, 4)`` and ``(m, 4)`` arrays of matrix
    entries ``a, b, c, d``; row ``j`` of ``leaf_inv`` is the inverse of a frame
    tangent to oriented leaf ``j`` so the leaf becomes the upward vertical
    axis.  Returns ``(dist, index)`` with index -1 for capped entries.
    """
    from .hyp2 import Frame, axis_distance

    frames = np.asarray(frames, dtype=float)
    L = np.asarray(leaf_inv, dtype=float)
    n = len(frames)
    dist = np.full(n, float(cap))
    arg = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        a, b, c, d = frames[i]
        # h = L_j v, basepoint h·i; distance of the basepoint to the axis
        ha = L[:, 0] * a + L[:, 1] * c
        hb = L[:, 0] * b + L[:, 1] * d
        hc = L[:, 2] * a + L[:, 3] * c
        hd = L[:, 2] * b + L[:, 3] * d
        den = hc * hc + hd * hd
        re = (ha * hc + hb * hd) / den
        im = 1.0 / den
        lb = np.arcsinh(np.abs(re) / im)
        best = dist[i]
        for j in np.argsort(lb, kind="stable"):
            if lb[j] >= best:
                break
            v = axis_distance(Frame(ha[j], hb[j], hc[j], hd[j]), tol)
            if v < best:
                best = v
                arg[i] = j
        dist[i] = best
    return dist, arg
