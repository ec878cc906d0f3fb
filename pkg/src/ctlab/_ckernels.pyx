# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the functions in _pykernels."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, fabs, log, acos, acosh, asinh, atan2, fmod, hypot, M_PI, INFINITY
from libcpp.queue cimport priority_queue
from libcpp.pair cimport pair
from libcpp.vector cimport vector

cnp.import_array()

DEF RIGHT = 0
DEF UP = 1
DEF LEFT = 2
DEF DOWN = 3


def trace_integer_line(long s, double x0, double y0, long p, long q, double c,
                       cnp.int64_t[:] nxt, cnp.int64_t[:] let, long limit=-1):
    cdef long sp = 1 if p > 0 else (-1 if p < 0 else 0)
    cdef long sq = 1 if q > 0 else (-1 if q < 0 else 0)
    cdef long mv = 1 if p > 0 else 0
    cdef long mh = 1 if q > 0 else 0
    cdef long ox = 0, oy = 0
    cdef long nv = p if p >= 0 else -p
    cdef long nh = q if q >= 0 else -q
    cdef long total = nv + nh, i, d, code
    cdef bint vert
    cdef double lhs, rhs
    cdef vector[signed char] out
    if limit >= 0 and limit < total:
        total = limit
    out.reserve(total)
    for i in range(total):
        if nv == 0:
            vert = False
        elif nh == 0:
            vert = True
        else:
            lhs = <double>(sp * sq * (q * (mv + ox) - p * (mh + oy)))
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
            out.push_back(code)
        s = nxt[4 * s + d]
    res = np.empty(out.size(), dtype=np.int8)
    cdef cnp.int8_t[:] rv = res
    for i in range(<long>out.size()):
        rv[i] = out[i]
    return res


def trace_corner_line(long s, long x0, long y0, long p, long q,
                      cnp.int64_t[:] nxt, cnp.int64_t[:] let):
    cdef long sp = 1 if p > 0 else (-1 if p < 0 else 0)
    cdef long sq = 1 if q > 0 else (-1 if q < 0 else 0)
    cdef long ap = p if p >= 0 else -p
    cdef long aq = q if q >= 0 else -q
    cdef long ox = 0, oy = 0, jv = 1, jh = 1
    cdef long nv = ap - 1 if p != 0 else 0
    cdef long nh = aq - 1 if q != 0 else 0
    cdef long d, code, a, b, i
    cdef bint vert
    cdef vector[long] out
    while nv > 0 or nh > 0:
        if nv == 0:
            vert = False
        elif nh == 0:
            vert = True
        else:
            a = jv * aq
            b = jh * ap
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
            out.push_back(code)
        s = nxt[4 * s + d]
    res = np.empty(out.size(), dtype=np.int64)
    cdef cnp.int64_t[:] rv = res
    for i in range(<long>out.size()):
        rv[i] = out[i]
    return res, s, x0 + p - ox, y0 + q - oy


ctypedef pair[double, long] entry


def dijkstra_layered(cnp.int64_t[:] indptr, cnp.int64_t[:] indices,
                     double[:] eX, double[:] eY, double[:] zs, double log_k,
                     double[:] gl_x, double[:] gl_w,
                     long src_node, long src_layer, cnp.int64_t[:] targets,
                     cnp.uint8_t[:] boundary, cnp.uint8_t[:] blocked):
    cdef long nz = zs.shape[0]
    cdef long n2 = indptr.shape[0] - 1
    cdef long N = n2 * nz
    cdef long ng = gl_x.shape[0]
    cdef long i, g, v, u2, lu, lv, dl, e, w2, lo, nt = targets.shape[0]
    cdef double d, w, a, b, dz, ez, s, z0, ee
    dist_arr = np.full(N, INFINITY)
    done_arr = np.zeros(N, dtype=np.uint8)
    touch_arr = np.zeros(N, dtype=np.uint8)
    want_arr = np.zeros(N, dtype=np.uint8)
    cdef double[:] distv = dist_arr
    cdef cnp.uint8_t[:] donev = done_arr
    cdef cnp.uint8_t[:] touchv = touch_arr
    cdef cnp.uint8_t[:] want = want_arr
    cdef double* dist = &distv[0]
    cdef cnp.uint8_t* done = &donev[0]
    cdef cnp.uint8_t* touch = &touchv[0]
    # exp(log_k z) at layer values and at GL nodes between layers l, l+1
    ezl_arr = np.exp(log_k * np.asarray(zs))
    cdef double[:] ezl = ezl_arr
    eg_arr = np.ones((max(nz - 1, 1), ng))
    cdef double[:, :] eg = eg_arr
    for lo in range(nz - 1):
        for g in range(ng):
            eg[lo, g] = exp(log_k * (0.5 * (zs[lo] + zs[lo + 1]) + 0.5 * (zs[lo + 1] - zs[lo]) * gl_x[g]))
    cdef long remaining = 0
    for i in range(nt):
        if not want[targets[i]]:
            want[targets[i]] = 1
            remaining += 1
    cdef priority_queue[entry] pq
    cdef long src = src_node * nz + src_layer
    dist[src] = 0.0
    touch[src] = boundary[src]
    pq.push(entry(-0.0, src))
    cdef cnp.uint8_t tu
    while not pq.empty() and remaining > 0:
        d = -pq.top().first
        v = pq.top().second
        pq.pop()
        if done[v]:
            continue
        done[v] = 1
        if want[v]:
            remaining -= 1
        u2 = v // nz
        lu = v - u2 * nz
        tu = touch[v]
        z0 = zs[lu]
        for dl in range(-1, 2):
            lv = lu + dl
            if lv < 0 or lv >= nz:
                continue
            if dl != 0:
                dz = zs[lv] - z0
                w = fabs(dz) * log_k
                _relax(pq, dist, touch, done, u2 * nz + lv, d + w, tu | boundary[u2 * nz + lv])
                lo = lu if dl > 0 else lv
            for e in range(indptr[u2], indptr[u2 + 1]):
                w2 = indices[e]
                if blocked[w2]:
                    continue
                a = eX[e]
                b = eY[e]
                if dl == 0:
                    ez = ezl[lu]
                    w = sqrt((ez * a) * (ez * a) + (b / ez) * (b / ez))
                else:
                    s = 0.0
                    for g in range(ng):
                        ee = eg[lo, g]
                        s += gl_w[g] * sqrt((ee * a) * (ee * a) + (b / ee) * (b / ee) + (log_k * dz) * (log_k * dz))
                    w = 0.5 * s
                _relax(pq, dist, touch, done, w2 * nz + lv, d + w, tu | boundary[w2 * nz + lv])
    out = np.empty(nt)
    tch = np.zeros(nt, dtype=bool)
    for i in range(nt):
        out[i] = dist[targets[i]] if done[targets[i]] else INFINITY
        tch[i] = touch[targets[i]] != 0
    return out, tch


cdef inline void _relax(priority_queue[entry]& pq, double* dist, cnp.uint8_t* touch,
                        cnp.uint8_t* done, long v, double nd, cnp.uint8_t t) noexcept:
    if done[v]:
        return
    if nd < dist[v]:
        dist[v] = nd
        touch[v] = t
        pq.push(entry(-nd, v))


cdef double GOLDEN = 0.5 * (sqrt(5.0) - 1.0)


cdef inline double _lognorm(double a, double b, double c, double d) noexcept:
    cdef double tr = a + d, h, m00, nrm, e, coef
    if tr < 0:
        a = -a; b = -b; c = -c; d = -d; tr = -tr
    h = 0.5 * tr
    m00 = a - h
    nrm = sqrt(4.0 * m00 * m00 + 2.0 * b * b + 2.0 * c * c)
    e = h - 1.0
    if fabs(e) < 1e-8:
        coef = 1.0 - e / 3.0
    elif h > 1.0:
        coef = acosh(h) / sqrt(h * h - 1.0)
    else:
        coef = acos(h) / sqrt(1.0 - h * h)
    return coef * nrm


cdef inline double _chart(double a, double b, double c, double d) noexcept:
    cdef double den = c * c + d * d
    cdef double wx = (a * c + b * d) / den
    cdef double wy = 1.0 / den
    cdef double r = 2.0 * asinh(hypot(wx, wy - 1.0) / (2.0 * sqrt(wy)))
    cdef double p00 = a * a + b * b + 1.0
    cdef double p01 = a * c + b * d
    cdef double p11 = c * c + d * d + 1.0
    cdef double s = sqrt(p00 + p11)
    cdef double r00 = (p11 * a - p01 * c) / s
    cdef double r10 = (-p01 * a + p00 * c) / s
    cdef double alpha = atan2(r10, r00)
    cdef double psi = fmod(2.0 * alpha, 2.0 * M_PI)
    if psi > M_PI:
        psi -= 2.0 * M_PI
    elif psi < -M_PI:
        psi += 2.0 * M_PI
    return r + fabs(psi)


cdef inline double _objective(double ia, double ib, double ic, double id_, double s) noexcept:
    cdef double e = exp(0.5 * s)
    cdef double a = ia * e, b = ib / e, c = ic * e, d = id_ / e
    cdef double u = _lognorm(a, b, c, d), v = _chart(a, b, c, d)
    return u if u < v else v


cdef double _axis_distance(double a, double b, double c, double d, double tol) except? -1.0:
    # inverse of h
    cdef double ia = d, ib = -b, ic = -c, id_ = a
    cdef double den = c * c + d * d
    cdef double wr = (a * c + b * d) / den, wi = 1.0 / den
    cdef double s0 = 0.5 * log(wr * wr + wi * wi)
    cdef double f0 = _objective(ia, ib, ic, id_, s0)
    cdef double lo = s0 - f0, hi = s0 + f0, step, v, best_v, left, right, x1, x2, f1, f2
    cdef int scan = 16, j, best_j = 0, it = 0
    if hi - lo < tol:
        return f0
    step = (hi - lo) / scan
    best_v = INFINITY
    for j in range(scan + 1):
        v = _objective(ia, ib, ic, id_, lo + j * step)
        if v < best_v:
            best_j = j
            best_v = v
    left = lo + (best_j - 1 if best_j > 0 else 0) * step
    right = lo + (best_j + 1 if best_j < scan else scan) * step
    x1 = right - GOLDEN * (right - left)
    x2 = left + GOLDEN * (right - left)
    f1 = _objective(ia, ib, ic, id_, x1)
    f2 = _objective(ia, ib, ic, id_, x2)
    while right - left > tol:
        it += 1
        if it > 200:
            raise RuntimeError("golden-section search did not converge")
        if f1 <= f2:
            right = x2; x2 = x1; f2 = f1
            x1 = right - GOLDEN * (right - left)
            f1 = _objective(ia, ib, ic, id_, x1)
        else:
            left = x1; x1 = x2; f1 = f2
            x2 = left + GOLDEN * (right - left)
            f2 = _objective(ia, ib, ic, id_, x2)
    v = f1 if f1 <= f2 else f2
    return best_v if best_v < v else v


def leaf_distances(double[:, :] frames, double[:, :] leaf_inv, double cap, double tol=1e-10):
    cdef long n = frames.shape[0], m = leaf_inv.shape[0], i, j, jmin
    dist_arr = np.full(n, cap)
    arg_arr = np.full(n, -1, dtype=np.int64)
    lb_arr = np.empty(m)
    cdef double[:] dist = dist_arr
    cdef cnp.int64_t[:] arg = arg_arr
    cdef double[:] lb = lb_arr
    cdef double a, b, c, d, ha, hb, hc, hd, den, re, im, best, v, lmin
    for i in range(n):
        a = frames[i, 0]; b = frames[i, 1]; c = frames[i, 2]; d = frames[i, 3]
        best = cap
        lmin = INFINITY
        jmin = -1
        for j in range(m):
            ha = leaf_inv[j, 0] * a + leaf_inv[j, 1] * c
            hb = leaf_inv[j, 0] * b + leaf_inv[j, 1] * d
            hc = leaf_inv[j, 2] * a + leaf_inv[j, 3] * c
            hd = leaf_inv[j, 2] * b + leaf_inv[j, 3] * d
            den = hc * hc + hd * hd
            re = (ha * hc + hb * hd) / den
            im = 1.0 / den
            lb[j] = asinh(fabs(re) / im)
            if lb[j] < lmin:
                lmin = lb[j]
                jmin = j
        # the leaf with the closest basepoint first, then any other candidate
        if jmin >= 0 and lmin < best:
            v = _leaf_one(leaf_inv, jmin, a, b, c, d, tol)
            if v < best:
                best = v
                arg[i] = jmin
        for j in range(m):
            if j == jmin or lb[j] >= best:
                continue
            v = _leaf_one(leaf_inv, j, a, b, c, d, tol)
            if v < best:
                best = v
                arg[i] = j
        dist[i] = best
    return dist_arr, arg_arr


cdef inline double _leaf_one(double[:, :] L, long j, double a, double b, double c, double d, double tol) except? -1.0:
    return _axis_distance(L[j, 0] * a + L[j, 1] * c, L[j, 0] * b + L[j, 1] * d,
                          L[j, 2] * a + L[j, 3] * c, L[j, 2] * b + L[j, 3] * d, tol)
