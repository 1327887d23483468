"""Compiled numeric kernels.

Everything here works on plain floats and numpy arrays so it can be jitted.
Segment rows use the column layout ``x0, y0, theta0, kappa0, sigma, direction,
length``.
"""

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
# largest heading change a single turn may take in the steering search
MAX_TURN = 1.5 * math.pi
_FPMIN = 1.0e-300
_EPS = 1.0e-16
_XMIN = 1.5
_MAXIT = 200

X0, Y0, TH0, K0, SIG, DIR, LEN = range(7)


@njit(cache=True)
def wrap(a):
    a = a - TWO_PI * math.floor(a / TWO_PI)
    if a > math.pi:
        a -= TWO_PI
    elif a <= -math.pi:
        a += TWO_PI
    return a


@njit(cache=True)
def fresnel_scalar(x):
    """Return (C(x), S(x)) with the pi/2 normalisation."""
    ax = abs(x)
    if ax < 1.0e-150:
        c = ax
        s = 0.0
    elif ax <= _XMIN:
        # alternating power series, terms shared between C and S
        total = 0.0
        sums = 0.0
        sumc = ax
        sign = 1.0
        fact = 0.5 * math.pi * ax * ax
        odd = True
        term = ax
        n = 3
        for k in range(1, _MAXIT + 1):
            term *= fact / k
            total += sign * term / n
            test = abs(total) * _EPS
            if odd:
                sign = -sign
                sums = total
                total = sumc
            else:
                sumc = total
                total = sums
            if term < test:
                break
            odd = not odd
            n += 2
        s = sums
        c = sumc
    else:
        # continued fraction for the complementary error function (modified Lentz)
        pix2 = math.pi * ax * ax
        b = complex(1.0, -pix2)
        cc = complex(1.0 / _FPMIN, 0.0)
        d = 1.0 / b
        h = d
        n = -1
        for _ in range(2, _MAXIT + 1):
            n += 2
            a = -float(n * (n + 1))
            b = b + 4.0
            d = 1.0 / (a * d + b)
            cc = b + a / cc
            delta = cc * d
            h = h * delta
            if abs(delta.real - 1.0) + abs(delta.imag) < _EPS:
                break
        h = complex(ax, -ax) * h
        cs = complex(0.5, 0.5) * (1.0 - complex(math.cos(0.5 * pix2), math.sin(0.5 * pix2)) * h)
        c = cs.real
        s = cs.imag
    if x < 0.0:
        return -c, -s
    return c, s


@njit(cache=True)
def fresnel_array(xs):
    c = np.empty(xs.shape[0])
    s = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        c[i], s[i] = fresnel_scalar(xs[i])
    return c, s


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@njit(cache=True)
def _sinc(x):
    if abs(x) < 1.0e-4:
        return 1.0 - x * x / 6.0
    return math.sin(x) / x


@njit(cache=True)
def _heading_integrals(th0, b, a, s):
    """Integrals of cos/sin of th0 + b*u + a*u**2 over u in [0, s]."""
    if a == 0.0 or abs(a) < 1.0e-13:
        if abs(b) < 1.0e-4:
            # the difference quotient below cancels badly for small b
            h = 0.5 * b * s
            w = s * _sinc(h)
            return w * math.cos(th0 + h), w * math.sin(th0 + h)
        th1 = th0 + b * s
        return (math.sin(th1) - math.sin(th0)) / b, (math.cos(th0) - math.cos(th1)) / b
    if abs(a) < 1.0e-6:
        # nearly straight heading: the Fresnel form divides by sqrt(a), so
        # integrate the smooth phase with Gauss-Legendre instead
        ic = 0.0
        is_ = 0.0
        for i in range(_GL_X.shape[0]):
            u = 0.5 * s * (_GL_X[i] + 1.0)
            th = th0 + b * u + a * u * u
            ic += _GL_W[i] * math.cos(th)
            is_ += _GL_W[i] * math.sin(th)
        return 0.5 * s * ic, 0.5 * s * is_
    flip = a < 0.0
    if flip:
        th0, b, a = -th0, -b, -a
    c = b / (2.0 * a)
    phic = th0 - a * c * c
    scale = math.sqrt(2.0 * a / math.pi)
    c0, s0 = fresnel_scalar(scale * c)
    c1, s1 = fresnel_scalar(scale * (s + c))
    dc = c1 - c0
    ds = s1 - s0
    f = 1.0 / scale
    cp = math.cos(phic)
    sp = math.sin(phic)
    ic = f * (cp * dc - sp * ds)
    is_ = f * (sp * dc + cp * ds)
    if flip:
        is_ = -is_
    return ic, is_


@njit(cache=True)
def seg_point(x0, y0, th0, k0, sig, d, s):
    """Pose after driving arc length ``s`` along a constant-sharpness segment."""
    b = d * k0
    a = 0.5 * d * sig
    ic, is_ = _heading_integrals(th0, b, a, s)
    return x0 + d * ic, y0 + d * is_, th0 + b * s + a * s * s, k0 + sig * s


@njit(cache=True)
def sample_segments(segs, ds):
    """Sample every segment at s = 0, ds, ..., length (end always included).

    Returns an (N, 6) array of ``s_path, x, y, theta, kappa, direction``.
    """
    total = 0
    for i in range(segs.shape[0]):
        n = int(math.floor(segs[i, LEN] / ds + 1e-9))
        if n * ds < segs[i, LEN] - 1e-12:
            n += 1
        total += n + 1
    out = np.empty((total, 6))
    row = 0
    s_base = 0.0
    for i in range(segs.shape[0]):
        length = segs[i, LEN]
        n = int(math.floor(length / ds + 1e-9))
        if n * ds < length - 1e-12:
            n += 1
        for j in range(n + 1):
            s = min(j * ds, length)
            x, y, th, k = seg_point(segs[i, X0], segs[i, Y0], segs[i, TH0], segs[i, K0],
                                    segs[i, SIG], segs[i, DIR], s)
            out[row, 0] = s_base + s
            out[row, 1] = x
            out[row, 2] = y
            out[row, 3] = wrap(th)
            out[row, 4] = k
            out[row, 5] = segs[i, DIR]
            row += 1
        s_base += length
    return out


# ---------------------------------------------------------------- collision


@njit(cache=True)
def _project(px, py, n, ax, ay):
    lo = 1e300
    hi = -1e300
    for i in range(n):
        v = px[i] * ax + py[i] * ay
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    return lo, hi


@njit(cache=True)
def _overlap_on_axes(ax_x, ax_y, ay_x, ay_y, n_a, bx_, by_, n_b, ex, ey, n_e):
    # axes are the edge normals of polygon (ex, ey); False if any separates
    for i in range(n_e):
        j = (i + 1) % n_e
        nx = -(ey[j] - ey[i])
        ny = ex[j] - ex[i]
        if nx == 0.0 and ny == 0.0:
            continue
        lo1, hi1 = _project(ax_x, ax_y, n_a, nx, ny)
        lo2, hi2 = _project(bx_, by_, n_b, nx, ny)
        if hi1 < lo2 or hi2 < lo1:
            return False
    return True


@njit(cache=True)
def polygons_intersect(px, py, n_p, qx, qy, n_q):
    """Separating-axis test for closed convex polygons (touching intersects)."""
    if not _overlap_on_axes(px, py, 0.0, 0.0, n_p, qx, qy, n_q, px, py, n_p):
        return False
    if not _overlap_on_axes(px, py, 0.0, 0.0, n_p, qx, qy, n_q, qx, qy, n_q):
        return False
    return True


@njit(cache=True)
def first_collision(poses, corners, obs_x, obs_y, obs_n, obs_box, obs_ids, bounds):
    """Index of the first pose whose footprint is not free, or -1.

    ``poses`` is (N, >=3) with x, y, theta in columns 0..2 (offset given by caller
    slicing). ``obs_box`` holds xmin, ymin, xmax, ymax per obstacle and ``obs_ids``
    the subset of obstacles worth testing.
    """
    fx = np.empty(4)
    fy = np.empty(4)
    for i in range(poses.shape[0]):
        x = poses[i, 0]
        y = poses[i, 1]
        c = math.cos(poses[i, 2])
        s = math.sin(poses[i, 2])
        xmin = 1e300
        xmax = -1e300
        ymin = 1e300
        ymax = -1e300
        for k in range(4):
            fx[k] = x + c * corners[k, 0] - s * corners[k, 1]
            fy[k] = y + s * corners[k, 0] + c * corners[k, 1]
            xmin = min(xmin, fx[k])
            xmax = max(xmax, fx[k])
            ymin = min(ymin, fy[k])
            ymax = max(ymax, fy[k])
        if xmin < bounds[0] or ymin < bounds[1] or xmax > bounds[2] or ymax > bounds[3]:
            return i
        for m in range(obs_ids.shape[0]):
            o = obs_ids[m]
            if xmax < obs_box[o, 0] or xmin > obs_box[o, 2] or ymax < obs_box[o, 1] or ymin > obs_box[o, 3]:
                continue
            n = obs_n[o]
            if polygons_intersect(fx, fy, 4, obs_x[o, :n], obs_y[o, :n], n):
                return i
    return -1


@njit(cache=True)
def segments_first_collision(segs, ds, corners, obs_x, obs_y, obs_n, obs_box, obs_ids, bounds):
    """Sample segment rows like :func:`sample_segments` and stop at the first hit.

    Returns the sample index of the first non-free pose, or -1. Sampling and
    testing are interleaved, so a collision near the start costs little.
    """
    pose = np.empty((1, 3))
    row = 0
    for i in range(segs.shape[0]):
        length = segs[i, LEN]
        n = int(math.floor(length / ds + 1e-9))
        if n * ds < length - 1e-12:
            n += 1
        for j in range(n + 1):
            s = min(j * ds, length)
            x, y, th, _ = seg_point(segs[i, X0], segs[i, Y0], segs[i, TH0], segs[i, K0],
                                    segs[i, SIG], segs[i, DIR], s)
            pose[0, 0] = x
            pose[0, 1] = y
            pose[0, 2] = wrap(th)
            if first_collision(pose, corners, obs_x, obs_y, obs_n, obs_box, obs_ids, bounds) >= 0:
                return row
            row += 1
    return -1


@njit(cache=True)
def _point_segment_dist(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    den = dx * dx + dy * dy
    t = 0.0
    if den > 0.0:
        t = ((px - ax) * dx + (py - ay) * dy) / den
        t = min(1.0, max(0.0, t))
    ex = ax + t * dx - px
    ey = ay + t * dy - py
    return math.sqrt(ex * ex + ey * ey)


@njit(cache=True)
def polygon_distance(px, py, n_p, qx, qy, n_q):
    """Euclidean distance between two convex polygons (0 when they meet)."""
    if polygons_intersect(px, py, n_p, qx, qy, n_q):
        return 0.0
    best = 1e300
    for i in range(n_p):
        for j in range(n_q):
            jj = (j + 1) % n_q
            best = min(best, _point_segment_dist(px[i], py[i], qx[j], qy[j], qx[jj], qy[jj]))
    for j in range(n_q):
        for i in range(n_p):
            ii = (i + 1) % n_p
            best = min(best, _point_segment_dist(qx[j], qy[j], px[i], py[i], px[ii], py[ii]))
    return best


# ---------------------------------------------------------------- steering


@njit(cache=True)
def turn_length(phi, kmax, smax):
    a = abs(phi)
    dmin = kmax * kmax / smax
    if a < dmin:
        return 2.0 * math.sqrt(a / smax)
    return 2.0 * kmax / smax + (a - dmin) / kmax


@njit(cache=True)
def turn_displacement(phi, kmax, smax):
    """Displacement of a forward symmetric turn changing heading by ``phi``.

    Clothoid up, optional arc at kmax, clothoid down. Below the minimum
    deflection kmax**2/smax the arc vanishes and the peak curvature drops.
    """
    a = abs(phi)
    if a < 1e-15:
        return 0.0, 0.0
    dmin = kmax * kmax / smax
    if a < dmin:
        l = math.sqrt(a / smax)
    else:
        l = kmax / smax
    xe, ye, te, ke = seg_point(0.0, 0.0, 0.0, 0.0, smax, 1.0, l)
    dlx = xe * math.cos(te) + ye * math.sin(te)
    dly = xe * math.sin(te) - ye * math.cos(te)
    if a < dmin:
        px, py, tp = xe, ye, te
    else:
        beta = a - dmin
        tp = te + beta
        px = xe + (math.sin(tp) - math.sin(te)) / kmax
        py = ye - (math.cos(tp) - math.cos(te)) / kmax
    cp = math.cos(tp)
    sp = math.sin(tp)
    tx = px + cp * dlx - sp * dly
    ty = py + sp * dlx + cp * dly
    if phi < 0.0:
        ty = -ty
    return tx, ty


@njit(cache=True)
def turn_table(kmax, smax, n):
    phis = np.linspace(-TWO_PI, TWO_PI, n)
    tx = np.empty(n)
    ty = np.empty(n)
    for i in range(n):
        tx[i], ty[i] = turn_displacement(phis[i], kmax, smax)
    return phis, tx, ty


@njit(cache=True)
def _interp_turn(phi, tx, ty, n):
    h = 2.0 * TWO_PI / (n - 1)
    u = (phi + TWO_PI) / h
    i = int(math.floor(u))
    if i < 0:
        i = 0
    if i > n - 2:
        i = n - 2
    w = u - i
    return tx[i] * (1.0 - w) + tx[i + 1] * w, ty[i] * (1.0 - w) + ty[i + 1] * w


@njit(cache=True)
def _residual(phi1, c, bx, by, d1, d2, kmax, smax, tx, ty, n, exact):
    phi2 = c - phi1
    if exact:
        t1x, t1y = turn_displacement(phi1, kmax, smax)
        t2x, t2y = turn_displacement(phi2, kmax, smax)
    else:
        t1x, t1y = _interp_turn(phi1, tx, ty, n)
        t2x, t2y = _interp_turn(phi2, tx, ty, n)
    c1 = math.cos(phi1)
    s1 = math.sin(phi1)
    rx = bx - d1 * t1x - d2 * (c1 * t2x - s1 * t2y)
    ry = by - d1 * t1y - d2 * (s1 * t2x + c1 * t2y)
    # cross(u, r) and dot(u, r) with u the straight's heading
    return c1 * ry - s1 * rx, c1 * rx + s1 * ry


@njit(cache=True)
def _switches(dirs, n):
    count = 0
    last = 0.0
    for i in range(n):
        if dirs[i] == 0.0:
            continue
        if last != 0.0 and dirs[i] != last:
            count += 1
        last = dirs[i]
    return count


@njit(cache=True)
def _candidate_ok(pre_dir, d1, phi1, L, d2, phi2, suf_dir, max_sw, eps):
    dirs = np.zeros(5)
    dirs[0] = pre_dir
    if abs(phi1) > eps:
        dirs[1] = d1
    if abs(L) > eps:
        dirs[2] = 1.0 if L > 0.0 else -1.0
    if abs(phi2) > eps:
        dirs[3] = d2
    dirs[4] = suf_dir
    return _switches(dirs, 5) <= max_sw


@njit(cache=True)
def _refine(lo, hi, flo, fhi, c, bx, by, d1, d2, kmax, smax, tx, ty, n):
    # Illinois false position on the exact residual
    side = 0
    x = lo
    for _ in range(100):
        x = (lo * fhi - hi * flo) / (fhi - flo)
        fx, _ = _residual(x, c, bx, by, d1, d2, kmax, smax, tx, ty, n, True)
        if fx == 0.0 or abs(hi - lo) < 1e-15:
            break
        if (fx > 0.0) == (fhi > 0.0):
            hi = x
            fhi = fx
            if side == 1:
                flo *= 0.5
            side = 1
        else:
            lo = x
            flo = fx
            if side == -1:
                fhi *= 0.5
            side = -1
        if abs(fx) < 1e-14:
            break
    return x


@njit(cache=True)
def solve_middle(bx, by, bth, pre_dir, suf_dir, max_sw, kmax, smax, tx, ty, n, grid_step, max_len):
    """Shortest turn-straight-turn connection from the origin to (bx, by, bth).

    Both ends have zero curvature. Returns (length, d1, phi1, L, d2, phi2) with
    length = inf when no candidate satisfies the direction-switch limit or
    every candidate is longer than ``max_len``.
    """
    # a turn of heading change phi is at least |phi| / kmax long
    budget = max_len * kmax
    eps = 1e-10
    # anything longer than the budget is useless, so it prunes like a found solution
    best = max_len + 1e-9
    best_sol = np.zeros(6)
    best_sol[0] = np.inf
    delta = wrap(bth)
    ncand_max = 6
    cand = np.zeros((ncand_max, 6))  # approx_len, lo, hi, c, d1, d2
    for d1i in range(2):
        d1 = 1.0 if d1i == 0 else -1.0
        for d2i in range(2):
            d2 = 1.0 if d2i == 0 else -1.0
            ncand = 0
            for k in range(-2, 3):
                c = delta + TWO_PI * k
                if abs(c) > budget:
                    continue
                lo_r = max(-MAX_TURN, c - MAX_TURN, 0.5 * (c - budget))
                hi_r = min(MAX_TURN, c + MAX_TURN, 0.5 * (c + budget))
                if hi_r - lo_r < 1e-12:
                    continue
                # exact degenerate roots: one of the turns vanishes
                for special in range(2):
                    p = 0.0 if special == 0 else c
                    if p < lo_r or p > hi_r:
                        continue
                    # the table residual is within 0.1 of the exact one (worst near phi = 0); screen with it
                    fz, lz = _residual(p, c, bx, by, d1, d2, kmax, smax, tx, ty, n, False)
                    if abs(fz) > 0.25:
                        continue
                    fz, lz = _residual(p, c, bx, by, d1, d2, kmax, smax, tx, ty, n, True)
                    if abs(fz) < 1e-11 and _candidate_ok(pre_dir, d1, p, lz, d2, c - p, suf_dir, max_sw, eps):
                        total = turn_length(p, kmax, smax) + abs(lz) + turn_length(c - p, kmax, smax)
                        if total < best:
                            best = total
                            best_sol[0] = total
                            best_sol[1] = d1
                            best_sol[2] = p
                            best_sol[3] = lz
                            best_sol[4] = d2
                            best_sol[5] = c - p
                m = int(math.ceil((hi_r - lo_r) / grid_step)) + 1
                h = (hi_r - lo_r) / (m - 1)
                prev_p = lo_r
                prev_f, prev_l = _residual(lo_r, c, bx, by, d1, d2, kmax, smax, tx, ty, n, False)
                for i in range(1, m):
                    p = lo_r + i * h
                    f, l = _residual(p, c, bx, by, d1, d2, kmax, smax, tx, ty, n, False)
                    if (prev_f <= 0.0 < f) or (prev_f >= 0.0 > f) or (prev_f > 0.0 >= f) or (prev_f < 0.0 <= f):
                        w = prev_f / (prev_f - f) if prev_f != f else 0.0
                        pr = prev_p + w * (p - prev_p)
                        lr = prev_l + w * (l - prev_l)
                        approx = turn_length(pr, kmax, smax) + abs(lr) + turn_length(c - pr, kmax, smax)
                        if approx < best + 0.5:
                            # keep the few shortest brackets
                            slot = -1
                            if ncand < ncand_max:
                                slot = ncand
                                ncand += 1
                            else:
                                worst = 0
                                for q in range(1, ncand_max):
                                    if cand[q, 0] > cand[worst, 0]:
                                        worst = q
                                if cand[worst, 0] > approx:
                                    slot = worst
                            if slot >= 0:
                                cand[slot, 0] = approx
                                cand[slot, 1] = prev_p
                                cand[slot, 2] = p
                                cand[slot, 3] = c
                                cand[slot, 4] = d1
                                cand[slot, 5] = d2
                    prev_p = p
                    prev_f = f
                    prev_l = l
            for q in range(ncand):
                if cand[q, 0] > best + 0.5:
                    continue
                lo = cand[q, 1]
                hi = cand[q, 2]
                c = cand[q, 3]
                flo, _ = _residual(lo, c, bx, by, d1, d2, kmax, smax, tx, ty, n, True)
                fhi, _ = _residual(hi, c, bx, by, d1, d2, kmax, smax, tx, ty, n, True)
                if flo == 0.0:
                    root = lo
                elif fhi == 0.0:
                    root = hi
                elif (flo > 0.0) == (fhi > 0.0):
                    continue
                else:
                    root = _refine(lo, hi, flo, fhi, c, bx, by, d1, d2, kmax, smax, tx, ty, n)
                fr, lr = _residual(root, c, bx, by, d1, d2, kmax, smax, tx, ty, n, True)
                if abs(fr) > 1e-9:
                    continue
                phi2 = c - root
                if not _candidate_ok(pre_dir, d1, root, lr, d2, phi2, suf_dir, max_sw, eps):
                    continue
                total = turn_length(root, kmax, smax) + abs(lr) + turn_length(phi2, kmax, smax)
                if total < best:
                    best = total
                    best_sol[0] = total
                    best_sol[1] = d1
                    best_sol[2] = root
                    best_sol[3] = lr
                    best_sol[4] = d2
                    best_sol[5] = phi2
    return best_sol


@njit(cache=True)
def _append(segs, row, x, y, th, k, sig, d, length):
    segs[row, X0] = x
    segs[row, Y0] = y
    segs[row, TH0] = th
    segs[row, K0] = k
    segs[row, SIG] = sig
    segs[row, DIR] = d
    segs[row, LEN] = length
    x1, y1, th1, k1 = seg_point(x, y, th, k, sig, d, length)
    return row + 1, x1, y1, th1, k1


@njit(cache=True)
def _append_turn(segs, row, x, y, th, d, phi, kmax, smax):
    a = abs(phi)
    # same cut-off as turn_displacement so emitted segments match the solver
    if a < 1e-15:
        return row, x, y, th
    sgn = 1.0 if phi > 0.0 else -1.0
    dmin = kmax * kmax / smax
    # heading change per unit length is d*kappa, so the curvature sign is sgn*d
    ks = sgn * d
    if a < dmin:
        l = math.sqrt(a / smax)
        row, x, y, th, k = _append(segs, row, x, y, th, 0.0, ks * smax, d, l)
        row, x, y, th, k = _append(segs, row, x, y, th, k, -ks * smax, d, l)
    else:
        l = kmax / smax
        row, x, y, th, k = _append(segs, row, x, y, th, 0.0, ks * smax, d, l)
        arc = (a - dmin) / kmax
        if arc > 1e-12:
            row, x, y, th, k = _append(segs, row, x, y, th, ks * kmax, 0.0, d, arc)
        row, x, y, th, k = _append(segs, row, x, y, th, ks * kmax, -ks * smax, d, l)
    return row, x, y, th


@njit(cache=True)
def cc_steer_kernel(fx, fy, fth, fk, gx, gy, gth, gk, kmax, smax, max_sw, tx, ty, n, grid_step, max_len,
                    end_tol):
    """Continuous-curvature connection between two poses.

    Returns an (m, 7) segment array (m = 0 when unreachable or identical) and a
    status flag (1 connected, 0 none). Connections longer than ``max_len`` are
    not searched for (pass inf for no limit); a connection whose end misses
    the goal by more than ``end_tol`` (position or heading) counts as none.
    """
    empty = np.zeros((0, 7))
    if (abs(fx - gx) < 1e-12 and abs(fy - gy) < 1e-12 and abs(wrap(fth - gth)) < 1e-12
            and abs(fk - gk) < 1e-12):
        return empty, 1
    pre_opts = np.array([1.0, -1.0]) if abs(fk) > 1e-12 else np.array([0.0])
    suf_opts = np.array([1.0, -1.0]) if abs(gk) > 1e-12 else np.array([0.0])
    best_len = np.inf
    best = np.zeros(6)
    best_pre = 0.0
    best_suf = 0.0
    for pi_ in range(pre_opts.shape[0]):
        pd = pre_opts[pi_]
        if pd != 0.0:
            sig = -smax if fk > 0.0 else smax
            lp = abs(fk) / smax
            ax, ay, ath, _ = seg_point(fx, fy, fth, fk, sig, pd, lp)
        else:
            lp = 0.0
            ax, ay, ath = fx, fy, fth
        for si_ in range(suf_opts.shape[0]):
            sd = suf_opts[si_]
            if sd != 0.0:
                # walk the suffix backwards from the goal: reversed direction, negated sharpness
                sig = smax if gk > 0.0 else -smax
                ls = abs(gk) / smax
                bx_, by_, bth_, _ = seg_point(gx, gy, gth, gk, -sig, -sd, ls)
            else:
                ls = 0.0
                bx_, by_, bth_ = gx, gy, gth
            ca = math.cos(ath)
            sa = math.sin(ath)
            dx = bx_ - ax
            dy = by_ - ay
            lx = ca * dx + sa * dy
            ly = -sa * dx + ca * dy
            sol = solve_middle(lx, ly, bth_ - ath, pd, sd, max_sw, kmax, smax, tx, ty, n, grid_step,
                               max_len - lp - ls)
            total = sol[0] + lp + ls
            if total < best_len:
                best_len = total
                best[:] = sol
                best_pre = pd
                best_suf = sd
    if best_len == np.inf:
        return empty, 0
    segs = np.zeros((9, 7))
    row = 0
    x, y, th, k = fx, fy, fth, fk
    if best_pre != 0.0:
        sig = -smax if fk > 0.0 else smax
        row, x, y, th, k = _append(segs, row, x, y, th, fk, sig, best_pre, abs(fk) / smax)
    row, x, y, th = _append_turn(segs, row, x, y, th, best[1], best[2], kmax, smax)
    L = best[3]
    if abs(L) > 1e-12:
        row, x, y, th, k = _append(segs, row, x, y, th, 0.0, 0.0, 1.0 if L > 0.0 else -1.0, abs(L))
    row, x, y, th = _append_turn(segs, row, x, y, th, best[4], best[5], kmax, smax)
    if best_suf != 0.0:
        sig = smax if gk > 0.0 else -smax
        row, x, y, th, k = _append(segs, row, x, y, th, 0.0, sig, best_suf, abs(gk) / smax)
    if math.hypot(x - gx, y - gy) > end_tol or abs(wrap(th - gth)) > end_tol:
        return empty, 0
    return segs[:row].copy(), 1
