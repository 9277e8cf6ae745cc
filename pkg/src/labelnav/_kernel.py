"""Compiled hypothesis search.

Everything here works on flat numpy arrays so numba can compile it.  Image
points arrive already centered and v-flipped.  Database points arrive with
their grid in CSR form and with per-label CSR lists of indices.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi

# Layout of the stats vector returned by search().
ST_GENERATED = 0
ST_DEGENERATE = 1
ST_PRUNED_REGION = 2
ST_PRUNED_PRIOR = 3
ST_EVALUATED = 4
ST_EARLY_EXIT = 5
ST_QUALIFIED = 6
ST_BEST_UPDATES = 7
ST_PRUNED_SCORE = 8
N_STATS = 9

# Bearing bins of the per-pair off-map bound tables (multiple of 4).
N_BEARING_BINS = 512
# Largest database whose pair geometry is tabulated up front.
PAIR_TABLE_MAX = 1024

PRIOR_NONE = 0
PRIOR_RECT = 1
PRIOR_DISC = 2


@njit(cache=True, inline="always")
def wrap(a):
    x = a + math.pi
    w = x - TWO_PI * math.floor(x / TWO_PI)
    if w <= 0.0:
        w += TWO_PI
    return w - math.pi


@njit(cache=True, inline="always")
def _pair_geom(xi, yi, xj, yj):
    """Distance, unit direction and bearing from database point I to J."""
    ex = xj - xi
    ey = yj - yi
    d = math.hypot(ex, ey)
    if d == 0.0:
        return 0.0, 0.0, 0.0, 0.0
    return d, ex / d, ey / d, math.atan2(ey, ex)


@njit(cache=True, inline="always")
def solve_origin_fast(xi, yi, xj, yj, d, ux, uy, inv_sd, along_c, half_c, dtheta, tangent):
    """Inlined two-circle solve.  Coefficients depend only on the image pair,
    ``(d, ux, uy)`` only on the database pair.

    Returns (ok, cx, cy, r_i, flipped) where ``flipped`` tells which of the
    two intersections was taken.
    """
    if d == 0.0:
        return False, 0.0, 0.0, 0.0, False
    r_i = d * inv_sd
    along = r_i * along_c
    bx = xi + along * ux
    by = yi + along * uy
    if tangent:
        return True, bx, by, r_i, False
    half = r_i * half_c
    cx = bx - half * uy
    cy = by + half * ux
    cross = (xi - cx) * (yj - cy) - (yi - cy) * (xj - cx)
    if (cross < 0.0) != (dtheta > 0.0):
        return True, bx + half * uy, by - half * ux, r_i, True
    return True, cx, cy, r_i, False


@njit(cache=True)
def _cell_range(lo, hi, origin, end, cs, n):
    if hi < origin or lo > end or hi < lo:
        return 0, -1
    a = int(math.floor((lo - origin) / cs))
    b = int(math.floor((hi - origin) / cs))
    a = min(max(a, 0), n - 1)
    b = min(max(b, 0), n - 1)
    return a, b


@njit(cache=True)
def _scan(k_label, q, dtk, center_k, cx, cy, r_i, theta_i, dirx, diry, wx, wy, rad,
          anc_i, anc_j, dbx, dby, dblab, dr, dth, win_dr, win_cos,
          gx0, gy0, gx1, gy1, gcs, gnx, gny, cell_start, cell_items,
          out_db, out_e, want_all):
    """Scan the grid cells under one voter's acceptance window.

    ``(wx, wy, rad)`` is a disc containing the window.  Squared-radius and
    dot-product tests are conservative prefilters built from ``win_dr`` and
    ``win_cos`` (at most as loose as ``dr`` and ``cos(dth)``); the exact
    predicates with ``dr`` and ``dth`` decide.  With ``want_all`` every passing object is written to
    ``out_db``/``out_e`` (returns the count); otherwise only the minimum-error
    one is kept in slot 0 (returns 0 or 1).
    """
    ia, ib = _cell_range(wx - rad, wx + rad, gx0, gx1, gcs, gnx)
    ja, jb = _cell_range(wy - rad, wy + rad, gy0, gy1, gcs, gny)
    r_hi = r_i * (q + win_dr)
    r_hi2 = r_hi * r_hi * (1.0 + 1e-9)
    r_lo = r_i * (q - win_dr)
    r_lo2 = r_lo * r_lo * (1.0 - 1e-9) if r_lo > 0.0 else -1.0
    m = 0
    best_e = np.inf
    for gj in range(ja, jb + 1):
        for gi in range(ia, ib + 1):
            c = gj * gnx + gi
            for t in range(cell_start[c], cell_start[c + 1]):
                kk = cell_items[t]
                if kk == anc_i or kk == anc_j or dblab[kk] != k_label:
                    continue
                ddx = dbx[kk] - cx
                ddy = dby[kk] - cy
                d2 = ddx * ddx + ddy * ddy
                if d2 > r_hi2 or d2 < r_lo2:
                    continue
                dist = math.sqrt(d2)
                if not center_k:
                    if ddx * dirx + ddy * diry < dist * win_cos - 1e-9 * (dist + r_hi):
                        continue
                er = abs(q - math.hypot(ddx, ddy) / r_i)
                if not er < dr:
                    continue
                if center_k:
                    ea = 0.0
                else:
                    ea = abs(wrap(dtk - wrap(theta_i - math.atan2(ddy, ddx))))
                    if not ea < dth:
                        continue
                e = er + ea
                if want_all:
                    if m < out_db.shape[0]:
                        out_db[m] = kk
                        out_e[m] = e
                    m += 1
                elif e < best_e:
                    best_e = e
                    out_db[0] = kk
                    out_e[0] = e
                    m = 1
    return m


@njit(cache=True)
def _injective_count(n_vote, others, q_arr, dtk_arr, center_arr, wx_arr, wy_arr, rad_arr,
                     dirx_arr, diry_arr, plab, cx, cy, r_i, theta_i, anc_i, anc_j,
                     dbx, dby, dblab, dr, cos_dth, dth,
                     gx0, gy0, gx1, gy1, gcs, gnx, gny, cell_start, cell_items, out_e):
    """Greedy one-to-one assignment by ascending error.  Returns match count."""
    nd = dbx.shape[0]
    buf_db = np.empty(nd, np.int64)
    buf_e = np.empty(nd, np.float64)
    cap = 64
    ck = np.empty(cap, np.int64)
    cd = np.empty(cap, np.int64)
    ce = np.empty(cap, np.float64)
    m = 0
    for t in range(n_vote):
        got = _scan(plab[others[t]], q_arr[t], dtk_arr[t], center_arr[t], cx, cy, r_i,
                    theta_i, dirx_arr[t], diry_arr[t], wx_arr[t], wy_arr[t], rad_arr[t],
                    anc_i, anc_j, dbx, dby, dblab, dr, dth, dr, cos_dth,
                    gx0, gy0, gx1, gy1, gcs, gnx, gny, cell_start, cell_items,
                    buf_db, buf_e, True)
        for u in range(got):
            if m == cap:
                cap *= 2
                ck2 = np.empty(cap, np.int64)
                cd2 = np.empty(cap, np.int64)
                ce2 = np.empty(cap, np.float64)
                ck2[:m] = ck[:m]
                cd2[:m] = cd[:m]
                ce2[:m] = ce[:m]
                ck, cd, ce = ck2, cd2, ce2
            ck[m] = others[t]
            cd[m] = buf_db[u]
            ce[m] = buf_e[u]
            m += 1
    order = np.argsort(ce[:m], kind="mergesort")
    used_k = np.zeros(plab.shape[0], np.bool_)
    used_d = np.zeros(nd, np.bool_)
    n = 0
    for o in order:
        k = ck[o]
        kk = cd[o]
        if used_k[k] or used_d[kk]:
            continue
        used_k[k] = True
        used_d[kk] = True
        out_e[n] = ce[o]
        n += 1
    return n


@njit(cache=True, inline="always")
def _window(t, ux, uy, cx, cy, r_i, ck_arr, sk_arr, q_arr, radf_arr,
            dirx_arr, diry_arr, wx_arr, wy_arr, rad_arr):
    """Predicted direction, window center and window disc radius of voter t."""
    dxv = ux * ck_arr[t] + uy * sk_arr[t]
    dyv = uy * ck_arr[t] - ux * sk_arr[t]
    dirx_arr[t] = dxv
    diry_arr[t] = dyv
    rq = r_i * q_arr[t]
    wx_arr[t] = cx + rq * dxv
    wy_arr[t] = cy + rq * dyv
    rad_arr[t] = r_i * radf_arr[t] + 1e-12


@njit(cache=True)
def _pop_std(vals, n):
    if n == 0:
        return 0.0
    s = 0.0
    for t in range(n):
        s += vals[t]
    mean = s / n
    v = 0.0
    for t in range(n):
        d = vals[t] - mean
        v += d * d
    return math.sqrt(v / n)


@njit(cache=True)
def _grow_i(a, n):
    b = np.empty((max(2 * a.shape[0], 16), a.shape[1]), a.dtype)
    b[:n] = a[:n]
    return b


@njit(cache=True)
def search(px, py, plab, pr, pt,
           dbx, dby, dblab, lab_start, lab_items,
           gx0, gy0, gx1, gy1, gcs, gnx, gny, cell_start, cell_items,
           reg, margin_frac, foot_px, prior_kind, prior,
           n_min, dr, dth, eps_r, eps_den,
           faithful, collect, injective, hyp_list, use_list, seed_n, seed_e):
    """Run the consensus search.

    ``hyp_list`` rows are (i, j, I, J) and are used only when ``use_list``;
    otherwise every image pair i < j is crossed with every label-compatible
    ordered database pair in index order.

    Returns ``(best_idx, best_n, best_e, best_f, stats, q_idx, q_n, q_f, n_q)``
    where ``best_f`` is (cx, cy, r_i, scale) and the ``q_*`` arrays hold all
    hypotheses reaching ``n_min`` when ``collect`` is set.

    ``(seed_n, seed_e)`` are the count and score of some hypothesis of the
    same search (lexicographic mode only, ``seed_n = 0`` for none).  They
    only prune hypotheses strictly worse than it, so the winner is
    unaffected.
    """
    n = px.shape[0]
    stats = np.zeros(N_STATS, np.int64)
    best_idx = np.full(4, -1, np.int64)
    best_f = np.zeros(4, np.float64)
    best_n = 0
    best_e = np.inf
    q_idx = np.empty((16, 4), np.int64)
    q_f = np.empty((16, 5), np.float64)
    q_n = np.empty((16, 1), np.int64)
    n_q = 0

    nn = max(n, 1)
    resid = np.empty(nn, np.float64)
    others = np.empty(nn, np.int64)
    q_arr = np.empty(nn, np.float64)
    dtk_arr = np.empty(nn, np.float64)
    ck_arr = np.empty(nn, np.float64)
    sk_arr = np.empty(nn, np.float64)
    radf_arr = np.empty(nn, np.float64)
    center_arr = np.empty(nn, np.bool_)
    dirx_arr = np.empty(nn, np.float64)
    diry_arr = np.empty(nn, np.float64)
    wx_arr = np.empty(nn, np.float64)
    wy_arr = np.empty(nn, np.float64)
    rad_arr = np.empty(nn, np.float64)
    reach_arr = np.empty(nn, np.float64)
    edge_hi = np.empty(N_BEARING_BINS, np.float64)
    edge_lo = np.empty(N_BEARING_BINS, np.float64)
    bin_w = TWO_PI / N_BEARING_BINS
    # Per-voter stamps: equal to the current hypothesis id when the window
    # is computed / known to be off the map.
    win_at = np.full(nn, -1, np.int64)
    off_at = np.full(nn, -1, np.int64)
    hid = 0
    nd = dbx.shape[0]
    tabulate = nd <= PAIR_TABLE_MAX
    tn = nd if tabulate else 1
    pair_d = np.zeros((tn, tn), np.float64)
    pair_ux = np.zeros((tn, tn), np.float64)
    pair_uy = np.zeros((tn, tn), np.float64)
    pair_psi = np.zeros((tn, tn), np.float64)
    if tabulate:
        for a in range(nd):
            for b in range(nd):
                if a != b:
                    gd, gux, guy, gpsi = _pair_geom(dbx[a], dby[a], dbx[b], dby[b])
                    pair_d[a, b] = gd
                    pair_ux[a, b] = gux
                    pair_uy[a, b] = guy
                    pair_psi[a, b] = gpsi
    one_db = np.empty(1, np.int64)
    one_e = np.empty(1, np.float64)
    cos_dth = math.cos(dth)
    sin_half_dth = math.sin(0.5 * dth)

    if use_list:
        n_outer = hyp_list.shape[0]
    else:
        n_outer = n * n

    cur_i = -1
    cur_j = -1
    n_others = 0
    inv_sd = 0.0
    along_c = 0.0
    half_c = 0.0
    dtheta = 0.0
    tangent = False
    pair_ok = False
    max_reach = 0.0
    beta_keep = 0.0
    beta_flip = 0.0

    for outer in range(n_outer):
        if use_list:
            i = hyp_list[outer, 0]
            j = hyp_list[outer, 1]
        else:
            i = outer // n
            j = outer % n
            if j <= i:
                continue
        if pr[i] <= eps_r or pr[j] <= eps_r:
            continue

        if i != cur_i or j != cur_j:
            cur_i = i
            cur_j = j
            rho = pr[j] / pr[i]
            dtheta = wrap(pt[i] - pt[j])
            s = math.sin(0.5 * dtheta)
            den = (1.0 - rho) ** 2 + 4.0 * rho * s * s
            pair_ok = den >= eps_den
            if pair_ok:
                sd = math.sqrt(den)
                inv_sd = 1.0 / sd
                along_c = (1.0 - rho * math.cos(dtheta)) / sd
                sdt = math.sin(dtheta)
                half_c = rho * abs(sdt) / sd
                tangent = abs(sdt) < 1e-12
                # Bearing of I seen from the origin, relative to the I->J
                # bearing, for either intersection.
                beta_keep = math.atan2(-half_c, -along_c)
                beta_flip = math.atan2(half_c, -along_c)
                # Consensus voters, smallest acceptance window first.
                max_reach = 0.0
                n_others = 0
                for k in range(n):
                    if k != i and k != j:
                        others[n_others] = k
                        n_others += 1
                keys = np.empty(n_others, np.float64)
                for t in range(n_others):
                    keys[t] = pr[others[t]]
                order = np.argsort(keys, kind="mergesort")
                tmp = others[:n_others].copy()
                for t in range(n_others):
                    k = tmp[order[t]]
                    others[t] = k
                    q = pr[k] / pr[i]
                    q_arr[t] = q
                    center_arr[t] = pr[k] <= eps_r
                    dtk = wrap(pt[i] - pt[k])
                    dtk_arr[t] = dtk
                    ck_arr[t] = math.cos(dtk)
                    sk_arr[t] = math.sin(dtk)
                    # Window disc radius per unit R_i: radial slack plus the
                    # longest chord within the angular slack, capped by the
                    # disc holding the whole annulus.
                    full = 2.0 * q + dr
                    if center_arr[t]:
                        radf_arr[t] = full
                    else:
                        radf_arr[t] = min(dr + 2.0 * (q + dr) * sin_half_dth, full)
                    radf_arr[t] = radf_arr[t] * (1.0 + 1e-9)
                    max_reach = max(max_reach, q + radf_arr[t])
                    reach_arr[t] = max_reach
                # For a window with bearing offset b from the anchor bearing,
                # (q cos(b - dtk) + radf) * R_i is how far its far side
                # reaches along -x; the four map edges are the bearings
                # shifted by quarter turns.  Per bin, bound the minimum over
                # voters from above and below.
                for b in range(N_BEARING_BINS):
                    beta = -math.pi + (b + 0.5) * bin_w
                    hi = np.inf
                    lo = np.inf
                    for t in range(n_others):
                        g = q_arr[t] * math.cos(beta - dtk_arr[t]) + radf_arr[t]
                        slack = q_arr[t] * (0.5 * bin_w * 1.01 + 1e-9) + 1e-9 * radf_arr[t]
                        hi = min(hi, g + slack)
                        lo = min(lo, g - slack)
                    edge_hi[b] = hi
                    edge_lo[b] = lo

        if use_list:
            a_lo = 0
            a_hi = 1
        else:
            li = plab[i]
            a_lo = lab_start[li]
            a_hi = lab_start[li + 1]
        for ai in range(a_lo, a_hi):
            if use_list:
                I = hyp_list[outer, 2]
                b_lo = 0
                b_hi = 1
            else:
                I = lab_items[ai]
                lj = plab[j]
                b_lo = lab_start[lj]
                b_hi = lab_start[lj + 1]
            for bj in range(b_lo, b_hi):
                if use_list:
                    J = hyp_list[outer, 3]
                else:
                    J = lab_items[bj]
                if J == I:
                    continue
                stats[ST_GENERATED] += 1
                if not pair_ok:
                    stats[ST_DEGENERATE] += 1
                    continue
                if tabulate:
                    pd = pair_d[I, J]
                    pux = pair_ux[I, J]
                    puy = pair_uy[I, J]
                    psi = pair_psi[I, J]
                else:
                    pd, pux, puy, psi = _pair_geom(dbx[I], dby[I], dbx[J], dby[J])
                ok, cx, cy, r_i, flipped = solve_origin_fast(
                    dbx[I], dby[I], dbx[J], dby[J], pd, pux, puy,
                    inv_sd, along_c, half_c, dtheta, tangent)
                if not ok:
                    stats[ST_DEGENERATE] += 1
                    continue
                scale = r_i / pr[i]
                m = margin_frac * scale * foot_px
                if cx < reg[0] - m or cx > reg[2] + m or cy < reg[1] - m or cy > reg[3] + m:
                    stats[ST_PRUNED_REGION] += 1
                    continue
                if prior_kind == PRIOR_RECT:
                    if cx < prior[0] or cx > prior[2] or cy < prior[1] or cy > prior[3]:
                        stats[ST_PRUNED_PRIOR] += 1
                        continue
                elif prior_kind == PRIOR_DISC:
                    if math.hypot(cx - prior[0], cy - prior[1]) > prior[2]:
                        stats[ST_PRUNED_PRIOR] += 1
                        continue
                stats[ST_EVALUATED] += 1

                # Incumbent a hypothesis has to beat to matter.
                inc_n = best_n
                inc_e = best_e
                if not faithful and (seed_n > inc_n or (seed_n == inc_n and seed_e < inc_e)):
                    inc_n = seed_n
                    inc_e = seed_e
                bound = n_min
                if not collect and inc_n > bound:
                    bound = inc_n
                allowed_miss = n_others - (bound - 2)
                if allowed_miss < 0:
                    stats[ST_EARLY_EXIT] += 1
                    continue
                # Score pruning: the population variance of the final
                # residuals is at least M2_partial / N_final.  Slack keeps
                # float-level ties alive so they are decided exactly.
                e_prune = (not collect) and (not injective) and inc_n >= n_min
                e_thr = inc_e * (1.0 + 1e-9) + 1e-12
                e_thr2 = e_thr * e_thr
                # Unit vector and bearing from the origin to I, up to
                # rounding; used only by the conservative screens.
                if flipped:
                    ux = -along_c * pux - half_c * puy
                    uy = -along_c * puy + half_c * pux
                    alpha = psi + beta_flip
                else:
                    ux = -along_c * pux + half_c * puy
                    uy = -along_c * puy - half_c * pux
                    alpha = psi + beta_keep
                hid += 1
                misses = 0
                reach = r_i * max_reach + 1e-12
                if (cx - reach < gx0 or cx + reach > gx1
                        or cy - reach < gy0 or cy + reach > gy1):
                    # Table screen over the four edges, in the order -x, +x,
                    # -y, +y.  A voter whose window lies off the map beyond
                    # float slack is a certain miss; if even the lower bounds
                    # stay on the map no window can be off it.
                    tol = 1e-9 * (abs(cx) + abs(cy) + abs(gx0) + abs(gx1) + abs(gy0)
                                  + abs(gy1) + reach + 1.0)
                    b0 = int(math.floor((alpha + math.pi) / bin_w)) % N_BEARING_BINS
                    quarter = N_BEARING_BINS // 4
                    b_l = b0
                    b_r = (b0 + 2 * quarter) % N_BEARING_BINS
                    b_b = (b0 - quarter) % N_BEARING_BINS
                    b_t = (b0 + quarter) % N_BEARING_BINS
                    if allowed_miss == 0 and (
                            cx + r_i * edge_hi[b_l] < gx0 - tol
                            or cx - r_i * edge_hi[b_r] > gx1 + tol
                            or cy + r_i * edge_hi[b_b] < gy0 - tol
                            or cy - r_i * edge_hi[b_t] > gy1 + tol):
                        stats[ST_EARLY_EXIT] += 1
                        continue
                    maybe_off = (cx + r_i * edge_lo[b_l] < gx0 + tol
                                 or cx - r_i * edge_lo[b_r] > gx1 - tol
                                 or cy + r_i * edge_lo[b_b] < gy0 + tol
                                 or cy - r_i * edge_lo[b_t] > gy1 - tol)
                else:
                    maybe_off = False
                if maybe_off:
                    # Pass 1, farthest voters first: windows entirely off the
                    # map are certain misses and need no grid access.  Stops
                    # once the disc holding all nearer windows is on the map.
                    for tt in range(n_others):
                        t = n_others - 1 - tt
                        reach = r_i * reach_arr[t] + 1e-12
                        if (cx - reach >= gx0 and cx + reach <= gx1
                                and cy - reach >= gy0 and cy + reach <= gy1):
                            break
                        _window(t, ux, uy, cx, cy, r_i, ck_arr, sk_arr, q_arr, radf_arr,
                                dirx_arr, diry_arr, wx_arr, wy_arr, rad_arr)
                        win_at[t] = hid
                        wx = wx_arr[t]
                        wy = wy_arr[t]
                        rad = rad_arr[t]
                        off = (wx + rad < gx0 or wx - rad > gx1
                               or wy + rad < gy0 or wy - rad > gy1)
                        if off:
                            off_at[t] = hid
                        if off:
                            misses += 1
                            if misses > allowed_miss:
                                break
                    if misses > allowed_miss:
                        stats[ST_EARLY_EXIT] += 1
                        continue
                # Pass 2, smallest windows first.
                theta_i = math.atan2(dby[I] - cy, dbx[I] - cx)
                matched = 0
                mean = 0.0
                m2 = 0.0
                pruned = False
                for t in range(n_others):
                    if off_at[t] == hid:
                        continue
                    if win_at[t] != hid:
                        _window(t, ux, uy, cx, cy, r_i, ck_arr, sk_arr, q_arr, radf_arr,
                                dirx_arr, diry_arr, wx_arr, wy_arr, rad_arr)
                        win_at[t] = hid
                    win_dr = dr
                    win_cos = cos_dth
                    rad = rad_arr[t]
                    if e_prune and matched > 0 and misses == allowed_miss:
                        # Every remaining voter must hit and keep the variance
                        # within budget, so its residual is at most mean + w
                        # and both error terms are bounded by that.
                        budget = e_thr2 * (n_others - misses) - m2
                        lim = mean + math.sqrt(max(budget, 0.0) * (matched + 1) / matched)
                        lim = lim * (1.0 + 1e-9) + 1e-12
                        if lim < dr:
                            win_dr = lim
                            q = q_arr[t]
                            if center_arr[t]:
                                radf = 2.0 * q + win_dr
                            else:
                                win_th = min(lim, dth)
                                win_cos = math.cos(win_th)
                                radf = min(win_dr + 2.0 * (q + win_dr) * math.sin(0.5 * win_th),
                                           2.0 * q + win_dr)
                            rad = r_i * radf * (1.0 + 1e-9) + 1e-12
                    got = _scan(plab[others[t]], q_arr[t], dtk_arr[t], center_arr[t],
                                cx, cy, r_i, theta_i, dirx_arr[t], diry_arr[t],
                                wx_arr[t], wy_arr[t], rad, I, J,
                                dbx, dby, dblab, dr, dth, win_dr, win_cos,
                                gx0, gy0, gx1, gy1, gcs, gnx, gny, cell_start, cell_items,
                                one_db, one_e, False)
                    if got > 0:
                        e = one_e[0]
                        resid[matched] = e
                        matched += 1
                        delta = e - mean
                        mean += delta / matched
                        m2 += delta * (e - mean)
                    else:
                        misses += 1
                        if misses > allowed_miss:
                            break
                    if e_prune and (faithful or misses == allowed_miss):
                        if m2 > e_thr2 * (n_others - misses):
                            pruned = True
                            break
                if pruned:
                    stats[ST_PRUNED_SCORE] += 1
                    continue
                if misses > allowed_miss:
                    stats[ST_EARLY_EXIT] += 1
                    continue
                if injective:
                    for t in range(n_others):
                        if win_at[t] != hid:
                            _window(t, ux, uy, cx, cy, r_i, ck_arr, sk_arr, q_arr, radf_arr,
                                    dirx_arr, diry_arr, wx_arr, wy_arr, rad_arr)
                    matched = _injective_count(n_others, others, q_arr, dtk_arr, center_arr,
                                               wx_arr, wy_arr, rad_arr, dirx_arr, diry_arr,
                                               plab, cx, cy, r_i, theta_i, I, J,
                                               dbx, dby, dblab, dr, cos_dth, dth,
                                               gx0, gy0, gx1, gy1, gcs, gnx, gny,
                                               cell_start, cell_items, resid)
                nm = matched + 2
                if nm < n_min:
                    continue
                stats[ST_QUALIFIED] += 1
                score = _pop_std(resid, matched)
                if collect:
                    if n_q == q_idx.shape[0]:
                        q_idx = _grow_i(q_idx, n_q)
                        q_f = _grow_i(q_f, n_q)
                        q_n = _grow_i(q_n, n_q)
                    q_idx[n_q, 0] = i
                    q_idx[n_q, 1] = j
                    q_idx[n_q, 2] = I
                    q_idx[n_q, 3] = J
                    q_n[n_q, 0] = nm
                    q_f[n_q, 0] = cx
                    q_f[n_q, 1] = cy
                    q_f[n_q, 2] = score
                    q_f[n_q, 3] = r_i
                    q_f[n_q, 4] = scale
                    n_q += 1
                if faithful:
                    better = nm >= best_n and score < best_e
                else:
                    better = nm > best_n or (nm == best_n and score < best_e)
                if better:
                    stats[ST_BEST_UPDATES] += 1
                    best_n = nm
                    best_e = score
                    best_idx[0] = i
                    best_idx[1] = j
                    best_idx[2] = I
                    best_idx[3] = J
                    best_f[0] = cx
                    best_f[1] = cy
                    best_f[2] = r_i
                    best_f[3] = scale
    return best_idx, best_n, best_e, best_f, stats, q_idx[:n_q], q_n[:n_q, 0], q_f[:n_q], n_q
