"""Hot numeric kernels, written once in scalar/loop style.

Every function here is compiled with numba when available and enabled, and
runs as plain Python otherwise, so both paths share one implementation and
produce bitwise-identical results.  Set RHYTHMSIM_NUMBA=0 to force the pure
interpreter path (the import then never touches numba).
"""

from __future__ import annotations

import math
import os

import numpy as np

_flag = os.environ.get("RHYTHMSIM_NUMBA", "1").strip().lower()
NUMBA_ENABLED = _flag not in ("0", "false", "off", "no")
if NUMBA_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    def _jit(fn):
        return _njit(cache=True)(fn)
else:
    def _jit(fn):
        return fn


EARTH_RADIUS_M = 6371000.0

# additive floor in the final candidate normalization
SELECT_EPS = 1e-12


@_jit
def _haversine(lon1, lat1, lon2, lat2):
    # great-circle distance in meters on the R=6371km sphere
    rl1 = math.radians(lat1)
    rl2 = math.radians(lat2)
    dlat = rl2 - rl1
    dlon = math.radians(lon2 - lon1)
    sa = math.sin(dlat * 0.5)
    sb = math.sin(dlon * 0.5)
    a = sa * sa + math.cos(rl1) * math.cos(rl2) * sb * sb
    if a > 1.0:
        a = 1.0
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


@_jit
def _ndtri(p):
    # inverse standard normal CDF, Wichura's PPND16 rational approximations
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return math.inf
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    z = num / den
    if q < 0.0:
        return -z
    return z


@_jit
def _pick_from_cum(cum, u):
    # first index whose cumulative value reaches u; clamps to the last index
    n = cum.shape[0]
    for i in range(n):
        if cum[i] >= u:
            return i
    return n - 1


@_jit
def _nearest_scan(lons, lats, lo, hi, qlon, qlat):
    # nearest point in the half-open slice [lo, hi); ties keep the lowest index
    best = -1
    bd = 1e30
    for j in range(lo, hi):
        d = _haversine(qlon, qlat, lons[j], lats[j])
        if d < bd:
            bd = d
            best = j
    return best, bd


@_jit
def _knn_scan(lons, lats, lo, hi, qlon, qlat, k, out_idx, out_dist):
    """Exact k nearest within slice [lo, hi); stable sort keeps index order on ties.

    Fills out_idx/out_dist with slice-absolute indices, returns the count.
    """
    m = hi - lo
    if m <= 0:
        return 0
    dist = np.empty(m, dtype=np.float64)
    for j in range(m):
        dist[j] = _haversine(qlon, qlat, lons[lo + j], lats[lo + j])
    order = np.argsort(dist, kind="mergesort")
    kk = k if k < m else m
    for j in range(kk):
        out_idx[j] = lo + order[j]
        out_dist[j] = dist[order[j]]
    return kk


@_jit
def _radius_scan(lons, lats, lo, hi, qlon, qlat, radius, out_idx, out_dist):
    # all points of the slice within radius, in index order; returns the count
    cnt = 0
    for j in range(lo, hi):
        d = _haversine(qlon, qlat, lons[j], lats[j])
        if d <= radius:
            out_idx[cnt] = j
            out_dist[cnt] = d
            cnt += 1
    return cnt


@_jit
def _score_into(nc, dists, cats, pis, inzone, changed,
                r_default, r_accom, gamma, umix,
                use_prior, lam_p, beta_p, p_eps,
                use_zone, lam_z, beta_z, s_obs_cat,
                use_boost, boost, probs, scratch):
    """Candidate scoring chain; writes normalized probabilities into probs[:nc].

    Stages: distance likelihood blended with uniform, observed-visitation
    multiplier, zone share correction (ratios clipped to [1/4, 4]), emphasis
    boost, then (s+eps)/sum(s+eps) normalization.
    """
    lsum = 0.0
    for j in range(nc):
        rc = r_accom if cats[j] == 0 else r_default
        v = math.exp(-((dists[j] / rc) ** gamma))
        probs[j] = v
        lsum += v
    if lsum > 0.0:
        for j in range(nc):
            probs[j] = (1.0 - umix) * (probs[j] / lsum) + umix / nc
    else:
        # all likelihoods underflowed; fall back to uniform before mixing
        for j in range(nc):
            probs[j] = 1.0 / nc
    if use_prior:
        psum = 0.0
        for j in range(nc):
            w = (pis[j] + p_eps) ** beta_p
            scratch[j] = w
            psum += w
        for j in range(nc):
            probs[j] *= (1.0 - lam_p) / nc + lam_p * scratch[j] / psum
    if use_zone:
        nin = 0
        for j in range(nc):
            if inzone[j] != 0:
                nin += 1
        s_cand = nin / nc
        for j in range(nc):
            so = s_obs_cat[cats[j]]
            if inzone[j] != 0:
                rho = so / s_cand
            else:
                rho = (1.0 - so) / (1.0 - s_cand)
            if rho < 0.25:
                rho = 0.25
            elif rho > 4.0:
                rho = 4.0
            probs[j] *= (1.0 - lam_z) + lam_z * rho ** beta_z
    if use_boost:
        for j in range(nc):
            if changed[j] != 0:
                probs[j] *= boost
    tot = 0.0
    for j in range(nc):
        v = probs[j] + SELECT_EPS
        probs[j] = v
        tot += v
    for j in range(nc):
        probs[j] /= tot


@_jit
def _build_knn_tables(seg_lon, seg_lat, seg_glob, cat_starts, g_lon, g_lat, k,
                      knn_idx, knn_dist, knn_cnt):
    """Per (POI, category) exact KNN over the category segment, stored as
    global POI indices.  Anchors are all POIs; self-matches are legitimate."""
    n = g_lon.shape[0]
    ncat = cat_starts.shape[0] - 1
    tmp_idx = np.empty(seg_lon.shape[0], dtype=np.int64)
    tmp_dist = np.empty(seg_lon.shape[0], dtype=np.float64)
    for i in range(n):
        for c in range(ncat):
            lo = cat_starts[c]
            hi = cat_starts[c + 1]
            kk = _knn_scan(seg_lon, seg_lat, lo, hi, g_lon[i], g_lat[i], k,
                           tmp_idx, tmp_dist)
            knn_cnt[i, c] = kk
            for j in range(kk):
                knn_idx[i, c, j] = seg_glob[tmp_idx[j]]
                knn_dist[i, c, j] = tmp_dist[j]


@_jit
def _match_events(ev_lon, ev_lat, p_lon, p_lat, radius, out_idx, out_dist):
    """Nearest POI per event; index -1 where the nearest lies beyond radius.
    Returns the matched count."""
    n = ev_lon.shape[0]
    npoi = p_lon.shape[0]
    matched = 0
    for e in range(n):
        best, bd = _nearest_scan(p_lon, p_lat, 0, npoi, ev_lon[e], ev_lat[e])
        out_dist[e] = bd
        if best >= 0 and bd <= radius:
            out_idx[e] = best
            matched += 1
        else:
            out_idx[e] = -1
    return matched


@_jit
def _hit_flags(ev_lon, ev_lat, p_lon, p_lat, radius, out):
    # 1 where any POI lies within radius of the event point
    n = ev_lon.shape[0]
    npoi = p_lon.shape[0]
    hits = 0
    for e in range(n):
        flag = 0
        for j in range(npoi):
            if _haversine(ev_lon[e], ev_lat[e], p_lon[j], p_lat[j]) <= radius:
                flag = 1
                break
        out[e] = flag
        hits += flag
    return hits


@_jit
def _simulate_chunk(U, max_events,
                    cum_h, cum_ch, start_cum_flat, cat_starts,
                    hazard, block_lu, trans_cum,
                    dwell_cum, dwell_mu, dwell_sg, min_dwell, cap_s,
                    seg_lon, seg_lat, seg_glob,
                    g_lon, g_lat, g_cat, g_pi, g_inzone, g_changed,
                    knn_idx, knn_dist, knn_cnt,
                    explore_eps, explore_radius,
                    r_default, r_accom, gamma, umix,
                    use_prior, lam_p, beta_p, p_eps,
                    use_zone, lam_z, beta_z, s_obs_cat,
                    use_boost, boost,
                    out_cnt, out_s, out_h, out_c, out_d, out_p):
    """Generate one chain per row of U into flat (chain*max_events) buffers.

    Variate slots per chain: 0 start hour, 1 start category, 2 start POI,
    then per event t at base 3+6t: +0 dwell component, +1 dwell normal,
    +2 exploration gate, +3 POI pick, +4 stop gate, +5 next category.
    Slots are position-fixed so skipped draws never shift later ones.
    """
    n_chains = U.shape[0]
    npoi = g_lon.shape[0]
    cand_glob = np.empty(npoi, dtype=np.int64)
    cand_seg = np.empty(npoi, dtype=np.int64)
    cand_dist = np.empty(npoi, dtype=np.float64)
    cand_cat = np.empty(npoi, dtype=np.int64)
    cand_pi = np.empty(npoi, dtype=np.float64)
    cand_zone = np.empty(npoi, dtype=np.uint8)
    cand_chg = np.empty(npoi, dtype=np.uint8)
    probs = np.empty(npoi, dtype=np.float64)
    scratch = np.empty(npoi, dtype=np.float64)

    for i in range(n_chains):
        h0 = _pick_from_cum(cum_h, U[i, 0])
        cc = _pick_from_cum(cum_ch[h0], U[i, 1])
        lo0 = cat_starts[cc]
        hi0 = cat_starts[cc + 1]
        sel0 = _pick_from_cum(start_cum_flat[lo0:hi0], U[i, 2])
        cur_poi = seg_glob[lo0 + sel0]

        s = h0 * 3600.0
        t = 0
        while True:
            hh = int(s) // 3600
            base = 3 + 6 * t
            comp = _pick_from_cum(dwell_cum[hh, cc], U[i, base])
            z = _ndtri(U[i, base + 1])
            d = math.exp(dwell_mu[hh, cc, comp] + dwell_sg[hh, cc, comp] * z)
            if d < min_dwell:
                d = min_dwell
            end = s + d * 60.0
            trunc = False
            if end >= cap_s:
                end = cap_s
                d = (cap_s - s) / 60.0
                trunc = True

            slot = i * max_events + t
            out_s[slot] = s
            out_h[slot] = hh
            out_c[slot] = cc
            out_d[slot] = d
            out_p[slot] = cur_poi

            if trunc or t == max_events - 1:
                out_cnt[i] = t + 1
                break
            if U[i, base + 4] < hazard[hh]:
                out_cnt[i] = t + 1
                break

            s2 = end
            h2 = int(s2) // 3600
            c2 = _pick_from_cum(trans_cum[block_lu[h2], cc], U[i, base + 5])

            lo = cat_starts[c2]
            hi = cat_starts[c2 + 1]
            nc = 0
            if U[i, base + 2] < explore_eps:
                nc = _radius_scan(seg_lon, seg_lat, lo, hi,
                                  g_lon[cur_poi], g_lat[cur_poi],
                                  explore_radius, cand_seg, cand_dist)
                for j in range(nc):
                    cand_glob[j] = seg_glob[cand_seg[j]]
            if nc == 0:
                kk = knn_cnt[cur_poi, c2]
                for j in range(kk):
                    cand_glob[j] = knn_idx[cur_poi, c2, j]
                    cand_dist[j] = knn_dist[cur_poi, c2, j]
                nc = kk

            for j in range(nc):
                gj = cand_glob[j]
                cand_cat[j] = g_cat[gj]
                cand_pi[j] = g_pi[gj]
                cand_zone[j] = g_inzone[gj]
                cand_chg[j] = g_changed[gj]
            _score_into(nc, cand_dist, cand_cat, cand_pi, cand_zone, cand_chg,
                        r_default, r_accom, gamma, umix,
                        use_prior, lam_p, beta_p, p_eps,
                        use_zone, lam_z, beta_z, s_obs_cat,
                        use_boost, boost, probs, scratch)
            acc = 0.0
            sel = nc - 1
            usel = U[i, base + 3]
            for j in range(nc):
                acc += probs[j]
                if acc >= usel:
                    sel = j
                    break

            cur_poi = cand_glob[sel]
            cc = c2
            s = s2
            t += 1
