"""Compiled hot loops (numba).

Everything here is a mechanical translation of the scalar reference code in
stringmetrics/sampler into nopython kernels; the test suite pins them to the
reference implementations. Keep these free of business logic.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

_WINKLER_MAX_PREFIX = 4


@njit(cache=True, inline="always")
def _jw_pair(s1, l1, s2, l2, hit1, hit2, prefix_scale):
    """Jaro-Winkler on two encoded strings; hit1/hit2 are scratch buffers."""
    for i in range(l1):
        hit1[i] = False
    for i in range(l2):
        hit2[i] = False
    if l1 == 0 and l2 == 0:
        return 1.0
    if l1 == 0 or l2 == 0:
        return 0.0
    if l1 == l2:
        same = True
        for i in range(l1):
            if s1[i] != s2[i]:
                same = False
                break
        if same:
            return 1.0

    maxl = l1 if l1 > l2 else l2
    window = maxl // 2 - 1
    if window < 0:
        window = 0
    m = 0
    for i in range(l1):
        lo = i - window
        if lo < 0:
            lo = 0
        hi = i + window + 1
        if hi > l2:
            hi = l2
        for j in range(lo, hi):
            if not hit2[j] and s2[j] == s1[i]:
                hit1[i] = True
                hit2[j] = True
                m += 1
                break
    if m == 0:
        return 0.0

    mismatches = 0
    k = 0
    for i in range(l1):
        if hit1[i]:
            while not hit2[k]:
                k += 1
            if s1[i] != s2[k]:
                mismatches += 1
            k += 1

    jar = (m / l1 + m / l2 + (m - mismatches / 2.0) / m) / 3.0

    limit = l1 if l1 < l2 else l2
    if limit > _WINKLER_MAX_PREFIX:
        limit = _WINKLER_MAX_PREFIX
    prefix = 0
    for i in range(limit):
        if s1[i] != s2[i]:
            break
        prefix += 1
    return jar + prefix * prefix_scale * (1.0 - jar)


@njit(cache=True, parallel=True)
def jw_matrix(b_enc, b_len, a_enc, a_len, prefix_scale):
    """All-pairs Jaro-Winkler: rows are B-side strings, columns A-side."""
    nb = b_enc.shape[0]
    na = a_enc.shape[0]
    maxlen = max(b_enc.shape[1], a_enc.shape[1])
    out = np.empty((nb, na), np.float64)
    for p in prange(nb):
        hit1 = np.zeros(maxlen, np.bool_)
        hit2 = np.zeros(maxlen, np.bool_)
        sb = b_enc[p]
        lb = b_len[p]
        for q in range(na):
            out[p, q] = _jw_pair(sb, lb, a_enc[q], a_len[q], hit1, hit2, prefix_scale)
    return out


@njit(cache=True)
def gibbs_sweep(z, n_a, pattern_ids, order, offsets, llr, alpha_pi, beta_pi, js, rng):
    """Resample each Z_j in the order given by js, in place.

    Candidates are grouped by comparison pattern: every available A record
    with the same pattern has the same full-conditional weight, so the
    categorical draw picks a pattern (weight = available count * likelihood
    ratio * link prior factor, no-link weight 1, all in log space with
    max-subtraction) and then a uniformly random available member of it.
    Member selection is rejection sampling over the pattern's group with a
    deterministic counting-scan fallback, which stays uniform.
    """
    n_b = z.shape[0]
    P = llr.shape[0]
    taken = np.zeros(n_a, np.bool_)
    taken_counts = np.zeros((n_b, P), np.int64)
    n_links = 0
    for j in range(n_b):
        v = z[j]
        if v < n_a:
            taken[v] = True
            n_links += 1
            for jj in range(n_b):
                taken_counts[jj, pattern_ids[jj, v]] += 1

    avail = np.empty(P, np.int64)
    w = np.empty(P, np.float64)
    for idx in range(js.shape[0]):
        j = js[idx]
        v = z[j]
        if v < n_a:
            taken[v] = False
            n_links -= 1
            for jj in range(n_b):
                taken_counts[jj, pattern_ids[jj, v]] -= 1

        n = n_links  # links among the other records
        if n < n_a:
            log_pf = (
                np.log(n + alpha_pi)
                - np.log(n_a - n)
                - np.log(n_b - n - 1.0 + beta_pi)
            )
        else:
            log_pf = -np.inf

        mx = 0.0  # the no-link option contributes log weight 0
        for p in range(P):
            avail[p] = offsets[j, p + 1] - offsets[j, p] - taken_counts[j, p]
            if avail[p] > 0 and llr[p] > -np.inf:
                lw = llr[p] + log_pf
                if lw > mx:
                    mx = lw
        nolink_w = np.exp(0.0 - mx)
        total = nolink_w
        for p in range(P):
            if avail[p] > 0 and llr[p] > -np.inf:
                w[p] = avail[p] * np.exp(llr[p] + log_pf - mx)
            else:
                w[p] = 0.0
            total += w[p]

        u = rng.random() * total
        chosen_i = -1
        if u >= nolink_w:
            u -= nolink_w
            chosen_p = -1
            for p in range(P):
                if u < w[p]:
                    chosen_p = p
                    break
                u -= w[p]
            if chosen_p < 0:
                # float round-off at the top edge: last positive-weight pattern
                for p in range(P - 1, -1, -1):
                    if w[p] > 0.0:
                        chosen_p = p
                        break
            if chosen_p >= 0:
                lo = offsets[j, chosen_p]
                gsz = offsets[j, chosen_p + 1] - lo
                for _ in range(64):
                    cand = order[j, lo + np.int64(rng.random() * gsz)]
                    if not taken[cand]:
                        chosen_i = cand
                        break
                if chosen_i < 0:
                    t = np.int64(rng.random() * avail[chosen_p])
                    cnt = 0
                    for g in range(lo, lo + gsz):
                        cand = order[j, g]
                        if not taken[cand]:
                            if cnt == t:
                                chosen_i = cand
                                break
                            cnt += 1

        if chosen_i >= 0:
            z[j] = chosen_i
            taken[chosen_i] = True
            n_links += 1
            for jj in range(n_b):
                taken_counts[jj, pattern_ids[jj, chosen_i]] += 1
        else:
            z[j] = n_a + j
