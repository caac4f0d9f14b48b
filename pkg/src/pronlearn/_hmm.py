"""Numba kernels for sentence HMMs stored as flat route/edge arrays.

Sentence ``n`` owns states ``st_off[n]:st_off[n+1]`` (grapheme row ids in
``st_g``), phones ``ph_off[n]:ph_off[n+1]`` and routes/edges
``rt_off[n]:rt_off[n+1]``.  Route endpoints are sentence-local state indices;
``-1`` as source means "sentence start" and ``-1`` as destination means
"sentence end".
"""
import numpy as np
from numba import njit

NCOMP = 5


@njit(cache=True)
def forward_backward(st_off, st_g, ph_off, ph, rt_off, rt_mid, rt_src, rt_dst, rt_p, rt_comp, emis, active):
    """Scaled forward-backward with expected emission and route-component counts.

    Routes of sentence ``n`` are ordered start | internal | end:
    ``rt_off[n] <= rt_mid[2n] <= rt_mid[2n+1] <= rt_off[n+1]``.
    """
    n_sent = st_off.shape[0] - 1
    emis_counts = np.zeros(emis.shape)
    comp_counts = np.zeros(NCOMP)
    ll = np.full(n_sent, -np.inf)
    for n in range(n_sent):
        if not active[n]:
            continue
        s0 = st_off[n]
        S = st_off[n + 1] - s0
        p0 = ph_off[n]
        T = ph_off[n + 1] - p0
        r0 = rt_off[n]
        ra = rt_mid[2 * n]
        rb = rt_mid[2 * n + 1]
        r1 = rt_off[n + 1]
        if T == 0 or S == 0:
            continue
        em = np.empty((T, S))
        for t in range(T):
            o = ph[p0 + t]
            for s in range(S):
                em[t, s] = emis[st_g[s0 + s], o]
        alpha = np.zeros((T, S))
        scale = np.zeros(T)
        for r in range(r0, ra):
            if rt_dst[r] >= 0:
                alpha[0, rt_dst[r]] += rt_p[r]
        ok = True
        for t in range(T):
            if t > 0:
                prev = alpha[t - 1]
                cur = alpha[t]
                for r in range(ra, rb):
                    cur[rt_dst[r]] += prev[rt_src[r]] * rt_p[r]
            tot = 0.0
            for s in range(S):
                alpha[t, s] *= em[t, s]
                tot += alpha[t, s]
            if tot <= 0.0:
                ok = False
                break
            scale[t] = tot
            inv = 1.0 / tot
            for s in range(S):
                alpha[t, s] *= inv
        if not ok:
            continue
        cend = 0.0
        for r in range(rb, r1):
            cend += alpha[T - 1, rt_src[r]] * rt_p[r]
        if cend <= 0.0:
            continue
        beta = np.zeros((T, S))
        for r in range(rb, r1):
            beta[T - 1, rt_src[r]] += rt_p[r] / cend
        # w[t, s] = em[t, s] * beta[t, s] / scale[t]
        w = np.empty((T, S))
        for s in range(S):
            w[T - 1, s] = em[T - 1, s] * beta[T - 1, s] / scale[T - 1]
        for t in range(T - 2, -1, -1):
            nxt = w[t + 1]
            cur = beta[t]
            for r in range(ra, rb):
                cur[rt_src[r]] += rt_p[r] * nxt[rt_dst[r]]
            for s in range(S):
                w[t, s] = em[t, s] * beta[t, s] / scale[t]
        total = np.log(cend)
        for t in range(T):
            total += np.log(scale[t])
        ll[n] = total
        for t in range(T):
            o = ph[p0 + t]
            for s in range(S):
                emis_counts[st_g[s0 + s], o] += alpha[t, s] * beta[t, s]
        for r in range(r0, ra):
            b = rt_dst[r]
            if b >= 0:
                xi = rt_p[r] * w[0, b]
                for c in range(NCOMP):
                    comp_counts[c] += xi * rt_comp[r, c]
        for r in range(ra, rb):
            a = rt_src[r]
            b = rt_dst[r]
            xi = 0.0
            for t in range(T - 1):
                xi += alpha[t, a] * w[t + 1, b]
            xi *= rt_p[r]
            for c in range(NCOMP):
                comp_counts[c] += xi * rt_comp[r, c]
        for r in range(rb, r1):
            xi = alpha[T - 1, rt_src[r]] * rt_p[r] / cend
            for c in range(NCOMP):
                comp_counts[c] += xi * rt_comp[r, c]
    return emis_counts, comp_counts, ll


@njit(cache=True)
def _better(score, rank, src, best, best_rank, best_src):
    tol = 1e-12 * max(1.0, abs(score), abs(best))
    if score > best + tol:
        return True
    if score < best - tol:
        return False
    if rank != best_rank:
        return rank < best_rank
    return src < best_src


@njit(cache=True)
def viterbi(st_off, st_g, ph_off, ph, ed_off, ed_src, ed_dst, ed_logp, ed_rank, log_emis, active):
    """Best state path per sentence.

    Ties within 1e-12 relative prefer the lower edge rank (advance, loop,
    skip), then the lower predecessor index.
    """
    n_sent = st_off.shape[0] - 1
    paths = np.full(ph.shape[0], -1, dtype=np.int64)
    scores = np.full(n_sent, -np.inf)
    for n in range(n_sent):
        if not active[n]:
            continue
        s0 = st_off[n]
        S = st_off[n + 1] - s0
        p0 = ph_off[n]
        T = ph_off[n + 1] - p0
        e0 = ed_off[n]
        e1 = ed_off[n + 1]
        if T == 0 or S == 0:
            continue
        delta = np.full((T, S), -np.inf)
        back = np.full((T, S), -1, dtype=np.int64)
        brank = np.full((T, S), 99, dtype=np.int64)
        for e in range(e0, e1):
            if ed_src[e] == -1 and ed_dst[e] >= 0:
                b = ed_dst[e]
                delta[0, b] = ed_logp[e] + log_emis[st_g[s0 + b], ph[p0]]
        for t in range(1, T):
            o = ph[p0 + t]
            for e in range(e0, e1):
                a = ed_src[e]
                b = ed_dst[e]
                if a < 0 or b < 0 or delta[t - 1, a] == -np.inf:
                    continue
                sc = delta[t - 1, a] + ed_logp[e]
                if back[t, b] == -1 or _better(sc, ed_rank[e], a, delta[t, b], brank[t, b], back[t, b]):
                    delta[t, b] = sc
                    back[t, b] = a
                    brank[t, b] = ed_rank[e]
            for s in range(S):
                if back[t, s] != -1:
                    delta[t, s] += log_emis[st_g[s0 + s], o]
        best = -np.inf
        best_s = -1
        best_rank = 99
        for e in range(e0, e1):
            a = ed_src[e]
            if a >= 0 and ed_dst[e] == -1 and delta[T - 1, a] > -np.inf:
                sc = delta[T - 1, a] + ed_logp[e]
                if best_s == -1 or _better(sc, ed_rank[e], a, best, best_rank, best_s):
                    best = sc
                    best_s = a
                    best_rank = ed_rank[e]
        if best_s == -1:
            continue
        scores[n] = best
        s = best_s
        for t in range(T - 1, -1, -1):
            paths[p0 + t] = s
            s = back[t, s]
    return paths, scores
