"""Batched masked alternating-least-squares engine.

Fits C independent rank-r factor pairs against a shared observed matrix,
each member seeing the observed support minus its own hidden entries.
Shared full-support sums go through BLAS matmuls; the per-member hidden
entries are subtracted by small compiled kernels, so the cost per sweep is
almost independent of the ensemble's combined support size.
"""

from __future__ import annotations

import numpy as np
from numba import njit


class DegenerateSupportError(ValueError):
    """A member was asked to fit an entirely empty support."""


@njit(cache=True)
def _floyd_sample(uniforms, d, out):
    """Exact-count without-replacement sampling of out.shape[1] indices from
    range(d) per member, consuming one uniform per selected index."""
    C, h = out.shape
    chosen = np.zeros(d, dtype=np.bool_)
    for c in range(C):
        for k in range(h):
            j = d - h + k
            t = int(uniforms[c, k] * (j + 1))
            if t > j:
                t = j
            if chosen[t]:
                out[c, k] = j
                chosen[j] = True
            else:
                out[c, k] = t
                chosen[t] = True
        for k in range(h):
            chosen[out[c, k]] = False


@njit(cache=True)
def _count_hidden(hid_idx, counts):
    """counts[c, idx] += 1 for every hidden entry."""
    C, h = hid_idx.shape
    for c in range(C):
        for k in range(h):
            counts[c, hid_idx[c, k]] += 1


@njit(cache=True)
def _subtract_hidden_rank1(num, gram, hid_primary, hid_secondary, hid_vals, factor):
    """Rank-1 specialization of :func:`_subtract_hidden` on 2-D views."""
    C, h = hid_primary.shape
    for c in range(C):
        for k in range(h):
            i = hid_primary[c, k]
            j = hid_secondary[c, k]
            fa = factor[j, c]
            num[i, c] -= hid_vals[c, k] * fa
            gram[i, c] -= fa * fa


@njit(cache=True)
def _subtract_hidden_rankr(num, gram, hid_primary, hid_secondary, hid_vals, factor):
    C, h = hid_primary.shape
    r = factor.shape[2]
    for c in range(C):
        for k in range(h):
            i = hid_primary[c, k]
            j = hid_secondary[c, k]
            s = hid_vals[c, k]
            for a in range(r):
                fa = factor[j, c, a]
                num[i, c, a] -= s * fa
                for b in range(r):
                    gram[i, c, a, b] -= fa * factor[j, c, b]


def _subtract_hidden(num, gram, hid_primary, hid_secondary, hid_vals, factor):
    """Remove hidden-entry contributions from full-support sums.

    num: (p, C, r) cross sums; gram: (p, C, r, r) Gram sums; factor: (q, C, r)
    is the fixed-side factor.  hid_primary indexes the p axis, hid_secondary
    the q axis.
    """
    if factor.shape[2] == 1:
        p, C = num.shape[:2]
        q = factor.shape[0]
        _subtract_hidden_rank1(
            num.reshape(p, C),
            gram.reshape(p, C),
            hid_primary,
            hid_secondary,
            hid_vals,
            factor.reshape(q, C),
        )
    else:
        _subtract_hidden_rankr(num, gram, hid_primary, hid_secondary, hid_vals, factor)


def _solve_factor(num, gram, ridge):
    """Row-wise ridge solve: returns argmin over X of ||.||^2 given sums."""
    p, C, r = num.shape
    if r == 1:
        den = gram[:, :, 0, 0] + ridge
        out = np.zeros((p, C, 1))
        np.divide(num[:, :, 0], den, out=out[:, :, 0], where=den > 0)
        return out
    a = gram + ridge * np.eye(r)
    solved = np.linalg.solve(a.reshape(p * C, r, r), num.reshape(p * C, r, 1))
    return solved.reshape(p, C, r)


def _cross_sums(dense_scores, dense_mask, factor):
    """Full-support cross and Gram sums against ``factor`` via two matmuls."""
    q, C, r = factor.shape
    num = (dense_scores @ factor.reshape(q, C * r)).reshape(-1, C, r)
    pair = np.einsum("qca,qcb->qcab", factor, factor).reshape(q, C * r * r)
    gram = (dense_mask @ pair).reshape(-1, C, r, r)
    return num, gram


def _objective(sum_sq_kept, v, num_v, gram_v, u, ridge):
    """Kept-support residual plus ridge penalty, from v-side byproducts."""
    term_cross = np.einsum("ncr,ncr->c", v, num_v)
    term_sq = np.einsum("ncr,ncrs,ncs->c", v, gram_v, v)
    norms = np.einsum("mcr,mcr->c", u, u) + np.einsum("ncr,ncr->c", v, v)
    return sum_sq_kept - 2.0 * term_cross + term_sq + ridge * norms


def fit_members(
    dense_scores: np.ndarray,
    dense_mask: np.ndarray,
    hid_rows: np.ndarray,
    hid_cols: np.ndarray,
    rank: int,
    max_iterations: int,
    tolerance: float,
    ridge: float,
    rng: np.random.Generator,
):
    """Fit one factor pair per member.

    dense_scores/dense_mask are the shared (m, n) observed scores (zeros off
    support) and float mask; hid_rows/hid_cols are (C, h) per-member hidden
    entries (h may be zero).  Returns (U, V, history, iterations) where U is
    (m, C, r), V is (n, C, r), history is (C, max_iterations + 1) NaN-padded
    and non-increasing over each member's recorded prefix, and iterations
    counts completed alternations per member.
    """
    m, n = dense_scores.shape
    C, h = hid_rows.shape
    r = rank

    obs_count = float(dense_mask.sum())
    obs_sum = float(dense_scores.sum())
    obs_ssq = float((dense_scores * dense_scores).sum())
    if h > 0:
        hid_vals = np.ascontiguousarray(dense_scores[hid_rows, hid_cols])
        kept_sum = obs_sum - hid_vals.sum(axis=1)
        kept_ssq = obs_ssq - (hid_vals * hid_vals).sum(axis=1)
    else:
        hid_vals = np.zeros((C, 0))
        kept_sum = np.full(C, obs_sum)
        kept_ssq = np.full(C, obs_ssq)
    kept_count = obs_count - h
    if kept_count <= 0:
        raise DegenerateSupportError("member support is empty")

    # i.i.d. uniform init in [0, sqrt(mean kept score / r)] per member.
    scale = np.sqrt(np.maximum(kept_sum / kept_count, 0.0) / r)
    u = rng.random((m, C, r)) * scale[None, :, None]
    v = rng.random((n, C, r)) * scale[None, :, None]

    scores_t = np.ascontiguousarray(dense_scores.T)
    mask_t = np.ascontiguousarray(dense_mask.T)

    u_out = np.empty_like(u)
    v_out = np.empty_like(v)
    history = np.full((C, max_iterations + 1), np.nan)
    iterations = np.zeros(C, dtype=np.int64)
    active = np.ones(C, dtype=bool)

    def col_side(u_cur):
        num_v, gram_v = _cross_sums(scores_t, mask_t, u_cur)
        if h > 0:
            _subtract_hidden(num_v, gram_v, hid_cols, hid_rows, hid_vals, u_cur)
        return num_v, gram_v

    num_v, gram_v = col_side(u)
    history[:, 0] = _objective(kept_ssq, v, num_v, gram_v, u, ridge)
    prev_obj = history[:, 0].copy()

    for it in range(1, max_iterations + 1):
        u_prev, v_prev = u.copy(), v.copy()
        num_u, gram_u = _cross_sums(dense_scores, dense_mask, v)
        if h > 0:
            _subtract_hidden(num_u, gram_u, hid_rows, hid_cols, hid_vals, v)
        u = _solve_factor(num_u, gram_u, ridge)
        num_v, gram_v = col_side(u)
        v = _solve_factor(num_v, gram_v, ridge)
        obj = _objective(kept_ssq, v, num_v, gram_v, u, ridge)

        for c in np.flatnonzero(active):
            if obj[c] > prev_obj[c]:
                if obj[c] - prev_obj[c] <= 1e-9 * max(prev_obj[c], 1.0):
                    # Rounding noise at the fixed point: keep the better iterate.
                    u_out[:, c] = u_prev[:, c]
                    v_out[:, c] = v_prev[:, c]
                    iterations[c] = it - 1
                    active[c] = False
                    continue
                # A genuine increase is left visible in the history.
            history[c, it] = obj[c]
            if prev_obj[c] - obj[c] <= tolerance * max(prev_obj[c], 1e-300):
                u_out[:, c] = u[:, c]
                v_out[:, c] = v[:, c]
                iterations[c] = it
                active[c] = False
            else:
                prev_obj[c] = obj[c]
        if not active.any():
            break

    for c in np.flatnonzero(active):
        u_out[:, c] = u[:, c]
        v_out[:, c] = v[:, c]
        iterations[c] = max_iterations

    _fill_unsupported(u_out, dense_mask.sum(axis=1), hid_rows, C, m)
    _fill_unsupported(v_out, dense_mask.sum(axis=0), hid_cols, C, n)
    return u_out, v_out, history, iterations


def _fill_unsupported(factor_out, obs_counts, hid_idx, C, p):
    """Rows/columns with no kept observations predict like the average fitted
    row rather than zero, which would bias score estimates downward."""
    hidden_counts = np.zeros((C, p), dtype=np.int64)
    if hid_idx.shape[1] > 0:
        _count_hidden(hid_idx, hidden_counts)
    kept = obs_counts[None, :].astype(np.int64) - hidden_counts
    for c in range(C):
        empty = kept[c] == 0
        if empty.any():
            factor_out[empty, c, :] = factor_out[~empty, c, :].mean(axis=0)


def sample_hidden(rng: np.random.Generator, count: int, hide: int, members: int) -> np.ndarray:
    """Per-member uniform without-replacement hidden index sets, (C, hide)."""
    out = np.zeros((members, hide), dtype=np.int64)
    if hide > 0:
        uniforms = rng.random((members, hide))
        _floyd_sample(uniforms, count, out)
    return out


@njit(cache=True)
def _spread_sq_rank1(u, v, mean, out):
    """out[i, j] = (1/C) sum_c (u[i, c] * v[j, c] - mean[i, j])^2.

    Deviation-first form: subtracting before squaring keeps the spread exact
    even when members almost coincide, where a moments formula would cancel.
    """
    m, C = u.shape
    n = v.shape[0]
    for i in range(m):
        for j in range(n):
            s = mean[i, j]
            acc = 0.0
            for c in range(C):
                d = u[i, c] * v[j, c] - s
                acc += d * d
            out[i, j] = acc / C


@njit(cache=True)
def _spread_sq_rankr(u, v, mean, out):
    m, C, r = u.shape
    n = v.shape[0]
    for i in range(m):
        for j in range(n):
            s = mean[i, j]
            acc = 0.0
            for c in range(C):
                pred = 0.0
                for a in range(r):
                    pred += u[i, c, a] * v[j, c, a]
                d = pred - s
                acc += d * d
            out[i, j] = acc / C


def member_spread_sq(u: np.ndarray, v: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Mean squared deviation of member predictions around ``mean``."""
    m, C, r = u.shape
    n = v.shape[0]
    out = np.empty((m, n))
    if r == 1:
        _spread_sq_rank1(u.reshape(m, C), v.reshape(n, C), mean, out)
    else:
        _spread_sq_rankr(u, v, mean, out)
    return out
