"""Hot numeric kernels.

Every kernel exists twice: a loop-form implementation compiled with numba
(``*_nb``) and a vectorised numpy implementation (``*_np``). The public names
at the bottom of the module bind to one or the other depending on
``dpmot._accel.USE_NUMBA``. Both paths are exercised by the test-suite and
compared in ``benchmarks/bench_kernels.py``.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# Linear assignment (shortest augmenting path, Kuhn-Munkres with potentials)
# ---------------------------------------------------------------------------


@njit
def _hungarian_nb(cost):
    # requires n_rows <= n_cols; returns col index per row
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    minv = np.empty(m + 1)
    used = np.empty(m + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = np.inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = np.inf
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    row_to_col = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j] != 0:
            row_to_col[p[j] - 1] = j - 1
    return row_to_col


def _hungarian_np(cost):
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    row_to_col = np.full(n, -1, dtype=np.int64)
    cols = np.nonzero(p[1:])[0]
    row_to_col[p[1:][cols] - 1] = cols
    return row_to_col


# ---------------------------------------------------------------------------
# Second-order alignment f(D~, D)
# ---------------------------------------------------------------------------


@njit
def _nearest_index_nb(d, n, x):
    # first index of the element of d[:n] nearest to x; ties -> smaller index
    lo = 0
    hi = n
    while lo < hi:
        mid = (lo + hi) // 2
        if d[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    if lo == 0:
        return 0
    if lo == n:
        best = n - 1
    elif abs(x - d[lo - 1]) <= abs(d[lo] - x):
        best = lo - 1
    else:
        return lo
    # walk back to the first index with the same gap; left of best, x - d[k]
    # is non-increasing in k even under rounding, so this is a binary search
    gap = x - d[best]
    lo = 0
    hi = best
    while lo < hi:
        mid = (lo + hi) // 2
        if x - d[mid] > gap:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit
def _align_nb(dt, nt, d, nd):
    if nt == 0 or nd == 0:
        return 0.0
    j = _nearest_index_nb(d, nd, dt[0])
    total = 0.0
    for i in range(nt):
        k = j + i
        if k >= nd:
            break
        total += abs(dt[i] - d[k])
    return total


@njit
def _align_matrix_nb(track_vecs, track_len, det_vecs, det_len):
    nt = track_vecs.shape[0]
    no = det_vecs.shape[0]
    out = np.zeros((nt, no))
    for a in range(nt):
        for b in range(no):
            out[a, b] = _align_nb(track_vecs[a], track_len[a], det_vecs[b], det_len[b])
    return out


def _nearest_index_np(d, x):
    # argmin returns the first minimum, which is the tie rule
    return np.argmin(np.abs(np.asarray(x, dtype=float)[:, None] - d[None, :]), axis=1)


def _align_matrix_np(track_vecs, track_len, det_vecs, det_len):
    nt = track_vecs.shape[0]
    no = det_vecs.shape[0]
    out = np.zeros((nt, no))
    if nt == 0 or no == 0:
        return out
    width = track_vecs.shape[1]
    steps = np.arange(width)
    for b in range(no):
        nd = int(det_len[b])
        if nd == 0:
            continue
        d = det_vecs[b, :nd]
        ok = track_len > 0
        first = np.where(ok, track_vecs[:, 0] if width else 0.0, 0.0)
        j = _nearest_index_np(d, first)
        k = j[:, None] + steps[None, :]
        valid = (steps[None, :] < track_len[:, None]) & (k < nd)
        terms = np.where(valid, np.abs(track_vecs - d[np.minimum(k, nd - 1)]), 0.0)
        # sequential accumulation keeps results bit-identical to the loop form
        col = np.add.accumulate(terms, axis=1)[:, -1] if width else np.zeros(nt)
        out[:, b] = np.where(ok, col, 0.0)
    return out


# ---------------------------------------------------------------------------
# Longest common subsequence length
# ---------------------------------------------------------------------------


@njit
def _lcs_nb(a, b):
    n = a.shape[0]
    m = b.shape[0]
    prev = np.zeros(m + 1, dtype=np.int64)
    cur = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        for j in range(m + 1):
            prev[j] = cur[j]
    return prev[m]


def _lcs_np(a, b):
    m = len(b)
    prev = np.zeros(m + 1, dtype=np.int64)
    for x in a:
        cand = np.where(b == x, prev[:-1] + 1, prev[1:])
        cur = np.empty(m + 1, dtype=np.int64)
        cur[0] = 0
        cur[1:] = np.maximum.accumulate(cand) if m else cand
        prev = cur
    return int(prev[m])


# ---------------------------------------------------------------------------
# Batched Kalman predict / update
# ---------------------------------------------------------------------------


@njit
def _kf_predict_nb(means, covs, F, G, Q, controls):
    n, d = means.shape
    out_m = np.empty_like(means)
    out_c = np.empty_like(covs)
    Ft = F.T.copy()
    for k in range(n):
        out_m[k] = F @ means[k] + G @ controls[k]
        a = F @ covs[k] @ Ft + Q
        out_c[k] = 0.5 * (a + a.T)
    return out_m, out_c


def _kf_predict_np(means, covs, F, G, Q, controls):
    out_m = means @ F.T + controls @ G.T
    a = F @ covs @ F.T + Q
    return out_m, 0.5 * (a + np.swapaxes(a, 1, 2))


@njit
def _kf_update_nb(means, covs, H, R, meas):
    n, d = means.shape
    out_m = np.empty_like(means)
    out_c = np.empty_like(covs)
    Ht = H.T.copy()
    eye = np.eye(d)
    for k in range(n):
        pht = covs[k] @ Ht
        s = H @ pht + R
        gain = pht @ np.linalg.inv(s)
        out_m[k] = means[k] + gain @ (meas[k] - H @ means[k])
        a = (eye - gain @ H) @ covs[k]
        out_c[k] = 0.5 * (a + a.T)
    return out_m, out_c


def _kf_update_np(means, covs, H, R, meas):
    pht = covs @ H.T
    s = H @ pht + R
    gain = pht @ np.linalg.inv(s)
    innov = meas - means @ H.T
    out_m = means + np.einsum("nij,nj->ni", gain, innov)
    a = (np.eye(means.shape[1]) - gain @ H) @ covs
    return out_m, 0.5 * (a + np.swapaxes(a, 1, 2))


if USE_NUMBA:
    hungarian = _hungarian_nb
    align_matrix = _align_matrix_nb
    lcs_length = _lcs_nb
    kf_predict_batch = _kf_predict_nb
    kf_update_batch = _kf_update_nb
else:
    hungarian = _hungarian_np
    align_matrix = _align_matrix_np
    lcs_length = _lcs_np
    kf_predict_batch = _kf_predict_np
    kf_update_batch = _kf_update_np

# scalar helpers are always loop-form; without numba njit is a no-op
align_pair = _align_nb
nearest_index = _nearest_index_nb
