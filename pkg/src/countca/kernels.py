"""Hot inner loops.

Every kernel has a numba implementation (``*_nb``) and a vectorised numpy
implementation (``*_np``).  The public name is bound to one of them at import
time according to :mod:`countca._accel`.  Both paths must agree bit for bit;
``tests/test_kernels.py`` checks this and ``benchmarks/bench_kernels.py``
times them against each other.

Symbol codes for the counter automaton: digits ``0..3`` and ``E = 4``.
Arrays are ``uint8`` with shape ``(batch, width)``.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

E = 4


# ---------------------------------------------------------------------------
# generic rule tables


def _table_apply_np(cells, table, k, r):
    n, w = cells.shape
    out_w = w - 2 * r
    idx = np.zeros((n, out_w), dtype=np.int64)
    for j in range(2 * r + 1):
        idx = idx * k + cells[:, j : j + out_w]
    return table[idx]


@njit
def _table_apply_nb(cells, table, k, r):
    n, w = cells.shape
    out_w = w - 2 * r
    out = np.empty((n, out_w), dtype=np.uint8)
    for b in range(n):
        for i in range(out_w):
            idx = 0
            for j in range(2 * r + 1):
                idx = idx * k + cells[b, i + j]
            out[b, i] = table[idx]
    return out


def _set_table_apply_np(masks, settable, support, base, r):
    n, w = masks.shape
    out_w = w - 2 * r
    idx = np.zeros((n, out_w), dtype=np.int64)
    for p in support:
        idx = idx * base + masks[:, p : p + out_w]
    return settable[idx]


@njit
def _set_table_apply_nb(masks, settable, support, base, r):
    n, w = masks.shape
    out_w = w - 2 * r
    out = np.empty((n, out_w), dtype=np.uint8)
    for b in range(n):
        for i in range(out_w):
            idx = 0
            for p in support:
                idx = idx * base + masks[b, i + p]
            out[b, i] = settable[idx]
    return out


def _set_enum_apply_np(masks, table, k, r):
    # Evaluate each distinct neighbourhood once; duplicates are the norm.
    n, w = masks.shape
    out_w = w - 2 * r
    width = 2 * r + 1
    win = np.lib.stride_tricks.sliding_window_view(masks, width, axis=1).reshape(-1, width)
    uniq, inv = np.unique(win, axis=0, return_inverse=True)
    res = np.empty(len(uniq), dtype=np.uint8)
    powers = k ** np.arange(width - 1, -1, -1, dtype=np.int64)
    for u, row in enumerate(uniq):
        choices = [np.flatnonzero((int(m) >> np.arange(k)) & 1) for m in row]
        grids = np.meshgrid(*choices, indexing="ij")
        idx = sum(g.ravel() * p for g, p in zip(grids, powers))
        res[u] = np.bitwise_or.reduce(np.left_shift(1, table[idx].astype(np.int64))).astype(np.uint8)
    return res[inv.ravel()].reshape(n, out_w)


@njit
def _set_enum_apply_nb(masks, table, k, r):
    n, w = masks.shape
    width = 2 * r + 1
    out_w = w - 2 * r
    out = np.empty((n, out_w), dtype=np.uint8)
    pos = np.zeros(width, dtype=np.int64)
    opts = np.zeros((width, k), dtype=np.int64)
    cnt = np.zeros(width, dtype=np.int64)
    for b in range(n):
        for i in range(out_w):
            for j in range(width):
                m = masks[b, i + j]
                c = 0
                for s in range(k):
                    if (m >> s) & 1:
                        opts[j, c] = s
                        c += 1
                cnt[j] = c
                pos[j] = 0
            acc = 0
            while True:
                idx = 0
                for j in range(width):
                    idx = idx * k + opts[j, pos[j]]
                acc |= 1 << table[idx]
                j = width - 1
                while j >= 0:
                    pos[j] += 1
                    if pos[j] < cnt[j]:
                        break
                    pos[j] = 0
                    j -= 1
                if j < 0:
                    break
            out[b, i] = acc
    return out


# ---------------------------------------------------------------------------
# counter automaton: projection and digit dynamics


def fp_apply(cells):
    """Projection step (radius 3). Output column ``j`` is input column ``j + 3``."""
    n, w = cells.shape
    out_w = w - 6
    centre = cells[:, 3 : 3 + out_w]
    crowded = np.zeros((n, out_w), dtype=bool)
    for off in (0, 1, 2, 4, 5, 6):
        crowded |= cells[:, off : off + out_w] == E
    out = centre.copy()
    out[(centre == E) & crowded] = 0
    return out


def fp_set_apply(masks):
    """Set-valued projection; exact per cell given independent cell sets."""
    n, w = masks.shape
    out_w = w - 6
    centre = masks[:, 3 : 3 + out_w]
    bit_e = np.uint8(1 << E)
    some_e = np.zeros((n, out_w), dtype=bool)
    some_digit = np.ones((n, out_w), dtype=bool)
    for off in (0, 1, 2, 4, 5, 6):
        m = masks[:, off : off + out_w]
        some_e |= (m & bit_e) != 0
        some_digit &= (m & ~bit_e) != 0
    out = centre & ~bit_e
    has_e = (centre & bit_e) != 0
    out = np.where(has_e & some_digit, out | bit_e, out)
    out = np.where(has_e & some_e, out | np.uint8(1), out)
    return out.astype(np.uint8)


def _fd_vec(a, b, c):
    two3 = (b == 2) | (b == 3)
    val = c.astype(np.int16) - 2 * (c >= 2) + two3 + (b == E) * (1 + (a == 2))
    return np.where(c == E, E, val).astype(np.uint8)


def _fd_apply_np(cells):
    return _fd_vec(cells[:, :-2], cells[:, 1:-1], cells[:, 2:])


@njit
def _fd_cell(a, b, c):
    if c == E:
        return E
    v = c
    if c >= 2:
        v -= 2
    if b == 2 or b == 3:
        v += 1
    elif b == E:
        v += 1
        if a == 2:
            v += 1
    return v


@njit
def _fd_apply_nb(cells):
    n, w = cells.shape
    out = np.empty((n, w - 2), dtype=np.uint8)
    for b in range(n):
        for i in range(w - 2):
            out[b, i] = _fd_cell(cells[b, i], cells[b, i + 1], cells[b, i + 2])
    return out


def _fd_run_np(cells, steps):
    for _ in range(steps):
        cells = _fd_apply_np(cells)
    return cells


@njit
def _fd_run_nb(cells, steps):
    n, w = cells.shape
    cur = cells.copy()
    for t in range(steps):
        lo = 2 * (t + 1)
        # right-to-left keeps the update in place
        for b in range(n):
            for i in range(w - 1, lo - 1, -1):
                cur[b, i] = _fd_cell(cur[b, i - 2], cur[b, i - 1], cur[b, i])
    return cur[:, 2 * steps :].copy()


def _fd_column_np(cells, burn, steps, col):
    n = cells.shape[0]
    out = np.empty((n, steps + 1), dtype=np.uint8)
    for k in np.unique(burn):
        rows = np.flatnonzero(burn == k)
        cur = _fd_run_np(cells[rows], int(k))
        c = col - 2 * int(k)
        for t in range(steps + 1):
            out[rows, t] = cur[:, c - 2 * t]
            if t < steps:
                cur = _fd_apply_np(cur)
    return out


@njit
def _fd_column_nb(cells, burn, steps, col):
    n, w = cells.shape
    out = np.empty((n, steps + 1), dtype=np.uint8)
    cur = np.empty(w, dtype=np.uint8)
    for b in range(n):
        for i in range(w):
            cur[i] = cells[b, i]
        total = burn[b] + steps
        for t in range(total + 1):
            if t >= burn[b]:
                out[b, t - burn[b]] = cur[col]
            if t == total:
                break
            lo = 2 * (t + 1)
            # only the light cone of ``col`` is needed
            start = col - 2 * (total - t - 1)
            if start < lo:
                start = lo
            for i in range(col, start - 1, -1):
                cur[i] = _fd_cell(cur[i - 2], cur[i - 1], cur[i])
    return out


def _fd_driven_np(cells, drive):
    n, w = cells.shape
    steps = drive.shape[1]
    hist = np.empty((n, steps + 1, w), dtype=np.uint8)
    cur = cells.copy()
    cur[:, 0] = 0
    for t in range(steps):
        cur[:, 1] = drive[:, t]
        hist[:, t] = cur
        nxt = cur.copy()
        nxt[:, 2:] = _fd_apply_np(cur)
        cur = nxt
    cur[:, 1] = 0
    hist[:, steps] = cur
    return hist


@njit
def _fd_driven_nb(cells, drive):
    n, w = cells.shape
    steps = drive.shape[1]
    hist = np.empty((n, steps + 1, w), dtype=np.uint8)
    cur = np.empty(w, dtype=np.uint8)
    for b in range(n):
        for i in range(w):
            cur[i] = cells[b, i]
        cur[0] = 0
        for t in range(steps):
            cur[1] = drive[b, t]
            for i in range(w):
                hist[b, t, i] = cur[i]
            for i in range(w - 1, 1, -1):
                cur[i] = _fd_cell(cur[i - 2], cur[i - 1], cur[i])
        cur[1] = 0
        for i in range(w):
            hist[b, steps, i] = cur[i]
    return hist


def _fd_split_np(cells, first, horizon, chunk=4096):
    """First ``t < horizon`` where the overflow bit at the last cell differs
    between the all-0 and all-2 drives (both start with ``first``); else ``horizon``."""
    done = 0
    cur = np.repeat(cells[None, :], 2, axis=0)
    while done < horizon:
        steps = min(chunk, horizon - done)
        drive = np.zeros((2, steps), dtype=np.uint8)
        drive[1, :] = 2
        if done == 0:
            drive[:, 0] = first
        hist = _fd_driven_np(cur, drive)
        bits = hist[:, :steps, -1] == 2
        d = np.flatnonzero(bits[0] != bits[1])
        if len(d):
            return done + int(d[0])
        cur = hist[:, steps].copy()
        done += steps
    return horizon


@njit
def _fd_split_nb(cells, first, horizon):
    w = cells.shape[0]
    lo = cells.copy()
    hi = cells.copy()
    lo[0] = 0
    hi[0] = 0
    for t in range(horizon):
        d0 = first if t == 0 else 0
        d1 = first if t == 0 else 2
        lo[1] = d0
        hi[1] = d1
        if (lo[w - 1] == 2) != (hi[w - 1] == 2):
            return t
        for i in range(w - 1, 1, -1):
            lo[i] = _fd_cell(lo[i - 2], lo[i - 1], lo[i])
            hi[i] = _fd_cell(hi[i - 2], hi[i - 1], hi[i])
    return horizon


def _fd_anchored_divergence_np(x, y, lo, hi, tmax, chunk=256):
    a = x.copy()[None, :]
    b = y.copy()[None, :]
    a[:, :2] = 0
    b[:, :2] = 0
    for t in range(tmax + 1):
        if np.any(a[0, lo:hi] != b[0, lo:hi]):
            return t
        if t == tmax:
            break
        a[:, 2:] = _fd_apply_np(a)
        b[:, 2:] = _fd_apply_np(b)
    return -1


@njit
def _fd_anchored_divergence_nb(x, y, lo, hi, tmax):
    w = x.shape[0]
    a = x.copy()
    b = y.copy()
    a[0] = 0
    a[1] = 0
    b[0] = 0
    b[1] = 0
    for t in range(tmax + 1):
        for i in range(lo, hi):
            if a[i] != b[i]:
                return t
        if t == tmax:
            break
        for i in range(w - 1, 1, -1):
            a[i] = _fd_cell(a[i - 2], a[i - 1], a[i])
            b[i] = _fd_cell(b[i - 2], b[i - 1], b[i])
    return -1


# ---------------------------------------------------------------------------
# counter model H


def _h_run_np(l, c, r, drive, record):
    c = c.astype(np.int64).copy()
    r = r.astype(np.int64).copy()
    l = l.astype(np.int64)
    cap = np.left_shift(np.int64(1), l)
    steps = drive.shape[0]
    m = l.shape[0]
    counts = np.zeros(m, dtype=np.int64)
    if record:
        hc = np.empty((steps + 1, m), dtype=np.int64)
        hr = np.empty((steps + 1, m), dtype=np.int64)
    else:
        hc = np.empty((0, m), dtype=np.int64)
        hr = np.empty((0, m), dtype=np.int64)
    for t in range(steps):
        if record:
            hc[t] = c
            hr[t] = r
        ov = r == 1
        counts += ov
        a = np.ones(m, dtype=np.int64)
        a[1:] += ov[:-1]
        a[0] = drive[t]
        counting = r > 0
        nc = c + a
        wrap = (~counting) & (nc >= cap)
        r = np.where(counting, r - 1, np.where(wrap, l, 0))
        c = np.where(nc >= cap, nc - cap, nc)
    if record:
        hc[steps] = c
        hr[steps] = r
    return c, r, counts, hc, hr


@njit
def _h_run_nb(l, c, r, drive, record):
    m = l.shape[0]
    steps = drive.shape[0]
    c = c.astype(np.int64).copy()
    r = r.astype(np.int64).copy()
    counts = np.zeros(m, dtype=np.int64)
    if record:
        hc = np.empty((steps + 1, m), dtype=np.int64)
        hr = np.empty((steps + 1, m), dtype=np.int64)
    else:
        hc = np.empty((0, m), dtype=np.int64)
        hr = np.empty((0, m), dtype=np.int64)
    for t in range(steps):
        if record:
            for i in range(m):
                hc[t, i] = c[i]
                hr[t, i] = r[i]
        prev_over = False
        for i in range(m):
            over = r[i] == 1
            if over:
                counts[i] += 1
            if i == 0:
                a = drive[t]
            else:
                a = 2 if prev_over else 1
            prev_over = over
            cap = np.int64(1) << l[i]
            nc = c[i] + a
            if r[i] > 0:
                r[i] -= 1
            elif nc >= cap:
                r[i] = l[i]
            if nc >= cap:
                nc -= cap
            c[i] = nc
    if record:
        for i in range(m):
            hc[steps, i] = c[i]
            hr[steps, i] = r[i]
    return c, r, counts, hc, hr


_IMPLS = {
    "table_apply": (_table_apply_nb, _table_apply_np),
    "set_table_apply": (_set_table_apply_nb, _set_table_apply_np),
    "set_enum_apply": (_set_enum_apply_nb, _set_enum_apply_np),
    "fd_apply": (_fd_apply_nb, _fd_apply_np),
    "fd_run": (_fd_run_nb, _fd_run_np),
    "fd_column": (_fd_column_nb, _fd_column_np),
    "fd_driven": (_fd_driven_nb, _fd_driven_np),
    "fd_split": (_fd_split_nb, _fd_split_np),
    "fd_anchored_divergence": (_fd_anchored_divergence_nb, _fd_anchored_divergence_np),
    "h_run": (_h_run_nb, _h_run_np),
}


def implementations(name):
    """Return ``(numba_impl, numpy_impl)`` for kernel ``name``."""
    return _IMPLS[name]


_pick = 0 if USE_NUMBA else 1
table_apply = _IMPLS["table_apply"][_pick]
set_table_apply = _IMPLS["set_table_apply"][_pick]
set_enum_apply = _IMPLS["set_enum_apply"][_pick]
fd_apply = _IMPLS["fd_apply"][_pick]
fd_run = _IMPLS["fd_run"][_pick]
fd_column = _IMPLS["fd_column"][_pick]
fd_driven = _IMPLS["fd_driven"][_pick]
fd_split = _IMPLS["fd_split"][_pick]
fd_anchored_divergence = _IMPLS["fd_anchored_divergence"][_pick]
h_run = _IMPLS["h_run"][_pick]
