"""Hot inner loops, each with a numba kernel and a pure-numpy twin.

The public names (``resize_bilinear``, ``rotate_bilinear``, ``histogram256``,
``sq_distances``, ``knn_vote``) dispatch to one or the other according to
:data:`drmanifold._accel.USE_NUMBA`. Both variants perform the same floating
point operations in the same order so they agree bit for bit; the test suite
checks this directly.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# Sampling points this close outside the source grid still count as inside.
EDGE_EPS = 1e-9


# --------------------------------------------------------------------------
# bilinear resize (half-pixel centers)
# --------------------------------------------------------------------------

def _axis_coords(n_out, n_in):
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1.0)
    i0 = np.floor(pos).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, pos - i0


def resize_bilinear_np(src, out_h, out_w):
    """Resize an ``(H, W, C)`` uint8 array; returns uint8 ``(out_h, out_w, C)``."""
    h, w, _ = src.shape
    r0, r1, fr = _axis_coords(out_h, h)
    c0, c1, fc = _axis_coords(out_w, w)
    s = src.astype(np.float64)
    fr = fr[:, None, None]
    fc = fc[None, :, None]
    top = (1.0 - fc) * s[r0][:, c0] + fc * s[r0][:, c1]
    bot = (1.0 - fc) * s[r1][:, c0] + fc * s[r1][:, c1]
    val = (1.0 - fr) * top + fr * bot
    return np.clip(np.floor(val + 0.5), 0, 255).astype(np.uint8)


@njit
def resize_bilinear_nb(src, out_h, out_w):
    h, w, nc = src.shape
    out = np.empty((out_h, out_w, nc), dtype=np.uint8)
    sy = h / out_h
    sx = w / out_w
    for r in range(out_h):
        py = (r + 0.5) * sy - 0.5
        py = min(max(py, 0.0), h - 1.0)
        r0 = int(np.floor(py))
        r1 = min(r0 + 1, h - 1)
        fr = py - r0
        for c in range(out_w):
            px = (c + 0.5) * sx - 0.5
            px = min(max(px, 0.0), w - 1.0)
            c0 = int(np.floor(px))
            c1 = min(c0 + 1, w - 1)
            fc = px - c0
            for k in range(nc):
                top = (1.0 - fc) * np.float64(src[r0, c0, k]) + fc * np.float64(src[r0, c1, k])
                bot = (1.0 - fc) * np.float64(src[r1, c0, k]) + fc * np.float64(src[r1, c1, k])
                v = np.floor((1.0 - fr) * top + fr * bot + 0.5)
                out[r, c, k] = min(max(v, 0.0), 255.0)
    return out


# --------------------------------------------------------------------------
# rotation about the image center, inverse-mapped bilinear sampling, zero fill
# --------------------------------------------------------------------------

def rotate_bilinear_np(src, cos_t, sin_t):
    h, w = src.shape
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    dr = np.arange(h, dtype=np.float64)[:, None] - cy
    dc = np.arange(w, dtype=np.float64)[None, :] - cx
    py = cy + (cos_t * dr + sin_t * dc)
    px = cx + (-sin_t * dr + cos_t * dc)
    inside = (py >= -EDGE_EPS) & (py <= h - 1 + EDGE_EPS) & (px >= -EDGE_EPS) & (px <= w - 1 + EDGE_EPS)
    py = np.clip(py, 0.0, h - 1.0)
    px = np.clip(px, 0.0, w - 1.0)
    r0 = np.floor(py).astype(np.int64)
    c0 = np.floor(px).astype(np.int64)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = py - r0
    fc = px - c0
    s = src.astype(np.float64)
    top = (1.0 - fc) * s[r0, c0] + fc * s[r0, c1]
    bot = (1.0 - fc) * s[r1, c0] + fc * s[r1, c1]
    val = np.floor((1.0 - fr) * top + fr * bot + 0.5)
    out = np.clip(val, 0, 255).astype(np.uint8)
    out[~inside] = 0
    return out


@njit
def rotate_bilinear_nb(src, cos_t, sin_t):
    h, w = src.shape
    out = np.zeros((h, w), dtype=np.uint8)
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    for r in range(h):
        dr = r - cy
        for c in range(w):
            dc = c - cx
            py = cy + (cos_t * dr + sin_t * dc)
            px = cx + (-sin_t * dr + cos_t * dc)
            if py < -EDGE_EPS or py > h - 1 + EDGE_EPS or px < -EDGE_EPS or px > w - 1 + EDGE_EPS:
                continue
            py = min(max(py, 0.0), h - 1.0)
            px = min(max(px, 0.0), w - 1.0)
            r0 = int(np.floor(py))
            c0 = int(np.floor(px))
            r1 = min(r0 + 1, h - 1)
            c1 = min(c0 + 1, w - 1)
            fr = py - r0
            fc = px - c0
            top = (1.0 - fc) * np.float64(src[r0, c0]) + fc * np.float64(src[r0, c1])
            bot = (1.0 - fc) * np.float64(src[r1, c0]) + fc * np.float64(src[r1, c1])
            v = np.floor((1.0 - fr) * top + fr * bot + 0.5)
            out[r, c] = min(max(v, 0.0), 255.0)
    return out


# --------------------------------------------------------------------------
# 256-bin histogram
# --------------------------------------------------------------------------

def histogram256_np(img):
    return np.bincount(img.ravel(), minlength=256).astype(np.int64)


@njit
def histogram256_nb(img):
    counts = np.zeros(256, dtype=np.int64)
    flat = img.ravel()
    for i in range(flat.size):
        counts[flat[i]] += 1
    return counts


# --------------------------------------------------------------------------
# brute-force nearest neighbours
# --------------------------------------------------------------------------

def sq_distances_np(a, b, chunk=64):
    """Squared Euclidean distances, summed left to right over features."""
    out = np.empty((a.shape[0], b.shape[0]))
    for start in range(0, a.shape[0], chunk):
        diff = a[start:start + chunk, None, :] - b[None, :, :]
        diff *= diff
        acc = np.zeros(diff.shape[:2])
        for j in range(diff.shape[2]):
            acc += diff[:, :, j]
        out[start:start + chunk] = acc
    return out


@njit
def sq_distances_nb(a, b):
    n, d = a.shape
    m = b.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(d):
                diff = a[i, t] - b[j, t]
                acc += diff * diff
            out[i, j] = acc
    return out


def knn_vote_np(d2, labels, k, n_classes):
    """Majority vote among the ``k`` smallest entries of each row of ``d2``.

    Distance ties go to the smaller column index (stable sort); vote ties go
    to the smallest class label.
    """
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    votes = np.zeros((d2.shape[0], n_classes), dtype=np.int64)
    np.add.at(votes, (np.repeat(np.arange(d2.shape[0]), k), labels[order].ravel()), 1)
    return np.argmax(votes, axis=1).astype(np.int64)


@njit
def knn_vote_nb(d2, labels, k, n_classes):
    n = d2.shape[0]
    out = np.empty(n, dtype=np.int64)
    votes = np.zeros(n_classes, dtype=np.int64)
    best_d = np.empty(k)
    best_j = np.empty(k, dtype=np.int64)
    for i in range(n):
        # insertion into a sorted top-k list; strict comparison keeps the
        # earlier column on equal distances, as a stable sort would
        filled = 0
        for j in range(d2.shape[1]):
            dj = d2[i, j]
            if filled == k and not dj < best_d[k - 1]:
                continue
            pos = filled if filled < k else k - 1
            while pos > 0 and dj < best_d[pos - 1]:
                if pos < k:
                    best_d[pos] = best_d[pos - 1]
                    best_j[pos] = best_j[pos - 1]
                pos -= 1
            best_d[pos] = dj
            best_j[pos] = j
            if filled < k:
                filled += 1
        votes[:] = 0
        for t in range(k):
            votes[labels[best_j[t]]] += 1
        best = 0
        for c in range(1, n_classes):
            if votes[c] > votes[best]:
                best = c
        out[i] = best
    return out


if USE_NUMBA:
    resize_bilinear = resize_bilinear_nb
    rotate_bilinear = rotate_bilinear_nb
    histogram256 = histogram256_nb
    sq_distances = sq_distances_nb
    knn_vote = knn_vote_nb
else:
    resize_bilinear = resize_bilinear_np
    rotate_bilinear = rotate_bilinear_np
    histogram256 = histogram256_np
    sq_distances = sq_distances_np
    knn_vote = knn_vote_np
