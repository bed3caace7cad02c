"""Pure numpy implementations of the hot kernels.

These define the reference semantics; ``_kernels.pyx`` must agree with them
exactly on labels and to rounding on floating-point results.
"""
import numpy as np

BACKEND = "python"


def intersect_count(postings):
    """Size of the intersection of sorted, duplicate-free int arrays."""
    if not postings:
        return 0
    arrays = sorted(postings, key=len)
    acc = np.asarray(arrays[0], dtype=np.int64)
    for other in arrays[1:]:
        if acc.size == 0:
            break
        acc = np.intersect1d(acc, np.asarray(other, dtype=np.int64), assume_unique=True)
    return int(acc.size)


def kmeanspp_indices(points, k, uniforms):
    """Distance-weighted seeding driven by ``k`` pre-drawn uniforms in [0, 1).

    The first center is ``floor(u0 * n)``; each later center is the first
    index whose cumulative squared distance to the chosen centers exceeds
    ``u * total``. When every remaining weight is zero the lowest unchosen
    index is used.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = min(int(uniforms[0] * n), n - 1)
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for c in range(1, k):
        cum = np.cumsum(d2)
        total = cum[-1]
        if total > 0:
            idx = int(np.searchsorted(cum, uniforms[c] * total, side="right"))
            idx = min(idx, n - 1)
        else:
            taken = set(chosen[:c].tolist())
            idx = next(i for i in range(n) if i not in taken)
        chosen[c] = idx
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return chosen


def lloyd(points, centroids, max_iters):
    """Lloyd iterations from the given centroids.

    Returns ``(labels, centroids, trace)``. ``trace`` holds the objective
    after every assignment step and after every update step, so it is
    non-increasing. An empty cluster is re-seeded at the point farthest from
    its assigned centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    centroids = np.array(centroids, dtype=np.float64)
    n = points.shape[0]
    k = centroids.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    trace = []
    for _ in range(max_iters):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        point_d2 = d2[np.arange(n), new_labels]
        trace.append(float(point_d2.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        sizes = np.bincount(labels, minlength=k)
        for j in range(k):
            if sizes[j]:
                centroids[j] = points[labels == j].mean(axis=0)
        for j in np.flatnonzero(sizes == 0):
            far = int(point_d2.argmax())
            centroids[j] = points[far]
            point_d2[far] = 0.0
        trace.append(float(((points - centroids[labels]) ** 2).sum()))
    return labels, centroids, trace


def dispersion(d, labels, k):
    """Sum over clusters of (ordered-pair distance sum) / (2 * size)."""
    d = np.asarray(d, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    total = 0.0
    for r in range(k):
        idx = np.flatnonzero(labels == r)
        if idx.size:
            total += d[np.ix_(idx, idx)].sum() / (2.0 * idx.size)
    return total
