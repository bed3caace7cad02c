"""Gap-spectral clustering of pairwise NWD matrices.

Pipeline: Gaussian affinity from distances, degree normalization, leading
eigenvectors, row normalization, k-means. The number of clusters is chosen
with the gap statistic against reference matrices whose off-diagonal
entries are uniform on the observed distance range.

Randomness comes from one integer seed. Each (reference index, k, restart)
triple gets its own Philox counter block, so results do not depend on
evaluation order.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .core import nwd
from .errors import DegenerateAffinityError, UndefinedNwdError
from .snapshot import FrequencySnapshot, TermSet, normalize_term

LOG_FLOOR = 1e-12
SYMMETRY_TOL = 1e-10

_KMEANS = 0
_REFERENCE = 1


class NoSelectionWarning(UserWarning):
    """No k satisfied the gap selection rule; the largest k was returned."""


def substream(seed: int, b: int = 0, k: int = 0, restart: int = 0, purpose: int = _KMEANS) -> np.random.Generator:
    key = int(seed) & 0xFFFFFFFFFFFFFFFF
    counter = np.array([0, restart, b, (purpose << 32) | k], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    labels: tuple[str, ...]
    d: np.ndarray

    def __post_init__(self):
        labels = tuple(str(l) for l in self.labels)
        d = np.array(self.d, dtype=np.float64)
        n = len(labels)
        if len(set(labels)) != n:
            raise ValueError("labels must be unique")
        if d.shape != (n, n):
            raise ValueError(f"matrix shape {d.shape} does not match {n} labels")
        if not np.all(np.isfinite(d)):
            raise ValueError("distances must be finite")
        if np.any(d < 0):
            raise ValueError("distances must be nonnegative")
        if np.any(np.diag(d) != 0):
            raise ValueError("diagonal must be zero")
        if not np.allclose(d, d.T, rtol=0, atol=SYMMETRY_TOL):
            raise ValueError("matrix must be symmetric")
        d = (d + d.T) / 2
        d.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "d", d)

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.d, other.d)

    def off_diagonal(self) -> np.ndarray:
        return self.d[np.triu_indices(len(self), 1)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.labels)
            for row in self.d:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "DistanceMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty CSV")
        return cls(tuple(rows[0]), np.array([[float(v) for v in r] for r in rows[1:]]))

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "d": self.d.tolist()}


@dataclass(frozen=True)
class ClusterAssignment:
    k: int
    assignment: tuple[int, ...]
    cluster_sizes: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        assignment = tuple(int(a) for a in self.assignment)
        if any(not 0 <= a < self.k for a in assignment):
            raise ValueError(f"cluster indices must lie in [0, {self.k})")
        sizes = tuple(assignment.count(r) for r in range(self.k))
        if any(s == 0 for s in sizes):
            raise ValueError("every cluster must have at least one member")
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "cluster_sizes", sizes)

    def to_dict(self) -> dict:
        return {"k": self.k, "assignment": list(self.assignment), "cluster_sizes": list(self.cluster_sizes)}


@dataclass(frozen=True)
class SpectralParams:
    sigma_rule: str = "median-distance"
    fixed_sigma: float = 1.0
    kmeans_restarts: int = 10
    kmeans_max_iters: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.sigma_rule not in ("median-distance", "fixed"):
            raise ValueError(f"unknown sigma_rule {self.sigma_rule!r}")
        if self.sigma_rule == "fixed" and not self.fixed_sigma > 0:
            raise ValueError("fixed_sigma must be > 0")
        if self.kmeans_restarts < 1 or self.kmeans_max_iters < 1:
            raise ValueError("kmeans_restarts and kmeans_max_iters must be >= 1")


def pairwise_matrix(snapshot: FrequencySnapshot, terms: Sequence[str], clamp: bool = False) -> DistanceMatrix:
    labels = [normalize_term(t) for t in terms]
    seen = set()
    for t in labels:
        if t in seen:
            raise ValueError(f"duplicate term {t!r}: self-distance is degenerate")
        seen.add(t)
    n = len(labels)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            v = nwd(snapshot, TermSet((labels[i], labels[j])), clamp=clamp)
            if not v.defined:
                raise UndefinedNwdError(v.termset, f"NWD undefined for pair ({labels[i]}, {labels[j]})")
            d[i, j] = d[j, i] = v.value
    return DistanceMatrix(tuple(labels), d)


def symmetric_eigen(m, k: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Leading ``k`` eigenpairs of a symmetric matrix, largest eigenvalue first.

    Returns ``(values, vectors)`` with eigenvectors in the columns. Each
    vector's largest-magnitude component is made positive.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")
    n = m.shape[0]
    k = n if k is None else k
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}]")
    values, vectors = np.linalg.eigh((m + m.T) / 2)
    values, vectors = values[::-1][:k], vectors[:, ::-1][:, :k]
    if k:
        pivot = np.abs(vectors).argmax(axis=0)
        signs = np.sign(vectors[pivot, np.arange(k)])
        vectors = vectors * np.where(signs == 0, 1.0, signs)
    return values, vectors


@dataclass(frozen=True, eq=False)
class KMeansResult:
    assignment: ClusterAssignment
    centroids: np.ndarray
    objective: float
    traces: list[list[float]]


def _fill_empty(points, labels, k):
    # only reachable with duplicate points or an exhausted iteration budget
    labels = labels.copy()
    for j in range(k):
        if np.any(labels == j):
            continue
        sizes = np.bincount(labels, minlength=k)
        movable = np.flatnonzero(sizes[labels] > 1)
        cents = np.array([points[labels == r].mean(axis=0) if sizes[r] else points[0] for r in range(k)])
        d2 = ((points[movable] - cents[labels[movable]]) ** 2).sum(axis=1)
        labels[movable[int(d2.argmax())]] = j
    return labels


def kmeans(points, k: int, seed: int = 0, restarts: int = 10, max_iters: int = 100,
           b: int = 0) -> KMeansResult:
    """Best of ``restarts`` Lloyd runs from distance-weighted seeding.

    Restart ``r`` draws its seeding uniforms from the Philox block for
    ``(seed, b, k, r)``; ``b`` lets callers separate independent problems
    that share a seed.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    best = None
    traces = []
    for r in range(restarts):
        uniforms = substream(seed, b, k, r).random(k)
        init = points[kernels.kmeanspp_indices(points, k, uniforms)]
        labels, centroids, trace = kernels.lloyd(points, init, max_iters)
        labels = np.asarray(labels, dtype=np.int64)
        if np.bincount(labels, minlength=k).min() == 0:
            labels = _fill_empty(points, labels, k)
            centroids = np.array([points[labels == j].mean(axis=0) for j in range(k)])
        objective = float(((points - centroids[labels]) ** 2).sum())
        traces.append(list(trace))
        if best is None or objective < best[0]:
            best = (objective, labels, np.asarray(centroids))
    objective, labels, centroids = best
    return KMeansResult(ClusterAssignment(k, tuple(labels.tolist())), centroids, objective, traces)


def affinity_sigma(matrix: DistanceMatrix, params: SpectralParams) -> float:
    if params.sigma_rule == "fixed":
        return params.fixed_sigma
    off = matrix.off_diagonal()
    sigma = float(np.median(off)) if off.size else 0.0
    if sigma <= 0:
        positive = off[off > 0]
        sigma = float(positive.mean()) if positive.size else 1.0
    return sigma


def spectral_embedding(matrix: DistanceMatrix, params: SpectralParams, kmax: int) -> np.ndarray:
    """Leading ``kmax`` eigenvectors of the degree-normalized affinity."""
    sigma = affinity_sigma(matrix, params)
    a = np.exp(-(matrix.d ** 2) / (2 * sigma * sigma))
    np.fill_diagonal(a, 0.0)
    degree = a.sum(axis=1)
    if np.any(degree <= 0):
        isolated = [matrix.labels[i] for i in np.flatnonzero(degree <= 0)]
        raise DegenerateAffinityError(f"zero-degree vertices: {', '.join(isolated)}")
    inv_sqrt = 1.0 / np.sqrt(degree)
    normalized = a * inv_sqrt[:, None] * inv_sqrt[None, :]
    return symmetric_eigen(normalized, kmax)[1]


def _cluster_embedding(vectors: np.ndarray, k: int, params: SpectralParams, b: int) -> ClusterAssignment:
    n = vectors.shape[0]
    if k == 1:
        return ClusterAssignment(1, (0,) * n)
    rows = vectors[:, :k]
    norms = np.linalg.norm(rows, axis=1)
    rows = rows / np.where(norms > 0, norms, 1.0)[:, None]
    return kmeans(rows, k, params.seed, params.kmeans_restarts, params.kmeans_max_iters, b).assignment


def spectral_cluster(matrix: DistanceMatrix, k: int, params: SpectralParams | None = None,
                     b: int = 0) -> ClusterAssignment:
    params = params or SpectralParams()
    n = len(matrix)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    if k == 1:
        return ClusterAssignment(1, (0,) * n)
    return _cluster_embedding(spectral_embedding(matrix, params, k), k, params, b)


def intra_cluster_dispersion(matrix: DistanceMatrix, assignment: ClusterAssignment) -> float:
    """Sum over clusters of the ordered-pair distance sum divided by twice the size."""
    if len(assignment.assignment) != len(matrix):
        raise ValueError("assignment length does not match the matrix")
    return float(kernels.dispersion(matrix.d, np.asarray(assignment.assignment), assignment.k))


@dataclass(frozen=True)
class GapCurve:
    ks: tuple[int, ...]
    W: tuple[float, ...]
    log_W: tuple[float, ...]
    ref_log_W: tuple[float, ...]
    gap: tuple[float, ...]
    sigma: tuple[float, ...]
    s: tuple[float, ...]
    B: int
    selected_k: int
    no_selection: bool = False

    @property
    def kmax(self) -> int:
        return self.ks[-1]

    def to_dict(self) -> dict:
        return {
            "B": self.B,
            "selected_k": self.selected_k,
            "no_selection": self.no_selection,
            "curve": [
                {"k": k, "W": w, "log_W": lw, "ref_log_W": rl, "gap": g, "sigma": sg, "s": s}
                for k, w, lw, rl, g, sg, s in zip(
                    self.ks, self.W, self.log_W, self.ref_log_W, self.gap, self.sigma, self.s)
            ],
        }


def _select(gap: Sequence[float], s: Sequence[float]) -> tuple[int, bool]:
    kmax = len(gap)
    for k in range(1, kmax):
        if gap[k - 1] >= gap[k] - s[k]:
            return k, True
    return kmax, kmax == 1


def select_k(curve: GapCurve) -> int:
    """Smallest k with ``gap(k) >= gap(k+1) - s(k+1)``; the largest k if none."""
    k, found = _select(curve.gap, curve.s)
    if not found:
        warnings.warn(f"no k in 1..{curve.kmax - 1} satisfies the gap rule; using k={k}",
                      NoSelectionWarning, stacklevel=2)
    return k


def reference_matrix(matrix: DistanceMatrix, b: int, seed: int) -> DistanceMatrix:
    """Symmetric zero-diagonal matrix, off-diagonal uniform on the observed range."""
    n = len(matrix)
    off = matrix.off_diagonal()
    lo, hi = (float(off.min()), float(off.max())) if off.size else (0.0, 0.0)
    iu = np.triu_indices(n, 1)
    d = np.zeros((n, n))
    d[iu] = substream(seed, b, 0, 0, _REFERENCE).uniform(lo, hi, size=iu[0].size)
    d = d + d.T
    return DistanceMatrix(matrix.labels, d)


def _log_dispersions(matrix, kmax, params, b):
    vectors = spectral_embedding(matrix, params, kmax) if kmax > 1 else None
    out = []
    for k in range(1, kmax + 1):
        if k == 1:
            assignment = ClusterAssignment(1, (0,) * len(matrix))
        else:
            assignment = _cluster_embedding(vectors, k, params, b)
        w = intra_cluster_dispersion(matrix, assignment)
        out.append((w, math.log(max(w, LOG_FLOOR))))
    return out


def gap_statistic(matrix: DistanceMatrix, kmax: int, B: int = 100, seed: int = 0,
                  params: SpectralParams | None = None, references=None) -> GapCurve:
    """Gap curve for k = 1..kmax.

    ``references`` optionally supplies the B reference matrices; by default
    they are drawn uniformly on the observed off-diagonal range.
    """
    n = len(matrix)
    if not 1 <= kmax <= n:
        raise ValueError(f"kmax must lie in [1, {n}]")
    if B < 1:
        raise ValueError("B must be >= 1")
    params = replace(params or SpectralParams(), seed=seed)
    if references is None:
        references = [reference_matrix(matrix, b, seed) for b in range(1, B + 1)]
    elif len(references) != B:
        raise ValueError(f"expected {B} reference matrices, got {len(references)}")

    data = _log_dispersions(matrix, kmax, params, 0)
    ref = np.array([[lw for _, lw in _log_dispersions(r, kmax, params, b)]
                    for b, r in enumerate(references, start=1)])
    ref_mean = ref.mean(axis=0)
    sigma = ref.std(axis=0)
    s = sigma * math.sqrt(1 + 1 / B)
    log_w = np.array([lw for _, lw in data])
    gap = ref_mean - log_w
    selected, found = _select(gap, s)
    return GapCurve(
        ks=tuple(range(1, kmax + 1)),
        W=tuple(w for w, _ in data),
        log_W=tuple(log_w.tolist()),
        ref_log_W=tuple(ref_mean.tolist()),
        gap=tuple(gap.tolist()),
        sigma=tuple(sigma.tolist()),
        s=tuple(s.tolist()),
        B=B,
        selected_k=selected,
        no_selection=not found,
    )
