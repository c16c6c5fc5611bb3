"""K-means over fused representations and the three clustering metrics
(accuracy under optimal cluster-to-class matching, normalized mutual
information, adjusted Rand index)."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ArgumentError


@dataclass(frozen=True)
class ClusteringReport:
    """One evaluated clustering run, serializable as a CSV row."""

    acc: float
    nmi: float
    ari: float
    k: int
    seed: int
    dataset: str = ""
    mr: float | None = None
    method: str = "imvclust"
    run_id: str = ""
    config_hash: str = ""

    CSV_HEADER = "run_id,dataset,mr,seed,k,acc,nmi,ari,method"

    def csv_row(self) -> str:
        mr = "" if self.mr is None else f"{self.mr:.6f}"
        return (f"{self.run_id},{self.dataset},{mr},{self.seed},{self.k},"
                f"{self.acc:.6f},{self.nmi:.6f},{self.ari:.6f},{self.method}")


@dataclass
class _LloydRun:
    labels: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: list = field(default_factory=list)


def _squared_distances(x, centers):
    d2 = (x * x).sum(axis=1)[:, None] + (centers * centers).sum(axis=1)[None, :]
    d2 -= 2.0 * (x @ centers.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _plus_plus_init(x, k, rng):
    """Greedy distance-weighted seeding: candidates drawn with probability
    proportional to the squared distance to the nearest chosen center, and
    the candidate that shrinks total inertia most wins."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=x.dtype)
    centers[0] = x[rng.integers(n)]
    closest = _squared_distances(x, centers[:1])[:, 0]
    n_candidates = 2 + int(np.log(k))
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all points coincide with chosen centers; any point works
            centers[j] = x[rng.integers(n)]
            continue
        cand = rng.choice(n, size=n_candidates, p=closest / total, replace=True)
        best_idx, best_cost = cand[0], np.inf
        for c in cand:
            cost = np.minimum(closest, _squared_distances(x, x[c][None, :])[:, 0]).sum()
            if cost < best_cost:
                best_idx, best_cost = c, cost
        centers[j] = x[best_idx]
        closest = np.minimum(closest, _squared_distances(x, centers[j][None, :])[:, 0])
    return centers


def _lloyd(x, k, rng, max_iters, tol) -> _LloydRun:
    centers = _plus_plus_init(x, k, rng)
    labels = np.full(x.shape[0], -1, dtype=np.int64)
    inertia = np.inf
    history = []
    for it in range(max_iters):
        d2 = _squared_distances(x, centers)
        new_labels = d2.argmin(axis=1)
        point_cost = d2[np.arange(x.shape[0]), new_labels]
        new_inertia = float(point_cost.sum())
        history.append(new_inertia)
        converged = (new_labels == labels).all() or (
            np.isfinite(inertia) and inertia - new_inertia <= tol * inertia
        )
        labels = new_labels
        inertia = new_inertia
        if converged:
            break
        for j in range(k):
            sel = labels == j
            if sel.any():
                centers[j] = x[sel].mean(axis=0)
            else:
                # revive at the point farthest from its assigned center
                far = int(point_cost.argmax())
                centers[j] = x[far]
                labels[far] = j
                point_cost[far] = 0.0
    return _LloydRun(labels, inertia, len(history), history)


def kmeans(z, k: int, seed: int = 0, restarts: int = 10, max_iters: int = 300,
           tol: float = 1e-4) -> np.ndarray:
    """Lloyd's algorithm with greedy distance-weighted seeding.

    Runs ``restarts`` independent seeded attempts and returns the labels
    of the one with the lowest within-cluster sum of squares (ties break
    toward the earliest restart). Deterministic given ``seed``.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ArgumentError("kmeans expects a 2-D matrix")
    if k < 2:
        raise ArgumentError(f"k must be >= 2, got {k}")
    if z.shape[0] < k:
        raise ArgumentError(f"need at least k={k} rows, got {z.shape[0]}")
    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        run = _lloyd(z, k, np.random.default_rng(child), max_iters, tol)
        if best is None or run.inertia < best.inertia:
            best = run
    return best.labels


def _check_partitions(y, yhat):
    y = np.asarray(y).ravel()
    yhat = np.asarray(yhat).ravel()
    if y.size != yhat.size:
        raise ArgumentError(f"label lengths differ: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise ArgumentError("labels are empty")
    return y, yhat


def _contingency(y, yhat):
    _, yi = np.unique(y, return_inverse=True)
    _, pi = np.unique(yhat, return_inverse=True)
    r, c = yi.max() + 1, pi.max() + 1
    table = np.zeros((r, c), dtype=np.int64)
    np.add.at(table, (yi, pi), 1)
    return table


def accuracy(y, yhat) -> float:
    """Fraction matched under the best one-to-one cluster-to-class map,
    found by optimal assignment on the contingency table."""
    y, yhat = _check_partitions(y, yhat)
    table = _contingency(y, yhat)
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum()) / y.size


def nmi(y, yhat, average: str = "geometric") -> float:
    """Normalized mutual information with natural logarithms.

    Normalization is the geometric mean of the entropies by default
    (``average="arithmetic"`` uses their mean). Two single-cluster
    partitions score 1; one trivial partition against a non-trivial one
    scores 0.
    """
    if average not in ("geometric", "arithmetic"):
        raise ArgumentError(f"unknown nmi average {average!r}")
    y, yhat = _check_partitions(y, yhat)
    table = _contingency(y, yhat)
    n = table.sum()
    # marginals from integer counts so trivial partitions get exact zeros
    pi = table.sum(axis=1) / n
    pj = table.sum(axis=0) / n
    pij = table / n
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / np.outer(pi, pj)[nz])).sum())
    hy = float(-(pi[pi > 0] * np.log(pi[pi > 0])).sum())
    hp = float(-(pj[pj > 0] * np.log(pj[pj > 0])).sum())
    if hy == 0.0 and hp == 0.0:
        return 1.0
    if hy == 0.0 or hp == 0.0:
        return 0.0
    denom = np.sqrt(hy * hp) if average == "geometric" else 0.5 * (hy + hp)
    return float(np.clip(mi / denom, 0.0, 1.0))


def ari(y, yhat) -> float:
    """Adjusted Rand index from pair counts: (Index - E) / (Max - E)."""
    y, yhat = _check_partitions(y, yhat)
    table = _contingency(y, yhat).astype(np.float64)
    n = table.sum()

    def comb2(a):
        return (a * (a - 1.0) / 2.0).sum()

    sum_ij = comb2(table)
    sum_a = comb2(table.sum(axis=1))
    sum_b = comb2(table.sum(axis=0))
    total = n * (n - 1.0) / 2.0
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if abs(max_index - expected) < 1e-12:
        # both partitions trivial in the same way, i.e. equal
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def config_hash(payload: str) -> str:
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:8]


def evaluate(z, y, k: int | None = None, seed: int = 0, restarts: int = 10,
             nmi_average: str = "geometric", dataset: str = "",
             mr: float | None = None, method: str = "imvclust",
             run_id: str = "", cfg_hash: str = "") -> ClusteringReport:
    """Cluster ``z`` with k-means and score against the true labels."""
    y = np.asarray(y).ravel()
    if k is None:
        k = int(np.unique(y).size)
    yhat = kmeans(z, k, seed=seed, restarts=restarts)
    return ClusteringReport(
        acc=accuracy(y, yhat),
        nmi=nmi(y, yhat, average=nmi_average),
        ari=ari(y, yhat),
        k=k,
        seed=seed,
        dataset=dataset,
        mr=mr,
        method=method,
        run_id=run_id,
        config_hash=cfg_hash,
    )
