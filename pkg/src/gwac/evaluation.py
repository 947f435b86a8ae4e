"""Synthetic graphs, quality metrics and the rate-distortion sweep.

All randomness goes through numpy's PCG64 bit generator seeded from
``SeedSequence`` entropy built out of integer tuples, so a seed reproduces
the same graphs and metrics on any platform.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from . import baselines
from .codec import CodecConfig, compress, decompress, edge_transform
from .graph import UGraph, binary_adjacency, sym_normalized_laplacian, weighted_adjacency

KINDS = ("sensor", "community", "knn", "erdos_renyi")
METHODS = ("proposed-line", "proposed-edge", "direct-dct", "direct-lra", "direct-gfb", "binary")
DEFAULT_POINTS = (0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0)
DIFFUSION_ONES = 100
LOSSLESS_STEP = 1e-6


def rng_for(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


# -- generators --------------------------------------------------------------

@dataclass(frozen=True)
class GenSpec:
    kind: str
    n: int = 500
    seed: int = 0
    k: int | None = None
    communities: int = 5
    p_in: float = 0.185
    p_out: float = 0.002
    p: float = 0.05
    weight_mean: float = 1.0
    weight_sd: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown graph kind {self.kind!r}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.kind in ("sensor", "knn") and self.neighbors >= self.n:
            raise ValueError("k must be smaller than n")
        if self.kind == "community" and not 1 <= self.communities <= self.n:
            raise ValueError("bad community count")

    @property
    def neighbors(self) -> int:
        if self.k is not None:
            return self.k
        return 6 if self.kind == "sensor" else 15


def truncated_normal(rng: np.random.Generator, size: int, mean=1.0, sd=0.5,
                     low=0.0, high=2.0) -> np.ndarray:
    """Rejection sampler on ``(low, high]``; exact zeros are rejected."""
    out = np.empty(0)
    while len(out) < size:
        draw = rng.normal(mean, sd, size=max(64, 2 * (size - len(out))))
        out = np.concatenate([out, draw[(draw > low) & (draw <= high)]])
    return out[:size]


def _knn_pairs(points: np.ndarray, k: int) -> np.ndarray:
    _, idx = cKDTree(points).query(points, k + 1)
    src = np.repeat(np.arange(len(points)), k)
    dst = idx[:, 1:].ravel()
    pairs = np.column_stack([np.minimum(src, dst), np.maximum(src, dst)])
    return np.unique(pairs[pairs[:, 0] != pairs[:, 1]], axis=0)


def _bernoulli_pairs(rng, n: int, prob: np.ndarray) -> np.ndarray:
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < prob[iu, ju] if prob.ndim == 2 else rng.random(len(iu)) < prob
    return np.column_stack([iu[keep], ju[keep]])


def community_labels(n: int, communities: int) -> np.ndarray:
    return np.concatenate([np.full(len(c), b) for b, c in
                           enumerate(np.array_split(np.arange(n), communities))])


def generate(spec: GenSpec) -> UGraph:
    rng = rng_for(spec.seed, KINDS.index(spec.kind))
    n = spec.n
    if spec.kind == "sensor":
        pairs = _knn_pairs(rng.random((n, 2)), spec.neighbors)
    elif spec.kind == "knn":
        pairs = _knn_pairs(rng.random((n, 3)), spec.neighbors)
    elif spec.kind == "community":
        block = community_labels(n, spec.communities)
        prob = np.where(block[:, None] == block[None, :], spec.p_in, spec.p_out)
        pairs = _bernoulli_pairs(rng, n, prob)
    else:
        pairs = _bernoulli_pairs(rng, n, np.float64(spec.p))
    w = truncated_normal(rng, len(pairs), spec.weight_mean, spec.weight_sd)
    return UGraph.from_edges(n, pairs, w)


# -- metrics -----------------------------------------------------------------

def snr(ref, rec) -> float:
    """``20 log10(|ref| / |ref - rec|)`` in dB; ``inf`` on exact match."""
    ref = np.asarray(ref, dtype=np.float64)
    rec = np.asarray(rec, dtype=np.float64)
    if ref.shape != rec.shape:
        raise ValueError("shape mismatch")
    num = np.linalg.norm(ref)
    if num == 0:
        raise ValueError("reference has zero norm")
    err = np.linalg.norm(ref - rec)
    return math.inf if err == 0 else float(20.0 * np.log10(num / err))


def _adjacency(g) -> np.ndarray:
    if isinstance(g, UGraph):
        return weighted_adjacency(g).toarray()
    W = g.toarray() if sp.issparse(g) else np.asarray(g, dtype=np.float64)
    return W


def diffusion_operator(g, tau: float = 5.0) -> np.ndarray:
    """Dense ``U exp(-tau Lambda) U^T`` for ``L = D - W``."""
    W = _adjacency(g)
    L = np.diag(W.sum(axis=1)) - W
    lam, U = np.linalg.eigh(0.5 * (L + L.T))
    return (U * np.exp(-tau * lam)) @ U.T


def diffuse(g, x) -> np.ndarray:
    return diffusion_operator(g) @ np.asarray(x, dtype=np.float64)


def diffusion_inputs(n: int, trials: int, seed: int) -> np.ndarray:
    """``(n, trials)`` binary inputs, each with exactly 100 ones."""
    if n < DIFFUSION_ONES:
        raise ValueError(f"need at least {DIFFUSION_ONES} nodes")
    rng = rng_for(seed, 0xD1F)
    X = np.zeros((n, trials))
    for t in range(trials):
        X[rng.choice(n, DIFFUSION_ONES, replace=False), t] = 1.0
    return X


def diffusion_snr(g_ref, g_rec, trials: int = 20, seed: int = 0, ref_operator=None) -> float:
    """Mean SNR between signals diffused on the reference and reconstructed graphs."""
    W = _adjacency(g_ref)
    X = diffusion_inputs(W.shape[0], trials, seed)
    H_ref = diffusion_operator(W) if ref_operator is None else ref_operator
    Y_ref, Y_rec = H_ref @ X, diffusion_operator(g_rec) @ X
    return float(np.mean([snr(Y_ref[:, t], Y_rec[:, t]) for t in range(trials)]))


def kmeans(X: np.ndarray, k: int, rng: np.random.Generator, restarts: int = 20,
           max_iter: int = 300) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; best inertia over restarts."""
    n = len(X)
    best, best_inertia = None, math.inf
    for _ in range(restarts):
        centers = [X[rng.integers(n)]]
        d2 = np.sum((X - centers[0]) ** 2, axis=1)
        for _ in range(1, k):
            total = d2.sum()
            idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
            centers.append(X[idx])
            d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
        C = np.array(centers)
        labels = None
        for _ in range(max_iter):
            dist = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
            new = dist.argmin(axis=1)
            if labels is not None and np.array_equal(new, labels):
                break
            labels = new
            for j in range(k):
                members = X[labels == j]
                if len(members):
                    C[j] = members.mean(axis=0)
        inertia = float(((X - C[labels]) ** 2).sum())
        if inertia < best_inertia - 1e-12:
            best, best_inertia = labels, inertia
    return best


def spectral_clustering(g, k: int, seed: int = 0, restarts: int = 20) -> np.ndarray:
    """Ng-Jordan-Weiss clustering on the symmetric normalized Laplacian."""
    W = _adjacency(g)
    n = W.shape[0]
    if k < 2 or k > n:
        raise ValueError("need 2 <= k <= N")
    Wc = np.where(W > 0, W, 0.0)
    np.fill_diagonal(Wc, 0.0)
    L = sym_normalized_laplacian(Wc).toarray()
    _, U = np.linalg.eigh(0.5 * (L + L.T))
    V = U[:, :k]
    norms = np.linalg.norm(V, axis=1, keepdims=True)
    V = np.divide(V, norms, out=np.zeros_like(V), where=norms > 0)
    return kmeans(V, k, rng_for(seed, 0xC1A5), restarts=restarts)


def cluster_consistency(labels_ref, labels_rec) -> float:
    """Fraction of nodes whose label agrees after optimal relabeling."""
    a = np.asarray(labels_ref)
    b = np.asarray(labels_rec)
    if a.shape != b.shape:
        raise ValueError("label vectors differ in length")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    conf = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(conf, (ai, bi), 1)
    rows, cols = linear_sum_assignment(conf, maximize=True)
    return float(conf[rows, cols].sum() / len(a))


# -- sweep -------------------------------------------------------------------

@dataclass
class MetricReport:
    method: str
    operating_point: float
    bytes_topology: int
    bytes_weights: int
    bytes_total: int
    snr_db: float
    diffusion_snr_db: float
    cluster_consistency: float
    seed: int


@dataclass
class SweepResult:
    rows: list
    reference_bytes: dict


def clusters_for(kind: str | None) -> int:
    return 5 if kind == "community" else 2


def _graph_from_matrix(M: np.ndarray) -> np.ndarray:
    """Nonnegative, zero-diagonal adjacency used by the graph-based metrics."""
    A = np.where(M > 0, M, 0.0)
    np.fill_diagonal(A, 0.0)
    return A


class _Reference:
    def __init__(self, g: UGraph, k: int, seed: int, trials: int):
        self.g = g
        self.W = weighted_adjacency(g).toarray()
        self.k = k
        self.seed = seed
        self.trials = trials
        self.H = diffusion_operator(self.W)
        self.labels = spectral_clustering(self.W, k, seed)

    def score(self, method, point, idx, rec, b_topo, b_w, total) -> MetricReport:
        A = _graph_from_matrix(rec)
        labels = spectral_clustering(A, self.k, self.seed + 7919 * (idx + 1)
                                     + 104729 * (METHODS.index(method) + 1))
        return MetricReport(method, float(point), int(b_topo), int(b_w), int(total),
                            snr(self.W, rec),
                            diffusion_snr(self.W, A, self.trials, self.seed, self.H),
                            cluster_consistency(self.labels, labels), self.seed)


def native_points(method: str, g: UGraph, points) -> list:
    """Map budget fractions to each method's own operating parameter.

    A point ``rho`` asks for about ``rho * |E|`` stored coefficients: the
    proposed codecs keep that fraction of the edge signal, the DCT/GFB
    baselines keep ``rho |E| / N^2`` of the matrix coefficients, and LRA
    picks the rank whose ``2 N r + r`` factor entries fit the budget.
    """
    n, m = g.n, max(g.num_edges, 1)
    if method.startswith("proposed"):
        return [float(p) for p in points]
    if method in ("direct-dct", "direct-gfb"):
        return [min(1.0, p * m / n ** 2) for p in points]
    if method == "direct-lra":
        return [int(min(n, max(1, round(p * m / (2 * n + 1))))) for p in points]
    raise ValueError(f"no operating points for {method!r}")


def rd_sweep(g: UGraph, methods=METHODS, operating_points=DEFAULT_POINTS,
             cfg: CodecConfig = CodecConfig(), seed: int = 0, kind: str | None = None,
             trials: int = 20, clusters: int | None = None) -> SweepResult:
    """Compress/decompress ``g`` at every (method, point) cell and score it.

    ``operating_points`` are budget fractions (see :func:`native_points`) or
    a mapping from method to explicit native points.
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    ref = _Reference(g, clusters or clusters_for(kind), seed, trials)
    rows = []
    transforms = {}
    for method in methods:
        if method == "binary":
            res = baselines.binary_baseline(g)
            rows.append(ref.score(method, 1.0, 0, res.reconstructed, res.bytes, 0, res.bytes))
            continue
        pts = (operating_points[method] if isinstance(operating_points, dict)
               else native_points(method, g, operating_points))
        for idx, p in enumerate(pts):
            if method.startswith("proposed"):
                mode = method.split("-")[1]
                c = replace(cfg, operator_mode=mode, keep_fraction=float(p))
                if mode not in transforms:
                    transforms[mode] = edge_transform(g, c)
                b = compress(g, c, transforms[mode])
                rec_g = decompress(b, transforms[mode])
                rows.append(ref.score(method, p, idx, weighted_adjacency(rec_g).toarray(),
                                      b.topology_bytes, b.weights_bytes, b.total_bytes))
                continue
            if method == "direct-dct":
                res = baselines.direct_dct(ref.W, p, cfg.quant_step)
            elif method == "direct-lra":
                res = baselines.direct_lra(ref.W, int(p), cfg.quant_step)
            else:
                res = baselines.direct_gfb(ref.W, g, None, p, cfg.quant_step, cfg.m_max)
            rows.append(ref.score(method, p, idx, res.reconstructed, 0, res.bytes, res.bytes))
    lossless = compress(g, replace(cfg, keep_fraction=1.0, quant_step=LOSSLESS_STEP))
    references = {"lossless_weighted": lossless.topology_bytes + lossless.weights_bytes,
                  "lossless_binary": lossless.topology_bytes}
    return SweepResult(rows, references)


def report_fields() -> list[str]:
    return [f.name for f in fields(MetricReport)]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report_fields())
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def rows_to_json(rows) -> str:
    return json.dumps([{k: _json_value(v) for k, v in asdict(r).items()} for r in rows],
                      indent=1) + "\n"
