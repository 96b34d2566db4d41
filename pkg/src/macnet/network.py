"""Whole-network inference over all node pairs plus graph summary statistics.

``infer_network`` tests every unordered node pair with the chosen
similarity measure, applies false-discovery-rate control across the pair
family, and returns the declared edges together with per-pair diagnostics.
The remaining functions compute the usual summaries of the resulting
undirected graph: degrees, clustering coefficients, normalized betweenness,
connected components, and Jaccard overlap between edge sets.
"""

from __future__ import annotations

import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import inference, numkernel, similarity
from .errors import (
    InsufficientSamples,
    LengthMismatch,
    NodeSetMismatch,
    NotPositiveDefinite,
    OutOfDomain,
    UsageError,
    ZeroVariance,
)

METHODS = ("pearson", "max", "min", "cca")

#: a pair is skipped outright when repairing its estimated joint correlation
#: matrix moves any eigenvalue by more than this
FLOOR_SKIP_DELTA = 0.01
_EIG_FLOOR = 1e-8

#: per-pair homogeneity check is reported against this level
HOMOGENEITY_ALPHA = 0.05


def thread_count() -> int:
    """Worker cap for pairwise loops, from the MACNET_THREADS env var."""
    raw = os.environ.get("MACNET_THREADS", "1")
    try:
        count = int(raw)
    except ValueError:
        raise UsageError(f"MACNET_THREADS must be an integer, got {raw!r}")
    return max(1, count)


@dataclass(frozen=True, eq=False)
class AttributeDataset:
    """Measurements for every node: N_v nodes x K attributes x n samples."""

    node_ids: tuple
    attribute_names: tuple
    samples: np.ndarray
    selected: tuple = None

    def __post_init__(self):
        node_ids = tuple(str(v) for v in self.node_ids)
        attribute_names = tuple(str(a) for a in self.attribute_names)
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 3:
            raise LengthMismatch(f"samples must be 3-d (nodes, attributes, samples), got {samples.shape}")
        if samples.shape[0] != len(node_ids) or samples.shape[1] != len(attribute_names):
            raise LengthMismatch("samples array does not match node/attribute counts")
        if len(set(node_ids)) != len(node_ids):
            raise LengthMismatch("node ids are not unique")
        if len(node_ids) < 2:
            raise InsufficientSamples("need at least 2 nodes")
        if samples.shape[2] < 3:
            raise InsufficientSamples("need at least 3 samples per node")
        if np.any(~np.isfinite(samples)):
            raise LengthMismatch("samples contain non-finite values")
        selected = self.selected
        if selected is None:
            selected = tuple(range(len(attribute_names)))
        else:
            selected = tuple(int(i) for i in selected)
            if not selected:
                raise LengthMismatch("attribute selection is empty")
            if any(i < 0 or i >= len(attribute_names) for i in selected):
                raise LengthMismatch(f"attribute selection out of range: {selected}")
        object.__setattr__(self, "node_ids", node_ids)
        object.__setattr__(self, "attribute_names", attribute_names)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "selected", selected)

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[2]

    @property
    def k(self) -> int:
        return len(self.selected)

    @property
    def selected_names(self) -> tuple:
        return tuple(self.attribute_names[i] for i in self.selected)

    def select(self, names) -> "AttributeDataset":
        """Restrict the active attribute subset, by name."""
        indices = []
        for name in names:
            if name not in self.attribute_names:
                raise LengthMismatch(f"unknown attribute {name!r}")
            indices.append(self.attribute_names.index(name))
        return AttributeDataset(self.node_ids, self.attribute_names, self.samples, tuple(indices))

    def node_matrix(self, index: int) -> np.ndarray:
        """n-by-k sample block of the selected attributes for one node."""
        return self.samples[index, list(self.selected), :].T


@dataclass(frozen=True)
class EdgeRecord:
    node_i: str
    node_j: str
    method: str
    similarity: float
    statistic: float
    df: Optional[int]
    p: float
    q: float
    contrib: Optional[tuple] = None


@dataclass(frozen=True)
class SkippedPair:
    node_i: str
    node_j: str
    reason: str


@dataclass(frozen=True, eq=False)
class InferredNetwork:
    """Declared edges plus the diagnostics needed to audit the run."""

    node_ids: tuple
    attribute_names: tuple
    method: str
    gamma: float
    n_samples: int
    edges: tuple
    tested_pairs: int = 0
    skipped: tuple = ()
    floored: tuple = ()
    homogeneity_reject_fraction: Optional[float] = None
    pvalue_mode: str = "formula"

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_pairs(self) -> frozenset:
        return frozenset(frozenset((e.node_i, e.node_j)) for e in self.edges)

    def adjacency(self) -> dict:
        adj = {v: set() for v in self.node_ids}
        for e in self.edges:
            adj[e.node_i].add(e.node_j)
            adj[e.node_j].add(e.node_i)
        return adj


def _floor_supermatrix(joint: np.ndarray):
    """Repair a non-positive-definite joint correlation estimate.

    Floors eigenvalues at a small positive level and restores the unit
    diagonal.  Returns (matrix, floored, max_change); callers skip the pair
    when max_change exceeds ``FLOOR_SKIP_DELTA``.
    """
    values, vectors = np.linalg.eigh(joint)
    if values[0] > numkernel.PD_TOLERANCE * max(values[-1], 0.0) and values[-1] > 0.0:
        return joint, False, 0.0
    floored_values = np.maximum(values, _EIG_FLOOR)
    max_change = float(np.max(np.abs(floored_values - values)))
    repaired = (vectors * floored_values) @ vectors.T
    scale = np.sqrt(np.diag(repaired))
    repaired = repaired / np.outer(scale, scale)
    np.fill_diagonal(repaired, 1.0)
    repaired = (repaired + repaired.T) / 2.0
    return repaired, True, max_change


@dataclass
class _PairOutcome:
    similarity: float = 0.0
    statistic: float = 0.0
    df: Optional[int] = None
    p: float = 1.0
    contrib: Optional[tuple] = None
    skipped_reason: Optional[str] = None
    floored: bool = False
    homogeneity_reject: Optional[bool] = None


def _check_preconditions(data: AttributeDataset, method: str):
    k = data.k
    n = data.n_samples
    if method not in METHODS:
        raise UsageError(f"method must be one of {METHODS}, got {method!r}")
    if method == "pearson" and k != 1:
        raise UsageError(f"method 'pearson' needs exactly 1 selected attribute, got {k}")
    if method in ("max", "min") and k != 2:
        raise UsageError(f"method {method!r} needs exactly 2 selected attributes, got {k}")
    if method in ("pearson", "max", "min") and n < 4:
        raise InsufficientSamples(f"need at least 4 samples, got {n}")
    if method == "cca" and (n <= 2 * k + 2 or n - 1 < k * (2 * k - 1)):
        raise InsufficientSamples(
            f"n={n} too small for cca with {k} attributes: need n > {2 * k + 2} "
            f"and n-1 >= {k * (2 * k - 1)}"
        )
    variances = data.samples[:, list(data.selected), :].var(axis=2)
    bad = np.argwhere(variances <= 0.0)
    if bad.size:
        vi, ai = bad[0]
        raise ZeroVariance(
            f"node {data.node_ids[vi]!r} attribute "
            f"{data.selected_names[ai]!r} is constant",
            index=int(ai),
        )


def _test_pair(data: AttributeDataset, vi: int, vj: int, method: str,
               sampler: Optional[inference.ExtremeTailSampler]) -> _PairOutcome:
    n = data.n_samples
    block_i = data.node_matrix(vi)
    block_j = data.node_matrix(vj)
    out = _PairOutcome()

    try:
        hom = inference.homogeneity_lrt(block_i, block_j)
        out.homogeneity_reject = bool(hom.p < HOMOGENEITY_ALPHA)
    except (InsufficientSamples, LengthMismatch):
        out.homogeneity_reject = None

    if method == "pearson":
        rho = numkernel.pearson_corr(block_i[:, 0], block_j[:, 0])
        z = inference.fisher_z(rho, n)
        out.similarity = rho
        out.statistic = z
        out.p = min(1.0, 2.0 * inference.normal_sf(abs(z)))
        return out

    if method in ("max", "min"):
        structure = similarity.PairCorrelationStructure.from_samples(block_i, block_j)
        rhos = [float(structure.sigma_ij[l, l]) for l in range(2)]
        zs = [inference.fisher_z(r, n) for r in rhos]
        rho_z = inference.fisher_z_correlation(
            structure.sigma_ii, structure.sigma_jj, structure.sigma_ij
        )
        out.similarity = similarity.aggregate_extreme(rhos, method)
        out.statistic = max(zs) if method == "max" else min(zs)
        if sampler is not None:
            out.p = inference.extreme_corr_mc_pvalue(
                zs[0], zs[1], rho_z, method, two_sided=True, sampler=sampler
            )
        else:
            out.p = inference.extreme_corr_pvalue_two_sided(zs[0], zs[1], rho_z, method)
        return out

    # canonical correlation
    structure = similarity.PairCorrelationStructure.from_samples(block_i, block_j)
    repaired, floored, change = _floor_supermatrix(structure.supermatrix)
    if change > FLOOR_SKIP_DELTA:
        out.skipped_reason = (
            f"joint correlation estimate not positive-definite; repair moved an "
            f"eigenvalue by {change:.3g}"
        )
        return out
    out.floored = floored
    if floored:
        k = data.k
        structure = similarity.PairCorrelationStructure(
            repaired[:k, :k], repaired[k:, k:], repaired[:k, k:]
        )
    try:
        solution = similarity.canonical_corr(structure)
    except NotPositiveDefinite as exc:
        out.skipped_reason = str(exc)
        return out
    test = inference.bartlett_chi2(solution.roots, n, data.k)
    out.similarity = solution.rho_c
    out.statistic = test.statistic
    out.df = test.df
    out.p = test.p
    out.contrib = tuple(float(c) for c in solution.contrib)
    return out


def infer_network(data: AttributeDataset, method: str, gamma: float, *,
                  pvalue_mode: str = "formula") -> InferredNetwork:
    """Test all node pairs with one similarity measure and keep FDR-passing edges.

    Edges are declared two-sidedly.  ``pvalue_mode`` selects the analytic
    tail approximation or the Monte Carlo alternative for the max/min
    methods (the Monte Carlo panel uses a fixed internal seed, so inference
    stays deterministic).  Pairs whose estimated joint correlation matrix
    cannot be repaired are skipped and reported, never silently dropped.
    """
    if not (0.0 < gamma < 1.0):
        raise OutOfDomain(f"FDR level must lie in (0, 1), got {gamma}")
    if pvalue_mode not in ("formula", "montecarlo"):
        raise UsageError(f"pvalue_mode must be 'formula' or 'montecarlo', got {pvalue_mode!r}")
    _check_preconditions(data, method)

    sampler = None
    if pvalue_mode == "montecarlo" and method in ("max", "min"):
        sampler = inference.ExtremeTailSampler()

    pairs = [(i, j) for i in range(data.n_nodes) for j in range(i + 1, data.n_nodes)]
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(
                lambda ij: _test_pair(data, ij[0], ij[1], method, sampler), pairs
            ))
    else:
        outcomes = [_test_pair(data, i, j, method, sampler) for i, j in pairs]

    tested = [(pair, out) for pair, out in zip(pairs, outcomes) if out.skipped_reason is None]
    skipped = tuple(
        SkippedPair(data.node_ids[i], data.node_ids[j], out.skipped_reason)
        for (i, j), out in zip(pairs, outcomes)
        if out.skipped_reason is not None
    )
    floored = tuple(
        (data.node_ids[i], data.node_ids[j])
        for (i, j), out in tested
        if out.floored
    )
    hom_flags = [out.homogeneity_reject for _, out in tested if out.homogeneity_reject is not None]
    hom_fraction = float(np.mean(hom_flags)) if hom_flags else None

    decision = inference.bh_fdr([out.p for _, out in tested], gamma)
    rejected = set(decision.rejected)
    edges = tuple(
        EdgeRecord(
            node_i=data.node_ids[i],
            node_j=data.node_ids[j],
            method=method,
            similarity=out.similarity,
            statistic=out.statistic,
            df=out.df,
            p=out.p,
            q=float(decision.qvalues[idx]),
            contrib=out.contrib,
        )
        for idx, ((i, j), out) in enumerate(tested)
        if idx in rejected
    )
    return InferredNetwork(
        node_ids=data.node_ids,
        attribute_names=data.selected_names,
        method=method,
        gamma=gamma,
        n_samples=data.n_samples,
        edges=edges,
        tested_pairs=len(tested),
        skipped=skipped,
        floored=floored,
        homogeneity_reject_fraction=hom_fraction,
        pvalue_mode=pvalue_mode,
    )


# --- graph statistics --------------------------------------------------------

def degree_values(net: InferredNetwork) -> np.ndarray:
    adj = net.adjacency()
    return np.array([len(adj[v]) for v in net.node_ids], dtype=float)


def clustering_values(net: InferredNetwork) -> np.ndarray:
    """Local clustering coefficient per node; nodes of degree < 2 score 0."""
    adj = net.adjacency()
    values = []
    for v in net.node_ids:
        neighbors = sorted(adj[v])
        d = len(neighbors)
        if d < 2:
            values.append(0.0)
            continue
        links = sum(
            1
            for a in range(d)
            for b in range(a + 1, d)
            if neighbors[b] in adj[neighbors[a]]
        )
        values.append(2.0 * links / (d * (d - 1)))
    return np.array(values, dtype=float)


def betweenness_values(net: InferredNetwork) -> np.ndarray:
    """Normalized shortest-path betweenness via Brandes accumulation.

    Shortest-path counts split evenly across equal-length paths; each
    unordered pair is counted once and the total is normalized by
    (N_v - 1)(N_v - 2) / 2.
    """
    nodes = list(net.node_ids)
    n = len(nodes)
    adj = net.adjacency()
    centrality = {v: 0.0 for v in nodes}
    for source in nodes:
        stack = []
        predecessors = {v: [] for v in nodes}
        sigma = {v: 0.0 for v in nodes}
        distance = {v: -1 for v in nodes}
        sigma[source] = 1.0
        distance[source] = 0
        queue = deque([source])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in adj[v]:
                if distance[w] < 0:
                    distance[w] = distance[v] + 1
                    queue.append(w)
                if distance[w] == distance[v] + 1:
                    sigma[w] += sigma[v]
                    predecessors[w].append(v)
        dependency = {v: 0.0 for v in nodes}
        while stack:
            w = stack.pop()
            for v in predecessors[w]:
                dependency[v] += (sigma[v] / sigma[w]) * (1.0 + dependency[w])
            if w != source:
                centrality[w] += dependency[w]
    if n < 3:
        return np.zeros(n)
    norm = (n - 1) * (n - 2) / 2.0
    # halve: the accumulation visits each unordered pair from both endpoints
    return np.array([centrality[v] / 2.0 / norm for v in nodes], dtype=float)


def largest_connected_component(net: InferredNetwork) -> int:
    adj = net.adjacency()
    seen = set()
    best = 0
    for start in net.node_ids:
        if start in seen:
            continue
        size = 0
        queue = deque([start])
        seen.add(start)
        while queue:
            v = queue.popleft()
            size += 1
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        best = max(best, size)
    return best


@dataclass(frozen=True, eq=False)
class NetworkSummary:
    n_nodes: int
    n_edges: int
    density: float
    lcc_size: int
    avg_abs_similarity: float
    degrees: np.ndarray
    avg_degree: float
    clustering: np.ndarray
    avg_clustering: float
    betweenness: np.ndarray
    avg_betweenness: float


def summary(net: InferredNetwork) -> NetworkSummary:
    """All standard summary statistics of the inferred graph.

    The similarity average is the mean absolute similarity over declared
    edges only.
    """
    n = net.n_nodes
    e = net.n_edges
    degrees = degree_values(net)
    clustering = clustering_values(net)
    betweenness = betweenness_values(net)
    density = 2.0 * e / (n * (n - 1)) if n > 1 else 0.0
    avg_abs = float(np.mean([abs(edge.similarity) for edge in net.edges])) if e else 0.0
    return NetworkSummary(
        n_nodes=n,
        n_edges=e,
        density=density,
        lcc_size=largest_connected_component(net),
        avg_abs_similarity=avg_abs,
        degrees=degrees,
        avg_degree=float(degrees.mean()) if n else 0.0,
        clustering=clustering,
        avg_clustering=float(clustering.mean()) if n else 0.0,
        betweenness=betweenness,
        avg_betweenness=float(betweenness.mean()) if n else 0.0,
    )


def jaccard(net_a: InferredNetwork, net_b: InferredNetwork):
    """Jaccard similarity of two edge sets over identical node sets."""
    if set(net_a.node_ids) != set(net_b.node_ids):
        raise NodeSetMismatch("networks cover different node sets")
    edges_a = net_a.edge_pairs()
    edges_b = net_b.edge_pairs()
    shared = len(edges_a & edges_b)
    union = len(edges_a | edges_b)
    if union == 0:
        return 1.0, 0
    return shared / union, shared
