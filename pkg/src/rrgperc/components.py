"""Ground-truth component analysis: union-find, boundary damage, diameters, KS statistic."""

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.stats import kstwobign

from .config_model import MultiGraph
from .errors import InvalidInput

EXACT_DIAMETER_LIMIT = 5000


@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _dsu_labels(n, edges):
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int8)
    for i in range(edges.shape[0]):
        a = _find(parent, edges[i, 0])
        b = _find(parent, edges[i, 1])
        if a == b:
            continue
        if rank[a] < rank[b]:
            a, b = b, a
        parent[b] = a
        if rank[a] == rank[b]:
            rank[a] += 1
    for v in range(n):
        parent[v] = _find(parent, v)
    return parent


@dataclass
class ComponentSummary:
    """Component labelling, ordered by size (largest first).

    ``membership[v]`` is the rank of the component containing ``v``; ties in
    size are broken by the smallest member vertex.
    """

    sizes: np.ndarray
    membership: np.ndarray

    @property
    def count(self) -> int:
        return int(self.sizes.size)

    def members(self, j: int) -> np.ndarray:
        self._check(j)
        return np.flatnonzero(self.membership == j)

    def _check(self, j):
        if not 0 <= j < self.sizes.size:
            raise InvalidInput(f"unknown component id {j} (have {self.sizes.size})")


def union_find_components(g: MultiGraph, open_only: bool = True) -> ComponentSummary:
    """Exact components by disjoint-set union.

    With ``open_only`` (and percolation flags present) only open edges count.
    """
    edges = g.edges
    if open_only and g.edge_open is not None:
        edges = edges[g.edge_open]
    root = _dsu_labels(g.vertex_count, np.ascontiguousarray(edges, dtype=np.int64))
    _, first, inv, counts = np.unique(root, return_index=True, return_inverse=True, return_counts=True)
    order = np.lexsort((first, -counts))
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return ComponentSummary(counts[order], rank[inv.ravel()])


def damage_counts(g: MultiGraph, summary: ComponentSummary, component_id: int = 0) -> dict:
    """``k -> |M_k(S)|``: tuples outside component ``S`` with exactly ``k`` closed edges into it.

    ``g`` must be the full graph (every matched pair) with percolation flags.
    Keys run over ``1..max degree``.
    """
    if g.edge_open is None:
        raise InvalidInput("graph carries no percolation flags")
    summary._check(component_id)
    inside = summary.membership == component_id
    e = g.edges[~g.edge_open]
    a_in, b_in = inside[e[:, 0]], inside[e[:, 1]]
    # closed edges with exactly one endpoint in S, keyed by the outside endpoint
    outside = np.concatenate([e[a_in & ~b_in, 1], e[b_in & ~a_in, 0]])
    per_tuple = np.bincount(outside, minlength=g.vertex_count)
    kmax = int(g.degree().max()) if g.edge_count else 0
    hist = np.bincount(per_tuple, minlength=kmax + 1)
    return {k: int(hist[k]) for k in range(1, kmax + 1)}


def _csr(n, edges):
    deg = np.bincount(edges.ravel(), minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.argsort(src, kind="stable")
    return indptr, dst[order]


@njit(cache=True)
def _bfs(indptr, nbr, src, dist, queue):
    # dist must be -1 everywhere on entry and is restored on exit
    queue[0] = src
    dist[src] = 0
    head, tail = 0, 1
    far = src
    while head < tail:
        v = queue[head]
        head += 1
        if dist[v] > dist[far]:
            far = v
        for q in range(indptr[v], indptr[v + 1]):
            u = nbr[q]
            if dist[u] < 0:
                dist[u] = dist[v] + 1
                queue[tail] = u
                tail += 1
    # reset for reuse
    ecc = dist[far]
    for i in range(tail):
        dist[queue[i]] = -1
    return far, ecc


@njit(cache=True)
def _exact_diameter(indptr, nbr, members, dist, queue):
    best = 0
    for v in members:
        _, ecc = _bfs(indptr, nbr, v, dist, queue)
        if ecc > best:
            best = ecc
    return best


def bfs_diameter(g: MultiGraph, component_id: int = 0, exact_cap: int = EXACT_DIAMETER_LIMIT,
                 summary: ComponentSummary = None, open_only: bool = True):
    """Diameter of a component.

    Returns ``(value, exact)``.  Components up to ``exact_cap`` vertices get
    BFS from every member; larger ones get a double-sweep lower bound and
    ``exact=False``.
    """
    if summary is None:
        summary = union_find_components(g, open_only)
    edges = g.edges
    if open_only and g.edge_open is not None:
        edges = edges[g.edge_open]
    indptr, nbr = _csr(g.vertex_count, np.ascontiguousarray(edges, dtype=np.int64))
    members = summary.members(component_id)
    dist = np.full(g.vertex_count, -1, dtype=np.int64)
    queue = np.empty(members.size, dtype=np.int64)
    if members.size <= exact_cap:
        return int(_exact_diameter(indptr, nbr, members, dist, queue)), True
    far, _ = _bfs(indptr, nbr, members[0], dist, queue)
    far2, ecc = _bfs(indptr, nbr, far, dist, queue)
    _, ecc2 = _bfs(indptr, nbr, far2, dist, queue)
    return int(max(ecc, ecc2)), False


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise InvalidInput("both samples must be non-empty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    stat = float(np.max(np.abs(fa - fb)))
    en = np.sqrt(a.size * b.size / (a.size + b.size))
    return stat, float(kstwobign.sf(en * stat))
