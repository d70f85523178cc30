"""
Configuration model on half-edges.

Half-edges are numbered so that tuple ``i`` owns the contiguous block
``[offset[i], offset[i] + sizes[i])``.  A perfect matching of the half-edges,
contracted tuple-by-tuple, gives a multigraph; conditioning on the multigraph
being simple gives a uniform simple regular graph.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import InvalidInput, SamplingFailure


@dataclass(frozen=True)
class DegreeSequence:
    """Tuple sizes of a configuration model.

    ``d`` is the maximum allowed tuple size (the regular degree).
    """

    sizes: np.ndarray
    d: int

    def __post_init__(self):
        sizes = np.ascontiguousarray(self.sizes, dtype=np.int64)
        if sizes.ndim != 1 or sizes.size < 1:
            raise InvalidInput("degree sequence must be a non-empty 1-d sequence")
        if np.any(sizes < 1) or np.any(sizes > self.d):
            raise InvalidInput(f"tuple sizes must lie in [1, {self.d}]")
        if int(sizes.sum()) % 2:
            raise InvalidInput("sum of tuple sizes must be even")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def regular(cls, n: int, d: int) -> "DegreeSequence":
        if n < 1 or d < 1:
            raise InvalidInput("need n >= 1 and d >= 1")
        if (n * d) % 2:
            raise InvalidInput(f"n*d must be even (n={n}, d={d})")
        return cls(np.full(n, d, dtype=np.int64), d)

    @property
    def n(self) -> int:
        return int(self.sizes.size)

    @property
    def half_edge_count(self) -> int:
        return int(self.sizes.sum())

    @property
    def offsets(self) -> np.ndarray:
        out = np.zeros(self.sizes.size + 1, dtype=np.int64)
        np.cumsum(self.sizes, out=out[1:])
        return out

    def owner(self) -> np.ndarray:
        """Tuple index of every half-edge."""
        return np.repeat(np.arange(self.n, dtype=np.int64), self.sizes)

    @property
    def is_regular(self) -> bool:
        return bool(np.all(self.sizes == self.d))


@dataclass
class Matching:
    """Fixed-point-free involution on half-edges with per-pair open flags.

    ``open`` is stored per half-edge and is symmetric across each pair.
    """

    partner: np.ndarray
    open: np.ndarray = None

    def __post_init__(self):
        self.partner = np.ascontiguousarray(self.partner, dtype=np.int64)
        if self.open is None:
            self.open = np.zeros(self.partner.size, dtype=np.bool_)
        else:
            self.open = np.ascontiguousarray(self.open, dtype=np.bool_)

    @property
    def half_edge_count(self) -> int:
        return int(self.partner.size)

    def pairs(self) -> np.ndarray:
        """Matched pairs ``(i, partner[i])`` with ``i < partner[i]``, sorted by ``i``."""
        lo = np.flatnonzero(np.arange(self.partner.size) < self.partner)
        return np.column_stack([lo, self.partner[lo]])

    def is_valid(self) -> bool:
        idx = np.arange(self.partner.size)
        p = self.partner
        if np.any(p < 0) or np.any(p >= p.size):
            return False
        return bool(np.all(p[p] == idx) and np.all(p != idx) and np.all(self.open[p] == self.open))


@dataclass
class MultiGraph:
    """Contracted graph on tuples.  Loops and repeated edges are allowed.

    ``edge_open`` and ``matching`` are carried along when the graph was built
    from a matching, so that percolation flags and damage counts stay
    available after contraction.
    """

    vertex_count: int
    edges: np.ndarray
    half_edge_owner: np.ndarray = None
    edge_open: np.ndarray = None
    matching: Matching = None
    degrees: DegreeSequence = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.edges.size and (self.edges.min() < 0 or self.edges.max() >= self.vertex_count):
            raise InvalidInput("edge endpoint out of range")

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    def degree(self) -> np.ndarray:
        """Vertex degrees, loops counted twice."""
        return np.bincount(self.edges.ravel(), minlength=self.vertex_count)

    def open_subgraph(self) -> "MultiGraph":
        if self.edge_open is None:
            raise InvalidInput("graph carries no percolation flags")
        return MultiGraph(self.vertex_count, self.edges[self.edge_open], self.half_edge_owner)


def _check_rng(rng):
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    return rng


@njit(cache=True)
def _matching_kernel(u):
    # lowest unmatched half-edge is paired with a uniform member of the pool
    H = 2 * u.size
    partner = np.full(H, -1, dtype=np.int64)
    pool = np.arange(H, dtype=np.int64)
    pos = np.arange(H, dtype=np.int64)
    size = H
    lo = 0
    for step in range(u.size):
        while partner[lo] != -1:
            lo += 1
        # remove lo from the pool
        j = pos[lo]
        last = pool[size - 1]
        pool[j] = last
        pos[last] = j
        size -= 1
        k = int(u[step] * size)
        if k >= size:
            k = size - 1
        other = pool[k]
        last = pool[size - 1]
        pool[k] = last
        pos[last] = k
        size -= 1
        partner[lo] = other
        partner[other] = lo
    return partner


def sample_matching(half_edge_count: int, rng=None) -> Matching:
    """Uniform perfect matching on ``half_edge_count`` half-edges."""
    H = int(half_edge_count)
    if H != half_edge_count or H < 2 or H % 2:
        raise InvalidInput(f"half_edge_count must be even and >= 2, got {half_edge_count}")
    rng = _check_rng(rng)
    return Matching(_matching_kernel(rng.random(H // 2)))


def percolate(m: Matching, p: float, rng=None) -> Matching:
    """Open each matched pair independently with probability ``p``.

    Draws are consumed in order of the lower half-edge index of each pair.
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidInput(f"p must lie in [0, 1], got {p}")
    rng = _check_rng(rng)
    pairs = m.pairs()
    flags = rng.random(pairs.shape[0]) < p
    is_open = np.zeros(m.half_edge_count, dtype=np.bool_)
    is_open[pairs[:, 0]] = flags
    is_open[pairs[:, 1]] = flags
    return Matching(m.partner.copy(), is_open)


def contract(m: Matching, deg: DegreeSequence, open_only: bool = False) -> MultiGraph:
    if m.half_edge_count != deg.half_edge_count:
        raise InvalidInput(
            f"matching has {m.half_edge_count} half-edges, degree sequence {deg.half_edge_count}"
        )
    owner = deg.owner()
    pairs = m.pairs()
    flags = m.open[pairs[:, 0]]
    if open_only:
        pairs = pairs[flags]
        flags = flags[flags]
    edges = owner[pairs]
    return MultiGraph(deg.n, edges, owner, flags, m, deg)


def is_simple(g: MultiGraph) -> bool:
    """True iff ``g`` has no loops and no repeated edges."""
    e = g.edges
    if e.shape[0] == 0:
        return True
    if np.any(e[:, 0] == e[:, 1]):
        return False
    lo = np.minimum(e[:, 0], e[:, 1])
    hi = np.maximum(e[:, 0], e[:, 1])
    key = lo * g.vertex_count + hi
    return np.unique(key).size == key.size


@njit(cache=True)
def _simple_matching_kernel(u, sizes, owner, dmax):
    # Same sequential sampler as _matching_kernel, aborting on the first
    # loop or repeated edge.  Returns (partner, ok).
    H = owner.size
    n = sizes.size
    partner = np.full(H, -1, dtype=np.int64)
    nbr = np.full(n * dmax, -1, dtype=np.int64)
    nnb = np.zeros(n, dtype=np.int64)
    pool = np.arange(H, dtype=np.int64)
    pos = np.arange(H, dtype=np.int64)
    size = H
    lo = 0
    for step in range(u.size):
        while partner[lo] != -1:
            lo += 1
        j = pos[lo]
        last = pool[size - 1]
        pool[j] = last
        pos[last] = j
        size -= 1
        k = int(u[step] * size)
        if k >= size:
            k = size - 1
        other = pool[k]
        last = pool[size - 1]
        pool[k] = last
        pos[last] = k
        size -= 1
        partner[lo] = other
        partner[other] = lo
        a = owner[lo]
        b = owner[other]
        if a == b:
            return partner, False
        for q in range(nnb[a]):
            if nbr[a * dmax + q] == b:
                return partner, False
        nbr[a * dmax + nnb[a]] = b
        nnb[a] += 1
        nbr[b * dmax + nnb[b]] = a
        nnb[b] += 1
    return partner, True


def sample_simple_regular(n: int, d: int, rng=None, max_retries: int = 1000) -> MultiGraph:
    """Uniform simple ``d``-regular graph on ``n`` vertices by rejection.

    The returned graph keeps its matching (``g.matching``) so it can be
    percolated afterwards; ``g.attempts`` records how many matchings were drawn.
    """
    if d < 3:
        raise InvalidInput(f"d must be >= 3, got {d}")
    deg = DegreeSequence.regular(n, d)
    if d >= n:
        raise InvalidInput(f"no simple {d}-regular graph on {n} vertices")
    rng = _check_rng(rng)
    owner = deg.owner()
    H = deg.half_edge_count
    for attempt in range(1, max_retries + 1):
        partner, ok = _simple_matching_kernel(rng.random(H // 2), deg.sizes, owner, d)
        if ok:
            g = contract(Matching(partner), deg)
            g.attempts = attempt
            return g
    raise SamplingFailure(f"no simple graph after {max_retries} attempts", attempts=max_retries)


def circulant_regular(n: int, d: int) -> MultiGraph:
    """Deterministic simple ``d``-regular circulant graph.

    Vertex ``i`` is joined to ``i +- 1, ..., i +- d//2`` and, for odd ``d``, to
    ``i + n/2``.  The graph is returned with an explicit matching (slot ``s``
    of vertex ``i`` is half-edge ``d*i + s``) so it can be percolated.
    """
    if d < 1 or n < 2 or (n * d) % 2 or d >= n:
        raise InvalidInput(f"no circulant {d}-regular graph on {n} vertices")
    half = d // 2
    if d % 2 == 0 and 2 * half >= n:
        raise InvalidInput(f"no circulant {d}-regular graph on {n} vertices")
    if d % 2 == 1 and half >= n // 2:
        raise InvalidInput(f"no circulant {d}-regular graph on {n} vertices")
    deg = DegreeSequence.regular(n, d)
    i = np.arange(n, dtype=np.int64)
    partner = np.empty(n * d, dtype=np.int64)
    # slot 2k-2 points forward by k, slot 2k-1 backward by k; slot d-1 is the diameter chord
    for k in range(1, half + 1):
        fwd, bwd = 2 * (k - 1), 2 * (k - 1) + 1
        partner[d * i + fwd] = d * ((i + k) % n) + bwd
        partner[d * i + bwd] = d * ((i - k) % n) + fwd
    if d % 2:
        partner[d * i + d - 1] = d * ((i + n // 2) % n) + d - 1
    m = Matching(partner)
    return contract(m, deg)
