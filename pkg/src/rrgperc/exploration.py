"""
Half-edge exploration process.

The matching is built one pair per step while components are revealed one
at a time.  Every half-edge is *neutral*, *active* or *explored*; the first
active half-edge (lowest index) is matched to a uniform unmatched half-edge,
and the pair is percolated on the spot.  When no active half-edge is left
the next component is opened from the lowest-index neutral half-edge.

State after step ``t`` (``ExplorationState``) always holds the counts
*after* ``w_{t+1}`` has been chosen, i.e. the tilde quantities ``Ntilde_t``
and ``Atilde_t``; the pre-choice counts ``N_t`` and ``A_t`` are derived.

Bookkeeping convention: ``Y_0`` equals the size of the first tuple and
``Z_t`` sums ``N(w_i)`` over the components opened *after* the first one,
so that ``Y_t = A_t - Z_t`` holds exactly at every step.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .config_model import DegreeSequence, Matching, MultiGraph, contract, _check_rng
from .errors import InvalidInput, OutOfRange, ProcessComplete

NEUTRAL, ACTIVE, EXPLORED = 0, 1, 2

# slots of the scalar state vector
_T, _A, _AT, _Y, _Z, _PW, _PN, _COMP, _S, _TT, _U, _V, _TSTART, _POOL, _HEAP, _NPTR, _FIRSTN = range(17)
_NSC = 17

_EMPTY = np.empty(0)

# columns of the per-component record
_C_START, _C_END, _C_S, _C_T, _C_U, _C_V, _C_N0 = range(7)


@njit(cache=True, inline="always")
def _heap_push(heap, hl, x):
    i = hl
    heap[i] = x
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent] <= heap[i]:
            break
        heap[parent], heap[i] = heap[i], heap[parent]
        i = parent
    return hl + 1


@njit(cache=True, inline="always")
def _heap_pop(heap, hl):
    size = hl - 1
    top = heap[0]
    heap[0] = heap[size]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        c = l
        if l + 1 < size and heap[l + 1] < heap[l]:
            c = l + 1
        if heap[i] <= heap[c]:
            break
        heap[i], heap[c] = heap[c], heap[i]
        i = c
    return top, size


@njit(cache=True, inline="always")
def _open_tuple(offsets, status, tneutral, ntil, heap, hl, tcomp, comp, tu):
    # activate every neutral half-edge of tuple tu; returns (how many, heap length)
    k = tneutral[tu]
    for h in range(offsets[tu], offsets[tu + 1]):
        if status[h] == NEUTRAL:
            status[h] = ACTIVE
            hl = _heap_push(heap, hl, h)
    tneutral[tu] = 0
    ntil[k] -= 1
    ntil[0] += 1
    tcomp[tu] = comp
    return k, hl


@njit(cache=True)
def _advance(sc, offsets, owner, status, tneutral, ntil, pool, pos, heap,
             partner, is_open, tcomp, fixed_partner, fixed_open, p, u_eta, u_open,
             xi_out, a_out, kind_out, nw_out, w_out, comp_rec, dsplit, ntil_hist, nsteps, cap):
    """Run up to ``nsteps`` steps (or until the first component end at or after ``cap``).

    Step ``t`` (1-based, counted from entry) reads ``u_eta[t - t_entry - 1]``.
    ``nsteps = 0`` only chooses ``w_1`` (initialisation).  The scalar state
    lives in ``sc`` between calls and in locals inside the loop.
    """
    H = owner.size
    t = sc[_T]
    A = sc[_A]
    AT = sc[_AT]
    Y = sc[_Y]
    Z = sc[_Z]
    PW = sc[_PW]
    PN = sc[_PN]
    comp = sc[_COMP]
    S = sc[_S]
    TT = sc[_TT]
    U = sc[_U]
    V = sc[_V]
    tstart = sc[_TSTART]
    psize = sc[_POOL]
    hl = sc[_HEAP]
    nptr = sc[_NPTR]
    firstn = sc[_FIRSTN]
    record = ntil_hist.shape[0] > 0
    fixed = fixed_partner.size > 0
    t_entry = t
    choose = nsteps == 0
    while True:
        if choose:
            # pick w_{t+1}
            if A > 0:
                AT = A
                PN = 0
            else:
                hl = 0
                h = nptr
                while status[h] != NEUTRAL:
                    h += 1
                nptr = h
                k, hl = _open_tuple(offsets, status, tneutral, ntil, heap, hl, tcomp, comp, owner[h])
                PN = k
                firstn = k
                AT = k
                if t > 0:
                    Z += k
            w, hl = _heap_pop(heap, hl)
            while status[w] != ACTIVE:
                w, hl = _heap_pop(heap, hl)
            PW = w
            choose = False
        if record:
            ntil_hist[t, :] = ntil
        if t - t_entry >= nsteps or 2 * t >= H:
            break
        if cap >= 0 and t >= cap and A == 0:
            break
        i = t - t_entry
        t += 1
        w = PW
        # take w out of the unmatched pool, then draw eta from what is left
        j = pos[w]
        psize -= 1
        last = pool[psize]
        pool[j] = last
        pos[last] = j
        if fixed:
            eta = fixed_partner[w]
            opened = fixed_open[w]
            j = pos[eta]
        else:
            j = int(u_eta[i] * psize)
            if j >= psize:
                j = psize - 1
            eta = pool[j]
            opened = u_open[i] < p
        psize -= 1
        last = pool[psize]
        pool[j] = last
        pos[last] = j
        partner[w] = eta
        partner[eta] = w
        is_open[w] = opened
        is_open[eta] = opened
        status[w] = EXPLORED

        if status[eta] == ACTIVE:
            kind = 0
            status[eta] = EXPLORED
            A = AT - 2
            xi = -2
            U += 1
        else:
            tu = owner[eta]
            k = tneutral[tu]
            kind = k
            if k <= dsplit:
                V += 1
            status[eta] = EXPLORED
            tneutral[tu] = k - 1
            ntil[k] -= 1
            ntil[k - 1] += 1
            if opened:
                S += 1
                # remaining neutral half-edges of the tuple become active
                _, hl = _open_tuple(offsets, status, tneutral, ntil, heap, hl, tcomp, comp, tu)
                A = AT + (k - 1) - 1
                xi = k - 2
            else:
                TT += 1
                A = AT - 1
                xi = -1
        Y += xi
        xi_out[t - 1] = xi
        a_out[t - 1] = A
        kind_out[t - 1] = kind
        nw_out[t - 1] = PN
        w_out[t - 1] = w

        if A == 0:
            comp_rec[comp, _C_START] = tstart
            comp_rec[comp, _C_END] = t
            comp_rec[comp, _C_S] = S
            comp_rec[comp, _C_T] = TT
            comp_rec[comp, _C_U] = U
            comp_rec[comp, _C_V] = V
            comp_rec[comp, _C_N0] = firstn
            comp += 1
            S = 0
            TT = 0
            U = 0
            V = 0
            tstart = t + 1
        PN = 0
        if 2 * t < H:
            choose = True
    sc[_T] = t
    sc[_A] = A
    sc[_AT] = AT
    sc[_Y] = Y
    sc[_Z] = Z
    sc[_PW] = PW
    sc[_PN] = PN
    sc[_COMP] = comp
    sc[_S] = S
    sc[_TT] = TT
    sc[_U] = U
    sc[_V] = V
    sc[_TSTART] = tstart
    sc[_POOL] = psize
    sc[_HEAP] = hl
    sc[_NPTR] = nptr
    sc[_FIRSTN] = firstn
    return t - t_entry


@dataclass
class StepRecord:
    """What happened at one step.  ``eta_class`` is -1 when ``eta`` was active."""

    t: int
    w: int
    eta: int
    open: bool
    eta_active: bool
    eta_class: int
    xi: int
    n_w: int
    A: int
    Atilde: int
    component_closed: bool


class ExplorationState:
    """Full bookkeeping of the exploration process (see module docstring)."""

    def __init__(self, deg: DegreeSequence, p: float, matching: Matching = None):
        if not 0.0 <= p <= 1.0:
            raise InvalidInput(f"p must lie in [0, 1], got {p}")
        self.deg = deg
        self.p = float(p)
        H = deg.half_edge_count
        if deg.d > 127 or H >= 2 ** 31:
            raise InvalidInput("tuple sizes must be <= 127 and the half-edge count < 2^31")
        n = deg.n
        self.offsets = deg.offsets
        self.owner = deg.owner().astype(np.int32)
        self.status = np.zeros(H, dtype=np.int8)
        self.tuple_neutral = deg.sizes.astype(np.int8)
        self.ntil = np.bincount(deg.sizes, minlength=deg.d + 1).astype(np.int64)
        self.pool = np.arange(H, dtype=np.int32)
        self.pos = np.arange(H, dtype=np.int32)
        self.heap = np.empty(H, dtype=np.int32)
        self.partner = np.full(H, -1, dtype=np.int32)
        self.is_open = np.zeros(H, dtype=np.bool_)
        self.tuple_comp = np.full(n, -1, dtype=np.int32)
        if matching is not None:
            if matching.half_edge_count != H:
                raise InvalidInput("matching does not fit the degree sequence")
            self.fixed_partner = matching.partner.astype(np.int32)
            self.fixed_open = matching.open
        else:
            self.fixed_partner = np.empty(0, dtype=np.int32)
            self.fixed_open = np.empty(0, dtype=np.bool_)
        steps = H // 2
        self.xi = np.zeros(steps, dtype=np.int8)
        self.a_path = np.zeros(steps, dtype=np.int32)
        self.kind = np.zeros(steps, dtype=np.int8)
        self.n_w = np.zeros(steps, dtype=np.int8)
        self.w = np.zeros(steps, dtype=np.int32)
        self.comp_rec = np.zeros((n, 7), dtype=np.int64)
        self.sc = np.zeros(_NSC, dtype=np.int64)
        self.sc[_POOL] = H
        self.sc[_TSTART] = 1
        # V counts eta landing in a tuple with 1..d-1 neutral half-edges
        self.dsplit = deg.d - 1
        self._advance(_EMPTY, _EMPTY, None, 0, -1)
        self.Y0 = int(self.sc[_AT])
        self.sc[_Y] = self.Y0

    # read-only views of the scalar state
    t = property(lambda self: int(self.sc[_T]))
    A = property(lambda self: int(self.sc[_A]))
    Atilde = property(lambda self: int(self.sc[_AT]))
    Y = property(lambda self: int(self.sc[_Y]))
    components_closed = property(lambda self: int(self.sc[_COMP]))

    @property
    def Z(self) -> int:
        # the stored value already includes N(w_{t+1}) when a component was just opened
        pending = int(self.sc[_PN]) if self.t > 0 and not self.done else 0
        return int(self.sc[_Z]) - pending

    @property
    def Ntilde(self) -> np.ndarray:
        return self.ntil.copy()

    @property
    def N(self) -> np.ndarray:
        """Counts before ``w_{t+1}`` was chosen."""
        out = self.ntil.copy()
        k = int(self.sc[_PN])
        if self.t > 0 and k > 0 and not self.done:
            out[k] += 1
            out[0] -= 1
        return out

    @property
    def done(self) -> bool:
        return 2 * self.t >= self.owner.size

    @property
    def next_w(self) -> int:
        return int(self.sc[_PW])

    @property
    def active(self) -> np.ndarray:
        """Active half-edges in the order they will be processed."""
        return np.flatnonzero(self.status == ACTIVE)

    @property
    def record_times(self) -> list:
        return [0] + self.comp_rec[: self.components_closed, _C_END].tolist()

    def _advance(self, u_eta, u_open, hist, nsteps, cap):
        if hist is None:
            hist = np.zeros((0, self.ntil.size), dtype=np.int64)
        return _advance(
            self.sc, self.offsets, self.owner, self.status, self.tuple_neutral, self.ntil,
            self.pool, self.pos, self.heap, self.partner, self.is_open, self.tuple_comp,
            self.fixed_partner, self.fixed_open, self.p, u_eta, u_open, self.xi, self.a_path,
            self.kind, self.n_w, self.w, self.comp_rec, self.dsplit, hist, nsteps, cap,
        )


def init(deg: DegreeSequence, p: float, rng=None, matching: Matching = None) -> ExplorationState:
    """Fresh exploration with the first tuple active.

    ``rng`` is accepted for symmetry with ``step``; initialisation is
    deterministic.  Passing ``matching`` explores that fixed matching
    (with its open flags) instead of drawing partners on the fly.
    """
    if not isinstance(deg, DegreeSequence):
        deg = DegreeSequence(np.asarray(deg), int(np.max(deg)))
    return ExplorationState(deg, p, matching)


def step(state: ExplorationState, rng=None) -> StepRecord:
    if state.done:
        raise ProcessComplete("every half-edge is matched")
    rng = _check_rng(rng)
    u_eta, u_open = rng.random(2) if state.fixed_partner.size == 0 else (0.0, 1.0)
    t = state.t
    w = state.next_w
    at = state.Atilde
    closed_before = state.components_closed
    state._advance(np.array([u_eta]), np.array([u_open]), None, 1, -1)
    eta = int(state.partner[w])
    kind = int(state.kind[t])
    return StepRecord(
        t=t + 1, w=w, eta=eta, open=bool(state.is_open[w]), eta_active=kind == 0,
        eta_class=kind if kind > 0 else -1, xi=int(state.xi[t]), n_w=int(state.n_w[t]),
        A=state.A, Atilde=at, component_closed=state.components_closed > closed_before,
    )


@dataclass
class ComponentTrace:
    """One component.  ``silent`` traces are tuples never opened by the process
    (all half-edges closed from outside); they have zero duration."""

    j: int
    t_start: int
    t_end: int
    S: int
    T: int
    U: int
    V: int
    n_first: int
    member_tuples: np.ndarray
    silent: bool = False

    @property
    def size(self) -> int:
        return self.S + 1

    @property
    def duration(self) -> int:
        return self.t_end - self.t_start + 1

    def sandwich(self, d: int):
        """Middle and right terms of ``0 <= S + 1 - dt/(d-1) <= U/(d-1) + V + 1``."""
        middle = self.S + 1 - self.duration / (d - 1)
        return middle, self.U / (d - 1) + self.V + 1


@dataclass
class WalkPath:
    """Exploration walk ``Y_0..Y_{H/2}`` with its increments.

    ``record_times`` are the component end times ``t_0 = 0 < t_1 < ...``; when
    omitted (synthetic paths) they default to the strict running minima of Y.
    """

    values: np.ndarray
    xi: np.ndarray = None
    record_times: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.xi is None:
            self.xi = np.diff(self.values)
        if self.record_times is None:
            v = self.values
            prev_min = np.minimum.accumulate(v)
            rec = np.flatnonzero(v[1:] < prev_min[:-1]) + 1
            self.record_times = np.concatenate([[0], rec])
        self.record_times = np.asarray(self.record_times, dtype=np.int64)

    @property
    def yhat(self) -> np.ndarray:
        return y_hat(self)


@dataclass
class ExplorationRun:
    """Array form of an exploration (what ``run_full`` is built from).

    Tuples whose half-edges are all consumed by closed pairs from elsewhere
    are never opened by the process; they are isolated vertices of the
    percolated graph ("silent" singletons) and are reported separately.
    """

    deg: DegreeSequence
    p: float
    xi: np.ndarray
    a_path: np.ndarray
    kind: np.ndarray
    n_w: np.ndarray
    w: np.ndarray
    comp_rec: np.ndarray
    tuple_comp: np.ndarray
    matching: Matching
    Y0: int
    ntil_hist: np.ndarray = None
    steps: int = 0

    @property
    def complete(self) -> bool:
        return 2 * self.steps == self.deg.half_edge_count

    @property
    def component_sizes(self) -> np.ndarray:
        """Sizes of the explored components in discovery order (``S_j + 1``)."""
        return self.comp_rec[:, _C_S] + 1

    @property
    def silent_tuples(self) -> np.ndarray:
        if not self.complete:
            raise InvalidInput("silent tuples are only known once every half-edge is matched")
        return np.flatnonzero(self.tuple_comp < 0)

    def all_component_sizes(self) -> np.ndarray:
        """Every component of the percolated graph, largest first."""
        sizes = np.concatenate([self.component_sizes, np.ones(self.silent_tuples.size, dtype=np.int64)])
        return np.sort(sizes)[::-1]

    @property
    def record_times(self) -> np.ndarray:
        return np.concatenate([[0], self.comp_rec[:, _C_END]])

    @property
    def path(self) -> WalkPath:
        y = np.empty(self.xi.size + 1, dtype=np.int64)
        y[0] = self.Y0
        np.cumsum(self.xi, out=y[1:])
        y[1:] += self.Y0
        return WalkPath(y, self.xi, self.record_times)

    def sorted_sizes(self) -> np.ndarray:
        """Explored component sizes, largest first."""
        return np.sort(self.component_sizes)[::-1]

    def completion_step(self) -> np.ndarray:
        """Per tuple, the step at which its last half-edge was matched."""
        step_of = np.zeros(self.deg.half_edge_count, dtype=np.int64)
        t = np.arange(1, self.steps + 1)
        step_of[self.w] = t
        step_of[self.matching.partner[self.w]] = t
        return np.maximum.reduceat(step_of, self.deg.offsets[:-1])

    def traces(self) -> list:
        ncomp = self.comp_rec.shape[0]
        order = np.argsort(self.tuple_comp, kind="stable")
        keys = self.tuple_comp[order]
        bounds = np.searchsorted(keys, np.arange(ncomp + 1))
        out = []
        for j, row in enumerate(self.comp_rec):
            out.append(ComponentTrace(
                j=j + 1, t_start=int(row[_C_START]), t_end=int(row[_C_END]), S=int(row[_C_S]),
                T=int(row[_C_T]), U=int(row[_C_U]), V=int(row[_C_V]), n_first=int(row[_C_N0]),
                member_tuples=order[bounds[j]:bounds[j + 1]],
            ))
        if self.complete:
            silent = self.silent_tuples
            done = self.completion_step()[silent]
            for k in np.argsort(done, kind="stable"):
                te = int(done[k])
                out.append(ComponentTrace(
                    j=len(out) + 1, t_start=te + 1, t_end=te, S=0, T=0, U=0, V=0, n_first=0,
                    member_tuples=np.array([silent[k]]), silent=True,
                ))
        return out

    def graph(self, open_only: bool = False) -> MultiGraph:
        return contract(self.matching, self.deg, open_only)


def explore(deg: DegreeSequence, p: float, rng=None, matching: Matching = None,
            record_counts: bool = False, cap: int = None) -> ExplorationRun:
    """Run the exploration to completion (or to the first component end after ``cap`` steps).

    ``record_counts`` stores ``Ntilde_t`` for every ``t`` (memory ``O(dn * d)``).
    """
    rng = _check_rng(rng)
    state = init(deg, p, matching=matching)
    H = state.owner.size
    if matching is None:
        u = rng.random(H)
        u_eta, u_open = u[: H // 2], u[H // 2:]
    else:
        u_eta = u_open = _EMPTY
    hist = np.zeros((H // 2 + 1, deg.d + 1), dtype=np.int64) if record_counts else None
    state._advance(u_eta, u_open, hist if record_counts else None, H // 2, -1 if cap is None else int(cap))
    t = state.t
    ncomp = state.components_closed
    return ExplorationRun(
        deg=deg, p=state.p, xi=state.xi[:t], a_path=state.a_path[:t], kind=state.kind[:t],
        n_w=state.n_w[:t], w=state.w[:t], comp_rec=state.comp_rec[:ncomp], tuple_comp=state.tuple_comp,
        matching=Matching(state.partner, state.is_open), Y0=state.Y0,
        ntil_hist=hist[: t + 1] if record_counts else None, steps=t,
    )


def run_full(deg: DegreeSequence, p: float, rng=None, matching: Matching = None):
    """Explore every half-edge; returns ``(component traces, walk path)``."""
    run = explore(deg, p, rng, matching)
    return run.traces(), run.path


def y_hat(path: WalkPath) -> np.ndarray:
    """Walk clipped from below at the value of the last component end.

    On ``[t_j, t_{j+1})`` the result is ``max(Y_t, Y_{t_j})``.
    """
    y = path.values
    rt = path.record_times
    seg = np.searchsorted(rt, np.arange(y.size), side="right") - 1
    return np.maximum(y, y[rt[seg]])


def rescaled_path(path: WalkPath, n: int, d: int) -> Callable[[float], float]:
    """``s -> n^{-1/3} * Yhat((d-1) n^{2/3} s)`` with linear interpolation."""
    if d < 3:
        raise InvalidInput("d must be >= 3")
    yh = y_hat(path).astype(float)
    scale_t = (d - 1) * n ** (2.0 / 3.0)
    scale_y = n ** (-1.0 / 3.0)
    last = yh.size - 1

    def at(s):
        s_arr = np.asarray(s, dtype=float)
        x = s_arr * scale_t
        if np.any(x < 0) or np.any(x > last):
            raise OutOfRange(f"s={s} lies beyond the path (max {last / scale_t:.6g})")
        out = scale_y * np.interp(x, np.arange(yh.size), yh)
        return float(out) if out.ndim == 0 else out

    return at
