"""
Random walks with increments bounded below by -1.

Increment laws, exponential tilting, exact hitting-time distributions by
dynamic programming, optional-stopping bounds, the cyclic-shift count and
the closed-form size predictions for the three percolation regimes.
"""

import csv
import io
from dataclasses import dataclass
from itertools import product
from math import comb, exp, log

import numpy as np
from numba import njit

from .errors import InvalidInput, NoRoot, OutOfRegime, PreconditionError, ResourceError


@dataclass(frozen=True)
class IncrementLaw:
    """Finite integer law with support bounded below by -1.

    Atoms with zero probability are dropped on construction.
    """

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int64)
        q = np.asarray(self.probs, dtype=float)
        if v.shape != q.shape or v.ndim != 1:
            raise InvalidInput("values and probs must be 1-d of equal length")
        if np.any(q < 0) or np.any(q > 1):
            raise InvalidInput("probabilities must lie in [0, 1]")
        keep = q > 0
        v, q = v[keep], q[keep]
        if v.size == 0 or abs(q.sum() - 1.0) > 1e-12:
            raise InvalidInput(f"probabilities sum to {q.sum()!r}, not 1")
        if v.min() < -1:
            raise InvalidInput("increments must be >= -1")
        order = np.argsort(v)
        object.__setattr__(self, "values", v[order])
        object.__setattr__(self, "probs", q[order])

    @property
    def atoms(self):
        return list(zip(self.values.tolist(), self.probs.tolist()))

    @property
    def mean(self) -> float:
        return float(self.probs @ self.values)

    @property
    def variance(self) -> float:
        return float(self.probs @ self.values.astype(float) ** 2) - self.mean ** 2

    def prob(self, v: int) -> float:
        hit = self.values == v
        return float(self.probs[hit].sum())


def _check_d(d):
    if d < 3:
        raise InvalidInput(f"d must be >= 3, got {d}")


def _check_p(p):
    if not 0.0 < p < 1.0:
        raise InvalidInput(f"p must lie in (0, 1), got {p}")


def binomial_shift_law(d: int, p: float) -> IncrementLaw:
    """``Bin(d-1, p) - 1``."""
    _check_d(d)
    _check_p(p)
    k = np.arange(d)
    q = np.array([comb(d - 1, i) * p ** i * (1 - p) ** (d - 1 - i) for i in k])
    return IncrementLaw(k - 1, q)


def two_point_law(d: int, p: float) -> IncrementLaw:
    """``d-2`` with probability ``p``, ``-1`` otherwise."""
    _check_d(d)
    _check_p(p)
    return IncrementLaw([d - 2, -1], [p, 1 - p])


def three_point_law(d: int, eps: float) -> IncrementLaw:
    """``d-2``, ``d-3`` and ``-1`` with probabilities
    ``(1-(2d-3)eps)/(d-1)``, ``2 eps`` and ``(d-2-eps)/(d-1)``; mean ``-eps``.

    For ``d = 3`` the middle atom sits at 0.  ``eps = 0`` drops it and gives
    the critical two-point law.
    """
    _check_d(d)
    q = np.array([(1 - (2 * d - 3) * eps) / (d - 1), 2 * eps, (d - 2 - eps) / (d - 1)])
    if eps < 0 or np.any(q < 0) or np.any(q > 1):
        raise InvalidInput(f"eps={eps} puts probabilities outside [0, 1]")
    return IncrementLaw([d - 2, d - 3, -1], q)


def mgf(law: IncrementLaw, theta):
    """``E exp(theta * beta)``; vectorised over ``theta``."""
    th = np.asarray(theta, dtype=float)
    out = np.exp(np.multiply.outer(th, law.values)) @ law.probs
    return float(out) if out.ndim == 0 else out


def tilt_derivative(law: IncrementLaw, theta):
    """``E beta exp(theta * beta)``, the derivative of ``mgf``."""
    th = np.asarray(theta, dtype=float)
    out = np.exp(np.multiply.outer(th, law.values)) @ (law.probs * law.values)
    return float(out) if out.ndim == 0 else out


def _second(law, theta):
    return float(np.exp(theta * law.values) @ (law.probs * law.values.astype(float) ** 2))


def solve_theta0(law: IncrementLaw, tol: float = 1e-13) -> float:
    """Root of ``E beta exp(theta beta) = 0``.

    The derivative is strictly increasing, so the root is unique when the
    support has both signs.  Bracket expansion, bisection, one Newton step.
    """
    if law.values.min() >= 0 or law.values.max() <= 0:
        raise NoRoot("support is one-signed; the tilted mean never vanishes")
    m = law.mean
    if abs(m) < 1e-15:
        return 0.0
    f = lambda th: tilt_derivative(law, th)
    if m < 0:
        lo, hi = 0.0, 1.0
        while f(hi) < 0:
            lo, hi = hi, 2 * hi
    else:
        lo, hi = -1.0, 0.0
        while f(lo) > 0:
            lo, hi = 2 * lo, lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    th = 0.5 * (lo + hi)
    return th - f(th) / _second(law, th)


@njit(cache=True)
def _tau_dp(values, probs, W0, L):
    # forward DP over walk values; cells above the remaining time budget
    # cannot reach 0 by step L and are dropped, which is exact for P(tau <= L)
    vmax = values.max()
    width = W0 + L * max(vmax, 0) + 2
    width = min(width, L + 2)
    cur = np.zeros(width)
    nxt = np.zeros(width)
    if W0 >= width:
        return np.zeros(L + 1)
    cur[W0] = 1.0
    out = np.zeros(L + 1)
    p_down = 0.0
    for a in range(values.size):
        if values[a] == -1:
            p_down = probs[a]
    hi = W0
    for ell in range(1, L + 1):
        out[ell] = cur[1] * p_down
        limit = L - ell
        new_hi = min(hi + max(vmax, 0), limit)
        for v in range(0, new_hi + 1):
            nxt[v] = 0.0
        for v in range(1, hi + 1):
            m = cur[v]
            if m == 0.0:
                continue
            for a in range(values.size):
                u = v + values[a]
                if 1 <= u <= new_hi:
                    nxt[u] += m * probs[a]
        for v in range(0, hi + 1):
            cur[v] = 0.0
        hi = new_hi
        for v in range(1, hi + 1):
            cur[v] = nxt[v]
        if hi < 1:
            break
    return out


def tau_tail_dp(law: IncrementLaw, W0: int, L: int, max_cells: float = 5e9) -> np.ndarray:
    """Exact ``P(tau = l)`` for ``l = 0..L``, ``tau`` the hitting time of 0 from ``W0``.

    Entry 0 is always 0.  ``max_cells`` caps the work ``L * value-range``.
    """
    if W0 < 1:
        raise InvalidInput("W0 must be >= 1")
    if L < 1:
        raise InvalidInput("L must be >= 1")
    vrange = min(W0 + L * max(int(law.values.max()), 0), L) + 2
    if float(L) * vrange > max_cells:
        raise ResourceError(f"DP needs ~{float(L) * vrange:.3g} cells, budget {max_cells:.3g}")
    return _tau_dp(law.values, law.probs, int(W0), int(L))


@dataclass
class TailFit:
    c: float
    theta0: float
    phi0: float
    min_ratio: float
    max_ratio: float
    second_moment: float
    mass: float
    window: tuple


def tau_tail_fit(law: IncrementLaw, dp: np.ndarray, window=(100, 2000)):
    """Fit ``c`` in ``P(tau = l) ~ c l^{-3/2} phi(theta0)^l`` over ``window``.

    ``c`` is the geometric mean of the pointwise ratios; lattice laws put no
    mass on some ``l`` and those points are skipped.  Returns ``(c, TailFit)``.
    """
    th = solve_theta0(law)
    phi0 = mgf(law, th)
    lo, hi = window
    hi = min(hi, dp.size - 1)
    ell = np.arange(lo, hi + 1)
    pk = dp[lo:hi + 1]
    keep = pk > 0
    ell, pk = ell[keep], pk[keep]
    if ell.size == 0:
        raise InvalidInput("no positive probabilities inside the window")
    log_shape = -1.5 * np.log(ell) + ell * log(phi0)
    log_ratio = np.log(pk) - log_shape
    c = float(np.exp(log_ratio.mean()))
    rel = np.exp(log_ratio - log_ratio.mean())
    full = np.arange(dp.size, dtype=float)
    report = TailFit(
        c=c, theta0=th, phi0=phi0, min_ratio=float(rel.min()), max_ratio=float(rel.max()),
        second_moment=float(dp @ full ** 2), mass=float(dp.sum()), window=(lo, hi),
    )
    return c, report


@njit(cache=True)
def _walk_kernel(cum, values, W0, h, L, u):
    runs = u.shape[0]
    tau = np.full(runs, -1, dtype=np.int64)
    final = np.zeros(runs, dtype=np.int64)
    for r in range(runs):
        w = W0
        for t in range(L):
            x = u[r, t]
            k = 0
            while cum[k] < x:
                k += 1
            w += values[k]
            if w <= 0 or (h > 0 and w >= h):
                tau[r] = t + 1
                break
        final[r] = w
    return tau, final


def simulate_walk(law: IncrementLaw, W0: int, runs: int, L: int, rng, h: int = 0, chunk: int = 2000):
    """Monte Carlo walks from ``W0`` stopped at 0 (or at ``>= h`` when ``h > 0``).

    Returns ``(stop_time, final_value)``; ``stop_time`` is -1 when the walk
    was still running after ``L`` steps.
    """
    cum = np.cumsum(law.probs)
    cum[-1] = 1.0
    taus, finals = [], []
    done = 0
    while done < runs:
        m = min(chunk, runs - done)
        t, f = _walk_kernel(cum, law.values, int(W0), int(h), int(L), rng.random((m, L)))
        taus.append(t)
        finals.append(f)
        done += m
    return np.concatenate(taus), np.concatenate(finals)


def hitting_bound(law: IncrementLaw, W0: int, h: int, c: float = None, direction: str = "i") -> float:
    """Optional-stopping bound on ``P(W_gamma > 0)``, ``gamma`` the exit time of ``(0, h)``.

    ``direction='i'`` needs ``E exp(-c beta) >= 1``, ``'ii'`` needs
    ``E exp(c beta) <= 1`` and ``'martingale'`` (mean-zero law) gives ``W0/h``.
    """
    if not 0 < W0 < h:
        raise InvalidInput("need 0 < W0 < h")
    if direction == "martingale":
        if abs(law.mean) > 1e-12:
            raise PreconditionError(f"law has mean {law.mean}, not a martingale")
        return W0 / h
    if c is None or c <= 0:
        raise InvalidInput("c must be positive")
    if direction == "i":
        if mgf(law, -c) < 1:
            raise PreconditionError(f"E exp(-c beta) = {mgf(law, -c)} < 1")
        return -np.expm1(-c * W0) / -np.expm1(-c * h)
    if direction == "ii":
        if mgf(law, c) > 1:
            raise PreconditionError(f"E exp(c beta) = {mgf(law, c)} > 1")
        return np.expm1(c * W0) / np.expm1(c * h)
    raise InvalidInput(f"unknown direction {direction!r}")


def spitzer_count(a, d: int) -> int:
    """Number of rotations ``j`` whose proper cyclic prefix sums all exceed ``-d``."""
    a = np.asarray(a, dtype=np.int64)
    if d < 1:
        raise InvalidInput("d must be >= 1")
    if a.size == 0 or int(a.sum()) != -d:
        raise InvalidInput(f"sequence must sum to -{d}")
    k = a.size
    count = 0
    for j in range(k):
        prefix = np.cumsum(np.roll(a, -j))[:-1]
        if np.all(prefix > -d):
            count += 1
    return count


def enumerate_spitzer(alphabet=(-1, 0, 1, 2), kmax: int = 7, ds=(1, 2, 3)):
    """Every sequence over ``alphabet`` of length ``<= kmax`` summing to ``-d``.

    Yields ``(sequence, d, count)``.
    """
    for k in range(1, kmax + 1):
        for seq in product(alphabet, repeat=k):
            s = -sum(seq)
            if s in ds:
                yield seq, s, spitzer_count(seq, s)


# closed-form predictions

def _regime(n, eps):
    if eps <= 0:
        raise OutOfRegime(f"eps must be positive, got {eps}")
    if n * eps ** 3 <= 1:
        raise OutOfRegime(f"n eps^3 = {n * eps ** 3:.3g} <= 1")


def psi(n: float, eps: float) -> float:
    """Subcritical size scale ``2 eps^-2 ln(n eps^3)``."""
    _regime(n, eps)
    return 2.0 / eps ** 2 * log(n * eps ** 3)


def predict_subcritical(n, d, eps) -> float:
    _check_d(d)
    return (d - 2) / (d - 1) * psi(n, eps)


def predict_giant(n, d, eps) -> float:
    _check_d(d)
    _regime(n, eps)
    return 2 * d * eps * n / (d - 2)


def predict_damage(n, d, eps) -> float:
    _check_d(d)
    _regime(n, eps)
    return 2 * d * eps * n


def predict_second(n, d, eps) -> float:
    _check_d(d)
    _regime(n, eps)
    return 2 * (d - 2) / (d - 1) / eps ** 2 * log(n * eps ** 3)


def p_from_lambda(n, d, lam) -> float:
    _check_d(d)
    return (1 + lam * n ** (-1.0 / 3.0)) / (d - 1)


def p_from_eps(d, eps) -> float:
    _check_d(d)
    return (1 + eps) / (d - 1)


def _edge_extinction(d, p):
    # probability that a half-edge leads only to finitely many vertices
    # (branching fixed point eta = 1 - p + p eta^(d-1), smallest root in [0, 1])
    if p * (d - 1) <= 1:
        return 1.0
    lo, hi = 0.0, 1.0 - 1e-15
    g = lambda x: 1 - p + p * x ** (d - 1) - x
    # g > 0 below the root, g < 0 between the root and 1
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def giant_fraction_tree(d, p) -> float:
    """Large-``n`` fraction of vertices in the giant, from the local tree limit."""
    eta = _edge_extinction(d, p)
    return 1 - eta ** d


def damage_fraction_tree(d, p) -> float:
    """Large-``n`` fraction of vertices outside the giant with exactly one closed edge into it."""
    eta = _edge_extinction(d, p)
    a = (1 - p) * (1 - eta ** (d - 1))
    return d * a * eta ** ((d - 1) ** 2)


@dataclass
class RegimePrediction:
    n: int
    d: int
    p: float
    eps: float = None
    lam: float = None
    psi: float = None
    C1: float = None
    Cl: float = None
    M1: float = None
    C2: float = None


def regime_prediction(n, d, eps=None, lam=None) -> RegimePrediction:
    """Predictions for a subcritical (``eps < 0``), supercritical (``eps > 0``) or window (``lam``) run."""
    if (eps is None) == (lam is None):
        raise InvalidInput("give exactly one of eps and lam")
    if lam is not None:
        p = p_from_lambda(n, d, lam)
        scale = n ** (2.0 / 3.0)
        return RegimePrediction(n, d, p, lam=lam, C1=scale, Cl=scale)
    if eps < 0:
        e = -eps
        val = predict_subcritical(n, d, e)
        return RegimePrediction(n, d, (1 - e) / (d - 1), eps=eps, psi=psi(n, e), C1=val, Cl=val)
    return RegimePrediction(
        n, d, p_from_eps(d, eps), eps=eps, psi=psi(n, eps), C1=predict_giant(n, d, eps),
        M1=predict_damage(n, d, eps), C2=predict_second(n, d, eps), Cl=predict_second(n, d, eps),
    )


def prediction_table(rows) -> str:
    """CSV text with one line per ``RegimePrediction``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "d", "eps", "lambda", "p", "psi", "C1", "Cl", "M1", "C2"])
    for r in rows:
        w.writerow([r.n, r.d, "" if r.eps is None else r.eps, "" if r.lam is None else r.lam,
                    repr(r.p), *("" if x is None else repr(x) for x in (r.psi, r.C1, r.Cl, r.M1, r.C2))])
    return buf.getvalue()
