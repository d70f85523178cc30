"""
Limit object for the critical window.

``B(s) = sigma W(s) + lam s - (d-2) s^2 / (2d)`` with ``sigma^2 = (d-2)/(d-1)``,
its reflection at the running minimum, and the ordered lengths of the
excursions of the reflected path away from 0.  Paths live on a regular grid.
"""

import csv
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InvalidInput

DEFAULT_DS = 1e-3
DEFAULT_SMAX = 20.0
DEFAULT_M = 4


@dataclass
class GridPath:
    step: float
    values: np.ndarray
    d: int
    lam: float

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.values.size) * self.step

    @property
    def s_max(self) -> float:
        return (self.values.size - 1) * self.step


def _grid_size(s_max, ds):
    if not ds > 0 or not s_max >= ds:
        raise InvalidInput(f"need ds > 0 and s_max >= ds (got ds={ds}, s_max={s_max})")
    # tolerate s_max/ds landing a hair below an integer
    return int(np.floor(s_max / ds + 1e-9))


def drift(d, lam, s):
    return lam * s - (d - 2) * s * s / (2.0 * d)


def noise_scale(d):
    return np.sqrt((d - 2) / (d - 1))


def simulate_b_lambda(d: int, lam: float, s_max: float = DEFAULT_SMAX, ds: float = DEFAULT_DS,
                      rng=None) -> GridPath:
    """One grid path of ``B``.  ``rng=None`` gives the noiseless drift curve."""
    if d < 3:
        raise InvalidInput(f"d must be >= 3, got {d}")
    N = _grid_size(s_max, ds)
    s = np.arange(N + 1) * ds
    vals = drift(d, lam, s)
    if rng is not None:
        inc = rng.standard_normal(N) * (noise_scale(d) * np.sqrt(ds))
        vals[1:] += np.cumsum(inc)
    return GridPath(ds, vals, d, lam)


def reflect(path: GridPath) -> GridPath:
    """``W = B - running min of B`` (the running min includes ``B(0)``)."""
    b = path.values
    w = b - np.minimum.accumulate(np.minimum(b, b[0]))
    return GridPath(path.step, w, path.d, path.lam)


@dataclass
class Excursions:
    lengths: np.ndarray
    truncated: bool
    longest_truncated: bool


def excursion_lengths(w: GridPath, m: int = DEFAULT_M) -> Excursions:
    """Top ``m`` excursion lengths of a reflected path, padded with zeros.

    An excursion spans two grid zeros (``W <= 0``) with positive points in
    between.  A trailing excursion still open at the end of the grid is
    included with its truncated length and flagged.
    """
    zeros = np.flatnonzero(w.values <= 0)
    N = w.values.size - 1
    gaps = np.diff(zeros)
    lens = gaps[gaps > 1].astype(float)
    trailing = zeros.size > 0 and zeros[-1] < N
    tail_len = float(N - zeros[-1]) if trailing else 0.0
    if zeros.size == 0:
        trailing, tail_len = True, float(N)
    all_lens = np.concatenate([lens, [tail_len]]) if trailing else lens
    order = np.sort(all_lens)[::-1] * w.step
    out = np.zeros(m)
    k = min(m, order.size)
    out[:k] = order[:k]
    longest_trunc = bool(trailing and tail_len > 0 and tail_len >= (lens.max() if lens.size else 0.0))
    return Excursions(out, bool(trailing), longest_trunc)


@njit(cache=True)
def _insert_top(top, x):
    m = top.size
    if x <= top[m - 1]:
        return
    i = m - 1
    while i > 0 and top[i - 1] < x:
        top[i] = top[i - 1]
        i -= 1
    top[i] = x


@njit(cache=True)
def _excursion_kernel(z, sd, drift_curve, m, out, flags, row0):
    # z: (trials, N) standard normals; scan each path once
    trials, N = z.shape
    for r in range(trials):
        top = np.zeros(m)
        b = 0.0
        runmin = 0.0
        last_zero = 0
        for i in range(1, N + 1):
            b += sd * z[r, i - 1]
            val = b + drift_curve[i]
            if val <= runmin:
                runmin = val
                if i - last_zero > 1:
                    _insert_top(top, float(i - last_zero))
                last_zero = i
        tail = N - last_zero
        trunc = 0
        if tail > 0:
            if tail >= top[0]:
                trunc = 1
            _insert_top(top, float(tail))
        out[row0 + r, :] = top
        flags[row0 + r] = trunc


@dataclass
class GammaSample:
    lengths: np.ndarray
    truncation_rate: float
    truncated: np.ndarray
    d: int
    lam: float
    ds: float
    s_max: float


def sample_gamma(d: int, lam: float, s_max: float = DEFAULT_SMAX, ds: float = DEFAULT_DS,
                 trials: int = 1000, m: int = DEFAULT_M, rng=None, chunk: int = 128) -> GammaSample:
    """Ordered excursion lengths of ``trials`` independent reflected paths.

    ``truncated[i]`` is set when the longest excursion of path ``i`` was still
    open at ``s_max``.  Lengths are in units of ``s`` (multiples of ``ds``).
    Paths consume ``N = floor(s_max/ds)`` normals each, so any ``m`` yields the
    same leading coordinates for the same generator state.
    """
    if d < 3:
        raise InvalidInput(f"d must be >= 3, got {d}")
    if m < 1:
        raise InvalidInput("m must be >= 1")
    N = _grid_size(s_max, ds)
    curve = drift(d, lam, np.arange(N + 1) * ds)
    sd = noise_scale(d) * np.sqrt(ds)
    out = np.zeros((trials, m))
    flags = np.zeros(trials, dtype=np.int8)
    for r0 in range(0, trials, chunk):
        k = min(chunk, trials - r0)
        z = np.zeros((k, N)) if rng is None else rng.standard_normal((k, N))
        _excursion_kernel(z, sd, curve, m, out, flags, r0)
    out *= ds
    return GammaSample(out, float(flags.mean()) if trials else 0.0, flags.astype(bool), d, lam, ds, s_max)


def sample_gamma_refined(d: int, lam: float, s_max: float = DEFAULT_SMAX, ds: float = DEFAULT_DS,
                         trials: int = 1000, m: int = DEFAULT_M, rng=None, chunk: int = 128):
    """The same Brownian paths read on grids ``ds/2`` and ``ds``.

    Fine increments are drawn first; each coarse normal is the normalised sum
    of two consecutive fine ones.  Returns ``(coarse, fine)`` samples, so any
    difference between them is discretisation, not sampling noise.
    """
    N = _grid_size(s_max, ds)
    h = ds / 2
    curve_c = drift(d, lam, np.arange(N + 1) * ds)
    curve_f = drift(d, lam, np.arange(2 * N + 1) * h)
    sd_c = noise_scale(d) * np.sqrt(ds)
    sd_f = noise_scale(d) * np.sqrt(h)
    out_c, out_f = np.zeros((trials, m)), np.zeros((trials, m))
    fl_c, fl_f = np.zeros(trials, dtype=np.int8), np.zeros(trials, dtype=np.int8)
    for r0 in range(0, trials, chunk):
        k = min(chunk, trials - r0)
        zf = rng.standard_normal((k, 2 * N))
        zc = (zf[:, 0::2] + zf[:, 1::2]) / np.sqrt(2.0)
        _excursion_kernel(zf, sd_f, curve_f, m, out_f, fl_f, r0)
        _excursion_kernel(np.ascontiguousarray(zc), sd_c, curve_c, m, out_c, fl_c, r0)
    coarse = GammaSample(out_c * ds, float(fl_c.mean()), fl_c.astype(bool), d, lam, ds, s_max)
    fine = GammaSample(out_f * h, float(fl_f.mean()), fl_f.astype(bool), d, lam, h, s_max)
    return coarse, fine


def cdf_table(samples) -> np.ndarray:
    """Two columns ``(value, empirical CDF)`` at the distinct sample values."""
    x = np.sort(np.asarray(samples, dtype=float))
    vals, counts = np.unique(x, return_counts=True)
    return np.column_stack([vals, np.cumsum(counts) / x.size])


def write_lengths_csv(sample: GammaSample, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"gamma_{j + 1}" for j in range(sample.lengths.shape[1])] + ["truncated"])
        for row, fl in zip(sample.lengths, sample.truncated):
            w.writerow([repr(float(x)) for x in row] + [int(fl)])


def write_cdf_csv(samples, path):
    np.savetxt(path, cdf_table(samples), delimiter=",", header="value,cdf", comments="", fmt="%.10g")
