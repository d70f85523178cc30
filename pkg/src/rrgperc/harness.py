"""
Experiment orchestration: regime presets, seeded sweeps, JSONL persistence,
the two-phase supercritical protocol and the comparison reports.
"""

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import walk_theory as wt
from .components import bfs_diameter, damage_counts, ks_two_sample, union_find_components
from .config_model import (
    DegreeSequence, circulant_regular, is_simple, percolate, sample_simple_regular,
)
from .errors import InvalidInput, PersistenceError
from .excursion_oracle import (
    DEFAULT_DS, DEFAULT_M, DEFAULT_SMAX, GammaSample, cdf_table, drift, sample_gamma, write_cdf_csv,
)
from .exploration import explore, rescaled_path

MODES = ("critical", "subcritical", "supercritical", "excursion", "prop1", "cltpath")
GRAPH_MODES = ("multigraph", "simple", "circulant")
OUTPUT_ENV = "RRGPERC_OUTPUT_DIR"

__all__ = [
    "ExperimentConfig", "TrialRecord", "run_sweep", "run_trial", "supercritical_two_phase",
    "compare_window", "prop1_bounds_check", "clt_path_check", "window_tail_fit", "ks_two_sample",
    "derive_seed", "read_records",
]


@dataclass
class ExperimentConfig:
    mode: str
    n: int = 0
    d: int = 3
    lam: float = None
    eps: float = None
    p: float = None
    trials: int = 1
    master_seed: int = 0
    graph_mode: str = "multigraph"
    top_m: int = DEFAULT_M
    ds: float = DEFAULT_DS
    s_max: float = DEFAULT_SMAX
    out: str = None
    stride: int = 0
    diameter: bool = False
    workers: int = 1
    explore_cap: float = None
    s_points: tuple = (1.0,)
    delta: float = 0.1

    def __post_init__(self):
        self.s_points = tuple(float(s) for s in self.s_points)
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise InvalidInput(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.graph_mode not in GRAPH_MODES:
            raise InvalidInput(f"unknown graph mode {self.graph_mode!r}")
        if self.d < 3:
            raise InvalidInput(f"d must be >= 3, got {self.d}")
        if self.trials < 0:
            raise InvalidInput("trials must be >= 0")
        if self.top_m < 1:
            raise InvalidInput("top_m must be >= 1")
        if self.lam is not None and self.eps is not None:
            raise InvalidInput("lambda and epsilon are mutually exclusive")
        if self.mode == "excursion":
            if self.lam is None:
                raise InvalidInput("excursion mode needs lambda")
            return
        if self.n < 1 or (self.n * self.d) % 2:
            raise InvalidInput(f"need n >= 1 and n*d even (n={self.n}, d={self.d})")
        self.resolved_p()

    def resolved_p(self) -> float:
        """Explicit ``p`` wins; otherwise derived from lambda or epsilon.  Disagreement is an error."""
        derived = None
        if self.lam is not None:
            derived = wt.p_from_lambda(self.n, self.d, self.lam)
        elif self.eps is not None:
            if self.mode == "subcritical":
                derived = (1 - self.eps) / (self.d - 1)
            else:
                derived = wt.p_from_eps(self.d, self.eps)
        if self.p is not None:
            if not 0 <= self.p <= 1:
                raise InvalidInput(f"p must lie in [0, 1], got {self.p}")
            if derived is not None and abs(derived - self.p) > 1e-12:
                raise InvalidInput(f"--p {self.p} conflicts with the derived value {derived}")
            return float(self.p)
        if derived is None:
            if self.mode == "prop1":
                return 1.0 / (self.d - 1)
            raise InvalidInput("one of lambda, epsilon or p is required")
        if self.mode in ("subcritical", "supercritical") and self.eps is None:
            raise InvalidInput(f"{self.mode} mode needs epsilon")
        return float(derived)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["s_points"] = list(self.s_points)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    def output_path(self):
        if self.out:
            return Path(self.out)
        base = os.environ.get(OUTPUT_ENV)
        if not base:
            return None
        tag = f"{self.mode}_n{self.n}_d{self.d}_seed{self.master_seed}.jsonl"
        return Path(base) / tag


@dataclass
class TrialRecord:
    trial_index: int
    seed: int
    p: float = None
    graph_mode: str = None
    sizes: list = field(default_factory=list)
    was_simple: bool = None
    steps: int = None
    M1: int = None
    giant_ok: bool = None
    C2_phase1: int = None
    remainder_sizes: list = None
    diameters: list = None
    diameter_exact: list = None
    yhat: dict = None
    truncated: bool = None
    wall_time: float = 0.0

    def payload(self) -> dict:
        """Everything except timing; identical seeds give identical payloads."""
        out = asdict(self)
        out.pop("wall_time")
        return out

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "TrialRecord":
        return cls(**json.loads(line))


def derive_seed(master_seed: int, trial_index: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), int(trial_index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _graph_run(cfg: ExperimentConfig, p: float, rng, cap=None):
    deg = DegreeSequence.regular(cfg.n, cfg.d)
    if cfg.graph_mode == "multigraph":
        return explore(deg, p, rng, cap=cap), None
    if cfg.graph_mode == "simple":
        g = sample_simple_regular(cfg.n, cfg.d, rng)
    else:
        g = circulant_regular(cfg.n, cfg.d)
    m = percolate(g.matching, p, rng)
    return explore(deg, p, matching=m, cap=cap), True


def _dump_path(cfg, run, idx):
    base = cfg.output_path()
    if base is None or cfg.stride <= 0:
        return
    y = run.path.values
    t = np.arange(0, y.size, cfg.stride)
    dest = base.with_name(f"{base.stem}.path{idx}.csv")
    np.savetxt(dest, np.column_stack([t, y[t]]), delimiter=",", header="t,Y", comments="", fmt="%d")


def _yhat_points(cfg, run):
    if run.steps == 0:
        return None
    f = rescaled_path(run.path, cfg.n, cfg.d)
    out = {}
    for s in cfg.s_points:
        try:
            out[repr(s)] = float(f(s))
        except IndexError:
            out[repr(s)] = None
    return out


def supercritical_two_phase(cfg: ExperimentConfig, rng=None, trial_index: int = 0) -> TrialRecord:
    """Largest component with its 1-damaged boundary, then a fresh exploration of the rest.

    Phase 2 keeps every tuple outside ``C_1``; a ``k``-damaged tuple keeps
    ``d - k`` half-edges and fully damaged tuples (isolated vertices) are
    dropped.  ``giant_ok`` records whether both ``|C_1|`` and ``|M_1|`` lie in
    the ``(1 +- delta)`` bands; missing the band is not an error.
    """
    n, d, eps = cfg.n, cfg.d, cfg.eps
    if eps is None:
        raise InvalidInput("supercritical runs need epsilon")
    giant = wt.predict_giant(n, d, eps)
    dmg_pred = wt.predict_damage(n, d, eps)
    rng = np.random.default_rng(rng)
    p = cfg.resolved_p()
    run, simple = _graph_run(cfg, p, rng)
    g = run.graph()
    summary = union_find_components(g)
    dmg = damage_counts(g, summary, 0)
    c1 = int(summary.sizes[0])
    m1 = int(dmg.get(1, 0))
    ok = abs(c1 - giant) <= cfg.delta * giant and abs(m1 - dmg_pred) <= cfg.delta * dmg_pred

    # remainder degree sequence
    inside = summary.membership == 0
    e = g.edges
    a_in, b_in = inside[e[:, 0]], inside[e[:, 1]]
    into = np.concatenate([e[a_in & ~b_in, 1], e[b_in & ~a_in, 0]])
    k_dmg = np.bincount(into, minlength=n)
    rest = (~inside) & (k_dmg < d)
    sizes = d - k_dmg[rest]
    remainder = []
    if sizes.size and sizes.sum() > 0:
        run2 = explore(DegreeSequence(sizes, d), p, rng)
        remainder = run2.all_component_sizes()[: cfg.top_m].tolist()
    return TrialRecord(
        trial_index=trial_index, seed=0, p=p, graph_mode=cfg.graph_mode,
        sizes=summary.sizes[: cfg.top_m].tolist(),
        was_simple=simple if simple is not None else bool(is_simple(g)),
        steps=run.steps, M1=m1, giant_ok=bool(ok),
        C2_phase1=int(summary.sizes[1]) if summary.count > 1 else 0,
        remainder_sizes=remainder,
    )


def run_trial(cfg: ExperimentConfig, idx: int) -> TrialRecord:
    """One trial, fully determined by ``(cfg.master_seed, idx)``."""
    seed = derive_seed(cfg.master_seed, idx)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    if cfg.mode == "excursion":
        g = sample_gamma(cfg.d, cfg.lam, cfg.s_max, cfg.ds, 1, cfg.top_m, rng)
        rec = TrialRecord(idx, seed, sizes=g.lengths[0].tolist(), truncated=bool(g.truncated[0]))
    elif cfg.mode == "supercritical":
        rec = supercritical_two_phase(cfg, rng, idx)
        rec.seed = seed
    else:
        p = cfg.resolved_p()
        cap = None
        if cfg.explore_cap is not None:
            cap = int(cfg.explore_cap * cfg.n ** (2.0 / 3.0))
        run, simple = _graph_run(cfg, p, rng, cap)
        complete = run.complete
        sizes = run.all_component_sizes() if complete else run.sorted_sizes()
        rec = TrialRecord(idx, seed, p=p, graph_mode=cfg.graph_mode, sizes=sizes[: cfg.top_m].tolist(),
                          steps=run.steps)
        if simple is not None:
            rec.was_simple = True
        elif complete:
            rec.was_simple = bool(is_simple(run.graph()))
        if cfg.mode in ("critical", "cltpath"):
            rec.yhat = _yhat_points(cfg, run)
        if cfg.diameter and complete:
            g = run.graph()
            summary = union_find_components(g)
            diam, exact = [], []
            for j in range(min(cfg.top_m, summary.count)):
                v, ex = bfs_diameter(g, j, summary=summary)
                diam.append(v)
                exact.append(ex)
            rec.diameters, rec.diameter_exact = diam, exact
        _dump_path(cfg, run, idx)
    rec.wall_time = time.perf_counter() - t0
    return rec


def _run_trial_args(args):
    return run_trial(*args)


def read_records(path):
    """Header dict and records from a JSONL results file."""
    header, recs = None, []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if "header" in obj:
                header = obj["header"]
            else:
                recs.append(TrialRecord(**obj))
    return header, recs


def run_sweep(cfg: ExperimentConfig, resume: bool = True) -> list:
    """All trials of ``cfg`` in trial order, persisted line by line when an output path is set.

    The first line of the file is ``{"header": config}``.  With ``resume``, an
    existing file for the same config is extended rather than recomputed.
    """
    path = cfg.output_path()
    header = {k: v for k, v in cfg.to_dict().items() if k not in ("out", "workers")}
    done = {}
    fh = None
    try:
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            if resume and path.exists() and path.stat().st_size > 0:
                old_header, old = read_records(path)
                # extending the trial count is a resume, anything else is a clash
                same = {k: v for k, v in (old_header or {}).items() if k != "trials"}
                if same != {k: v for k, v in header.items() if k != "trials"}:
                    raise InvalidInput(f"{path} holds results for a different configuration")
                done = {r.trial_index: r for r in old}
                fh = open(path, "a")
            else:
                fh = open(path, "w")
                fh.write(json.dumps({"header": header}, sort_keys=True) + "\n")
                fh.flush()
        todo = [i for i in range(cfg.trials) if i not in done]
        jobs = [(cfg, i) for i in todo]
        if cfg.workers > 1 and len(jobs) > 1:
            pool = ProcessPoolExecutor(max_workers=cfg.workers)
            results = pool.map(_run_trial_args, jobs)
        else:
            pool = None
            results = map(_run_trial_args, jobs)
        try:
            for rec in results:
                done[rec.trial_index] = rec
                if fh is not None:
                    fh.write(rec.to_json() + "\n")
                    fh.flush()
        finally:
            if pool is not None:
                pool.shutdown(cancel_futures=True)
    except OSError as exc:
        raise PersistenceError(f"writing results failed: {exc}", partial_path=path) from exc
    finally:
        if fh is not None:
            fh.close()
    return [done[i] for i in sorted(done)]


def _oracle_for(cfg, oracle_trials, rng=None):
    rng = np.random.default_rng(rng if rng is not None else np.random.SeedSequence([cfg.master_seed, 2 ** 32]))
    return sample_gamma(cfg.d, cfg.lam, cfg.s_max, cfg.ds, oracle_trials, cfg.top_m, rng)


def _top(records, j):
    return np.array([r.sizes[j] if len(r.sizes) > j else 0 for r in records], dtype=float)


def compare_window(cfg: ExperimentConfig, records=None, oracle: GammaSample = None,
                   oracle_trials: int = 10000, cdf_dir=None) -> dict:
    """KS distance between ``n^{-2/3} |C_j|`` and the oracle's ``|gamma_j|`` for ``j <= top_m``."""
    if cfg.mode != "critical" or cfg.lam is None:
        raise InvalidInput("compare_window needs a critical-mode config with lambda")
    if records is None:
        records = run_sweep(cfg)
    if oracle is None:
        oracle = _oracle_for(cfg, oracle_trials)
    if oracle.d != cfg.d or oracle.lam != cfg.lam:
        raise InvalidInput(f"oracle (d={oracle.d}, lam={oracle.lam}) does not match config")
    scale = cfg.n ** (-2.0 / 3.0)
    m = min(cfg.top_m, oracle.lengths.shape[1])
    ks, tables = [], {}
    for j in range(m):
        graph = _top(records, j) * scale
        lim = oracle.lengths[:, j]
        stat, pval = ks_two_sample(graph, lim)
        ks.append({"j": j + 1, "ks": stat, "p_value": pval,
                   "graph_median": float(np.median(graph)), "oracle_median": float(np.median(lim))})
        tables[j + 1] = (cdf_table(graph), cdf_table(lim))
        if cdf_dir is not None:
            cdf_dir = Path(cdf_dir)
            cdf_dir.mkdir(parents=True, exist_ok=True)
            write_cdf_csv(graph, cdf_dir / f"graph_C{j + 1}_cdf.csv")
            write_cdf_csv(lim, cdf_dir / f"oracle_gamma{j + 1}_cdf.csv")
    capped = cfg.explore_cap is not None
    return {
        "n": cfg.n, "d": cfg.d, "lambda": cfg.lam, "trials": len(records),
        "oracle_trials": int(oracle.lengths.shape[0]), "truncation_rate": oracle.truncation_rate,
        "ks": ks, "cdf": tables,
        "note": "components discovered before the time cap only" if capped else None,
    }


def window_tail_fit(records, n: int, A_values=(1.0, 1.5, 2.0)) -> dict:
    """Fit ``P(|C_1| >= A n^{2/3}) ~ K exp(-c A^3) / A`` by least squares in log space."""
    c1 = _top(records, 0)
    A = np.asarray(A_values, dtype=float)
    prob = np.array([np.mean(c1 >= a * n ** (2.0 / 3.0)) for a in A])
    if np.any(prob <= 0):
        return {"A": A.tolist(), "prob": prob.tolist(), "c": None, "ok": False}
    X = np.column_stack([np.ones_like(A), -A ** 3])
    coef, *_ = np.linalg.lstsq(X, np.log(prob * A), rcond=None)
    fitted = np.exp(coef[0] - coef[1] * A ** 3) / A
    se = np.sqrt(prob * (1 - prob) / c1.size)
    within = bool(np.all(np.abs(fitted - prob) <= 3 * se + 1e-12))
    decreasing = bool(np.all(np.diff(prob) < 0))
    return {"A": A.tolist(), "prob": prob.tolist(), "fitted": fitted.tolist(), "c": float(coef[1]),
            "decreasing": decreasing, "fit_within_3se": within,
            "ok": bool(coef[1] > 0 and decreasing and within)}


def prop1_bounds_check(cfg: ExperimentConfig, records=None, A_values=(4.0, 6.0), eta: float = 0.1) -> dict:
    """Exceedance ``P(|C_1| > A n^{2/3})`` against ``8 / A^{3/2}`` at each ``A``.

    A violation is an exceedance rate above the bound by more than three
    binomial standard errors.  Bounds ``>= 1`` are reported as uninformative.
    """
    if records is None:
        records = run_sweep(cfg)
    c1 = _top(records, 0)
    n = cfg.n
    rows = []
    for a in A_values:
        bound = 8.0 / a ** 1.5
        rate = float(np.mean(c1 > a * n ** (2.0 / 3.0))) if c1.size else 0.0
        informative = bound < 1
        slack = 3 * np.sqrt(bound * (1 - bound) / max(c1.size, 1)) if informative else 0.0
        rows.append({"A": a, "bound": bound, "rate": rate, "informative": informative,
                     "violation": bool(informative and rate > bound + slack)})
    report = {"n": n, "d": cfg.d, "p": cfg.resolved_p(), "graph": cfg.graph_mode,
              "trials": int(c1.size), "rows": rows,
              "informative_from_A": 4 ** (1 / 1.5)}
    if cfg.eps is not None and cfg.mode == "subcritical":
        thr = (1 + eta) * wt.predict_subcritical(n, cfg.d, cfg.eps)
        report["subcritical_threshold"] = thr
        report["subcritical_exceedance"] = float(np.mean(c1 > thr))
    return report


def clt_path_check(cfg: ExperimentConfig, records=None) -> dict:
    """Mean and variance of the rescaled clipped walk against ``(d-1) B(s)`` moments."""
    if records is None:
        records = run_sweep(cfg)
    lam = cfg.lam if cfg.lam is not None else 0.0
    d = cfg.d
    rows = []
    for s in cfg.s_points:
        vals = np.array([r.yhat[repr(s)] for r in records
                         if r.yhat is not None and r.yhat.get(repr(s)) is not None], dtype=float)
        mean_pred = (d - 1) * drift(d, lam, s)
        var_pred = (d - 1) * (d - 2) * s
        row = {"s": s, "count": int(vals.size), "mean_pred": float(mean_pred), "var_pred": float(var_pred)}
        if vals.size > 1:
            row.update(mean=float(vals.mean()), var=float(vals.var(ddof=1)),
                       mean_se=float(vals.std(ddof=1) / np.sqrt(vals.size)))
        rows.append(row)
    return {"n": cfg.n, "d": d, "lambda": lam, "rows": rows}
