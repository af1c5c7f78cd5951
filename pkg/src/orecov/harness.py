"""Rate experiments: sweep the subspace size, measure recovery errors, fit decay rates.

For W^r_2 each error is a certified worst case: the operator norm of the
recovery error over the band-limited subclass on a truth box.  For W^r_1 the
error is the largest L2 recovery error over a few Fejer-kernel surrogates.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .classes import (
    WorstCaseProblem,
    fejer_member,
    random_w2r_member,
    worst_case_report,
)
from .discretization import build_sample_set
from .errors import OrecovError
from .recovery import l2_error, lsw_solve, recovery_matrix
from .trig import FrequencySet, evaluate, hyperbolic_cross

log = logging.getLogger(__name__)

CLASSES = ("w2r", "w1r")
METHODS = ("grid", "random", "bss")
CSV_HEADER = ("n", "N", "m", "error", "C1", "C2")


def default_n_list(d: int) -> list[int]:
    if d == 1:
        return [16, 32, 64, 128, 256, 512]
    return [64, 128, 256, 512, 1024]


@dataclass
class ExperimentConfig:
    class_id: str = "w2r"
    r: float = 2.0
    d: int = 1
    n_list: list = None
    method: str = "random"
    kappa: float = 10.0
    c: float = 12.0
    seed: int = 0
    box_factor: float = 4.0
    c1_floor: float = 0.1
    max_retries: int = 10
    n_surrogates: int = 3
    monte_carlo: int = 0
    output_dir: str = "results"
    name: str = ""

    def __post_init__(self):
        if self.n_list is None:
            self.n_list = default_n_list(self.d)
        self.n_list = [int(n) for n in self.n_list]
        self.validate()

    def validate(self):
        if self.class_id not in CLASSES:
            raise ValueError(f"class_id must be one of {CLASSES}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if any(n < 1 for n in self.n_list):
            raise ValueError("n_list entries must be positive")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValueError("n_list must be strictly increasing")
        if self.class_id == "w2r" and not self.r > 0.5:
            raise ValueError("W^r_2 rates need r > 1/2")
        if self.class_id == "w1r" and not self.r > 1:
            raise ValueError("W^r_1 rates need r > 1")
        if self.c <= 1 or self.kappa <= 0 or self.box_factor < 1:
            raise ValueError("need c > 1, kappa > 0 and box_factor >= 1")

    @property
    def stem(self) -> str:
        return self.name or f"{self.class_id}_d{self.d}_r{self.r:g}_{self.method}_s{self.seed}"

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class RatePoint:
    n: int
    N: int
    m: int
    error: float
    C1: float
    C2: float


@dataclass(frozen=True)
class RateFit:
    slope: float
    log_exponent: float | None
    residual: float
    n_points: int

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class Sweep:
    config: ExperimentConfig
    points: list
    failures: list = field(default_factory=list)
    details: list = field(default_factory=list)
    workers: int = 1


def point_seed(seed: int, n: int) -> int:
    """Per-point seed, independent of sweep order and worker count."""
    return int(np.random.SeedSequence([seed, n]).generate_state(1)[0])


def cross_for_size(d: int, n: int) -> tuple[int, FrequencySet]:
    """Integer radius Q whose hyperbolic cross size is closest to n (smaller Q on ties)."""
    prev_Q, prev = 1, hyperbolic_cross(d, 1)
    if prev.N >= n:
        return prev_Q, prev
    Q = 1
    while True:
        Q += 1
        cur = hyperbolic_cross(d, Q)
        if cur.N >= n:
            if n - prev.N <= cur.N - n:
                return prev_Q, prev
            return Q, cur
        prev_Q, prev = Q, cur


def largest_coefficient_set(d: int, n: int) -> FrequencySet:
    """The n frequencies with the largest Bernoulli coefficients.

    |F_r hat(k)| = prod max(1,|k_j|)^{-r} is decreasing in the mixed size, so
    the choice does not depend on r.  Ties go to the smaller sum |k_j|, then
    to lexicographic order; n = 1 therefore gives {0}.
    """
    Q = 1
    while hyperbolic_cross(d, Q).N < n:
        Q *= 2
    pool = hyperbolic_cross(d, Q)
    # pool rows are already lexicographic, so a stable sort keeps that as the last key
    l1 = np.abs(pool.frequencies).sum(axis=1)
    order = np.lexsort((l1, pool.mixed_size()))
    return FrequencySet(pool.frequencies[order[:n]])


def _sample_set(cfg: ExperimentConfig, freqs: FrequencySet, box_radius: int, seed: int):
    # grid sampling resolves the whole truth box, so it is exact on the subclass
    return build_sample_set(
        freqs, cfg.method, seed=seed, kappa=cfg.kappa, c=cfg.c, c1_floor=cfg.c1_floor,
        max_retries=cfg.max_retries, grid_s=2 * box_radius + 1,
    )


def _w2r_point(cfg: ExperimentConfig, n: int):
    seed = point_seed(cfg.seed, n)
    Q, freqs = cross_for_size(cfg.d, n)
    K = cfg.box_factor * Q
    box = hyperbolic_cross(cfg.d, K)
    S, cert = _sample_set(cfg, freqs, box.radius(), seed)
    A = recovery_matrix(freqs, S, certificate=cert)
    report = worst_case_report(WorstCaseProblem(box, freqs, A, cfg.r), S)
    detail = {
        "n": n, "seed": seed, "Q": Q, "K": K, "box_size": box.N,
        "truncation": report.truncation, "certificate": cert.to_json(),
    }
    if cfg.monte_carlo:
        worst_mc = 0.0
        for j in range(cfg.monte_carlo):
            f = random_w2r_member(box, cfg.r, point_seed(seed, j))
            u = lsw_solve(freqs, S, evaluate(f.f, S.points), certificate=cert).approximant
            worst_mc = max(worst_mc, l2_error(f.f, u))
        detail["monte_carlo_max"] = worst_mc
    point = RatePoint(n, freqs.N, S.m, report.value, cert.C1, cert.C2)
    return point, detail


def _w1r_point(cfg: ExperimentConfig, n: int):
    seed = point_seed(cfg.seed, n)
    freqs = largest_coefficient_set(cfg.d, n)
    K = int(math.ceil(cfg.box_factor * max(1, freqs.radius())))
    S, cert = _sample_set(cfg, freqs, K, seed)
    rng = np.random.default_rng(seed)
    shifts = [np.zeros(cfg.d)] + [rng.uniform(0, 2 * np.pi, cfg.d) for _ in range(cfg.n_surrogates - 1)]
    errors = []
    for shift in shifts:
        f = fejer_member(cfg.d, K, cfg.r, shift)
        u = lsw_solve(freqs, S, evaluate(f.f, S.points), certificate=cert).approximant
        box = FrequencySet(np.concatenate([f.box.frequencies, freqs.frequencies]))
        errors.append(l2_error(f.f.embed(box), u))
    detail = {
        "n": n, "seed": seed, "K": K, "surrogate_errors": errors,
        "certificate": cert.to_json(),
    }
    return RatePoint(n, freqs.N, S.m, max(errors), cert.C1, cert.C2), detail


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get("ORECOV_THREADS")
    workers = min(4, os.cpu_count() or 1, max(n_tasks, 1))
    if cap:
        workers = max(1, min(workers, int(cap)))
    return workers


def _run(cfg: ExperimentConfig, point_fn) -> Sweep:
    workers = worker_count(len(cfg.n_list))

    def task(n):
        try:
            return n, point_fn(cfg, n), None
        except OrecovError as exc:
            log.warning("n=%d aborted: %s", n, exc)
            return n, None, str(exc)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, cfg.n_list))
    else:
        results = [task(n) for n in cfg.n_list]
    sweep = Sweep(cfg, [], workers=workers)
    for n, out, reason in results:
        if out is None:
            sweep.failures.append({"n": n, "reason": reason})
        else:
            sweep.points.append(out[0])
            sweep.details.append(out[1])
    return sweep


def run_w2r_experiment(cfg: ExperimentConfig) -> Sweep:
    """Certified worst-case errors of weighted least squares on hyperbolic crosses."""
    if cfg.class_id != "w2r":
        raise ValueError("config is not a W^r_2 experiment")
    return _run(cfg, _w2r_point)


def run_w1r_experiment(cfg: ExperimentConfig) -> Sweep:
    """Recovery errors of Fejer-kernel surrogates in W^r_1 on the n largest kernel frequencies."""
    if cfg.class_id != "w1r":
        raise ValueError("config is not a W^r_1 experiment")
    return _run(cfg, _w1r_point)


def run_experiment(cfg: ExperimentConfig) -> Sweep:
    return run_w2r_experiment(cfg) if cfg.class_id == "w2r" else run_w1r_experiment(cfg)


def fit_rate(points, with_log_term: bool = False) -> RateFit:
    """Regress log(error) on log N (and log log N when ``with_log_term``).

    N is the realized subspace dimension of each point.
    """
    if len(points) < 3:
        raise ValueError("need at least 3 points to fit a rate")
    N = np.array([p.N for p in points], dtype=float)
    err = np.array([p.error for p in points], dtype=float)
    if np.any(~(err > 0)):
        raise ValueError("errors must be positive")
    cols = [np.ones_like(N), np.log(N)]
    if with_log_term:
        if np.any(N <= 1):
            raise ValueError("log-term fit needs N > 1")
        cols.append(np.log(np.log(N)))
    X = np.stack(cols, axis=1)
    y = np.log(err)
    coef = np.linalg.lstsq(X, y, rcond=None)[0]
    resid = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    return RateFit(
        slope=float(coef[1]),
        log_exponent=float(coef[2]) if with_log_term else None,
        residual=resid,
        n_points=len(points),
    )


def predicted_exponents(class_id: str, r: float, d: int) -> tuple[float, float]:
    """(power, log power) of the upper bound n^power (log n)^logpower."""
    if class_id == "w2r":
        return -r, (d - 1) * r + 0.5
    return -r + 0.5, r * (d - 1) + 0.5


def use_log_term(points, d: int) -> bool:
    if len(points) < 4:
        return False
    span = math.log10(max(p.N for p in points) / min(p.N for p in points))
    return d >= 2 or span >= 1.5


def rate_window(class_id: str, r: float, d: int) -> tuple[float, float]:
    """Accepted slope interval for a slope-only fit at desk scale."""
    power, _ = predicted_exponents(class_id, r, d)
    if d >= 2:
        return -math.inf, power + 0.35
    half = 0.25 if class_id == "w2r" else 0.3
    return power - half, power + half


def sweep_checks(sweep: Sweep, fit: RateFit | None) -> dict:
    """Named pass/fail checks for a finished sweep."""
    cfg = sweep.config
    checks = {"no_failures": not sweep.failures}
    checks["positive_C1"] = all(p.C1 > 0 for p in sweep.points)
    if cfg.class_id == "w2r":
        checks["error_at_least_truncation"] = all(
            p.error >= det["truncation"] * (1 - 1e-9) for p, det in zip(sweep.points, sweep.details)
        )
        if cfg.monte_carlo:
            checks["monte_carlo_below_worst_case"] = all(
                det["monte_carlo_max"] <= p.error * (1 + 1e-9)
                for p, det in zip(sweep.points, sweep.details)
            )
    if cfg.method == "bss":
        checks["bss_size_cap"] = all(p.m <= math.ceil(cfg.c * p.N) for p in sweep.points)
    if fit is not None:
        lo, hi = rate_window(cfg.class_id, cfg.r, cfg.d)
        checks["slope_in_window"] = lo <= fit.slope <= hi
    return checks


def format_csv(points) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for p in points:
        writer.writerow([p.n, p.N, p.m, repr(float(p.error)), repr(float(p.C1)), repr(float(p.C2))])
    return buf.getvalue()


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        RatePoint(int(r["n"]), int(r["N"]), int(r["m"]), float(r["error"]), float(r["C1"]), float(r["C2"]))
        for r in rows
    ]


def _plot_svg(path: Path, sweep: Sweep, fit: RateFit | None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "orecov"
    cfg = sweep.config
    fig, ax = plt.subplots(figsize=(5, 4))
    if sweep.points:
        N = np.array([p.N for p in sweep.points], dtype=float)
        err = np.array([p.error for p in sweep.points])
        ax.loglog(N, err, "o-", label="measured")
        power, logpower = predicted_exponents(cfg.class_id, cfg.r, cfg.d)
        shape = N**power * np.log(np.maximum(N, 2.0)) ** logpower
        ax.loglog(N, shape * err[0] / shape[0], "--", label=f"n^{power:g} (log n)^{logpower:g}")
        if fit is not None:
            ax.set_title(f"{cfg.class_id}, d={cfg.d}, r={cfg.r:g}: slope {fit.slope:.3f}")
        ax.legend()
    ax.set_xlabel("N = dim T(Lambda)")
    ax.set_ylabel("error")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit(sweep: Sweep, fit: RateFit | None, out_dir=None) -> dict:
    """Write CSV, JSON manifest and SVG plot; returns the paths written."""
    cfg = sweep.config
    out = Path(out_dir or cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_text = format_csv(sweep.points)
        paths = {
            "csv": out / f"{cfg.stem}.csv",
            "manifest": out / f"{cfg.stem}.json",
            "svg": out / f"{cfg.stem}.svg",
        }
        paths["csv"].write_text(csv_text)
        power, logpower = predicted_exponents(cfg.class_id, cfg.r, cfg.d)
        manifest = {
            "config": cfg.to_json(),
            "seeds": {str(det["n"]): det["seed"] for det in sweep.details},
            "workers": sweep.workers,
            "points": [asdict(p) for p in sweep.points],
            "details": sweep.details,
            "failures": sweep.failures,
            "fit": fit.to_json() if fit else None,
            "predicted": {"power": power, "log_power": logpower},
            "checks": sweep_checks(sweep, fit),
            "csv_sha256": hashlib.sha256(csv_text.encode()).hexdigest(),
        }
        paths["manifest"].write_text(json.dumps(manifest, indent=2))
        _plot_svg(paths["svg"], sweep, fit)
    except OSError as exc:
        raise OSError(f"could not write results under {out}: {exc}") from exc
    return paths
