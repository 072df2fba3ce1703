"""Independent simulation trials and the statistics computed from them."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import partial

import numpy as np
from scipy import stats

from . import theory
from .cascade import evaluate_at, evaluate_many, run_continuous
from .cgm import build_multigraph
from .dist import DegreeThresholdDistribution, empirical_counts, realize_rounded, realize_sampled
from .io import atomic_open, fmt, parse_float
from .rng import mix
from .rules import DEFAULT_RULE, check_rule

RESULT_COLUMNS = ("trial", "seed", "n", "final_size", "tau", "a_hat_n_stop", "A_at_t", "xi")
SWEEP_COLUMNS = ("n", "trials", "mean_final_fraction", "var_xi", "mean_tau")


class TrialError(RuntimeError):
    def __init__(self, trial: int, cause: BaseException):
        self.trial = trial
        self.cause = cause
        super().__init__(f"trial {trial} failed: {cause!r}")


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    n: int
    final_size: int
    tau: float
    a_hat_n_stop: float
    A_at_t: int
    xi: float


def default_workers() -> int:
    env = os.environ.get("CASCADE_CLT_WORKERS")
    if env:
        return max(int(env), 1)
    return os.cpu_count() or 1


def default_eval_time(dist, rule: str = DEFAULT_RULE) -> float:
    """t* + 1; infinite when the exploration never stops in the limit."""
    return theory.solve(dist, rule=rule).t_star + 1.0


def run_trial(dist, n: int, trial: int, seed: int, eval_time: float,
              rule: str = DEFAULT_RULE) -> TrialRecord:
    """One realization: sampled sequence, fresh pairing, one exploration.

    The three stages draw from independent streams derived from ``seed``.
    """
    seq = realize_sampled(dist, n, mix(seed, 0))
    mg = build_multigraph(seq, mix(seed, 1))
    traj, _ = run_continuous(mg, seq.thresholds, mix(seed, 2), snapshot_grid=0, rule=rule)
    t = min(eval_time, traj.tau)
    state = evaluate_at(traj, t)
    final = evaluate_at(traj, traj.tau)
    if traj.final_size != seq.n - final.B_n:
        raise RuntimeError("final size does not match the terminal B count")
    a_n = theory.a_hat(empirical_counts(seq), t, rule)
    xi = (state.A_n - seq.n * a_n) / math.sqrt(seq.n)
    return TrialRecord(trial, seed, seq.n, traj.final_size, traj.tau, a_n, state.A_n, xi)


def _guarded(dist, n, eval_time, rule, job):
    k, seed = job
    try:
        return run_trial(dist, n, k, seed, eval_time, rule)
    except Exception as exc:  # noqa: BLE001
        raise TrialError(k, exc) from exc


def run_trials(dist: DegreeThresholdDistribution, n: int, trials: int, root_seed: int = 0,
               eval_time: float | None = None, workers: int = 1,
               rule: str = DEFAULT_RULE) -> list[TrialRecord]:
    """Run ``trials`` independent trials; trial k is seeded with ``mix(root_seed, k)``.

    Records come back ordered by trial index, so the output does not depend
    on ``workers``. ``eval_time`` defaults to t* + 1.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    check_rule(rule)
    if eval_time is None:
        eval_time = default_eval_time(dist, rule)
    if eval_time < 0:
        raise ValueError("eval_time must be nonnegative")
    jobs = [(k, mix(root_seed, k)) for k in range(trials)]
    fn = partial(_guarded, dist, n, eval_time, rule)
    if workers <= 1 or trials == 1:
        return [fn(j) for j in jobs]
    chunk = max(1, trials // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=chunk))


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    variance: float
    skewness: float | None
    excess_kurtosis: float | None
    ks_stat: float | None
    ks_pvalue: float | None

    def to_json(self) -> dict:
        return asdict(self)


def summarize(samples, mu0: float = 0.0, sigma0: float | None = None) -> SummaryStats:
    """Moments of ``samples`` and a KS test against Normal(mu0, sigma0^2).

    The reference normal is supplied by the caller, not fitted. Higher moments
    need at least 8 samples and are None below that; they are NaN when the
    samples are constant.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {x.size}")
    var = float(x.var(ddof=1))
    skew = kurt = None
    if x.size >= 8:
        if var == 0.0:
            skew = kurt = math.nan
        else:
            skew = float(stats.skew(x, bias=False))
            kurt = float(stats.kurtosis(x, fisher=True, bias=False))
    ks_stat = ks_p = None
    if sigma0 is not None and sigma0 > 0:
        res = stats.kstest(x, "norm", args=(mu0, sigma0), method="asymp")
        ks_stat, ks_p = float(res.statistic), float(res.pvalue)
    return SummaryStats(int(x.size), float(x.mean()), var, skew, kurt, ks_stat, ks_p)


def hB_empirical_check(dist, n: int, seed: int = 0, grid: int = 50,
                       rule: str = DEFAULT_RULE) -> float:
    """sup over a grid on [0, tau] of |H_B(t)/n - h_B(e^{-t})| for one run on the rounded sequence."""
    if n < 1000:
        raise ValueError("n must be >= 1000 for a meaningful comparison")
    seq = realize_rounded(dist, n)
    mg = build_multigraph(seq, mix(seed, 1))
    traj, _ = run_continuous(mg, seq.thresholds, mix(seed, 2), snapshot_grid=0, rule=rule)
    if traj.tau == 0.0:
        return 0.0
    ts = np.linspace(0.0, traj.tau, grid)
    hb = evaluate_many(traj, ts)[:, 1] / seq.n
    return float(np.abs(hb - theory.h_B(dist, np.exp(-ts), rule)).max())


@dataclass(frozen=True)
class TauConcentration:
    mean_tau: float
    sd_tau: float
    theory_t_star: float
    passed: bool | None

    @property
    def skipped(self) -> bool:
        return self.passed is None


def tau_concentration(dist, n: int, trials: int, root_seed: int = 0, tol: float = 0.03,
                      workers: int = 1, rule: str = DEFAULT_RULE,
                      records: list[TrialRecord] | None = None) -> TauConcentration:
    """Mean stopping time against t* = -ln z_hat.

    When z_hat = 0 the limit is infinite; the trials still run but ``passed``
    is None as a skip marker.
    """
    t_star = theory.solve(dist, rule=rule).t_star
    if records is None:
        records = run_trials(dist, n, trials, root_seed, math.inf, workers, rule)
    taus = np.array([r.tau for r in records])
    sd = float(taus.std(ddof=1)) if taus.size > 1 else math.nan
    mean = float(taus.mean())
    passed = None if math.isinf(t_star) else bool(abs(mean - t_star) < tol)
    return TauConcentration(mean, sd, t_star, passed)


@dataclass(frozen=True)
class SweepRow:
    n: int
    trials: int
    mean_final_fraction: float
    var_xi: float | None
    mean_tau: float


def convergence_sweep(dist, n_list, trials: int, root_seed: int = 0,
                      eval_time: float | None = None, workers: int = 1,
                      rule: str = DEFAULT_RULE) -> list[SweepRow]:
    """One batch per n; batch i uses root seed ``mix(root_seed, i)``."""
    n_list = [int(v) for v in n_list]
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be nonempty and strictly increasing")
    if eval_time is None:
        eval_time = default_eval_time(dist, rule)
    rows = []
    for i, n in enumerate(n_list):
        recs = run_trials(dist, n, trials, mix(root_seed, i), eval_time, workers, rule)
        frac = np.array([r.final_size / r.n for r in recs])
        xi = np.array([r.xi for r in recs])
        var = summarize(xi).variance if len(recs) >= 2 else None
        rows.append(SweepRow(n, len(recs), float(frac.mean()), var,
                             float(np.mean([r.tau for r in recs]))))
    return rows


def write_results_csv(records, path) -> None:
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in records:
            w.writerow([fmt(getattr(r, c)) for c in RESULT_COLUMNS])


def read_results_csv(path) -> list[TrialRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        TrialRecord(int(r["trial"]), int(r["seed"]), int(r["n"]), int(r["final_size"]),
                    parse_float(r["tau"]), parse_float(r["a_hat_n_stop"]), int(r["A_at_t"]),
                    parse_float(r["xi"]))
        for r in rows
    ]


def write_sweep_csv(rows, path) -> None:
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([fmt(getattr(r, c)) for c in SWEEP_COLUMNS])


def read_sweep_csv(path) -> list[SweepRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        SweepRow(int(r["n"]), int(r["trials"]), parse_float(r["mean_final_fraction"]),
                 parse_float(r["var_xi"]), parse_float(r["mean_tau"]))
        for r in rows
    ]
