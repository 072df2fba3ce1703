"""Desk-scale verification checks, shared by ``cascade-clt verify`` and the test suite.

Each check returns a :class:`CheckResult` with the measured quantities; none
of them records wall-clock time, so repeated runs serialize identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mc, theory
from .cascade import death_process_reference, run_continuous, run_discrete
from .cgm import build_multigraph
from .dist import EXAMPLE, DegreeThresholdDistribution, preset_kcore, realize_sampled
from .rng import as_generator, mix
from .rules import DEFAULT_RULE

# closed forms for the example law: phi(z) = 3z^2 - 2.7z and
# a_hat(t*) = 0.1 + 0.9 * P(Bin(3, 0.9) = 0)
EXAMPLE_ZHAT = 0.9
EXAMPLE_T_STAR = -math.log(0.9)
EXAMPLE_A_STAR = 0.1009

KCORE_DEGREES = {2: 0.2, 3: 0.3, 4: 0.3, 5: 0.2}
KCORE_K = 2


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)

    def line(self) -> str:
        shown = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.key} {self.title}: {shown}"

    def to_json(self) -> dict:
        return {"key": self.key, "title": self.title, "passed": self.passed, "measured": self.measured}


def _short(v):
    return f"{v:.6g}" if isinstance(v, float) else v


def _scaled(count: int, scale: float, floor: int = 2) -> int:
    return max(floor, int(round(count * scale)))


def check_engine_equivalence(instances: int = 1000, seeds_per: int = 3, root_seed: int = 0,
                             rule: str = DEFAULT_RULE) -> CheckResult:
    """Round-based and continuous engines reach the same final set on random small graphs."""
    laws = [EXAMPLE, preset_kcore(KCORE_DEGREES, KCORE_K)]
    mismatches = 0
    for i in range(instances):
        s = mix(root_seed, i)
        n = int(as_generator(mix(s, 0)).integers(10, 201))
        seq = realize_sampled(laws[i % 2], n, mix(s, 1))
        for j in range(seeds_per):
            sj = mix(s, 2 + j)
            mg = build_multigraph(seq, mix(sj, 1))
            _, cont = run_continuous(mg, seq.thresholds, mix(sj, 2), snapshot_grid=0, rule=rule)
            disc = run_discrete(mg, seq.thresholds, rule)
            mismatches += int(not np.array_equal(cont.final_active, disc.final_active))
    return CheckResult("C1", "engine equivalence", mismatches == 0,
                       {"runs": instances * seeds_per, "mismatches": mismatches})


def check_death_process(n_balls: int = 100_000, reps: int = 100, root_seed: int = 0,
                        tol: float = 0.02, min_pass_fraction: float = 0.99) -> CheckResult:
    devs = np.array([death_process_reference(n_balls, mix(root_seed, r)) for r in range(reps)])
    ok = int((devs < tol).sum())
    return CheckResult("C2", "death process law", ok >= math.ceil(min_pass_fraction * reps),
                       {"reps": reps, "within_tol": ok, "max_sup_dev": float(devs.max())})


def check_stopping_time(n: int = 100_000, trials: int = 200, root_seed: int = 0, workers: int = 1,
                        tol: float = 0.03, rule: str = DEFAULT_RULE):
    """Returns (result, records)."""
    z = theory.find_zhat(EXAMPLE, rule=rule).z_hat
    recs = mc.run_trials(EXAMPLE, n, trials, root_seed, math.inf, workers, rule)
    conc = mc.tau_concentration(EXAMPLE, n, trials, root_seed, tol, workers, rule, records=recs)
    passed = abs(z - EXAMPLE_ZHAT) <= 1e-9 and bool(conc.passed)
    return CheckResult("C3", "stopping time", passed, {
        "z_hat": z, "z_hat_error": abs(z - EXAMPLE_ZHAT), "t_star": conc.theory_t_star,
        "mean_tau": conc.mean_tau, "sd_tau": conc.sd_tau, "trials": trials,
    }), recs


def check_final_size(n: int = 10_000, trials: int = 500, root_seed: int = 0, workers: int = 1,
                     tol: float = 0.005, rule: str = DEFAULT_RULE):
    """Returns (result, records)."""
    recs = mc.run_trials(EXAMPLE, n, trials, root_seed, None, workers, rule)
    mean = float(np.mean([r.final_size / r.n for r in recs]))
    a_star = theory.solve(EXAMPLE, rule=rule).a_hat_star
    return CheckResult("C4", "final size LLN", abs(mean - EXAMPLE_A_STAR) < tol, {
        "mean_final_fraction": mean, "a_hat_star": a_star, "reference": EXAMPLE_A_STAR,
        "trials": trials,
    }), recs


def check_clt(n: int = 100_000, trials: int = 1000, root_seed: int = 0, workers: int = 1,
              rule: str = DEFAULT_RULE, sigma2=None):
    """Returns (result, records). ``sigma2`` overrides the theory variance."""
    sol = theory.solve(EXAMPLE, rule=rule)
    s2 = sol.sigma2_star if sigma2 is None else float(sigma2)
    recs = mc.run_trials(EXAMPLE, n, trials, root_seed, sol.t_star + 1.0, workers, rule)
    st = mc.summarize([r.xi for r in recs], 0.0, math.sqrt(s2) if s2 > 0 else None)
    ratio = st.variance / s2 if s2 > 0 else math.inf
    passed = (
        st.skewness is not None and abs(st.skewness) < 0.25
        and abs(st.excess_kurtosis) < 0.6
        and 0.80 <= ratio <= 1.25
        and st.ks_pvalue is not None and st.ks_pvalue > 0.01
    )
    return CheckResult("C5", "CLT for the active count", bool(passed), {
        "trials": trials, "sigma2_theory": s2, "var_xi": st.variance, "var_ratio": ratio,
        "skewness": st.skewness, "excess_kurtosis": st.excess_kurtosis,
        "ks_stat": st.ks_stat, "ks_pvalue": st.ks_pvalue, "mean_xi": st.mean,
    }), recs


def check_hb_trajectory(n: int = 100_000, grid: int = 50, root_seed: int = 0, tol: float = 0.02,
                        rule: str = DEFAULT_RULE) -> CheckResult:
    dev = mc.hB_empirical_check(EXAMPLE, n, root_seed, grid, rule)
    return CheckResult("C6", "H_B trajectory limit", dev < tol, {"sup_dev": dev, "grid": grid})


def check_analytic(rule: str = DEFAULT_RULE) -> CheckResult:
    cfg = theory.DEFAULT_CFG
    m = {}
    m["sigma2_at_0"] = theory.sigma2_A(EXAMPLE, 0.0, cfg, rule)
    m["delta_above_degree"] = max(
        abs(theory.delta(EXAMPLE, 3, 2, ell, t, cfg)) for ell in (4, 5, 9) for t in (0.0, 0.5, 2.0)
    )
    one = DegreeThresholdDistribution([(1, 1, 0.5), (2, 0, 0.5)])
    ts = np.linspace(0.0, 2.0, 21)
    m["delta_closed_form_err"] = max(
        abs(theory.delta(one, 1, 1, 1, float(t), cfg) - 0.5 * math.expm1(t)) for t in ts
    )
    m["a_hat_0_err"] = abs(theory.a_hat(EXAMPLE, 0.0, rule) - 0.1)
    zs = np.linspace(0.0, 1.0, 1000)
    hb = theory.h_B(EXAMPLE, zs, rule)
    m["h_B_at_0"] = float(theory.h_B(EXAMPLE, 0.0, rule))
    m["h_B_monotone"] = bool(np.all(np.diff(hb) >= 0.0))
    none = DegreeThresholdDistribution([(3, 1, 1.0)])
    sol = theory.solve(none, rule=rule)
    recs = mc.run_trials(none, 1000, 1, 0, None, 1, rule)
    m["no_seed"] = [sol.z_hat, sol.t_star, recs[0].final_size]
    passed = (
        m["sigma2_at_0"] == 0.0 and m["delta_above_degree"] == 0.0
        and m["delta_closed_form_err"] <= 1e-8 and m["a_hat_0_err"] == 0.0
        and m["h_B_at_0"] == 0.0 and m["h_B_monotone"] and m["no_seed"] == [1.0, 0.0, 0]
    )
    return CheckResult("C7", "analytic sanity", bool(passed), m)


def run_suite(scale: float = 1.0, root_seed: int = 0, workers: int = 1, rule: str = DEFAULT_RULE,
              sigma2=None, progress=None):
    """All checks in order. Trial and repetition counts are multiplied by ``scale``.

    Returns (results, records) where ``records`` maps a file stem to trial records.
    """
    say = progress or (lambda msg: None)
    results, records = [], {}
    say("C1 engine equivalence")
    results.append(check_engine_equivalence(_scaled(1000, scale, 1), 3, mix(root_seed, 1), rule))
    say("C2 death process")
    results.append(check_death_process(reps=_scaled(100, scale, 1), root_seed=mix(root_seed, 2)))
    say("C3 stopping time")
    r, recs = check_stopping_time(trials=_scaled(200, scale), root_seed=mix(root_seed, 3),
                                  workers=workers, rule=rule)
    results.append(r)
    records["tau_trials"] = recs
    say("C4 final size")
    r, recs = check_final_size(trials=_scaled(500, scale), root_seed=mix(root_seed, 4),
                               workers=workers, rule=rule)
    results.append(r)
    records["lln_trials"] = recs
    say("C5 CLT")
    r, recs = check_clt(trials=_scaled(1000, scale, 8), root_seed=mix(root_seed, 5),
                        workers=workers, rule=rule, sigma2=sigma2)
    results.append(r)
    records["clt_trials"] = recs
    say("C6 H_B trajectory")
    results.append(check_hb_trajectory(root_seed=mix(root_seed, 6), rule=rule))
    say("C7 analytic sanity")
    results.append(check_analytic(rule))
    return results, records
