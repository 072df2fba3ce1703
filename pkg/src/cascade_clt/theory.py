"""Large-n limits of the exploration: stopping time, active fraction, CLT variance.

Every function takes either a :class:`~cascade_clt.dist.DegreeThresholdDistribution`
(limit law p) or :class:`~cascade_clt.dist.EmpiricalCounts` (the finite-n
weights u_n / n), and an activation ``rule`` (see :mod:`cascade_clt.rules`).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .dist import EmpiricalCounts, mean_degree
from .quadrature import QuadratureConfig, QuadratureError, adaptive_simpson
from .rules import DEFAULT_RULE, check_rule, cutoff

DEFAULT_CFG = QuadratureConfig()
T_MAX = 20.0


class TangentRootWarning(UserWarning):
    pass


def _check_z(z):
    if np.ndim(z) == 0:
        if not 0.0 <= z <= 1.0:
            raise ValueError(f"z must lie in [0, 1], got {z!r}")
        return
    zz = np.asarray(z, dtype=np.float64)
    if np.any(~((zz >= 0.0) & (zz <= 1.0))):
        raise ValueError(f"z must lie in [0, 1], got {z!r}")


def _pmf(d: int, z: float, ell: int) -> float:
    if ell < 0 or ell > d:
        return 0.0
    return math.comb(d, ell) * z**ell * (1.0 - z) ** (d - ell)


def _tail(d: int, z: float, ell: int) -> float:
    if ell <= 0:
        return 1.0
    if ell > d:
        return 0.0
    if ell > d * z:
        return min(math.fsum(_pmf(d, z, r) for r in range(ell, d + 1)), 1.0)
    return max(1.0 - math.fsum(_pmf(d, z, r) for r in range(ell)), 0.0)


def binom_pmf(d: int, z, ell: int):
    """P(Bin(d, z) = ell); vectorised over ``z``."""
    _check_z(z)
    if np.ndim(z) == 0:
        return _pmf(d, float(z), ell)
    zz = np.asarray(z, dtype=np.float64)
    if ell < 0 or ell > d:
        return np.zeros_like(zz)
    return math.comb(d, ell) * zz**ell * (1.0 - zz) ** (d - ell)


def binom_tail(d: int, z, ell: int):
    """P(Bin(d, z) >= ell), summing whichever tail is the small one."""
    _check_z(z)
    if np.ndim(z) == 0:
        return _tail(d, float(z), ell)
    zz = np.asarray(z, dtype=np.float64)
    if ell <= 0:
        return np.ones_like(zz)
    if ell > d:
        return np.zeros_like(zz)
    upper = sum(binom_pmf(d, zz, r) for r in range(ell, d + 1))
    lower = sum(binom_pmf(d, zz, r) for r in range(ell))
    return np.clip(np.where(ell > d * zz, upper, 1.0 - lower), 0.0, 1.0)


def _weights(dist):
    atoms = dist.fractions() if isinstance(dist, EmpiricalCounts) else dist.atoms
    return [(a.d, a.theta, a.p) for a in atoms]


def _inactive_weights(dist, rule):
    """(d, theta, p, cutoff) for every non-seed class."""
    check_rule(rule)
    return [(d, th, p, cutoff(d, th, rule)) for d, th, p in _weights(dist) if th >= 1]


def h_B(dist, z, rule: str = DEFAULT_RULE):
    """Limit of (white balls in inactive bins) / n when each ball survives with probability z."""
    _check_z(z)
    zz = np.asarray(z, dtype=np.float64)
    total = np.zeros_like(zz)
    for d, _th, p, c in _inactive_weights(dist, rule):
        for ell in range(max(c, 1), d + 1):
            total = total + p * ell * binom_pmf(d, zz, ell)
    return total if np.ndim(z) else float(total)


def phi(dist, z, rule: str = DEFAULT_RULE):
    """lambda z^2 - h_B(z); its largest zero in [0, 1] fixes the stopping time."""
    zz = np.asarray(z, dtype=np.float64)
    out = mean_degree(dist) * zz**2 - h_B(dist, zz, rule)
    return out if np.ndim(z) else float(out)


@dataclass(frozen=True)
class ZHat:
    z_hat: float
    tangency: bool
    bracket: tuple[float, float]


def _bisect(f, lo: float, hi: float, tol: float) -> float:
    flo = f(lo)
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_zhat(dist, cfg: QuadratureConfig = DEFAULT_CFG, rule: str = DEFAULT_RULE) -> ZHat:
    """Largest zero of phi on [0, 1] by a downward grid scan.

    A zero is accepted at the first grid point where phi changes sign
    (refined by bisection), where |phi| <= root_tol, or where a positive
    local minimum of phi between grid points refines to |phi| <= root_tol.
    A zero without a sign change is flagged as a tangency: the CLT does not
    cover that case. Zero is always a fallback root.
    """
    f = lambda z: phi(dist, z, rule)  # noqa: E731
    steps = int(math.ceil(1.0 / cfg.scan_step - 1e-9))
    z = np.clip(1.0 - np.arange(steps + 1) * cfg.scan_step, 0.0, 1.0)
    z[-1] = 0.0
    vals = f(z)
    tol = cfg.root_tol
    if abs(vals[0]) <= tol:
        return ZHat(1.0, False, (1.0, 1.0))
    for k in range(1, steps + 1):
        if abs(vals[k]) <= tol:
            if k == steps:
                return ZHat(0.0, False, (0.0, 0.0))
            tangent = (vals[k - 1] > 0) == (vals[k + 1] > 0) and abs(vals[k + 1]) > tol
            if tangent:
                warnings.warn(f"phi touches zero without crossing at z={z[k]:.6g}", TangentRootWarning)
            return ZHat(float(z[k]), bool(tangent), (float(z[k]), float(z[k])))
        if (vals[k - 1] > 0) != (vals[k] > 0):
            root = _bisect(f, float(z[k]), float(z[k - 1]), tol)
            return ZHat(root, False, (float(z[k]), float(z[k - 1])))
        if k >= 2 and 0 < vals[k - 1] < vals[k - 2] and vals[k - 1] <= vals[k]:
            lo, hi = float(z[k]), float(z[k - 2])
            res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": tol})
            if res.fun <= tol:
                warnings.warn(f"phi touches zero without crossing at z={res.x:.6g}", TangentRootWarning)
                return ZHat(float(res.x), True, (lo, hi))
    return ZHat(0.0, False, (0.0, 0.0))


def a_hat(dist, t: float, rule: str = DEFAULT_RULE) -> float:
    """Limit active fraction at time t: one minus the mass of bins still holding >= cutoff live balls."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    z = math.exp(-t)
    # seeds plus the converted part of every other class; exact at t = 0
    seeds = math.fsum(p for _d, th, p in _weights(dist) if th == 0)
    converted = math.fsum(p * (1.0 - _tail(d, z, c)) for d, _th, p, c in _inactive_weights(dist, rule))
    return float(min(max(seeds + converted, 0.0), 1.0))


def a_hat_printed(dist, t: float) -> float:
    """Alternative form 1 - sum_{theta <= d} p beta(d, 1 - e^{-t}, theta); diagnostics only."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    y = 1.0 - math.exp(-t)
    return 1.0 - sum(p * binom_tail(d, y, th) for d, th, p in _weights(dist) if th <= d)


def _delta(p: float, d: int, ell: int, t: float, cfg: QuadratureConfig,
           tol: float | None = None) -> tuple[float, float]:
    """(Delta, error bound); ``tol`` is the absolute target for Delta itself."""
    if ell > d or t == 0.0 or p == 0.0:
        return 0.0, 0.0
    two_l = 2 * ell
    tol = cfg.abs_tol if tol is None else tol
    integral, err = adaptive_simpson(
        lambda s: math.exp(two_l * s) * _tail(d, math.exp(-s), ell),
        0.0, t, tol / (p * two_l), cfg.max_depth,
    )
    value = p * (1.0 - math.exp(two_l * t) * _tail(d, math.exp(-t), ell) + two_l * integral)
    return value, p * two_l * err


def delta(dist, d: int, theta: int, ell: int, t: float, cfg: QuadratureConfig = DEFAULT_CFG) -> float:
    """Quadratic-variation limit of the class (d, theta) martingale at level ``ell``.

    Zero for ell > d: no bin of degree d ever holds more than d balls.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    p = sum(w for dd, th, w in _weights(dist) if dd == d and th == theta)
    return _delta(p, d, ell, t, cfg)[0]


def _class_variance(p, d, ell0, t, cfg):
    """e^{-2 l0 t} Var(hat B_{d,theta,l0}(t)) from the martingale decomposition.

    The level-l0 count is M_l0 plus kernel integrals of the independent
    higher-level martingales M_r; the variance of each integral is the double
    integral of k(s) k(s') Delta_r(min(s, s')), which reduces to one
    integral because int_s^t (e^{-u} - e^{-t})^j e^{-u} du has a closed form.
    """
    if ell0 <= 0 or ell0 > d or t == 0.0:
        return 0.0, 0.0
    # tolerances target the rescaled result, so they grow with the prefactor
    unscale = math.exp(2 * ell0 * t)
    value, err = _delta(p, d, ell0, t, cfg, cfg.abs_tol * unscale)
    et = math.exp(-t)
    for r in range(ell0 + 1, d + 1):
        j = r - ell0 - 1
        coef = (ell0 * math.comb(r - 1, ell0)) ** 2 * 2.0 / (j + 1)
        inner_err = [0.0]
        inner_tol = cfg.abs_tol * unscale / (coef * max(t, 1.0))

        def integrand(s, r=r, j=j):
            dv, de = _delta(p, d, r, s, cfg, inner_tol)
            inner_err[0] = max(inner_err[0], de)
            return (math.exp(-s) - et) ** (2 * j + 1) * math.exp(-s) * dv

        v, e = adaptive_simpson(integrand, 0.0, t, cfg.abs_tol * unscale / coef, cfg.max_depth)
        value += coef * v
        err += coef * (e + t * inner_err[0])
    return value / unscale, err / unscale


def _sigma2(dist, t, cfg, rule):
    total, err = 0.0, 0.0
    for d, _th, p, c in _inactive_weights(dist, rule):
        v, e = _class_variance(p, d, c, t, cfg)
        total += v
        err += e
    return total, err


def sigma2_A(dist, t: float, cfg: QuadratureConfig = DEFAULT_CFG, rule: str = DEFAULT_RULE) -> float:
    """Variance of the Gaussian limit of n^{-1/2}(A_n(t) - n a_hat(t))."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return _sigma2(dist, t, cfg, rule)[0]


def sigma2_A_printed(dist, t: float, cfg: QuadratureConfig = DEFAULT_CFG) -> float:
    """Literal variance expression linear in Delta, kept for comparison (strict rule only).

    Does not match simulated variances; see the README.
    """
    total = 0.0
    et = math.exp(-t)
    for d, th, p in _weights(dist):
        if th < 1 or th > d:
            continue
        base = d - th
        total += _delta(p, d, base, t, cfg)[0]
        for ell in range(base + 1, d + 1):
            j = ell - base - 1
            v, _ = adaptive_simpson(
                lambda s, ell=ell, j=j: (math.exp(-s) - et) ** j * math.exp(-s) * _delta(p, d, ell, s, cfg)[0],
                0.0, t, cfg.abs_tol, cfg.max_depth,
            )
            total += base * math.comb(ell - 1, base) * v
    return total


@dataclass
class TheoryResult:
    lam: float
    z_hat: float
    t_star: float
    a_hat_star: float
    sigma2_star: float
    rule: str
    tangency: bool
    clt_supported: bool
    eval_time: float
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out


def solve(dist, cfg: QuadratureConfig = DEFAULT_CFG, rule: str = DEFAULT_RULE,
          t_max: float = T_MAX) -> TheoryResult:
    """Assemble lambda, z_hat, t* = -ln z_hat, a_hat(t*) and sigma2_A(t*).

    When z_hat = 0 the stopping time diverges and both limits are evaluated
    at ``t_max`` instead.
    """
    lam = mean_degree(dist)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TangentRootWarning)
        zr = find_zhat(dist, cfg, rule)
    for w in caught:
        warnings.warn(w.message, w.category)
    if zr.z_hat == 0.0:
        t_star = math.inf
    elif zr.z_hat == 1.0:
        t_star = 0.0
    else:
        t_star = -math.log(zr.z_hat)
    t_eval = t_star if math.isfinite(t_star) else t_max
    s2, s2_err = _sigma2(dist, t_eval, cfg, rule)
    diagnostics = {
        "root_bracket": list(zr.bracket),
        "phi_at_root": phi(dist, zr.z_hat, rule),
        "sigma2_quad_error": s2_err,
        "a_hat_printed_form": a_hat_printed(dist, t_eval),
        "horizon_used": not math.isfinite(t_star),
    }
    if rule == "strict":
        try:
            diagnostics["sigma2_printed_form"] = sigma2_A_printed(dist, t_eval, cfg)
        except QuadratureError as exc:
            diagnostics["sigma2_printed_form"] = None
            diagnostics["sigma2_printed_form_error"] = str(exc)
    return TheoryResult(
        lam=lam,
        z_hat=zr.z_hat,
        t_star=t_star,
        a_hat_star=a_hat(dist, t_eval, rule),
        sigma2_star=max(s2, 0.0) if s2 > -1e-12 else s2,
        rule=rule,
        tangency=zr.tangency,
        clt_supported=not zr.tangency,
        eval_time=t_eval,
        diagnostics=diagnostics,
    )
