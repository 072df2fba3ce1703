"""Adaptive Simpson quadrature with an absolute tolerance and a depth cap."""

from __future__ import annotations

from dataclasses import dataclass


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-9
    max_depth: int = 40
    root_tol: float = 1e-12
    scan_step: float = 1e-4

    def __post_init__(self):
        for name in ("abs_tol", "max_depth", "root_tol", "scan_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def adaptive_simpson(f, a: float, b: float, abs_tol: float = 1e-9, max_depth: int = 40):
    """Integrate ``f`` over [a, b]; returns ``(value, error_estimate)``.

    A panel is accepted when its two half-panel Simpson sums differ from the
    whole-panel sum by at most 15x its share of the tolerance; the accepted
    value carries the Richardson correction. Raises :class:`QuadratureError`
    if a panel is still unresolved at ``max_depth``.
    """
    if a == b:
        return 0.0, 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    total = 0.0
    err = 0.0
    # explicit stack: (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, whole, abs_tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, s, tol, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) * (flo + 4.0 * flm + fmid) / 6.0
        right = (hi - mid) * (fmid + 4.0 * frm + fhi) / 6.0
        delta = left + right - s
        if abs(delta) <= 15.0 * tol:
            total += left + right + delta / 15.0
            err += abs(delta) / 15.0
            continue
        if depth + 1 >= max_depth:
            raise QuadratureError(
                f"adaptive Simpson did not converge on [{lo!r}, {hi!r}] at depth {max_depth}"
            )
        stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth + 1))
        stack.append((lo, mid, flo, flm, fmid, left, 0.5 * tol, depth + 1))
    return total, err
