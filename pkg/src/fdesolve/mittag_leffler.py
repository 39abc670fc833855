"""Real-line evaluation of the one-parameter Mittag-Leffler function.

Two regimes are used:

* the power series ``sum_k z**k / Gamma(alpha*k + 1)``, accumulated with
  :func:`math.fsum` so that the only rounding left is the one in each term;
* the algebraic asymptotic tail ``-sum_{k>=1} z**(-k) / Gamma(1 - alpha*k)``
  for negative arguments, truncated where the size of its terms bottoms out.

The series is the primary regime for ``z > -10`` and the asymptotic tail below.
When the primary regime's error estimate is not already negligible the other
one is tried too and the sharper acceptable result wins; if neither is
acceptable, :class:`MittagLefflerConvergenceError` is raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

__all__ = [
    "SWITCH_POINT",
    "MittagLefflerConvergenceError",
    "MlParams",
    "gamma",
    "ml",
    "rgamma",
]

#: Arguments at or below this value are evaluated with the asymptotic tail first.
SWITCH_POINT = -10.0
_GOOD_ENOUGH = 1e-12

_EPS = 2.0**-52


class MittagLefflerConvergenceError(ArithmeticError):
    """Neither the series nor the asymptotic regime reached the requested accuracy."""


@dataclass(frozen=True)
class MlParams:
    """Order and stopping parameters for :func:`ml`.

    ``max_rel_error`` is the largest *estimated* relative error (rounding plus
    truncation) accepted from a regime before it is declared failed. Around
    ``z = -10`` with ``alpha`` near 0.8 the series loses about nine digits to
    cancellation and the asymptotic tail is not yet sharp, so values there are
    only good to roughly 1e-6.
    """

    alpha: float
    series_tol: float = 1e-15
    max_terms: int = 500
    max_rel_error: float = 1e-5

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not self.series_tol > 0.0:
            raise ValueError(f"series_tol must be positive, got {self.series_tol!r}")
        if self.max_terms < 10:
            raise ValueError(f"max_terms must be at least 10, got {self.max_terms!r}")
        if not self.max_rel_error > 0.0:
            raise ValueError("max_rel_error must be positive")


def gamma(x: float) -> float:
    """Gamma function for positive finite ``x``."""
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise ValueError(f"gamma is only defined here for finite x > 0, got {x!r}")
    return math.gamma(x)


def rgamma(x: float) -> float:
    """Reciprocal gamma ``1/Gamma(x)`` on the whole real line (zero at the poles)."""
    if x > 0.0:
        try:
            return 1.0 / math.gamma(x)
        except OverflowError:
            return 0.0
    if x.is_integer():
        return 0.0
    # reflection: 1/Gamma(x) = sin(pi x) Gamma(1 - x) / pi
    s = math.sin(math.pi * x)
    try:
        return s * math.gamma(1.0 - x) / math.pi
    except OverflowError:
        return math.copysign(math.inf, s)


def _series_term(z: float, alpha: float, k: int) -> tuple[float, float]:
    """Return the k-th series term and a bound on its relative rounding error."""
    if k == 0:
        return 1.0, 0.0
    if z == 0.0:
        return 0.0, 0.0
    arg = alpha * k + 1.0
    try:
        if arg < 171.0:
            return z**k / math.gamma(arg), 4.0 * _EPS
    except OverflowError:
        pass
    log_pow = k * math.log(abs(z))
    log_gam = math.lgamma(arg)
    log_mag = log_pow - log_gam
    mag = math.exp(log_mag) if log_mag < 709.0 else math.inf
    # exp amplifies the absolute rounding of both logarithms
    rel = (4.0 + abs(log_pow) + abs(log_gam)) * _EPS
    return (-mag if (z < 0.0 and k % 2) else mag), rel


def _series(z: float, p: MlParams) -> tuple[float, float, bool]:
    """Return ``(value, error estimate, converged)`` for the power series."""
    terms: list[float] = []
    rounding = 0.0
    below = 0
    converged = False
    for k in range(p.max_terms):
        t, rel = _series_term(z, p.alpha, k)
        if not math.isfinite(t):
            break
        terms.append(t)
        rounding += rel * abs(t)
        below = below + 1 if abs(t) < p.series_tol else 0
        if below >= 3:
            converged = True
            break
    value = math.fsum(terms)
    # fsum is exact, so only the rounding inside each term remains
    err = rounding + abs(terms[-1])
    return value, err, converged


def _asymptotic_term(z: float, alpha: float, k: int) -> float:
    # -z**(-k) / Gamma(1 - alpha k)
    try:
        return -(z ** (-k)) * rgamma(1.0 - alpha * k)
    except (OverflowError, ZeroDivisionError):
        pass
    w = alpha * k
    if w.is_integer():
        return 0.0
    # 1/Gamma(1 - w) = Gamma(w) sin(pi w) / pi
    s = math.sin(math.pi * w) / math.pi
    log_mag = -k * math.log(abs(z)) + math.lgamma(w)
    mag = math.exp(log_mag) if log_mag < 709.0 else math.inf
    sign = -1.0 if (z < 0.0 and k % 2) else 1.0
    return -sign * s * mag


def _asymptotic(z: float, p: MlParams) -> tuple[float, float, bool]:
    """Return ``(value, error estimate, ok)`` for the algebraic tail (``z < 0``).

    Terms carry the factor ``sin(pi alpha k)``, which makes single terms
    spuriously small near the poles of ``Gamma(1 - alpha k)``. Truncation point
    and error estimate therefore use the envelope ``|z|**-k Gamma(alpha k) / pi``.
    """
    log_z = math.log(abs(z))
    terms: list[float] = []
    best = math.inf
    k_best = 0
    running = 0.0
    for k in range(1, p.max_terms + 1):
        log_env = -k * log_z + math.lgamma(p.alpha * k) - math.log(math.pi)
        if log_env < best:
            best, k_best = log_env, k
        elif log_env > best + 5.0:
            break
        envelope = math.exp(log_env)
        if running != 0.0 and envelope < 1e-3 * _EPS * abs(running):
            k_best, best = k, log_env
            break
        t = _asymptotic_term(z, p.alpha, k)
        if not math.isfinite(t):
            break
        terms.append(t)
        running += t
    kept = terms[: k_best - 1]
    if not kept:
        return math.nan, math.inf, False
    value = math.fsum(kept)
    # observed truncation errors stay within a few envelopes; keep a margin
    err = 10.0 * math.exp(best) + 2.0 * _EPS * math.fsum(abs(t) for t in kept)
    return value, err, True


def _acceptable(value: float, err: float, ok: bool, p: MlParams) -> bool:
    return ok and math.isfinite(value) and err <= max(p.series_tol, p.max_rel_error * abs(value))


def ml(z: float, params: MlParams) -> float:
    """Evaluate ``E_alpha(z)`` for real ``z``.

    Raises :class:`MittagLefflerConvergenceError` instead of returning an
    inaccurate value.
    """
    z = float(z)
    if not math.isfinite(z):
        raise ValueError(f"z must be finite, got {z!r}")
    regimes = [_asymptotic, _series] if z <= SWITCH_POINT else [_series]
    if SWITCH_POINT < z < 0.0:
        regimes.append(_asymptotic)

    report = []
    best: Optional[tuple[float, float]] = None
    for regime in regimes:
        value, err, ok = regime(z, params)
        if _acceptable(value, err, ok, params):
            if err <= _GOOD_ENOUGH * abs(value):
                return value
            # near the switch point the other regime is often the sharper one
            if best is None or err < best[1]:
                best = (value, err)
        report.append(f"{regime.__name__.lstrip('_')}: value={value!r} err~{err:.3g} ok={ok}")
    if best is not None:
        return best[0]
    raise MittagLefflerConvergenceError(
        f"E_{params.alpha}({z}) not resolved to rel {params.max_rel_error:g}; " + "; ".join(report)
    )
