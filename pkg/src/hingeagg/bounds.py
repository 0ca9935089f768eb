"""Closed-form rate and constant curves for the upper and lower bounds.

All logarithms are natural except the atom count of the cube
construction, which is ``ceil(log M / log 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aggregates import Procedure
from .errors import NumericError


@dataclass(frozen=True)
class BoundSpec:
    """Inputs of the oracle bound: margin parameter, class size, hinge margin
    constant ``c`` and oracle excess ``delta``."""

    kappa: float
    M: int
    c: float
    delta: float = 0.0
    procedure: Procedure = Procedure.AEW

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError(f"kappa must be >= 1, got {self.kappa!r}")
        if self.M < 2:
            raise ValueError(f"M must be >= 2, got {self.M!r}")
        if not self.c > 0:
            raise ValueError(f"c must be > 0, got {self.c!r}")
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta!r}")


def rate_exponent(kappa: float) -> float:
    """``kappa / (2 kappa - 1)``, in ``(1/2, 1]``."""
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa!r}")
    return kappa / (2.0 * kappa - 1.0)


def fast_rate(n: int, M: int, kappa: float) -> float:
    return (math.log(M) / n) ** rate_exponent(kappa)


def remainder_value(n: int, M: int, kappa: float, delta: float) -> float:
    """``sqrt(delta^(1/kappa) log M / n) + (log M / n)^(kappa/(2kappa-1))``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta!r}")
    return math.sqrt(delta ** (1.0 / kappa) * math.log(M) / n) + fast_rate(n, M, kappa)


def remainder(n: int, spec: BoundSpec) -> float:
    return remainder_value(n, spec.M, spec.kappa, spec.delta)


def theorem1_constant(kappa: float, c: float, procedure: Procedure | str = Procedure.AEW) -> float:
    """Upper-bound constant ``32 max(6, 537c, 16(2c + 1/3))``.

    CAEW carries the extra factor ``max(2, (2kappa-1)/(kappa-1))`` and is
    only defined here for ``kappa > 1``; see :func:`theorem1_caew_kappa1`.
    """
    procedure = Procedure.parse(procedure) if isinstance(procedure, str) else procedure
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa!r}")
    if not c > 0:
        raise ValueError(f"c must be > 0, got {c!r}")
    C = 32.0 * max(6.0, 537.0 * c, 16.0 * (2.0 * c + 1.0 / 3.0))
    if procedure is Procedure.CAEW:
        if kappa == 1:
            raise ValueError("CAEW at kappa = 1 has a log n residual; use theorem1_caew_kappa1")
        C *= max(2.0, (2.0 * kappa - 1.0) / (kappa - 1.0))
    return C


def theorem1_caew_kappa1(n: int, M: int, c: float, delta: float = 0.0) -> float:
    """Residual of the CAEW bound at ``kappa = 1``:
    ``2C (sqrt(delta log M / n) + log M log n / n)``."""
    C = theorem1_constant(1.0, c, Procedure.AEW)
    return 2.0 * C * (math.sqrt(delta * math.log(M) / n) + math.log(M) * math.log(n) / n)


def theorem1_bound(n: int, spec: BoundSpec) -> float:
    """Right-hand side ``delta + C * remainder`` of the oracle inequality."""
    if spec.procedure is Procedure.CAEW and spec.kappa == 1:
        return spec.delta + theorem1_caew_kappa1(n, spec.M, spec.c, spec.delta)
    return spec.delta + theorem1_constant(spec.kappa, spec.c, spec.procedure) * remainder(n, spec)


def theorem2_constant(kappa: float, c: float) -> float:
    """Lower-bound constant ``c^kappa (4e)^-1 2^(-2kappa(kappa-1)/(2kappa-1)) (log 2)^(-kappa/(2kappa-1))``."""
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa!r}")
    if not c > 0:
        raise ValueError(f"c must be > 0, got {c!r}")
    q = rate_exponent(kappa)
    return (
        c**kappa
        / (4.0 * math.e)
        * 2.0 ** (-2.0 * kappa * (kappa - 1.0) / (2.0 * kappa - 1.0))
        * math.log(2.0) ** (-q)
    )


def theorem2_bound(n: int, spec: BoundSpec) -> float:
    return spec.delta + theorem2_constant(spec.kappa, spec.c) * remainder(n, spec)


def mu_of_M(M: int, tol: float = 1e-12, max_iter: int = 100) -> float:
    """Positive root of ``mu = 3M exp(-mu)`` by Newton's method from ``log(3M)``.

    ``g(mu) = mu e^mu - 3M`` is increasing and convex on ``mu > 0`` and the
    starting point lies right of the root, so the iterates decrease
    monotonically onto it.
    """
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M!r}")
    target = 3.0 * M
    mu = math.log(target)
    for _ in range(max_iter):
        e = math.exp(mu)
        g = mu * e - target
        if abs(g) <= tol * target:
            return mu
        step = g / (e * (1.0 + mu))
        mu -= step
        if abs(step) <= 4 * np.finfo(float).eps * mu:
            return mu
    raise NumericError(f"Newton iteration for mu({M}) did not converge in {max_iter} steps")


def regime(n: int, M: int, kappa: float, delta: float, a: float = 0.1) -> str:
    """Classify ``delta`` as 'fast', 'intermediate' or 'slow'.

    'fast' when ``delta <= (log M/n)^(kappa/(2kappa-1))``, otherwise 'slow'
    once ``delta >= a``.
    """
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta!r}")
    if delta <= fast_rate(n, M, kappa):
        return "fast"
    if delta >= a:
        return "slow"
    return "intermediate"


def corollary1_bound(
    n: int, M: int, kappa: float, a: float, c: float, procedure: Procedure | str = Procedure.AEW
) -> float:
    """Residual ``[C + (C^(2kappa)/a)^(1/(2kappa-1))] (log M/n)^(kappa/(2kappa-1))``.

    The bias term ``2(1+a) min_j (R(f_j) - R*)`` is left to the caller.
    """
    if not a > 0:
        raise ValueError(f"a must be > 0, got {a!r}")
    C = theorem1_constant(kappa, c, procedure)
    # (C^(2k)/a)^(1/(2k-1)) in log space; C^(2k) overflows for large kappa
    second = math.exp((2.0 * kappa * math.log(C) - math.log(a)) / (2.0 * kappa - 1.0))
    return (C + second) * fast_rate(n, M, kappa)


def sum_ratio_vs_max_ratio(a, b) -> tuple[float, float]:
    """``(sum a / sum b, max_j a_j / b_j)`` for positive ``b``; the first never exceeds the second."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(b <= 0):
        raise ValueError("b must be positive")
    return float(a.sum() / b.sum()), float(np.max(a / b))


def geometric_lower(t: float, v: float, kappa: float) -> float:
    """``t^(1/(2kappa)) v^((2kappa-1)/(2kappa))``, a lower bound for ``t + v``."""
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa!r}")
    return t ** (1.0 / (2.0 * kappa)) * v ** ((2.0 * kappa - 1.0) / (2.0 * kappa))
