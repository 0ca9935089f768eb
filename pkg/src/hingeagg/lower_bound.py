"""Hypercube family of distributions used for the minimax lower bound.

Atoms ``0..N-2`` carry mass ``w`` and ``eta = (1 + sigma_j h)/2``; the last
atom carries the remaining mass with ``eta = 1``.  Sign vectors are
enumerated lexicographically with -1 before +1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .aggregates import FunctionClass
from .distributions import FiniteDistribution, hellinger_sq_product, sign
from .errors import ParameterError

#: ceiling on the Hamming-1 product Hellinger distance, 2(1 - 1/e)
HELLINGER_CEILING = 2.0 * (1.0 - math.exp(-1.0))


def atom_count(M: int) -> int:
    """``ceil(log M / log 2)``, computed exactly for powers of two."""
    return int(M - 1).bit_length()


@dataclass(frozen=True)
class CubeParams:
    n: int
    M: int
    kappa: float
    N: int
    h: float
    w: float

    def violations(self) -> list[str]:
        out = []
        if self.M < 3:
            out.append(f"M >= 3 (got M={self.M})")
        if self.kappa < 1:
            out.append(f"kappa >= 1 (got {self.kappa})")
        if not 0.0 < self.h < 1.0:
            out.append(f"0 < h < 1 (got h={self.h!r})")
        if not 0.0 < self.w < 1.0:
            out.append(f"0 < w < 1 (got w={self.w!r})")
        if 2 ** (self.N - 1) > self.M:
            out.append(f"2^(N-1) <= M (got N={self.N}, M={self.M})")
        if 2.0 * math.log2(self.M) > self.n:
            out.append(f"2 log2 M <= n (got {2.0 * math.log2(self.M):.6g} > {self.n})")
        if (self.N - 1) * self.w > 1.0:
            out.append(f"(N-1) w <= 1 (got {(self.N - 1) * self.w!r})")
        if self.kappa > 1 and 0.0 < self.h < 1.0:
            cap = self.h ** (1.0 / (self.kappa - 1.0))
            # relative slack: the parameter formulas make this tight up to rounding
            if (self.N - 1) * self.w > cap * (1.0 + 1e-12):
                out.append(
                    f"(N-1) w <= h^(1/(kappa-1)) (got {(self.N - 1) * self.w!r} > {cap!r})"
                )
        if 0.0 <= self.h <= 1.0 and self.w * (1.0 - math.sqrt(1.0 - self.h**2)) > (1.0 / self.n) * (
            1.0 + 1e-12
        ):
            out.append("w (1 - sqrt(1 - h^2)) <= 1/n")
        return out

    def validate(self) -> CubeParams:
        bad = self.violations()
        if bad:
            raise ParameterError(bad)
        return self

    @property
    def hamming1_hellinger_sq(self) -> float:
        """Squared Hellinger distance between two cube laws differing in one sign."""
        return 2.0 * self.w * (1.0 - math.sqrt(1.0 - self.h**2))


def choose_params(n: int, M: int, kappa: float) -> CubeParams:
    """Parameter choice of the lower-bound construction.

    ``kappa == 1``: ``h = 1/2``, ``w = 4/n``.  Otherwise
    ``h = (N/n)^((kappa-1)/(2kappa-1))`` and ``w = 1/(n h^2)``.
    Raises :class:`ParameterError` naming every violated constraint.
    """
    pre = []
    if M < 3:
        pre.append(f"M >= 3 (got M={M})")
    if kappa < 1:
        pre.append(f"kappa >= 1 (got {kappa})")
    if n < 1 or (M >= 2 and 2.0 * math.log2(M) > n):
        pre.append(f"2 log2 M <= n (got {2.0 * math.log2(max(M, 1)):.6g} > {n})")
    if pre:
        raise ParameterError(pre)
    N = atom_count(M)
    if kappa == 1:
        h, w = 0.5, 4.0 / n
    else:
        h = (N / n) ** ((kappa - 1.0) / (2.0 * kappa - 1.0))
        w = 1.0 / (n * h * h)
    return CubeParams(n=n, M=M, kappa=float(kappa), N=N, h=h, w=w).validate()


def sign_vectors(N: int):
    """All of ``{-1, +1}^(N-1)`` in lexicographic order, -1 first."""
    return [np.array(s, dtype=float) for s in itertools.product((-1.0, 1.0), repeat=N - 1)]


def cube_distribution(params: CubeParams, sigma) -> FiniteDistribution:
    sigma = np.asarray(sigma, dtype=float).reshape(-1)
    if sigma.size != params.N - 1 or np.any(np.abs(sigma) != 1.0):
        raise ValueError(f"sigma must be a +-1 vector of length N-1 = {params.N - 1}")
    masses = np.append(np.full(params.N - 1, params.w), 1.0 - (params.N - 1) * params.w)
    etas = np.append((1.0 + sigma * params.h) / 2.0, 1.0)
    return FiniteDistribution(masses, etas)


def sigma_rule_values(sigma) -> np.ndarray:
    """Values of ``sign(2 eta_sigma - 1)``: ``sigma`` on the cube atoms, +1 on the last."""
    return np.append(sign(np.asarray(sigma, dtype=float)), 1.0)


def hypercube_class(params: CubeParams, M: int | None = None) -> FunctionClass:
    """Bayes rules of every cube law, padded to ``M`` rules with copies of the first."""
    M = params.M if M is None else M
    rules = [sigma_rule_values(s) for s in sign_vectors(params.N)]
    if len(rules) > M:
        raise ValueError(f"2^(N-1) = {len(rules)} rules do not fit in a class of M = {M}")
    rules += [rules[0]] * (M - len(rules))
    return FunctionClass(np.vstack(rules))


def pairwise_hellinger_ok(params: CubeParams) -> bool:
    """True iff the ``n``-fold Hamming-1 Hellinger distance stays below ``2(1 - 1/e)``."""
    h2n = hellinger_sq_product(params.hamming1_hellinger_sq, params.n)
    return h2n <= HELLINGER_CEILING + 1e-12
