"""Aggregation procedures over a finite class of rules.

Each procedure maps empirical risks (or, for CAEW, the ordered sample) to
a weight vector on the simplex; :func:`aggregate_rule` forms the convex
combination.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .distributions import LabeledSample, Rule
from .losses import Loss, empirical_risks

SIMPLEX_TOL = 1e-12
TIE_RTOL = 1e-12


class Procedure(str, enum.Enum):
    ERM = "ERM"
    AERM = "AERM"
    AEW = "AEW"
    CAEW = "CAEW"

    @classmethod
    def parse(cls, name: str) -> Procedure:
        try:
            return cls(name.upper())
        except ValueError:
            choices = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown procedure {name!r}; expected one of {choices}") from None


@dataclass(frozen=True, eq=False)
class FunctionClass:
    """An ordered family of ``M >= 2`` rules on a common support.

    Stored as an ``(M, n_atoms)`` value matrix.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2:
            raise ValueError("class values must be an (M, n_atoms) matrix")
        if arr.shape[0] < 2:
            raise ValueError(f"a class needs M >= 2 rules, got {arr.shape[0]}")
        if arr.shape[1] < 1:
            raise ValueError("rules need at least one atom")
        if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > 1.0):
            raise ValueError("rule values must lie in [-1, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_rules(cls, rules) -> FunctionClass:
        rows = [r.values if isinstance(r, Rule) else np.asarray(r, dtype=float) for r in rules]
        if len({row.size for row in rows}) > 1:
            raise ValueError("rules in a class must share a common support")
        return cls(np.vstack(rows))

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.M

    def __getitem__(self, j: int) -> Rule:
        return Rule(self.values[j])

    @property
    def rules(self) -> list[Rule]:
        return [Rule(row) for row in self.values]


def check_simplex(w, tol: float = SIMPLEX_TOL) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if np.any(w < 0.0) or abs(w.sum() - 1.0) > tol:
        raise ValueError(f"not a simplex vector: min={w.min()!r}, sum={w.sum()!r}")
    return w


def _as_risks(risks) -> np.ndarray:
    r = np.asarray(risks, dtype=float).reshape(-1)
    if r.size < 2:
        raise ValueError(f"aggregation needs M >= 2 risks, got {r.size}")
    if not np.all(np.isfinite(r)):
        raise ValueError("risks must be finite")
    return r


def minimizers(risks) -> np.ndarray:
    """Boolean mask of the empirical minimizers, ties within ``TIE_RTOL``."""
    r = _as_risks(risks)
    m = r.min()
    return r - m <= TIE_RTOL * max(abs(m), 1.0)


def erm_weights(risks) -> np.ndarray:
    """One-hot on the first minimizer."""
    mask = minimizers(risks)
    w = np.zeros(mask.size)
    w[int(np.argmax(mask))] = 1.0
    return w


def aerm_weights(risks) -> np.ndarray:
    """Uniform over all minimizers."""
    mask = minimizers(risks)
    return mask / mask.sum()


def entropy_minimizer(risks, epsilon: float) -> np.ndarray:
    """Minimizer over the simplex of ``<lambda, risks> + epsilon * sum lambda log lambda``.

    The closed form is the Gibbs vector ``exp(-risks/epsilon)`` normalised.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon!r}")
    r = _as_risks(risks)
    z = np.exp(-(r - r.min()) / epsilon)
    return z / z.sum()


def aew_weights(risks, n: int) -> np.ndarray:
    """Exponential weights ``exp(-n A_n(f_j))`` normalised."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    return entropy_minimizer(risks, 1.0 / n)


def caew_weights(loss: Loss, cls: FunctionClass, sample: LabeledSample) -> np.ndarray:
    """Cumulative exponential weights: AEW weights averaged over sample prefixes.

    The prefix order is the order of ``sample``.  Running loss sums give
    ``k A_k(f_j)`` for every prefix in a single pass.
    """
    if sample.n < 1:
        raise ValueError("CAEW needs at least one observation")
    losses = empirical_losses(loss, cls, sample)
    running = np.cumsum(losses, axis=1)
    z = np.exp(-(running - running.min(axis=0)))
    w = (z / z.sum(axis=0)).mean(axis=1)
    return w / w.sum()


def empirical_losses(loss: Loss, cls: FunctionClass, sample: LabeledSample) -> np.ndarray:
    """``(M, n)`` matrix of ``loss(Y_i f_j(X_i))``."""
    if sample.n and sample.atoms.max() >= cls.n_atoms:
        raise ValueError("sample contains atoms outside the class support")
    return loss(cls.values[:, sample.atoms] * sample.labels)


def compute_weights(
    procedure: Procedure | str, loss: Loss, cls: FunctionClass, sample: LabeledSample
) -> np.ndarray:
    procedure = Procedure.parse(procedure) if isinstance(procedure, str) else procedure
    if procedure is Procedure.CAEW:
        return caew_weights(loss, cls, sample)
    risks = empirical_risks(loss, cls.values, sample)
    if procedure is Procedure.ERM:
        return erm_weights(risks)
    if procedure is Procedure.AERM:
        return aerm_weights(risks)
    return aew_weights(risks, sample.n)


def aggregate_rule(weights, cls: FunctionClass) -> Rule:
    """Pointwise convex combination ``sum_j w_j f_j``."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size != cls.M:
        raise ValueError(f"{w.size} weights for a class of {cls.M} rules")
    # roundoff can push a convex combination of +-1 values a ulp outside [-1, 1]
    return Rule(np.clip(w @ cls.values, -1.0, 1.0))
