"""Finite-support joint laws on X x {-1, +1} and their exact risks.

A :class:`FiniteDistribution` is given by the marginal masses ``p_j`` of
atoms ``0..N-1`` and the conditional probabilities ``eta_j = P(Y=1 | X=j)``.
Because the support is finite, every risk used by the aggregation
procedures is a finite sum and is computed exactly (up to double
rounding) rather than estimated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from .errors import ConsistencyError, DomainError

#: absolute tolerance for mass normalisation and identity cross-checks
ABS_TOL = 1e-12

RuleLike = Union["Rule", np.ndarray, list, tuple]


def sign(x):
    """Sign with the convention ``sign(0) = +1``; returns floats in {-1, +1}."""
    return np.where(np.asarray(x, dtype=float) >= 0.0, 1.0, -1.0)


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Rule:
    """A function on atoms ``0..N-1`` with values in ``[-1, 1]``.

    Prediction rules are the special case with values in ``{-1, +1}``.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.size == 0:
            raise ValueError("a rule needs at least one atom")
        if not np.all(np.isfinite(arr)):
            raise ValueError("rule values must be finite")
        if np.any(np.abs(arr) > 1.0):
            raise ValueError("rule values must lie in [-1, 1]; clip them first")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    def __neg__(self) -> Rule:
        return Rule(-self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Rule):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = object.__hash__

    @property
    def is_prediction_rule(self) -> bool:
        return bool(np.all(np.abs(self.values) == 1.0))

    def __repr__(self) -> str:
        return f"Rule({self.values.tolist()!r})"


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Joint law of ``(X, Y)`` on a finite set of atoms.

    ``bayes_rule``, ``bayes_risk`` and ``optimal_hinge_risk`` are computed
    once at construction.
    """

    masses: np.ndarray
    etas: np.ndarray
    bayes_rule: Rule = field(init=False, repr=False)
    bayes_risk: float = field(init=False, repr=False)
    optimal_hinge_risk: float = field(init=False, repr=False)

    def __post_init__(self):
        masses = _frozen_array(self.masses)
        etas = _frozen_array(self.etas)
        if masses.size == 0:
            raise ValueError("a distribution needs at least one atom")
        if masses.shape != etas.shape:
            raise ValueError(
                f"masses and etas differ in length ({masses.size} != {etas.size})"
            )
        if not (np.all(np.isfinite(masses)) and np.all(np.isfinite(etas))):
            raise ValueError("masses and etas must be finite")
        if np.any(masses < 0.0):
            raise ValueError("masses must be non-negative")
        if abs(math.fsum(masses) - 1.0) > ABS_TOL:
            raise ValueError(f"masses sum to {math.fsum(masses)!r}, not 1")
        if np.any((etas < 0.0) | (etas > 1.0)):
            raise ValueError("etas must lie in [0, 1]")
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "etas", etas)

        f_star = Rule(sign(2.0 * etas - 1.0))
        r_star = float(np.dot(masses, np.minimum(etas, 1.0 - etas)))
        object.__setattr__(self, "bayes_rule", f_star)
        object.__setattr__(self, "bayes_risk", r_star)
        object.__setattr__(self, "optimal_hinge_risk", 2.0 * r_star)

    @property
    def n_atoms(self) -> int:
        return self.masses.size

    @property
    def atoms(self) -> np.ndarray:
        return np.arange(self.n_atoms)

    @property
    def margins(self) -> np.ndarray:
        """``|2 eta_j - 1|`` per atom."""
        return np.abs(2.0 * self.etas - 1.0)

    def __repr__(self) -> str:
        return (
            f"FiniteDistribution(masses={self.masses.tolist()!r}, "
            f"etas={self.etas.tolist()!r})"
        )


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """``n`` observations ``(atom_id, label)`` in draw order."""

    atoms: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        atoms = _frozen_array(self.atoms, dtype=np.int64)
        labels = _frozen_array(self.labels, dtype=np.int64)
        if atoms.shape != labels.shape:
            raise ValueError("atoms and labels differ in length")
        if np.any(atoms < 0):
            raise ValueError("atom ids must be non-negative")
        if np.any((labels != 1) & (labels != -1)):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.atoms.size

    def __len__(self) -> int:
        return self.n

    def prefix(self, k: int) -> LabeledSample:
        return LabeledSample(self.atoms[:k], self.labels[:k])


def rule_values(f: RuleLike, n_atoms: int) -> np.ndarray:
    """Values of ``f`` as a float array, checked against a support of ``n_atoms``.

    Plain arrays are accepted unchecked in range so that unclipped
    real-valued functions can be evaluated too.
    """
    values = f.values if isinstance(f, Rule) else np.asarray(f, dtype=float).reshape(-1)
    if values.size != n_atoms:
        raise DomainError(
            f"rule defines {values.size} atom values but the support has {n_atoms} atoms"
        )
    return values


class HingeExcess(NamedTuple):
    """Excess hinge risk computed two ways: ``A(f) - A*`` and ``E|2eta-1||f-f*|``."""

    direct: float
    identity: float


class MarginCheck(NamedTuple):
    """Outcome of :func:`margin_constant`.

    ``constant`` is the smallest ``c1`` for ``kappa > 1`` and the essential
    lower bound ``h`` of ``|2 eta - 1|`` for ``kappa == 1``.  When the
    assumption cannot hold, ``satisfied`` is False and ``constant`` is
    ``inf`` (``kappa > 1``) or ``0`` (``kappa == 1``).
    """

    kappa: float
    satisfied: bool
    constant: float


def bayes_rule(dist: FiniteDistribution) -> Rule:
    return dist.bayes_rule


def bayes_risk(dist: FiniteDistribution) -> float:
    return dist.bayes_risk


def zero_one_risk(dist: FiniteDistribution, f: RuleLike) -> float:
    """Misclassification probability of ``sign(f)``."""
    s = sign(rule_values(f, dist.n_atoms))
    err = np.where(s > 0, 1.0 - dist.etas, dist.etas)
    return float(np.dot(dist.masses, err))


def hinge_risk(dist: FiniteDistribution, f: RuleLike) -> float:
    """``E[max(1 - Y f(X), 0)]`` for any real-valued ``f``."""
    v = rule_values(f, dist.n_atoms)
    per_atom = dist.etas * np.maximum(1.0 - v, 0.0) + (1.0 - dist.etas) * np.maximum(
        1.0 + v, 0.0
    )
    return float(np.dot(dist.masses, per_atom))


def excess_hinge(dist: FiniteDistribution, f: RuleLike) -> HingeExcess:
    """Excess hinge risk of a ``[-1, 1]``-valued ``f``, cross-checked.

    Raises :class:`ConsistencyError` when the direct difference and the
    margin-weighted L1 form disagree by more than ``ABS_TOL``.
    """
    if not isinstance(f, Rule):
        f = Rule(rule_values(f, dist.n_atoms))
    v = rule_values(f, dist.n_atoms)
    direct = hinge_risk(dist, v) - dist.optimal_hinge_risk
    identity = float(
        np.dot(dist.masses, dist.margins * np.abs(v - dist.bayes_rule.values))
    )
    if abs(direct - identity) > ABS_TOL:
        raise ConsistencyError(
            f"excess hinge mismatch: direct={direct!r}, identity={identity!r}"
        )
    return HingeExcess(direct, identity)


def margin_constant(dist: FiniteDistribution, kappa: float) -> MarginCheck:
    """Exact margin constant of ``dist`` for parameter ``kappa``.

    For ``kappa > 1`` this is the smallest ``c1`` with
    ``P(|2eta(X)-1| <= t) <= c1 t^(1/(kappa-1))`` on ``0 < t < 1``.  The
    left side is a right-continuous step function, so the ratio is
    maximised at its jump points and only those are evaluated.
    """
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa!r}")
    live = dist.masses > 0
    g = dist.margins[live]
    p = dist.masses[live]
    if kappa == 1:
        h = float(g.min())
        return MarginCheck(1.0, h > 0.0, h)

    if np.any(g == 0.0):
        return MarginCheck(float(kappa), False, math.inf)
    alpha = 1.0 / (kappa - 1.0)
    jumps = np.unique(g[g < 1.0])
    if jumps.size == 0:
        return MarginCheck(float(kappa), True, 0.0)
    # log space: t**alpha underflows when kappa is close to 1
    log_c1 = max(math.log(float(p[g <= t].sum())) - alpha * math.log(t) for t in jumps)
    c1 = math.exp(log_c1) if log_c1 < 709.0 else math.inf
    return MarginCheck(float(kappa), True, c1)


def hinge_margin_constant(dist: FiniteDistribution, kappa: float) -> float:
    """Constant ``c`` with ``E|f - f*| <= c (A(f) - A*)^(1/kappa)`` on ``[-1,1]``-valued f.

    ``kappa == 1`` gives ``1/h``.  For ``kappa > 1`` the constant follows the
    constructive chain from the margin constant ``c1`` (taken as at least 1
    so that the tail bound also covers ``t >= 1``).  Returns ``inf`` when the
    margin assumption fails.
    """
    check = margin_constant(dist, kappa)
    if not check.satisfied:
        return math.inf
    if kappa == 1:
        return 1.0 / check.constant
    c1 = max(check.constant, 1.0)
    return (kappa * (2.0 * c1 * kappa / (kappa - 1.0)) ** (kappa - 1.0)) ** (1.0 / kappa)


def margin_term_variance(dist: FiniteDistribution, f: RuleLike) -> float:
    """Exact variance of ``Y (f(X) - f*(X))``."""
    d = rule_values(f, dist.n_atoms) - dist.bayes_rule.values
    mean = float(np.dot(dist.masses, (2.0 * dist.etas - 1.0) * d))
    second = float(np.dot(dist.masses, d * d))
    return max(second - mean * mean, 0.0)


def sample(dist: FiniteDistribution, n: int, rng_seed) -> LabeledSample:
    """``n`` i.i.d. draws from ``dist``; ``rng_seed`` is an int or a numpy Generator."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n!r}")
    rng = np.random.default_rng(rng_seed)
    atoms = rng.choice(dist.n_atoms, size=n, p=dist.masses)
    labels = np.where(rng.random(n) < dist.etas[atoms], 1, -1)
    return LabeledSample(atoms, labels)


def hellinger_sq(d1: FiniteDistribution, d2: FiniteDistribution) -> float:
    """Squared Hellinger distance (no 1/2 factor) between laws sharing a marginal."""
    if d1.n_atoms != d2.n_atoms or not np.allclose(
        d1.masses, d2.masses, rtol=0.0, atol=ABS_TOL
    ):
        raise ValueError("hellinger_sq needs two laws on the same atoms with the same masses")
    a = (np.sqrt(d1.etas) - np.sqrt(d2.etas)) ** 2
    b = (np.sqrt(1.0 - d1.etas) - np.sqrt(1.0 - d2.etas)) ** 2
    return float(np.dot(d1.masses, a + b))


def hellinger_sq_product(h2: float, n: int) -> float:
    """Squared Hellinger distance between ``n``-fold products: ``2(1 - (1 - h2/2)^n)``."""
    return 2.0 * (1.0 - (1.0 - h2 / 2.0) ** n)


def save_distribution(dist: FiniteDistribution, path) -> None:
    """Write ``dist`` as JSON with parallel ``atoms``/``masses``/``etas`` arrays.

    Floats are written with ``repr`` and therefore round-trip exactly.
    """
    doc = {
        "atoms": dist.atoms.tolist(),
        "masses": dist.masses.tolist(),
        "etas": dist.etas.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_distribution(path) -> FiniteDistribution:
    doc = json.loads(Path(path).read_text())
    unknown = set(doc) - {"atoms", "masses", "etas"}
    if unknown:
        raise ValueError(f"unknown keys in distribution file: {sorted(unknown)}")
    masses, etas = doc["masses"], doc["etas"]
    atoms = doc.get("atoms", list(range(len(masses))))
    if list(atoms) != list(range(len(masses))):
        raise ValueError("atoms must be the ids 0..N-1 in order")
    return FiniteDistribution(masses, etas)
