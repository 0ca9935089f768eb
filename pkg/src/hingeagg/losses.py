"""Classification losses, the [-1, 1] projection, and empirical risks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import LabeledSample, RuleLike
from .errors import DomainError


def hinge(x):
    return np.maximum(1.0 - np.asarray(x, dtype=float), 0.0)


def zero_one(x):
    # 1{x <= 0}: an output of 0 counts as an error against either label
    return np.where(np.asarray(x, dtype=float) <= 0.0, 1.0, 0.0)


def clip(x):
    """Projection onto ``[-1, 1]``; the identity on that interval."""
    return np.clip(np.asarray(x, dtype=float), -1.0, 1.0)


@dataclass(frozen=True)
class Loss:
    """A margin loss ``phi`` applied to ``y * f(x)``."""

    kind: str
    fn: Callable

    def __call__(self, x):
        return self.fn(x)

    @property
    def is_convex(self) -> bool:
        return self.kind != "zero_one"


HINGE = Loss("hinge", hinge)
ZERO_ONE = Loss("zero_one", zero_one)


def custom_convex(fn: Callable, name: str = "custom-convex", grid=None) -> Loss:
    """Wrap ``fn`` as a convex loss after a midpoint-convexity spot check on a grid."""
    xs = np.linspace(-3.0, 3.0, 61) if grid is None else np.asarray(grid, dtype=float)
    a, b = np.meshgrid(xs, xs)
    lhs = np.asarray(fn((a + b) / 2.0), dtype=float)
    rhs = (np.asarray(fn(a), dtype=float) + np.asarray(fn(b), dtype=float)) / 2.0
    if np.any(lhs > rhs + 1e-12 * (1.0 + np.abs(rhs))):
        raise ValueError(f"loss {name!r} fails the midpoint convexity check")
    return Loss(name, fn)


def get_loss(name: str) -> Loss:
    try:
        return {"hinge": HINGE, "zero_one": ZERO_ONE}[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; expected 'hinge' or 'zero_one'") from None


def _sampled_values(f: RuleLike, sample: LabeledSample) -> np.ndarray:
    values = f.values if hasattr(f, "values") else np.asarray(f, dtype=float).reshape(-1)
    if sample.n and sample.atoms.max() >= values.size:
        raise DomainError(
            f"sample contains atom {int(sample.atoms.max())} but the rule defines "
            f"only {values.size} atoms"
        )
    return values[sample.atoms]


def margins(f: RuleLike, sample: LabeledSample) -> np.ndarray:
    """``Y_i f(X_i)`` for every observation."""
    return sample.labels * _sampled_values(f, sample)


def empirical_risk(loss: Loss, f: RuleLike, sample: LabeledSample) -> float:
    """``(1/n) sum_i loss(Y_i f(X_i))``."""
    if sample.n == 0:
        raise ValueError("empirical risk of an empty sample")
    return float(np.mean(loss(margins(f, sample))))


def empirical_risks(loss: Loss, values: np.ndarray, sample: LabeledSample) -> np.ndarray:
    """Empirical risks of every row of an ``(M, n_atoms)`` value matrix."""
    if sample.n == 0:
        raise ValueError("empirical risk of an empty sample")
    values = np.asarray(values, dtype=float)
    if sample.atoms.max() >= values.shape[1]:
        raise DomainError("sample contains atoms outside the rules' support")
    return loss(values[:, sample.atoms] * sample.labels).mean(axis=1)


__all__ = [
    "HINGE",
    "ZERO_ONE",
    "Loss",
    "clip",
    "custom_convex",
    "empirical_risk",
    "empirical_risks",
    "get_loss",
    "hinge",
    "margins",
    "zero_one",
]
