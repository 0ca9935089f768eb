"""Plain-text formats for rule classes and labelled samples.

Both formats are line oriented; blank lines and everything after ``#``
are ignored.

Class file: one rule per line, its values on atoms ``0..N-1`` separated
by whitespace or commas::

    # two rules on three atoms
    1 -1 1
    -1 -1 1

Sample file: one observation per line, ``atom_id label`` with label
``-1`` or ``+1``, in draw order::

    0 +1
    2 -1
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .aggregates import FunctionClass
from .distributions import LabeledSample
from .errors import FormatError

_SPLIT = re.compile(r"[,\s]+")


def _content_lines(path):
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, [tok for tok in _SPLIT.split(line) if tok]


def load_class(path) -> FunctionClass:
    rows = []
    width = None
    for lineno, tokens in _content_lines(path):
        try:
            row = [float(tok) for tok in tokens]
        except ValueError as exc:
            raise FormatError(path, lineno, f"not a number ({exc})") from None
        if any(not -1.0 <= v <= 1.0 for v in row):
            raise FormatError(path, lineno, "rule values must lie in [-1, 1]")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise FormatError(path, lineno, f"expected {width} values, found {len(row)}")
        rows.append(row)
    if len(rows) < 2:
        raise FormatError(path, None, f"a class needs at least 2 rules, found {len(rows)}")
    return FunctionClass(np.array(rows))


def load_sample(path) -> LabeledSample:
    atoms, labels = [], []
    for lineno, tokens in _content_lines(path):
        if len(tokens) != 2:
            raise FormatError(path, lineno, f"expected 'atom label', found {len(tokens)} fields")
        try:
            atom, label = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise FormatError(path, lineno, "atom and label must be integers") from None
        if atom < 0:
            raise FormatError(path, lineno, f"negative atom id {atom}")
        if label not in (-1, 1):
            raise FormatError(path, lineno, f"label must be -1 or +1, got {label}")
        atoms.append(atom)
        labels.append(label)
    if not atoms:
        raise FormatError(path, None, "sample file has no observations")
    return LabeledSample(np.array(atoms), np.array(labels))


def save_class(cls: FunctionClass, path) -> None:
    lines = [" ".join(repr(float(v)) for v in row) for row in cls.values]
    Path(path).write_text("\n".join(lines) + "\n")


def save_sample(sample: LabeledSample, path) -> None:
    lines = [f"{a} {l:+d}" for a, l in zip(sample.atoms.tolist(), sample.labels.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")
