"""Lower-bound machinery: the bound function f, its root and structure counts.

A vertex with a single square whose circle partner later collects two
squares of its own wastes a square; so does a two-square vertex in the
same situation. Counting such pairs (and their overlaps) over a history
gives an upper bound on the number of squares a Hamiltonian cycle can
use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.optimize import bisect

from .errors import BracketError, InvalidConfiguration

STRUCTURES = ("Z", "W1", "W2", "T1", "T2")


def eval_f(s):
    """Scaled usable-square bound after s*n steps."""
    e1, e2, e3 = math.exp(-s), math.exp(-2 * s), math.exp(-3 * s)
    return (2.0
            + e3 * (s + 1) * (1 - s ** 2 / 2 - s ** 3 / 3 - s ** 4 / 8)
            + e2 * (2 * s + 5 * s ** 2 / 2 + s ** 3 / 2)
            - e1 * (3 + 2 * s))


def find_beta(lo=0.5, hi=2.5, tol=1e-10):
    """Root of f(s) = 1 by bisection on [lo, hi]."""
    g = lambda s: eval_f(s) - 1.0
    if g(lo) * g(hi) >= 0:
        raise BracketError(f"f - 1 has no sign change on [{lo}, {hi}]")
    return bisect(g, lo, hi, xtol=tol)


def closed_form(which, s):
    """Limit of (structure count)/n after s*n steps."""
    e = math.exp(-s)
    if which == "Z":
        return 2 - 2 * e - s * e
    if which == "W1":
        return e * (1 - e * s ** 2 / 2 - e * s - e)
    if which == "W2":
        return e * (s - e * s ** 2 - e * s ** 3 / 2 - e * s)
    if which == "T1":
        return e * e * (-1 + s - e * s ** 3 / 3 - e * s ** 2 / 2 - e * s ** 4 / 8 + e)
    if which == "T2":
        return e * e * (-s + s ** 2 - e * s * (s ** 4 / 8 + s ** 3 / 3 + s ** 2 / 2 - 1))
    raise InvalidConfiguration(f"unknown structure {which!r}")


@dataclass(frozen=True)
class HistoryLog:
    """Arc sequence of a run; arc i (0-based) arrived at step i + 1."""

    n: int
    squares: np.ndarray
    circles: np.ndarray

    def __post_init__(self):
        if len(self.squares) != len(self.circles):
            raise InvalidConfiguration("squares and circles differ in length")

    @property
    def t(self):
        return len(self.squares)

    @classmethod
    def from_arcs(cls, n, pairs):
        pairs = list(pairs)
        sq = np.fromiter((p[0] for p in pairs), dtype=np.int64, count=len(pairs))
        ci = np.fromiter((p[1] for p in pairs), dtype=np.int64, count=len(pairs))
        return cls(n, sq, ci)

    @classmethod
    def from_state(cls, st):
        return cls(st.n, np.asarray(st.squares, dtype=np.int64), np.asarray(st.circles, dtype=np.int64))

    def truncate(self, t):
        return HistoryLog(self.n, self.squares[:t], self.circles[:t])

    def square_steps(self, v):
        return (np.flatnonzero(self.squares == v) + 1).tolist()

    def circle_steps(self, v):
        return (np.flatnonzero(self.circles == v) + 1).tolist()

    def square_counts(self):
        return np.bincount(self.squares, minlength=self.n + 1)


@dataclass(frozen=True)
class StructureCounts:
    Z: int = 0
    W1: int = 0
    W2: int = 0
    T1: int = 0
    T2: int = 0

    @property
    def W(self):
        return self.T1 + self.T2

    @property
    def usable(self):
        return self.Z - self.W1 - self.W2 + self.W

    def scaled(self, n):
        return {k: v / n for k, v in asdict(self).items()}


def count_structures(history):
    """Count Z, W1, W2, T1, T2 on a history in O(n + t).

    A pair (x, y) comes from a step i whose square is x and circle y,
    with y != x. It is in W1 when x has exactly one square overall and in
    W2 when x has exactly two; either way y must receive no square up to
    step i and at least two squares in total. T1 (T2) counts pairs of a
    W1 (W2) pair (x1, y1) with a W2 pair (y1, y2).
    """
    n, t = history.n, history.t
    if t == 0:
        return StructureCounts()
    sq, ci = history.squares, history.circles
    steps = np.arange(1, t + 1)
    z = np.bincount(sq, minlength=n + 1)
    first = np.full(n + 1, t + 1, dtype=np.int64)
    verts, idx = np.unique(sq, return_index=True)
    first[verts] = idx + 1
    ok = (ci != sq) & (first[ci] > steps) & (z[ci] >= 2)
    zx = z[sq]
    w1 = ok & (zx == 1)
    w2_pairs = np.unique(np.stack([sq[ok & (zx == 2)], ci[ok & (zx == 2)]]), axis=1)
    per_x = np.bincount(w2_pairs[0], minlength=n + 1)
    return StructureCounts(
        Z=int(np.minimum(z[1:], 2).sum()),
        W1=int(w1.sum()),
        W2=int(w2_pairs.shape[1]),
        T1=int(per_x[ci[w1]].sum()),
        T2=int(per_x[w2_pairs[1]].sum()),
    )


def usable_squares_bound(counts):
    return counts.Z - counts.W1 - counts.W2 + counts.T1 + counts.T2


def uniform_history(n, t, seed):
    """History of the baseline player whose circles are uniform on [n]."""
    rng = np.random.default_rng(seed)
    return HistoryLog(n, rng.integers(1, n + 1, t), rng.integers(1, n + 1, t))
