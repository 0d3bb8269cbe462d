"""Fluid-limit ODE systems, a fixed-step RK4 integrator and the constants.

Right-hand sides and constraint functions share the signature
``f(s, y, params) -> ndarray``. A state is inside the domain while every
constraint value is positive. Kernels are compiled with numba; any plain
Python callable with the same signature also works (slower).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numba import njit
from numba.core.registry import CPUDispatcher

from .errors import DomainError, InvalidConfiguration, NumericalFailure

RATIO_FLOOR = 1e-12  # below this, c/d is taken as 0
PHASE_FLOOR = 1e-6   # d at which a degree-greedy phase is declared over
S_MAX = 3.0
DEFAULT_STEP = 1e-5
DEFAULT_MARGINS = (1e-4, 1e-5, 1e-6)


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _randomized_kernel(s, y, p):
    x, l1, l2 = y[0], y[1], y[2]
    a = 1.0 - x
    out = np.empty(3)
    out[0] = a + 2.0 * (l1 + l2)
    out[1] = (x - 5.0 * (l1 + l2)
              + 2.0 * l1 * ((2.0 * l2 - l1) / a - 1.0)
              + 2.0 * l2 * (1.0 + (2.0 * l2 - l1) / a)
              - l1 + 2.0 * l2 - l1)
    out[2] = l1 - 2.0 * l2 - 2.0 * l1 * (2.0 * l2 / a) - 2.0 * l2 * (1.0 + 2.0 * l2 / a)
    return out


@njit(cache=True)
def _randomized_bounds(s, y, p):
    out = np.empty(4)
    out[0] = S_MAX - s
    out[1] = (1.0 - p[0]) - y[0]
    out[2] = 2.0 - abs(y[1])
    out[3] = 2.0 - abs(y[2])
    return out


@njit(cache=True)
def _type_terms(c, level, b, m, r, a):
    """Terms of c' shared by both type levels (k1 + k2 = level)."""
    k = c.size
    out = np.empty(k)
    for k1 in range(k):
        k2 = level - k1
        ck = c[k1]
        mk = k2 * ck
        bk = k1 * ck
        m_prev = (k2 + 1) * c[k1 - 1] if k1 > 0 else 0.0
        b_next = (k1 + 1) * c[k1 + 1] if k2 > 0 else 0.0
        out[k1] = (m_prev - ck - mk
                   + 2.0 * (b + m) * (m_prev - mk) / a - 2.0 * (bk + mk)
                   + 2.0 * r * (m_prev - mk - ck) / a
                   + b_next - bk)
    return out


@njit(cache=True)
def _greedy_kernel(s, y, p):
    # y = [x, r, c_{k1, q-1-k1} for k1 < q, c_{k1, q-k1} for k1 <= q]
    q = int(p[0])
    x, r = y[0], y[1]
    lo = y[2:2 + q]
    hi = y[2 + q:3 + 2 * q]
    a = 1.0 - x
    b = 0.0
    m = 0.0
    h2 = 0.0  # sum of 2 h (m_{j,h} + b_{j,h}) without the factor 2
    d = 0.0
    for k1 in range(q):
        k2 = q - 1 - k1
        b += k1 * lo[k1]
        m += k2 * lo[k1]
        h2 += k2 * (k2 + k1) * lo[k1]
        d += lo[k1]
    for k1 in range(q + 1):
        k2 = q - k1
        b += k1 * hi[k1]
        m += k2 * hi[k1]
        h2 += k2 * (k2 + k1) * hi[k1]
    ell = b + r + m
    free = x - 5.0 * ell
    out = np.empty(y.size)
    out[0] = 1.0 - x + 2.0 * ell
    out[1] = (m - r - 2.0 * (b + m) * r / a + 2.0 * h2
              - 2.0 * r * (1.0 + r / a - m / a) - r)
    dlo = _type_terms(lo, q - 1, b, m, r, a)
    dhi = _type_terms(hi, q, b, m, r, a)
    for k1 in range(q):
        ratio = lo[k1] / d if d > RATIO_FLOOR else 0.0
        dlo[k1] -= (free + r) * ratio
        dhi[k1 + 1] += free * ratio
        dhi[k1] += r * ratio
    out[2:2 + q] = dlo
    out[2 + q:] = dhi
    return out


@njit(cache=True)
def _greedy_bounds(s, y, p):
    q = int(p[0])
    out = np.empty(3)
    out[0] = S_MAX - s
    out[1] = (1.0 - p[2]) - y[0]
    out[2] = y[2:2 + q].sum() - p[1]
    return out


def _march_py(f, g, s0, k0, y, h, nsteps, p):
    """Up to ``nsteps`` RK4 steps from s0 + k0 h.

    Stops before a step that would leave the domain. Returns
    (steps taken, last inside state, rejected candidate, status) where
    status is 0 when the budget ran out, 1 at a domain exit, 2 on a
    non-finite value.
    """
    half = 0.5 * h
    for i in range(nsteps):
        s = s0 + (k0 + i) * h
        a1 = f(s, y, p)
        a2 = f(s + half, y + half * a1, p)
        a3 = f(s + half, y + half * a2, p)
        a4 = f(s + h, y + h * a3, p)
        yn = y + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if not np.all(np.isfinite(yn)):
            return i, y, yn, 2
        if np.min(g(s + h, yn, p)) <= 0.0:
            return i, y, yn, 1
        y = yn
    return nsteps, y, y, 0


_march_jit = njit(_march_py)


# ---------------------------------------------------------------- systems


@dataclass(frozen=True)
class OdeSystem:
    """Right-hand side, domain constraints and coordinate names."""

    name: str
    rhs: Callable
    constraints: Callable
    labels: tuple
    constraint_labels: tuple
    params: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @property
    def dimension(self):
        return len(self.labels)

    def __call__(self, s, y):
        return self.rhs(s, np.asarray(y, dtype=float), self.params)

    def inside(self, s, y):
        return bool(np.min(self.constraints(s, np.asarray(y, dtype=float), self.params)) > 0)


def randomized_system(margin=1e-6):
    return OdeSystem(
        name="randomized", rhs=_randomized_kernel, constraints=_randomized_bounds,
        labels=("x", "l1", "l2"),
        constraint_labels=("s_max", "x_margin", "l1_bound", "l2_bound"),
        params=np.array([margin]))


def greedy_phase_system(q, phase_floor=PHASE_FLOOR, margin=1e-12):
    labels = (("x", "r") + tuple(f"c_{k}_{q - 1 - k}" for k in range(q))
              + tuple(f"c_{k}_{q - k}" for k in range(q + 1)))
    return OdeSystem(
        name=f"greedy_phase_{q}", rhs=_greedy_kernel, constraints=_greedy_bounds,
        labels=labels, constraint_labels=("s_max", "x_margin", "phase_end"),
        params=np.array([float(q), phase_floor, margin]))


def rhs_randomized(s, x, l1, l2, margin=0.0):
    """Derivatives (x', l1', l2') of the randomized fluid limit."""
    if not x < 1.0 - margin:
        raise DomainError(f"x = {x} outside the domain x < 1 - {margin}")
    return _randomized_kernel(float(s), np.array([x, l1, l2], dtype=float), np.zeros(1))


def rhs_greedy_phase(q, s, y):
    """Derivative of the phase-q degree-greedy system.

    ``y`` holds x, r, the q types with k1 + k2 = q - 1 (by k1), then the
    q + 1 types with k1 + k2 = q.
    """
    y = np.asarray(y, dtype=float)
    if q < 1 or y.size != 2 * q + 3:
        raise InvalidConfiguration(f"phase {q} needs a state of size {2 * q + 3}")
    if not y[0] < 1.0:
        raise DomainError(f"x = {y[0]} outside the domain x < 1")
    return _greedy_kernel(float(s), y, np.array([float(q), PHASE_FLOOR, 0.0]))


# ---------------------------------------------------------------- integrator


@dataclass
class Trajectory:
    s: np.ndarray
    y: np.ndarray  # one row per sample
    labels: tuple
    exit_s: float | None
    exit_reason: str | None

    @property
    def final(self):
        return self.y[-1]

    def column(self, label):
        return self.y[:, self.labels.index(label)]

    def at(self, s):
        """Linear interpolation of every coordinate at abscissae ``s``."""
        s = np.asarray(s, dtype=float)
        return np.stack([np.interp(s, self.s, self.y[:, j]) for j in range(self.y.shape[1])], axis=-1)


def integrate(system, s0, init, step_size=DEFAULT_STEP, s_end=None,
              sample_every=100, event_tol=1e-9, max_steps=10**8):
    """Fixed-step RK4 from (s0, init) until the domain boundary or s_end.

    The crossing step is bisected until the exit abscissa is known to
    within ``event_tol``; the last sample is the final in-domain state.
    """
    h = float(step_size)
    if not h > 0:
        raise InvalidConfiguration("step_size must be positive")
    y = np.array(init, dtype=float)
    p = system.params
    if not system.inside(s0, y):
        raise DomainError(f"initial state {y} is outside the domain of {system.name}")
    march = _march_jit if isinstance(system.rhs, CPUDispatcher) else _march_py
    f, g = system.rhs, system.constraints
    total = max_steps if s_end is None else int(round((s_end - s0) / h))
    ss, ys = [float(s0)], [y.copy()]
    k = 0
    exit_s = exit_reason = None
    while k < total:
        taken, y, cand, status = march(f, g, float(s0), k, y, h, min(sample_every, total - k), p)
        k += taken
        s = s0 + k * h
        if status == 2:
            raise NumericalFailure(f"non-finite state in {system.name} at s={s}", s, cand)
        if status == 1:
            frac, y, cand = _bisect(march, f, g, s, y, h, p, event_tol)
            s = s + frac * h
            exit_s = s
            vals = g(s, cand, p)
            exit_reason = system.constraint_labels[int(np.argmin(vals))]
            if s > ss[-1]:
                ss.append(s)
                ys.append(y.copy())
            break
        ss.append(s)
        ys.append(y.copy())
    return Trajectory(np.array(ss), np.array(ys), system.labels, exit_s, exit_reason)


def _bisect(march, f, g, s, y, h, p, tol):
    lo, hi = 0.0, 1.0
    y_lo, y_hi = y, None
    while (hi - lo) * h > tol:
        mid = 0.5 * (lo + hi)
        _, _, cand, status = march(f, g, s, 0, y, mid * h, 1, p)
        if status == 0:
            lo, y_lo = mid, cand
        else:
            hi, y_hi = mid, cand
    if y_hi is None:
        _, _, y_hi, _ = march(f, g, s, 0, y, h, 1, p)
    return lo, y_lo, y_hi


# ---------------------------------------------------------------- constants


@dataclass
class SigmaChain:
    sigma: list          # sigma_1 .. sigma_N
    x: float
    r: float
    c: np.ndarray        # types with k1 + k2 = N, by k1 (after the fold)
    exit_reasons: list
    trajectory: np.ndarray | None = None  # rows: s, phase, x, r, b, m, d

    @property
    def s_end(self):
        return self.sigma[-1] if self.sigma else 0.0


CHAIN_COLUMNS = ("s", "phase", "x", "r", "b", "m", "d")


def _aggregate(q, s, y):
    lo, hi = y[:, 2:2 + q], y[:, 2 + q:]
    k_lo = np.arange(q)
    k_hi = np.arange(q + 1)
    b = lo @ k_lo + hi @ k_hi
    m = lo @ (q - 1 - k_lo) + hi @ (q - k_hi)
    return np.column_stack([s, np.full(len(s), q), y[:, 0], y[:, 1], b, m, lo.sum(axis=1)])


def compute_sigma_chain(N, step_size=DEFAULT_STEP, phase_floor=PHASE_FLOOR,
                        record=False, sample_every=100):
    """Integrate the degree-greedy phases 1..N back to back.

    At the end of phase q the leftover mass of types with k1 + k2 = q - 1
    is moved to (k1 + 1, k2) before phase q + 1 starts.
    """
    if not isinstance(N, int) or N < 0:
        raise InvalidConfiguration(f"N must be a non-negative integer, got {N!r}")
    s, x, r = 0.0, 0.0, 0.0
    c = np.array([1.0])
    sigma, reasons, rows = [], [], []
    for q in range(1, N + 1):
        y0 = np.concatenate([[x, r], c, np.zeros(q + 1)])
        traj = integrate(greedy_phase_system(q, phase_floor), s, y0, step_size,
                         sample_every=sample_every)
        if traj.exit_reason != "phase_end":
            raise DomainError(f"phase {q} left the domain via {traj.exit_reason} at s={traj.exit_s}")
        if record:
            rows.append(_aggregate(q, traj.s, traj.y))
        end = traj.final
        s = traj.exit_s
        x, r = float(end[0]), float(end[1])
        c = end[2 + q:].copy()
        c[1:] += end[2:2 + q]
        sigma.append(s)
        reasons.append(traj.exit_reason)
    table = np.vstack(rows) if rows else np.empty((0, len(CHAIN_COLUMNS)))
    return SigmaChain(sigma, x, r, c, reasons, table if record else None)


@dataclass(frozen=True)
class AlphaStar:
    N: int
    value: float            # extrapolated limit as the margin goes to 0
    smallest_margin: float  # exit abscissa at the smallest margin
    margins: tuple
    exits: tuple
    exit_reason: str


@lru_cache(maxsize=32)
def alpha_star_report(N, margins=DEFAULT_MARGINS, step_size=DEFAULT_STEP):
    """Exit abscissae of the randomized stage over a margin sweep.

    The randomized system starts from (sigma_N, x(sigma_N), 0, 0). The
    exit abscissa approaches its limit like sqrt(margin), so the two
    smallest margins are combined by Richardson extrapolation in
    sqrt(margin).
    """
    margins = tuple(sorted(margins, reverse=True))
    if not margins or min(margins) <= 0:
        raise InvalidConfiguration("margins must be positive")
    chain = compute_sigma_chain(N, step_size)
    s0 = chain.s_end
    # margins the hand-over state already violates say nothing about the limit
    margins = tuple(eps for eps in margins if chain.x < 1.0 - eps)
    if not margins:
        raise DomainError(f"hand-over state x={chain.x} is inside every margin")
    exits, reason = [], None
    for eps in margins:
        traj = integrate(randomized_system(eps), s0, [chain.x, 0.0, 0.0], step_size,
                         sample_every=1000)
        exits.append(traj.exit_s)
        reason = traj.exit_reason
    if reason != "x_margin":
        return AlphaStar(N, S_MAX, exits[-1], margins, tuple(exits), reason)
    value = exits[-1]
    if len(margins) >= 2:
        r1, r2 = math.sqrt(margins[-2]), math.sqrt(margins[-1])
        value = exits[-1] + (exits[-1] - exits[-2]) * r2 / (r1 - r2)
    return AlphaStar(N, value, exits[-1], margins, tuple(exits), reason)


def compute_alpha_star(N, margins=DEFAULT_MARGINS, step_size=DEFAULT_STEP):
    """Limit of the randomized-stage exit abscissa after N greedy phases."""
    return alpha_star_report(N, tuple(margins), step_size).value


def randomized_trajectory(s0=0.0, x0=0.0, margin=1e-6, step_size=DEFAULT_STEP, sample_every=100):
    return integrate(randomized_system(margin), s0, [x0, 0.0, 0.0], step_size,
                     sample_every=sample_every)
