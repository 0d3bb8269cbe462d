"""Players for the semi-random process.

Two step rules (randomized red arcs; degree-greedy blue/red arcs), the
clean-up procedure that absorbs the last few vertices and closes the
cycle, and the three-stage composite that chains them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import engine as eng
from .engine import Case, Mode, StepOutcome
from .errors import CleanupFailed, InvalidConfiguration, PreconditionViolation

CUTOFF_RULES = ("log", "sqrt")


@dataclass(frozen=True)
class StrategyConfig:
    """Knobs of the three-stage player.

    ``stage2_cutoff`` is either a positive integer (switch to clean-up once
    at most that many unsaturated vertices remain) or a named rule:
    ``"log"`` for n/ln n, ``"sqrt"`` for sqrt(n).
    """

    N: int = 100
    stage2_cutoff: int | str = 1
    safety_multiplier: float = 20.0

    def __post_init__(self):
        if not isinstance(self.N, int) or self.N < 0:
            raise InvalidConfiguration(f"N must be a non-negative integer, got {self.N!r}")
        if not self.safety_multiplier > 0:
            raise InvalidConfiguration("safety_multiplier must be positive")
        rule = self.stage2_cutoff
        if isinstance(rule, str):
            if rule not in CUTOFF_RULES:
                raise InvalidConfiguration(f"unknown cutoff rule {rule!r}")
        elif not isinstance(rule, int) or rule < 1:
            raise InvalidConfiguration(f"cutoff must be >= 1, got {rule!r}")

    def cutoff(self, n):
        """Number of unsaturated vertices at which stage 2 hands over."""
        rule = self.stage2_cutoff
        if rule == "log":
            value = int(n / math.log(n))
        elif rule == "sqrt":
            value = int(math.isqrt(n))
        else:
            value = rule
        return min(max(value, 1), n - 1)


@dataclass
class PhaseTracker:
    """Current degree-greedy phase and the recorded phase ends.

    ``tau[q]`` is the step at which phase q ended; ``tau[0] = 0``.
    """

    q: int = 1
    tau: list = field(default_factory=lambda: [0])
    d_current: int = 0


# ---------------------------------------------------------------- step rules


def fully_randomized_step(st, u) -> StepOutcome:
    if st.mode is not Mode.RANDOMIZED:
        raise PreconditionViolation("fully_randomized_step needs randomized mode")
    case, x = eng.classify_square(st, u)
    if case is Case.UNSATURATED:
        return eng.extend_path(st, u)
    if case is Case.ADJACENT:
        return eng.augment_path(st, u, x)
    if (case is Case.PERMISSIBLE or case is Case.COLORED_ONE_RED) and st.unsat:
        return eng.color_arc(st, u, eng.uniform_unsaturated(st), eng.HUE_RED)
    return eng.pass_round(st, u)


def degree_greedy_step(st, u) -> StepOutcome:
    if st.mode is not Mode.GREEDY:
        raise PreconditionViolation("degree_greedy_step needs greedy mode")
    case, x = eng.classify_square(st, u)
    if case is Case.UNSATURATED:
        return eng.extend_path(st, u)
    if case is Case.ADJACENT:
        return eng.augment_path(st, u, x)
    if st.unsat:
        if case is Case.PERMISSIBLE or case is Case.COLORED_RED:
            return eng.color_arc(st, u, st.buckets.sample_min(st.rng), eng.HUE_BLUE)
        if case is Case.COLORED_BLUE:
            return eng.color_arc(st, u, eng.uniform_unsaturated(st), eng.HUE_RED)
    return eng.pass_round(st, u)


def advance_phase_if_needed(st, tracker):
    """Close every phase whose minimum blue degree has been used up.

    Blue degrees of unsaturated vertices never decrease, so D_{q-1}
    hitting zero is final. Several phases can end on the same step.
    """
    if st.mode is not Mode.GREEDY:
        raise PreconditionViolation("phase tracking needs greedy mode")
    if st.unsat:
        while st.buckets.size(tracker.q - 1) == 0:
            tracker.tau.append(st.step)
            tracker.q += 1
    tracker.d_current = st.buckets.size(tracker.q - 1)
    return tracker


# ---------------------------------------------------------------- clean-up


@dataclass(frozen=True)
class CleanupSchedule:
    """Targets j_k and reservoir sizes m_k for k = 1..tau."""

    j: tuple
    m: tuple
    tau1: int
    tau: int

    @classmethod
    def build(cls, n, j0):
        quarter = n ** 0.25
        eps = j0 / n
        js = [j0]
        while js[-1] > 0:
            prev = js[-1]
            js.append(prev // 2 if prev > quarter else prev - 1)
        tau1 = next(k for k, j in enumerate(js) if j <= quarter)
        floor = math.ceil(math.sqrt(n))
        ms = [0]
        for k in range(1, len(js)):
            if k <= tau1:
                ms.append(max(floor, math.ceil(math.sqrt(eps) * 0.5 ** (k / 2) * n)))
            else:
                ms.append(floor)
        return cls(tuple(js), tuple(ms), tau1, len(js) - 1)


@dataclass
class CleanupReport:
    steps: int = 0
    iterations: int = 0
    retries: int = 0
    absorbed: int = 0
    closing_steps: int = 0
    closed: bool = False


def _reservoir(st, m):
    on_path, color = st.on_path, st.color
    for _ in range(m):
        u = eng.draw_square(st)
        if not on_path[u] or color[u] or eng.colored_neighbor(st, u):
            eng.pass_round(st, u)
        else:
            eng.color_arc(st, u, st.buckets.sample_min(st.rng), eng.HUE_RED)


def _absorb_until(st, target, limit):
    on_path = st.on_path
    spent = 0
    while len(st.unsat) > target and st.class_count[eng.RED] and spent < limit:
        u = eng.draw_square(st)
        x = eng.colored_neighbor(st, u) if on_path[u] else 0
        if x:
            eng.augment_path(st, u, x)
        else:
            eng.pass_round(st, u)
        spent += 1


def close_cycle(st, config, report):
    """Turn a Hamiltonian path into a Hamiltonian cycle.

    Arcs first go to the head; the left path neighbour of each square is
    marked. Then arcs go to the tail until a marked vertex x is hit, and
    x-right(x) is swapped for x-tail and right(x)-head.
    """
    n = st.n
    root = math.sqrt(n)
    head, tail = st.head, st.tail
    marked = {}
    rounds = 0
    while not marked:
        rounds += 1
        if rounds > config.safety_multiplier:
            raise CleanupFailed("closing: no vertex was marked", report)
        for _ in range(math.ceil(root)):
            u = eng.draw_square(st)
            idx = eng.add_arc(st, u, head)
            x = st.left[u]
            if x and x not in marked:
                marked[x] = idx
            report.closing_steps += 1
    budget = math.ceil(config.safety_multiplier * root * math.log(n) ** 2)
    for _ in range(budget):
        u = eng.draw_square(st)
        idx = eng.add_arc(st, u, tail)
        report.closing_steps += 1
        if u in marked:
            eng.close_cycle(st, u, idx, marked[u])
            report.closed = True
            return report
    raise CleanupFailed("closing: budget exhausted", report)


def cleanup_run(st, config=None, hook=None):
    """Absorb the remaining unsaturated vertices, then close the cycle.

    ``hook(st)`` is called after every step of the absorption phase and
    is free to record checkpoints.
    """
    config = config or StrategyConfig()
    if st.length < 2:
        raise PreconditionViolation("clean-up needs a path with at least two vertices")
    n = st.n
    report = CleanupReport()
    start = st.step
    sched = CleanupSchedule.build(n, len(st.unsat))
    limit = math.ceil(config.safety_multiplier * math.sqrt(n) * math.log(n) ** 2)
    for k in range(1, sched.tau + 1):
        target = sched.j[k]
        tries = 0
        while len(st.unsat) > target:
            tries += 1
            if tries > config.safety_multiplier:
                report.steps = st.step - start
                raise CleanupFailed(f"clean-up iteration {k} made no progress", report)
            before = len(st.unsat)
            eng.reset_colors(st, Mode.PLAIN)
            _reservoir(st, sched.m[k])
            _absorb_until(st, target, max(limit, 8 * sched.m[k]))
            report.absorbed += before - len(st.unsat)
            if hook is not None:
                hook(st)
        report.iterations += 1
        report.retries += tries - 1
    eng.reset_colors(st, Mode.PLAIN)
    close_cycle(st, config, report)
    report.steps = st.step - start
    if hook is not None:
        hook(st)
    return report


# ---------------------------------------------------------------- composite


@dataclass
class ThreeStageResult:
    n: int
    seed: int
    total_steps: int
    tau: list
    stage_end: list  # step at which stages 1, 2, 3 finished
    hamiltonian: bool
    cycle: list | None
    cleanup: CleanupReport
    state: object = None


def run_three_stage(config, n, seed, hook=None, keep_state=False, verify=True):
    """Degree-greedy for N phases, randomized to the cutoff, then clean-up.

    The greedy stage also stops early if it alone reaches the cutoff.

    ``hook(st, stage, tracker)`` is invoked after every step.
    """
    config = config or StrategyConfig()
    tracker = PhaseTracker()
    cut = config.cutoff(n)
    if config.N > 0:
        st = eng.new_process(n, seed, Mode.GREEDY)
        advance_phase_if_needed(st, tracker)
        while tracker.q <= config.N and len(st.unsat) > cut:
            degree_greedy_step(st, eng.draw_square(st))
            advance_phase_if_needed(st, tracker)
            if hook is not None:
                hook(st, 1, tracker)
        eng.reset_colors(st, Mode.RANDOMIZED)
    else:
        st = eng.new_process(n, seed, Mode.RANDOMIZED)
    end1 = st.step
    while len(st.unsat) > cut:
        fully_randomized_step(st, eng.draw_square(st))
        if hook is not None:
            hook(st, 2, tracker)
    end2 = st.step
    stage3 = None if hook is None else (lambda s: hook(s, 3, tracker))
    report = cleanup_run(st, config, stage3)
    ok, cycle = True, None
    if verify:
        ok, cycle = eng.is_hamiltonian_cycle(eng.arcs(st), n)
    return ThreeStageResult(
        n=n, seed=seed, total_steps=st.step, tau=list(tracker.tau),
        stage_end=[end1, end2, st.step], hamiltonian=ok, cycle=cycle,
        cleanup=report, state=st if keep_state else None)
