"""State of one semi-random process run and the two path-growing moves.

The engine is strategy-agnostic. It keeps the arc log, the path as a
doubly linked list, the colour classes of path vertices, the permissible
set and the per-vertex counters the strategies need. Every move appends
exactly one arc and advances the step counter by one.

Vertices are the integers ``1..n``; ``0`` means "no vertex".
"""

from __future__ import annotations

import heapq
import random
from enum import Enum
from typing import Iterable, NamedTuple

from .errors import InvalidConfiguration, PreconditionViolation


class Mode(str, Enum):
    RANDOMIZED = "randomized"
    GREEDY = "greedy"
    PLAIN = "plain"  # single red arcs, no permissible set; used by clean-up


# colour classes of path vertices
UNCOLORED, ONE_RED, TWO_RED, BLUE, RED, MAGENTA = range(6)
CLASS_NAMES = ("uncolored", "one_red", "two_red", "blue", "red", "magenta")

HUE_RED = "red"
HUE_BLUE = "blue"

# membership of a path vertex in the far set F (distance >= 3 from colour)
_OUT, _IN_Q, _IN_E = 0, 1, 2


class Case(str, Enum):
    UNSATURATED = "unsaturated"
    ADJACENT = "adjacent_to_colored"
    PERMISSIBLE = "permissible"
    COLORED_RED = "colored_red"
    COLORED_BLUE = "colored_blue"
    COLORED_ONE_RED = "colored_one_red"
    PASS = "pass"


class StepOutcome(NamedTuple):
    kind: str  # extend | augment | color | pass | close
    square: int
    circle: int
    pivot: int = 0  # the coloured vertex used by an augmentation


class Arc(NamedTuple):
    step: int
    square: int
    circle: int
    used: bool


class HamiltonCheck(NamedTuple):
    ok: bool
    cycle: list | None

    def __bool__(self):
        return self.ok


class DegreeBuckets:
    """Vertices bucketed by a small non-negative key, O(1) moves.

    Keeps a lazily advanced pointer to the smallest non-empty bucket.
    """

    def __init__(self, n):
        self.key = [-1] * (n + 1)
        self.pos = [0] * (n + 1)
        self.buckets = [[]]
        self.lo = 0

    def add(self, v, k):
        while len(self.buckets) <= k:
            self.buckets.append([])
        b = self.buckets[k]
        self.key[v] = k
        self.pos[v] = len(b)
        b.append(v)
        if k < self.lo:
            self.lo = k

    def remove(self, v):
        k = self.key[v]
        b = self.buckets[k]
        i = self.pos[v]
        last = b.pop()
        if last != v:
            b[i] = last
            self.pos[last] = i
        self.key[v] = -1

    def move(self, v, k):
        self.remove(v)
        self.add(v, k)

    def size(self, k):
        return len(self.buckets[k]) if k < len(self.buckets) else 0

    def min_key(self):
        """Smallest key with a non-empty bucket, or None when empty."""
        buckets = self.buckets
        while self.lo < len(buckets) and not buckets[self.lo]:
            self.lo += 1
        return self.lo if self.lo < len(buckets) else None

    def sample_min(self, rng):
        b = self.buckets[self.min_key()]
        return b[rng.randrange(len(b))]

    def members(self, k):
        return list(self.buckets[k]) if k < len(self.buckets) else []


class ProcessState:
    """Mutable state of one run. Confined to a single thread."""

    __slots__ = (
        "n", "seed", "rng", "mode", "step",
        "squares", "circles",
        "on_path", "left", "right", "rarc", "head", "tail", "length",
        "unsat", "upos",
        "color", "out", "incoming", "class_count", "n_colored",
        "fstate", "qheap", "eheap", "qsize", "_pending",
        "k1", "k2", "C", "buckets", "closing",
    )

    # colour class counts under their usual names
    @property
    def L1(self):
        return self.class_count[ONE_RED]

    @property
    def L2(self):
        return self.class_count[TWO_RED]

    @property
    def B(self):
        return self.class_count[BLUE]

    @property
    def R(self):
        return self.class_count[RED]

    @property
    def M(self):
        return self.class_count[MAGENTA]

    @property
    def L(self):
        return self.n_colored

    @property
    def X(self):
        return self.length

    @property
    def unsaturated_count(self):
        return len(self.unsat)

    @property
    def permissible(self):
        return {v for v in range(1, self.n + 1) if self.fstate[v] == _IN_Q}

    def D(self, j):
        """Number of unsaturated vertices with blue degree ``j``."""
        return self.buckets.size(j) if self.mode is Mode.GREEDY else 0

    def path(self):
        out, v = [], self.head
        while v:
            out.append(v)
            v = self.right[v]
        return out

    def partners(self, x):
        """Coloured-arc records of ``x`` as (partner, hue) pairs."""
        return [(rec[1], rec[2]) for rec in self.out[x]]


def new_process(n, seed=0, mode=Mode.RANDOMIZED):
    """Empty graph on ``[n]`` with a deterministic generator."""
    if not isinstance(n, int) or n < 3:
        raise InvalidConfiguration(f"n must be an integer >= 3, got {n!r}")
    mode = Mode(mode)
    st = ProcessState()
    st.n = n
    st.seed = seed
    st.rng = random.Random(seed)
    st.mode = mode
    st.step = 0
    st.squares = []
    st.circles = []
    st.on_path = bytearray(n + 1)
    st.left = [0] * (n + 1)
    st.right = [0] * (n + 1)
    st.rarc = [-1] * (n + 1)
    st.head = st.tail = 0
    st.length = 0
    st.unsat = list(range(1, n + 1))
    st.upos = [0] + list(range(n))
    st.color = bytearray(n + 1)
    st.out = [[] for _ in range(n + 1)]
    st.incoming = [[] for _ in range(n + 1)]
    st.class_count = [0] * 6
    st.n_colored = 0
    st.fstate = bytearray(n + 1)
    st.qheap = []
    st.eheap = []
    st.qsize = 0
    st._pending = []
    st.k1 = [0] * (n + 1)
    st.k2 = [0] * (n + 1)
    st.C = {}
    st.buckets = None
    st.closing = None
    _init_mode_extras(st)
    return st


def _init_mode_extras(st):
    st.C = {}
    st.buckets = None
    if st.mode is Mode.RANDOMIZED:
        return
    st.buckets = DegreeBuckets(st.n)
    for v in st.unsat:
        st.k1[v] = st.k2[v] = 0
        st.buckets.add(v, 0)
    if st.mode is Mode.GREEDY and st.unsat:
        st.C[(0, 0)] = len(st.unsat)


# ---------------------------------------------------------------- draws


def uniform_draw(rng, n):
    """Uniform integer of ``[1, n]``; randrange rejects, so there is no bias."""
    return rng.randrange(n) + 1 if n > 1 else 1


def uniform_vertex(st):
    return st.rng.randrange(st.n) + 1


def draw_square(st):
    return uniform_vertex(st)


def uniform_unsaturated(st):
    return st.unsat[st.rng.randrange(len(st.unsat))]


def add_arc(st, u, v):
    """Append arc (u, v) to the log and return its index (step - 1)."""
    st.squares.append(u)
    st.circles.append(v)
    st.step += 1
    return st.step - 1


# ---------------------------------------------------------------- moves


def extend_path(st, u):
    """Attach unsaturated ``u`` at the head of the path."""
    if st.on_path[u]:
        raise PreconditionViolation(f"extend_path: vertex {u} is saturated")
    h = st.head
    if not h:
        v = uniform_vertex(st)
        add_arc(st, u, v)
        st.on_path[u] = 1
        st.head = st.tail = u
        st.length = 1
        _absorb(st, u)
        _touch(st, u)
        _settle(st)
        return StepOutcome("extend", u, v)
    idx = add_arc(st, u, h)
    st.on_path[u] = 1
    st.left[u] = 0
    st.right[u] = h
    st.left[h] = u
    st.rarc[u] = idx
    st.head = u
    st.length += 1
    _absorb(st, u)
    _touch(st, u)
    _settle(st)
    return StepOutcome("extend", u, h)


def augment_path(st, u, x=None):
    """Replace path edge u-x by u-r, r-x where x-r is a coloured arc.

    Greedy mode prefers the blue arc of ``x``; otherwise the first stored
    arc is used.
    """
    if not st.on_path[u]:
        raise PreconditionViolation(f"augment_path: {u} is not on the path")
    if x is None:
        x = colored_neighbor(st, u)
    if not x or not st.color[x] or (st.left[u] != x and st.right[u] != x):
        raise PreconditionViolation(f"augment_path: no coloured neighbour {x} of {u}")
    recs = st.out[x]
    rec = recs[0]
    if st.mode is Mode.GREEDY:
        for cand in recs:
            if cand[2] == HUE_BLUE:
                rec = cand
                break
    r = rec[1]
    idx = add_arc(st, u, r)
    recs.remove(rec)
    st.incoming[r].remove(rec)
    if st.right[u] == x:
        st.right[u] = r
        st.left[r] = u
        st.right[r] = x
        st.left[x] = r
        st.rarc[u] = idx
        st.rarc[r] = rec[3]
    else:
        st.right[x] = r
        st.left[r] = x
        st.right[r] = u
        st.left[u] = r
        st.rarc[x] = rec[3]
        st.rarc[r] = idx
    st.on_path[r] = 1
    st.length += 1
    _reclass(st, x)
    _absorb(st, r)
    _touch(st, r, 3)
    _settle(st)
    return StepOutcome("augment", u, r, x)


def color_arc(st, u, v, hue):
    """Record arc (u, v) and colour it; ``u`` changes colour class."""
    if not st.on_path[u] or st.on_path[v]:
        raise PreconditionViolation(f"color_arc: need path vertex and unsaturated ({u}, {v})")
    old = st.color[u]
    mode = st.mode
    new = None
    if mode is Mode.RANDOMIZED and hue == HUE_RED:
        if old == UNCOLORED and st.fstate[u] == _IN_Q:
            new = ONE_RED
        elif old == ONE_RED:
            new = TWO_RED
    elif mode is Mode.GREEDY:
        if hue == HUE_BLUE:
            if old == UNCOLORED and st.fstate[u] == _IN_Q:
                new = BLUE
            elif old == RED:
                new = MAGENTA
        elif hue == HUE_RED and old == BLUE:
            new = MAGENTA
    elif mode is Mode.PLAIN and hue == HUE_RED and old == UNCOLORED:
        new = RED
    if new is None:
        raise PreconditionViolation(
            f"color_arc: cannot colour {hue} from {CLASS_NAMES[old]} in {mode.value} mode")
    idx = add_arc(st, u, v)
    rec = (u, v, hue, idx)
    if mode is Mode.GREEDY:
        if hue == HUE_BLUE:
            _retype(st, v, 1, 0) if new == BLUE else _retype(st, v, 0, 1)
        else:
            _retype(st, _blue_partner(st, u), -1, 1)
    st.out[u].append(rec)
    st.incoming[v].append(rec)
    if mode is Mode.PLAIN:
        st.buckets.move(v, len(st.incoming[v]))
    _set_class(st, u, new)
    _settle(st)
    return StepOutcome("color", u, v)


def pass_round(st, u):
    """Record a discarded arc with a uniform circle."""
    v = uniform_vertex(st)
    add_arc(st, u, v)
    return StepOutcome("pass", u, v)


def colored_neighbor(st, u):
    """The coloured path neighbour of ``u`` (left first), or 0."""
    left = st.left[u]
    if left and st.color[left]:
        return left
    right = st.right[u]
    if right and st.color[right]:
        return right
    return 0


def classify_square(st, u):
    """Which branch a square on ``u`` falls into, as (Case, pivot)."""
    if not st.on_path[u]:
        return Case.UNSATURATED, 0
    x = colored_neighbor(st, u)
    if x:
        return Case.ADJACENT, x
    c = st.color[u]
    mode = st.mode
    if mode is Mode.RANDOMIZED:
        if c == ONE_RED:
            return Case.COLORED_ONE_RED, 0
        if c == UNCOLORED and st.fstate[u] == _IN_Q:
            return Case.PERMISSIBLE, 0
    elif mode is Mode.GREEDY:
        if c == UNCOLORED:
            if st.fstate[u] == _IN_Q:
                return Case.PERMISSIBLE, 0
        elif c == RED:
            return Case.COLORED_RED, 0
        elif c == BLUE:
            return Case.COLORED_BLUE, 0
    else:
        if c == UNCOLORED:
            return Case.PERMISSIBLE, 0
        return Case.COLORED_RED, 0
    return Case.PASS, 0


def reset_colors(st, mode=None):
    """Uncolour every arc and optionally switch colour mode."""
    if mode is not None:
        st.mode = Mode(mode)
    for v in range(1, st.n + 1):
        st.out[v] = []
        st.incoming[v] = []
    st.color = bytearray(st.n + 1)
    st.class_count = [0] * 6
    st.n_colored = 0
    _init_mode_extras(st)
    st.fstate = bytearray(st.n + 1)
    st.qheap = []
    st.eheap = []
    st.qsize = 0
    st._pending = []
    if st.mode is not Mode.PLAIN:
        for v in st.path():
            st.fstate[v] = _IN_E
            st.eheap.append(v)
        heapq.heapify(st.eheap)
        _rebalance(st)


def close_cycle(st, x, arc_xv, arc_uy):
    """Mark the path closed by dropping edge x-right(x) and two new arcs."""
    st.closing = (x, arc_xv, arc_uy)


def used_arc_indices(st):
    """Indices of the arcs that form the current path (or closed cycle)."""
    used = set()
    v = st.head
    while v and v != st.tail:
        used.add(st.rarc[v])
        v = st.right[v]
    if st.closing is not None:
        x, a, b = st.closing
        used.discard(st.rarc[x])
        used.update((a, b))
    return used


def arcs(st):
    used = used_arc_indices(st)
    return [Arc(i + 1, u, v, i in used)
            for i, (u, v) in enumerate(zip(st.squares, st.circles))]


# ---------------------------------------------------------------- internals


def _blue_partner(st, x):
    for rec in st.out[x]:
        if rec[2] == HUE_BLUE:
            return rec[1]
    raise PreconditionViolation(f"vertex {x} has no blue arc")


def _retype(st, w, d1, d2):
    C = st.C
    key = (st.k1[w], st.k2[w])
    left = C[key] - 1
    if left:
        C[key] = left
    else:
        del C[key]
    a = st.k1[w] = key[0] + d1
    b = st.k2[w] = key[1] + d2
    C[(a, b)] = C.get((a, b), 0) + 1
    if d1 + d2:
        st.buckets.move(w, a + b)


def _set_class(st, x, new):
    old = st.color[x]
    if old == new:
        return
    if old:
        st.class_count[old] -= 1
    if new:
        st.class_count[new] += 1
    st.color[x] = new
    if not old or not new:
        st.n_colored += 1 if new else -1
        if st.mode is not Mode.PLAIN:
            st._pending.append((x, 2))


def _reclass(st, x):
    recs = st.out[x]
    mode = st.mode
    if mode is Mode.RANDOMIZED:
        new = (UNCOLORED, ONE_RED, TWO_RED)[len(recs)]
    elif mode is Mode.GREEDY:
        blue = red = False
        for rec in recs:
            if rec[2] == HUE_BLUE:
                blue = True
            else:
                red = True
        new = MAGENTA if blue and red else BLUE if blue else RED if red else UNCOLORED
        if st.color[x] == MAGENTA and new == BLUE:
            _retype(st, _blue_partner(st, x), 1, -1)
    else:
        new = RED if recs else UNCOLORED
    _set_class(st, x, new)


def _absorb(st, v):
    """``v`` has joined the path: drop it from U and uncolour arcs into it."""
    i = st.upos[v]
    last = st.unsat.pop()
    if last != v:
        st.unsat[i] = last
        st.upos[last] = i
    if st.mode is Mode.GREEDY:
        key = (st.k1[v], st.k2[v])
        left = st.C[key] - 1
        if left:
            st.C[key] = left
        else:
            del st.C[key]
    if st.buckets is not None:
        st.buckets.remove(v)
    recs = st.incoming[v]
    if not recs:
        return
    st.incoming[v] = []
    affected = []
    for rec in recs:
        x = rec[0]
        st.out[x].remove(rec)
        if x not in affected:
            affected.append(x)
    for x in affected:
        _reclass(st, x)


def _touch(st, v, radius=2):
    if st.mode is not Mode.PLAIN:
        st._pending.append((v, radius))


def _far(st, v):
    """True when no coloured vertex lies within path distance 2 of ``v``."""
    color, left, right = st.color, st.left, st.right
    if color[v]:
        return False
    a = left[v]
    if a and (color[a] or color[left[a]]):
        return False
    b = right[v]
    if b and (color[b] or color[right[b]]):
        return False
    return True


def _refresh(st, v):
    far = st.on_path[v] and _far(st, v)
    s = st.fstate[v]
    if far:
        if s == _OUT:
            st.fstate[v] = _IN_E
            heapq.heappush(st.eheap, v)
    elif s != _OUT:
        if s == _IN_Q:
            st.qsize -= 1
        st.fstate[v] = _OUT


def _settle(st):
    """Refresh F around touched vertices, then resize Q to X - 5L."""
    if st.mode is Mode.PLAIN:
        return
    pending = st._pending
    if pending:
        left, right = st.left, st.right
        for v, radius in pending:
            _refresh(st, v)
            a = b = v
            for _ in range(radius):
                a = left[a] if a else 0
                b = right[b] if b else 0
                if a:
                    _refresh(st, a)
                if b:
                    _refresh(st, b)
        pending.clear()
    _rebalance(st)


def _rebalance(st):
    target = max(0, st.length - 5 * st.n_colored)
    fstate = st.fstate
    qheap, eheap = st.qheap, st.eheap
    while st.qsize > target:
        v = -heapq.heappop(qheap)
        if fstate[v] == _IN_Q:
            fstate[v] = _IN_E
            heapq.heappush(eheap, v)
            st.qsize -= 1
    while st.qsize < target:
        v = heapq.heappop(eheap)
        if fstate[v] == _IN_E:
            fstate[v] = _IN_Q
            heapq.heappush(qheap, -v)
            st.qsize += 1
    if len(qheap) + len(eheap) > 4 * st.n + 64:
        st.qheap = [-v for v in range(1, st.n + 1) if fstate[v] == _IN_Q]
        st.eheap = [v for v in range(1, st.n + 1) if fstate[v] == _IN_E]
        heapq.heapify(st.qheap)
        heapq.heapify(st.eheap)


# ---------------------------------------------------------------- audit


def audit(st):
    """Walk the whole state and return a list of violated invariants."""
    bad = []
    n = st.n
    # path links
    seen = []
    v, prev = st.head, 0
    while v and len(seen) <= n:
        if st.left[v] != prev:
            bad.append(f"left link of {v} is {st.left[v]}, expected {prev}")
        seen.append(v)
        prev, v = v, st.right[v]
    if prev != st.tail:
        bad.append(f"tail {st.tail} but walk ends at {prev}")
    if len(seen) != st.length or len(set(seen)) != len(seen):
        bad.append(f"path walk visits {len(seen)} vertices, length {st.length}")
    on = {u for u in range(1, n + 1) if st.on_path[u]}
    if on != set(seen):
        bad.append("on_path flags disagree with the linked path")
    for a, b in zip(seen, seen[1:]):
        i = st.rarc[a]
        if not 0 <= i < st.step or {st.squares[i], st.circles[i]} != {a, b}:
            bad.append(f"path edge {a}-{b} is not backed by its arc")
    # unsaturated list
    if sorted(st.unsat) != sorted(set(range(1, n + 1)) - on):
        bad.append("unsaturated list disagrees with the path")
    for i, u in enumerate(st.unsat):
        if st.upos[u] != i:
            bad.append(f"position index of {u} is stale")
    if len(st.squares) != st.step or len(st.circles) != st.step:
        bad.append("arc log length differs from step count")
    # colour records
    counts = [0] * 6
    incoming = {}
    for x in range(1, n + 1):
        recs = st.out[x]
        c = st.color[x]
        if recs and not st.on_path[x]:
            bad.append(f"unsaturated {x} holds coloured arcs")
        if len(recs) > 2:
            bad.append(f"{x} holds {len(recs)} coloured arcs")
        hues = sorted(rec[2] for rec in recs)
        if st.mode is Mode.RANDOMIZED:
            want = (UNCOLORED, ONE_RED, TWO_RED)[min(len(recs), 2)]
            if any(h != HUE_RED for h in hues):
                bad.append(f"{x} holds a blue arc in randomized mode")
        elif st.mode is Mode.GREEDY:
            want = {(): UNCOLORED, (HUE_BLUE,): BLUE, (HUE_RED,): RED,
                    (HUE_BLUE, HUE_RED): MAGENTA}.get(tuple(hues), -1)
        else:
            want = RED if hues == [HUE_RED] else UNCOLORED if not hues else -1
        if c != want:
            bad.append(f"{x} has class {c} but records {hues}")
        if c:
            counts[c] += 1
        for rec in recs:
            if rec[0] != x or st.on_path[rec[1]]:
                bad.append(f"record {rec} of {x} has a saturated partner")
            if st.squares[rec[3]] != x or st.circles[rec[3]] != rec[1]:
                bad.append(f"record {rec} does not match its arc")
            incoming.setdefault(rec[1], []).append(rec)
    for v in range(1, n + 1):
        if sorted(st.incoming[v], key=lambda r: r[3]) != sorted(incoming.get(v, []), key=lambda r: r[3]):
            bad.append(f"incoming list of {v} is stale")
    if counts[1:] != st.class_count[1:]:
        bad.append(f"class counts {st.class_count} != {counts}")
    if st.n_colored != sum(counts):
        bad.append("coloured total is stale")
    if st.mode is not Mode.PLAIN:
        bad.extend(_audit_spacing(st, seen))
    if st.mode is Mode.GREEDY:
        bad.extend(_audit_types(st))
    if st.mode is Mode.PLAIN and st.buckets is not None:
        for u in st.unsat:
            if st.buckets.key[u] != len(st.incoming[u]):
                bad.append(f"red count bucket of {u} is stale")
    return bad


def _audit_spacing(st, seen):
    bad = []
    index = {v: i for i, v in enumerate(seen)}
    colored = [index[v] for v in seen if st.color[v]]
    for a, b in zip(colored, colored[1:]):
        if b - a < 3:
            bad.append(f"coloured vertices {seen[a]}, {seen[b]} at distance {b - a}")
    far = set()
    j = 0
    for i, v in enumerate(seen):
        while j < len(colored) and colored[j] < i - 2:
            j += 1
        if j == len(colored) or colored[j] > i + 2:
            far.add(v)
    q = {v for v in seen if st.fstate[v] == _IN_Q}
    e = {v for v in seen if st.fstate[v] == _IN_E}
    if q | e != far or q & e:
        bad.append("far-set bookkeeping is stale")
    if len(q) != st.qsize:
        bad.append(f"permissible size {st.qsize} but {len(q)} flagged")
    target = max(0, st.length - 5 * st.n_colored)
    if len(q) != target:
        bad.append(f"|Q| = {len(q)} but X - 5L = {target}")
    if not st.n_colored and q != set(seen):
        bad.append("without colour every path vertex must be permissible")
    return bad


def _audit_types(st):
    bad = []
    k1 = {u: 0 for u in st.unsat}
    k2 = dict(k1)
    for x in range(1, st.n + 1):
        for rec in st.out[x]:
            if rec[2] == HUE_BLUE:
                if st.color[x] == BLUE:
                    k1[rec[1]] += 1
                else:
                    k2[rec[1]] += 1
    C = {}
    for u in st.unsat:
        if (st.k1[u], st.k2[u]) != (k1[u], k2[u]):
            bad.append(f"type of {u} is stale")
        C[(k1[u], k2[u])] = C.get((k1[u], k2[u]), 0) + 1
        if st.buckets.key[u] != k1[u] + k2[u]:
            bad.append(f"blue degree bucket of {u} is stale")
    if C != st.C:
        bad.append(f"type counters {st.C} != {C}")
    return bad


# ---------------------------------------------------------------- certificate


def is_hamiltonian_cycle(arc_list: Iterable, n: int) -> HamiltonCheck:
    """Decide whether the used arcs contain a cycle through all of ``[n]``.

    Accepts Arc records (only ``used`` ones count) or plain vertex pairs.
    Parallel arcs and loops are ignored. Works from the arc multiset
    alone, never from engine path links.
    """
    adj = {v: set() for v in range(1, n + 1)}
    for a in arc_list:
        if isinstance(a, Arc):
            if not a.used:
                continue
            u, v = a.square, a.circle
        else:
            u, v = a
        if u != v and u in adj and v in adj:
            adj[u].add(v)
            adj[v].add(u)
    if n < 3 or any(len(s) < 2 for s in adj.values()):
        return HamiltonCheck(False, None)
    if all(len(s) == 2 for s in adj.values()):
        cycle, prev, v = [1], 0, 1
        while True:
            a, b = adj[v]
            nxt = b if a == prev else a
            if nxt == 1:
                break
            cycle.append(nxt)
            prev, v = v, nxt
        ok = len(cycle) == n
        return HamiltonCheck(ok, cycle if ok else None)
    if n <= 20:
        return _held_karp(adj, n)
    return _backtrack(adj, n)


def _held_karp(adj, n):
    # reach[mask] bit j set: a path 1 -> ... -> j+2 covers mask (vertex k ~ bit k-2)
    m = n - 1
    full = (1 << m) - 1
    reach = [0] * (1 << m)
    for v in adj[1]:
        reach[1 << (v - 2)] |= 1 << (v - 2)
    nbr = [0] * m
    for v in range(2, n + 1):
        for w in adj[v]:
            if w != 1:
                nbr[v - 2] |= 1 << (w - 2)
    for mask in range(1, full + 1):
        ends = reach[mask]
        while ends:
            low = ends & -ends
            j = low.bit_length() - 1
            ends ^= low
            ext = nbr[j] & ~mask
            while ext:
                lb = ext & -ext
                reach[mask | lb] |= lb
                ext ^= lb
    closers = 0
    for v in adj[1]:
        closers |= 1 << (v - 2)
    last = reach[full] & closers
    if not last:
        return HamiltonCheck(False, None)
    # walk back to recover one cycle
    j = (last & -last).bit_length() - 1
    mask, order = full, []
    while True:
        order.append(j + 2)
        prev_mask = mask ^ (1 << j)
        if not prev_mask:
            break
        cand = reach[prev_mask] & nbr[j]
        j = (cand & -cand).bit_length() - 1
        mask = prev_mask
    return HamiltonCheck(True, [1] + order[::-1])


def _backtrack(adj, n):
    path = [1]
    onp = {1}

    def go(v):
        if len(path) == n:
            return 1 in adj[v]
        for w in sorted(adj[v]):
            if w not in onp:
                path.append(w)
                onp.add(w)
                if go(w):
                    return True
                path.pop()
                onp.discard(w)
        return False

    ok = go(1)
    return HamiltonCheck(ok, list(path) if ok else None)

