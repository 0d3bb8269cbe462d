"""Run configuration, Monte Carlo replication, ODE comparison and export."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import lowerbound as lb
from . import ode
from .errors import CleanupFailed, InvalidConfiguration, SemihamError
from .strategy import StrategyConfig, run_three_stage

STRATEGIES = ("three_stage", "fully_randomized", "degree_greedy", "uniform_baseline")
CHECKPOINT_COLUMNS = ("s", "stage", "x", "l1", "l2", "b", "r", "m", "phase", "d")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one run.

    ``fully_randomized`` is the three-stage player with no greedy phase.
    ``degree_greedy`` keeps the greedy rule until the cutoff, whatever N.
    ``uniform_baseline`` draws uniform circles for ``horizon * n`` steps
    and only records a history for the structure counts.
    """

    n: int
    seed: int = 0
    strategy: str = "three_stage"
    N: int = 100
    record_every: int = 0  # 0 means max(1, n // 1000)
    stage2_cutoff: int | str = 1
    safety_multiplier: float = 20.0
    horizon: float = 1.0

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 3:
            raise InvalidConfiguration(f"n must be an integer >= 3, got {self.n!r}")
        if self.strategy not in STRATEGIES:
            raise InvalidConfiguration(f"unknown strategy {self.strategy!r}")
        if not isinstance(self.record_every, int) or self.record_every < 0:
            raise InvalidConfiguration("record_every must be a non-negative integer")
        if not self.horizon >= 0:
            raise InvalidConfiguration("horizon must be non-negative")
        if self.record_every == 0:
            object.__setattr__(self, "record_every", max(1, self.n // 1000))
        self.strategy_config()  # validates N, cutoff and safety

    def strategy_config(self):
        N = {"fully_randomized": 0, "degree_greedy": self.n}.get(self.strategy, self.N)
        return StrategyConfig(N=N, stage2_cutoff=self.stage2_cutoff,
                              safety_multiplier=self.safety_multiplier)

    def replace(self, **kw):
        return RunConfig(**{**asdict(self), **kw})

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidConfiguration(f"unknown config keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class RunSummary:
    config: dict
    total_steps: int
    steps_per_n: float
    tau_list: list
    stage_end: list
    hamiltonian: bool
    checkpoints: list = field(default_factory=list)  # rows over CHECKPOINT_COLUMNS
    counts: dict | None = None

    @property
    def seed(self):
        return self.config["seed"]

    def table(self):
        return np.array(self.checkpoints, dtype=float).reshape(-1, len(CHECKPOINT_COLUMNS))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["checkpoints"] = [list(r) for r in d.get("checkpoints", [])]
        return cls(**d)


def _recorder(every, rows):
    def hook(st, stage, tracker):
        if st.step % every and stage != 3:
            return
        n = st.n
        q = tracker.q if stage == 1 else 0
        d = st.D(q - 1) / n if stage == 1 else 0.0
        rows.append([st.step / n, stage, st.X / n, st.L1 / n, st.L2 / n,
                     st.B / n, st.R / n, st.M / n, q, d])
    return hook


def run(config):
    """Run one replica to completion and return its summary.

    A failed clean-up raises CleanupFailed whose ``partial`` is the
    summary recorded so far.
    """
    n = config.n
    if config.strategy == "uniform_baseline":
        t = int(round(config.horizon * n))
        counts = lb.count_structures(lb.uniform_history(n, t, config.seed))
        return RunSummary(config.to_dict(), t, t / n, [0], [t, t, t], False,
                          [], asdict(counts))
    rows = [[0.0, 0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0.0]]
    hook = _recorder(config.record_every, rows)
    try:
        res = run_three_stage(config.strategy_config(), n, config.seed, hook=hook)
    except CleanupFailed as exc:
        steps = int(rows[-1][0] * n)
        exc.partial = RunSummary(config.to_dict(), steps, steps / n, [], [], False, rows)
        raise
    return RunSummary(config.to_dict(), res.total_steps, res.total_steps / n,
                      res.tau, res.stage_end, bool(res.hamiltonian), rows)


def max_workers(limit=None):
    """Concurrency cap from SEMIHAM_THREADS, else the CPU count."""
    env = os.environ.get("SEMIHAM_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise InvalidConfiguration(f"SEMIHAM_THREADS must be an integer, got {env!r}")
        if cap < 1:
            raise InvalidConfiguration("SEMIHAM_THREADS must be >= 1")
    else:
        cap = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
    return cap if limit is None else max(1, min(cap, limit))


def _run_guarded(config):
    try:
        return run(config), None
    except SemihamError as exc:
        return None, f"{type(exc).__name__}: {exc}"


@dataclass
class MonteCarloResult:
    summaries: list      # by replica index; None where the replica failed
    failures: list       # (seed, message)
    mean_steps_per_n: float
    std_steps_per_n: float

    @property
    def ok(self):
        return [s for s in self.summaries if s is not None]

    def checkpoint_means(self):
        """Mean checkpoint table over replicas, truncated to the shortest."""
        tables = [s.table() for s in self.ok]
        if not tables:
            return np.empty((0, len(CHECKPOINT_COLUMNS)))
        k = min(len(t) for t in tables)
        return np.mean([t[:k] for t in tables], axis=0)


def monte_carlo(config, replicas, workers=None):
    """Replicas with seeds seed, seed + 1, ...; results ordered by index."""
    if not isinstance(replicas, int) or replicas < 1:
        raise InvalidConfiguration("replicas must be a positive integer")
    configs = [config.replace(seed=config.seed + i) for i in range(replicas)]
    workers = max_workers(replicas) if workers is None else max(1, min(workers, replicas))
    if workers == 1:
        results = [_run_guarded(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_guarded, configs))
    summaries = [r for r, _ in results]
    failures = [(c.seed, msg) for c, (_, msg) in zip(configs, results) if msg]
    vals = np.array([s.steps_per_n for s in summaries if s is not None])
    mean = float(vals.mean()) if len(vals) else math.nan
    std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return MonteCarloResult(summaries, failures, mean, std)


# ---------------------------------------------------------------- ODE comparison


def chain_trajectory(N, step_size=ode.DEFAULT_STEP, chain=None):
    """Degree-greedy chain as a trajectory over (phase, x, r, b, m, d)."""
    if chain is None or chain.trajectory is None:
        chain = ode.compute_sigma_chain(N, step_size, record=True)
    t = chain.trajectory
    return ode.Trajectory(t[:, 0], t[:, 1:], ode.CHAIN_COLUMNS[1:], chain.s_end, "chain_end")


def compare_to_ode(summaries, trajectory):
    """Sup-norm gap between checkpoints and the ODE, averaged over replicas.

    The randomized system (x, l1, l2) pairs with stage-2 checkpoints of a
    run without greedy phases; the chain (x, r, b, m, d) pairs with
    stage-1 checkpoints; d jumps at every phase end, so it is left out.
    Only abscissae up to the trajectory's exit are compared.
    """
    if isinstance(summaries, RunSummary):
        summaries = [summaries]
    labels = tuple(trajectory.labels)
    if "l1" in labels:
        stage, names = 2, ("x", "l1", "l2")
    elif "r" in labels:
        stage, names = 1, ("x", "r", "b", "m")
    else:
        raise InvalidConfiguration(f"no checkpoint pairing for labels {labels}")
    cols = [CHECKPOINT_COLUMNS.index(v) for v in names]
    idx = [labels.index(v) for v in names]
    s_hi = trajectory.exit_s if trajectory.exit_s is not None else trajectory.s[-1]
    per = []
    for summ in summaries:
        if stage == 2 and summ.tau_list and len(summ.tau_list) > 1:
            raise InvalidConfiguration("randomized system needs a run without greedy phases")
        if summ.config.get("strategy") == "uniform_baseline":
            raise InvalidConfiguration("uniform baseline has no trajectory")
        tab = summ.table()
        keep = tab[:, 1] == stage
        if stage == 2:
            keep |= tab[:, 1] == 0  # the step-0 row is the randomized start
        tab = tab[keep & (tab[:, 0] <= s_hi)]
        if not len(tab):
            per.append({v: 0.0 for v in names})
            continue
        pred = trajectory.at(tab[:, 0])[:, idx]
        gap = np.abs(tab[:, cols] - pred).max(axis=0)
        per.append({v: float(g) for v, g in zip(names, gap)})
    return {"variables": list(names),
            "mean": {v: float(np.mean([p[v] for p in per])) for v in names},
            "max": {v: float(np.max([p[v] for p in per])) for v in names},
            "per_replica": per}


# ---------------------------------------------------------------- export

_FMT = "%.17g"


def _rows_of(obj):
    if isinstance(obj, RunSummary):
        return list(CHECKPOINT_COLUMNS), obj.checkpoints
    if isinstance(obj, ode.Trajectory):
        return ["s", *obj.labels], [[s, *y] for s, y in zip(obj.s, obj.y)]
    if isinstance(obj, lb.StructureCounts):
        return list(lb.STRUCTURES), [[getattr(obj, k) for k in lb.STRUCTURES]]
    if isinstance(obj, tuple) and len(obj) == 2:
        return list(obj[0]), obj[1]
    raise InvalidConfiguration(f"cannot export {type(obj).__name__}")


def _json_of(obj):
    if isinstance(obj, RunSummary):
        return {"kind": "run_summary", **obj.to_dict()}
    if isinstance(obj, ode.Trajectory):
        return {"kind": "trajectory", "labels": list(obj.labels), "s": obj.s.tolist(),
                "y": obj.y.tolist(), "exit_s": obj.exit_s, "exit_reason": obj.exit_reason}
    if isinstance(obj, lb.StructureCounts):
        return {"kind": "structure_counts", **asdict(obj)}
    if isinstance(obj, dict):
        return obj
    raise InvalidConfiguration(f"cannot export {type(obj).__name__}")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return _FMT % v


def export(obj, fmt, path):
    """Write ``obj`` as CSV (header, then rows) or a single JSON document."""
    if fmt not in ("csv", "json"):
        raise InvalidConfiguration(f"unknown format {fmt!r}")
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "csv":
                header, rows = _rows_of(obj)
                w = csv.writer(fh)
                w.writerow(header)
                for r in rows:
                    w.writerow([_cell(v) for v in r])
            elif fmt == "json":
                json.dump(_json_of(obj), fh, indent=1)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path):
    """Header and float table of an exported CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0] if rows else []
    body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    return header, body.reshape(-1, len(header))


def load_json(path):
    """Parse an exported JSON document back into its record type."""
    with open(path) as fh:
        d = json.load(fh)
    kind = d.pop("kind", None) if isinstance(d, dict) else None
    if kind == "run_summary":
        return RunSummary.from_dict(d)
    if kind == "trajectory":
        y = np.array(d["y"], dtype=float).reshape(-1, len(d["labels"]))
        return ode.Trajectory(np.array(d["s"], dtype=float), y, tuple(d["labels"]),
                              d["exit_s"], d["exit_reason"])
    if kind == "structure_counts":
        return lb.StructureCounts(**d)
    return d
