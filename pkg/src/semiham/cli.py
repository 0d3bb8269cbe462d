"""Command-line entry point: simulate, ode, bound, verify."""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import engine as eng
from . import harness as hn
from . import lowerbound as lb
from . import ode
from .errors import CleanupFailed, SemihamError
from .strategy import StrategyConfig, run_three_stage

EXIT_OK, EXIT_THRESHOLD, EXIT_CLEANUP, EXIT_CONFIG = 0, 2, 3, 4


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _cutoff(text):
    return int(text) if text.isdigit() else text


def _fmt(path):
    return "json" if str(path).endswith(".json") else "csv"


def _emit(doc):
    print(json.dumps(doc, indent=1, sort_keys=True))


def build_parser():
    p = _Parser(prog="semiham", description="Semi-random Hamiltonian cycle experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run the process, possibly with replicas")
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--strategy", choices=hn.STRATEGIES, default="three_stage")
    s.add_argument("--N", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--replicas", type=int, default=1)
    s.add_argument("--record-every", type=int, default=0)
    s.add_argument("--cutoff", type=_cutoff, default=1)
    s.add_argument("--horizon", type=float, default=1.0,
                   help="steps / n for the uniform baseline")
    s.add_argument("--expect", type=float, nargs=2, metavar=("LO", "HI"),
                   help="exit 2 unless the mean steps/n lies in [LO, HI]")
    s.add_argument("--config", help="JSON config written by --dump-config; overrides flags")
    s.add_argument("--dump-config", help="write the effective config as JSON")
    s.add_argument("--out", help="CSV (checkpoints) or .json (full summary)")

    o = sub.add_parser("ode", help="integrate the fluid-limit systems")
    o.add_argument("--system", choices=("randomized", "chain"), default="randomized")
    o.add_argument("--N", type=int, default=0)
    o.add_argument("--margin", type=float, default=1e-6)
    o.add_argument("--step", type=float, default=ode.DEFAULT_STEP)
    o.add_argument("--sample-every", type=int, default=100)
    o.add_argument("--alpha", action="store_true", help="also report the margin sweep")
    o.add_argument("--out")

    b = sub.add_parser("bound", help="lower-bound function and structure counts")
    g = b.add_mutually_exclusive_group(required=True)
    g.add_argument("--beta", action="store_true")
    g.add_argument("--f", type=float, metavar="S")
    g.add_argument("--structures", action="store_true")
    b.add_argument("--n", type=int, default=10_000)
    b.add_argument("--t-over-n", type=float, default=1.0)
    b.add_argument("--replicas", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")

    v = sub.add_parser("verify", help="audit every invariant after every step")
    v.add_argument("--invariants", action="store_true", required=True)
    v.add_argument("--n", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--N", type=int, default=3)
    return p


def _simulate(a):
    if a.config:
        with open(a.config) as fh:
            doc = json.load(fh)
        replicas = doc.pop("replicas", 1)
        cfg = hn.RunConfig.from_dict(doc)
    else:
        replicas = a.replicas
        cfg = hn.RunConfig(n=a.n, seed=a.seed, strategy=a.strategy, N=a.N,
                           record_every=a.record_every, stage2_cutoff=a.cutoff,
                           horizon=a.horizon)
    if a.dump_config:
        with open(a.dump_config, "w") as fh:
            json.dump({**cfg.to_dict(), "replicas": replicas}, fh, indent=1, sort_keys=True)
    mc = hn.monte_carlo(cfg, replicas)
    doc = {"config": cfg.to_dict(), "replicas": replicas,
           "mean_steps_per_n": mc.mean_steps_per_n, "std_steps_per_n": mc.std_steps_per_n,
           "steps_per_n": [s.steps_per_n if s else None for s in mc.summaries],
           "hamiltonian": [s.hamiltonian if s else None for s in mc.summaries],
           "failures": mc.failures}
    if cfg.strategy == "uniform_baseline" and mc.ok:
        doc["counts_over_n"] = {k: float(np.mean([s.counts[k] for s in mc.ok])) / cfg.n
                                for k in lb.STRUCTURES}
    if a.out:
        if replicas == 1 and mc.ok:
            hn.export(mc.ok[0], _fmt(a.out), a.out)
        elif _fmt(a.out) == "json":
            hn.export({**doc, "summaries": [s.to_dict() if s else None for s in mc.summaries]},
                      "json", a.out)
        else:
            hn.export((hn.CHECKPOINT_COLUMNS, mc.checkpoint_means().tolist()), "csv", a.out)
    _emit(doc)
    if any(m.startswith("CleanupFailed") for _, m in mc.failures):
        return EXIT_CLEANUP
    if mc.failures:
        return EXIT_THRESHOLD
    if cfg.strategy != "uniform_baseline" and not all(s.hamiltonian for s in mc.ok):
        return EXIT_THRESHOLD
    if a.expect and not a.expect[0] <= mc.mean_steps_per_n <= a.expect[1]:
        return EXIT_THRESHOLD
    return EXIT_OK


def _ode(a):
    if a.system == "chain":
        chain = ode.compute_sigma_chain(a.N, a.step, record=True, sample_every=a.sample_every)
        traj = hn.chain_trajectory(a.N, chain=chain)
        doc = {"system": "chain", "N": a.N, "sigma": chain.sigma, "x": chain.x, "r": chain.r}
    else:
        chain = ode.compute_sigma_chain(a.N, a.step)
        traj = ode.randomized_trajectory(chain.s_end, chain.x, a.margin, a.step, a.sample_every)
        doc = {"system": "randomized", "N": a.N, "margin": a.margin, "start_s": chain.s_end,
               "start_x": chain.x, "exit_s": traj.exit_s, "exit_reason": traj.exit_reason}
    if a.alpha:
        rep = ode.alpha_star_report(a.N, step_size=a.step)
        doc["alpha_star"] = {"value": rep.value, "smallest_margin": rep.smallest_margin,
                             "margins": list(rep.margins), "exits": list(rep.exits),
                             "exit_reason": rep.exit_reason}
    if a.out:
        hn.export(traj, _fmt(a.out), a.out)
    _emit(doc)
    return EXIT_OK


def _bound(a):
    if a.beta:
        beta = lb.find_beta()
        doc = {"beta": beta, "f_minus_1": lb.eval_f(beta) - 1}
    elif a.f is not None:
        if not a.f >= 0:
            raise ConfigError("S must be non-negative")
        doc = {"s": a.f, "f": lb.eval_f(a.f)}
    else:
        cfg = hn.RunConfig(n=a.n, seed=a.seed, strategy="uniform_baseline", horizon=a.t_over_n)
        mc = hn.monte_carlo(cfg, a.replicas)
        scaled = np.array([[s.counts[k] / a.n for k in lb.STRUCTURES] for s in mc.ok])
        se = scaled.std(axis=0, ddof=1) / math.sqrt(len(scaled)) if len(scaled) > 1 else 0 * scaled[0]
        doc = {"n": a.n, "t_over_n": a.t_over_n, "replicas": a.replicas,
               "mean": dict(zip(lb.STRUCTURES, scaled.mean(axis=0).tolist())),
               "stderr": dict(zip(lb.STRUCTURES, np.asarray(se).tolist())),
               "closed_form": {k: lb.closed_form(k, a.t_over_n) for k in lb.STRUCTURES},
               "f": lb.eval_f(a.t_over_n)}
    if a.out:
        hn.export(doc, "json", a.out)
    _emit(doc)
    return EXIT_OK


def _verify(a):
    found = []

    def hook(st, stage, tracker):
        for msg in eng.audit(st):
            found.append(f"step {st.step} stage {stage}: {msg}")

    res = run_three_stage(StrategyConfig(N=a.N), a.n, a.seed, hook=hook)
    if not res.hamiltonian:
        found.append("final arc set has no Hamiltonian cycle")
    _emit({"n": a.n, "seed": a.seed, "N": a.N, "steps": res.total_steps,
           "violations": len(found), "first": found[:20]})
    return EXIT_THRESHOLD if found else EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return {"simulate": _simulate, "ode": _ode, "bound": _bound,
                "verify": _verify}[args.command](args)
    except CleanupFailed as exc:
        print(f"clean-up failed: {exc}", file=sys.stderr)
        return EXIT_CLEANUP
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SemihamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_THRESHOLD
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
