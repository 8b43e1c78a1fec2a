"""Command-line driver.

Every subcommand writes one table, either CSV (``--format csv``) or a JSON
document (``--format json``).  The first CSV header token is the schema id,
e.g. ``bayesmix.horizon.v1``, and that column holds the record index.
Numbers are written with ``repr`` so they round-trip exactly.

Exit codes: 0 success, 1 validation error, 2 budget exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .analysis import (
    balance_from_values,
    class_values,
    convergence_experiment,
    extract_policy_table,
    gap_bound_check,
    martingale_trace,
    pair_gain_bound_ok,
    pareto_check,
)
from .classfile import ClassFile, read_class_file
from .discount import DiscountSequence, effective_horizon
from .env import History, Percept, draw
from .errors import BudgetError, DomainError, ValidationError
from .mixture import MixtureEnv, WeightedClass, posterior_weights
from .models import MdpSpec, as_env
from .policies import BayesAgent, EteAgent, InformedAgent, Planning, RandomAgent, run_episode
from .valuation import (
    discounted_optimal_value,
    discounted_value_of_policy,
    enumerate_policies,
    node_cap,
    optimal_value,
    value_of_policy,
)

log = logging.getLogger("bayesmix")

SCHEMA = {
    "horizon": ("k", "gamma", "Gamma", "h_eff"),
    "act": ("cycle", "action", "env", "prior", "posterior", "q"),
    "value": ("target", "policy", "value", "normalization", "depth", "error_bound"),
    "simulate": ("replicate", "k", "action", "obs", "reward"),
    "pareto": ("rival", "dominates", "delta", "delta_loss", "delta_gain", "balanced_ok", "pair_bound_ok"),
    "converge": ("m", "env", "optimal", "subject", "gap", "se", "bound"),
    "posterior": ("replicate", "k", "action", "env", "posterior", "z_prev", "cond_expect", "ok"),
}


# -- parsing helpers ---------------------------------------------------------


def parse_k_range(text: str) -> list[int]:
    """``"1..5"`` or ``"1,3,8"``."""
    try:
        if ".." in text:
            a, b = text.split("..")
            return list(range(int(a), int(b) + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValidationError("k", f"bad cycle list {text!r}") from None


def parse_int_list(text: str, field: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValidationError(field, f"bad integer list {text!r}") from None


def parse_history(text: str | None) -> History:
    """``"y:obs:reward;y:obs:reward"``; empty for no history."""
    if not text:
        return History()
    pairs = []
    for i, item in enumerate(t for t in text.split(";") if t.strip()):
        parts = item.split(":")
        try:
            y, obs, r = int(parts[0]), int(parts[1]), float(parts[2])
        except (IndexError, ValueError):
            raise ValidationError(f"history[{i}]", f"expected action:obs:reward, got {item!r}") from None
        if len(parts) != 3:
            raise ValidationError(f"history[{i}]", f"expected action:obs:reward, got {item!r}")
        pairs.append((y, Percept(obs, r)))
    return History(pairs)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


def render(name: str, rows: Sequence[Sequence], fmt: str, meta: dict | None = None) -> str:
    cols = SCHEMA[name]
    schema = f"bayesmix.{name}.v1"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow((schema,) + cols)
        for i, row in enumerate(rows):
            w.writerow([str(i)] + [_fmt(v) for v in row])
        return buf.getvalue()
    doc = {
        "schema": schema,
        "meta": {k: _json_value(v) for k, v in (meta or {}).items()},
        "records": [{c: _json_value(v) for c, v in zip(cols, row)} for row in rows],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


# -- shared option handling --------------------------------------------------


def _load(args) -> tuple[ClassFile, WeightedClass]:
    if not args.class_file:
        raise ValidationError("class", "--class is required")
    cf = read_class_file(args.class_file)
    return cf, cf.to_class()


def _planning(args) -> Planning:
    if args.discount:
        if args.horizon is not None:
            raise ValidationError("discount", "give either --horizon or --discount, not both")
        if args.eps <= 0:
            raise ValidationError("eps", f"must be positive, got {args.eps}")
        return Planning.discounted(DiscountSequence.parse(args.discount), args.eps)
    if args.horizon is None:
        raise ValidationError("horizon", "--horizon or --discount is required")
    if args.horizon < 1:
        raise ValidationError("horizon", f"must be >= 1, got {args.horizon}")
    return Planning.finite(args.horizon)


def _env_index(args, cls: WeightedClass) -> int:
    if not 0 <= args.env < len(cls):
        raise ValidationError("env", f"index {args.env} outside 0..{len(cls) - 1}")
    return args.env


def _map(fn, items, threads: int) -> list:
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _tree_size(env_branching: int, depth: int) -> int:
    return sum(env_branching**j for j in range(1, depth + 1))


# -- subcommands -------------------------------------------------------------


def cmd_horizon(args):
    if not args.discount:
        raise ValidationError("discount", "--discount is required")
    d = DiscountSequence.parse(args.discount)
    rows = []
    for k in parse_k_range(args.k):
        if k < 1:
            raise ValidationError("k", f"cycles start at 1, got {k}")
        g = d.tail(k)
        rows.append((k, d.gamma(k), g, effective_horizon(d, k) if g > 0 else "undefined"))
    return rows, {"discount": str(d)}


def cmd_act(args):
    _, cls = _load(args)
    planning = _planning(args)
    h = parse_history(args.history)
    for i, (y, x) in enumerate(h):
        if not 0 <= y < cls.n_actions:
            raise ValidationError(f"history[{i}]", f"action {y} outside 0..{cls.n_actions - 1}")
        if x not in cls.percepts:
            raise ValidationError(f"history[{i}]", f"percept {tuple(x)} not in the class alphabet")
    if planning.horizon is not None and len(h) >= planning.horizon:
        raise ValidationError("history", f"history of length {len(h)} leaves no cycle before horizon {planning.horizon}")
    agent = BayesAgent(cls, planning)
    q = agent.q_values(h)
    action = agent.action(h)
    post = posterior_weights(cls, h)
    rows = [(len(h) + 1, action, i, w, p, q[action]) for i, (w, p) in enumerate(zip(cls.weights, post))]
    return rows, {"action": action, "q": [float(v) for v in q]}


def cmd_value(args):
    _, cls = _load(args)
    planning = _planning(args)
    mix = MixtureEnv(cls)
    targets = [("mixture", mix)] + [(f"env{i}", e) for i, e in enumerate(cls.envs)]
    if planning.horizon is not None:
        m = planning.horizon
        depth = m
    else:
        depth = planning.discount.truncation_end(1, planning.eps, cls.r_max)
    if args.policy in ("bayes", "random"):
        branching = len(cls.percepts) * (cls.n_actions if args.policy == "random" else 1)
        if _tree_size(branching, depth) > node_cap():
            raise BudgetError(f"policy evaluation tree of depth {depth} exceeds {node_cap()} nodes")
    if args.policy == "bayes":
        policy = BayesAgent(cls, planning)
    elif args.policy == "random":
        policy = RandomAgent(cls.n_actions)
    elif args.policy != "optimal":
        raise ValidationError("policy", f"unknown policy {args.policy!r}")
    rows = []
    for name, env in targets:
        if args.policy == "optimal":
            if planning.horizon is not None:
                r = optimal_value(env, 1, planning.horizon)
            else:
                r = discounted_optimal_value(env, 1, planning.discount, planning.eps)
        elif planning.horizon is not None:
            r = value_of_policy(env, policy, 1, planning.horizon)
        else:
            r = discounted_value_of_policy(env, policy, 1, planning.discount, planning.eps)
        rows.append((name, args.policy, r.value, r.normalization, r.depth, r.error_bound))
    return rows, {"planning": str(planning.discount) if planning.discount else f"finite:{planning.horizon}"}


def _agent(args, cf: ClassFile, cls: WeightedClass, true_index: int, seed: int, horizon: int):
    kind = args.agent
    if kind == "random":
        return RandomAgent(cls.n_actions)
    if kind == "bayes":
        return BayesAgent(cls, _planning(args))
    if kind == "informed":
        return InformedAgent(cls.envs[true_index], _planning(args))
    if kind == "ete":
        spec = cf.specs[true_index]
        if not isinstance(spec, MdpSpec):
            raise ValidationError("agent", "the ete agent needs an MDP environment")
        return EteAgent(spec.n_states, spec.n_actions, horizon, seed, cf.r_max, spec.initial_state)
    raise ValidationError("agent", f"unknown agent {kind!r}")


def _replicate_rng(args, r: int) -> np.random.Generator:
    # counter-based substream: (master seed, environment, replicate)
    return np.random.default_rng([args.seed, args.env, r])


def cmd_simulate(args):
    cf, cls = _load(args)
    i = _env_index(args, cls)
    n = args.cycles
    if n < 1:
        raise ValidationError("cycles", f"must be >= 1, got {n}")
    if args.agent in ("bayes", "informed"):
        p = _planning(args)
        if p.horizon is not None and p.horizon < n:
            raise ValidationError("horizon", f"horizon {p.horizon} shorter than {n} cycles")

    def one(r):
        rng = _replicate_rng(args, r)
        agent = _agent(args, cf, cls, i, int(rng.integers(2**63)), n)
        ep = run_episode(cls.envs[i], agent, n, rng)
        return [(r, k + 1, y, x.obs, x.reward) for k, (y, x) in enumerate(ep.history)]

    out = _map(one, range(args.replicates), args.threads)
    return [row for rows in out for row in rows], {"agent": args.agent, "env": i, "seed": args.seed}


def cmd_pareto(args):
    _, cls = _load(args)
    if args.horizon is None:
        raise ValidationError("horizon", "--horizon is required")
    m = args.horizon
    subject = extract_policy_table(BayesAgent(cls, Planning.finite(m)), m, cls.percepts)
    verdict = pareto_check(cls, subject, m)
    caches = [{} for _ in cls.envs]
    sv = class_values(cls, subject, m, caches)
    rows = []
    for p in enumerate_policies(cls.n_actions, len(cls.percepts), m, None, cls.percepts):
        pv = class_values(cls, p, m, caches)
        rep = balance_from_values(cls.weights, sv, pv)
        dominates = bool(np.all(pv >= sv - 1e-9) and np.any(pv > sv + 1e-9))
        rows.append((p.label, dominates, rep.total, rep.delta_loss, rep.delta_gain, rep.balanced_ok,
                     pair_gain_bound_ok(rep)))
    meta = {"verdict": "dominated" if verdict.dominated else "not dominated", "checked": len(rows)}
    return rows, meta


def cmd_converge(args):
    cf, cls = _load(args)
    grid = parse_int_list(args.m_grid or "", "m-grid")
    if not grid or min(grid) < 1:
        raise ValidationError("m-grid", "expected positive horizons")
    specs = cf.specs
    rows = []
    if args.agent in ("bayes", "informed") and all(m <= 8 for m in grid) and not args.monte_carlo:
        # exact route, with the Delta / w gap bound alongside
        for m in grid:
            if args.agent == "bayes":
                table, _ = gap_bound_check(cls, m)
                rows.extend((r.m, r.env, r.optimal, r.subject, r.gap, r.se, r.bound) for r in table.rows)
                continue
            for i, env in enumerate(cls.envs):
                v = optimal_value(env, 1, m).value / m
                rows.append((m, i, v, v, 0.0, 0.0, math.nan))
        return rows, {"agent": args.agent}

    def builder(m, i, seed):
        if args.agent == "ete":
            s = specs[i]
            if not isinstance(s, MdpSpec):
                raise ValidationError("agent", "the ete agent needs MDP environments")
            return EteAgent(s.n_states, s.n_actions, m, seed, cf.r_max, s.initial_state)
        if args.agent == "bayes":
            return BayesAgent(cls, Planning.finite(m))
        if args.agent == "informed":
            return InformedAgent(cls.envs[i], Planning.finite(m))
        return RandomAgent(cls.n_actions)

    table = convergence_experiment(specs, grid, builder, args.replicates, args.seed, args.threads,
                                   exact=not args.monte_carlo)
    rows = [(r.m, r.env, r.optimal, r.subject, r.gap, r.se, r.bound) for r in table.rows]
    return rows, {"agent": args.agent, "replicates": args.replicates, "seed": args.seed}


def cmd_posterior(args):
    cf, cls = _load(args)
    i = _env_index(args, cls)
    n = args.cycles

    def one(r):
        rng = _replicate_rng(args, r)
        agent = _agent(args, cf, cls, i, int(rng.integers(2**63)), n)
        trace = martingale_trace(cls, i, agent, n, rng)
        return [(r, s.k, s.action, j, float(s.posterior[j]), s.z_prev, s.cond_expect, s.ok)
                for s in trace.steps for j in range(len(cls))]

    out = _map(one, range(args.replicates), args.threads)
    return [row for rows in out for row in rows], {"agent": args.agent, "env": i, "seed": args.seed}


COMMANDS = {
    "horizon": cmd_horizon,
    "act": cmd_act,
    "value": cmd_value,
    "simulate": cmd_simulate,
    "pareto": cmd_pareto,
    "converge": cmd_converge,
    "posterior": cmd_posterior,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bayesmix", description="Bayes-mixture agents over environment classes.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--class", dest="class_file", help="environment-class JSON file")
        p.add_argument("--horizon", type=int, default=None)
        p.add_argument("--m-grid", default=None, help="comma-separated horizons")
        p.add_argument("--discount", default=None, help="finite:m | geometric:g | quadratic")
        p.add_argument("--eps", type=float, default=0.01, help="discount truncation tolerance")
        p.add_argument("--k", default="1..10", help="cycles, '1..5' or '1,2,8'")
        p.add_argument("--history", default=None, help="'action:obs:reward;...'")
        p.add_argument("--env", type=int, default=0, help="true environment index")
        p.add_argument("--agent", default="bayes", choices=("bayes", "informed", "random", "ete"))
        p.add_argument("--policy", default="optimal", choices=("optimal", "bayes", "random"))
        p.add_argument("--cycles", type=int, default=20)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--replicates", type=int, default=1)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--monte-carlo", action="store_true", help="force simulation in converge")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", default=None, help="output path (default stdout)")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.replicates < 1:
            raise ValidationError("replicates", f"must be >= 1, got {args.replicates}")
        rows, meta = COMMANDS[args.command](args)
    except BudgetError as e:
        print(f"bayesmix: budget exceeded: {e}", file=sys.stderr)
        return 2
    except (ValidationError, DomainError, ValueError) as e:
        print(f"bayesmix: {e}", file=sys.stderr)
        return 1
    text = render(args.command, rows, args.format, meta)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
