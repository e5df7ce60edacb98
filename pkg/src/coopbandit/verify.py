"""Numerical certification of the math the learner relies on.

Every guarantee the package leans on — the coverage inequality that controls
the second moment of the importance-weighted estimates, its single-graph
specializations, the unbiasedness of the estimates themselves, and the regret
bound — is checked here on concrete instances.  Each check reimplements its
inequality with plain loops and nothing shared with the engines, so a bug in
the optimized code cannot hide inside its own verifier.

The inequalities are theorems: a single failure on a valid instance means an
implementation bug somewhere, never "an unlucky instance".
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from typing import NamedTuple

import numpy as np

from .graphs import (
    Graph,
    gen_clique,
    gen_cycle,
    gen_edgeless,
    gen_erdos_renyi,
    independence_number,
    neighborhood,
    power,
    strong_product,
)
from .rng import substream
from .simulator import FixedEta, SimConfig

__all__ = [
    "LemmaInstance",
    "CheckResult",
    "lemma1_check",
    "lemma3_check",
    "lemma4_check",
    "lemma6_check",
    "unbiasedness_oracle",
    "unbiasedness_battery",
    "theorem1_bound",
    "vanilla_exp3_trajectory",
    "random_lemma1_instance",
    "random_lemma3_instance",
    "random_lemma4_instance",
    "random_lemma6_instance",
    "SuiteResult",
    "run_verification_suites",
    "render_report",
    "write_report_csv",
]

TOLERANCE = 1e-9

# e/(e-1) and 1/(1-e^{-1}) are the same number; one canonical spelling keeps
# every check comparing against identical bits
_AMPLIFIER = 1.0 / (1.0 - math.exp(-1.0))


class CheckResult(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


@dataclasses.dataclass(frozen=True)
class LemmaInstance:
    """One concrete instance of the coverage inequality's hypotheses:
    two graphs with radii, activation probabilities in (0, 1], and a strictly
    positive play distribution per agent."""

    net_graph: Graph
    feed_graph: Graph
    n: int
    f: int
    q: np.ndarray
    p: np.ndarray  # (agents, arms); row v is agent v's distribution

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        A, K = self.net_graph.vertex_count, self.feed_graph.vertex_count
        if self.n < 0 or self.f < 0:
            raise ValueError(f"radii must be nonnegative, got n={self.n}, f={self.f}")
        if q.shape != (A,):
            raise ValueError(f"q has shape {q.shape}, expected ({A},)")
        if p.shape != (A, K):
            raise ValueError(f"p has shape {p.shape}, expected ({A}, {K})")
        if q.min() <= 0.0 or q.max() > 1.0:
            raise ValueError("activation probabilities must lie in (0, 1]")
        if p.min() <= 0.0:
            raise ValueError("play distributions must be strictly positive")
        if np.abs(p.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValueError("every play distribution must sum to 1")

    @property
    def Q(self) -> float:
        return float(self.q.sum())


def _exact_alpha(g: Graph, context: str) -> int:
    res = independence_number(g)
    if not res.exact:
        raise ValueError(
            f"{context} needs the exact independence number of a "
            f"{g.vertex_count}-vertex graph but only bounds "
            f"[{res.lower}, {res.upper}] were certified"
        )
    return res.lower


def lemma1_check(inst: LemmaInstance) -> CheckResult:
    """Coverage inequality for the importance weights.

    The total expected importance weight ``sum_{v,i} q(v) p(i,v) / b(i,v)``,
    with ``b`` the probability that someone in the agent's network ball plays
    inside the arm's feedback ball, is at most
    ``(alpha(N^n x F^f) + Q) / (1 - 1/e)``.
    """
    A, K = inst.net_graph.vertex_count, inst.feed_graph.vertex_count
    net_balls = [sorted(neighborhood(inst.net_graph, v, inst.n)) for v in range(A)]
    feed_balls = [sorted(neighborhood(inst.feed_graph, i, inst.f)) for i in range(K)]
    lhs = 0.0
    for v in range(A):
        for i in range(K):
            miss = 1.0
            for u in net_balls[v]:
                mass = sum(inst.p[u, j] for j in feed_balls[i])
                miss *= 1.0 - inst.q[u] * mass
            lhs += inst.q[v] * inst.p[v, i] / (1.0 - miss)
    product = strong_product(power(inst.net_graph, inst.n), power(inst.feed_graph, inst.f))
    alpha = _exact_alpha(product, "the coverage inequality")
    rhs = _AMPLIFIER * (alpha + inst.Q)
    return CheckResult(lhs, rhs, lhs <= rhs + TOLERANCE)


def lemma3_check(g: Graph, dpow: int, p: np.ndarray) -> CheckResult:
    """Neighborhood-mass inequality: ``sum_i p(i) / P(i) <= alpha_d(G)``
    where ``P(i)`` is the total weight in the radius-``dpow`` ball around
    ``i``.  Vertices with zero weight contribute zero."""
    p = np.asarray(p, dtype=float)
    if p.min() < 0.0:
        raise ValueError("weights must be nonnegative")
    lhs = 0.0
    for i in range(g.vertex_count):
        if p[i] == 0.0:
            continue
        P = sum(p[j] for j in sorted(neighborhood(g, i, dpow)))
        if P <= 0.0:
            raise ValueError(f"vertex {i} has positive weight but zero ball mass")
        lhs += p[i] / P
    alpha = float(_exact_alpha(power(g, dpow), "the neighborhood-mass inequality"))
    return CheckResult(lhs, alpha, lhs <= alpha + TOLERANCE)


def lemma4_check(g: Graph, dpow: int, c: np.ndarray) -> CheckResult:
    """Complement-product inequality: with ``C(v) = 1 - prod_{w in ball(v)}
    (1 - c(w))``, the sum ``sum_v c(v) / C(v)`` is at most
    ``(alpha_d(G) + sum_v c(v)) / (1 - 1/e)``."""
    c = np.asarray(c, dtype=float)
    if c.min() < 0.0 or c.max() > 1.0:
        raise ValueError("entries must lie in [0, 1]")
    lhs = 0.0
    for v in range(g.vertex_count):
        if c[v] == 0.0:
            continue
        miss = 1.0
        for w in sorted(neighborhood(g, v, dpow)):
            miss *= 1.0 - c[w]
        C = 1.0 - miss
        if C <= 0.0:
            raise ValueError(f"vertex {v} has positive value but zero coverage")
        lhs += c[v] / C
    alpha = _exact_alpha(power(g, dpow), "the complement-product inequality")
    rhs = _AMPLIFIER * (alpha + float(c.sum()))
    return CheckResult(lhs, rhs, lhs <= rhs + TOLERANCE)


def lemma6_check(g1: Graph, g2: Graph, w: np.ndarray) -> CheckResult:
    """Two-graph coverage inequality on an arbitrary nonnegative matrix.

    ``w`` is indexed (vertex of g1, vertex of g2).  Writing ``S(i, u) =
    sum_{j in ball_1(i)} w(j, u)``, the hypotheses demand ``S(i, u) <= 1``
    everywhere and strictly positive denominators
    ``1 - prod_{u in ball_2(v)} (1 - S(i, u))``; then
    ``sum_{i,v} w(i,v) / denom(i,v) <= (alpha(g1 x g2) + sum w) / (1 - 1/e)``.
    """
    w = np.asarray(w, dtype=float)
    n1, n2 = g1.vertex_count, g2.vertex_count
    if w.shape != (n1, n2):
        raise ValueError(f"w has shape {w.shape}, expected ({n1}, {n2})")
    if w.min() < 0.0:
        raise ValueError("w must be nonnegative")
    balls1 = [sorted(neighborhood(g1, i, 1)) for i in range(n1)]
    balls2 = [sorted(neighborhood(g2, v, 1)) for v in range(n2)]
    S = np.empty((n1, n2))
    for i in range(n1):
        for u in range(n2):
            S[i, u] = sum(w[j, u] for j in balls1[i])
            if S[i, u] > 1.0:
                raise ValueError(
                    f"hypothesis violated at (i={i}, u={u}): "
                    f"ball mass {S[i, u]!r} exceeds 1"
                )
    lhs = 0.0
    for i in range(n1):
        for v in range(n2):
            miss = 1.0
            for u in balls2[v]:
                miss *= 1.0 - S[i, u]
            denom = 1.0 - miss
            if denom <= 0.0:
                raise ValueError(f"zero denominator at (i={i}, v={v})")
            lhs += w[i, v] / denom
    alpha = _exact_alpha(strong_product(g1, g2), "the two-graph coverage inequality")
    rhs = _AMPLIFIER * (alpha + float(w.sum()))
    return CheckResult(lhs, rhs, lhs <= rhs + TOLERANCE)


def unbiasedness_oracle(
    config: SimConfig, play: np.ndarray, loss_row: np.ndarray | None = None
) -> float:
    """Exact expected bias of the importance-weighted estimates.

    Enumerates every activation/draw outcome of a single round — each agent
    is either inactive or active on one arm — with its exact probability,
    accumulates ``E[estimate]`` for every (arm, agent), and returns the worst
    ``|E[estimate] - true loss|``.  Zero (up to float accumulation) is the
    only acceptable answer.
    """
    A, K = config.agent_count, config.arm_count
    if (K + 1) ** A > 4096:
        raise ValueError(
            f"{(K + 1) ** A} outcomes is too many to enumerate (A={A}, K={K})"
        )
    play = np.asarray(play, dtype=float)
    if play.shape != (A, K):
        raise ValueError(f"play has shape {play.shape}, expected ({A}, {K})")
    if play.min() < 0.0 or np.abs(play.sum(axis=1) - 1.0).max() > 1e-9:
        raise ValueError("play rows must be distributions")
    if loss_row is None:
        loss_row = np.ones(K)
    loss_row = np.asarray(loss_row, dtype=float)
    if loss_row.shape != (K,) or loss_row.min() < 0.0 or loss_row.max() > 1.0:
        raise ValueError("losses must be K values in [0, 1]")

    net_ball = [sorted(neighborhood(config.net_graph, v, config.n)) for v in range(A)]
    feed_ball = [sorted(neighborhood(config.feed_graph, i, config.f)) for i in range(K)]
    q = config.q

    b = np.empty((K, A))
    for v in range(A):
        for i in range(K):
            miss = 1.0
            for u in net_ball[v]:
                miss *= 1.0 - q[u] * sum(play[u, j] for j in feed_ball[i])
            b[i, v] = 1.0 - miss
            if b[i, v] <= 0.0:
                raise ValueError(f"arm {i} is unobservable to agent {v}")

    # per agent: (probability, played arm or None)
    branches = [
        [(1.0 - q[u], None)] + [(q[u] * play[u, k], k) for k in range(K)]
        for u in range(A)
    ]
    expected_B = np.zeros((K, A))
    for combo in itertools.product(*branches):
        prob = math.prod(pr for pr, _ in combo)
        if prob == 0.0:
            continue
        for v in range(A):
            for i in range(K):
                observed = any(
                    combo[u][1] is not None and combo[u][1] in feed_ball[i]
                    for u in net_ball[v]
                )
                if observed:
                    expected_B[i, v] += prob
    bias = np.abs(loss_row[:, None] * expected_B / b - loss_row[:, None])
    return float(bias.max())


def unbiasedness_battery() -> list[tuple[SimConfig, np.ndarray, np.ndarray]]:
    """Twenty fixed enumerable instances spanning 1-3 agents, 2-3 arms,
    radii 0/1, and activation levels 0.3/0.5/1."""
    sizes = [1, 2, 3]
    arm_counts = [2, 3]
    radii = [0, 1]
    levels = [0.3, 0.5, 1.0]
    losses_by_k = {2: np.array([0.3, 0.9]), 3: np.array([0.3, 0.9, 0.6])}
    battery = []
    for idx in range(20):
        A = sizes[idx % 3]
        K = arm_counts[idx % 2]
        n = radii[idx % 2]
        f = radii[(idx // 2) % 2]
        level = levels[idx % 3]
        if idx % 2 and A >= 2:
            net = gen_clique(A)
        elif A >= 3:
            net = gen_cycle(A)
        else:
            net = gen_edgeless(A)
        feed = gen_clique(K) if (idx // 3) % 2 else gen_edgeless(K)
        play = np.stack([np.arange(1.0, K + 1.0) + v for v in range(A)])
        play /= play.sum(axis=1, keepdims=True)
        config = SimConfig(
            net_graph=net, feed_graph=feed, n=n, f=f,
            q=np.full(A, level), T=10, eta_policy=FixedEta(0.5),
        )
        battery.append((config, play, losses_by_k[K]))
    return battery


def theorem1_bound(config: SimConfig, eta: float, alpha_product: float) -> float:
    """Upper bound on the Q-normalized network regret for a fixed rate:
    ``d + ln(K)/eta + eta T ((alpha/Q + 1)/(1 - 1/e) + d)``."""
    if config.arm_count < 2:
        raise ValueError("the bound needs at least 2 arms")
    if eta <= 0.0 or alpha_product <= 0.0:
        raise ValueError(
            f"eta and alpha must be positive, got eta={eta}, alpha={alpha_product}"
        )
    d, T, Q, K = config.d, config.T, config.Q, config.arm_count
    return d + math.log(K) / eta + eta * T * ((alpha_product / Q + 1.0) * _AMPLIFIER + d)


def vanilla_exp3_trajectory(
    loss_values: np.ndarray, eta: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Standalone exponential-weights bandit over a fixed loss table.

    One agent, always active, no feedback beyond its own play, no delay: the
    degenerate corner the network learner must collapse to.  Returns the
    played distribution and the drawn arm for every round.  The importance
    weight divides by the observation probability written as one minus the
    chance nobody reveals the arm — for a single self-observing agent that is
    ``1 - (1 - p)``, which is how the network estimator spells it.
    """
    loss_values = np.asarray(loss_values, dtype=float)
    T, K = loss_values.shape
    uniforms = rng.random((T, 1))
    cum = np.zeros(K)
    dists = np.empty((T, K))
    arms = np.empty(T, dtype=int)
    for t in range(T):
        z = -eta * cum
        z = z - z.max()
        weights = np.exp(z)
        p = weights / weights.sum()
        dists[t] = p
        arm = min(int((np.cumsum(p) < uniforms[t, 0]).sum()), K - 1)
        arms[t] = arm
        observe_prob = 1.0 - (1.0 - 1.0 * p[arm])
        cum[arm] += loss_values[t, arm] / observe_prob
    return dists, arms


# ---------------------------------------------------------------------------
# randomized instance generation


def _random_graph(nv: int, rng: np.random.Generator) -> Graph:
    density = float(rng.choice([0.0, 0.2, 0.5, 0.8, 1.0]))
    return gen_erdos_renyi(nv, density, rng)


def random_lemma1_instance(rng: np.random.Generator) -> LemmaInstance:
    A = int(rng.integers(1, 6))
    K = int(rng.integers(1, 6))
    net = _random_graph(A, rng)
    feed = _random_graph(K, rng)
    q = rng.uniform(0.05, 1.0, size=A)
    p = rng.uniform(0.05, 1.0, size=(A, K))
    p /= p.sum(axis=1, keepdims=True)
    return LemmaInstance(
        net_graph=net, feed_graph=feed,
        n=int(rng.integers(0, 3)), f=int(rng.integers(0, 3)), q=q, p=p,
    )


def random_lemma3_instance(rng: np.random.Generator) -> tuple[Graph, int, np.ndarray]:
    nv = int(rng.integers(1, 13))
    g = _random_graph(nv, rng)
    p = rng.uniform(0.0, 1.0, size=nv)
    p[rng.random(nv) < 0.2] = 0.0  # exercise the zero-weight branch
    if p.sum() == 0.0:
        p[0] = 1.0
    return g, int(rng.integers(1, 4)), p


def random_lemma4_instance(rng: np.random.Generator) -> tuple[Graph, int, np.ndarray]:
    nv = int(rng.integers(1, 13))
    g = _random_graph(nv, rng)
    c = rng.uniform(0.0, 1.0, size=nv)
    c[rng.random(nv) < 0.15] = 0.0
    c[rng.random(nv) < 0.1] = 1.0  # saturated coverage is a legal corner
    return g, int(rng.integers(1, 4)), c


def random_lemma6_instance(rng: np.random.Generator) -> tuple[Graph, Graph, np.ndarray]:
    n1 = int(rng.integers(1, 9))
    n2 = int(rng.integers(1, 9))
    g1 = _random_graph(n1, rng)
    g2 = _random_graph(n2, rng)
    w = rng.uniform(0.0, 1.0, size=(n1, n2))
    # the hypotheses couple entries through radius-1 ball sums in g1: scale
    # each column so its worst ball stays below a random level in (0, 1]
    closed = g1.closed_adjacency().astype(float)
    ball_sums = closed @ w
    w *= rng.uniform(0.2, 1.0, size=n2) / np.maximum(ball_sums.max(axis=0), 1e-12)
    return g1, g2, w


# ---------------------------------------------------------------------------
# suites and reporting


@dataclasses.dataclass(frozen=True)
class SuiteResult:
    check: str
    instances: int
    failures: int
    max_violation: float


def run_verification_suites(seed: int = 0, instances: int = 200) -> list[SuiteResult]:
    """Run every randomized suite plus the fixed unbiasedness battery."""
    results = []

    def suite(name, runner):
        failures, worst = 0, 0.0
        for i in range(instances):
            lhs, rhs, holds = runner(substream(seed, name, i))
            worst = max(worst, lhs - rhs)
            failures += not holds
        results.append(SuiteResult(name, instances, failures, max(worst, 0.0)))

    suite("lemma1", lambda rng: lemma1_check(random_lemma1_instance(rng)))
    suite("lemma3", lambda rng: lemma3_check(*random_lemma3_instance(rng)))
    suite("lemma4", lambda rng: lemma4_check(*random_lemma4_instance(rng)))
    suite("lemma6", lambda rng: lemma6_check(*random_lemma6_instance(rng)))

    battery = unbiasedness_battery()
    worst = max(unbiasedness_oracle(cfg, play, loss) for cfg, play, loss in battery)
    failures = sum(
        unbiasedness_oracle(cfg, play, loss) >= 1e-12 for cfg, play, loss in battery
    )
    results.append(SuiteResult("unbiasedness", len(battery), failures, worst))
    return results


def render_report(results: list[SuiteResult]) -> str:
    lines = []
    for r in results:
        status = "ok" if r.failures == 0 else "FAILED"
        lines.append(
            f"{r.check:<14} {r.instances:>4} instances   "
            f"{r.failures:>3} failures   max violation {r.max_violation:.3e}   {status}"
        )
    return "\n".join(lines)


def write_report_csv(results: list[SuiteResult], path) -> None:
    with open(path, "w") as fh:
        fh.write("check,instances,failures,max_violation\n")
        for r in results:
            fh.write(f"{r.check},{r.instances},{r.failures},{r.max_violation!r}\n")
