"""The round engine.

One round, in protocol order: (1) each agent is independently activated per
its probability; (2) active agents draw an arm from their current play
distribution and are charged its loss; (3) losses diffuse over the feedback
graph — an agent that played ``s'`` rounds ago now observes the losses of
arms at feedback distance exactly ``s'``, up to radius ``f``; (4) every agent
broadcasts a message (round, sender, observed losses, play distribution) to
its network ``n``-ball; (5) messages travel with delay equal to network
distance.  At the end of round ``t`` every agent folds in round ``t - d``,
whose information has fully arrived (``d = n + f``).

Two engines produce the trace:

* ``reference`` — the message-passing implementation.  Every agent is an
  :class:`~coopbandit.agent.AgentState` fed only through explicit
  per-recipient message queues, so delay semantics and agent blindness are
  enforced by construction; it also carries the audit hooks (information
  causality log, forced plays).
* ``vector`` — flat arrays, no message objects.  It reads global state
  directly but only ever combines the exact quantities the messages would
  have carried, through the same numeric kernels in the same order, so its
  output is bit-for-bit identical to the reference engine (the test suite
  enforces this).  It exists because the experiment grid runs half a million
  agent-rounds per repetition.

Both engines consume randomness identically: a single ``(T, A)`` table of
uniforms is drawn up front from the caller's generator, and the draw for
agent ``v`` at round ``t`` uses entry ``(t, v)`` whether or not any other
agent drew — so traces are reproducible independent of scheduling order.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Union

import numpy as np

from .agent import (
    AgentState,
    B_CLAMP,
    DoublingState,
    FeedbackMessage,
    doubling_eta,
    doubling_start_phase,
    draw_arm,
    feedback_mass,
    play_from_estimates,
    tuned_eta,
)
from .environment import ActivationSchedule, LossTable
from .graphs import Graph, all_pairs_distances, gen_edgeless, independence_number, power, strong_product

__all__ = [
    "FixedEta",
    "TunedEta",
    "DoublingEta",
    "EtaPolicy",
    "SimConfig",
    "RegretTrace",
    "run_simulation",
    "run_baseline",
    "compute_regret",
]


@dataclasses.dataclass(frozen=True)
class FixedEta:
    value: float

    def __post_init__(self):
        if not self.value > 0.0:
            raise ValueError(f"learning rate must be positive, got {self.value}")


@dataclasses.dataclass(frozen=True)
class TunedEta:
    """Horizon-aware rate; needs the exact independence number of the
    delay-power strong product, so only small instances qualify."""


@dataclasses.dataclass(frozen=True)
class DoublingEta:
    reset: bool = False


EtaPolicy = Union[FixedEta, TunedEta, DoublingEta]


@dataclasses.dataclass(frozen=True)
class SimConfig:
    """Everything that defines a run apart from the realized randomness."""

    net_graph: Graph
    feed_graph: Graph
    n: int
    f: int
    q: np.ndarray
    T: int
    eta_policy: EtaPolicy
    seed: int | None = None
    repetitions: int = 1

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        object.__setattr__(self, "q", q)
        if self.n < 0 or self.f < 0:
            raise ValueError(f"delays must be nonnegative, got n={self.n}, f={self.f}")
        if self.T < 1:
            raise ValueError(f"horizon must be positive, got {self.T}")
        if q.ndim != 1 or q.size != self.net_graph.vertex_count:
            raise ValueError(
                f"q has shape {q.shape}, network has {self.net_graph.vertex_count} agents"
            )
        if q.min() < 0.0 or q.max() > 1.0:
            raise ValueError("activation probabilities must lie in [0, 1]")
        if q.sum() <= 0.0:
            raise ValueError("at least one agent needs positive activation probability")
        if not isinstance(self.eta_policy, (FixedEta, TunedEta, DoublingEta)):
            raise ValueError(f"unknown eta policy: {self.eta_policy!r}")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be positive, got {self.repetitions}")

    @property
    def d(self) -> int:
        return self.n + self.f

    @property
    def agent_count(self) -> int:
        return self.net_graph.vertex_count

    @property
    def arm_count(self) -> int:
        return self.feed_graph.vertex_count

    @property
    def Q(self) -> float:
        return float(self.q.sum())


@dataclasses.dataclass(frozen=True)
class RegretTrace:
    """Per-round accounting of one run.

    ``regret_cum[t]`` is the loss charged so far minus the best single arm's
    comparator total so far (each active agent would have been charged that
    arm's loss); the final entry is the realized network regret.
    """

    active_counts: np.ndarray  # (T,) how many agents were activated
    incurred_cum: np.ndarray  # (T,) cumulative charged loss
    regret_cum: np.ndarray  # (T,) incurred minus best-arm comparator
    avg_regret_cum: np.ndarray  # (T,) regret_cum / Q
    comparator_cum: np.ndarray  # (K,) final per-arm comparator totals
    per_agent_charged: np.ndarray  # (A,) how much loss each agent absorbed
    Q: float
    clamp_hits: int = 0
    audit_logs: dict[int, list[tuple[str, int, int]]] | None = None

    @property
    def horizon(self) -> int:
        return self.regret_cum.size

    @property
    def final_regret(self) -> float:
        return float(self.regret_cum[-1])

    @property
    def final_avg_regret(self) -> float:
        return float(self.avg_regret_cum[-1])


def compute_regret(trace: RegretTrace, Q: float) -> tuple[float, float]:
    """Network regret and its Q-normalized form, recomputed from the totals."""
    if Q <= 0.0:
        raise ValueError(f"total activation mass must be positive, got {Q}")
    regret = float(trace.incurred_cum[-1] - trace.comparator_cum.min())
    return regret, regret / Q


# ---------------------------------------------------------------------------
# shared setup


def _check_dimensions(config: SimConfig, losses: LossTable, activations: ActivationSchedule):
    if losses.arm_count != config.arm_count:
        raise ValueError(
            f"loss table has {losses.arm_count} arms, feedback graph has {config.arm_count}"
        )
    if losses.horizon != config.T:
        raise ValueError(f"loss table covers {losses.horizon} rounds, config wants {config.T}")
    if activations.agent_count != config.agent_count:
        raise ValueError(
            f"activations cover {activations.agent_count} agents, network has {config.agent_count}"
        )
    if activations.horizon != config.T:
        raise ValueError(
            f"activations cover {activations.horizon} rounds, config wants {config.T}"
        )
    if not np.array_equal(activations.q, config.q):
        raise ValueError("activation schedule was drawn from different probabilities than config.q")


def _resolve_fixed_eta(config: SimConfig) -> float | None:
    """Fixed or tuned value; None means the doubling schedule runs instead."""
    pol = config.eta_policy
    if isinstance(pol, FixedEta):
        return pol.value
    if isinstance(pol, DoublingEta):
        return None
    try:
        prod = strong_product(power(config.net_graph, config.n), power(config.feed_graph, config.f))
    except ValueError as exc:
        raise ValueError(f"tuned learning rate unavailable: {exc}") from None
    alpha = independence_number(prod)
    if not alpha.exact:
        raise ValueError(
            f"tuned learning rate needs the exact independence number of a "
            f"{prod.vertex_count}-vertex product; raise the exact-search limit or use doubling"
        )
    return tuned_eta(config.arm_count, config.T, alpha.lower, config.Q, config.d)


# ---------------------------------------------------------------------------
# reference engine: explicit message passing


def _run_reference(
    config: SimConfig,
    losses: LossTable,
    activations: ActivationSchedule,
    u_table: np.ndarray,
    fixed_eta: float | None,
    audit: bool,
    arm_override: Callable[[int, int, np.ndarray], int] | None,
) -> RegretTrace:
    A, K, T, d = config.agent_count, config.arm_count, config.T, config.d
    net_dist = all_pairs_distances(config.net_graph)
    feed_dist = all_pairs_distances(config.feed_graph)
    feed_closed = feed_dist <= config.f
    # arms at feedback distance exactly s' from each arm, for loss diffusion
    rings = [
        [np.flatnonzero(feed_dist[a] == s).tolist() for a in range(K)]
        for s in range(config.f + 1)
    ]
    recipients = [
        [(v, int(net_dist[v, u])) for v in range(A) if net_dist[v, u] <= config.n]
        for u in range(A)
    ]

    agents = []
    for v in range(A):
        known_q = {u: float(config.q[u]) for u in range(A) if net_dist[v, u] <= config.n}
        doubling = None
        eta = fixed_eta
        if fixed_eta is None:
            doubling = DoublingState(K=K, reset=config.eta_policy.reset)
        agents.append(
            AgentState(
                agent_id=v,
                arm_count=K,
                total_delay=d,
                known_neighbor_q=known_q,
                feed_closed=feed_closed,
                eta=eta,
                doubling=doubling,
                audit=audit,
            )
        )

    pending_obs: list[dict[int, list[tuple[float, int, int]]]] = [{} for _ in range(A)]
    mail: list[dict[int, list[FeedbackMessage]]] = [{} for _ in range(A)]
    active_counts = np.zeros(T, dtype=int)
    incurred_cum = np.zeros(T)
    regret_cum = np.zeros(T)
    comparator = np.zeros(K)
    charged = np.zeros(A)
    incurred = 0.0

    for t in range(T):
        active = activations.active[t]
        act_idx = np.flatnonzero(active)
        plays = [agents[v].play_distribution(t) for v in range(A)]
        arms = np.full(A, -1, dtype=int)
        for v in act_idx.tolist():
            if arm_override is not None:
                arms[v] = int(arm_override(t, v, plays[v]))
            else:
                arms[v] = draw_arm(plays[v], u_table[t, v])
        if act_idx.size:
            charges = losses.values[t, arms[act_idx]]
            incurred += float(charges.sum())
            charged[act_idx] += charges
        comparator += act_idx.size * losses.values[t]

        # schedule this round's plays for diffusion, then broadcast
        for v in act_idx.tolist():
            for s_prime in range(config.f + 1):
                due = t + s_prime
                if due >= T:
                    break
                chunk = [(float(losses.values[t, a]), t, a) for a in rings[s_prime][arms[v]]]
                if chunk:
                    pending_obs[v].setdefault(due, []).extend(chunk)
        for u in range(A):
            observed = tuple(pending_obs[u].pop(t, []))
            msg = FeedbackMessage(
                origin_round=t,
                origin_agent=u,
                observed_losses=observed,
                play_distribution=plays[u].copy(),
                was_active=bool(active[u]),
                played_arm=int(arms[u]) if active[u] else None,
            )
            for v, delay in recipients[u]:
                mail[v].setdefault(t + delay, []).append(msg)
        for v in range(A):
            for msg in mail[v].pop(t, []):
                agents[v].receive(msg, now=t)

        s = t - d
        if s >= 0:
            for v in range(A):
                agents[v].finalize_round(s, wall=t)

        active_counts[t] = act_idx.size
        incurred_cum[t] = incurred
        regret_cum[t] = incurred - comparator.min()

    return RegretTrace(
        active_counts=active_counts,
        incurred_cum=incurred_cum,
        regret_cum=regret_cum,
        avg_regret_cum=regret_cum / config.Q,
        comparator_cum=comparator,
        per_agent_charged=charged,
        Q=config.Q,
        clamp_hits=sum(a.clamp_hits for a in agents),
        audit_logs={v: agents[v].audit_log for v in range(A)} if audit else None,
    )


# ---------------------------------------------------------------------------
# vector engine: same math, flat arrays


def _run_vector(
    config: SimConfig,
    losses: LossTable,
    activations: ActivationSchedule,
    u_table: np.ndarray,
    fixed_eta: float | None,
) -> RegretTrace:
    A, K, T, d = config.agent_count, config.arm_count, config.T, config.d
    q = config.q
    pos = q > 0.0
    net_mask = all_pairs_distances(config.net_graph) <= config.n  # closed n-ball
    feed_closed = all_pairs_distances(config.feed_graph) <= config.f
    feed_closed_float = feed_closed.astype(float)
    loss_rows = losses.values
    act_rows = activations.active

    cum_est = np.zeros((A, K))
    doubling = fixed_eta is None
    if doubling:
        reset = config.eta_policy.reset
        r0 = doubling_start_phase(K)
        phase_r = np.full(A, r0, dtype=int)
        eta_rows = np.full(A, doubling_eta(K, r0))
        phase_start = np.zeros(A, dtype=int)
        phase_acc = np.zeros(A)

    p_hist: dict[int, np.ndarray] = {}
    arm_hist: dict[int, np.ndarray] = {}
    active_counts = np.zeros(T, dtype=int)
    incurred_cum = np.zeros(T)
    regret_cum = np.zeros(T)
    comparator = np.zeros(K)
    charged = np.zeros(A)
    incurred = 0.0
    clamp_hits = 0

    for t in range(T):
        if doubling:
            p = play_from_estimates(cum_est, eta_rows[:, None])
        else:
            p = play_from_estimates(cum_est, fixed_eta)
        active = act_rows[t]
        act_idx = np.flatnonzero(active)
        arms = np.full(A, -1, dtype=int)
        if act_idx.size:
            cdf = np.cumsum(p[act_idx], axis=1)
            drawn = (cdf < u_table[t, act_idx][:, None]).sum(axis=1)
            arms[act_idx] = np.minimum(drawn, K - 1)
            charges = loss_rows[t, arms[act_idx]]
            incurred += float(charges.sum())
            charged[act_idx] += charges
        comparator += act_idx.size * loss_rows[t]
        p_hist[t] = p
        arm_hist[t] = arms

        s = t - d
        if s >= 0:
            ps = p_hist.pop(s)
            arms_s = arm_hist.pop(s)
            active_s = act_rows[s]
            mass = feedback_mass(ps, feed_closed_float)
            factors = 1.0 - q[:, None] * mass
            miss = np.where(net_mask[:, :, None], factors[None, :, :], 1.0).prod(axis=1)
            b = 1.0 - miss
            hit = np.zeros((A, K), dtype=bool)
            sa = np.flatnonzero(active_s)
            if sa.size:
                hit[sa] = feed_closed[arms_s[sa]]
            observed = (net_mask[:, :, None] & hit[None, :, :]).any(axis=1)
            clamp_hits += int((b < B_CLAMP)[pos].sum())
            b_safe = np.maximum(b, B_CLAMP)
            est = np.where(observed, loss_rows[s][None, :] / b_safe, 0.0)
            cum_est[pos] += est[pos]
            if doubling:
                ratio_sum = (ps / b_safe).sum(axis=1)
                countable = (s > phase_start + d) & pos
                X = np.where(countable, d + ratio_sum, 0.0)
                over = phase_acc + X > 2.0**phase_r
                phase_acc = np.where(over, 0.0, phase_acc + X)
                if over.any():
                    phase_r[over] += 1
                    for v in np.flatnonzero(over).tolist():
                        eta_rows[v] = doubling_eta(K, int(phase_r[v]))
                    phase_start[over] = s
                    if reset:
                        cum_est[over] = 0.0

        active_counts[t] = act_idx.size
        incurred_cum[t] = incurred
        regret_cum[t] = incurred - comparator.min()

    return RegretTrace(
        active_counts=active_counts,
        incurred_cum=incurred_cum,
        regret_cum=regret_cum,
        avg_regret_cum=regret_cum / config.Q,
        comparator_cum=comparator,
        per_agent_charged=charged,
        Q=config.Q,
        clamp_hits=clamp_hits,
    )


# ---------------------------------------------------------------------------
# public entry points


def run_simulation(
    config: SimConfig,
    losses: LossTable,
    activations: ActivationSchedule,
    rng: np.random.Generator,
    engine: str = "vector",
    audit: bool = False,
    arm_override: Callable[[int, int, np.ndarray], int] | None = None,
) -> RegretTrace:
    """Run one repetition and return its trace.

    ``rng`` is consumed once, up front, for the arm-draw uniforms; engines
    are output-identical, so pick ``reference`` for inspectability (audit
    mode, forced plays) and ``vector`` for speed.
    """
    _check_dimensions(config, losses, activations)
    if engine not in ("vector", "reference"):
        raise ValueError(f"unknown engine {engine!r}")
    if (audit or arm_override is not None) and engine != "reference":
        raise ValueError("audit mode and forced plays need the reference engine")
    fixed_eta = _resolve_fixed_eta(config)
    u_table = rng.random((config.T, config.agent_count))
    if engine == "reference":
        return _run_reference(config, losses, activations, u_table, fixed_eta, audit, arm_override)
    return _run_vector(config, losses, activations, u_table, fixed_eta)


def run_baseline(
    config: SimConfig,
    losses: LossTable,
    activations: ActivationSchedule,
    rng: np.random.Generator,
    engine: str = "vector",
) -> RegretTrace:
    """Same algorithm, same realization, but nobody can talk: the network is
    replaced by the edgeless graph on the same agents."""
    silent = dataclasses.replace(config, net_graph=gen_edgeless(config.agent_count))
    return run_simulation(silent, losses, activations, rng, engine=engine)
