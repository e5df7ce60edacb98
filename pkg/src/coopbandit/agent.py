"""The local learner each agent runs.

Agents are deliberately blind: an :class:`AgentState` is constructed from its
own id, the arm-side structure (closed feedback neighborhoods), the total
delay ``d``, a learning-rate policy, and the activation probabilities of its
network neighbors — nothing else.  Everything it learns afterwards arrives as
:class:`FeedbackMessage` objects.  This module never imports the simulator
and never sees the network graph, so the "every agent is interchangeable"
assumption is enforced by the import structure, not by discipline.

The update rule is exponential weights over importance-weighted estimates.
Weights themselves are never materialized: the agent keeps the running sum of
estimated losses per arm and computes its play distribution by max-shifted
exponentiation, which survives horizons where the raw weights would
underflow.  Because information needs up to ``d = n + f`` rounds to travel,
the estimate for round ``s`` is only folded in at round ``s + d`` (the play
distribution at ``t`` therefore depends on rounds ``<= t - d - 1`` only, and
the first ``d + 1`` rounds are played uniformly).

A note on bit-level agreement: the fast array engine in :mod:`.simulator`
recomputes these quantities globally.  Both code paths funnel through the
small kernels here (:func:`play_from_estimates`, :func:`feedback_mass`,
:func:`coverage_probability`, :func:`draw_arm`) with the same per-row
operation order, so the two engines produce identical bytes, and the test
suite holds them to that.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .graphs import Graph, neighborhood

__all__ = [
    "FeedbackMessage",
    "AgentState",
    "DoublingState",
    "play_from_estimates",
    "draw_arm",
    "feedback_mass",
    "coverage_probability",
    "compute_b",
    "compute_B",
    "estimate_loss",
    "tuned_eta",
    "doubling_start_phase",
    "doubling_eta",
]

#: Floor applied to observation probabilities before dividing.  Analytically
#: b > 0 whenever the agent itself has positive activation probability, so a
#: clamp hit is a bug; engines count hits and the tests require zero.
B_CLAMP = 1e-300


# ---------------------------------------------------------------------------
# numeric kernels shared by both engines


def play_from_estimates(cumulative_estimates: np.ndarray, eta) -> np.ndarray:
    """Exponential-weights distribution from summed loss estimates.

    Max-shifted so the largest weight is always 1; shifting all estimates by
    a common constant provably does not change the output.  Accepts a single
    (K,) vector or a batch of rows; ``eta`` may be scalar or per-row.
    """
    z = cumulative_estimates * (-1.0 * np.asarray(eta))
    z = z - z.max(axis=-1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=-1, keepdims=True)


def draw_arm(p_row: np.ndarray, u: float) -> int:
    """Inverse-CDF draw from one probability row given a uniform variate."""
    c = np.cumsum(p_row)
    arm = int((c < u).sum())
    return min(arm, p_row.size - 1)


def feedback_mass(p_rows: np.ndarray, feed_closed: np.ndarray) -> np.ndarray:
    """Per sender, the probability mass each arm's feedback ball would catch.

    ``out[r, i] = sum_j p_rows[r, j] * feed_closed[j, i]`` — one row at a
    time, never as a single matrix product, so the float result for a row
    does not depend on which rows it was stacked with.
    """
    rows = np.atleast_2d(np.asarray(p_rows, dtype=float))
    fc = np.asarray(feed_closed, dtype=float)
    out = np.empty_like(rows)
    for r in range(rows.shape[0]):
        out[r] = rows[r] @ fc
    return out


def coverage_probability(q_values: np.ndarray, mass_rows: np.ndarray) -> np.ndarray:
    """Chance that at least one of the given senders observes each arm.

    ``1 - prod_u (1 - q_u * mass_u)``, with the product taken in ascending
    sender order (the caller supplies rows already sorted by sender id).
    """
    factors = 1.0 - np.asarray(q_values, dtype=float)[:, None] * np.atleast_2d(mass_rows)
    return 1.0 - np.prod(factors, axis=0)


# ---------------------------------------------------------------------------
# spec-level formula routes (clear, per-arm; engines use the kernels above)


def compute_b(
    arm: int,
    neighbor_distributions: dict[int, np.ndarray],
    known_neighbor_q: dict[int, float],
    feed_graph: Graph,
    f: int,
) -> float:
    """Probability that some network neighbor observes ``arm`` this round.

    Direct evaluation of ``1 - prod_u (1 - q(u) * sum_{j in ball(arm)} p(j, u))``
    over the closed feedback ball of radius ``f``.  Every neighbor the agent
    knows about must come with a distribution — a missing one means the
    protocol was violated upstream.
    """
    ball = sorted(neighborhood(feed_graph, arm, f))
    miss = 1.0
    for u in sorted(known_neighbor_q):
        if u not in neighbor_distributions:
            raise ValueError(f"no play distribution for network neighbor {u}")
        p_row = np.asarray(neighbor_distributions[u], dtype=float)
        mass = float(p_row[ball].sum())
        miss *= 1.0 - known_neighbor_q[u] * mass
    return 1.0 - miss


def compute_B(
    arm: int,
    neighborhood_events: dict[int, tuple[bool, int | None]],
    feed_graph: Graph,
    f: int,
) -> bool:
    """Did anyone nearby actually observe ``arm``?  True iff some network
    neighbor was active and played inside the arm's feedback ball."""
    ball = neighborhood(feed_graph, arm, f)
    return any(
        active and played in ball for active, played in neighborhood_events.values()
    )


def estimate_loss(loss: float | None, B: bool, b: float) -> float:
    """Importance-weighted loss estimate ``loss * B / b``.

    Zero when unobserved (``loss`` may then be ``None`` — the true value is
    unknown and unneeded).  The observation probability must be positive.
    """
    if not B:
        return 0.0
    if b <= 0.0:
        raise ValueError(f"observation probability must be positive, got {b}")
    if loss is None or not 0.0 <= loss <= 1.0:
        raise ValueError(f"observed loss must lie in [0, 1], got {loss}")
    return loss / b


def tuned_eta(K: int, T: int, alpha_product: float, Q: float, d: int) -> float:
    """Learning rate minimizing the regret bound when T, alpha and Q are known:
    ``sqrt(ln K / (T * (alpha/Q + d + 1)))``."""
    if K < 2:
        raise ValueError(f"need at least 2 arms (ln 1 = 0 would give eta = 0), got K={K}")
    if T < 1 or alpha_product <= 0 or Q <= 0 or d < 0:
        raise ValueError(
            f"bad tuning inputs: T={T}, alpha_product={alpha_product}, Q={Q}, d={d}"
        )
    return math.sqrt(math.log(K) / (T * (alpha_product / Q + d + 1)))


# ---------------------------------------------------------------------------
# doubling trick


def doubling_start_phase(K: int) -> int:
    """First phase index: ``ceil(log2 ln K)``."""
    if K < 2:
        raise ValueError(f"the doubling schedule needs at least 2 arms, got K={K}")
    return math.ceil(math.log2(math.log(K)))


def doubling_eta(K: int, r: int) -> float:
    """Phase-r learning rate ``sqrt(ln K / 2^r)``."""
    return math.sqrt(math.log(K) / 2.0**r)


@dataclasses.dataclass
class DoublingState:
    """Local phase bookkeeping for the anytime learning-rate schedule.

    The agent accumulates ``X = d + sum_i p/b`` every round it can evaluate
    (rounds within ``d`` of the phase start contribute zero); once the running
    total would pass ``2^r`` the phase closes, the learning rate halves in the
    square root, and — only in reset mode — the accumulated loss estimates
    are discarded as well.
    """

    K: int
    reset: bool
    r: int = dataclasses.field(init=False)
    eta: float = dataclasses.field(init=False)
    phase_start: int = 0
    accumulated: float = 0.0

    def __post_init__(self):
        self.r = doubling_start_phase(self.K)
        self.eta = doubling_eta(self.K, self.r)

    def step(self, s: int, p_row: np.ndarray, b_row: np.ndarray, d: int) -> bool:
        """Feed round ``s``; returns True when this step closed a phase."""
        if s <= self.phase_start + d:
            return False
        X = d + (p_row / b_row).sum()
        if self.accumulated + X > 2.0**self.r:
            self.r += 1
            self.eta = doubling_eta(self.K, self.r)
            self.phase_start = s
            self.accumulated = 0.0
            return True
        self.accumulated += X
        return False


# ---------------------------------------------------------------------------
# messages and per-agent state


@dataclasses.dataclass(frozen=True)
class FeedbackMessage:
    """What one agent broadcasts at the end of a round.

    ``observed_losses`` is the set of timestamped losses the sender observed
    *this* round — its own play plus whatever diffused back to it from plays
    up to ``f`` rounds ago.  The play distribution rides along because the
    recipients need it to reconstruct observation probabilities later.
    """

    origin_round: int
    origin_agent: int
    observed_losses: tuple[tuple[float, int, int], ...]  # (value, loss round, arm)
    play_distribution: np.ndarray
    was_active: bool
    played_arm: int | None = None

    def __post_init__(self):
        p = np.asarray(self.play_distribution, dtype=float)
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError(f"play distribution sums to {p.sum()!r}, not 1")
        if self.was_active and self.played_arm is None:
            raise ValueError("active sender must report its played arm")
        if not self.was_active and self.played_arm is not None:
            raise ValueError("inactive sender cannot have played an arm")
        for value, loss_round, arm in self.observed_losses:
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"observed loss {value} outside [0, 1]")
            if loss_round > self.origin_round:
                raise ValueError(
                    f"loss from round {loss_round} cannot be observed at round "
                    f"{self.origin_round}"
                )
            if not 0 <= arm < p.size:
                raise ValueError(f"arm {arm} out of range")


class AgentState:
    """One agent's entire local world.

    Owns the running estimate sums, the inbox, and (when enabled) the
    doubling phase.  The surrounding engine promises to deliver messages at
    the correct round and to call :meth:`finalize_round` exactly once per
    round, in order, at wall-clock ``s + d``; the agent checks both promises.

    With ``audit=True`` every play and finalization is appended to
    ``audit_log`` as ``(kind, wall_round, info_round)`` so a test can verify
    that nothing the agent used was generated after ``wall - d``.
    """

    def __init__(
        self,
        agent_id: int,
        arm_count: int,
        total_delay: int,
        known_neighbor_q: dict[int, float],
        feed_closed: np.ndarray,
        eta: float | None = None,
        doubling: DoublingState | None = None,
        audit: bool = False,
    ):
        if (eta is None) == (doubling is None):
            raise ValueError("exactly one of eta / doubling must be given")
        if agent_id not in known_neighbor_q:
            raise ValueError("an agent is always its own network neighbor")
        self.agent_id = agent_id
        self.K = arm_count
        self.d = total_delay
        self.known_neighbor_q = dict(known_neighbor_q)
        self.doubling = doubling
        self._fixed_eta = eta
        self._feed_closed = np.asarray(feed_closed, dtype=bool)
        self._senders = sorted(self.known_neighbor_q)
        self._q_vec = np.array([self.known_neighbor_q[u] for u in self._senders])
        self.cumulative_estimates = np.zeros(arm_count)
        self.inbox: dict[int, list[FeedbackMessage]] = {}
        self.finalized_through = -1
        self.clamp_hits = 0
        self.audit_log: list[tuple[str, int, int]] | None = [] if audit else None
        self._views: dict[int, dict[int, FeedbackMessage]] = {}
        self._loss_values: dict[int, dict[int, float]] = {}

    @property
    def eta(self) -> float:
        return self.doubling.eta if self.doubling is not None else self._fixed_eta

    def receive(self, msg: FeedbackMessage, now: int) -> None:
        """Ingest a message arriving at round ``now``."""
        if now < msg.origin_round:
            raise ValueError(
                f"message from round {msg.origin_round} cannot arrive at round {now}"
            )
        self.inbox.setdefault(now, []).append(msg)
        self._views.setdefault(msg.origin_round, {})[msg.origin_agent] = msg
        for value, loss_round, arm in msg.observed_losses:
            self._loss_values.setdefault(loss_round, {})[arm] = value

    def play_distribution(self, t: int) -> np.ndarray:
        """Distribution for round ``t``; uniform until the first update lands."""
        expected = max(-1, t - self.d - 1)
        if self.finalized_through != expected:
            raise RuntimeError(
                f"agent {self.agent_id}: round {t} needs finalization through "
                f"{expected}, have {self.finalized_through}"
            )
        if self.audit_log is not None:
            self.audit_log.append(("play", t, self.finalized_through))
        return play_from_estimates(self.cumulative_estimates, self.eta)

    def finalize_round(self, s: int, wall: int) -> None:
        """Fold round ``s`` into the estimates once everything about it arrived."""
        if s <= self.finalized_through:
            raise RuntimeError(f"round {s} already finalized")
        if s != self.finalized_through + 1:
            raise RuntimeError(
                f"rounds finalize in order; expected {self.finalized_through + 1}, got {s}"
            )
        if wall < s + self.d:
            raise RuntimeError(
                f"round {s} cannot finalize before round {s + self.d} (wall {wall})"
            )
        views = self._views.pop(s, {})
        if sorted(views) != self._senders:
            missing = sorted(set(self._senders) - set(views))
            raise RuntimeError(
                f"agent {self.agent_id}: round {s} is missing messages from {missing}"
            )
        own_q = self.known_neighbor_q[self.agent_id]
        if own_q > 0.0:
            p_rows = np.stack([views[u].play_distribution for u in self._senders])
            mass = feedback_mass(p_rows, self._feed_closed)
            b = coverage_probability(self._q_vec, mass)
            observed = np.zeros(self.K, dtype=bool)
            for u in self._senders:
                msg = views[u]
                if msg.was_active:
                    observed |= self._feed_closed[msg.played_arm]
            values = np.zeros(self.K)
            arrived = self._loss_values.get(s, {})
            if sorted(arrived) != np.flatnonzero(observed).tolist():
                raise RuntimeError(
                    f"agent {self.agent_id}: round {s} loss values {sorted(arrived)} "
                    f"do not match observation events {np.flatnonzero(observed).tolist()}"
                )
            for arm, value in arrived.items():
                values[arm] = value
            self.clamp_hits += int((b < B_CLAMP).sum())
            b_safe = np.maximum(b, B_CLAMP)
            self.cumulative_estimates += np.where(observed, values / b_safe, 0.0)
            if self.doubling is not None:
                own_p = views[self.agent_id].play_distribution
                if self.doubling.step(s, own_p, b_safe, self.d) and self.doubling.reset:
                    self.cumulative_estimates = np.zeros(self.K)
        self.finalized_through = s
        if self.audit_log is not None:
            self.audit_log.append(("finalize", wall, s))
        self._loss_values.pop(s, None)
        for arrival in [a for a in self.inbox if a <= wall - self.d - 1]:
            del self.inbox[arrival]
