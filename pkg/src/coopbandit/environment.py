"""Loss sequences and agent activations.

The adversary is oblivious: the whole loss table is drawn (or loaded) before
the simulation starts, and activations are sampled independently per agent
per round.  Pre-drawing both makes it possible to run the cooperative
algorithm and its no-communication baseline on the *same* realization, which
is how the experiment grid isolates the effect of communication.
"""

from __future__ import annotations

import dataclasses
import io
import math
import os

import numpy as np

from .graphs import Graph, independence_number, power

__all__ = [
    "LossTable",
    "ActivationSchedule",
    "stochastic_bernoulli_losses",
    "sample_activations",
    "lower_bound_instance",
    "load_losses",
    "save_losses",
]


@dataclasses.dataclass(frozen=True)
class LossTable:
    """T x K losses in [0, 1]; ``optimal_arm`` is metadata for stochastic tables."""

    values: np.ndarray
    optimal_arm: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"losses must be a T x K matrix, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"losses must be non-empty, got shape {values.shape}")
        if np.isnan(values).any() or values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("losses must lie in [0, 1]")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.optimal_arm is not None and not 0 <= self.optimal_arm < values.shape[1]:
            raise ValueError(f"optimal_arm {self.optimal_arm} out of range")

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    @property
    def arm_count(self) -> int:
        return self.values.shape[1]


@dataclasses.dataclass(frozen=True)
class ActivationSchedule:
    """Realized active sets plus the probabilities that generated them.

    ``active[t, v]`` says whether agent ``v`` must predict at round ``t``;
    ``q`` holds the per-agent activation probabilities and ``Q`` their sum,
    which normalizes the regret.
    """

    active: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        active = np.asarray(self.active, dtype=bool)
        q = np.asarray(self.q, dtype=float)
        if active.ndim != 2 or q.ndim != 1 or active.shape[1] != q.shape[0]:
            raise ValueError(
                f"shape mismatch: active {active.shape} vs q {q.shape}"
            )
        if q.min() < 0.0 or q.max() > 1.0:
            raise ValueError("activation probabilities must lie in [0, 1]")
        if q.sum() <= 0.0:
            raise ValueError("at least one agent needs positive activation probability")
        active = active.copy()
        active.setflags(write=False)
        q = q.copy()
        q.setflags(write=False)
        object.__setattr__(self, "active", active)
        object.__setattr__(self, "q", q)

    @property
    def horizon(self) -> int:
        return self.active.shape[0]

    @property
    def agent_count(self) -> int:
        return self.active.shape[1]

    @property
    def Q(self) -> float:
        return float(self.q.sum())


def stochastic_bernoulli_losses(
    K: int, T: int, rng: np.random.Generator, optimal_arm: int = 0
) -> LossTable:
    """Bernoulli losses: parameter 1/2 everywhere except the optimal arm,
    which gets 1/2 - sqrt(K/T).

    The gap shrinks with the horizon so the problem stays hard at scale.
    Requires sqrt(K/T) <= 1/2, otherwise the optimal arm's mean would fall
    below zero.
    """
    if K < 2:
        raise ValueError(f"need at least 2 arms, got {K}")
    if T < 1:
        raise ValueError(f"horizon must be positive, got {T}")
    gap = math.sqrt(K / T)
    if 0.5 - gap < 0.0:
        raise ValueError(
            f"K={K}, T={T} gives optimal-arm mean 1/2 - sqrt(K/T) = {0.5 - gap:.4f} < 0"
        )
    if not 0 <= optimal_arm < K:
        raise ValueError(f"optimal_arm {optimal_arm} out of range for {K} arms")
    params = np.full(K, 0.5)
    params[optimal_arm] = 0.5 - gap
    values = (rng.random((T, K)) < params).astype(float)
    return LossTable(values=values, optimal_arm=optimal_arm)


def sample_activations(q, T: int, rng: np.random.Generator) -> ActivationSchedule:
    """Draw the active sets: agent v joins round t with probability q[v],
    independently across agents and rounds."""
    q = np.asarray(q, dtype=float)
    if T < 1:
        raise ValueError(f"horizon must be positive, got {T}")
    if q.ndim != 1 or q.size < 1:
        raise ValueError("q must be a non-empty vector")
    if q.min() < 0.0 or q.max() > 1.0:
        raise ValueError("activation probabilities must lie in [0, 1]")
    if q.sum() <= 0.0:
        raise ValueError("at least one agent needs positive activation probability")
    active = rng.random((T, q.size)) < q[None, :]
    return ActivationSchedule(active=active, q=q)


def lower_bound_instance(net_graph: Graph, n: int, Q: float) -> np.ndarray:
    """Activation profile of the hard instance: mass Q spread uniformly over
    a maximum independent set of the n-th power of the network.

    Agents in the set never hear about each other's plays within the useful
    window, so cooperation cannot help them.  Requires 0 < Q <= alpha so the
    per-agent probabilities stay in (0, 1].
    """
    alpha = independence_number(power(net_graph, n))
    if not alpha.exact:
        raise ValueError(
            f"need the exact independence number of the {n}-power "
            f"({net_graph.vertex_count} vertices exceeds the exact-search limit)"
        )
    if not 0.0 < Q <= alpha.lower:
        raise ValueError(f"Q must lie in (0, {alpha.lower}], got {Q}")
    q = np.zeros(net_graph.vertex_count)
    q[list(alpha.witness)] = Q / alpha.lower
    return q


def load_losses(source: str | os.PathLike | io.TextIOBase) -> LossTable:
    """Read a loss table: CSV, one row per round, K values per row, no header."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_losses(fh)
    rows: list[list[float]] = []
    width = None
    for lineno, raw in enumerate(source.read().splitlines(), start=1):
        text = raw.strip()
        if not text:
            continue
        parts = text.split(",")
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise ValueError(f"line {lineno}: expected {width} values, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric loss in {raw!r}") from None
    if not rows:
        raise ValueError("loss file is empty")
    return LossTable(values=np.array(rows))


def save_losses(table: LossTable, target: str | os.PathLike | io.TextIOBase) -> None:
    """Write the CSV format read by :func:`load_losses` (shortest round-trip floats)."""
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="utf-8") as fh:
            save_losses(table, fh)
            return
    for row in table.values:
        target.write(",".join(repr(float(x)) for x in row))
        target.write("\n")
