"""Sweep orchestration: the reproduction grid and its outputs.

A sweep crosses activation levels with network and feedback densities.  For
every level of randomness there is exactly one place it comes from, keyed off
the experiment seed:

* the loss table is drawn once and shared by every cell and repetition (it
  only depends on the arm count and horizon);
* activation schedules are drawn once per activation level and shared by all
  cells at that level;
* each graph-density value gets one network / feedback graph realization,
  reused wherever that density appears;
* each (cell, repetition) gets one arm-draw stream, fed to the cooperative
  run and its baseline alike.

This pairing means that when two cells — or the two algorithms — differ, the
difference is attributable to the parameter that changed, not to resampled
noise.  Repetitions vary only the draw stream: the world (losses,
activations, graphs) is held fixed.

Outputs per cell: full traces for both algorithms as CSV, plus a rendered
learning-curve figure.  One summary CSV at the root collects final
Q-normalized regrets.  Everything is byte-deterministic in (spec, seed).
"""

from __future__ import annotations

import dataclasses
import itertools
from pathlib import Path

import matplotlib
import numpy as np

from .environment import (
    ActivationSchedule,
    sample_activations,
    stochastic_bernoulli_losses,
)
from .graphs import gen_erdos_renyi
from .rng import substream
from .simulator import (
    DoublingEta,
    EtaPolicy,
    FixedEta,
    RegretTrace,
    SimConfig,
    TunedEta,
    run_baseline,
    run_simulation,
)

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

__all__ = [
    "ExperimentSpec",
    "CellResult",
    "run_experiment",
    "parse_config",
    "spec_to_config_text",
    "format_eta_policy",
]

_STUDY_Q_LEVELS = (0.05, 0.5, 1.0)
_STUDY_DENSITIES = (0.2, 0.8)


@dataclasses.dataclass(frozen=True)
class ExperimentSpec:
    """Everything a sweep needs; defaults reproduce the reference study."""

    agents: int = 20
    arms: int = 20
    horizon: int = 10000
    n: int = 1
    f: int = 1
    q_grid: tuple[float, ...] = _STUDY_Q_LEVELS
    pnet_grid: tuple[float, ...] = _STUDY_DENSITIES
    pfeed_grid: tuple[float, ...] = _STUDY_DENSITIES
    reps: int = 20
    seed: int = 0
    eta_policy: EtaPolicy = DoublingEta()
    cooperative: bool = True
    baseline: bool = True
    out: str = "runs"

    def __post_init__(self):
        object.__setattr__(self, "q_grid", tuple(float(x) for x in self.q_grid))
        object.__setattr__(self, "pnet_grid", tuple(float(x) for x in self.pnet_grid))
        object.__setattr__(self, "pfeed_grid", tuple(float(x) for x in self.pfeed_grid))
        if self.agents < 1 or self.arms < 1 or self.horizon < 1:
            raise ValueError("agents, arms, and horizon must be positive")
        if self.n < 0 or self.f < 0:
            raise ValueError("delays must be nonnegative")
        if self.reps < 1:
            raise ValueError("repetitions must be positive")
        for name, grid in (
            ("q", self.q_grid),
            ("pnet", self.pnet_grid),
            ("pfeed", self.pfeed_grid),
        ):
            if not grid:
                raise ValueError(f"{name} grid must not be empty")
        if any(not 0.0 < x <= 1.0 for x in self.q_grid):
            raise ValueError("q grid values must lie in (0, 1]")
        for name, grid in (("pnet", self.pnet_grid), ("pfeed", self.pfeed_grid)):
            if any(not 0.0 <= x <= 1.0 for x in grid):
                raise ValueError(f"{name} grid values must lie in [0, 1]")
        if not (self.cooperative or self.baseline):
            raise ValueError("at least one of cooperative / baseline must run")

    @property
    def cells(self) -> list[tuple[float, float, float]]:
        return list(itertools.product(self.q_grid, self.pnet_grid, self.pfeed_grid))


@dataclasses.dataclass(frozen=True)
class CellResult:
    q: float
    p_net: float
    p_feed: float
    coop_finals: np.ndarray | None  # final R_T/Q per repetition
    base_finals: np.ndarray | None
    cell_dir: Path


def _cell_dir_name(q: float, p_net: float, p_feed: float) -> str:
    return f"q{float(q)!r}_pn{float(p_net)!r}_pf{float(p_feed)!r}"


def _write_traces(path: Path, traces: list[RegretTrace]) -> None:
    with open(path, "w") as fh:
        fh.write("rep,t,active,incurred_cum,regret_cum,avg_regret_cum\n")
        for rep, trace in enumerate(traces):
            rows = [
                f"{rep},{t + 1},{int(trace.active_counts[t])},"
                f"{float(trace.incurred_cum[t])!r},"
                f"{float(trace.regret_cum[t])!r},"
                f"{float(trace.avg_regret_cum[t])!r}"
                for t in range(trace.horizon)
            ]
            fh.write("\n".join(rows))
            fh.write("\n")


def _render_cell_figure(path: Path, title: str,
                        coop: list[RegretTrace] | None,
                        base: list[RegretTrace] | None) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, color, traces in (
        ("cooperative", "tab:blue", coop),
        ("baseline", "tab:red", base),
    ):
        if not traces:
            continue
        curves = np.stack([t.avg_regret_cum for t in traces])
        mean = curves.mean(axis=0)
        spread = curves.std(axis=0)
        rounds = np.arange(1, curves.shape[1] + 1)
        ax.plot(rounds, mean, color=color, label=label)
        ax.fill_between(rounds, mean - spread, mean + spread, color=color, alpha=0.2)
    ax.set_xlabel("round")
    ax.set_ylabel("average regret $R_t/Q$")
    ax.set_title(title)
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def run_experiment(spec: ExperimentSpec) -> list[CellResult]:
    """Execute the sweep, write all outputs under ``spec.out``, and return
    per-cell final regrets."""
    out_root = Path(spec.out)
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "config.txt").write_text(spec_to_config_text(spec))

    losses = stochastic_bernoulli_losses(
        spec.arms, spec.horizon, substream(spec.seed, "losses")
    )
    activations: dict[int, ActivationSchedule] = {}
    for iq, q_val in enumerate(spec.q_grid):
        q_vec = np.full(spec.agents, q_val)
        activations[iq] = sample_activations(
            q_vec, spec.horizon, substream(spec.seed, "activations", iq)
        )
    net_graphs = {
        ip: gen_erdos_renyi(spec.agents, p, substream(spec.seed, "net-graph", ip))
        for ip, p in enumerate(spec.pnet_grid)
    }
    feed_graphs = {
        ip: gen_erdos_renyi(spec.arms, p, substream(spec.seed, "feed-graph", ip))
        for ip, p in enumerate(spec.pfeed_grid)
    }

    results = []
    summary_rows = []
    cell_index = 0
    for (iq, q_val), (inet, _), (ifeed, _) in itertools.product(
        enumerate(spec.q_grid), enumerate(spec.pnet_grid), enumerate(spec.pfeed_grid)
    ):
        p_net, p_feed = spec.pnet_grid[inet], spec.pfeed_grid[ifeed]
        cell_dir = out_root / _cell_dir_name(q_val, p_net, p_feed)
        cell_dir.mkdir(exist_ok=True)
        config = SimConfig(
            net_graph=net_graphs[inet],
            feed_graph=feed_graphs[ifeed],
            n=spec.n,
            f=spec.f,
            q=np.full(spec.agents, q_val),
            T=spec.horizon,
            eta_policy=spec.eta_policy,
            seed=spec.seed,
            repetitions=spec.reps,
        )
        coop_traces = [] if spec.cooperative else None
        base_traces = [] if spec.baseline else None
        for rep in range(spec.reps):
            draws_key = (spec.seed, "draws", cell_index, rep)
            if spec.cooperative:
                coop_traces.append(
                    run_simulation(config, losses, activations[iq], substream(*draws_key))
                )
            if spec.baseline:
                base_traces.append(
                    run_baseline(config, losses, activations[iq], substream(*draws_key))
                )
        if spec.cooperative:
            _write_traces(cell_dir / "traces_coop.csv", coop_traces)
        if spec.baseline:
            _write_traces(cell_dir / "traces_base.csv", base_traces)
        _render_cell_figure(
            cell_dir / "learning_curves.png",
            f"q={q_val!r}, p_net={p_net!r}, p_feed={p_feed!r}",
            coop_traces,
            base_traces,
        )

        coop_finals = (
            np.array([t.final_avg_regret for t in coop_traces])
            if spec.cooperative else None
        )
        base_finals = (
            np.array([t.final_avg_regret for t in base_traces])
            if spec.baseline else None
        )
        results.append(CellResult(q_val, p_net, p_feed, coop_finals, base_finals, cell_dir))

        def _stats(finals):
            if finals is None:
                return "", ""
            mean = float(finals.mean())
            std = float(finals.std(ddof=1)) if finals.size > 1 else 0.0
            return repr(mean), repr(std)

        cm, cs = _stats(coop_finals)
        bm, bs = _stats(base_finals)
        summary_rows.append(
            f"{q_val!r},{p_net!r},{p_feed!r},{cm},{cs},{bm},{bs}"
        )
        cell_index += 1

    with open(out_root / "summary.csv", "w") as fh:
        fh.write("q,p_net,p_feed,coop_mean,coop_std,base_mean,base_std\n")
        fh.write("\n".join(summary_rows))
        fh.write("\n")
    return results


# ---------------------------------------------------------------------------
# configuration: flat key=value files, flag overrides


_INT_KEYS = ("agents", "arms", "horizon", "n-delay", "f-delay", "reps", "seed")
_GRID_KEYS = ("q-grid", "pnet-grid", "pfeed-grid")
_BOOL_KEYS = ("baseline-only", "coop-only")
_ALL_KEYS = _INT_KEYS + _GRID_KEYS + _BOOL_KEYS + ("eta-policy", "out")

_KEY_TO_FIELD = {
    "agents": "agents",
    "arms": "arms",
    "horizon": "horizon",
    "n-delay": "n",
    "f-delay": "f",
    "q-grid": "q_grid",
    "pnet-grid": "pnet_grid",
    "pfeed-grid": "pfeed_grid",
    "reps": "reps",
    "seed": "seed",
    "out": "out",
}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "eta-policy":
        return parse_eta_policy(raw)  # carries its own error message
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _GRID_KEYS:
            return tuple(float(x) for x in raw.split(","))
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "false"):
                return raw.lower() == "true"
            raise ValueError(raw)
        return raw  # out
    except ValueError:
        raise ValueError(f"bad value for {key!r}: {raw!r}") from None


def parse_eta_policy(text: str) -> EtaPolicy:
    if text == "tuned":
        return TunedEta()
    if text == "doubling":
        return DoublingEta(reset=False)
    if text == "doubling-reset":
        return DoublingEta(reset=True)
    if text.startswith("fixed:"):
        return FixedEta(float(text.split(":", 1)[1]))
    raise ValueError(
        f"eta policy must be fixed:<value>, tuned, doubling, or doubling-reset; got {text!r}"
    )


def format_eta_policy(policy: EtaPolicy) -> str:
    if isinstance(policy, FixedEta):
        return f"fixed:{policy.value!r}"
    if isinstance(policy, TunedEta):
        return "tuned"
    return "doubling-reset" if policy.reset else "doubling"


def parse_config(path: str | Path | None = None,
                 overrides: dict[str, str] | None = None) -> ExperimentSpec:
    """Build a spec from an optional flat key=value file plus flag overrides
    (override values win; keys are the flag names)."""
    raw: dict[str, str] = {}
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}, line {lineno}: expected key=value, got {line!r}")
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key not in _ALL_KEYS:
                raise ValueError(f"{path}, line {lineno}: unknown key {key!r}")
            raw[key] = value
    for key, value in (overrides or {}).items():
        if key not in _ALL_KEYS:
            raise ValueError(f"unknown key {key!r}")
        raw[key] = value

    fields = {}
    for key, value in raw.items():
        parsed = _parse_value(key, value)
        if key == "eta-policy":
            fields["eta_policy"] = parsed
        elif key == "baseline-only":
            if parsed:
                fields["cooperative"] = False
        elif key == "coop-only":
            if parsed:
                fields["baseline"] = False
        else:
            fields[_KEY_TO_FIELD[key]] = parsed
    return ExperimentSpec(**fields)


def spec_to_config_text(spec: ExperimentSpec) -> str:
    """Render a spec as a config file that parses back to the same spec."""
    lines = [
        f"agents={spec.agents}",
        f"arms={spec.arms}",
        f"horizon={spec.horizon}",
        f"n-delay={spec.n}",
        f"f-delay={spec.f}",
        "q-grid=" + ",".join(repr(x) for x in spec.q_grid),
        "pnet-grid=" + ",".join(repr(x) for x in spec.pnet_grid),
        "pfeed-grid=" + ",".join(repr(x) for x in spec.pfeed_grid),
        f"reps={spec.reps}",
        f"seed={spec.seed}",
        f"eta-policy={format_eta_policy(spec.eta_policy)}",
        f"baseline-only={str(not spec.cooperative).lower()}",
        f"coop-only={str(not spec.baseline).lower()}",
        f"out={spec.out}",
    ]
    return "\n".join(lines) + "\n"
