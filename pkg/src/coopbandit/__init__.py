"""Cooperative online learning over a communication network.

A network of agents plays a common nonstochastic bandit problem.  Arms live
on a feedback graph (playing an arm reveals the losses of nearby arms, with
delay equal to graph distance); agents share what they observe with nearby
agents over the network, again with delay equal to graph distance.  The
package provides the graph machinery, the learner, a faithful message-passing
simulator plus a fast equivalent engine, numerical checks of the regret
analysis, and a CLI that reproduces the accompanying experiment grid.
"""

from .graphs import (
    AlphaResult,
    Graph,
    all_pairs_distances,
    gen_clique,
    gen_cycle,
    gen_edgeless,
    gen_erdos_renyi,
    gen_iterated_c5,
    independence_number,
    is_independent_set,
    iterated_c5_witness,
    load_graph,
    neighborhood,
    power,
    product_index,
    product_pair,
    save_graph,
    strong_product,
)
from .rng import substream
from .environment import (
    ActivationSchedule,
    LossTable,
    load_losses,
    lower_bound_instance,
    sample_activations,
    save_losses,
    stochastic_bernoulli_losses,
)
from .agent import (
    AgentState,
    DoublingState,
    FeedbackMessage,
    compute_B,
    compute_b,
    doubling_eta,
    doubling_start_phase,
    estimate_loss,
    tuned_eta,
)
from .simulator import (
    DoublingEta,
    EtaPolicy,
    FixedEta,
    RegretTrace,
    SimConfig,
    TunedEta,
    compute_regret,
    run_baseline,
    run_simulation,
)
from .verify import (
    LemmaInstance,
    lemma1_check,
    lemma3_check,
    lemma4_check,
    lemma6_check,
    run_verification_suites,
    theorem1_bound,
    unbiasedness_battery,
    unbiasedness_oracle,
    vanilla_exp3_trajectory,
)
from .experiment import (
    CellResult,
    ExperimentSpec,
    parse_config,
    run_experiment,
    spec_to_config_text,
)

__version__ = "0.1.0"
