"""Checks for the certification layer itself.

The lemma checkers are verified on hand-computable instances (closed forms,
tight cases, hypothesis violations), against each other (the two-graph
inequality collapses to the single-graph one when one factor is trivial),
and on their randomized suites.  The standalone exponential-weights learner
is pinned bit-for-bit against the full network engine on the degenerate
single-agent instance.
"""

import math

import numpy as np
import pytest

from coopbandit.agent import draw_arm
from coopbandit.environment import stochastic_bernoulli_losses, sample_activations
from coopbandit.graphs import (
    gen_clique,
    gen_cycle,
    gen_edgeless,
    gen_erdos_renyi,
)
from coopbandit.rng import substream
from coopbandit.simulator import FixedEta, SimConfig, run_simulation
from coopbandit.verify import (
    LemmaInstance,
    lemma1_check,
    lemma3_check,
    lemma4_check,
    lemma6_check,
    random_lemma1_instance,
    random_lemma3_instance,
    random_lemma4_instance,
    random_lemma6_instance,
    render_report,
    run_verification_suites,
    theorem1_bound,
    unbiasedness_battery,
    unbiasedness_oracle,
    vanilla_exp3_trajectory,
    write_report_csv,
)

AMP = 1.0 / (1.0 - math.exp(-1.0))


# ---------------------------------------------------------------------------
# instance validation


def test_instance_rejects_bad_hypotheses():
    net, feed = gen_cycle(3), gen_clique(2)
    ok = dict(net_graph=net, feed_graph=feed, n=1, f=0,
              q=np.array([0.5, 0.5, 0.5]), p=np.full((3, 2), 0.5))
    LemmaInstance(**ok)
    with pytest.raises(ValueError, match=r"\(0, 1\]"):
        LemmaInstance(**{**ok, "q": np.array([0.5, 0.0, 0.5])})
    with pytest.raises(ValueError, match="strictly positive"):
        LemmaInstance(**{**ok, "p": np.array([[1.0, 0.0]] * 3)})
    with pytest.raises(ValueError, match="sum to 1"):
        LemmaInstance(**{**ok, "p": np.full((3, 2), 0.4)})
    with pytest.raises(ValueError, match="shape"):
        LemmaInstance(**{**ok, "q": np.array([0.5, 0.5])})


# ---------------------------------------------------------------------------
# coverage inequality (two graphs, activation-weighted)


def test_coverage_single_point_instance():
    inst = LemmaInstance(net_graph=gen_edgeless(1), feed_graph=gen_edgeless(1),
                         n=0, f=0, q=np.array([1.0]), p=np.array([[1.0]]))
    lhs, rhs, holds = lemma1_check(inst)
    assert lhs == pytest.approx(1.0)
    assert rhs == pytest.approx(2.0 * AMP)
    assert holds


def test_coverage_full_feedback_collapses_to_activations_only():
    # when every play reveals every arm, the arm index drops out and the sum
    # is sum_v q(v) / (1 - prod_u (1 - q(u)))
    rng = substream(31, "q")
    q = rng.uniform(0.2, 1.0, size=5)
    p = rng.uniform(0.1, 1.0, size=(5, 3))
    p /= p.sum(axis=1, keepdims=True)
    inst = LemmaInstance(net_graph=gen_cycle(5), feed_graph=gen_clique(3),
                         n=1, f=1, q=q, p=p)
    lhs, _, holds = lemma1_check(inst)
    expected = 0.0
    for v in range(5):
        ball = {v, (v - 1) % 5, (v + 1) % 5}
        miss = math.prod(1.0 - q[u] for u in sorted(ball))
        expected += q[v] / (1.0 - miss)
    assert lhs == pytest.approx(expected, rel=1e-12)
    assert holds


def test_coverage_refuses_uncertified_alpha():
    inst = LemmaInstance(
        net_graph=gen_erdos_renyi(12, 0.3, substream(99, "net")),
        feed_graph=gen_erdos_renyi(8, 0.35, substream(99, "feed")),
        n=1, f=1,
        q=np.full(12, 0.5),
        p=np.full((12, 8), 1.0 / 8.0),
    )
    with pytest.raises(ValueError, match="exact independence number"):
        lemma1_check(inst)


# ---------------------------------------------------------------------------
# neighborhood-mass inequality


def test_neighborhood_mass_on_clique_is_one():
    lhs, alpha, holds = lemma3_check(gen_clique(7), 1, np.linspace(0.1, 1.0, 7))
    assert lhs == pytest.approx(1.0)
    assert alpha == 1.0
    assert holds


def test_neighborhood_mass_tight_on_edgeless():
    lhs, alpha, holds = lemma3_check(gen_edgeless(6), 2, np.full(6, 0.25))
    assert lhs == pytest.approx(6.0)
    assert alpha == 6.0
    assert holds


def test_neighborhood_mass_ignores_zero_weights():
    p = np.array([0.7, 0.0, 0.3, 0.0])
    lhs, _, holds = lemma3_check(gen_cycle(4), 1, p)
    # vertex 0 ball mass 0.7+0.3... cycle(4): ball(0) = {3,0,1} -> 0.7
    assert lhs == pytest.approx(0.7 / 0.7 + 0.3 / 0.3)
    assert holds
    with pytest.raises(ValueError, match="nonnegative"):
        lemma3_check(gen_cycle(4), 1, np.array([0.5, -0.1, 0.2, 0.1]))


# ---------------------------------------------------------------------------
# complement-product inequality


def test_complement_product_single_saturated_vertex():
    lhs, rhs, holds = lemma4_check(gen_edgeless(1), 1, np.array([1.0]))
    assert lhs == pytest.approx(1.0)
    assert rhs == pytest.approx(2.0 * AMP)
    assert holds


def test_complement_product_all_ones_counts_vertices():
    g = gen_cycle(6)
    lhs, rhs, holds = lemma4_check(g, 1, np.ones(6))
    assert lhs == pytest.approx(6.0)  # saturated coverage: every term is 1/1
    assert rhs == pytest.approx(AMP * (3 + 6))  # alpha(C6) = 3
    assert holds


def test_complement_product_rejects_out_of_range():
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        lemma4_check(gen_cycle(4), 1, np.array([0.5, 1.2, 0.1, 0.0]))


# ---------------------------------------------------------------------------
# two-graph inequality


def test_two_graph_single_point():
    k1 = gen_edgeless(1)
    lhs, rhs, holds = lemma6_check(k1, k1, np.array([[1.0]]))
    assert lhs == pytest.approx(1.0)
    assert rhs == pytest.approx(2.0 * AMP)
    assert holds


def test_two_graph_hypothesis_violation_names_the_pair():
    with pytest.raises(ValueError, match=r"i=0, u=0"):
        lemma6_check(gen_clique(2), gen_edgeless(1), np.array([[0.6], [0.6]]))


def test_two_graph_zero_denominator_names_the_pair():
    with pytest.raises(ValueError, match=r"i=0, v=0"):
        lemma6_check(gen_edgeless(1), gen_edgeless(2), np.array([[0.0, 1.0]]))


def test_two_graph_tiny_weights_hold_easily():
    # scaling w toward zero lands in the ratio-dominated regime, where the
    # sum is capped by the independence number alone — well inside the bound
    g1, g2 = gen_cycle(5), gen_clique(3)
    w = np.full((5, 3), 1e-6)
    lhs, rhs, holds = lemma6_check(g1, g2, w)
    assert holds
    alpha = rhs / AMP - float(w.sum())
    assert alpha == pytest.approx(2.0)  # alpha(C5 x K3) = alpha(C5)
    assert lhs <= alpha + 1e-6


@pytest.mark.parametrize("g", [gen_cycle(6), gen_clique(4),
                               gen_erdos_renyi(9, 0.4, substream(17, "g"))])
def test_two_graph_collapses_to_complement_product(g):
    # a single-vertex first factor turns the two-graph inequality into the
    # complement-product one at radius 1, on the same numbers
    c = substream(17, "c").uniform(0.1, 0.9, size=g.vertex_count)
    via6 = lemma6_check(gen_edgeless(1), g, c.reshape(1, -1))
    via4 = lemma4_check(g, 1, c)
    assert abs(via6.lhs - via4.lhs) <= 1e-12
    assert via6.rhs == via4.rhs
    assert via6.holds == via4.holds


# ---------------------------------------------------------------------------
# unbiasedness


def test_unbiasedness_single_agent_two_arms():
    config = SimConfig(net_graph=gen_edgeless(1), feed_graph=gen_edgeless(2),
                       n=0, f=0, q=np.ones(1), T=10, eta_policy=FixedEta(0.5))
    bias = unbiasedness_oracle(config, np.array([[0.5, 0.5]]), np.array([0.3, 0.9]))
    assert bias < 1e-12


def test_unbiasedness_two_adjacent_agents():
    config = SimConfig(net_graph=gen_clique(2), feed_graph=gen_edgeless(2),
                       n=1, f=0, q=np.full(2, 0.5), T=10, eta_policy=FixedEta(0.5))
    play = np.array([[0.25, 0.75], [0.6, 0.4]])
    assert unbiasedness_oracle(config, play) < 1e-12


def test_unbiasedness_battery_is_exact_everywhere():
    battery = unbiasedness_battery()
    assert len(battery) == 20
    for config, play, loss_row in battery:
        assert unbiasedness_oracle(config, play, loss_row) < 1e-12


def test_unbiasedness_refuses_large_instances():
    config = SimConfig(net_graph=gen_edgeless(7), feed_graph=gen_edgeless(3),
                       n=0, f=0, q=np.ones(7), T=10, eta_policy=FixedEta(0.5))
    with pytest.raises(ValueError, match="too many"):
        unbiasedness_oracle(config, np.full((7, 3), 1.0 / 3.0))


def test_unbiasedness_validates_play_rows():
    config = SimConfig(net_graph=gen_edgeless(2), feed_graph=gen_edgeless(2),
                       n=0, f=0, q=np.ones(2), T=10, eta_policy=FixedEta(0.5))
    with pytest.raises(ValueError, match="distributions"):
        unbiasedness_oracle(config, np.full((2, 2), 0.4))


# ---------------------------------------------------------------------------
# regret bound


def _bound_config(K, T, Q, d):
    net = gen_edgeless(1) if Q <= 1 else gen_edgeless(int(Q))
    q = np.full(net.vertex_count, Q / net.vertex_count)
    return SimConfig(net_graph=net, feed_graph=gen_edgeless(K), n=d, f=0,
                     q=q, T=T, eta_policy=FixedEta(0.1))


def test_bound_hand_computed_value():
    config = _bound_config(K=2, T=100, Q=1.0, d=0)
    value = theorem1_bound(config, eta=0.0589, alpha_product=1.0)
    assert value == pytest.approx(
        math.log(2) / 0.0589 + 0.0589 * 100 * 2.0 * AMP, rel=1e-12
    )
    assert value == pytest.approx(30.40, abs=0.01)


def test_bound_recovers_tuned_form_when_undelayed():
    K, T, alpha, Q = 5, 2000, 3.0, 2.0
    config = _bound_config(K=K, T=T, Q=Q, d=0)
    eta = math.sqrt(math.log(K) / (T * (alpha / Q + 1.0)))
    root = math.sqrt(math.log(K) * T * (alpha / Q + 1.0))
    assert theorem1_bound(config, eta, alpha) == pytest.approx(root * (1.0 + AMP))


def test_bound_is_convex_in_eta():
    config = _bound_config(K=4, T=500, Q=1.0, d=2)
    for lo in (0.001, 0.01, 0.1):
        hi = 10 * lo
        mid = (lo + hi) / 2
        chord = (theorem1_bound(config, lo, 2.0) + theorem1_bound(config, hi, 2.0)) / 2
        assert theorem1_bound(config, mid, 2.0) <= chord + 1e-9


def test_bound_validates_inputs():
    config = _bound_config(K=3, T=100, Q=1.0, d=0)
    with pytest.raises(ValueError, match="positive"):
        theorem1_bound(config, eta=0.0, alpha_product=1.0)
    with pytest.raises(ValueError, match="positive"):
        theorem1_bound(config, eta=0.1, alpha_product=0.0)
    single = SimConfig(net_graph=gen_edgeless(1), feed_graph=gen_edgeless(1),
                       n=0, f=0, q=np.ones(1), T=10, eta_policy=FixedEta(0.1))
    with pytest.raises(ValueError, match="2 arms"):
        theorem1_bound(single, eta=0.1, alpha_product=1.0)


# ---------------------------------------------------------------------------
# standalone learner vs. the network engine on the degenerate instance


def test_network_learner_collapses_to_standalone_exp3():
    T, K, eta = 200, 5, 0.7
    config = SimConfig(net_graph=gen_edgeless(1), feed_graph=gen_edgeless(K),
                       n=0, f=0, q=np.ones(1), T=T, eta_policy=FixedEta(eta))
    losses = stochastic_bernoulli_losses(K, T, substream(40, "losses"))
    activations = sample_activations(np.ones(1), T, substream(40, "activations"))

    seen_p, seen_arms = [], []
    uniforms = substream(40, "draws").random((T, 1))

    def recording_override(t, v, p):
        seen_p.append(p.copy())
        arm = draw_arm(p, uniforms[t, v])
        seen_arms.append(arm)
        return arm

    trace = run_simulation(config, losses, activations, substream(40, "draws"),
                           engine="reference", arm_override=recording_override)
    dists, arms = vanilla_exp3_trajectory(losses.values, eta, substream(40, "draws"))

    assert np.array_equal(np.stack(seen_p), dists)
    assert np.array_equal(np.array(seen_arms), arms)
    # the recording override returned the true draws, so the trace must be
    # exactly what the untouched engine produces
    untouched = run_simulation(config, losses, activations, substream(40, "draws"))
    assert np.array_equal(trace.incurred_cum, untouched.incurred_cum)
    assert np.array_equal(trace.incurred_cum,
                          np.cumsum(losses.values[np.arange(T), arms]))


# ---------------------------------------------------------------------------
# randomized suites and reporting


def test_generators_produce_valid_instances():
    for i in range(10):
        inst = random_lemma1_instance(substream(1, "a", i))
        assert inst.p.min() > 0
        g, dpow, p = random_lemma3_instance(substream(1, "b", i))
        assert p.min() >= 0 and 1 <= dpow <= 3
        g, dpow, c = random_lemma4_instance(substream(1, "c", i))
        assert c.min() >= 0 and c.max() <= 1
        g1, g2, w = random_lemma6_instance(substream(1, "d", i))
        closed = g1.closed_adjacency().astype(float)
        assert (closed @ w).max() <= 1.0


def test_suites_pass_and_report_well(tmp_path):
    results = run_verification_suites(seed=5, instances=25)
    assert [r.check for r in results] == [
        "lemma1", "lemma3", "lemma4", "lemma6", "unbiasedness",
    ]
    for r in results:
        assert r.failures == 0
        assert r.max_violation < 1e-12

    text = render_report(results)
    assert text.count("ok") == 5 and "FAILED" not in text

    out = tmp_path / "report.csv"
    write_report_csv(results, out)
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "check,instances,failures,max_violation"
    assert len(lines) == 6
    assert lines[1].startswith("lemma1,25,0,")
