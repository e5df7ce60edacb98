import io
import math

import numpy as np
import pytest

from coopbandit.environment import (
    ActivationSchedule,
    LossTable,
    load_losses,
    lower_bound_instance,
    sample_activations,
    save_losses,
    stochastic_bernoulli_losses,
)
from coopbandit.graphs import gen_clique, gen_cycle, gen_edgeless, is_independent_set, power


def test_loss_table_validates_range():
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        LossTable(values=np.array([[0.5, 1.2]]))
    with pytest.raises(ValueError, match="T x K"):
        LossTable(values=np.zeros(4))


def test_bernoulli_parameters():
    table = stochastic_bernoulli_losses(20, 10000, np.random.default_rng(0))
    assert table.optimal_arm == 0
    assert table.horizon == 10000 and table.arm_count == 20
    assert set(np.unique(table.values)) <= {0.0, 1.0}


def test_bernoulli_optimal_arm_mean():
    # Monte Carlo: the empirical mean of each arm should sit within 3 standard
    # errors of its parameter.
    K, T = 4, 200_000
    table = stochastic_bernoulli_losses(K, T, np.random.default_rng(1), optimal_arm=2)
    gap = math.sqrt(K / T)
    params = np.full(K, 0.5)
    params[2] = 0.5 - gap
    means = table.values.mean(axis=0)
    se = np.sqrt(params * (1 - params) / T)
    assert (np.abs(means - params) < 3 * se).all()
    assert means[2] == means.min()


def test_bernoulli_rejects_negative_mean():
    with pytest.raises(ValueError, match="< 0"):
        stochastic_bernoulli_losses(10, 12, np.random.default_rng(0))
    with pytest.raises(ValueError, match="at least 2"):
        stochastic_bernoulli_losses(1, 100, np.random.default_rng(0))


def test_bernoulli_deterministic_given_seed():
    a = stochastic_bernoulli_losses(5, 50, np.random.default_rng(123))
    b = stochastic_bernoulli_losses(5, 50, np.random.default_rng(123))
    assert np.array_equal(a.values, b.values)


def test_activations_extremes():
    always = sample_activations(np.ones(3), 10, np.random.default_rng(0))
    assert always.active.all()
    partial = sample_activations(np.array([0.0, 1.0]), 50, np.random.default_rng(0))
    assert not partial.active[:, 0].any()
    assert partial.active[:, 1].all()
    assert partial.Q == 1.0


def test_activation_counts_concentrate():
    q = np.full(20, 0.5)
    sched = sample_activations(q, 10000, np.random.default_rng(2))
    counts = sched.active.sum(axis=1)
    se = math.sqrt(20 * 0.25 / 10000)
    assert abs(counts.mean() - 10.0) < 3 * se * 20 ** 0.5  # SE of the mean count
    # independence across rounds: lag-1 autocorrelation should be tiny
    c = np.corrcoef(counts[:-1], counts[1:])[0, 1]
    assert abs(c) < 0.05


def test_activations_reject_bad_q():
    with pytest.raises(ValueError, match="positive activation"):
        sample_activations(np.zeros(4), 5, np.random.default_rng(0))
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        sample_activations(np.array([0.5, -0.1]), 5, np.random.default_rng(0))


def test_activations_deterministic_given_seed():
    q = np.array([0.3, 0.7, 1.0])
    a = sample_activations(q, 40, np.random.default_rng(9))
    b = sample_activations(q, 40, np.random.default_rng(9))
    assert np.array_equal(a.active, b.active)


def test_schedule_shape_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        ActivationSchedule(active=np.ones((5, 3), dtype=bool), q=np.ones(2))


def test_lower_bound_instance_on_clique():
    q = lower_bound_instance(gen_clique(5), 1, 1.0)
    assert np.count_nonzero(q) == 1
    assert q.max() == 1.0


def test_lower_bound_instance_on_edgeless():
    q = lower_bound_instance(gen_edgeless(4), 1, 2.0)
    assert np.allclose(q, 0.5)


def test_lower_bound_instance_on_cycle():
    q = lower_bound_instance(gen_cycle(5), 1, 1.0)
    support = np.flatnonzero(q)
    assert len(support) == 2
    assert np.allclose(q[support], 0.5)
    assert is_independent_set(gen_cycle(5), support)


def test_lower_bound_instance_respects_power():
    # C9 squared has independence number 3; support must be 2-separated
    g = gen_cycle(9)
    q = lower_bound_instance(g, 2, 1.5)
    support = np.flatnonzero(q)
    assert is_independent_set(power(g, 2), support)
    assert q.sum() == pytest.approx(1.5)


def test_lower_bound_instance_q_range():
    with pytest.raises(ValueError, match=r"\(0, 2\]"):
        lower_bound_instance(gen_cycle(5), 1, 2.5)
    with pytest.raises(ValueError, match=r"\(0, 2\]"):
        lower_bound_instance(gen_cycle(5), 1, 0.0)


def test_losses_roundtrip():
    table = LossTable(values=np.array([[0.25, 1.0], [0.0, 0.7311]]))
    buf = io.StringIO()
    save_losses(table, buf)
    back = load_losses(io.StringIO(buf.getvalue()))
    assert np.array_equal(back.values, table.values)


def test_load_losses_rejects():
    with pytest.raises(ValueError, match="empty"):
        load_losses(io.StringIO(""))
    with pytest.raises(ValueError, match="expected 2 values"):
        load_losses(io.StringIO("0.1,0.2\n0.3\n"))
    with pytest.raises(ValueError, match="non-numeric"):
        load_losses(io.StringIO("0.1,zebra\n"))
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        load_losses(io.StringIO("0.1,1.7\n"))
