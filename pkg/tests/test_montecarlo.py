import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nomaharq import analytic
from nomaharq.montecarlo import (
    OutageEstimate,
    SimPlan,
    chunk_stream,
    simulate,
    simulate_escalating,
    simulate_oma,
    simulate_outage_user1,
    simulate_outage_user2,
    simulate_protocol,
    suggest_tilt,
    wilson_interval,
)

from conftest import fig1_config


def test_simplan_defaults_and_chunks():
    plan = SimPlan(1_000_003)
    assert plan.chunk_size == 250_000
    sizes = [n for _, n in plan.chunks()]
    assert sum(sizes) == 1_000_003 and sizes[-1] == 3
    assert [i for i, _ in plan.chunks()] == list(range(5))
    assert SimPlan(10).chunk_size == 10
    assert plan.with_trials(100).chunk_size == 100
    assert plan.with_rounds(3).t_rounds == 3


@pytest.mark.parametrize("kwargs", [
    dict(trials=0), dict(trials=10, t_rounds=0), dict(trials=10, workers=0),
    dict(trials=10, seed=-1), dict(trials=10, seed=2**64), dict(trials=10, chunk_size=11),
    dict(trials=10, chunk_size=0),
])
def test_simplan_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        SimPlan(**kwargs)


def test_streams_are_keyed():
    a = chunk_stream(7, 1, 0).random(4)
    assert np.array_equal(a, chunk_stream(7, 1, 0).random(4))
    assert not np.array_equal(a, chunk_stream(7, 2, 0).random(4))
    assert not np.array_equal(a, chunk_stream(7, 1, 1).random(4))
    assert not np.array_equal(a, chunk_stream(8, 1, 0).random(4))


@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=1, max_value=10_000))
def test_wilson_interval_contains_estimate(events, extra):
    n = events + extra
    p = events / n
    lo, hi = wilson_interval(p, n)
    assert 0.0 <= lo <= p <= hi <= 1.0


def test_wilson_interval_reference():
    # standard textbook value for 10/100 at 95%
    lo, hi = wilson_interval(0.1, 100)
    assert lo == pytest.approx(0.05523, abs=1e-4)
    assert hi == pytest.approx(0.17437, abs=1e-4)


@given(st.integers(min_value=0, max_value=1000), st.integers(min_value=1, max_value=1000))
def test_estimate_from_counts(events, extra):
    n = events + extra
    est = OutageEstimate.from_counts(events, n)
    assert est.p_hat == events / n
    assert est.std_err == pytest.approx(math.sqrt(est.p_hat * (1 - est.p_hat) / n))
    assert est.ci95[0] <= est.p_hat <= est.ci95[1]
    assert est.agrees_with(est.p_hat)


def test_analytic_estimate():
    est = OutageEstimate.analytic(0.25)
    assert est.source == "analytic" and est.ci95 == (0.25, 0.25) and est.std_err == 0


@pytest.mark.parametrize("kind", ["user1", "user2", "oma1", "oma2"])
def test_worker_count_invariance(kind):
    cfg = fig1_config(10.0)
    base = simulate(cfg, SimPlan(50_000, 2, seed=3, chunk_size=7_000), kind)
    for workers in (2, 5):
        other = simulate(cfg, SimPlan(50_000, 2, seed=3, chunk_size=7_000, workers=workers), kind)
        assert other == base


def test_seed_changes_result():
    cfg = fig1_config(10.0)
    a = simulate_outage_user1(cfg, SimPlan(20_000, seed=1))
    b = simulate_outage_user1(cfg, SimPlan(20_000, seed=2))
    assert a.p_hat != b.p_hat


def test_tiny_snr_always_outage():
    cfg = fig1_config(-80.0)
    plan = SimPlan(10_000, 2)
    for kind in ("user1", "user2", "oma1", "oma2"):
        assert simulate(cfg, plan, kind).p_hat == 1.0


def test_threshold_above_sinr_ceiling_is_certain_outage():
    # per-round user-1 SINR < beta, so the sum is < T beta <= threshold
    cfg = fig1_config(60.0, rate1=2.0)
    for t in (1, 2, 3):
        assert cfg.threshold(1, t) >= t * cfg.beta
        assert simulate_outage_user1(cfg, SimPlan(20_000, t)).p_hat == 1.0


@pytest.mark.parametrize("snr_db", [10.0, 20.0, 30.0])
def test_user1_single_round_matches_exact_cdf(snr_db):
    cfg = fig1_config(snr_db)
    est = simulate_outage_user1(cfg, SimPlan(10_000_000, 1, seed=11))
    exact = analytic.outage_noma_single(cfg, 1)
    assert est.agrees_with(exact, n_se=3.0)


def test_user2_joint_at_least_own_decode():
    cfg = fig1_config(20.0)
    for t in (1, 2):
        est = simulate_outage_user2(cfg, SimPlan(2_000_000, t, seed=5))
        own = analytic.outage_user2_highsnr(cfg, t).probability
        assert est.p_hat >= own - 3 * est.std_err


@pytest.mark.parametrize("user", [1, 2])
@pytest.mark.parametrize("t", [1, 2, 3])
def test_oma_matches_erlang(user, t):
    cfg = fig1_config(15.0)
    est = simulate_oma(cfg, user, SimPlan(2_000_000, t, seed=9))
    exact = analytic.outage_oma(cfg, user, t)
    # near p = 1 the binomial s.e. collapses to zero; the Wilson interval does not
    assert est.agrees_with(exact, n_se=3.0) or est.ci95[0] <= exact <= est.ci95[1]


def test_monotone_in_snr():
    plan = SimPlan(200_000, 2, seed=4)
    for kind in ("user1", "user2", "oma1", "oma2"):
        values = [simulate(fig1_config(db), plan, kind).p_hat for db in (0, 10, 20, 30)]
        assert all(a >= b for a, b in zip(values, values[1:])), (kind, values)


def test_monotone_in_rounds_at_high_snr():
    cfg = fig1_config(30.0)
    for kind in ("user1", "user2"):
        values = [simulate(cfg, SimPlan(1_000_000, t, seed=6), kind).p_hat for t in (1, 2, 3)]
        assert values[0] >= values[1] >= values[2], (kind, values)


@pytest.mark.parametrize("snr_db, t", [(35.0, 1), (40.0, 2), (45.0, 3)])
def test_importance_sampling_matches_erlang(snr_db, t):
    cfg = fig1_config(snr_db)
    tilt = suggest_tilt(cfg, t)
    assert 0 < tilt < 1
    est = simulate_outage_user2(cfg, SimPlan(1_000_000, t, seed=2), tilt=tilt)
    exact = analytic.outage_user2_highsnr(cfg, t).probability
    assert est.p_hat == pytest.approx(exact, rel=0.05)
    assert est.effective_trials > 1_000_000


def test_importance_sampling_without_tilt_equals_plain():
    cfg = fig1_config(10.0)
    plan = SimPlan(100_000, 2, seed=1)
    plain = simulate_outage_user2(cfg, plan)
    weighted = simulate_outage_user2(cfg, plan, tilt=1.0)
    assert weighted.p_hat == pytest.approx(plain.p_hat, rel=1e-12)
    with pytest.raises(ValueError):
        simulate_outage_user2(cfg, plan, tilt=0.0)


def test_escalation_triggers_on_rare_events():
    cfg = fig1_config(50.0)
    est = simulate_escalating(cfg, SimPlan(10_000, 1), "user2", escalated_trials=50_000)
    assert est.trials == 50_000
    common = simulate_escalating(fig1_config(0.0), SimPlan(10_000, 1), "user1", escalated_trials=50_000)
    assert common.trials == 10_000


def test_unknown_kind():
    with pytest.raises(ValueError):
        simulate(fig1_config(), SimPlan(10), "user3")


def test_protocol_single_round_matches_outage():
    cfg = fig1_config(10.0)
    stats = simulate_protocol(cfg, 1, 100_000, seed=3)
    assert stats.packets == 100_000
    assert stats.user1_outage.p_hat == simulate_outage_user1(cfg, SimPlan(100_000, 1, seed=3)).p_hat
    assert stats.user2_outage.p_hat == simulate_outage_user2(cfg, SimPlan(100_000, 1, seed=3)).p_hat
    assert stats.mean_rounds == 1.0


def test_protocol_high_snr_finishes_in_one_round():
    stats = simulate_protocol(fig1_config(60.0), 3, 20_000, seed=1)
    assert stats.rounds_used_histogram[0] >= 0.999 * stats.packets
    assert stats.discarded <= 2
    assert stats.mean_rounds < 1.001


@pytest.mark.parametrize("t_max", [2, 3])
def test_protocol_discard_matches_user1_outage(t_max):
    cfg = fig1_config(20.0)
    stats = simulate_protocol(cfg, t_max, 200_000, seed=8, chunk_size=30_000, workers=3)
    ref = simulate_outage_user1(cfg, SimPlan(200_000, t_max, seed=8, chunk_size=30_000))
    assert stats.user1_outage.p_hat == ref.p_hat
    assert stats.discarded >= max(stats.user1_outage.p_hat, stats.user2_outage.p_hat) * stats.packets
    assert len(stats.rounds_used_histogram) == t_max + 1
    assert 1.0 <= stats.mean_rounds <= t_max


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=-10, max_value=50), st.integers(min_value=1, max_value=3))
def test_estimates_are_probabilities(snr_db, t):
    cfg = fig1_config(snr_db)
    for kind in ("user1", "user2", "oma1", "oma2"):
        est = simulate(cfg, SimPlan(2_000, t), kind)
        assert 0.0 <= est.p_hat <= 1.0
        assert est.ci95[0] <= est.p_hat <= est.ci95[1]
