"""Selection-policy behavior: optimality, dominance, firewalls, tie rules."""
import dataclasses
import itertools

import numpy as np
import pytest

from relaysec.channel import SystemConfig, draw_channels
from relaysec.metrics import SlotScorer
from relaysec.policies import (
    CandidateSet,
    EnumerationBudgetError,
    MATRIX_POLICIES,
    POLICY_NAMES,
    SCALAR_POLICIES,
    Selection,
    select_greedy,
    select_max_min,
    select_max_ratio,
    select_ml,
    select_random_matrix,
    select_random_single,
    select_sr_exhaustive,
    select_sr_partial,
    select_sr_single,
)


def scorer_for(cfg, cs, tags=None):
    heads = [cs.h_relay[i] for i in range(cfg.num_relays)]
    return SlotScorer(cfg, cs, heads, tags or [np.inf] * cfg.num_relays)


def all_relays(cfg) -> CandidateSet:
    every = tuple(range(cfg.num_relays))
    return CandidateSet(receive=every, transmit=every)


def single_antenna_cfg(**kw) -> SystemConfig:
    base = dict(
        source_antennas=1, relay_antennas=1, jammer_antennas=1,
        user_antennas=1, eav_antennas=1, num_users=1, num_eavs=1,
        num_relays=4, active_relays=1, active_jammers=1, policy="max-min",
    )
    base.update(kw)
    return SystemConfig(**base)


def test_policy_name_tables_are_consistent():
    assert set(MATRIX_POLICIES) | set(SCALAR_POLICIES) | {"random"} == set(POLICY_NAMES)
    assert not set(MATRIX_POLICIES) & set(SCALAR_POLICIES)


# ---------------------------------------------------------------------------
# Exhaustive search
# ---------------------------------------------------------------------------


def test_exhaustive_equals_brute_force_recomputation():
    cfg = SystemConfig(num_relays=5, active_relays=2, active_jammers=2)
    cs = draw_channels(cfg, 0, 0)
    scorer = scorer_for(cfg, cs)
    sel = select_sr_exhaustive(cfg, all_relays(cfg), scorer)
    best = -np.inf
    for jam in itertools.combinations(range(5), 2):
        for recv in itertools.combinations(set(range(5)) - set(jam), 2):
            best = max(best, scorer.score(tuple(sorted(recv)), jam))
    assert sel.score == pytest.approx(best)
    assert not set(sel.receiving_relays) & set(sel.transmitting_jammers)


def test_exhaustive_respects_eligibility():
    cfg = SystemConfig()
    cs = draw_channels(cfg, 0, 1)
    cands = CandidateSet(receive=(0, 1, 2), transmit=(3, 4, 5))
    sel = select_sr_exhaustive(cfg, cands, scorer_for(cfg, cs))
    assert sel.receiving_relays == (0, 1, 2)
    assert sel.transmitting_jammers == (3, 4, 5)


def test_exhaustive_returns_none_when_short():
    cfg = SystemConfig()
    cs = draw_channels(cfg, 0, 0)
    scorer = scorer_for(cfg, cs)
    assert select_sr_exhaustive(cfg, CandidateSet((0, 1), (2, 3, 4)), scorer) is None
    assert select_sr_exhaustive(cfg, CandidateSet((0, 1, 2, 3), (4, 5)), scorer) is None
    # overlapping eligibility is fine as long as a disjoint split exists
    sel = select_sr_exhaustive(cfg, CandidateSet((0, 1, 2, 3, 4), (3, 4, 5)), scorer)
    assert sel is not None
    assert sel.transmitting_jammers == (3, 4, 5)
    assert sel.receiving_relays == (0, 1, 2)
    # ... but total overlap with no room left is an outage
    assert select_sr_exhaustive(
        cfg, CandidateSet((0, 1, 2, 3), (1, 2, 3)), scorer
    ) is None


def test_enumeration_budget_guard():
    cfg = SystemConfig(enum_cap=10)
    cs = draw_channels(cfg, 0, 0)
    with pytest.raises(EnumerationBudgetError):
        select_sr_exhaustive(cfg, all_relays(cfg), scorer_for(cfg, cs))


# ---------------------------------------------------------------------------
# Greedy builder
# ---------------------------------------------------------------------------


def test_greedy_never_beats_exhaustive():
    cfg = SystemConfig()
    for slot in range(20):
        cs = draw_channels(cfg, 0, slot)
        scorer = scorer_for(cfg, cs)
        full = select_sr_exhaustive(cfg, all_relays(cfg), scorer)
        steps = select_greedy(cfg, all_relays(cfg), scorer)
        assert steps.score <= full.score + 1e-12


def test_greedy_matches_exhaustive_at_depth_one():
    cfg = SystemConfig(active_relays=1, active_jammers=1)
    for slot in range(12):
        cs = draw_channels(cfg, 3, slot)
        scorer = scorer_for(cfg, cs)
        full = select_sr_exhaustive(cfg, all_relays(cfg), scorer)
        steps = select_greedy(cfg, all_relays(cfg), scorer)
        assert steps.score == full.score
        assert steps.receiving_relays == full.receiving_relays
        assert steps.transmitting_jammers == full.transmitting_jammers


def test_greedy_returns_none_when_pool_runs_dry():
    cfg = SystemConfig()
    cs = draw_channels(cfg, 0, 0)
    scorer = scorer_for(cfg, cs)
    assert select_greedy(cfg, CandidateSet((0, 1), (2, 3, 4, 5)), scorer) is None


def test_greedy_selection_is_disjoint_and_sized():
    cfg = SystemConfig()
    cs = draw_channels(cfg, 0, 9)
    sel = select_greedy(cfg, all_relays(cfg), scorer_for(cfg, cs))
    assert len(sel.receiving_relays) == cfg.active_relays
    assert len(sel.transmitting_jammers) == cfg.active_jammers
    assert not set(sel.receiving_relays) & set(sel.transmitting_jammers)


# ---------------------------------------------------------------------------
# Eavesdropper-blind policy
# ---------------------------------------------------------------------------


def test_partial_policy_ignores_eavesdropper_realizations():
    """Resampling every eavesdropper link leaves the selection bit-identical."""
    cfg = SystemConfig()
    cs = draw_channels(cfg, 0, 0)
    other = draw_channels(cfg.replace(seed=cfg.seed + 999), 0, 0)
    resampled = dataclasses.replace(
        cs, h_eav=other.h_eav, h_jam_eav=other.h_jam_eav
    )
    a = select_sr_partial(cfg, cs.legitimate_view(), all_relays(cfg))
    b = select_sr_partial(cfg, resampled.legitimate_view(), all_relays(cfg))
    assert a == b


def test_partial_policy_prefers_strong_delivery_links():
    cfg = SystemConfig()
    cs = draw_channels(cfg, 0, 0)
    h = np.array(cs.h_jam_user)
    h[0] *= 40.0   # relay 0 has overwhelming links toward every user
    h[5] *= 1e-3   # relay 5 is nearly disconnected from the users
    boosted = dataclasses.replace(cs, h_jam_user=h)
    sel = select_sr_partial(cfg, boosted.legitimate_view(), all_relays(cfg))
    assert 0 in sel.transmitting_jammers
    assert 5 not in sel.transmitting_jammers


def test_partial_policy_handles_short_pools():
    cfg = SystemConfig()
    cs = draw_channels(cfg, 0, 0)
    view = cs.legitimate_view()
    assert select_sr_partial(cfg, view, CandidateSet((0, 1, 2), (3, 4))) is None
    assert select_sr_partial(cfg, view, CandidateSet((0, 1), (2, 3, 4))) is None


# ---------------------------------------------------------------------------
# Random baselines
# ---------------------------------------------------------------------------


def test_random_matrix_uniform_enough():
    cfg = SystemConfig()
    cs = draw_channels(cfg, 0, 0)
    rng = np.random.default_rng(42)
    seen = np.zeros(cfg.num_relays)
    for _ in range(600):
        sel = select_random_matrix(cfg, all_relays(cfg), rng)
        assert not set(sel.receiving_relays) & set(sel.transmitting_jammers)
        for i in sel.receiving_relays:
            seen[i] += 1
    # each relay receives in roughly half the draws (3 of 6 slots)
    assert (np.abs(seen / 600 - 0.5) < 0.1).all()


def test_random_single_covers_both_hops():
    cfg = single_antenna_cfg()
    rng = np.random.default_rng(3)
    cands = CandidateSet(receive=(0, 1), transmit=(2, 3))
    hits = {("receive", 0): 0, ("receive", 1): 0,
            ("transmit", 2): 0, ("transmit", 3): 0}
    for _ in range(400):
        sel = select_random_single(cfg, cands, rng)
        key = ((sel.hop, sel.receiving_relays[0]) if sel.hop == "receive"
               else (sel.hop, sel.transmitting_jammers[0]))
        hits[key] += 1
    assert all(v > 50 for v in hits.values()), hits
    assert select_random_single(cfg, CandidateSet((), ()), rng) is None


# ---------------------------------------------------------------------------
# Single-antenna merit policies
# ---------------------------------------------------------------------------


def scalar_channels(cfg, g_sr, g_rd, g_se=0.1, g_re=None):
    """Build a single-antenna ChannelSet with prescribed link amplitudes."""
    cs = draw_channels(cfg, 0, 0)
    r = cfg.num_relays
    h_relay = np.array([[[g]] for g in g_sr], dtype=complex)
    h_jam_user = np.array(cs.h_jam_user)
    for i, g in enumerate(g_rd):
        h_jam_user[i, 0, 0, 0] = g
    h_eav = np.array([[[g_se]]], dtype=complex)
    h_jam_eav = np.array(cs.h_jam_eav)
    for i in range(r):
        h_jam_eav[i, 0, 0, 0] = (g_re[i] if g_re is not None else 0.1)
    return dataclasses.replace(
        cs, h_relay=h_relay, h_jam_user=h_jam_user,
        h_eav=h_eav, h_jam_eav=h_jam_eav,
    )


def test_max_min_picks_strongest_available_link():
    cfg = single_antenna_cfg()
    cs = scalar_channels(cfg, g_sr=[1.0, 3.0, 0.5, 0.2], g_rd=[0.1, 0.1, 2.0, 0.1])
    cands = CandidateSet(receive=(0, 1, 2, 3), transmit=(2, 3))
    sel = select_max_min(cfg, cs.legitimate_view(), cands)
    assert sel.hop == "receive" and sel.receiving_relays == (1,)
    # with relay 1 full, the strongest remaining link is relay 2's delivery
    sel = select_max_min(cfg, cs.legitimate_view(),
                         CandidateSet((0, 2, 3), (2, 3)))
    assert sel.hop == "transmit" and sel.transmitting_jammers == (2,)


def test_max_min_tie_prefers_delivery_then_low_index():
    cfg = single_antenna_cfg()
    cs = scalar_channels(cfg, g_sr=[2.0, 2.0, 0.1, 0.1], g_rd=[0.1, 0.1, 2.0, 2.0])
    cands = CandidateSet(receive=(0, 1), transmit=(2, 3))
    sel = select_max_min(cfg, cs.legitimate_view(), cands)
    assert sel.hop == "transmit" and sel.transmitting_jammers == (2,)
    sel = select_max_min(cfg, cs.legitimate_view(), CandidateSet((0, 1), ()))
    assert sel.hop == "receive" and sel.receiving_relays == (0,)


def test_max_ratio_accounts_for_leakage():
    cfg = single_antenna_cfg()
    # relay 1 has the best raw link but terrible exposure; relay 0 wins on ratio
    cs = scalar_channels(cfg, g_sr=[0.1, 0.1, 0.1, 0.1],
                         g_rd=[1.0, 3.0, 0.1, 0.1],
                         g_se=1.0, g_re=[0.1, 30.0, 10.0, 10.0])
    cands = CandidateSet(receive=(), transmit=(0, 1))
    sel = select_max_ratio(cfg, cs, cands)
    assert sel.transmitting_jammers == (0,)


def test_ml_uses_only_the_estimates():
    cfg = single_antenna_cfg()
    cands = CandidateSet(receive=(0, 1), transmit=(2,))
    est = {("receive", 0): 0.4, ("receive", 1): 2.0, ("transmit", 2): 1.0}
    sel = select_ml(cfg, cands, est)
    assert sel.hop == "receive" and sel.receiving_relays == (1,)


def test_sr_single_ranks_by_secrecy_ratio():
    cfg = single_antenna_cfg(power=10.0)
    # delivery of relay 2: ratio (1+10*4)/(1+10*0.01) ~ 37; reception of
    # relay 1: (1+10*9)/(1+10*1) ~ 8.3; so relay 2 transmit wins
    cs = scalar_channels(cfg, g_sr=[0.5, 3.0, 0.5, 0.5],
                         g_rd=[0.1, 0.1, 2.0, 0.1],
                         g_se=1.0, g_re=[1.0, 1.0, 0.1, 1.0])
    sel = select_sr_single(cfg, cs, CandidateSet((0, 1, 2, 3), (2, 3)))
    assert sel.hop == "transmit" and sel.transmitting_jammers == (2,)


def test_sr_single_strict_phase_flag_changes_merit():
    cfg = single_antenna_cfg(power=4.0)
    # a link amplitude of -0.5 cancels against the unit offset when phases
    # superpose coherently, but contributes |h|^2 power in the default form
    cs = scalar_channels(cfg, g_sr=[-0.5, 0.3, 0.1, 0.1],
                         g_rd=[0.0, 0.0, 0.0, 0.0], g_se=0.0)
    cands = CandidateSet(receive=(0, 1), transmit=())
    plain = select_sr_single(cfg, cs, cands)
    strict = select_sr_single(cfg, cs, cands, strict_phase=True)
    assert plain.receiving_relays == (0,)   # |h|^2: 0.25 > 0.09
    assert strict.receiving_relays == (1,)  # |1 + 2(-0.5)|^2 = 0 loses


def test_scalar_policies_return_none_without_candidates():
    cfg = single_antenna_cfg()
    cs = draw_channels(cfg, 0, 0)
    empty = CandidateSet((), ())
    assert select_max_min(cfg, cs.legitimate_view(), empty) is None
    assert select_max_ratio(cfg, cs, empty) is None
    assert select_sr_single(cfg, cs, empty) is None
    assert select_ml(cfg, empty, {}) is None


def test_selection_record_shape():
    sel = Selection((0,), (), 1.5, hop="receive")
    assert sel.receiving_relays == (0,) and not sel.outage
