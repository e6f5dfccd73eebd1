"""Slot-by-slot network simulation and the Monte Carlo driver.

Each slot proceeds as: draw fading -> build buffer-eligibility candidate
sets -> run the configured selection policy -> gate on the score threshold
-> move blocks through buffers -> record the measured secrecy rate.

Matrix mode measures the aggregate user rate (each delivered stream capped
by the rate tagged on its block when it was stored) minus the aggregate
eavesdropper rate, clamped at zero.  Single-antenna mode alternates hops:
reception slots bank a block with its achievable rate and leakage, delivery
slots realize max(0, min(stored, delivery) - (stored leak + delivery leak)).

When a full selection is infeasible the engine degrades gracefully instead
of deadlocking: a reception-only slot (buffers have room) or a delivery-only
slot (every buffer full).  Both count as outages in the statistics.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .buffers import RelayBuffer, StoredBlock, make_buffers
from .channel import (
    ChannelSet,
    FAMILY_POLICY,
    FAMILY_PROBE,
    SystemConfig,
    draw_channels,
    stack_jammer_to_user,
    substream,
)
from .metrics import (
    SlotScorer,
    gamma_eav_full,
    gamma_user_full,
    head_state,
    relay_reception_gamma,
)
from .numerics import log_det_i_plus, zf_precoder
from .policies import (
    MATRIX_POLICIES,
    SCALAR_POLICIES,
    CandidateSet,
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

ChannelFn = Callable[[SystemConfig, int, int], ChannelSet]


@dataclass(frozen=True)
class SlotOutcome:
    """What one slot did and what it was worth."""

    slot: int
    kind: str               # normal | receive | transmit | reception | delivery | idle
    score: float            # policy score that gated the slot (nan when none ran)
    secrecy: float          # measured secrecy bits for this slot
    selection: Selection | None
    stored: tuple[int, ...] = ()     # relays that banked a block
    delivered: tuple[int, ...] = ()  # relays whose head block was sent


@dataclass
class TrialState:
    """Mutable per-trial state: the buffers plus conservation counters."""

    cfg: SystemConfig
    trial: int
    buffers: list[RelayBuffer] = field(default_factory=list)
    stored_total: int = 0
    delivered_total: int = 0

    def __post_init__(self):
        if not self.buffers:
            self.buffers = make_buffers(self.cfg.num_relays, self.cfg.buffer_size)

    def occupancy(self) -> int:
        return sum(b.occupancy for b in self.buffers)

    def candidates(self) -> CandidateSet:
        return CandidateSet(
            receive=tuple(i for i, b in enumerate(self.buffers) if b.eligible("receive")),
            transmit=tuple(i for i, b in enumerate(self.buffers) if b.eligible("transmit")),
        )


@dataclass(frozen=True)
class RunResult:
    """Monte Carlo aggregate for one configuration."""

    cfg: SystemConfig
    per_trial_means: tuple[float, ...]
    mean_rate: float
    stderr: float
    outage_frac: float
    idle_frac: float
    counted_slots: int
    outcomes: tuple | None = None


def warmup_slots(cfg: SystemConfig) -> int:
    """Initial slots excluded from statistics while buffers fill."""
    return min(2 * cfg.buffer_size, max(cfg.slots - 1, 0))


# ---------------------------------------------------------------------------
# Signal-level synthesis (zero-forcing delivery and pilot probes)
# ---------------------------------------------------------------------------


def forward_zero_forced(cfg: SystemConfig, cs: ChannelSet, jam,
                        user_symbols, *, noise_scale: float = 0.0,
                        rng: np.random.Generator | None = None) -> dict:
    """Synthesize one zero-forced delivery: transmitting relays to users.

    The selected relays' links toward every user are stacked into one tall
    matrix and inverted jointly, so each user's received block equals its own
    symbol block exactly, up to noise.

    Args:
        jam: transmitting relay indices (their antennas stack column-wise).
        user_symbols: list of (user_antennas, n) symbol blocks, one per user.
        noise_scale: standard deviation of additive receiver noise (0 = off).

    Returns:
        dict with "tx" (stacked transmit block), "rx", "desired",
        "interference", "noise" -- the last four are per-user lists, with
        rx = desired + interference + noise exactly.
    """
    if len(user_symbols) != cfg.num_users:
        raise ValueError("need one symbol block per user")
    h_rows = [stack_jammer_to_user(cs, jam, r) for r in range(cfg.num_users)]
    h_all = np.vstack(h_rows)
    u = zf_precoder(h_all, rank_tol=cfg.rank_tol)
    x = np.vstack([np.asarray(s, dtype=np.complex128) for s in user_symbols])
    tx = u @ x
    out = {"tx": tx, "rx": [], "desired": [], "interference": [], "noise": []}
    nu = cfg.user_antennas
    for r in range(cfg.num_users):
        clean = h_rows[r] @ tx
        desired = x[r * nu:(r + 1) * nu]
        if noise_scale > 0.0:
            if rng is None:
                raise ValueError("noise_scale > 0 requires an rng")
            noise = noise_scale * (
                rng.standard_normal(desired.shape)
                + 1j * rng.standard_normal(desired.shape)
            ) / np.sqrt(2.0)
        else:
            noise = np.zeros_like(desired)
        out["rx"].append(clean + noise)
        out["desired"].append(desired)
        out["interference"].append(clean - desired)
        out["noise"].append(noise)
    return out


def _qpsk(rng: np.random.Generator, n: int) -> np.ndarray:
    bits = rng.integers(0, 2, size=(2, n))
    return ((2 * bits[0] - 1) + 1j * (2 * bits[1] - 1)) / np.sqrt(2.0)


def ml_gain_estimates(cfg: SystemConfig, cs: ChannelSet, trial: int, slot: int,
                      cands: CandidateSet) -> dict:
    """Pilot-probe gain estimates for every eligible single-antenna link.

    Each candidate link is probed with ``probe_len`` unit-power pilot symbols
    at the configured transmit power; the estimate is the squared magnitude
    of the least-squares channel fit.  All randomness comes from the probe
    substream, so estimates are reproducible and independent of the fading.
    """
    rng = substream(cfg.seed, trial, slot, FAMILY_PROBE)
    amp = np.sqrt(cfg.snr)
    est: dict = {}

    def probe(h: complex) -> float:
        s = _qpsk(rng, cfg.probe_len)
        noise = (rng.standard_normal(cfg.probe_len)
                 + 1j * rng.standard_normal(cfg.probe_len)) / np.sqrt(2.0)
        y = amp * h * s + noise
        h_hat = np.vdot(s, y) / (amp * cfg.probe_len)
        return float(abs(h_hat) ** 2)

    for i in cands.receive:
        est[("receive", i)] = probe(complex(cs.gain_source_relay(i)))
    for i in cands.transmit:
        est[("transmit", i)] = probe(complex(cs.gain_relay_dest(i)))
    return est


# ---------------------------------------------------------------------------
# Slot stepping
# ---------------------------------------------------------------------------


def _reception_rate(cfg: SystemConfig, cs: ChannelSet, relay: int, jam) -> float:
    gamma = relay_reception_gamma(cfg, cs, relay, jam, cfg.iri_cancellation)
    return log_det_i_plus(gamma)


def _store_block(cfg: SystemConfig, state: TrialState, cs: ChannelSet,
                 relay: int, slot: int, rate: float, leak: float) -> None:
    tag = float("inf") if cfg.store_noisy_blocks else rate
    state.buffers[relay].enqueue(StoredBlock(
        signal=np.zeros((cfg.relay_antennas, 1), dtype=np.complex128),
        origin_slot=slot,
        channel=np.array(cs.h_relay[relay]),
        rate_tag=tag,
        leak_tag=leak,
    ))
    state.stored_total += 1


def _dispatch_matrix(cfg: SystemConfig, cs: ChannelSet, cands: CandidateSet,
                     scorer: SlotScorer, trial: int, slot: int) -> Selection | None:
    if cfg.policy == "sr-exhaustive":
        return select_sr_exhaustive(cfg, cands, scorer)
    if cfg.policy == "greedy":
        return select_greedy(cfg, cands, scorer)
    if cfg.policy == "sr-partial":
        return select_sr_partial(cfg, cs.legitimate_view(), cands)
    if cfg.policy == "random":
        # Scoreless by design: random certifies nothing, so its selections
        # carry score 0 and idle whenever a positive threshold is set.
        rng = substream(cfg.seed, trial, slot, FAMILY_POLICY)
        return select_random_matrix(cfg, cands, rng, scorer=None)
    raise ValueError(f"policy {cfg.policy!r} cannot run in matrix mode")


def _dispatch_single(cfg: SystemConfig, cs: ChannelSet, cands: CandidateSet,
                     trial: int, slot: int) -> Selection | None:
    if cfg.policy == "max-min":
        return select_max_min(cfg, cs.legitimate_view(), cands)
    if cfg.policy == "max-ratio":
        return select_max_ratio(cfg, cs, cands)
    if cfg.policy == "ml":
        est = ml_gain_estimates(cfg, cs, trial, slot, cands)
        return select_ml(cfg, cands, est)
    if cfg.policy == "sr-single":
        return select_sr_single(cfg, cs, cands)
    if cfg.policy == "random":
        rng = substream(cfg.seed, trial, slot, FAMILY_POLICY)
        return select_random_single(cfg, cands, rng)
    raise ValueError(f"policy {cfg.policy!r} cannot run in single-antenna mode")


def _step_matrix(cfg: SystemConfig, state: TrialState, cs: ChannelSet,
                 slot: int) -> SlotOutcome:
    cands = state.candidates()
    channels, tags, _ = head_state(state.buffers)
    current = [cs.h_relay[i] for i in range(cfg.num_relays)]
    scorer = SlotScorer(cfg, cs, current, tags)
    selection = _dispatch_matrix(cfg, cs, cands, scorer, state.trial, slot)

    if selection is None:
        if cands.receive:
            # Reception-only slot: the source feeds as many eligible relays
            # as it can zero-force toward; nothing is delivered.
            room = cfg.source_antennas // cfg.relay_antennas
            chosen = tuple(sorted(cands.receive)[:min(cfg.active_relays, room)])
            for i in chosen:
                _store_block(cfg, state, cs, i, slot,
                             _reception_rate(cfg, cs, i, ()), 0.0)
            return SlotOutcome(slot, "reception", float("nan"), 0.0, None,
                               stored=chosen)
        # Every buffer is full: flush a delivery-only slot so the network
        # cannot deadlock.  No stored-block emphasis is assumed.
        jam = tuple(sorted(cands.transmit)[:cfg.active_jammers])
        per_user = [0.0] * cfg.num_users
        for pos, k in enumerate(jam):
            r = pos % cfg.num_users
            rate = log_det_i_plus(gamma_user_full(cfg, cs, None, r, jam))
            per_user[r] += min(rate, tags[k])
        per_eav = [
            log_det_i_plus(gamma_eav_full(cfg, cs, None, e, jam))
            for e in range(cfg.num_eavs)
        ]
        secrecy = max(0.0, sum(per_user) - sum(per_eav))
        for k in jam:
            state.buffers[k].dequeue()
            state.delivered_total += 1
        return SlotOutcome(slot, "delivery", float("nan"), secrecy, None,
                           delivered=jam)

    if selection.score < cfg.selection_threshold:
        return SlotOutcome(slot, "idle", selection.score, 0.0, selection)

    recv = selection.receiving_relays
    jam = selection.transmitting_jammers
    per_user, per_eav, _ = scorer.value(recv, jam)
    secrecy = max(0.0, sum(per_user) - sum(per_eav))
    for k in jam:
        state.buffers[k].dequeue()
        state.delivered_total += 1
    for i in recv:
        _store_block(cfg, state, cs, i, slot, _reception_rate(cfg, cs, i, jam), 0.0)
    return SlotOutcome(slot, "normal", selection.score, secrecy, selection,
                       stored=recv, delivered=jam)


def _step_single(cfg: SystemConfig, state: TrialState, cs: ChannelSet,
                 slot: int) -> SlotOutcome:
    cands = state.candidates()
    selection = _dispatch_single(cfg, cs, cands, state.trial, slot)
    if selection is None:
        return SlotOutcome(slot, "idle", float("nan"), 0.0, None)
    if selection.score < cfg.selection_threshold:
        return SlotOutcome(slot, "idle", selection.score, 0.0, selection)

    snr = cfg.snr
    n_eav = cfg.num_eavs
    if selection.hop == "receive":
        i = selection.receiving_relays[0]
        rate = float(np.log2(1.0 + snr * abs(cs.gain_source_relay(i)) ** 2))
        leak = max(
            float(np.log2(1.0 + snr * abs(cs.gain_source_eav(e)) ** 2))
            for e in range(n_eav)
        )
        _store_block(cfg, state, cs, i, slot, rate, leak)
        return SlotOutcome(slot, "receive", selection.score, 0.0, selection,
                           stored=(i,))
    i = selection.transmitting_jammers[0]
    block = state.buffers[i].dequeue()
    state.delivered_total += 1
    deliver = float(np.log2(1.0 + snr * abs(cs.gain_relay_dest(i)) ** 2))
    exposure = max(
        float(np.log2(1.0 + snr * abs(cs.gain_relay_eav(i, e)) ** 2))
        for e in range(n_eav)
    )
    secrecy = max(0.0, min(block.rate_tag, deliver) - (block.leak_tag + exposure))
    return SlotOutcome(slot, "transmit", selection.score, secrecy, selection,
                       delivered=(i,))


def step_slot(cfg: SystemConfig, state: TrialState, cs: ChannelSet,
              slot: int) -> SlotOutcome:
    """Advance one slot: select, gate, move blocks, measure.

    The protocol follows the policy's mode: matrix policies run the
    multi-relay slot even when every terminal happens to have one antenna.
    Only the mode-agnostic random policy falls back on the antenna counts.
    """
    if cfg.policy in MATRIX_POLICIES:
        return _step_matrix(cfg, state, cs, slot)
    if cfg.policy in SCALAR_POLICIES or cfg.single_antenna:
        return _step_single(cfg, state, cs, slot)
    return _step_matrix(cfg, state, cs, slot)


# ---------------------------------------------------------------------------
# Monte Carlo driver
# ---------------------------------------------------------------------------


def run_monte_carlo(cfg: SystemConfig, *, channel_fn: ChannelFn | None = None,
                    keep_outcomes: bool = False,
                    progress: Callable[[int, int], None] | None = None) -> RunResult:
    """Simulate cfg.trials independent trials of cfg.slots slots each.

    The first ``warmup_slots(cfg)`` slots of every trial are excluded from
    the statistics so cold-start buffer filling does not bias the rates.
    ``channel_fn`` replaces the fading generator (for controlled tests);
    ``progress`` is called after each trial with (done, total).
    """
    cfg.check()
    draw = channel_fn or draw_channels
    skip = warmup_slots(cfg)
    per_trial: list[float] = []
    outcomes: list[SlotOutcome] = []
    outage = idle = counted = 0
    for trial in range(cfg.trials):
        state = TrialState(cfg, trial)
        rates: list[float] = []
        for slot in range(cfg.slots):
            out = step_slot(cfg, state, draw(cfg, trial, slot), slot)
            if keep_outcomes:
                outcomes.append(out)
            if slot < skip:
                continue
            counted += 1
            rates.append(out.secrecy)
            if out.kind in ("reception", "delivery"):
                outage += 1
            elif out.kind == "idle":
                idle += 1
        per_trial.append(float(np.mean(rates)) if rates else 0.0)
        if progress is not None:
            progress(trial + 1, cfg.trials)
    means = np.asarray(per_trial)
    stderr = float(np.std(means, ddof=1) / np.sqrt(len(means))) if len(means) > 1 else 0.0
    return RunResult(
        cfg=cfg,
        per_trial_means=tuple(per_trial),
        mean_rate=float(means.mean()),
        stderr=stderr,
        outage_frac=outage / counted if counted else 0.0,
        idle_frac=idle / counted if counted else 0.0,
        counted_slots=counted,
        outcomes=tuple(outcomes) if keep_outcomes else None,
    )
