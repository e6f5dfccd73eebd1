"""Relay-selection policies.

Two operating modes share one Selection record:

* Matrix mode (multi-antenna): a policy picks ``active_relays`` receiving
  relays and an equal-sized disjoint set of transmitting relays that deliver
  buffered data to the users while jamming the eavesdroppers.  Search-based
  policies maximize the slot score produced by :class:`metrics.SlotScorer`.
* Single-antenna mode: a policy picks one relay and one hop direction per
  slot (source->relay reception or relay->destination delivery), ranked by a
  per-policy link figure of merit.

All policies are deterministic given their inputs; ``random`` draws from the
generator handed to it.  Ties break toward the lexicographically smallest
choice (and toward delivery in single-antenna mode) so reruns are stable.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .numerics import as_cmatrix, zf_precoder
from .metrics import CovariancePair, SlotScorer, covariances, partial_csi_score

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .channel import ChannelSet, LegitimateChannels, SystemConfig

POLICY_NAMES = (
    "sr-exhaustive",
    "sr-partial",
    "greedy",
    "max-min",
    "max-ratio",
    "ml",
    "sr-single",
    "random",
)

#: Policies that require the multi-antenna (matrix) setup.
MATRIX_POLICIES = frozenset({"sr-exhaustive", "sr-partial", "greedy"})

#: Policies that require the single-antenna setup.
SCALAR_POLICIES = frozenset({"max-min", "max-ratio", "ml", "sr-single"})


class EnumerationBudgetError(RuntimeError):
    """Exhaustive search would enumerate more selections than enum_cap."""


@dataclass(frozen=True)
class CandidateSet:
    """Buffer-eligible relays for the current slot.

    receive lists relays whose buffer has room; transmit lists relays whose
    buffer holds at least one block.  A half-filled relay appears in both.
    """

    receive: tuple[int, ...]
    transmit: tuple[int, ...]


@dataclass(frozen=True)
class Selection:
    """One slot's scheduling decision.

    hop is "both" in matrix mode (reception and delivery happen together),
    or "receive"/"transmit" in single-antenna mode.  score carries the units
    of the policy that produced it and is what thresholding gates on.
    """

    receiving_relays: tuple[int, ...]
    transmitting_jammers: tuple[int, ...]
    score: float
    hop: str = "both"
    outage: bool = False


# --------------------------------------------------------------------------
# Matrix-mode policies
# --------------------------------------------------------------------------


def _comb(n: int, k: int) -> int:
    import math

    return math.comb(n, k) if 0 <= k <= n else 0


def select_sr_exhaustive(cfg: "SystemConfig", cands: CandidateSet,
                         scorer: SlotScorer) -> Selection | None:
    """Maximize the slot score over every disjoint (receive, transmit) split.

    Enumeration follows ascending index order and keeps the first maximizer,
    so ties resolve to the lexicographically smallest selection.  Returns
    None when the eligible sets cannot supply the full complement.

    Raises:
        EnumerationBudgetError: candidate count exceeds cfg.enum_cap.
    """
    t, k = cfg.active_relays, cfg.active_jammers
    budget = _comb(len(cands.receive), t) * _comb(len(cands.transmit), k)
    if budget > cfg.enum_cap:
        raise EnumerationBudgetError(
            f"{budget} candidate selections exceed enum_cap={cfg.enum_cap}"
        )
    best: Selection | None = None
    for jam in itertools.combinations(sorted(cands.transmit), k):
        jam_set = set(jam)
        pool = [i for i in sorted(cands.receive) if i not in jam_set]
        for recv in itertools.combinations(pool, t):
            score = scorer.score(recv, jam)
            if best is None or score > best.score:
                best = Selection(recv, jam, score)
    return best


def select_greedy(cfg: "SystemConfig", cands: CandidateSet,
                  scorer: SlotScorer) -> Selection | None:
    """Build the selection one (receiver, transmitter) pair at a time.

    Each step scans every remaining feasible pair, keeps the one whose
    addition yields the highest slot score, and commits it.  A pair is only
    feasible if committing it still leaves enough distinct relays to finish
    all remaining steps, so the builder never paints itself into a corner
    that exhaustive search would have avoided.  Stops after ``active_relays``
    pairs; returns None if no completable pair exists at some step.
    """
    t = cfg.active_relays

    def completable(taken: set, steps_left: int) -> bool:
        rest_r = [i for i in cands.receive if i not in taken]
        rest_t = [i for i in cands.transmit if i not in taken]
        return (len(rest_r) >= steps_left and len(rest_t) >= steps_left
                and len(set(rest_r) | set(rest_t)) >= 2 * steps_left)

    recv: list[int] = []
    jam: list[int] = []
    for step in range(t):
        best_pair: tuple[int, int] | None = None
        best_score = -np.inf
        taken = set(recv) | set(jam)
        for m in sorted(cands.receive):
            if m in taken:
                continue
            for j in sorted(cands.transmit):
                if j in taken or j == m:
                    continue
                if not completable(taken | {m, j}, t - step - 1):
                    continue
                score = scorer.score(recv + [m], jam + [j])
                if score > best_score:
                    best_score = score
                    best_pair = (m, j)
        if best_pair is None:
            return None
        recv.append(best_pair[0])
        jam.append(best_pair[1])
    return Selection(tuple(sorted(recv)), tuple(sorted(jam)), float(best_score))


def nominal_precoder_covariances(cfg: "SystemConfig", legit: "LegitimateChannels",
                                 targets) -> CovariancePair:
    """Covariance pair a candidate is scored against, from legitimate links only.

    The source is assumed to zero-force toward ``targets`` (the provisional
    receive set); every stream carries the same per-stream power.  The first
    stream plays the desired role, the rest aggregate into interference.
    """
    blocks = [as_cmatrix(legit.h_relay[i]) for i in targets]
    h_nom = np.vstack(blocks)
    u = zf_precoder(h_nom, rank_tol=cfg.rank_tol)
    s = cfg.relay_antennas
    amp = np.sqrt(cfg.snr / cfg.source_antennas)
    precoders = [u[:, j * s:(j + 1) * s] for j in range(len(targets))]
    symbols = [amp * np.ones((s, 1), dtype=np.complex128) / np.sqrt(s)
               for _ in targets]
    return covariances(precoders, symbols, target=0)


def select_sr_partial(cfg: "SystemConfig", legit: "LegitimateChannels",
                      cands: CandidateSet) -> Selection | None:
    """Eavesdropper-blind selection from the legitimate channel view.

    Transmitting relays are ranked by their summed delivery strength toward
    the users (Frobenius energy); receiving relays by the covariance-ratio
    score of their own source link against nominal zero-forcing covariances.
    The reported score is the policy's own figure of merit, not a measured
    secrecy rate, so thresholding on it never leaks eavesdropper knowledge.
    """
    t, k = cfg.active_relays, cfg.active_jammers

    def delivery_strength(rel: int) -> float:
        return float(sum(
            np.linalg.norm(legit.h_jam_user[rel, u]) ** 2
            for u in range(cfg.num_users)
        ))

    if len(cands.transmit) < k:
        return None
    jam = tuple(sorted(
        sorted(cands.transmit, key=lambda rel: (-delivery_strength(rel), rel))[:k]
    ))
    pool = [i for i in sorted(cands.receive) if i not in jam]
    if len(pool) < t:
        return None
    n_nom = max(1, min(t, cfg.source_antennas // cfg.relay_antennas))
    cov = nominal_precoder_covariances(cfg, legit, pool[:n_nom])
    scored = sorted(
        ((partial_csi_score(legit.h_relay[i], cov), i) for i in pool),
        key=lambda pair: (-pair[0], pair[1]),
    )
    recv = tuple(sorted(i for _, i in scored[:t]))
    total = float(sum(sc for sc, _ in scored[:t]))
    return Selection(recv, jam, total)


def select_random_matrix(cfg: "SystemConfig", cands: CandidateSet,
                         rng: np.random.Generator,
                         scorer: SlotScorer | None = None) -> Selection | None:
    """Uniform feasible selection; the informationless matrix-mode baseline."""
    t, k = cfg.active_relays, cfg.active_jammers
    if len(cands.transmit) < k:
        return None
    jam = tuple(sorted(rng.choice(cands.transmit, size=k, replace=False).tolist()))
    pool = [i for i in cands.receive if i not in jam]
    if len(pool) < t:
        return None
    recv = tuple(sorted(rng.choice(pool, size=t, replace=False).tolist()))
    score = scorer.score(recv, jam) if scorer is not None else 0.0
    return Selection(recv, jam, float(score))


# --------------------------------------------------------------------------
# Single-antenna policies
# --------------------------------------------------------------------------


def _best_candidate(entries) -> Selection | None:
    """Pick the max-merit entry; ties prefer delivery, then the lowest index."""
    best = None
    for merit, hop, rel in entries:
        key = (merit, 1 if hop == "transmit" else 0, -rel)
        if best is None or key > best[0]:
            best = (key, merit, hop, rel)
    if best is None:
        return None
    _, merit, hop, rel = best
    if hop == "receive":
        return Selection((rel,), (), float(merit), hop="receive")
    return Selection((), (rel,), float(merit), hop="transmit")


def select_max_min(cfg: "SystemConfig", legit: "LegitimateChannels",
                   cands: CandidateSet) -> Selection | None:
    """Strongest eligible legitimate link, either hop.

    Maximizing the instantaneous bottleneck link over time maximizes the
    minimum of the two hops each block eventually traverses.  Uses no
    eavesdropper knowledge at all.
    """
    entries = []
    for i in cands.receive:
        entries.append((abs(complex(legit.h_relay[i, 0, 0])) ** 2, "receive", i))
    for i in cands.transmit:
        entries.append((abs(complex(legit.h_jam_user[i, 0, 0, 0])) ** 2, "transmit", i))
    return _best_candidate(entries)


def select_max_ratio(cfg: "SystemConfig", cs: "ChannelSet",
                     cands: CandidateSet) -> Selection | None:
    """Largest legitimate-to-eavesdropper gain ratio, either hop.

    Reception is penalized by the strongest source leakage across
    eavesdroppers; delivery by the selected relay's own exposure.
    """
    g_se = max(
        abs(cs.gain_source_eav(e)) ** 2 for e in range(cs.h_eav.shape[0])
    )
    entries = []
    for i in cands.receive:
        g = abs(cs.gain_source_relay(i)) ** 2
        entries.append((g / max(g_se, 1e-300), "receive", i))
    for i in cands.transmit:
        g = abs(cs.gain_relay_dest(i)) ** 2
        g_re = max(
            abs(cs.gain_relay_eav(i, e)) ** 2 for e in range(cs.h_eav.shape[0])
        )
        entries.append((g / max(g_re, 1e-300), "transmit", i))
    return _best_candidate(entries)


def select_ml(cfg: "SystemConfig", cands: CandidateSet,
              gain_estimates: dict) -> Selection | None:
    """Strongest link according to probe-derived gain estimates.

    ``gain_estimates`` maps ("receive"|"transmit", relay) to the squared
    magnitude of a pilot-based channel estimate, so this behaves like
    max-min driven by noisy measurements instead of genie knowledge.
    """
    entries = []
    for i in cands.receive:
        entries.append((float(gain_estimates[("receive", i)]), "receive", i))
    for i in cands.transmit:
        entries.append((float(gain_estimates[("transmit", i)]), "transmit", i))
    return _best_candidate(entries)


def select_sr_single(cfg: "SystemConfig", cs: "ChannelSet", cands: CandidateSet,
                     *, strict_phase: bool = False) -> Selection | None:
    """Largest secrecy-SNR ratio, either hop.

    Merit for each hop is (1 + snr * legitimate gain) / (1 + snr * leakage
    gain); its log is exactly the hop's positive-rate margin, so maximizing
    the ratio maximizes per-hop secrecy.  ``strict_phase`` switches the
    numerator and denominator to the phase-sensitive |1 + sqrt(snr) h|^2
    composition, which treats the direct and relayed observations as
    coherently superposed instead of power-additive.
    """
    snr = cfg.snr

    def merit(gain_sig: complex, gain_leak: complex) -> float:
        if strict_phase:
            num = abs(1.0 + np.sqrt(snr) * gain_sig) ** 2
            den = abs(1.0 + np.sqrt(snr) * gain_leak) ** 2
        else:
            num = 1.0 + snr * abs(gain_sig) ** 2
            den = 1.0 + snr * abs(gain_leak) ** 2
        return max(num, 1e-300) / max(den, 1e-300)

    n_eav = cs.h_eav.shape[0]
    entries = []
    for i in cands.receive:
        worst = max(
            merit(cs.gain_source_relay(i), cs.gain_source_eav(e)) ** -1
            for e in range(n_eav)
        ) ** -1
        entries.append((worst, "receive", i))
    for i in cands.transmit:
        worst = max(
            merit(cs.gain_relay_dest(i), cs.gain_relay_eav(i, e)) ** -1
            for e in range(n_eav)
        ) ** -1
        entries.append((worst, "transmit", i))
    return _best_candidate(entries)


def select_random_single(cfg: "SystemConfig", cands: CandidateSet,
                         rng: np.random.Generator) -> Selection | None:
    """Uniform draw over every eligible (relay, hop) pair."""
    entries = [("receive", i) for i in cands.receive]
    entries += [("transmit", i) for i in cands.transmit]
    if not entries:
        return None
    hop, rel = entries[int(rng.integers(len(entries)))]
    if hop == "receive":
        return Selection((rel,), (), 0.0, hop="receive")
    return Selection((), (rel,), 0.0, hop="transmit")
