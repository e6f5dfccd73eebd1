"""System configuration and per-slot channel generation.

Every link in the network is an independent Rayleigh block-fading matrix,
redrawn each slot, with unit-variance circularly symmetric complex Gaussian
entries.  Draws are organized into named substreams keyed by
(seed, trial, slot, family) so that:

* reruns with the same seed are bit-identical,
* two policies simulated over the same seed see identical channels slot by
  slot (paired comparisons), and
* adding noise or probe consumers never perturbs the channel draws.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .numerics import as_cmatrix


class ConfigError(ValueError):
    """Configuration violates one or more structural constraints."""


class EmptySelectionError(ValueError):
    """A stacking operation was asked to stack zero transmitters."""


# Substream family tags.  Channel families 0-4 are consumed by draw_channels;
# the remaining streams belong to the engine (pilot symbols, receiver noise,
# probe noise) and to policies that randomize.
FAMILY_RELAY = 0        # source -> relay matrices
FAMILY_EAV = 1          # source -> eavesdropper matrices
FAMILY_JAM_USER = 2     # relay (transmitting) -> user matrices
FAMILY_JAM_RELAY = 3    # relay (transmitting) -> relay (receiving) matrices
FAMILY_JAM_EAV = 4      # relay (transmitting) -> eavesdropper matrices
FAMILY_PILOT = 5
FAMILY_NOISE = 6
FAMILY_PROBE = 7
FAMILY_POLICY = 8

SWEEPABLE = ("power", "buffer_size", "threshold")


@dataclass(frozen=True)
class SystemConfig:
    """All dimensional, power, buffer, and run-control parameters.

    The defaults describe the reference multi-user setup: a 6-antenna source
    serving 3 two-antenna users through a pool of 6 two-antenna relays, of
    which 3 receive and 3 transmit buffered blocks each slot, observed by 3
    two-antenna eavesdroppers.

    Attributes:
        source_antennas: transmit antennas at the source.
        relay_antennas: receive antennas per relay node.
        jammer_antennas: transmit antennas per relay node when forwarding.
        user_antennas: receive antennas per user.
        eav_antennas: receive antennas per eavesdropper.
        num_users: number of destination users.
        num_eavs: number of eavesdroppers.
        num_relays: size of the relay pool.
        active_relays: relays scheduled to receive per slot.
        active_jammers: relays scheduled to transmit buffered blocks per slot.
        power: total transmit power budget P (split per antenna).
        noise_power: receiver noise variance, identical at users, relays and
            eavesdroppers.
        buffer_size: blocks each relay can hold; 1 forces immediate forwarding.
        slots: measured slots per trial (after warm-up).
        trials: independent Monte Carlo trials.
        seed: base RNG seed; all substreams derive from it.
        iri_cancellation: if True, reception at relays is cleaned of the
            interference arriving from concurrently transmitting relays.
        selection_threshold: minimum acceptable policy score; a slot whose
            best score falls below it is left idle.
        policy: selection policy name (see policies.POLICY_NAMES).
        store_noisy_blocks: store raw noisy receptions instead of the decoded
            clean blocks (sensitivity toggle; decode-and-forward is default).
        probe_len: pilot symbols per detection probe used by the ml policy.
        rank_tol: relative eigenvalue cutoff for singular-channel detection.
        enum_cap: largest candidate count exhaustive search will enumerate.
    """

    source_antennas: int = 6
    relay_antennas: int = 2
    jammer_antennas: int = 2
    user_antennas: int = 2
    eav_antennas: int = 2
    num_users: int = 3
    num_eavs: int = 3
    num_relays: int = 6
    active_relays: int = 3
    active_jammers: int = 3
    power: float = 10.0
    noise_power: float = 1.0
    buffer_size: int = 2
    slots: int = 40
    trials: int = 50
    seed: int = 12345
    iri_cancellation: bool = True
    selection_threshold: float = 0.0
    policy: str = "sr-exhaustive"
    store_noisy_blocks: bool = False
    probe_len: int = 16
    rank_tol: float = 1e-12
    enum_cap: int = 1_000_000

    @property
    def snr(self) -> float:
        """Power-to-noise ratio P / noise_power used inside SINR forms."""
        return self.power / self.noise_power

    @property
    def single_antenna(self) -> bool:
        """True when every node has one antenna and there is one user."""
        return (
            self.source_antennas == 1
            and self.relay_antennas == 1
            and self.jammer_antennas == 1
            and self.user_antennas == 1
            and self.eav_antennas == 1
            and self.num_users == 1
        )

    def replace(self, **kw) -> "SystemConfig":
        return dataclasses.replace(self, **kw)

    def violations(self) -> list[str]:
        """Collect all violated constraints (empty when valid)."""
        from .policies import MATRIX_POLICIES, POLICY_NAMES, SCALAR_POLICIES

        v: list[str] = []
        positive_ints = [
            "source_antennas", "relay_antennas", "jammer_antennas",
            "user_antennas", "eav_antennas", "num_users", "num_eavs",
            "num_relays", "active_relays", "active_jammers", "buffer_size",
            "slots", "trials", "probe_len",
        ]
        for name in positive_ints:
            if int(getattr(self, name)) < 1:
                v.append(f"{name} must be >= 1")
        if not (self.power > 0.0 and np.isfinite(self.power)):
            v.append("power must be positive and finite")
        if not (self.noise_power > 0.0 and np.isfinite(self.noise_power)):
            v.append("noise_power must be positive and finite")
        if not (self.selection_threshold >= 0.0 and np.isfinite(self.selection_threshold)):
            v.append("selection_threshold must be >= 0 and finite")
        if not (0.0 < self.rank_tol < 1.0):
            v.append("rank_tol must lie in (0, 1)")
        if self.enum_cap < 1:
            v.append("enum_cap must be >= 1")
        if self.policy not in POLICY_NAMES:
            v.append(f"policy must be one of {', '.join(POLICY_NAMES)}")
        if self.source_antennas < self.user_antennas * self.num_users:
            v.append("source_antennas must be >= user_antennas * num_users")
        as_matrix = self.policy in MATRIX_POLICIES or (
            self.policy == "random" and not self.single_antenna
        )
        as_scalar = self.policy in SCALAR_POLICIES or (
            self.policy == "random" and self.single_antenna
        )
        if as_matrix:
            if self.active_relays != self.active_jammers:
                v.append("active_relays must equal active_jammers for matrix policies")
            if self.num_relays < self.active_relays + self.active_jammers:
                v.append("num_relays must cover disjoint receive and transmit sets")
            dims = {self.relay_antennas, self.jammer_antennas,
                    self.user_antennas, self.eav_antennas}
            if len(dims) != 1:
                v.append(
                    "matrix policies need equal relay/jammer/user/eavesdropper "
                    "antenna counts"
                )
        if as_scalar:
            if not self.single_antenna:
                v.append(f"policy {self.policy} requires the single-antenna setup")
            if self.active_relays != 1 or self.active_jammers != 1:
                v.append("single-antenna policies schedule exactly one relay per slot")
            if self.num_relays < 2:
                v.append("single-antenna operation needs at least 2 relays")
        return v

    def check(self) -> "SystemConfig":
        """Raise ConfigError listing every violated constraint."""
        bad = self.violations()
        if bad:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(bad))
        return self


def substream(seed: int, trial: int, slot: int, family: int) -> np.random.Generator:
    """Deterministic generator for one (trial, slot, family) cell."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trial, slot, family))
    return np.random.default_rng(ss)


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circularly symmetric complex Gaussian draws."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass(frozen=True)
class LegitimateChannels:
    """Eavesdropper-free channel view handed to partial-knowledge policies."""

    h_relay: np.ndarray      # (num_relays, relay_antennas, source_antennas)
    h_jam_user: np.ndarray   # (num_relays, num_users, user_antennas, jammer_antennas)
    h_jam_relay: np.ndarray  # (num_relays, num_relays, relay_antennas, jammer_antennas)
    slot: int = 0


@dataclass(frozen=True)
class ChannelSet:
    """One slot's worth of channel matrices for every link in the network.

    First index is always the transmitting-side node where applicable; the
    relay->relay block is indexed [transmitter, receiver].
    """

    h_relay: np.ndarray      # (num_relays, relay_antennas, source_antennas)
    h_eav: np.ndarray        # (num_eavs, eav_antennas, source_antennas)
    h_jam_user: np.ndarray   # (num_relays, num_users, user_antennas, jammer_antennas)
    h_jam_relay: np.ndarray  # (num_relays, num_relays, relay_antennas, jammer_antennas)
    h_jam_eav: np.ndarray    # (num_relays, num_eavs, eav_antennas, jammer_antennas)
    slot: int = 0

    def legitimate_view(self) -> LegitimateChannels:
        return LegitimateChannels(
            h_relay=self.h_relay,
            h_jam_user=self.h_jam_user,
            h_jam_relay=self.h_jam_relay,
            slot=self.slot,
        )

    # Convenience scalar accessors for the single-antenna setup.
    def gain_source_relay(self, i: int) -> complex:
        return complex(self.h_relay[i, 0, 0])

    def gain_relay_dest(self, i: int) -> complex:
        return complex(self.h_jam_user[i, 0, 0, 0])

    def gain_source_eav(self, e: int = 0) -> complex:
        return complex(self.h_eav[e, 0, 0])

    def gain_relay_eav(self, i: int, e: int = 0) -> complex:
        return complex(self.h_jam_eav[i, e, 0, 0])


def draw_channels(cfg: SystemConfig, trial: int, slot: int) -> ChannelSet:
    """Draw every link's fading matrix for one slot.

    Each channel family consumes its own substream, so the realization of,
    say, the eavesdropper links can be resampled without touching any
    legitimate link (and vice versa).
    """
    r, e = cfg.num_relays, cfg.num_eavs
    shapes = {
        FAMILY_RELAY: (r, cfg.relay_antennas, cfg.source_antennas),
        FAMILY_EAV: (e, cfg.eav_antennas, cfg.source_antennas),
        FAMILY_JAM_USER: (r, cfg.num_users, cfg.user_antennas, cfg.jammer_antennas),
        FAMILY_JAM_RELAY: (r, r, cfg.relay_antennas, cfg.jammer_antennas),
        FAMILY_JAM_EAV: (r, e, cfg.eav_antennas, cfg.jammer_antennas),
    }
    draws = {
        fam: complex_gaussian(substream(cfg.seed, trial, slot, fam), shape)
        for fam, shape in shapes.items()
    }
    return ChannelSet(
        h_relay=draws[FAMILY_RELAY],
        h_eav=draws[FAMILY_EAV],
        h_jam_user=draws[FAMILY_JAM_USER],
        h_jam_relay=draws[FAMILY_JAM_RELAY],
        h_jam_eav=draws[FAMILY_JAM_EAV],
        slot=slot,
    )


def _stack(blocks: list[np.ndarray], selected) -> np.ndarray:
    if len(selected) == 0:
        raise EmptySelectionError("cannot stack an empty transmitter set")
    return np.hstack([as_cmatrix(b) for b in blocks])


def stack_jammer_to_user(cs: ChannelSet, selected, user: int) -> np.ndarray:
    """Horizontally stack transmitting relays' matrices toward one user.

    The stacked matrix multiplies the vertical concatenation of the selected
    relays' transmit vectors, so column order follows ``selected`` order.
    """
    return _stack([cs.h_jam_user[k, user] for k in selected], selected)


def stack_jammer_to_relay(cs: ChannelSet, selected, relay: int) -> np.ndarray:
    """Stacked interference matrix from transmitting relays into a receiving relay."""
    return _stack([cs.h_jam_relay[k, relay] for k in selected], selected)


def stack_jammer_to_eav(cs: ChannelSet, selected, eav: int) -> np.ndarray:
    """Stacked jamming matrix from transmitting relays into one eavesdropper."""
    return _stack([cs.h_jam_eav[k, eav] for k in selected], selected)
