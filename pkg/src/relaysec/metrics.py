"""SINR matrices, secrecy rates, and selection scores.

Conventions used throughout:

* Power splits per transmit antenna: the source spends power/source_antennas
  per antenna and each forwarding relay power/jammer_antennas per antenna.
  Noise is folded in as the ratio snr = power / noise_power, so every matrix
  below is normalized to unit noise.
* Several response matrices arise as products of two Hermitian PSD factors
  (a whitening inverse times a signal Gram, or a Gram times a stored-block
  factor).  Such products are not Hermitian entry-wise even though their
  spectra are real.  We return the congruence realizations
  W^{-1/2} X W^{-1/2} and S^{1/2} X S^{1/2}, which are Hermitian PSD and
  share eigenvalues with the raw products, so every determinant-based rate
  downstream is unchanged.
* Rates are log base 2 and secrecy differences clamp at zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .buffers import RelayBuffer
from .channel import ChannelSet, SystemConfig
from .numerics import (
    as_cmatrix,
    congruence,
    herm_quad,
    hermitian_part,
    inv_sqrt_pd,
    log_det_i_plus,
    whitened,
)

_DET_REG = 1e-9


class SelectionError(ValueError):
    """A candidate relay clashed with the already-selected sets."""


@dataclass(frozen=True)
class CovariancePair:
    """Transmit-side covariances seen from one user stream's perspective.

    r_desired is the rank-limited covariance of that stream's precoded
    symbols; r_interference aggregates every other stream.
    """

    r_interference: np.ndarray
    r_desired: np.ndarray


@dataclass
class SinrBundle:
    """Grouped response matrices produced while scoring one candidate relay."""

    gamma_relay: np.ndarray | None = None   # reception response at the candidate
    gamma_eav: np.ndarray | None = None     # (num_eavs, n, n) stacked eavesdropper responses
    delta_m: np.ndarray | None = None       # interference floor at the candidate
    delta_e: np.ndarray | None = None       # jamming floor at the eavesdroppers
    xi: np.ndarray | None = None            # stored-block emphasis factor


def covariances(precoders, symbols, target: int) -> CovariancePair:
    """Split the source covariance into desired and interfering parts.

    Args:
        precoders: per-stream precoding matrices, each (source_antennas, s).
        symbols: per-stream symbol columns, each (s, 1).
        target: index of the stream treated as desired.

    Returns:
        CovariancePair of (sum of outer products of the other streams,
        outer product of the target stream).
    """
    if not 0 <= target < len(precoders):
        raise IndexError(f"target {target} outside {len(precoders)} streams")
    if len(precoders) != len(symbols):
        raise ValueError("precoders and symbols must pair up")
    n = as_cmatrix(precoders[0]).shape[0]
    r_i = np.zeros((n, n), dtype=np.complex128)
    r_d = np.zeros((n, n), dtype=np.complex128)
    for j, (u, s) in enumerate(zip(precoders, symbols)):
        v = as_cmatrix(u) @ as_cmatrix(s)
        outer = v @ v.conj().T
        if j == target:
            r_d += outer
        else:
            r_i += outer
    return CovariancePair(r_interference=hermitian_part(r_i),
                          r_desired=hermitian_part(r_d))


def stored_factor(cfg: SystemConfig, buffered: np.ndarray | None, n: int) -> np.ndarray:
    """Covariance factor of a buffered block: I + (snr/N_src) B B^H.

    ``buffered`` is the source-to-relay matrix snapshotted when the block was
    stored; None (empty buffer) degrades to the identity.
    """
    eye = np.eye(n, dtype=np.complex128)
    if buffered is None:
        return eye
    b = as_cmatrix(buffered)
    if b.shape[0] != n:
        raise ValueError(f"buffered channel has {b.shape[0]} rows, expected {n}")
    return eye + (cfg.snr / cfg.source_antennas) * (b @ b.conj().T)


def _jam_user_gram(cfg: SystemConfig, cs: ChannelSet, user: int, selected) -> np.ndarray:
    g = np.zeros((cfg.user_antennas, cfg.user_antennas), dtype=np.complex128)
    scale = cfg.snr / cfg.jammer_antennas
    for k in selected:
        h = cs.h_jam_user[k, user]
        g += scale * (h @ h.conj().T)
    return hermitian_part(g)


def _jam_eav_gram_total(cfg: SystemConfig, cs: ChannelSet, selected) -> np.ndarray:
    """Sum of jamming Grams over every eavesdropper and selected transmitter."""
    g = np.zeros((cfg.eav_antennas, cfg.eav_antennas), dtype=np.complex128)
    scale = cfg.snr / cfg.jammer_antennas
    for e in range(cfg.num_eavs):
        for k in selected:
            h = cs.h_jam_eav[k, e]
            g += scale * (h @ h.conj().T)
    return hermitian_part(g)


def gamma_user_full(cfg: SystemConfig, cs: ChannelSet, buffered: np.ndarray | None,
                    user: int, selected_jammers) -> np.ndarray:
    """Legitimate response at one user from the forwarding relays.

    The forwarded energy arriving over each selected relay's link is summed
    and weighted by the stored-block factor of the relay candidate under
    consideration.  Returned as the Hermitian congruence realization.
    """
    if not 0 <= user < cfg.num_users:
        raise IndexError(f"user {user} out of range")
    g = _jam_user_gram(cfg, cs, user, selected_jammers)
    s = stored_factor(cfg, buffered, cfg.relay_antennas)
    if s.shape != g.shape:
        raise ValueError("relay and user antenna counts must match for this response")
    return congruence(g, s)


def gamma_eav_full(cfg: SystemConfig, cs: ChannelSet, buffered: np.ndarray | None,
                   eav: int, selected_jammers) -> np.ndarray:
    """Eavesdropper response: source leakage whitened by aggregate jamming.

    The jamming floor aggregates every selected transmitter toward every
    eavesdropper, scaled by the candidate's stored-block factor; the source
    leakage Gram is then whitened by (I + floor).
    """
    if not 0 <= eav < cfg.num_eavs:
        raise IndexError(f"eavesdropper {eav} out of range")
    g_all = _jam_eav_gram_total(cfg, cs, selected_jammers)
    s = stored_factor(cfg, buffered, cfg.relay_antennas)
    if s.shape != g_all.shape:
        raise ValueError("relay and eavesdropper antenna counts must match")
    delta = congruence(g_all, s)
    h_e = cs.h_eav[eav]
    leak = (cfg.snr / cfg.source_antennas) * (h_e @ h_e.conj().T)
    eye = np.eye(delta.shape[0], dtype=np.complex128)
    return whitened(hermitian_part(leak), eye + delta)


def relay_reception_gamma(cfg: SystemConfig, cs: ChannelSet, relay: int,
                          selected_jammers, cancelled: bool) -> np.ndarray:
    """Reception response at a receiving relay, with or without the
    interference produced by concurrently transmitting relays.

    With cancellation the interference floor vanishes and the response is the
    pure source-link Gram; without it the floor is the summed forwarded-power
    Gram of the transmitting set, and the response is whitened by it.
    """
    h = cs.h_relay[relay]
    sig = (cfg.snr / cfg.source_antennas) * (h @ h.conj().T)
    sig = hermitian_part(sig)
    if cancelled or len(selected_jammers) == 0:
        return sig
    n = cfg.relay_antennas
    floor = np.zeros((n, n), dtype=np.complex128)
    scale = cfg.snr / cfg.jammer_antennas
    for k in selected_jammers:
        hk = cs.h_jam_relay[k, relay]
        floor += scale * (hk @ hk.conj().T)
    eye = np.eye(n, dtype=np.complex128)
    return whitened(sig, eye + hermitian_part(floor))


def gamma_greedy(cfg: SystemConfig, cs: ChannelSet, m: int, selected_receive,
                 selected_jammers, buffered: np.ndarray | None) -> SinrBundle:
    """Candidate-relay responses used by the greedy builder's diagnostics.

    The candidate's reception Gram is whitened by the interference floor its
    own stored block would cause through the transmitting set; eavesdropper
    responses are whitened by the jamming floor inflated by the stored-block
    emphasis factor.

    Raises:
        SelectionError: the candidate is already part of either selected set.
    """
    if m in set(selected_receive) | set(selected_jammers):
        raise SelectionError(f"relay {m} already selected")
    n = cfg.relay_antennas
    eye = np.eye(n, dtype=np.complex128)
    bb = np.zeros((n, n), dtype=np.complex128)
    if buffered is not None:
        b = as_cmatrix(buffered)
        bb = b @ b.conj().T
    delta_m = np.zeros((n, n), dtype=np.complex128)
    for k in selected_jammers:
        hk = cs.h_jam_relay[k, m]
        delta_m += hk @ bb @ hk.conj().T
    delta_m = hermitian_part(delta_m)
    h_m = cs.h_relay[m]
    gamma_relay = whitened(hermitian_part(h_m @ h_m.conj().T), eye + delta_m)

    xi = hermitian_part((cfg.snr / cfg.source_antennas) * bb)
    g_all = _jam_eav_gram_total(cfg, cs, selected_jammers)
    if g_all.shape != xi.shape:
        raise ValueError("relay and eavesdropper antenna counts must match")
    delta_e = congruence(g_all, eye + xi)
    eyes = np.eye(delta_e.shape[0], dtype=np.complex128)
    gammas = []
    for e in range(cfg.num_eavs):
        h_e = cs.h_eav[e]
        leak = hermitian_part((cfg.snr / cfg.source_antennas) * (h_e @ h_e.conj().T))
        gammas.append(whitened(leak, eyes + delta_e))
    return SinrBundle(
        gamma_relay=gamma_relay,
        gamma_eav=np.stack(gammas) if gammas else None,
        delta_m=delta_m,
        delta_e=delta_e,
        xi=xi,
    )


def secrecy_rate(gamma_user: np.ndarray, gamma_eav: np.ndarray) -> float:
    """max(0, log2 det(I + user response) - log2 det(I + eavesdropper response))."""
    return max(0.0, log_det_i_plus(gamma_user) - log_det_i_plus(gamma_eav))


def _log2_det_reg(a: np.ndarray, eps: float) -> float:
    n = a.shape[0]
    sign, val = np.linalg.slogdet(hermitian_part(a) + eps * np.eye(n))
    if not np.isfinite(val) or np.real(sign) <= 0.0:
        lam = np.clip(np.linalg.eigvalsh(hermitian_part(a)), 0.0, None) + eps
        val = float(np.log(lam).sum())
    return float(np.real(val)) / float(np.log(2.0))


def surrogate_det_score(h_i: np.ndarray, cov: CovariancePair) -> float:
    """Bare determinant-ratio surrogate log2 det(H R_des H^H) / det(H R_interf H^H).

    This is the intermediate selection quantity obtained by dropping the
    identity terms from the rate ratio.  For a square nonsingular channel the
    channel determinants cancel and the value collapses to
    log2 det(R_des) - log2 det(R_interf), independent of the candidate — the
    cancellation that motivates the refined form in partial_csi_score.  Kept
    as an equivalence-test oracle; not used for selection.

    Requires square H and nonsingular products; raises
    DegenerateDenominatorError (via det_ratio) when the denominator vanishes.
    """
    h_i = as_cmatrix(h_i)
    if h_i.shape[0] != h_i.shape[1]:
        raise ValueError("the bare determinant surrogate needs a square channel")
    from .numerics import det_ratio

    qd = herm_quad(h_i, hermitian_part(cov.r_desired))
    qi = herm_quad(h_i, hermitian_part(cov.r_interference))
    return float(np.log2(det_ratio(qd, qi)))


def partial_csi_score(h_i: np.ndarray, cov: CovariancePair, *,
                      printed_form: bool = False, eps: float = _DET_REG) -> float:
    """Eavesdropper-blind selection score from transmit covariances only.

    Default form (canonical): the log of

        det(R_interf) / det(R_des)
        * det(I + H R_des H^H) / det(I + H R_interf H^H)

    with both bare determinants regularized by ``eps`` against rank-deficient
    covariances.  The prefactor does not depend on the candidate, so argmax
    over candidates is driven entirely by the bracketed ratio.

    ``printed_form=True`` switches to the additive variant
    log det(I + R_interf + H R_des H^H) - log det(I + R_des + H R_interf H^H),
    which only conforms when H is square (the covariances and the channel
    products must share a size).
    """
    h_i = as_cmatrix(h_i)
    r_i = hermitian_part(cov.r_interference)
    r_d = hermitian_part(cov.r_desired)
    if r_i.shape != r_d.shape:
        raise ValueError("covariance pair shapes differ")
    if h_i.shape[1] != r_d.shape[0]:
        raise ValueError("channel columns must match covariance size")
    qd = herm_quad(h_i, r_d)
    qi = herm_quad(h_i, r_i)
    if printed_form:
        if qd.shape != r_i.shape:
            raise ValueError("printed additive variant needs a square channel")
        return _log2_det_reg(np.eye(r_i.shape[0]) + r_i + qd, 0.0) - _log2_det_reg(
            np.eye(r_d.shape[0]) + r_d + qi, 0.0
        )
    prefactor = _log2_det_reg(r_i, eps) - _log2_det_reg(r_d, eps)
    return prefactor + log_det_i_plus(qd) - log_det_i_plus(qi)


# --------------------------------------------------------------------------
# Full-selection scoring shared by the engine and the search policies.
# --------------------------------------------------------------------------


def head_state(buffers: list[RelayBuffer]):
    """Snapshot (channel, rate_tag, leak_tag) of each buffer's oldest block."""
    channels: list[np.ndarray | None] = []
    tags: list[float] = []
    leaks: list[float] = []
    for buf in buffers:
        if buf.is_empty:
            channels.append(None)
            tags.append(float("inf"))
            leaks.append(0.0)
        else:
            blk = buf.peek()
            channels.append(blk.channel)
            tags.append(blk.rate_tag)
            leaks.append(blk.leak_tag)
    return channels, tags, leaks


class SlotScorer:
    """Caches per-slot quantities so many candidate selections score cheaply.

    A selection pairs a receive set with a transmitting set; both are
    canonicalized to ascending index order before scoring, so the value is
    order-invariant.  It is the aggregate secrecy score

        sum over pairs of min(delivery rate, forwarded block's stored rate)
        - mean over pairs of the summed eavesdropper rates,

    where the m-th receive relay serves user (m mod num_users) and draws its
    delivered data from transmitter (index-matched mod set size).  The same
    function doubles as the per-slot measured rate, so search policies that
    maximize it are by construction upper bounds for everything else.
    """

    def __init__(self, cfg: SystemConfig, cs: ChannelSet, head_channels, head_tags):
        self.cfg = cfg
        self.cs = cs
        self.heads = head_channels
        self.tags = head_tags
        self._factors: dict[int, np.ndarray] = {}
        self._user_gram: dict = {}
        self._eav_gram: dict = {}
        self._leak: list[np.ndarray] | None = None
        self._user_rate: dict = {}
        self._eav_rate: dict = {}
        self._white: dict = {}

    def _factor(self, i: int) -> np.ndarray:
        if i not in self._factors:
            self._factors[i] = stored_factor(self.cfg, self.heads[i], self.cfg.relay_antennas)
        return self._factors[i]

    def _gram_user(self, jam: tuple, r: int) -> np.ndarray:
        key = (jam, r)
        if key not in self._user_gram:
            self._user_gram[key] = _jam_user_gram(self.cfg, self.cs, r, jam)
        return self._user_gram[key]

    def _gram_eav(self, jam: tuple) -> np.ndarray:
        if jam not in self._eav_gram:
            self._eav_gram[jam] = _jam_eav_gram_total(self.cfg, self.cs, jam)
        return self._eav_gram[jam]

    def _leak_gram(self, e: int) -> np.ndarray:
        if self._leak is None:
            scale = self.cfg.snr / self.cfg.source_antennas
            self._leak = [
                hermitian_part(scale * (self.cs.h_eav[e] @ self.cs.h_eav[e].conj().T))
                for e in range(self.cfg.num_eavs)
            ]
        return self._leak[e]

    def user_rate(self, i: int, r: int, jam: tuple) -> float:
        key = (i, r, jam)
        if key not in self._user_rate:
            g = congruence(self._gram_user(jam, r), self._factor(i))
            self._user_rate[key] = log_det_i_plus(g)
        return self._user_rate[key]

    def eav_rate(self, i: int, e: int, jam: tuple) -> float:
        key = (i, e, jam)
        if key not in self._eav_rate:
            wkey = (i, jam)
            if wkey not in self._white:
                delta = congruence(self._gram_eav(jam), self._factor(i))
                eye = np.eye(delta.shape[0], dtype=np.complex128)
                self._white[wkey] = inv_sqrt_pd(eye + delta)
            w = self._white[wkey]
            self._eav_rate[key] = log_det_i_plus(herm_quad(w, self._leak_gram(e)))
        return self._eav_rate[key]

    def value(self, receive, jammers):
        """Score a selection; returns (per_user, per_eav, score).

        per_user and per_eav are bit-rate lists of length num_users and
        num_eavs; score = sum(per_user) - sum(per_eav), not clamped.
        """
        cfg = self.cfg
        receive = tuple(sorted(receive))
        jam = tuple(sorted(jammers))
        if set(receive) & set(jam):
            raise SelectionError("receive and transmit sets must be disjoint")
        per_user = [0.0] * cfg.num_users
        per_eav = [0.0] * cfg.num_eavs
        pairs = len(receive)
        if pairs == 0:
            return per_user, per_eav, 0.0
        for m, i in enumerate(receive):
            r = m % cfg.num_users
            if jam:
                delivered = self.user_rate(i, r, jam)
                tag = self.tags[jam[r % len(jam)]]
                per_user[r] += min(delivered, tag)
            for e in range(cfg.num_eavs):
                per_eav[e] += self.eav_rate(i, e, jam) / pairs
        score = float(sum(per_user) - sum(per_eav))
        return per_user, per_eav, score

    def score(self, receive, jammers) -> float:
        return self.value(receive, jammers)[2]
