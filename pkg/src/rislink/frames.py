"""Integrated channel regulation and ON/OFF information modulation.

A frame is ``n_pilot`` pilot slots, then ``n_backscatter`` slots carrying
RIS bits in groups of ``spread_K`` slots, then ``n_silent`` slots with the
RIS switched off. Every slot carries a known unit-power reference signal,
so each slot yields a noisy estimate of the effective channel it saw.

The SNR at the backscatter receiver is referenced to the ON-state received
power: the per-entry estimation noise variance is
``mean |H Phi G + D|^2 / snr``. A strong direct path therefore leaves less
room for the reflected component, which is what makes it an interferer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .beamforming import RegulationMatrix, capacity
from .channels import ChannelSet, cascade
from .errors import ConfigError, DemodulationError

SlotKind = Literal["pilot", "backscatter", "silent"]


@dataclass(frozen=True)
class Slot:
    kind: SlotKind
    regulation: RegulationMatrix
    bit: int | None = None
    rs_present: bool = True

    @property
    def ris_on(self) -> bool:
        return bool(np.any(self.regulation.coefficients != 0))


@dataclass(frozen=True)
class FramePattern:
    n_pilot: int = 1
    n_backscatter: int = 0
    n_silent: int = 0

    @property
    def slots_per_frame(self) -> int:
        return self.n_pilot + self.n_backscatter + self.n_silent


@dataclass(frozen=True)
class FrameSchedule:
    slots: tuple[Slot, ...]
    spread_K: int
    pattern: FramePattern

    @property
    def bits(self) -> list[int]:
        bs = [s for s in self.slots if s.kind == "backscatter"]
        return [s.bit for s in bs[:: self.spread_K]]

    @property
    def off_ratio(self) -> float:
        return sum(not s.ris_on for s in self.slots) / len(self.slots)

    def without(self, kind: SlotKind) -> "FrameSchedule":
        pat = FramePattern(**{**self.pattern.__dict__, f"n_{kind}": 0})
        return FrameSchedule(tuple(s for s in self.slots if s.kind != kind), self.spread_K, pat)


def build_schedule(pattern: FramePattern | tuple[int, int, int], spread_K: int, bits: Sequence[int],
                   base: RegulationMatrix | None = None, m_ris: int | None = None) -> FrameSchedule:
    """Lay out as many frames as needed to carry ``bits``.

    Bit 1 keeps the base regulation (ON); bit 0 switches the RIS off.
    """
    if not isinstance(pattern, FramePattern):
        pattern = FramePattern(*pattern)
    if spread_K < 1:
        raise ConfigError("spread_K must be >= 1")
    if pattern.n_backscatter % spread_K:
        raise ConfigError(f"{pattern.n_backscatter} backscatter slots not divisible by spread_K={spread_K}")
    if min(pattern.n_pilot, pattern.n_backscatter, pattern.n_silent) < 0 or pattern.slots_per_frame == 0:
        raise ConfigError("slot counts must be >= 0 with at least one slot")
    bits = [int(b) for b in bits]
    if any(b not in (0, 1) for b in bits):
        raise ConfigError("bits must be 0 or 1")
    per_frame = pattern.n_backscatter // spread_K
    if per_frame == 0:
        if bits:
            raise ConfigError("pattern has no backscatter slots but bits were supplied")
        n_frames = 1
    else:
        if not bits or len(bits) % per_frame:
            raise ConfigError(f"{len(bits)} bits do not fill whole frames of {per_frame} bits")
        n_frames = len(bits) // per_frame
    if base is None:
        base = RegulationMatrix(np.ones(m_ris or 1, dtype=complex), mode="unit-modulus")
    off = RegulationMatrix.off(base.m)

    slots: list[Slot] = []
    it = iter(bits)
    for _ in range(n_frames):
        slots.extend(Slot("pilot", base) for _ in range(pattern.n_pilot))
        for _ in range(per_frame):
            b = next(it)
            slots.extend(Slot("backscatter", base if b else off, b) for _ in range(spread_K))
        slots.extend(Slot("silent", off) for _ in range(pattern.n_silent))
    return FrameSchedule(tuple(slots), spread_K, pattern)


@dataclass(frozen=True)
class BackscatterResult:
    decoded_bits: list[int]
    bit_errors: int
    primary_capacity_effective: float
    off_ratio: float
    capacity_on: float = 0.0
    direct_estimate: np.ndarray | None = None

    @property
    def ber(self) -> float:
        return self.bit_errors / len(self.decoded_bits) if self.decoded_bits else 0.0


def _effective(channels: ChannelSet, reg: RegulationMatrix, user: int) -> np.ndarray:
    return cascade(channels.H_users[user], reg, channels.G, channels.D_users[user])


def _noise(rng: np.random.Generator, n: int, shape, var: float) -> np.ndarray:
    if var == 0:
        return np.zeros((n,) + shape, dtype=complex)
    z = rng.standard_normal((n,) + shape) + 1j * rng.standard_normal((n,) + shape)
    return z * np.sqrt(var / 2.0)


def run_frame(schedule: FrameSchedule, channels: ChannelSet, snr: float, seed: int = 0, user: int = 0,
              traffic: Sequence[bool] | None = None) -> BackscatterResult:
    """Demodulate the RIS bits of a schedule over block-fading channels.

    Each frame's pilot slots give the ON reference estimate. A bit group's
    averaged estimate is compared with that reference: a distance below half
    the noiseless ON/OFF separation decodes as ON (bit 1), otherwise OFF.

    ``traffic`` optionally marks slots where the primary system transmits;
    slots without traffic observe noise only. Pilot, backscatter and silent
    slots draw noise from separate streams, so dropping silent slots does not
    change the decoded bits.
    """
    slots = schedule.slots
    if not any(s.kind == "pilot" for s in slots):
        raise DemodulationError("schedule has no pilot slot")
    if traffic is None:
        traffic = [True] * len(slots)
    if len(traffic) != len(slots):
        raise ConfigError("traffic mask length must match the schedule")

    base = next(s.regulation for s in slots if s.kind == "pilot")
    h_on = _effective(channels, base, user)
    h_off = channels.D_users[user]
    p_on = float(np.mean(np.abs(h_on) ** 2))
    c_on = capacity(h_on, snr) if np.isfinite(snr) else np.inf
    var = 0.0 if np.isinf(snr) else (p_on / snr if snr > 0 else np.inf)
    if np.isinf(var):
        var = 1e300

    streams = dict(zip(("pilot", "backscatter", "silent"),
                       (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))))
    counts = {k: sum(s.kind == k for s in slots) for k in streams}
    noise = {k: _noise(streams[k], counts[k], h_on.shape, var) for k in streams}
    used = {k: 0 for k in streams}

    est = []
    for s, active in zip(slots, traffic):
        h = _effective(channels, s.regulation, user) if (s.rs_present and active) else np.zeros_like(h_on)
        est.append(h + noise[s.kind][used[s.kind]])
        used[s.kind] += 1

    threshold = 0.5 * float(np.linalg.norm(h_on - h_off))
    decoded: list[int] = []
    silent_est = []
    frame_len = schedule.pattern.slots_per_frame
    pat = schedule.pattern
    for start in range(0, len(slots), frame_len):
        frame = est[start : start + frame_len]
        pilots = frame[: pat.n_pilot]
        if not pilots:
            raise DemodulationError("frame without pilot slots")
        ref = np.mean(pilots, axis=0)
        bs = frame[pat.n_pilot : pat.n_pilot + pat.n_backscatter]
        for g in range(0, len(bs), schedule.spread_K):
            group = np.mean(bs[g : g + schedule.spread_K], axis=0)
            decoded.append(1 if np.linalg.norm(group - ref) < threshold else 0)
        silent_est.extend(frame[pat.n_pilot + pat.n_backscatter :])

    truth = schedule.bits
    errors = int(sum(a != b for a, b in zip(decoded, truth)))
    rho = schedule.off_ratio
    d_hat = np.mean(silent_est, axis=0) if silent_est else None
    return BackscatterResult(decoded, errors, (1.0 - rho) * c_on, rho, c_on, d_hat)


def unit_cascade_channels(direct_ratio: float = 0.0) -> ChannelSet:
    """Single-antenna, single-element link with unit cascade gain and a direct
    path whose power is ``direct_ratio`` times the cascade power."""
    G = np.ones((1, 1), dtype=complex)
    H = np.ones((1, 1), dtype=complex)
    D = np.full((1, 1), np.sqrt(direct_ratio), dtype=complex)
    return ChannelSet(G, (H,), (D,))


def spreading_gain_check(k_values: Sequence[int], snr: float, n_bits: int = 10_000, seed: int = 0,
                         channels: ChannelSet | None = None, bits_per_frame: int = 8) -> list[dict]:
    """BER for each spreading factor on one fixed link.

    Each frame uses ``K`` pilot slots and ``bits_per_frame`` RIS symbols of
    ``K`` slots each, so reference and symbol estimates average equally.
    """
    if any(k < 1 for k in k_values):
        raise ConfigError("spreading factors must be >= 1")
    channels = channels or unit_cascade_channels()
    bit_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB175]))
    n_bits = (n_bits // bits_per_frame) * bits_per_frame
    bits = bit_rng.integers(0, 2, n_bits).tolist()
    m = channels.m_ris
    base = RegulationMatrix(np.ones(m, dtype=complex), mode="unit-modulus")
    snr_db = 10.0 * np.log10(snr) if snr > 0 else -np.inf
    rows = []
    for k in k_values:
        sched = build_schedule(FramePattern(k, k * bits_per_frame, 0), k, bits, base)
        res = run_frame(sched, channels, snr, seed)
        rows.append({"K": int(k), "snr_db": float(snr_db), "ber": res.ber, "n_bits": len(res.decoded_bits)})
    return rows


def direct_interference_ratio(channels: ChannelSet, regulation: RegulationMatrix | None = None,
                              user: int = 0) -> float:
    """``||D||_F^2 / ||H Phi G||_F^2`` in the ON state; ``inf`` if the cascade is dark."""
    if regulation is None:
        regulation = RegulationMatrix(np.ones(channels.m_ris, dtype=complex), mode="unit-modulus")
    casc = cascade(channels.H_users[user], regulation, channels.G)
    p_c = float(np.sum(np.abs(casc) ** 2))
    p_d = float(np.sum(np.abs(channels.D_users[user]) ** 2))
    if p_c == 0:
        return np.inf
    return p_d / p_c
