"""True-time-delay RIS weights, OFDM receive model and two-subband design."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal, Mapping

import numpy as np

from .channels import WidebandChannelSet
from .errors import DegenerateChannelError, DimensionError, DomainError

TWO_PI = 2.0 * np.pi


def wrap_phase(x):
    """Wrap to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), TWO_PI)


@dataclass(frozen=True)
class TTDArrayConfig:
    """Per-element delay, static phase and amplitude of a TTD-capable RIS.

    The weight of element ``n`` at frequency ``f`` is
    ``alpha_n * exp(-j (2 pi (f - f_ref) tau_n + phi_n))`` with ``f_ref = f_c``
    in the ``offset`` convention and ``f_ref = 0`` in the ``absolute`` one.
    """

    tau: np.ndarray
    phi: np.ndarray
    alpha: np.ndarray | None = None
    f_c: float = 0.0
    convention: Literal["offset", "absolute"] = "offset"
    group_K: int = 1
    tau_quant_bits: int | None = None
    phi_quant_bits: int | None = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float).ravel()
        phi = np.asarray(self.phi, dtype=float).ravel()
        alpha = np.ones_like(tau) if self.alpha is None else np.asarray(self.alpha, dtype=float).ravel()
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "alpha", alpha)
        if not (tau.size == phi.size == alpha.size):
            raise DimensionError("tau, phi and alpha must have the same length")
        if np.any(tau < 0):
            raise DomainError("delays must be >= 0")
        if np.any((alpha < 0) | (alpha > 1)):
            raise DomainError("amplitudes must lie in [0, 1]")
        if self.convention not in ("offset", "absolute"):
            raise DomainError(f"unknown convention {self.convention!r}")
        if self.group_K < 1 or tau.size % self.group_K:
            raise DimensionError(f"{tau.size} elements not divisible into groups of {self.group_K}")
        if self.group_K > 1 and np.any(np.ptp(tau.reshape(-1, self.group_K), axis=1) != 0):
            raise DomainError("delays must be shared within each group")

    @property
    def n(self) -> int:
        return self.tau.size

    @property
    def f_ref(self) -> float:
        return self.f_c if self.convention == "offset" else 0.0

    def weights(self, f_hz) -> np.ndarray:
        """Weights for every element; shape ``(N,)`` or ``(F, N)``."""
        f = np.asarray(f_hz, dtype=float)
        arg = TWO_PI * (f[..., None] - self.f_ref) * self.tau + self.phi
        return self.alpha * np.exp(-1j * arg)


def ttd_weight(config: TTDArrayConfig, n: int, f_m: float) -> complex:
    if not 0 <= n < config.n:
        raise DimensionError(f"element {n} out of range")
    if f_m <= 0:
        raise DomainError("frequency must be positive")
    arg = TWO_PI * (f_m - config.f_ref) * config.tau[n] + config.phi[n]
    return complex(config.alpha[n] * np.exp(-1j * arg))


def ttd_receive(H_m: np.ndarray, v: np.ndarray, config: TTDArrayConfig, X_m: complex, noise_m: complex,
                f_m: float) -> complex:
    """Received OFDM symbol ``w_m^H H_m v X_m + N_m`` on subcarrier ``f_m``."""
    H = np.atleast_2d(np.asarray(H_m, dtype=complex))
    v = np.asarray(v, dtype=complex).reshape(-1)
    if H.shape != (config.n, v.size):
        raise DimensionError(f"H_m {H.shape} incompatible with {config.n} elements and v of length {v.size}")
    w = config.weights(f_m)
    return complex(w.conj() @ H @ v * X_m + noise_m)


@dataclass(frozen=True)
class OFDMGrid:
    f_subcarriers: np.ndarray
    subband_assignment: np.ndarray
    N_cp: int = 16
    T_s: float = 1e-8

    def __post_init__(self):
        f = np.asarray(self.f_subcarriers, dtype=float).ravel()
        lab = np.asarray(self.subband_assignment).ravel()
        object.__setattr__(self, "f_subcarriers", f)
        object.__setattr__(self, "subband_assignment", lab)
        if f.size != lab.size:
            raise DimensionError("one subband label per subcarrier required")
        if np.any(np.diff(f) <= 0):
            raise DomainError("subcarrier frequencies must be ascending")
        for label in self.labels:
            pos = np.flatnonzero(lab == label)
            if np.any(np.diff(pos) != 1):
                raise DomainError(f"subband {label!r} is not contiguous")

    @property
    def labels(self) -> list:
        _, first = np.unique(self.subband_assignment, return_index=True)
        return [self.subband_assignment[i] for i in sorted(first)]

    def subband(self, label) -> np.ndarray:
        return self.f_subcarriers[self.subband_assignment == label]

    def center(self, label) -> float:
        f = self.subband(label)
        return float((f[0] + f[-1]) / 2.0)

    @classmethod
    def two_subbands(cls, f1: float, f2: float, n_per_band: int, spacing: float, N_cp: int = 16,
                     T_s: float = 1e-8) -> "OFDMGrid":
        """Two subbands of ``n_per_band`` subcarriers centred on ``f1`` and ``f2``."""
        offs = (np.arange(n_per_band) - (n_per_band - 1) / 2.0) * spacing
        f = np.concatenate([f1 + offs, f2 + offs])
        labels = np.array([0] * n_per_band + [1] * n_per_band)
        order = np.argsort(f, kind="stable")
        return cls(f[order], labels[order], N_cp, T_s)


def cp_valid(grid: OFDMGrid, config: TTDArrayConfig, path_delays) -> tuple[bool, float]:
    """Strict cyclic-prefix check ``N_cp T_s > max delay + max tau``; returns ``(valid, slack)``."""
    guard = grid.N_cp * grid.T_s
    need = float(np.max(path_delays)) + float(np.max(config.tau))
    return guard > need, guard - need


def _lift_delays(tau: np.ndarray, period: float) -> np.ndarray:
    neg = tau < 0
    if np.any(neg):
        tau = tau.copy()
        tau[neg] += np.ceil(-tau[neg] / period) * period
    return tau


def design_two_subband(c1, c2, grid: OFDMGrid | tuple[float, float], group_K: int = 1,
                       convention: Literal["offset", "absolute"] = "offset") -> TTDArrayConfig:
    """Delays and static phases that phase-match UE1 at ``f1`` and UE2 at ``f2``.

    ``c1`` and ``c2`` are the per-element cascaded channels of each UE at its
    subband centre. The reference frequency is ``f1``. Required phase
    differences are wrapped to ``(-pi, pi]`` before conversion to delay, and
    negative delays are lifted by whole periods ``1/|f2 - f1|``.

    With ``group_K > 1`` each group of adjacent elements shares the delay
    derived from the circular mean of its members' phase differences; the
    static phases still match ``f1`` exactly.
    """
    c1 = np.asarray(c1, dtype=complex).ravel()
    c2 = np.asarray(c2, dtype=complex).ravel()
    if c1.size != c2.size:
        raise DimensionError("both UEs need one channel per element")
    if isinstance(grid, OFDMGrid):
        lab = grid.labels
        if len(lab) != 2:
            raise DomainError("exactly two subbands required")
        f1, f2 = grid.center(lab[0]), grid.center(lab[1])
    else:
        f1, f2 = map(float, grid)
    df = f2 - f1
    if df == 0:
        raise DegenerateChannelError("subband centres coincide")
    if group_K < 1 or c1.size % group_K:
        raise DimensionError(f"{c1.size} elements not divisible into groups of {group_K}")

    target1 = -np.angle(c1)
    target2 = -np.angle(c2)
    diff = wrap_phase(target1 - target2)
    if group_K > 1:
        grouped = np.angle(np.exp(1j * diff).reshape(-1, group_K).sum(axis=1))
        diff = np.repeat(grouped, group_K)
    tau = _lift_delays(diff / TWO_PI / df, 1.0 / abs(df))
    # static phase so the response at f1 equals the f1 target exactly
    f_ref = f1 if convention == "offset" else 0.0
    phi = np.mod(-target1 - TWO_PI * (f1 - f_ref) * tau, TWO_PI)
    return TTDArrayConfig(tau, phi, None, f1, convention, group_K)


def achieved_phase(config: TTDArrayConfig, f_hz: float) -> np.ndarray:
    return np.angle(config.weights(f_hz))


def phase_error(a, b) -> np.ndarray:
    """Absolute wrapped difference between two phase arrays."""
    return np.abs(wrap_phase(np.asarray(a) - np.asarray(b)))


def squint_profile(config: TTDArrayConfig, channels: Mapping[object, WidebandChannelSet],
                   grid: OFDMGrid) -> list[dict]:
    """Beamforming gain on every subcarrier, normalized to its subband centre.

    ``channels`` maps each subband label to the per-element cascaded channel of
    the UE scheduled there. A subband whose centre gain is zero has ``gain``
    reported but ``loss_db`` set to ``nan``.
    """
    rows = []
    for label in grid.labels:
        wb = channels[label]
        f = grid.subband(label)
        c = wb.at(f).reshape(f.size, -1)
        if c.shape[1] != config.n:
            raise DimensionError("channel element count does not match the array")
        gains = np.abs(np.sum(config.weights(f) * c, axis=1)) ** 2
        fc = grid.center(label)
        g0 = float(np.abs(np.sum(config.weights(fc) * wb.at(fc).ravel())) ** 2)
        for fm, g in zip(f, gains):
            loss = 10.0 * np.log10(g0 / g) if g0 > 0 and g > 0 else (np.inf if g0 > 0 else np.nan)
            rows.append({"f_hz": float(fm), "subband": label, "gain": float(g), "loss_db": float(loss)})
    return rows


def band_edge_loss(profile: list[dict], subband) -> float:
    """Largest loss over the subband's two edge subcarriers."""
    rows = [r for r in profile if r["subband"] == subband]
    return max(rows[0]["loss_db"], rows[-1]["loss_db"])


def quantize_ttd(config: TTDArrayConfig, tau_bits: int, phi_bits: int, tau_max: float) -> TTDArrayConfig:
    """Snap delays to ``2**tau_bits`` uniform levels on ``[0, tau_max]`` and
    static phases to a ``2**phi_bits`` grid; ties go to the lower level.

    Delays above ``tau_max`` are clamped and listed in ``flags["clamped"]``.
    """
    if tau_max <= 0:
        raise DomainError("tau_max must be positive")
    if tau_bits < 1 or phi_bits < 1:
        raise DomainError("quantization needs at least one bit")
    clamped = np.flatnonzero(config.tau > tau_max)
    tau = np.minimum(config.tau, tau_max)
    n_tau = (1 << tau_bits) - 1
    step = tau_max / n_tau
    tau_q = np.minimum(np.ceil(tau / step - 0.5), n_tau) * step
    n_phi = 1 << phi_bits
    phi_idx = np.mod(np.ceil(np.mod(config.phi, TWO_PI) / (TWO_PI / n_phi) - 0.5), n_phi)
    phi_q = TWO_PI * phi_idx / n_phi
    flags = dict(config.flags)
    if clamped.size:
        flags["clamped"] = clamped.tolist()
    return replace(config, tau=tau_q, phi=phi_q, tau_quant_bits=tau_bits, phi_quant_bits=phi_bits, flags=flags)
