"""Two overlapping networks sharing RIS hardware.

Network A owns ``ris_A``; in the dual-RIS setting network B owns ``ris_B``.
Channel names read ``<segment>_<from>_<to>``: ``G_A_rB`` is nb_A -> ris_B,
``H_rA_uB`` is ris_A -> ue_B, ``D_A`` is nb_A -> ue_A.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .beamforming import Mode, RegulationMatrix, capacity, optimal_regulation
from .channels import SeedLike, _rng, cascade, gen_channel
from .errors import ConfigError, DimensionError, DomainError, ScenarioError

_CHANNEL_FIELDS = ("G_A_rA", "G_B_rA", "G_A_rB", "G_B_rB", "H_rA_uA", "H_rA_uB", "H_rB_uA", "H_rB_uB", "D_A", "D_B")


@dataclass(frozen=True)
class CoexistenceScenario:
    G_A_rA: np.ndarray
    G_B_rA: np.ndarray
    G_A_rB: np.ndarray
    G_B_rB: np.ndarray
    H_rA_uA: np.ndarray
    H_rA_uB: np.ndarray
    H_rB_uA: np.ndarray
    H_rB_uB: np.ndarray
    D_A: np.ndarray
    D_B: np.ndarray
    Theta_A: RegulationMatrix
    Theta_B: RegulationMatrix
    F_A: np.ndarray
    F_B: np.ndarray
    snr: float = 10.0
    noise_power: float = 1.0
    mode: Mode = "unit-modulus"
    bits: int | None = None

    def __post_init__(self):
        m = self.G_A_rA.shape[0]
        for name in _CHANNEL_FIELDS[:4]:
            if getattr(self, name).shape[0] != m:
                raise ScenarioError(f"{name} has {getattr(self, name).shape[0]} RIS rows, expected {m}")
        for name in _CHANNEL_FIELDS[4:8]:
            if getattr(self, name).shape[1] != m:
                raise ScenarioError(f"{name} has {getattr(self, name).shape[1]} RIS columns, expected {m}")
        checks = [
            (self.D_A, (self.H_rA_uA.shape[0], self.G_A_rA.shape[1])),
            (self.D_B, (self.H_rA_uB.shape[0], self.G_B_rA.shape[1])),
            (self.F_A, (self.G_A_rA.shape[1], self.F_A.shape[1])),
            (self.F_B, (self.G_B_rA.shape[1], self.F_B.shape[1])),
        ]
        for arr, shape in checks:
            if arr.shape != shape:
                raise ScenarioError(f"inconsistent shape {arr.shape}, expected {shape}")
        if self.Theta_A.m != m or self.Theta_B.m != m:
            raise ScenarioError("regulation size does not match the RIS")

    @property
    def m(self) -> int:
        return self.G_A_rA.shape[0]

    @property
    def snr_eff(self) -> float:
        return self.snr / self.noise_power

    def restrict(self, elements: Sequence[int]) -> "CoexistenceScenario":
        """Scenario over a subset of RIS elements, with per-UE optima re-solved."""
        idx = np.asarray(elements, dtype=int)
        kw = {}
        for name in _CHANNEL_FIELDS[:4]:
            kw[name] = getattr(self, name)[idx, :]
        for name in _CHANNEL_FIELDS[4:8]:
            kw[name] = getattr(self, name)[:, idx]
        tA = optimal_regulation(kw["H_rA_uA"], kw["G_A_rA"], self.D_A, self.mode, self.bits)
        tB = optimal_regulation(kw["H_rB_uB"], kw["G_B_rB"], self.D_B, self.mode, self.bits)
        return replace(self, Theta_A=tA, Theta_B=tB, **kw)


def make_scenario(n_nb: int = 1, m_ris: int = 16, n_ue: int = 1, seed: SeedLike = 0, rician_k: float = 0.0,
                  direct: bool = True, snr: float = 10.0, mode: Mode = "unit-modulus",
                  bits: int | None = None) -> CoexistenceScenario:
    """Draw every cross-network channel i.i.d. and solve each network's own optimum."""
    rng = _rng(seed)
    mats = {}
    for name in _CHANNEL_FIELDS[:4]:
        mats[name] = gen_channel(m_ris, n_nb, rician_k, rng)
    for name in _CHANNEL_FIELDS[4:8]:
        mats[name] = gen_channel(n_ue, m_ris, rician_k, rng)
    for name in _CHANNEL_FIELDS[8:]:
        mats[name] = gen_channel(n_ue, n_nb, rician_k, rng) if direct else np.zeros((n_ue, n_nb), complex)
    tA = optimal_regulation(mats["H_rA_uA"], mats["G_A_rA"], mats["D_A"], mode, bits)
    tB = optimal_regulation(mats["H_rB_uB"], mats["G_B_rB"], mats["D_B"], mode, bits)
    F = np.eye(n_nb, dtype=complex)
    return CoexistenceScenario(**mats, Theta_A=tA, Theta_B=tB, F_A=F, F_B=F.copy(), snr=snr, mode=mode, bits=bits)


@dataclass(frozen=True)
class UEMetrics:
    signal_power: float
    capacity: float
    tuning_loss: float
    own_term_power: float = 0.0
    cross_term_power: float = 0.0


def _cap(H_eff: np.ndarray, F: np.ndarray, snr: float) -> float:
    return capacity(H_eff @ F, snr, F.shape[1])


def _power(A: np.ndarray) -> float:
    return float(np.sum(np.abs(A) ** 2))


def _loss(c_ref: float, c: float) -> float:
    return np.inf if c == 0 else c_ref / c


def isolated_capacity(sc: CoexistenceScenario, ue: Literal["A", "B"]) -> float:
    """Capacity of a UE served alone through its own RIS with its own optimum."""
    if ue == "A":
        return _cap(cascade(sc.H_rA_uA, sc.Theta_A, sc.G_A_rA, sc.D_A), sc.F_A, sc.snr_eff)
    return _cap(cascade(sc.H_rB_uB, sc.Theta_B, sc.G_B_rB, sc.D_B), sc.F_B, sc.snr_eff)


def coexist_received(sc: CoexistenceScenario, dual_ris: bool = False) -> dict[str, UEMetrics]:
    """Both UEs under ris_A's tuning (single shared RIS).

    ue_A sees its optimum ``Theta_A``; ue_B's cascade through ris_A is tuned by
    the same ``Theta_A``. ue_B's tuning loss compares against ue_B's own optimum
    for ris_A.

    With ``dual_ris`` each network has its own RIS and each UE additionally
    picks up the other RIS's unfiltered reflection of its own signal.
    """
    snr = sc.snr_eff
    if dual_ris:
        return filtered_received(sc, 1.0, 1.0)
    own_A = cascade(sc.H_rA_uA, sc.Theta_A, sc.G_A_rA)
    eff_A = own_A + sc.D_A
    c_A = _cap(eff_A, sc.F_A, snr)

    mis_B = cascade(sc.H_rA_uB, sc.Theta_A, sc.G_B_rA)
    eff_B = mis_B + sc.D_B
    c_B = _cap(eff_B, sc.F_B, snr)
    theta_B_on_A = optimal_regulation(sc.H_rA_uB, sc.G_B_rA, sc.D_B, sc.mode, sc.bits)
    c_B_opt = _cap(cascade(sc.H_rA_uB, theta_B_on_A, sc.G_B_rA, sc.D_B), sc.F_B, snr)
    return {
        "A": UEMetrics(_power(eff_A @ sc.F_A), c_A, 1.0, _power(own_A @ sc.F_A)),
        "B": UEMetrics(_power(eff_B @ sc.F_B), c_B, _loss(c_B_opt, c_B), _power(mis_B @ sc.F_B)),
    }


@dataclass(frozen=True)
class BlockingPartition:
    """Split of ris_A elements between network A and network B.

    ``beta`` is the energy share of each UE's signal on its own sub-block; when
    ``None`` it defaults to (own sub-block size) / M per UE.
    """

    assignment: np.ndarray
    scheme: Literal["contiguous", "interleaved"] = "contiguous"
    beta: float | None = None

    def __post_init__(self):
        a = np.asarray(self.assignment)
        object.__setattr__(self, "assignment", a)
        if not np.all(np.isin(a, ["A", "B"])):
            raise DomainError("partition labels must be 'A' or 'B'")
        if self.beta is not None and not 0.0 <= self.beta <= 1.0:
            raise DomainError(f"beta must be in [0, 1], got {self.beta}")

    @classmethod
    def contiguous(cls, m: int, boundary: int | None = None, beta: float | None = None) -> "BlockingPartition":
        boundary = m // 2 if boundary is None else boundary
        if not 0 <= boundary <= m:
            raise DomainError("boundary outside the RIS")
        labels = np.array(["A"] * boundary + ["B"] * (m - boundary))
        return cls(labels, "contiguous", beta)

    @classmethod
    def interleaved(cls, m: int, beta: float | None = None) -> "BlockingPartition":
        labels = np.where(np.arange(m) % 2 == 0, "A", "B")
        return cls(labels, "interleaved", beta)

    def elements(self, label: str) -> np.ndarray:
        return np.flatnonzero(self.assignment == label)

    def beta_for(self, label: str) -> float:
        if self.beta is not None:
            return self.beta
        return self.elements(label).size / self.assignment.size


def _ris_a_link(sc: CoexistenceScenario, ue: Literal["A", "B"]):
    """``(H, G, D, F)`` for a UE's own network routed through ris_A."""
    if ue == "A":
        return sc.H_rA_uA, sc.G_A_rA, sc.D_A, sc.F_A
    return sc.H_rA_uB, sc.G_B_rA, sc.D_B, sc.F_B


def blocked_received(sc: CoexistenceScenario, partition: BlockingPartition) -> dict[str, UEMetrics]:
    """RIS blocking: ris_A is split into sub-blocks, each tuned for one network.

    ue_A receives ``sqrt(b) * own-sub-block cascade + direct +
    sqrt(1-b) * foreign-sub-block cascade``; ue_B symmetrically. Each
    sub-block optimum is solved on its network's channels through ris_A,
    restricted to the sub-block. Tuning loss is relative to the UE's optimum
    over the whole of ris_A.
    """
    if partition.assignment.size != sc.m:
        raise DimensionError("partition does not cover the RIS")
    idx = {"A": partition.elements("A"), "B": partition.elements("B")}
    theta = {}
    for ue in "AB":
        if idx[ue].size:
            H, G, D, _ = _ris_a_link(sc, ue)
            theta[ue] = optimal_regulation(H[:, idx[ue]], G[idx[ue], :], D, sc.mode, sc.bits)
    snr = sc.snr_eff
    out = {}
    for ue, other in (("A", "B"), ("B", "A")):
        beta = partition.beta_for(ue)
        H, G, D, F = _ris_a_link(sc, ue)
        own_term = np.zeros_like(D)
        if ue in theta:
            own_term = np.sqrt(beta) * cascade(H[:, idx[ue]], theta[ue], G[idx[ue], :])
        cross_term = np.zeros_like(D)
        if other in theta:
            cross_term = np.sqrt(1.0 - beta) * cascade(H[:, idx[other]], theta[other], G[idx[other], :])
        eff = own_term + D + cross_term
        c = _cap(eff, F, snr)
        full = sc.Theta_A if ue == "A" else optimal_regulation(H, G, D, sc.mode, sc.bits)
        ref = _cap(cascade(H, full, G, D), F, snr)
        out[ue] = UEMetrics(_power(eff @ F), c, _loss(ref, c), _power(own_term @ F), _power(cross_term @ F))
    return out


def filtered_received(sc: CoexistenceScenario, filter_beta_A: float, filter_beta_B: float) -> dict[str, UEMetrics]:
    """Dual RIS with filter layers.

    Each UE's own cascade is untouched; the reflection of its signal off the
    foreign RIS (tuned for the other network) is scaled in amplitude by that
    RIS's filter coefficient.
    """
    for b in (filter_beta_A, filter_beta_B):
        if not 0.0 <= b <= 1.0:
            raise DomainError(f"filter coefficient must be in [0, 1], got {b}")
    snr = sc.snr_eff
    own_A = cascade(sc.H_rA_uA, sc.Theta_A, sc.G_A_rA)
    cross_A = filter_beta_B * cascade(sc.H_rB_uA, sc.Theta_B, sc.G_A_rB)
    own_B = cascade(sc.H_rB_uB, sc.Theta_B, sc.G_B_rB)
    cross_B = filter_beta_A * cascade(sc.H_rA_uB, sc.Theta_A, sc.G_B_rA)
    out = {}
    for ue, own, cross, D, F in (("A", own_A, cross_A, sc.D_A, sc.F_A), ("B", own_B, cross_B, sc.D_B, sc.F_B)):
        eff = own + D + cross
        c = _cap(eff, F, snr)
        out[ue] = UEMetrics(_power(eff @ F), c, _loss(isolated_capacity(sc, ue), c),
                            _power(own @ F), _power(cross @ F))
    return out


@dataclass(frozen=True)
class SweepSettings:
    n_nb: int = 1
    m_ris: int = 16
    n_ue: int = 1
    snr: float = 10.0
    rician_k: float = 0.0
    direct: bool = True
    mode: Mode = "unit-modulus"
    bits: int | None = None
    scheme: Literal["contiguous", "interleaved"] = "contiguous"
    extra: dict = field(default_factory=dict)


SWEEP_COLUMNS = ("beta", "cap_ueA", "cap_ueB", "loss_ueA", "loss_ueB")


def sweep_mitigation(settings: SweepSettings, grid: Sequence[float], mechanism: Literal["blocking", "filter"],
                     trials: int = 10, seed: int = 0, trial_seeds: Sequence[int] | None = None) -> list[dict]:
    """Average capacities and losses over trials for each mitigation strength.

    Every grid point reuses the same channel realizations. Rows come out with
    ``beta`` ascending.
    """
    if len(grid) == 0:
        raise ConfigError("empty beta grid")
    betas = sorted(float(b) for b in grid)
    if any(not 0.0 <= b <= 1.0 for b in betas):
        raise DomainError("beta grid must lie in [0, 1]")
    if mechanism not in ("blocking", "filter"):
        raise ConfigError(f"unknown mechanism {mechanism!r}")
    if trial_seeds is None:
        trial_seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(trials, dtype=np.uint64)]
    scenarios = [
        make_scenario(settings.n_nb, settings.m_ris, settings.n_ue, s, settings.rician_k, settings.direct,
                      settings.snr, settings.mode, settings.bits)
        for s in trial_seeds
    ]
    rows = []
    for beta in betas:
        acc = np.array([mitigation_trial(sc, beta, mechanism, settings.scheme) for sc in scenarios])
        mean = acc.mean(axis=0)
        rows.append(dict(zip(SWEEP_COLUMNS, (beta, *map(float, mean)))))
    return rows


def mitigation_trial(sc: CoexistenceScenario, beta: float, mechanism: Literal["blocking", "filter"],
                     scheme: Literal["contiguous", "interleaved"] = "contiguous") -> tuple[float, float, float, float]:
    """``(cap_ueA, cap_ueB, loss_ueA, loss_ueB)`` for one realization."""
    if mechanism == "blocking":
        part = (BlockingPartition.interleaved(sc.m, beta) if scheme == "interleaved"
                else BlockingPartition.contiguous(sc.m, beta=beta))
        res = blocked_received(sc, part)
    else:
        res = filtered_received(sc, beta, beta)
    return res["A"].capacity, res["B"].capacity, res["A"].tuning_loss, res["B"].tuning_loss
