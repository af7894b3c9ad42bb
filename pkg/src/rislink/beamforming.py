"""RIS regulation solvers: cascade decoupling by per-segment SVD, physical
constraints, phase quantization, a brute-force oracle and link metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .channels import cascade
from .errors import DegenerateChannelError, DimensionError, DomainError, NumericError

Mode = Literal["ideal", "unit-modulus", "quantized"]

ORACLE_MAX_ELEMENTS = 12
_ORACLE_CHUNK = 1 << 15
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class RegulationMatrix:
    """RIS tuning state.

    ``coefficients`` is either a length-``M`` vector (diagonal RIS) or a full
    ``(M, M)`` matrix (only allowed in ``ideal`` mode).
    """

    coefficients: np.ndarray
    mode: Mode = "ideal"
    bits: int | None = None
    amplitude_cap: float = 1.0
    phase_index: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        object.__setattr__(self, "coefficients", c)
        if self.mode == "ideal":
            return
        if c.ndim != 1:
            raise DimensionError(f"{self.mode} regulation must be diagonal")
        if np.any(np.abs(np.abs(c) - 1.0) > 1e-12):
            raise DomainError(f"{self.mode} regulation must be unit modulus")
        if self.mode == "quantized":
            if self.bits is None or self.bits < 1:
                raise DomainError("quantized regulation needs bits >= 1")
            if self.phase_index is None:
                raise DomainError("quantized regulation needs phase indices")

    @property
    def m(self) -> int:
        return self.coefficients.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return self.coefficients.ndim == 1

    @property
    def matrix(self) -> np.ndarray:
        c = self.coefficients
        return np.diag(c) if c.ndim == 1 else c

    @property
    def phases(self) -> np.ndarray:
        """Phases in ``[0, 2 pi)``; exact grid values in quantized mode."""
        if self.phase_index is not None:
            return 2.0 * np.pi * self.phase_index / (1 << self.bits)
        return np.mod(np.angle(self.coefficients), 2.0 * np.pi)

    @classmethod
    def from_phases(cls, phases) -> "RegulationMatrix":
        return cls(np.exp(1j * np.asarray(phases, dtype=float)), mode="unit-modulus")

    @classmethod
    def from_indices(cls, indices, bits: int) -> "RegulationMatrix":
        idx = np.asarray(indices, dtype=np.int64)
        return cls(_grid(bits)[idx], mode="quantized", bits=bits, phase_index=idx)

    @classmethod
    def off(cls, m: int) -> "RegulationMatrix":
        """All-zero reflection (RIS switched off)."""
        return cls(np.zeros(m, dtype=complex), mode="ideal")


def _grid(bits: int) -> np.ndarray:
    levels = 1 << bits
    return np.exp(2j * np.pi * np.arange(levels) / levels)


def quantize_phases(phases, bits: int) -> np.ndarray:
    """Nearest index on the ``2**bits`` uniform phase grid, ties to the lower index."""
    levels = 1 << bits
    x = np.mod(np.asarray(phases, dtype=float), 2.0 * np.pi) * (levels / (2.0 * np.pi))
    idx = np.ceil(x - 0.5).astype(np.int64)
    return np.mod(idx, levels)


# -- SVD decoupling -----------------------------------------------------------


def _canonical_svd(A: np.ndarray):
    """Full SVD with each left singular vector rotated so its first nonzero
    entry is real-positive; paired right vectors follow the same rotation."""
    U, s, Vh = np.linalg.svd(A, full_matrices=True)
    V = Vh.conj().T
    r = s.size
    for i in range(U.shape[1]):
        col = U[:, i]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size == 0:
            continue
        lead = col[nz[0]]
        rot = np.conj(lead) / np.abs(lead)
        U[:, i] = col * rot
        if i < r:
            V[:, i] = V[:, i] * rot
    for i in range(r, V.shape[1]):
        col = V[:, i]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size:
            lead = col[nz[0]]
            V[:, i] = col * (np.conj(lead) / np.abs(lead))
    return U, s, V


def _rank(s: np.ndarray, shape) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    tol = s[0] * max(shape) * np.finfo(float).eps
    return int(np.sum(s > tol))


@dataclass(frozen=True)
class DecoupledSolution:
    """Per-segment SVD solution of ``U^H H Phi2 Phi1 G F``.

    ``sigma_G`` and ``sigma_H`` hold the singular values of the two segments.
    ``V_H`` and ``U_G`` are kept so the rank-limited regulation can be formed.
    """

    Phi1: np.ndarray
    Phi2: np.ndarray
    F: np.ndarray
    U: np.ndarray
    S: int
    sigma_G: np.ndarray
    sigma_H: np.ndarray
    G_used: np.ndarray
    assignment: str = "exact"

    @property
    def compose(self) -> np.ndarray:
        return self.Phi2 @ self.Phi1

    def rank_limited(self) -> np.ndarray:
        """``Phi2 Phi1`` restricted to the ``S`` active stream directions.

        The singular vectors beyond the stream count are arbitrary null-space
        bases; dropping them leaves the effective channel unchanged.
        """
        if self.assignment != "exact":
            return self.compose
        return self.Phi2[:, : self.S] @ self.Phi1[: self.S, :]

    def effective_channel(self, H: np.ndarray) -> np.ndarray:
        """``U^H H Phi2 Phi1 G F`` (an ``S x S`` matrix)."""
        return self.U.conj().T @ cascade(H, self.compose, self.G_used) @ self.F

    @property
    def expected_gains(self) -> np.ndarray:
        return self.sigma_H[: self.S] * self.sigma_G[: self.S]


def decouple_bd_svd(G: np.ndarray, H: np.ndarray, streams: int | None = None,
                    assignment: Literal["exact", "literal"] = "exact") -> DecoupledSolution:
    """Solve the RIS regulation from independent SVDs of the two segments.

    With ``G = U_G D_G V_G^H`` and ``H = U_H D_H V_H^H`` the exact assignment
    is ``Phi1 = U_G^H``, ``Phi2 = V_H``, ``F = V_G``, ``U = U_H`` which makes
    ``U^H H Phi2 Phi1 G F = D_H D_G``.

    ``assignment="literal"`` uses ``Phi1 = V_G`` and ``Phi2 = V_H^H`` instead;
    it needs ``M == N_nb`` and does not diagonalize the cascade in general.

    ``H`` may be the block-diagonal multi-user layout with ``U * M`` columns;
    ``G`` is then repeated once per user block so each block sees the shared
    NB->RIS channel.
    """
    G = np.atleast_2d(np.asarray(G, dtype=complex))
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    m = G.shape[0]
    if H.shape[1] != m:
        if H.shape[1] % m != 0:
            raise DimensionError(f"H has {H.shape[1]} columns; G has {m} rows")
        G = np.vstack([G] * (H.shape[1] // m))
    U_G, s_G, V_G = _canonical_svd(G)
    U_H, s_H, V_H = _canonical_svd(H)
    r = min(_rank(s_G, G.shape), _rank(s_H, H.shape))
    if r == 0:
        raise DegenerateChannelError("rank-0 segment channel")
    S = r if streams is None else int(streams)
    if not 1 <= S <= min(G.shape[1], H.shape[0], G.shape[0]):
        raise DimensionError(f"stream count {S} out of range")
    if assignment == "exact":
        Phi1, Phi2 = U_G.conj().T, V_H
    elif assignment == "literal":
        if G.shape[0] != G.shape[1]:
            raise DimensionError("literal assignment needs M == N_nb")
        Phi1, Phi2 = V_G, V_H.conj().T
    else:
        raise ValueError(f"unknown assignment {assignment!r}")
    return DecoupledSolution(Phi1, Phi2, V_G[:, :S], U_H[:, :S], S, s_G, s_H, G, assignment)


def offdiag_power_ratio(E: np.ndarray) -> float:
    """Off-diagonal power over diagonal power of a square matrix."""
    p = np.abs(E) ** 2
    on = np.eye(*p.shape, dtype=bool)
    diag = float(p[on].sum())
    off = float(p[~on].sum())
    return off / diag if diag > 0 else np.inf


def single_antenna_reorder(h_row, phi_diag, g):
    """Both sides of ``h diag(phi) g == phi^T diag(h) g`` for a single-antenna UE."""
    h = np.asarray(h_row, dtype=complex).ravel()
    phi = np.asarray(phi_diag, dtype=complex).ravel()
    g = np.asarray(g, dtype=complex)
    if g.ndim == 1:
        g = g[:, np.newaxis]
    if not (h.size == phi.size == g.shape[0]):
        raise DimensionError("h, phi and g must share the RIS dimension")
    lhs = (h * phi) @ g
    rhs = phi @ (h[:, np.newaxis] * g)
    return lhs, rhs


# -- constraints ----------------------------------------------------------------


def project_constraint(Phi_full, target_mode: Mode = "unit-modulus", bits: int | None = None) -> RegulationMatrix:
    """Keep the diagonal of ``Phi_full`` and force unit modulus, optionally
    snapping each phase to the ``2**bits`` grid.

    A zero diagonal entry gets phase 0; its index is listed in
    ``flags["zero_entries"]``.
    """
    P = np.asarray(getattr(Phi_full, "matrix", Phi_full), dtype=complex)
    diag = P if P.ndim == 1 else np.diag(P)
    zero = np.flatnonzero(diag == 0)
    phases = np.where(diag == 0, 0.0, np.angle(diag))
    flags = {"zero_entries": zero.tolist()} if zero.size else {}
    if target_mode == "unit-modulus":
        return RegulationMatrix(np.exp(1j * phases), mode="unit-modulus", flags=flags)
    if target_mode == "quantized":
        if bits is None or bits < 1:
            raise DomainError("quantized projection needs bits >= 1")
        idx = quantize_phases(phases, bits)
        return RegulationMatrix(_grid(bits)[idx], mode="quantized", bits=bits, phase_index=idx, flags=flags)
    raise DomainError(f"cannot project onto mode {target_mode!r}")


def exhaustive_oracle(h_row, g_col, bits: int = 1, direct: complex = 0.0):
    """Brute-force search of ``|d + sum_n h_n e^{j theta_n} g_n|^2`` over the
    ``2**bits`` phase grid.

    Candidates are enumerated in lexicographic index order; among gains within
    a relative ``1e-12`` of the maximum the first (smallest) index vector wins.

    Returns ``(best_phases, best_gain)``.
    """
    h = np.asarray(h_row, dtype=complex).ravel()
    g = np.asarray(g_col, dtype=complex).ravel()
    if h.size != g.size:
        raise DimensionError("h and g must have the same length")
    m = h.size
    if m > ORACLE_MAX_ELEMENTS:
        raise DomainError(f"exhaustive search refused for M={m} > {ORACLE_MAX_ELEMENTS}")
    if bits not in (1, 2):
        raise DomainError("oracle supports 1 or 2 bits")
    levels = 1 << bits
    grid = _grid(bits)
    c = h * g
    total = levels**m
    powers = levels ** np.arange(m - 1, -1, -1, dtype=np.int64)

    gains = np.empty(total)
    for start in range(0, total, _ORACLE_CHUNK):
        ids = np.arange(start, min(start + _ORACLE_CHUNK, total), dtype=np.int64)
        digits = (ids[:, None] // powers[None, :]) % levels
        gains[start : start + ids.size] = np.abs(direct + grid[digits] @ c) ** 2
    best = gains.max()
    winner = int(np.flatnonzero(gains >= best * (1.0 - _TIE_RTOL))[0])
    idx = (winner // powers) % levels
    return 2.0 * np.pi * idx / levels, float(gains[winner])


def single_antenna_gain(h_row, regulation, g_col, direct: complex = 0.0) -> float:
    h = np.asarray(h_row, dtype=complex).ravel()
    g = np.asarray(g_col, dtype=complex).ravel()
    phi = np.asarray(getattr(regulation, "coefficients", regulation), dtype=complex)
    return float(np.abs(direct + np.sum(h * phi * g)) ** 2)


def bd_svd_regulation(G: np.ndarray, H: np.ndarray, mode: Mode = "unit-modulus", bits: int | None = None,
                      D: np.ndarray | None = None, streams: int | None = None) -> RegulationMatrix:
    """Decoupled solution projected onto a physical RIS.

    For a single-antenna link with a direct path the common phase of the
    projected regulation is rotated so the reflected path adds coherently to
    the direct one (before any quantization).
    """
    sol = decouple_bd_svd(G, H, streams=streams)
    phi = sol.rank_limited()
    if mode == "ideal":
        return RegulationMatrix(phi, mode="ideal")
    diag = np.diag(phi).copy()
    if D is not None and np.size(D) == 1 and np.size(H, 0) == 1 and np.size(G, 1) == 1:
        d = complex(np.asarray(D).ravel()[0])
        refl = complex(np.sum(np.asarray(H).ravel() * np.exp(1j * np.angle(diag)) * np.asarray(G).ravel()))
        if d != 0 and refl != 0:
            diag = diag * np.exp(1j * (np.angle(d) - np.angle(refl)))
    return project_constraint(diag, mode, bits)


def optimal_regulation(H: np.ndarray, G: np.ndarray, D: np.ndarray | None = None, mode: Mode = "unit-modulus",
                       bits: int | None = None) -> RegulationMatrix:
    """Best-available regulation for one UE.

    Single-antenna links with a quantized RIS of at most
    ``ORACLE_MAX_ELEMENTS`` elements use the exhaustive oracle; everything
    else uses the projected SVD solution.
    """
    H = np.atleast_2d(H)
    G = np.atleast_2d(G)
    single = H.shape[0] == 1 and G.shape[1] == 1
    if mode == "quantized" and single and H.shape[1] <= ORACLE_MAX_ELEMENTS and bits in (1, 2):
        d = 0.0 if D is None else complex(np.asarray(D).ravel()[0])
        phases, _ = exhaustive_oracle(H.ravel(), G.ravel(), bits, direct=d)
        return RegulationMatrix.from_indices(np.rint(phases * (1 << bits) / (2 * np.pi)).astype(int), bits)
    try:
        return bd_svd_regulation(G, H, mode, bits, D)
    except DegenerateChannelError:
        # a dark RIS path: every regulation is equally good
        m = H.shape[1]
        if mode == "quantized":
            return RegulationMatrix.from_indices(np.zeros(m, dtype=int), bits)
        return RegulationMatrix(np.ones(m, dtype=complex), mode="unit-modulus", flags={"degenerate": True})


# -- metrics --------------------------------------------------------------------


def capacity(H_eff, snr_linear: float, n_tx: int | None = None) -> float:
    """Equal-power MIMO capacity ``log2 det(I + snr/n_tx H H^H)`` in bit/s/Hz."""
    H = np.atleast_2d(np.asarray(H_eff, dtype=complex))
    if not np.all(np.isfinite(H)):
        raise NumericError("non-finite entries in effective channel")
    if snr_linear < 0 or not np.isfinite(snr_linear):
        raise DomainError(f"snr must be finite and >= 0, got {snr_linear}")
    n_tx = H.shape[1] if n_tx is None else n_tx
    gram = H @ H.conj().T
    eig = np.linalg.eigvalsh((gram + gram.conj().T) / 2.0)
    return float(np.sum(np.log2(1.0 + (snr_linear / n_tx) * np.clip(eig, 0.0, None))))


def tuning_loss(channels, Theta_used, Theta_own_optimal, snr: float, user: int = 0,
                precoder: np.ndarray | None = None) -> float:
    """Capacity with the UE's own optimum over capacity with the applied tuning.

    ``channels`` is a :class:`~rislink.channels.ChannelSet`; returns ``inf`` when
    the applied tuning yields zero capacity.
    """
    H, D = channels.H_users[user], channels.D_users[user]
    F = np.eye(channels.n_nb) if precoder is None else precoder
    c_opt = capacity(cascade(H, Theta_own_optimal, channels.G, D) @ F, snr, F.shape[1])
    c_used = capacity(cascade(H, Theta_used, channels.G, D) @ F, snr, F.shape[1])
    if c_used == 0:
        return np.inf
    return c_opt / c_used
