"""Channel generation and composition for RIS-assisted links.

Conventions
-----------
* ``G`` is the NB -> RIS segment, shape ``(M, N_nb)``.
* ``H`` is the RIS -> UE segment, shape ``(N_ue, M)``.
* ``D`` is the direct NB -> UE path, shape ``(N_ue, N_nb)``.

Every random matrix has unit average element power. The Rician line-of-sight
component is the all-ones matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .errors import ConfigError, DimensionError, DomainError

SeedLike = int | np.random.Generator | np.random.SeedSequence | Sequence[int] | None


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gen_channel(rows: int, cols: int, rician_k: float = 0.0, seed: SeedLike = None) -> np.ndarray:
    """Draw a ``rows x cols`` Rician channel with unit average element power.

    ``rician_k`` is the linear LOS-to-scatter power ratio; ``0`` gives
    Rayleigh fading.
    """
    if rows < 1 or cols < 1:
        raise DimensionError(f"channel dimensions must be >= 1, got {rows}x{cols}")
    if not np.isfinite(rician_k) or rician_k < 0:
        raise DomainError(f"rician_k must be finite and >= 0, got {rician_k}")
    rng = _rng(seed)
    nlos = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)
    if rician_k == 0:
        return nlos
    los = np.ones((rows, cols), dtype=complex)
    return np.sqrt(rician_k / (rician_k + 1.0)) * los + np.sqrt(1.0 / (rician_k + 1.0)) * nlos


@dataclass(frozen=True)
class ChannelSet:
    """One realization of every segment channel of a single RIS link."""

    G: np.ndarray
    H_users: tuple[np.ndarray, ...]
    D_users: tuple[np.ndarray, ...]
    carrier_hz: float = 3.5e9
    seed_tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "H_users", tuple(np.asarray(h) for h in self.H_users))
        object.__setattr__(self, "D_users", tuple(np.asarray(d) for d in self.D_users))
        m, n_nb = self.G.shape
        if len(self.H_users) != len(self.D_users):
            raise DimensionError("H_users and D_users must have the same length")
        for k, (h, d) in enumerate(zip(self.H_users, self.D_users)):
            if h.ndim != 2 or h.shape[1] != m:
                raise DimensionError(f"H_users[{k}] has shape {h.shape}, expected (*, {m})")
            if d.shape != (h.shape[0], n_nb):
                raise DimensionError(f"D_users[{k}] has shape {d.shape}, expected {(h.shape[0], n_nb)}")

    @property
    def m_ris(self) -> int:
        return self.G.shape[0]

    @property
    def n_nb(self) -> int:
        return self.G.shape[1]

    @property
    def n_users(self) -> int:
        return len(self.H_users)


def gen_channel_set(
    n_nb: int,
    m_ris: int,
    n_ue: int | Sequence[int] = 1,
    n_users: int = 1,
    rician_k: float = 0.0,
    direct: bool = True,
    seed: SeedLike = None,
    carrier_hz: float = 3.5e9,
    seed_tag: str = "",
) -> ChannelSet:
    """Draw a full :class:`ChannelSet` (G, then per-user H and D) from one stream."""
    rng = _rng(seed)
    ue_dims = [n_ue] * n_users if isinstance(n_ue, (int, np.integer)) else list(n_ue)
    G = gen_channel(m_ris, n_nb, rician_k, rng)
    H_users, D_users = [], []
    for rows in ue_dims:
        H_users.append(gen_channel(rows, m_ris, rician_k, rng))
        if direct:
            D_users.append(gen_channel(rows, n_nb, rician_k, rng))
        else:
            D_users.append(np.zeros((rows, n_nb), dtype=complex))
    return ChannelSet(G, tuple(H_users), tuple(D_users), carrier_hz, seed_tag)


def _regulation_array(Phi) -> np.ndarray:
    return np.asarray(getattr(Phi, "matrix", Phi))


def cascade(H: np.ndarray, Phi, G: np.ndarray, D: np.ndarray | None = None) -> np.ndarray:
    """Return ``H @ Phi @ G + D``.

    ``Phi`` may be a full ``(M, M)`` matrix, a length-``M`` vector of diagonal
    coefficients, or any object exposing a ``matrix`` attribute.
    """
    H = np.atleast_2d(H)
    G = np.atleast_2d(G)
    phi = _regulation_array(Phi)
    m = H.shape[1]
    if phi.ndim == 1:
        if phi.shape[0] != m or G.shape[0] != m:
            raise DimensionError(f"cannot cascade H{H.shape}, diag({phi.shape[0]}), G{G.shape}")
        out = (H * phi[np.newaxis, :]) @ G
    else:
        if phi.shape != (m, m) or G.shape[0] != m:
            raise DimensionError(f"cannot cascade H{H.shape}, Phi{phi.shape}, G{G.shape}")
        out = (H @ phi) @ G
    if D is not None:
        D = np.atleast_2d(D)
        if D.shape != out.shape:
            raise DimensionError(f"direct path shape {D.shape} does not match cascade {out.shape}")
        out = out + D
    return out


def block_diag_users(H_users: Sequence[np.ndarray]) -> np.ndarray:
    """Literal block-diagonal multi-user layout, ``(sum N_ue) x (U * M)``."""
    if len(H_users) == 0:
        raise DimensionError("need at least one user matrix")
    mats = [np.atleast_2d(np.asarray(h)) for h in H_users]
    m = mats[0].shape[1]
    if any(h.shape[1] != m for h in mats):
        raise DimensionError("all user matrices must share the RIS column count")
    if len(mats) == 1:
        return mats[0]
    return block_diag(*mats).astype(complex)


def stack_users(H_users: Sequence[np.ndarray]) -> np.ndarray:
    """Physically consistent multi-user layout: every UE sees the whole RIS."""
    if len(H_users) == 0:
        raise DimensionError("need at least one user matrix")
    mats = [np.atleast_2d(np.asarray(h)) for h in H_users]
    m = mats[0].shape[1]
    if any(h.shape[1] != m for h in mats):
        raise DimensionError("all user matrices must share the RIS column count")
    return np.vstack(mats)


# -- wideband -----------------------------------------------------------------


def ula_path_delays(base_delays: Sequence[float], n_elements: int, spacing_wavelengths: float,
                    sin_angles: Sequence[float], carrier_hz: float) -> np.ndarray:
    """Per-path, per-element delays for a uniform linear array.

    Element ``n`` of path ``l`` sees ``base_delays[l] + n * d * sin(theta_l) / f_c``
    where ``d`` is the spacing in carrier wavelengths. Each path delay is shifted so
    that no element delay is negative.
    """
    base = np.asarray(base_delays, dtype=float)[:, np.newaxis]
    n = np.arange(n_elements)[np.newaxis, :]
    step = spacing_wavelengths * np.asarray(sin_angles, dtype=float)[:, np.newaxis] / carrier_hz
    delays = base + n * step
    shift = np.minimum(delays.min(axis=1, keepdims=True), 0.0)
    return delays - shift


@dataclass(frozen=True)
class WidebandChannelSet:
    """Per-subcarrier channel matrices built from a tapped-delay path model.

    ``per_subcarrier[m]`` is the channel at ``f_subcarriers[m]``; element ``n``
    (row-major over ``dims``) equals ``sum_l a_l exp(-j 2 pi f_m delay_{l,n})``.
    """

    per_subcarrier: np.ndarray
    f_subcarriers: np.ndarray
    path_delays: np.ndarray
    path_gains: np.ndarray
    dims: tuple[int, int] = field(default=(1, 1))

    def at(self, f_hz) -> np.ndarray:
        """Evaluate the path model at arbitrary frequencies (scalar or array)."""
        return _path_response(self.path_gains, self.path_delays, f_hz, self.dims)


def _path_response(gains: np.ndarray, delays: np.ndarray, f_hz, dims) -> np.ndarray:
    f = np.atleast_1d(np.asarray(f_hz, dtype=float))
    # (F, L, N) phasors summed over paths
    phasors = np.exp(-2j * np.pi * f[:, None, None] * delays[None, :, :])
    resp = np.sum(gains[None, :, :] * phasors, axis=1)
    resp = resp.reshape((f.size,) + tuple(dims))
    return resp[0] if np.ndim(f_hz) == 0 else resp


def gen_wideband(path_gains, path_delays, f_subcarriers, dims: tuple[int, int] | None = None) -> WidebandChannelSet:
    """Build per-subcarrier channels from path gains and per-element delays.

    ``path_gains`` is length ``L`` (one gain per path) or ``(L, N)`` for
    per-element gains; ``path_delays`` is ``(L, N)`` in seconds.
    """
    delays = np.atleast_2d(np.asarray(path_delays, dtype=float))
    n_paths, n_el = delays.shape
    if n_paths < 1:
        raise DimensionError("need at least one path")
    if np.any(delays < 0) or not np.all(np.isfinite(delays)):
        raise DomainError("path delays must be finite and >= 0")
    gains = np.asarray(path_gains, dtype=complex)
    if gains.ndim == 1:
        gains = np.broadcast_to(gains[:, None], (n_paths, n_el))
    if gains.shape != (n_paths, n_el):
        raise DimensionError(f"path gains shape {gains.shape} incompatible with delays {delays.shape}")
    f = np.asarray(f_subcarriers, dtype=float).ravel()
    if f.size < 1:
        raise DimensionError("need at least one subcarrier")
    if np.any(np.diff(f) <= 0):
        raise DomainError("subcarrier frequencies must be strictly increasing")
    dims = (1, n_el) if dims is None else tuple(dims)
    if dims[0] * dims[1] != n_el:
        raise DimensionError(f"dims {dims} do not hold {n_el} elements")
    gains = np.array(gains)
    per_sc = _path_response(gains, delays, f, dims)
    return WidebandChannelSet(per_sc, f, delays, gains, dims)


# -- dual timescale -------------------------------------------------------------


@dataclass(frozen=True)
class TimescaleState:
    """Slow NB->RIS segment held for ``T_slow`` slots, fast RIS->UE segment for ``T_fast``."""

    G_epoch: np.ndarray | None
    H_current: np.ndarray | None
    slot_counter: int = 0
    m_ris: int = 16
    n_nb: int = 1
    n_ue: int = 1
    rician_k: float = 0.0


def advance_timescale(state: TimescaleState, T_slow: int, T_fast: int,
                      seed_stream: np.random.Generator) -> TimescaleState:
    """Advance one slot, redrawing G every ``T_slow`` and H every ``T_fast`` slots."""
    if T_fast < 1 or T_slow < 1 or T_slow % T_fast != 0:
        raise ConfigError(f"T_slow ({T_slow}) must be a positive multiple of T_fast ({T_fast})")
    t = state.slot_counter
    G = state.G_epoch
    H = state.H_current
    if t % T_slow == 0 or G is None:
        G = gen_channel(state.m_ris, state.n_nb, state.rician_k, seed_stream)
    if t % T_fast == 0 or H is None:
        H = gen_channel(state.n_ue, state.m_ris, state.rician_k, seed_stream)
    return TimescaleState(G, H, t + 1, state.m_ris, state.n_nb, state.n_ue, state.rician_k)
