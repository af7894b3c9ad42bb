"""Scenario orchestration, seed derivation, aggregation and persistence."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import beamforming as bf
from . import coexistence as cx
from . import frames as fr
from . import ttd
from .channels import block_diag_users, cascade, gen_channel, gen_channel_set, gen_wideband, ula_path_delays
from .config import SimulationConfig
from .errors import RisSimError

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("scenario", "params", "metric", "mean", "std", "count")
TRIAL_COLUMNS = ("scenario", "params", "metric", "trial", "value")
BER_COLUMNS = ("K", "snr_db", "ber", "n_bits")
SQUINT_COLUMNS = ("f_hz", "subband", "gain", "loss_db")


def derive_seed(master: int, scenario_id: str, trial_index: int) -> int:
    """Stable 64-bit seed for one (scenario, trial) pair."""
    digest = hashlib.blake2b(f"{master}/{scenario_id}/{trial_index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass
class MetricRow:
    scenario: str
    params: dict
    metric: str
    mean: float
    std: float
    count: int
    values: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError("MetricRow needs at least one trial")

    @classmethod
    def from_trials(cls, scenario: str, params: dict, metric: str, values) -> "MetricRow":
        v = np.asarray(values, dtype=float)
        std = float(np.std(v, ddof=1)) if v.size > 1 and np.all(np.isfinite(v)) else 0.0
        return cls(scenario, params, metric, float(np.mean(v)), std, int(v.size), v.tolist())

    @property
    def params_key(self) -> str:
        return json.dumps(self.params, sort_keys=True, separators=(",", ":"))


@dataclass
class RunResult:
    rows: list[MetricRow]
    tables: dict[str, tuple[tuple[str, ...], list[dict]]]
    status: int = 0
    message: str = ""


class _Collector:
    """Trial values keyed by (params, metric, trial) so reduction order is fixed."""

    def __init__(self, scenario: str):
        self.scenario = scenario
        self._data: dict[tuple[str, str], dict[int, float]] = {}
        self._params: dict[str, dict] = {}

    def add(self, params: dict, trial: int, **metrics):
        key = json.dumps(params, sort_keys=True)
        self._params[key] = params
        for name, value in metrics.items():
            self._data.setdefault((key, name), {})[trial] = float(value)

    def rows(self) -> list[MetricRow]:
        out = []
        for (key, name), by_trial in self._data.items():
            vals = [by_trial[t] for t in sorted(by_trial)]
            out.append(MetricRow.from_trials(self.scenario, self._params[key], name, vals))
        return out


def _snr(db: float) -> float:
    return 10.0 ** (db / 10.0)


# -- scenarios --------------------------------------------------------------------


def _run_decouple(cfg: SimulationConfig, col: _Collector, tables):
    for t in range(cfg.trial_count):
        seed = derive_seed(cfg.seed, "decouple", t)
        rng = np.random.default_rng(seed)
        G = gen_channel(cfg.m_ris, cfg.n_nb, cfg.rician_k, rng)
        H = gen_channel(cfg.n_ue, cfg.m_ris, cfg.rician_k, rng)
        sol = bf.decouple_bd_svd(G, H, streams=cfg.streams)
        E = sol.effective_channel(H)
        expect = sol.expected_gains
        rel = np.max(np.abs(np.abs(np.diag(E)) - expect) / expect)
        constrained = bf.bd_svd_regulation(G, H, cfg.constraint, cfg.bits, streams=cfg.streams)
        random_phases = bf.RegulationMatrix.from_phases(rng.uniform(0, 2 * np.pi, cfg.m_ris))
        for db in cfg.snr_db:
            snr = _snr(db)
            col.add({"snr_db": db}, t,
                    offdiag_power_ratio=bf.offdiag_power_ratio(E),
                    diag_rel_error=rel,
                    streams=sol.S,
                    cap_decoupled=bf.capacity(E, snr, sol.S),
                    cap_constrained=bf.capacity(cascade(H, constrained, G) @ sol.F, snr, sol.S),
                    cap_random_phase=bf.capacity(cascade(H, random_phases, G) @ sol.F, snr, sol.S))


def _run_multiuser(cfg: SimulationConfig, col: _Collector, tables):
    users = max(cfg.n_users, 2)
    for t in range(cfg.trial_count):
        seed = derive_seed(cfg.seed, "multiuser", t)
        ch = gen_channel_set(cfg.n_nb, cfg.m_ris, cfg.n_ue, users, cfg.rician_k, cfg.direct_path, seed)
        literal = bf.decouple_bd_svd(ch.G, block_diag_users(ch.H_users), streams=cfg.streams)
        lit_E = literal.effective_channel(block_diag_users(ch.H_users))
        own = [bf.optimal_regulation(h, ch.G, d, cfg.constraint, cfg.bits) for h, d in zip(ch.H_users, ch.D_users)]
        shared = own[0]
        for db in cfg.snr_db:
            snr = _snr(db)
            losses = [bf.tuning_loss(ch, shared, own[k], snr, user=k) for k in range(users)]
            metrics = {f"loss_ue{k}": v for k, v in enumerate(losses)}
            metrics.update({f"cap_ue{k}": bf.capacity(cascade(ch.H_users[k], shared, ch.G, ch.D_users[k]), snr)
                            for k in range(users)})
            col.add({"snr_db": db}, t, literal_offdiag_power_ratio=bf.offdiag_power_ratio(lit_E),
                    max_tuning_loss=max(losses), **metrics)


def _coexist_trials(cfg: SimulationConfig, scenario_id: str, snr: float):
    return [
        cx.make_scenario(cfg.n_nb, cfg.m_ris, cfg.n_ue, derive_seed(cfg.seed, scenario_id, t), cfg.rician_k,
                         cfg.direct_path, snr, cfg.constraint, cfg.bits)
        for t in range(cfg.trial_count)
    ]


def _sweep_rows(cfg, col, scenarios, db) -> list[dict]:
    betas = sorted(cfg.beta_grid)
    table = []
    for beta in betas:
        acc = []
        params = {"snr_db": db, "mechanism": cfg.mechanism, "beta": beta}
        for t, sc in enumerate(scenarios):
            vals = cx.mitigation_trial(sc, beta, cfg.mechanism, cfg.partition)
            acc.append(vals)
            col.add(params, t, **dict(zip(cx.SWEEP_COLUMNS[1:], vals)))
        mean = np.mean(acc, axis=0)
        table.append(dict(zip(cx.SWEEP_COLUMNS, (beta, *map(float, mean)))))
    return table


def _run_coexist(cfg: SimulationConfig, col: _Collector, tables):
    sweep = []
    for db in cfg.snr_db:
        scenarios = _coexist_trials(cfg, "coexist", _snr(db))
        for t, sc in enumerate(scenarios):
            res = cx.coexist_received(sc)
            col.add({"snr_db": db}, t, cap_ueA=res["A"].capacity, cap_ueB=res["B"].capacity,
                    loss_ueB=res["B"].tuning_loss)
        sweep = sweep or _sweep_rows(cfg, col, scenarios, db)
    tables["sweep"] = (cx.SWEEP_COLUMNS, sweep)


def _run_sweep(cfg: SimulationConfig, col: _Collector, tables):
    db = cfg.snr_db[0]
    scenarios = _coexist_trials(cfg, "sweep", _snr(db))
    tables["sweep"] = (cx.SWEEP_COLUMNS, _sweep_rows(cfg, col, scenarios, db))


def _ttd_instance(cfg: SimulationConfig, seed: int):
    rng = np.random.default_rng(seed)
    f1 = cfg.carrier_hz
    f2 = f1 + cfg.subband_gap_hz
    grid = ttd.OFDMGrid.two_subbands(f1, f2, cfg.subcarriers_per_band, cfg.subcarrier_spacing_hz, cfg.n_cp,
                                     cfg.sample_period_s)
    channels = {}
    all_delays = []
    for label in grid.labels:
        n_paths = 2
        delays = ula_path_delays(rng.uniform(0, 50e-9, n_paths), cfg.m_ris, 0.5, rng.uniform(-1, 1, n_paths), f1)
        gains = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / np.sqrt(2 * n_paths)
        channels[label] = gen_wideband(gains, delays, grid.subband(label))
        all_delays.append(delays)
    return grid, channels, np.concatenate(all_delays)


def _run_ttd(cfg: SimulationConfig, col: _Collector, tables):
    for t in range(cfg.trial_count):
        grid, channels, delays = _ttd_instance(cfg, derive_seed(cfg.seed, "ttd", t))
        lab = grid.labels
        f1, f2 = grid.center(lab[0]), grid.center(lab[1])
        c1 = channels[lab[0]].at(f1).ravel()
        c2 = channels[lab[1]].at(f2).ravel()
        design = ttd.design_two_subband(c1, c2, grid, group_K=cfg.group_k)
        profile = ttd.squint_profile(design, channels, grid)
        if t == 0:
            tables["squint"] = (SQUINT_COLUMNS, profile)
        valid, slack = ttd.cp_valid(grid, design, delays)
        matched = {l: float(np.sum(np.abs(channels[l].at(grid.center(l)))) ** 2) for l in lab}

        def center_loss(cfg_):
            return [10 * np.log10(matched[l] / np.abs(np.sum(cfg_.weights(grid.center(l))
                                                           * channels[l].at(grid.center(l)).ravel())) ** 2)
                    for l in lab]

        ideal = center_loss(design)
        col.add({"tau_bits": None, "phi_bits": None}, t,
                phase_err_f1=float(np.max(ttd.phase_error(ttd.achieved_phase(design, f1), -np.angle(c1)))),
                phase_err_f2=float(np.max(ttd.phase_error(ttd.achieved_phase(design, f2), -np.angle(c2)))),
                center_loss_db_sb0=ideal[0], center_loss_db_sb1=ideal[1],
                band_edge_loss_db_sb0=ttd.band_edge_loss(profile, lab[0]),
                band_edge_loss_db_sb1=ttd.band_edge_loss(profile, lab[1]),
                max_tau_s=float(design.tau.max()), cp_valid=float(valid), cp_slack_s=slack)
        for tb in cfg.tau_bits_grid:
            for pb in cfg.phi_bits_grid:
                q = ttd.quantize_ttd(design, tb, pb, cfg.tau_max_s)
                losses = center_loss(q)
                col.add({"tau_bits": tb, "phi_bits": pb}, t, center_loss_db_sb0=losses[0],
                        center_loss_db_sb1=losses[1], clamped=len(q.flags.get("clamped", [])))


def _run_frames(cfg: SimulationConfig, col: _Collector, tables):
    ber_rows = []
    bits_total = (cfg.n_bits // cfg.bits_per_frame) * cfg.bits_per_frame or cfg.bits_per_frame
    for db in cfg.snr_db:
        snr = _snr(db)
        for k in cfg.spread_k:
            errors = n = 0
            params = {"snr_db": db, "K": k}
            for t in range(cfg.trial_count):
                seed = derive_seed(cfg.seed, "frames", t)
                rng = np.random.default_rng(seed)
                ch = gen_channel_set(1, cfg.m_ris, 1, 1, cfg.rician_k, cfg.direct_path, rng)
                base = bf.optimal_regulation(ch.H_users[0], ch.G, ch.D_users[0], "unit-modulus")
                bits = rng.integers(0, 2, bits_total).tolist()
                pattern = fr.FramePattern(cfg.pilot_slots, k * cfg.bits_per_frame, cfg.silent_slots)
                res = fr.run_frame(fr.build_schedule(pattern, k, bits, base), ch, snr, seed)
                errors += res.bit_errors
                n += len(res.decoded_bits)
                col.add(params, t, ber=res.ber, off_ratio=res.off_ratio, capacity_on=res.capacity_on,
                        capacity_effective=res.primary_capacity_effective,
                        direct_interference_ratio=fr.direct_interference_ratio(ch, base))
            ber_rows.append({"K": k, "snr_db": db, "ber": errors / n, "n_bits": n})
    tables["ber"] = (BER_COLUMNS, ber_rows)


_DISPATCH = {
    "decouple": _run_decouple,
    "multiuser": _run_multiuser,
    "coexist": _run_coexist,
    "sweep": _run_sweep,
    "ttd": _run_ttd,
    "frames": _run_frames,
}


def run(cfg: SimulationConfig, write: bool = True) -> RunResult:
    """Run the configured scenario; numeric or model errors give status 1."""
    col = _Collector(cfg.scenario)
    tables: dict = {}
    try:
        with np.errstate(invalid="raise", divide="ignore", over="ignore"):
            _DISPATCH[cfg.scenario](cfg, col, tables)
        rows = col.rows()
    except (RisSimError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return RunResult([], {}, 1, f"{cfg.scenario}: {type(exc).__name__}: {exc}")
    result = RunResult(rows, tables)
    if write:
        write_outputs(cfg, result)
    return result


# -- persistence ------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _json_scalar(v):
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def to_csv(columns, rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _metric_dicts(rows: list[MetricRow]) -> list[dict]:
    return [{"scenario": r.scenario, "params": r.params_key, "metric": r.metric, "mean": r.mean, "std": r.std,
             "count": r.count} for r in rows]


def _trial_dicts(rows: list[MetricRow]) -> list[dict]:
    return [{"scenario": r.scenario, "params": r.params_key, "metric": r.metric, "trial": i, "value": v}
            for r in rows for i, v in enumerate(r.values)]


def write_outputs(cfg: SimulationConfig, result: RunResult) -> list[Path]:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    echo = cfg.model_dump(mode="json")
    files = {"metrics": (METRIC_COLUMNS, _metric_dicts(result.rows))}
    if cfg.per_trial:
        files["trials"] = (TRIAL_COLUMNS, _trial_dicts(result.rows))
    files.update(result.tables)
    written = []
    for name, (columns, rows) in files.items():
        if cfg.format == "csv":
            path = out / f"{name}.csv"
            path.write_text(to_csv(columns, rows), encoding="utf-8")
        else:
            path = out / f"{name}.json"
            payload = {"config_echo": echo, "rows": [{c: r[c] for c in columns} for r in rows]}
            text = json.dumps(payload, indent=1, sort_keys=True, default=_json_scalar)
            path.write_text(text + "\n", encoding="utf-8")
        written.append(path)
        log.info("wrote %s", path)
    return written
