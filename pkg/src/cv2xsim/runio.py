"""Config files, sweep orchestration and CSV/metadata output.

Configs are JSON. A run resolves the file against CLI overrides (seed,
replications, desk-scale section) into a single dict whose canonical JSON is
hashed; the hash is stamped into every output file so downstream commands can
refuse mismatched inputs. Replications are independently seeded from
(master seed, grid index, replication index) and merged in index order, which
makes outputs byte-identical regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, engine, metrics, sps, tail_model
from .channel import ChannelConfig, PathlossParams
from .resource_grid import ResourcePool


class ConfigError(Exception):
    """Invalid or missing configuration; the message names the culprit."""


# -- config loading ----------------------------------------------------------

_CHANNEL_FIELDS = {
    "tx_power_dbm", "noise_figure_db", "pscch_boost_db", "carrier_ghz",
    "nakagami_m_near", "nakagami_m_far", "nakagami_crossover_m",
    "inband_emission_mask_db", "sinr_threshold_pssch_db",
    "sinr_threshold_pscch_db", "max_range_m", "noise_psd_override_mw",
}
_PATHLOSS_FIELDS = {
    "ref_distance_m", "ref_loss_db", "exponent_near", "exponent_far", "breakpoint_m",
}


def load_config(path: str | Path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {p} is not valid JSON: {e}") from None


def resolve_config(
    raw: dict,
    desk_scale: bool = False,
    seed_override: Optional[int] = None,
    replications_override: Optional[int] = None,
) -> dict:
    """Apply the desk-scale section and CLI overrides; validate the result."""
    cfg = json.loads(json.dumps(raw))  # deep copy
    if desk_scale:
        overlay = cfg.get("desk_scale")
        if overlay is None:
            raise ConfigError("--desk-scale requested but config has no 'desk_scale' section")
        for section, values in overlay.items():
            if not isinstance(values, dict):
                raise ConfigError(f"desk_scale.{section} must be an object")
            cfg.setdefault(section, {}).update(values)
    cfg.pop("desk_scale", None)
    if seed_override is not None:
        cfg.setdefault("scenario", {})["seed"] = int(seed_override)
    if replications_override is not None:
        cfg.setdefault("scenario", {})["replications"] = int(replications_override)
    _validate(cfg)
    return cfg


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing required field: {where}.{key}")
    return section[key]


def _validate(cfg: dict) -> None:
    scenario = cfg.get("scenario")
    if not isinstance(scenario, dict):
        raise ConfigError("missing required section: scenario")
    for key in ("highway_length_m", "sim_time_s", "warmup_s", "seed", "replications"):
        _require(scenario, key, "scenario")
    if scenario["warmup_s"] >= scenario["sim_time_s"]:
        raise ConfigError("scenario.warmup_s must be smaller than scenario.sim_time_s")
    if int(scenario["replications"]) < 1:
        raise ConfigError("scenario.replications must be >= 1")

    sweep = cfg.get("sweep")
    if not isinstance(sweep, dict):
        raise ConfigError("missing required section: sweep")
    for key in ("densities_vue_per_km", "bandwidths_mhz", "oneshot", "harq"):
        values = _require(sweep, key, "sweep")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.{key} must be a non-empty list")
    for bw in sweep["bandwidths_mhz"]:
        if bw not in (10, 20):
            raise ConfigError(f"sweep.bandwidths_mhz entry {bw} not supported (use 10 or 20)")
    for h in sweep["harq"]:
        if h not in ("on", "off"):
            raise ConfigError(f"sweep.harq entry {h!r} must be 'on' or 'off'")
    for entry in sweep["oneshot"]:
        _oneshot_from_entry(entry)

    sps_cfg = cfg.get("sps")
    if not isinstance(sps_cfg, dict):
        raise ConfigError("missing required section: sps")
    for key in ("alpha", "beta", "keep_probability"):
        _require(sps_cfg, key, "sps")
    try:
        sps.CounterConfig(sps_cfg["alpha"], sps_cfg["beta"], sps_cfg["keep_probability"])
    except ValueError as e:
        raise ConfigError(f"sps: {e}") from None

    for key in cfg.get("channel", {}):
        if key == "pathloss":
            for pk in cfg["channel"]["pathloss"]:
                if pk not in _PATHLOSS_FIELDS:
                    raise ConfigError(f"unknown field channel.pathloss.{pk}")
        elif key not in _CHANNEL_FIELDS:
            raise ConfigError(f"unknown field channel.{key}")


def _oneshot_from_entry(entry):
    if entry == "off":
        return None
    if isinstance(entry, list) and len(entry) == 2:
        try:
            return sps.CounterConfig(int(entry[0]), int(entry[1]), keep_probability=0.0)
        except ValueError as e:
            raise ConfigError(f"sweep.oneshot entry {entry}: {e}") from None
    raise ConfigError(f"sweep.oneshot entry {entry!r} must be 'off' or [alpha, beta]")


def oneshot_label(entry) -> str:
    return "off" if entry == "off" else f"{int(entry[0])}-{int(entry[1])}"


def config_hash(resolved: dict) -> str:
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def build_channel_config(cfg: dict) -> ChannelConfig:
    section = dict(cfg.get("channel", {}))
    pathloss = section.pop("pathloss", None)
    if pathloss is not None:
        carrier = section.get("carrier_ghz", 5.9)
        base = PathlossParams.for_carrier(carrier)
        merged = {f: pathloss.get(f, getattr(base, f)) for f in _PATHLOSS_FIELDS}
        section["pathloss"] = PathlossParams(**merged)
    if "inband_emission_mask_db" in section:
        section["inband_emission_mask_db"] = tuple(section["inband_emission_mask_db"])
    return ChannelConfig(**section)


# -- sweep execution ---------------------------------------------------------

@dataclass(frozen=True)
class GridPoint:
    index: int
    density: float
    bandwidth_mhz: int
    oneshot_entry: object
    harq: str

    @property
    def oneshot_cfg(self) -> Optional[sps.CounterConfig]:
        return _oneshot_from_entry(self.oneshot_entry)

    @property
    def oneshot_name(self) -> str:
        return oneshot_label(self.oneshot_entry)

    @property
    def harq_enabled(self) -> bool:
        return self.harq == "on"


def sweep_grid(cfg: dict) -> list[GridPoint]:
    sweep = cfg["sweep"]
    points = []
    idx = 0
    for density in sweep["densities_vue_per_km"]:
        for bw in sweep["bandwidths_mhz"]:
            for oneshot_entry in sweep["oneshot"]:
                for harq in sweep["harq"]:
                    points.append(GridPoint(idx, float(density), int(bw), oneshot_entry, harq))
                    idx += 1
    return points


def _run_one(args):
    (scenario, pool, channel_cfg, sps_cfg, oneshot_cfg, harq, seed, grid_idx, rep) = args
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(grid_idx, rep))
    return engine.run_replication(scenario, pool, channel_cfg, sps_cfg, oneshot_cfg, harq, seq)


@dataclass
class GridResult:
    point: GridPoint
    store: metrics.MetricStore
    itt_gaps: dict
    n_vehicles: list[int]


def run_sweep(cfg: dict, jobs: int = 1, log=None) -> list[GridResult]:
    """Run the full sweep grid; returns merged per-grid-point results."""
    scenario_cfg = cfg["scenario"]
    seed = int(scenario_cfg["seed"])
    reps = int(scenario_cfg["replications"])
    channel_cfg = build_channel_config(cfg)
    sps_cfg = sps.CounterConfig(
        cfg["sps"]["alpha"], cfg["sps"]["beta"], cfg["sps"]["keep_probability"]
    )
    points = sweep_grid(cfg)

    tasks = []
    for point in points:
        scenario = engine.ScenarioConfig(
            highway_length_m=float(scenario_cfg["highway_length_m"]),
            density_vue_per_km=point.density,
            sim_time_s=float(scenario_cfg["sim_time_s"]),
            warmup_s=float(scenario_cfg["warmup_s"]),
            seed=seed,
            replications=reps,
            ground_truth_neighbors=bool(scenario_cfg.get("ground_truth_neighbors", False)),
        )
        pool = ResourcePool.from_bandwidth(point.bandwidth_mhz)
        for rep in range(reps):
            tasks.append(
                (scenario, pool, channel_cfg, sps_cfg, point.oneshot_cfg,
                 point.harq_enabled, seed, point.index, rep)
            )

    if jobs > 1:
        with multiprocessing.Pool(processes=jobs) as mp_pool:
            results = mp_pool.map(_run_one, tasks, chunksize=1)
    else:
        results = []
        for t in tasks:
            results.append(_run_one(t))
            if log:
                log(f"  replication {len(results)}/{len(tasks)} done")

    out = []
    per_point = len(tasks) // len(points) if points else 0
    for i, point in enumerate(points):
        chunk = results[i * per_point:(i + 1) * per_point]
        store, gaps = engine.merge_replications(chunk)
        out.append(
            GridResult(point, store, dict(sorted(gaps.items())), [r.n_vehicles for r in chunk])
        )
        if log:
            log(f"grid point {point.index}: density={point.density:g} bw={point.bandwidth_mhz} "
                f"oneshot={point.oneshot_name} harq={point.harq} merged")
    return out


# -- output writers ----------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows, cfg_hash: str) -> None:
    with open(path, "w") as f:
        f.write(f"# config_hash={cfg_hash}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path: Path) -> tuple[str, list[str], list[list[str]]]:
    """Read a CSV written by :func:`_write_csv`; returns (hash, header, rows)."""
    if not path.exists():
        raise ConfigError(f"expected output file not found: {path}")
    with open(path) as f:
        first = f.readline().strip()
        if not first.startswith("# config_hash="):
            raise ConfigError(f"{path} lacks a config_hash header")
        cfg_hash = first.split("=", 1)[1]
        header = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    return cfg_hash, header, rows


CCDF_HEADER = ["density", "bandwidth_mhz", "oneshot_cfg", "harq", "distance_bin_m", "ipg_ms", "ccdf"]
PRR_HEADER = ["density", "bandwidth_mhz", "oneshot_cfg", "harq", "distance_bin_m", "prr", "tx_count"]
VALIDATION_HEADER = [
    "density", "bandwidth_mhz", "oneshot_cfg", "harq", "interferer_mode",
    "distance_bin_m", "p_f", "slope_analytic", "slope_sim", "relative_gap",
]


def write_outputs(results: list[GridResult], cfg: dict, out_dir: Path) -> dict:
    """Write ccdf.csv, prr.csv and run_meta.json; returns the metadata dict."""
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_hash = config_hash(cfg)
    ccdf_bins = cfg.get("output", {}).get("ccdf_bins_m")
    if ccdf_bins is not None:
        ccdf_bins = sorted({metrics.bin_index_for_center(b) for b in ccdf_bins})

    ccdf_rows = []
    prr_rows = []
    for res in results:
        p = res.point
        key = (p.density, p.bandwidth_mhz, p.oneshot_name, p.harq)
        bins = ccdf_bins if ccdf_bins is not None else range(metrics.N_BINS)
        for b in bins:
            if res.store.ipg_sample_count(b) == 0:
                continue
            curve = metrics.ccdf(res.store, b)
            center = metrics.bin_center(b)
            for value, frac in zip(curve.values, curve.fractions):
                ccdf_rows.append((*key, center, int(value), frac))
        for b in res.store.populated_bins():
            prr_rows.append(
                (*key, metrics.bin_center(b), metrics.prr(res.store, b), int(res.store.tx_count[b]))
            )

    _write_csv(out_dir / "ccdf.csv", CCDF_HEADER, ccdf_rows, cfg_hash)
    _write_csv(out_dir / "prr.csv", PRR_HEADER, prr_rows, cfg_hash)

    meta = {
        "tool": "cv2xsim",
        "version": __version__,
        "config_hash": cfg_hash,
        "seed": int(cfg["scenario"]["seed"]),
        "resolved_config": cfg,
        "grid": [
            {
                "density_vue_per_km": res.point.density,
                "bandwidth_mhz": res.point.bandwidth_mhz,
                "oneshot_cfg": res.point.oneshot_name,
                "harq": res.point.harq,
                "n_vehicles": res.n_vehicles,
                "itt_hist_ms": {str(k): v for k, v in res.itt_gaps.items()},
                "itt_mode_ms": _hist_mode(res.itt_gaps),
                "itt_median_ms": _hist_median(res.itt_gaps),
            }
            for res in results
        ],
    }
    with open(out_dir / "run_meta.json", "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    return meta


def _hist_mode(hist: dict) -> Optional[int]:
    if not hist:
        return None
    return int(max(hist.items(), key=lambda kv: (kv[1], -kv[0]))[0])


def _hist_median(hist: dict) -> Optional[int]:
    if not hist:
        return None
    total = sum(hist.values())
    acc = 0
    for value in sorted(hist):
        acc += hist[value]
        if 2 * acc >= total:
            return int(value)
    return None


# -- validation --------------------------------------------------------------

def _grid_key(point_row: dict) -> tuple:
    return (
        float(point_row["density_vue_per_km"]),
        int(point_row["bandwidth_mhz"]),
        point_row["oneshot_cfg"],
        point_row["harq"],
    )


def load_simulated_ccdf(rows: list[list[str]], key: tuple, bin_center: float) -> Optional[metrics.Ccdf]:
    values, fractions = [], []
    for row in rows:
        if (float(row[0]), int(row[1]), row[2], row[3]) == key and float(row[4]) == bin_center:
            values.append(float(row[5]))
            fractions.append(float(row[6]))
    if not values:
        return None
    order = np.argsort(values)
    return metrics.Ccdf(np.asarray(values)[order], np.asarray(fractions)[order])


def load_prr_value(rows: list[list[str]], key: tuple, bin_center: float) -> Optional[float]:
    for row in rows:
        if (float(row[0]), int(row[1]), row[2], row[3]) == key and float(row[4]) == bin_center:
            return float(row[5])
    return None


def run_validation(cfg: dict, sim_dir: Path, out_dir: Path) -> list[tuple]:
    """Compare analytical and simulated tail slopes for every grid point."""
    vcfg = cfg.get("validation")
    if not isinstance(vcfg, dict):
        raise ConfigError("missing required section: validation")
    bin_m = float(_require(vcfg, "distance_bin_m", "validation"))
    fit_lo = float(vcfg.get("fit_lo_ms", 1000.0))
    fit_hi = float(vcfg.get("fit_hi_ms", 5000.0))
    modes = vcfg.get("interferer_modes", ["single"])
    k_max = int(vcfg.get("k_max", 60))
    harq_sel = vcfg.get("harq", "on")
    period_setting = vcfg.get("period_ms", "auto")

    cfg_hash = config_hash(cfg)
    ccdf_hash, _, ccdf_rows = read_csv(sim_dir / "ccdf.csv")
    prr_hash, _, prr_rows = read_csv(sim_dir / "prr.csv")
    meta_path = sim_dir / "run_meta.json"
    if not meta_path.exists():
        raise ConfigError(f"expected output file not found: {meta_path}")
    with open(meta_path) as f:
        meta = json.load(f)
    for name, h in (("ccdf.csv", ccdf_hash), ("prr.csv", prr_hash), ("run_meta.json", meta["config_hash"])):
        if h != cfg_hash:
            raise ConfigError(
                f"config hash mismatch: {name} was produced by config {h}, expected {cfg_hash}"
            )

    bin_idx = metrics.bin_index_for_center(bin_m)
    center = metrics.bin_center(bin_idx)
    sps_model = tail_model.sps_params(
        cfg["sps"]["alpha"], cfg["sps"]["beta"], cfg["sps"]["keep_probability"]
    )

    rows = []
    for grid_entry in meta["grid"]:
        if grid_entry["harq"] != harq_sel:
            continue
        key = _grid_key(grid_entry)
        prr_value = load_prr_value(prr_rows, key, center)
        if prr_value is None:
            raise ConfigError(
                f"no PRR value for bin centered at {center} m (grid point {key}); "
                "add it to output.ccdf_bins_m and re-simulate"
            )
        sim_curve = load_simulated_ccdf(ccdf_rows, key, center)
        if sim_curve is None:
            raise ConfigError(
                f"no simulated CCDF for bin centered at {center} m (grid point {key})"
            )
        if period_setting == "auto":
            period = float(grid_entry["itt_mode_ms"] or 100.0)
        else:
            period = float(period_setting)
        oneshot_name = grid_entry["oneshot_cfg"]
        if oneshot_name == "off":
            oneshot = None
        else:
            a, b = oneshot_name.split("-")
            oneshot = tail_model.oneshot_params(int(a), int(b))
        horizon = max(k_max, math.ceil(fit_hi / period) + 5)
        for mode in modes:
            model_cfg = tail_model.TailModelConfig(
                sps=sps_model, oneshot=oneshot, p_f=prr_value,
                interferer_mode=mode, k_max=horizon,
            )
            cmp = tail_model.compare_slopes(
                tail_model.tail(model_cfg), sim_curve, fit_lo, fit_hi, period_ms=period
            )
            rows.append(
                (key[0], key[1], key[2], key[3], mode, center, prr_value,
                 cmp.slope_analytic, cmp.slope_simulated, cmp.relative_gap)
            )

    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "validation.csv", VALIDATION_HEADER, rows, cfg_hash)
    return rows


# -- analytic / oracle -------------------------------------------------------

def model_specs(cfg: dict) -> list[tuple[str, tail_model.TailModelConfig]]:
    entries = cfg.get("analytic")
    if not isinstance(entries, list) or not entries:
        raise ConfigError("missing required section: analytic (list of model specs)")
    specs = []
    for i, entry in enumerate(entries):
        where = f"analytic[{i}]"
        label = _require(entry, "label", where)
        sps_entry = _require(entry, "sps", where)
        sps_model = tail_model.sps_params(
            sps_entry["alpha"], sps_entry["beta"], sps_entry["keep_probability"]
        )
        oneshot_entry = _require(entry, "oneshot", where)
        if oneshot_entry == "off":
            oneshot = None
        else:
            oneshot = tail_model.oneshot_params(int(oneshot_entry[0]), int(oneshot_entry[1]))
        try:
            model = tail_model.TailModelConfig(
                sps=sps_model,
                oneshot=oneshot,
                p_f=float(_require(entry, "p_f", where)),
                interferer_mode=entry.get("interferer_mode", "single"),
                k_max=int(entry.get("k_max", 60)),
            )
        except ValueError as e:
            raise ConfigError(f"{where}: {e}") from None
        specs.append((str(label), model))
    return specs


def write_tail_csv(path: Path, curve: tail_model.TailCurve, cfg_hash: str) -> None:
    rows = [(k, float(v)) for k, v in enumerate(curve.values)]
    _write_csv(path, ["k", "p_t_gt_k"], rows, cfg_hash)
