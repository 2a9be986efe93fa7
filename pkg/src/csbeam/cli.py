"""Command-line driver: simulate, beamform, sweep, metrics.

Runs end-to-end experiments from a single JSON config: scene synthesis,
noise injection per SNR, snapshot extraction, beamforming with any of the
three algorithms, metrics, and raster output.  Every output is a pure
function of (config, master seed); per-SNR noise seeds derive from the
master seed XOR an FNV-1a hash of the SNR label.

Exit codes: 0 success, 2 config error, 3 solver non-convergence or a failed
sweep cell, 4 I/O error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__
from .beamform import (
    DeltaPolicy,
    PowerMap,
    cb,
    csb1,
    csb2,
    load_power_map_values,
    resolve_delta_csb1,
    resolve_delta_csb2,
    save_power_map,
)
from .exceptions import ConfigError
from .geometry import load_geometry_csv, make_grid, spiral_array, subsample_sensors
from .metrics import axial_slice, compute_metrics, normalize_db, save_metrics_json
from .simulate import (
    SourceScene,
    add_noise,
    broadband,
    estimate_csm,
    save_timeseries,
    snapshot_noise_variance,
    synthesize,
    to_snapshots,
    tone,
)
from .waves import lift_steering_matrix, steering_matrix

ALGORITHM_KEYS = ("cb", "csb1", "csb2")

_SOLVER_DEFAULTS = {"primal_tol": 1e-6, "dual_tol": 1e-6, "max_iters": 5000}

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(text: str) -> int:
    """Stable 64-bit FNV-1a hash of a UTF-8 string."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def snr_label(snr_db: float) -> str:
    """Canonical label for an SNR value ("inf", "0", "-10", "2.5", ...)."""
    return "inf" if math.isinf(snr_db) else format(float(snr_db), "g")


def sub_seed(master_seed: int, label: str) -> int:
    """Per-label noise seed: master_seed XOR fnv1a64(label), masked to 64 bits."""
    return (int(master_seed) ^ fnv1a64(label)) & _MASK64


def _req(mapping, key, path, kind=None):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}", "missing required field")
    value = mapping[key]
    if kind is not None and not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ConfigError(f"{path}.{key}", f"expected {names}, got {type(value).__name__}")
    return value


def _positive(value, path) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ConfigError(path, f"must be a positive finite number, got {value}")
    return value


def _parse_snr(value, path) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        raise ConfigError(path, f"expected a number or 'inf', got {value!r}")
    if isinstance(value, (int, float)) and math.isfinite(value):
        return float(value)
    raise ConfigError(path, f"expected a finite number or 'inf', got {value!r}")


@dataclass(frozen=True)
class RunConfig:
    """Normalized, validated run configuration."""

    version: int
    geometry: dict
    subsample: dict | None
    grid: dict
    scene: tuple
    sampling: dict
    frequencies: tuple
    snr_db: tuple
    algorithms: tuple
    delta: dict
    solver: dict
    speed: float
    output_dir: str
    seed: int

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        version = _req(raw, "version", "<root>", int)
        if version != 1:
            raise ConfigError("version", f"unsupported config version {version}")

        geo_raw = _req(raw, "geometry", "<root>", dict)
        kind = _req(geo_raw, "kind", "geometry", str)
        if kind == "spiral":
            geometry = {
                "kind": "spiral",
                "num_sensors": int(_req(geo_raw, "num_sensors", "geometry")),
                "num_arms": int(_req(geo_raw, "num_arms", "geometry")),
                "max_radius": _positive(_req(geo_raw, "max_radius", "geometry"),
                                        "geometry.max_radius"),
            }
            if geometry["num_arms"] < 1 or geometry["num_sensors"] < geometry["num_arms"]:
                raise ConfigError("geometry", "need num_sensors >= num_arms >= 1")
        elif kind == "file":
            geometry = {"kind": "file", "path": _req(geo_raw, "path", "geometry", str)}
        else:
            raise ConfigError("geometry.kind", f"expected 'spiral' or 'file', got {kind!r}")

        subsample = None
        if raw.get("subsample") is not None:
            ss = _req(raw, "subsample", "<root>", dict)
            subsample = {
                "count": int(_req(ss, "count", "subsample")),
                "seed": int(_req(ss, "seed", "subsample")),
            }
            if subsample["count"] < 1:
                raise ConfigError("subsample.count", "must be >= 1")

        grid_raw = _req(raw, "grid", "<root>", dict)
        extent = _req(grid_raw, "extent", "grid", list)
        if len(extent) != 4:
            raise ConfigError("grid.extent", "expected [x_min, x_max, y_min, y_max]")
        extent = [float(v) for v in extent]
        if not (extent[0] < extent[1] and extent[2] < extent[3]):
            raise ConfigError("grid.extent", "need x_min < x_max and y_min < y_max")
        grid = {
            "extent": extent,
            "nx": int(_req(grid_raw, "nx", "grid")),
            "ny": int(_req(grid_raw, "ny", "grid")),
            "plane_offset": _positive(_req(grid_raw, "plane_offset", "grid"),
                                      "grid.plane_offset"),
        }
        if grid["nx"] < 1 or grid["ny"] < 1:
            raise ConfigError("grid", "nx and ny must be >= 1")

        scene_raw = _req(raw, "scene", "<root>", list)
        if not scene_raw:
            raise ConfigError("scene", "need at least one source")
        scene = []
        for idx, src in enumerate(scene_raw):
            path = f"scene[{idx}]"
            if not isinstance(src, dict):
                raise ConfigError(path, "each source must be an object")
            skind = _req(src, "kind", path, str)
            position = _req(src, "position", path, list)
            if len(position) != 3:
                raise ConfigError(f"{path}.position", "expected [x, y, z]")
            position = [float(v) for v in position]
            amplitude = _positive(src.get("amplitude", 1.0), f"{path}.amplitude")
            if skind == "tone":
                entry = {
                    "kind": "tone",
                    "position": position,
                    "frequency": _positive(_req(src, "frequency", path), f"{path}.frequency"),
                    "amplitude": amplitude,
                    "phase": float(src.get("phase", 0.0)),
                }
            elif skind == "broadband":
                band = _req(src, "band", path, list)
                if len(band) != 2:
                    raise ConfigError(f"{path}.band", "expected [low, high]")
                band = [float(band[0]), float(band[1])]
                if not (0 < band[0] < band[1]):
                    raise ConfigError(f"{path}.band", "need 0 < low < high")
                entry = {
                    "kind": "broadband",
                    "position": position,
                    "band": band,
                    "amplitude": amplitude,
                    "seed": int(src.get("seed", 0)),
                }
            else:
                raise ConfigError(f"{path}.kind", f"expected 'tone' or 'broadband', got {skind!r}")
            scene.append(entry)

        samp_raw = _req(raw, "sampling", "<root>", dict)
        sampling = {
            "rate": _positive(_req(samp_raw, "rate", "sampling"), "sampling.rate"),
            "duration": _positive(_req(samp_raw, "duration", "sampling"), "sampling.duration"),
            "block_size": int(_req(samp_raw, "block_size", "sampling")),
            "window": samp_raw.get("window", "rectangular"),
            "overlap": float(samp_raw.get("overlap", 0.5)),
        }
        if sampling["block_size"] < 2:
            raise ConfigError("sampling.block_size", "must be >= 2")
        if sampling["window"] not in ("rectangular", "hann"):
            raise ConfigError("sampling.window", f"expected 'rectangular' or 'hann', "
                                                 f"got {sampling['window']!r}")
        if not (0.0 <= sampling["overlap"] < 1.0):
            raise ConfigError("sampling.overlap", "must lie in [0, 1)")
        max_scene_freq = max(
            s["frequency"] if s["kind"] == "tone" else s["band"][1] for s in scene
        )
        if sampling["rate"] <= 2.0 * max_scene_freq:
            raise ConfigError("sampling.rate",
                              f"must exceed twice the highest scene frequency "
                              f"({max_scene_freq} Hz)")

        freqs_raw = _req(raw, "frequencies", "<root>", list)
        if not freqs_raw:
            raise ConfigError("frequencies", "need at least one analysis frequency")
        frequencies = []
        for idx, f in enumerate(freqs_raw):
            f = _positive(f, f"frequencies[{idx}]")
            bins = f * sampling["block_size"] / sampling["rate"]
            if abs(bins - round(bins)) > 1e-6:
                raise ConfigError(
                    f"frequencies[{idx}]",
                    f"{f} Hz is not an exact DFT bin for block_size "
                    f"{sampling['block_size']} at rate {sampling['rate']}",
                )
            if not (1 <= round(bins) < sampling["block_size"] / 2):
                raise ConfigError(f"frequencies[{idx}]",
                                  "bin must lie strictly between DC and Nyquist")
            frequencies.append(f)

        snr_raw = _req(raw, "snr_db", "<root>", list)
        if not snr_raw:
            raise ConfigError("snr_db", "need at least one SNR entry")
        snr_db = tuple(_parse_snr(v, f"snr_db[{idx}]") for idx, v in enumerate(snr_raw))

        algos_raw = _req(raw, "algorithms", "<root>", list)
        if not algos_raw:
            raise ConfigError("algorithms", "need at least one algorithm")
        algorithms = []
        for idx, a in enumerate(algos_raw):
            if not isinstance(a, str) or a.lower() not in ALGORITHM_KEYS:
                raise ConfigError(f"algorithms[{idx}]",
                                  f"expected one of {list(ALGORITHM_KEYS)}, got {a!r}")
            if a.lower() in algorithms:
                raise ConfigError(f"algorithms[{idx}]", f"duplicate algorithm {a!r}")
            algorithms.append(a.lower())

        delta_raw = raw.get("delta", {"mode": "from-noise-power", "safety": 1.0})
        if not isinstance(delta_raw, dict):
            raise ConfigError("delta", "must be an object")
        mode = delta_raw.get("mode", "from-noise-power")
        if mode == "explicit":
            value = delta_raw.get("value")
            if value is None or float(value) < 0:
                raise ConfigError("delta.value", "explicit mode needs a value >= 0")
            delta = {"mode": "explicit", "value": float(value)}
        elif mode == "from-noise-power":
            safety = float(delta_raw.get("safety", 1.0))
            if safety < 1.0:
                raise ConfigError("delta.safety", "must be >= 1")
            delta = {"mode": "from-noise-power", "safety": safety}
        else:
            raise ConfigError("delta.mode",
                              f"expected 'explicit' or 'from-noise-power', got {mode!r}")

        solver_raw = raw.get("solver", {})
        if not isinstance(solver_raw, dict):
            raise ConfigError("solver", "must be an object")
        unknown = set(solver_raw) - set(_SOLVER_DEFAULTS)
        if unknown:
            raise ConfigError("solver", f"unknown keys {sorted(unknown)}")
        solver = dict(_SOLVER_DEFAULTS)
        solver.update({k: (int(v) if k == "max_iters" else float(v))
                       for k, v in solver_raw.items()})
        if solver["max_iters"] < 1:
            raise ConfigError("solver.max_iters", "must be >= 1")

        speed = _positive(raw.get("speed", 343.0), "speed")
        output_dir = _req(raw, "output_dir", "<root>", str)
        seed = int(_req(raw, "seed", "<root>"))

        return cls(
            version=version, geometry=geometry, subsample=subsample, grid=grid,
            scene=tuple(scene), sampling=sampling, frequencies=tuple(frequencies),
            snr_db=snr_db, algorithms=tuple(algorithms), delta=delta, solver=solver,
            speed=speed, output_dir=output_dir, seed=seed,
        )

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "geometry": dict(self.geometry),
            "subsample": dict(self.subsample) if self.subsample else None,
            "grid": dict(self.grid),
            "scene": [dict(s) for s in self.scene],
            "sampling": dict(self.sampling),
            "frequencies": list(self.frequencies),
            "snr_db": [snr_label(v) if math.isinf(v) else v for v in self.snr_db],
            "algorithms": list(self.algorithms),
            "delta": dict(self.delta),
            "solver": dict(self.solver),
            "speed": self.speed,
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    def build_geometry(self):
        if self.geometry["kind"] == "spiral":
            geo = spiral_array(self.geometry["num_sensors"], self.geometry["num_arms"],
                               self.geometry["max_radius"])
        else:
            geo = load_geometry_csv(self.geometry["path"])
        if self.subsample is not None:
            geo = subsample_sensors(geo, self.subsample["count"], self.subsample["seed"])
        return geo

    def build_grid(self):
        return make_grid(tuple(self.grid["extent"]), self.grid["nx"], self.grid["ny"],
                         self.grid["plane_offset"])

    def build_scene(self):
        sources = []
        for s in self.scene:
            if s["kind"] == "tone":
                sources.append(tone(s["position"], s["frequency"], s["amplitude"],
                                    s["phase"]))
            else:
                sources.append(broadband(s["position"], s["band"], s["amplitude"],
                                         s["seed"]))
        return SourceScene(sources)


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return RunConfig.from_dict(raw)


def write_pgm(path, db_map: np.ndarray, ny: int, nx: int, floor_db: float = -100.0) -> None:
    """8-bit binary PGM: linear map of [floor_db, 0] dB onto [0, 255]."""
    levels = np.clip((db_map - floor_db) / (0.0 - floor_db), 0.0, 1.0)
    pixels = np.round(levels * 255.0).astype(np.uint8).reshape(ny, nx)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def _dump_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def _atomic_dump_json(path, payload) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    _dump_json(tmp, payload)
    os.replace(tmp, path)


def _timeseries_path(out_dir: Path, label: str) -> Path:
    return out_dir / f"timeseries_snr_{label}.csbt"


def cmd_simulate(config: RunConfig, out_dir: Path) -> dict:
    """Write the clean time series plus one noisy series per SNR entry."""
    out_dir.mkdir(parents=True, exist_ok=True)
    geometry = config.build_geometry()
    scene = config.build_scene()
    clean = synthesize(scene, geometry, config.sampling["rate"],
                       config.sampling["duration"], config.speed, seed=config.seed)
    clean_path = out_dir / "timeseries_clean.csbt"
    save_timeseries(clean, clean_path)

    fragment = {"clean": str(clean_path), "noisy": {}, "noise_power": {}}
    for snr in config.snr_db:
        label = snr_label(snr)
        noisy, noise_power = add_noise(clean, snr, sub_seed(config.seed, label))
        path = _timeseries_path(out_dir, label)
        save_timeseries(noisy, path)
        fragment["noisy"][label] = str(path)
        fragment["noise_power"][label] = [float(v) for v in noise_power]
    return fragment


def run_cell(config: RunConfig, algorithm: str, snr_db: float, frequency: float,
             out_dir: Path, trace: bool = False) -> dict:
    """Execute one (algorithm, SNR, frequency) cell and write its outputs."""
    if algorithm not in ALGORITHM_KEYS:
        raise ConfigError("algorithm", f"expected one of {list(ALGORITHM_KEYS)}")
    out_dir.mkdir(parents=True, exist_ok=True)
    geometry = config.build_geometry()
    grid = config.build_grid()
    scene = config.build_scene()
    sampling = config.sampling
    label = snr_label(snr_db)

    started = time.perf_counter()
    clean = synthesize(scene, geometry, sampling["rate"], sampling["duration"],
                       config.speed, seed=config.seed)
    noisy, noise_power_time = add_noise(clean, snr_db, sub_seed(config.seed, label))
    snapshots = to_snapshots(noisy, sampling["block_size"], frequency,
                             window=sampling["window"],
                             overlap_fraction=sampling["overlap"])
    matrix = steering_matrix(geometry, grid, frequency, config.speed)

    noise_power_bin = snapshot_noise_variance(noise_power_time, sampling["block_size"],
                                              sampling["window"])
    policy = DeltaPolicy(
        mode=config.delta["mode"],
        explicit_value=config.delta.get("value", 0.0),
        noise_power=noise_power_bin,
        safety=config.delta.get("safety", 1.0),
        block_count=snapshots.num_blocks,
    )

    base = out_dir / f"{algorithm}_snr_{label}_f{format(frequency, 'g')}"
    trace_path = f"{base}.trace.csv" if trace else None
    solver = config.solver
    delta = None
    if algorithm == "cb":
        pmap = cb(estimate_csm(snapshots), matrix)
    elif algorithm == "csb1":
        delta = resolve_delta_csb1(policy, geometry.num_sensors)
        pmap = csb1(snapshots.blocks[0], matrix, delta,
                    primal_tol=solver["primal_tol"], dual_tol=solver["dual_tol"],
                    max_iters=solver["max_iters"], trace=trace_path)
    else:
        delta = resolve_delta_csb2(policy, geometry.num_sensors)
        pmap = csb2(estimate_csm(snapshots), lift_steering_matrix(matrix), delta,
                    primal_tol=solver["primal_tol"], dual_tol=solver["dual_tol"],
                    max_iters=solver["max_iters"], trace=trace_path)

    truth = config.scene[0]["position"] if len(config.scene) == 1 else None
    metrics = compute_metrics(pmap, grid, truth=truth)

    map_path = Path(f"{base}.map.csv")
    save_power_map(pmap, grid, map_path)
    metrics_path = Path(f"{base}.metrics.json")
    save_metrics_json(metrics, metrics_path)

    slice_path = Path(f"{base}.slice.csv")
    slice_rows = axial_slice(pmap, grid, axis="x", through="peak")
    slice_text = "\n".join(["x,db"] + [f"{c!r},{v!r}" for c, v in slice_rows]) + "\n"
    slice_path.write_text(slice_text, encoding="utf-8")

    pgm_path = Path(f"{base}.pgm")
    write_pgm(pgm_path, normalize_db(pmap, floor_db=-100.0), grid.ny, grid.nx)

    elapsed = time.perf_counter() - started
    return {
        "algorithm": algorithm,
        "snr_db": label,
        "frequency": frequency,
        "delta": delta,
        "noise_power": [float(v) for v in np.atleast_1d(noise_power_bin)],
        "converged": pmap.converged,
        "iterations": pmap.iterations,
        "metrics": metrics.to_dict(),
        "files": {
            "map": str(map_path),
            "map_sidecar": str(map_path.with_suffix(".json")),
            "metrics": str(metrics_path),
            "slice": str(slice_path),
            "raster": str(pgm_path),
            **({"trace": trace_path} if trace else {}),
        },
        "seconds": elapsed,
    }


_SWEEP_COLUMNS = [
    "algorithm", "snr_db", "frequency", "delta", "converged", "iterations",
    "peak_index", "peak_x", "peak_y", "localization_error_m", "dynamic_range_db",
    "mainlobe_width_m", "max_sidelobe_db", "count_zero", "error",
]


def _sweep_row(cell: dict) -> list:
    if "error" in cell:
        return [cell["algorithm"], cell["snr_db"], cell["frequency"],
                "", "", "", "", "", "", "", "", "", "", "", cell["error"]]
    m = cell["metrics"]
    return [
        cell["algorithm"], cell["snr_db"], cell["frequency"],
        "" if cell["delta"] is None else repr(cell["delta"]),
        "" if cell["converged"] is None else str(cell["converged"]).lower(),
        "" if cell["iterations"] is None else cell["iterations"],
        m["peak_index"], repr(m["peak_position"][0]), repr(m["peak_position"][1]),
        "" if m["localization_error_m"] is None else repr(m["localization_error_m"]),
        repr(m["dynamic_range_db"]), repr(m["mainlobe_width_m"]),
        repr(m["max_sidelobe_db"]), m["count_zero"], "",
    ]


def parallelism_from_env(default: int | None = None) -> int:
    value = os.environ.get("CSBEAM_PARALLELISM")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            raise ConfigError("CSBEAM_PARALLELISM", f"not an integer: {value!r}") from None
    return default if default is not None else (os.cpu_count() or 1)


def cmd_sweep(config: RunConfig, out_dir: Path, trace: bool = False) -> int:
    """Run the full (algorithm, SNR, frequency) product; return an exit code."""
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = list(product(config.algorithms, config.snr_db, config.frequencies))
    workers = min(parallelism_from_env(), len(cells))

    def job(cell):
        algorithm, snr, frequency = cell
        try:
            return run_cell(config, algorithm, snr, frequency, out_dir, trace=trace)
        except Exception as exc:  # recorded, sweep continues
            return {
                "algorithm": algorithm,
                "snr_db": snr_label(snr),
                "frequency": frequency,
                "error": f"{type(exc).__name__}: {exc}",
            }

    started = time.perf_counter()
    if workers <= 1:
        results = [job(cell) for cell in cells]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, cells))

    table_path = out_dir / "sweep.csv"
    lines = [",".join(_SWEEP_COLUMNS)]
    lines += [",".join(str(v) for v in _sweep_row(cell)) for cell in results]
    table_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    manifest = {
        "toolkit_version": __version__,
        "config": config.to_dict(),
        "table": str(table_path),
        "cells": results,
        "timings": {
            "total_seconds": time.perf_counter() - started,
            "cell_seconds": {
                f"{c['algorithm']}/{c['snr_db']}/{format(c['frequency'], 'g')}":
                    c.get("seconds")
                for c in results
            },
        },
    }
    _atomic_dump_json(out_dir / "manifest.json", manifest)

    failed = [c for c in results if "error" in c]
    unconverged = [c for c in results if c.get("converged") is False]
    if failed:
        for c in failed:
            print(f"cell {c['algorithm']}/{c['snr_db']}/{c['frequency']}: {c['error']}",
                  file=sys.stderr)
        return 3
    if unconverged:
        return 3
    return 0


def cmd_metrics(map_csv: str) -> int:
    """Recompute metrics from a map CSV and print them as JSON.

    The CSV stores only in-plane coordinates, so the lattice is rebuilt at a
    unit plane offset; the reported peak position is in-plane.
    """
    xy, values = load_power_map_values(map_csv)
    xs = np.unique(xy[:, 0])
    ys = np.unique(xy[:, 1])
    nx, ny = len(xs), len(ys)
    if nx < 2 or ny < 2:
        raise ConfigError("<map>", "map must span at least 2 distinct x and y values")
    if nx * ny != len(values):
        raise ConfigError("<map>", "map grid is not a full lattice")
    grid = make_grid((float(xs.min()), float(xs.max()),
                      float(ys.min()), float(ys.max())), nx, ny, 1.0)
    if not np.allclose(grid.points[:, :2], xy, atol=0.0):
        raise ConfigError("<map>", "map rows are not in row-major grid order")
    pmap = PowerMap(values, frequency=0.0, algorithm="CB")
    metrics = compute_metrics(pmap, grid, truth=None)
    print(json.dumps(metrics.to_dict(), indent=2, sort_keys=True))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csbeam",
        description="Compressive-sensing beamforming experiments from a JSON config.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("-c", "--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default=None, help="override the configured output directory")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")

    p_sim = sub.add_parser("simulate", help="write clean and noisy time-series files")
    add_common(p_sim)

    p_beam = sub.add_parser("beamform", help="run one (algorithm, SNR, frequency) cell")
    add_common(p_beam)
    p_beam.add_argument("--algo", required=True, choices=ALGORITHM_KEYS)
    p_beam.add_argument("--snr", required=True,
                        help="SNR in dB, or 'inf' for noise-free")
    p_beam.add_argument("--freq", required=True, type=float, help="analysis frequency in Hz")
    p_beam.add_argument("--trace", action="store_true",
                        help="dump solver iteration traces")

    p_sweep = sub.add_parser("sweep", help="run the full algorithm x SNR x frequency product")
    add_common(p_sweep)
    p_sweep.add_argument("--trace", action="store_true",
                         help="dump solver iteration traces")

    p_metrics = sub.add_parser("metrics", help="recompute metrics from a map CSV")
    p_metrics.add_argument("map_csv", help="path to a map CSV written by beamform/sweep")
    return parser


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    raw = config.to_dict()
    if args.out is not None:
        raw["output_dir"] = args.out
    if args.seed is not None:
        raw["seed"] = args.seed
    return RunConfig.from_dict(raw)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "metrics":
            return cmd_metrics(args.map_csv)

        config = _apply_overrides(load_config(args.config), args)
        out_dir = Path(config.output_dir)

        if args.command == "simulate":
            fragment = cmd_simulate(config, out_dir)
            _atomic_dump_json(out_dir / "simulate_manifest.json", {
                "toolkit_version": __version__,
                "config": config.to_dict(),
                "timeseries": fragment,
            })
            return 0

        if args.command == "beamform":
            try:
                snr = float(args.snr)
                if not math.isfinite(snr):
                    snr = _parse_snr(args.snr, "--snr")
            except ValueError:
                snr = _parse_snr(args.snr, "--snr")
            cell = run_cell(config, args.algo, snr, args.freq, out_dir, trace=args.trace)
            print(json.dumps(cell, indent=2, sort_keys=True))
            return 0 if cell.get("converged") in (True, None) else 3

        if args.command == "sweep":
            return cmd_sweep(config, out_dir, trace=args.trace)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
