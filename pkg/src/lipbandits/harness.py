"""Sweep execution and persistence: per-run CSV traces, summary JSON, manifest."""
from __future__ import annotations

import hashlib
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (InsufficientData, build_report, estimate_dimensions, fit_exponent,
                       kT_from_budget, kT_lower, lower_integral, packing_sum_bound,
                       truncated_integral)
from .bandit import (RunTrace, run_grid_ucb_baseline, run_paco, run_paco_one_sided,
                     run_positive_gap_ucb)
from .config import ExperimentConfig, parse_config
from .experts import run_sous
from .instances import ExpertDistribution, NoiseModel

CSV_SCHEMA_VERSION = 1
SUMMARY_NAME = "summary.json"
MANIFEST_NAME = "manifest.json"
CONFIG_NAME = "config.json"


class IoError(OSError):
    pass


def run_rng(master_seed: int, seed: int, T: int) -> np.random.Generator:
    """Independent stream per (master seed, seed, horizon); adding runs never shifts others."""
    ss = np.random.SeedSequence(entropy=(master_seed, seed), spawn_key=(T,))
    return np.random.default_rng(ss)


def execute(cfg: ExperimentConfig, T: int, seed: int) -> RunTrace:
    inst = cfg.build_instance()
    rng = run_rng(cfg.master_seed, seed, T)
    noise = NoiseModel(cfg.noise)
    if cfg.algorithm == "paco":
        return run_paco(inst, noise, T, cfg.delta, cfg.lipschitz, rng)
    if cfg.algorithm == "paco_one_sided":
        return run_paco_one_sided(inst, noise, T, cfg.delta, cfg.lipschitz, rng)
    if cfg.algorithm == "positive_gap_ucb":
        return run_positive_gap_ucb(inst, noise, T, cfg.gap_floor, cfg.lipschitz, rng)
    if cfg.algorithm == "grid_ucb":
        return run_grid_ucb_baseline(inst, noise, T, rng)
    dist = ExpertDistribution(inst, **asdict(cfg.experts))
    return run_sous(dist, T, cfg.delta, rng, L=cfg.lipschitz)


def csv_header(d: int) -> list[str]:
    xs = ["x"] if d == 1 else [f"x{i + 1}" for i in range(d)]
    return ["t", "phase_or_round", *xs, "reward", "gap", "cumulative_regret"]


def trace_csv(trace: RunTrace) -> bytes:
    """CSV bytes with fixed formatting (17 significant digits) so reruns are byte-identical."""
    T, d = trace.arms.shape
    cols = [np.arange(1, T + 1), trace.epoch, *trace.arms.T, trace.rewards, trace.gaps,
            trace.cumulative_regret()]
    buf = io.StringIO()
    buf.write(f"# schema_version={CSV_SCHEMA_VERSION}\n")
    buf.write(",".join(csv_header(d)) + "\n")
    fmt = ["%d", "%d"] + ["%.17g"] * (d + 3)
    np.savetxt(buf, np.column_stack(cols), fmt=fmt, delimiter=",")
    return buf.getvalue().encode()


def run_name(T: int, seed: int) -> str:
    return f"T{T}_seed{seed}.csv"


def run_summary(trace: RunTrace, T: int, seed: int) -> dict:
    out = {"T": T, "seed": seed, "regret": trace.regret, "algorithm": trace.algorithm}
    if trace.phases:
        out["k_T"] = trace.k_T
        out["phases"] = trace.phase_summaries()
    for key in ("n_arms", "grid_size", "scale", "n_optimal"):
        if key in trace.info:
            out[key] = trace.info[key]
    return out


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n").encode()


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _worker(args):
    cfg_dict, T, seed, out_dir = args
    cfg = _config_from_dict(cfg_dict)
    trace = execute(cfg, T, seed)
    if cfg.traces:
        _atomic_write(Path(out_dir) / "runs" / run_name(T, seed), trace_csv(trace))
    return run_summary(trace, T, seed)


def _config_from_dict(d: dict) -> ExperimentConfig:
    from .config import ExpertConfig

    d = dict(d)
    d["horizons"] = tuple(d["horizons"])
    d["seeds"] = tuple(d["seeds"])
    ip = {}
    for k, v in d["instance_params"].items():
        if isinstance(v, list):
            v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
        ip[k] = v
    d["instance_params"] = ip
    ex = dict(d["experts"])
    if ex.get("center") is not None:
        ex["center"] = tuple(ex["center"])
    d["experts"] = ExpertConfig(**ex)
    return ExperimentConfig(**d)


def code_fingerprint() -> str:
    """sha256 over the package sources, so outputs are tied to the code that made them."""
    h = hashlib.sha256()
    root = Path(__file__).parent
    for p in sorted(root.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def aggregate(cfg: ExperimentConfig, runs: list[dict]) -> dict:
    horizons = list(cfg.horizons)
    table = np.array([[r["regret"] for r in runs if r["T"] == T] for T in horizons])
    out = {"algorithm": cfg.algorithm, "family": cfg.family,
           "mean_regret": {str(T): float(table[i].mean()) for i, T in enumerate(horizons)},
           "runs": runs}
    try:
        fit = fit_exponent(horizons, table, seed=cfg.master_seed)
        out["exponent"] = asdict(fit)
    except InsufficientData as exc:
        out["exponent"] = {"error": str(exc)}
    if cfg.report:
        inst = cfg.build_instance()
        if inst.d <= 3 and inst.family != "custom":
            out["reports"] = [build_report(inst, T, cfg.lipschitz, cfg.dimensions).to_dict()
                              for T in horizons]
    return out


def run_experiment(cfg: ExperimentConfig | str, out: str | os.PathLike | None = None,
                   workers: int = 1, seed_offset: int = 0) -> Path:
    """Run every (horizon, seed) pair and write outputs; returns the output directory.

    On any failure the files created by this call are removed and IoError is raised.
    """
    if isinstance(cfg, str):
        cfg = parse_config(cfg)
    if seed_offset:
        cfg = _config_from_dict({**cfg.to_dict(),
                                 "seeds": [s + seed_offset for s in cfg.seeds]})
    out_dir = Path(out if out is not None else cfg.output)
    runs_dir = out_dir / "runs"
    created: list[Path] = []
    made_dirs = [p for p in (out_dir, runs_dir) if not p.exists()]
    try:
        runs_dir.mkdir(parents=True, exist_ok=True)
        tasks = [(cfg.to_dict(), T, s, str(out_dir)) for T in cfg.horizons
                 for s in cfg.seeds]
        if cfg.traces:
            created += [runs_dir / run_name(T, s) for T in cfg.horizons for s in cfg.seeds]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                runs = list(pool.map(_worker, tasks))
        else:
            runs = [_worker(t) for t in tasks]
        summary = aggregate(cfg, runs)
        files = {CONFIG_NAME: _json_bytes(cfg.to_dict()), SUMMARY_NAME: _json_bytes(summary)}
        for name, data in files.items():
            created.append(out_dir / name)
            _atomic_write(out_dir / name, data)
        hashes = {str(p.relative_to(out_dir)): hashlib.sha256(p.read_bytes()).hexdigest()
                  for p in sorted(created)}
        manifest = {"config_sha256": cfg.sha256(), "code_version": __version__,
                    "code_sha256": code_fingerprint(), "csv_schema_version": CSV_SCHEMA_VERSION,
                    "files": hashes}
        created.append(out_dir / MANIFEST_NAME)
        _atomic_write(out_dir / MANIFEST_NAME, _json_bytes(manifest))
    except BaseException as exc:
        for p in created:
            for q in (p, p.with_name(p.name + ".tmp")):
                if q.exists():
                    q.unlink()
        for d in reversed(made_dirs):
            if d.exists() and not any(d.iterdir()):
                d.rmdir()
        if isinstance(exc, (KeyboardInterrupt, SystemExit)):
            raise
        raise IoError(f"experiment failed, partial outputs removed: {exc}") from exc
    return out_dir


def _read_csv(path: Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", comments="#", skiprows=2, ndmin=2)


def analyze_dir(out_dir: str | os.PathLike) -> dict:
    """Recompute pseudo-regret from logged arm coordinates and refit the exponent."""
    out_dir = Path(out_dir)
    cfg = _config_from_dict(json.loads((out_dir / CONFIG_NAME).read_text()))
    summary = json.loads((out_dir / SUMMARY_NAME).read_text())
    inst = cfg.build_instance()
    d = inst.d
    seeds = sorted({r["seed"] for r in summary["runs"]})
    table = []
    mismatches = 0
    for T in cfg.horizons:
        row = []
        for s in seeds:
            path = out_dir / "runs" / run_name(T, s)
            logged = next(r["regret"] for r in summary["runs"] if r["T"] == T and r["seed"] == s)
            if path.exists():
                data = _read_csv(path)
                regret = float(inst.gaps(data[:, 2:2 + d]).sum())
                if not np.isclose(regret, logged, rtol=1e-9, atol=1e-9):
                    mismatches += 1
            else:
                regret = logged
            row.append(regret)
        table.append(row)
    out = {"horizons": list(cfg.horizons), "seeds": seeds,
           "mean_regret": [float(np.mean(r)) for r in table], "recompute_mismatches": mismatches}
    try:
        out["exponent"] = asdict(fit_exponent(cfg.horizons, table, seed=cfg.master_seed))
    except InsufficientData as exc:
        out["exponent"] = {"error": str(exc)}
    return out


def bound_report(cfg: ExperimentConfig) -> dict:
    """Integrals and phase indices for every configured horizon, without simulating."""
    inst = cfg.build_instance()
    rows = []
    for T in cfg.horizons:
        k = kT_lower(T, inst.d)
        first, second = packing_sum_bound(inst, k, cfg.lipschitz)
        rows.append({"T": T, "kT_lower": k, "kT_budget": kT_from_budget(inst, T, cfg.lipschitz),
                     "upper_integral": truncated_integral(inst, k, cfg.quadrature_resolution),
                     "lower_integral": lower_integral(inst, T, cfg.quadrature_resolution),
                     "packing_sum_first": first, "packing_sum_second": second})
    return {"family": cfg.family, "d": inst.d, "bounds": rows}


def dims_report(cfg: ExperimentConfig) -> dict:
    inst = cfg.build_instance()
    dz, ds = estimate_dimensions(inst)
    return {"family": cfg.family, "d": inst.d,
            "dz_est": dz.slope, "dz_residual": dz.residual, "dz_counts": dz.counts,
            "dstar_est": ds.slope, "dstar_residual": ds.residual, "dstar_counts": ds.counts,
            "dz_true": inst.dz_true, "dstar_true": inst.dstar_true}


def _regret_worker(args):
    cfg_dict, T, seed = args
    return execute(_config_from_dict(cfg_dict), T, seed).regret


def regret_table(cfg: ExperimentConfig, workers: int = 1) -> np.ndarray:
    """Pseudo-regret for every (horizon, seed) pair, shape (n_horizons, n_seeds); no files."""
    tasks = [(cfg.to_dict(), T, s) for T in cfg.horizons for s in cfg.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_regret_worker, tasks))
    else:
        flat = [_regret_worker(t) for t in tasks]
    return np.array(flat).reshape(len(cfg.horizons), len(cfg.seeds))
