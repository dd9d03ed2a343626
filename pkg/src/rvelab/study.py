"""End-to-end Monte-Carlo studies: dispatch seeded realizations
(pack -> draw -> voxelize -> solve) across a worker pool, persist
per-realization records and emit per-size summaries.

Reproducibility contract: the seed of realization (protocol, size, index)
is a 64-bit hash of (master_seed, protocol, size, index) feeding a
counter-based generator, so records are byte-identical for a fixed config
regardless of worker count or scheduling.
"""
from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict, dataclass, field
from multiprocessing import get_context
from pathlib import Path

from . import stats
from .geometry import Configuration
from .raster import measured_volume_fraction, voxelize
from .sampling import PackingError, ProtocolSpec, derive_seed, draw
from .solver import MaterialPair, SolverSettings, apparent_tensor

__all__ = [
    "StudyConfig",
    "load_config",
    "run_study",
    "run_vf_sweep",
    "compute_reference",
    "summarize_study",
    "emit_autocorrelation_csv",
]

WORKERS_ENV = "RVELAB_WORKERS"
REFERENCE_PHI = 0.30  # fraction defining the reference length scale L0


@dataclass
class StudyConfig:
    shape: str
    phi: float
    sizes: list[int]
    protocols: list[str] = field(default_factory=lambda: ["periodized", "snapshot"])
    materials: MaterialPair = MaterialPair(1.2, 0.2)
    isolation: float = 1.2
    realizations: int = 100
    master_seed: int = 0
    workers: int = 0
    output_dir: str = "study-out"
    resolution_rule: dict = field(default_factory=lambda: {"voxels_per_K": 16})
    reference: dict | None = None
    solver: SolverSettings = SolverSettings()
    packing: dict = field(default_factory=dict)
    aspect: float = 20.0
    magnification: float | None = None

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise ValueError("sizes must be positive")
        if self.shape == "spherocylinder":
            if "voxels_per_diameter" not in self.resolution_rule:
                raise ValueError("fiber studies use the voxels_per_diameter rule")
        elif "voxels_per_K" not in self.resolution_rule:
            raise ValueError("disk/sphere studies use the voxels_per_K rule")

    @property
    def dim(self) -> int:
        return 2 if self.shape == "disk" else 3

    def resolution_for(self, size: int) -> int:
        if "voxels_per_K" in self.resolution_rule:
            return int(self.resolution_rule["voxels_per_K"]) * size
        # fiber length spans aspect-ratio many diameters
        per_diam = int(self.resolution_rule["voxels_per_diameter"])
        return int(round(per_diam * self.aspect)) * size

    def protocol_spec(self, protocol: str, size: int) -> ProtocolSpec:
        return ProtocolSpec(
            protocol=protocol,
            shape=self.shape,
            size=size,
            phi=self.phi,
            isolation=self.isolation,
            magnification=self.magnification,
            aspect=self.aspect,
            packing=dict(self.packing),
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["materials"] = {
            "alpha_inclusion": self.materials.alpha_inclusion,
            "alpha_matrix": self.materials.alpha_matrix,
        }
        out["solver"] = {
            "reference_alpha": self.solver.reference_alpha,
            "tolerance": self.solver.tolerance,
            "max_iters": self.solver.max_iters,
            "metric": self.solver.metric,
        }
        return out


def _config_from_dict(data: dict) -> StudyConfig:
    data = dict(data)
    if "materials" in data and not isinstance(data["materials"], MaterialPair):
        m = data["materials"]
        data["materials"] = MaterialPair(
            alpha_inclusion=float(m["alpha_inclusion"]),
            alpha_matrix=float(m["alpha_matrix"]),
        )
    if "solver" in data and not isinstance(data["solver"], SolverSettings):
        s = dict(data["solver"])
        if s.get("reference_alpha") is not None:
            s["reference_alpha"] = float(s["reference_alpha"])
        data["solver"] = SolverSettings(**s)
    data["sizes"] = [int(s) for s in data["sizes"]]
    return StudyConfig(**data)


def load_config(path) -> StudyConfig:
    """Study configuration from a JSON or TOML file."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    return _config_from_dict(data)


def _worker_count(config: StudyConfig) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    if config.workers and config.workers > 0:
        return config.workers
    return max(1, min(os.cpu_count() or 1, 8))


# module-level state for pool workers
_WORKER_CONFIG: StudyConfig | None = None


def _init_worker(config_dict: dict):
    global _WORKER_CONFIG
    _WORKER_CONFIG = _config_from_dict(config_dict)


def realization_seed(master_seed: int, protocol: str, size: int, index: int) -> int:
    return derive_seed(master_seed, protocol, size, index)


def _draw_with_policy(spec: ProtocolSpec, seed: int) -> tuple[Configuration, int]:
    """Draw one realization; snapshot parents that fail to pack are retried
    once with a derived seed before counting as a failure."""
    try:
        return draw(spec, seed), seed
    except PackingError:
        if spec.protocol != "snapshot":
            raise
        retry_seed = derive_seed(seed, "snapshot-retry")
        return draw(spec, retry_seed), retry_seed


def _run_one(task) -> tuple[tuple, dict]:
    protocol, size, index = task
    config = _WORKER_CONFIG
    assert config is not None
    seed = realization_seed(config.master_seed, protocol, size, index)
    spec = config.protocol_spec(protocol, size)
    n = config.resolution_for(size)
    try:
        realization, used_seed = _draw_with_policy(spec, seed)
    except PackingError as err:
        return (protocol, size, index), {
            "failure": str(err), "seed": seed, "index": index,
            "protocol": protocol, "K": size,
        }
    grid = voxelize(realization, n)
    result = apparent_tensor(grid, config.materials, config.solver)
    record = {
        "protocol": protocol,
        "K": size,
        "seed": used_seed,
        "n": n,
        "phi_measured": measured_volume_fraction(grid),
        "a11": result.tensor[0, 0],
        "a22": result.tensor[1, 1],
        "iters": result.iterations,
        "residual": result.residual,
    }
    if config.dim == 3:
        record["a33"] = result.tensor[2, 2]
    return (protocol, size, index), record


def _run_phi_one(task) -> tuple[tuple, dict]:
    protocol, size, index = task
    config = _WORKER_CONFIG
    assert config is not None
    seed = realization_seed(config.master_seed, protocol, size, index)
    spec = config.protocol_spec(protocol, size)
    n = config.resolution_for(size)
    try:
        realization, used_seed = _draw_with_policy(spec, seed)
    except PackingError as err:
        return (protocol, size, index), {
            "failure": str(err), "seed": seed, "index": index,
            "protocol": protocol, "K": size,
        }
    grid = voxelize(realization, n)
    return (protocol, size, index), {
        "protocol": protocol,
        "K": size,
        "seed": used_seed,
        "n": n,
        "phi_measured": measured_volume_fraction(grid),
    }


def _map_tasks(config: StudyConfig, tasks, fn):
    """Run tasks across the pool; results are re-ordered deterministically
    by the caller, so scheduling does not matter.  Set RVELAB_PROGRESS for
    coarse progress lines on stderr."""
    workers = _worker_count(config)
    progress = bool(os.environ.get("RVELAB_PROGRESS"))
    every = max(1, len(tasks) // 25)

    def _tick(done):
        if progress and (done % every == 0 or done == len(tasks)):
            print(f"[rvelab study] {done}/{len(tasks)} realizations",
                  file=sys.stderr, flush=True)

    if workers == 1:
        _init_worker(config.to_dict())
        results = []
        for t in tasks:
            results.append(fn(t))
            _tick(len(results))
        return results
    ctx = get_context("spawn" if sys.platform == "win32" else "fork")
    with ctx.Pool(workers, initializer=_init_worker,
                  initargs=(config.to_dict(),)) as pool:
        results = []
        for item in pool.imap_unordered(fn, tasks, chunksize=1):
            results.append(item)
            _tick(len(results))
        return results


def _split_results(results):
    records, failures = {}, {}
    for key, payload in results:
        if "failure" in payload:
            failures[key] = payload
        else:
            records[key] = payload
    return records, failures


FAILURE_COLUMNS = ["protocol", "K", "index", "seed", "failure"]


def _reference_value(config: StudyConfig, out_dir: Path) -> float | None:
    ref = config.reference
    if ref and "value" in ref:
        return float(ref["value"])
    stored = out_dir / "reference.json"
    if stored.exists():
        return float(json.loads(stored.read_text())["mean"])
    return None


def _summaries(config: StudyConfig, records: dict, reference: float | None):
    rows = []
    for protocol in config.protocols:
        for size in config.sizes:
            values = [rec["a11"] for (p, s, _), rec in sorted(records.items())
                      if p == protocol and s == size]
            if not values:
                continue
            row = {"protocol": protocol, "K": size, "N": len(values)}
            if len(values) >= 2:
                summary = stats.summarize(stats.SampleSet(values))
                row.update(mean=summary.mean, std=summary.std,
                           ci99=summary.ci_halfwidth)
                if reference:
                    sset = stats.SampleSet(values)
                    decomp = stats.error_decomposition(sset, reference)
                    row.update(
                        rel_sys=decomp["relative_systematic"],
                        rel_rand=decomp["relative_random"],
                        p_1pct=stats.success_probability(sset, reference, 0.01),
                        **{"p_0.1pct": stats.success_probability(sset, reference, 0.001)},
                    )
            else:
                # degenerate N=1: record the value, flag the undefined spread
                row.update(mean=values[0], std="undefined", ci99="undefined")
            rows.append(row)
    return rows


def run_study(config: StudyConfig):
    """Execute the full study; returns (output directory, failure count).

    Writes realizations.csv, failures.csv (when any), summary.csv and a
    config echo.  Per-realization failures never abort the study.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2))
    tasks = [(p, s, i) for p in config.protocols for s in config.sizes
             for i in range(config.realizations)]
    results = _map_tasks(config, tasks, _run_one)
    records, failures = _split_results(results)
    ordered = [records[k] for k in sorted(records)]
    stats.write_realizations_csv(out / "realizations.csv", ordered, config.dim)
    if failures:
        stats.write_curve_csv(out / "failures.csv",
                              [failures[k] for k in sorted(failures)],
                              FAILURE_COLUMNS)
    reference = _reference_value(config, out)
    stats.write_summary_csv(out / "summary.csv",
                            _summaries(config, records, reference))
    return out, len(failures)


def run_vf_sweep(config: StudyConfig):
    """Geometry-only sweep: measured volume fractions per size and the
    normalized dispersion curve (no solves)."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(p, s, i) for p in config.protocols for s in config.sizes
             for i in range(config.realizations)]
    results = _map_tasks(config, tasks, _run_phi_one)
    records, failures = _split_results(results)
    ordered = [records[k] for k in sorted(records)]
    stats.write_curve_csv(out / "vf_realizations.csv", ordered,
                          ["protocol", "K", "seed", "n", "phi_measured"])
    curve_rows = []
    scale = (REFERENCE_PHI / config.phi) ** (1.0 / config.dim)
    for protocol in config.protocols:
        sweep = []
        for size in config.sizes:
            values = [rec["phi_measured"] for (p, s, _), rec in sorted(records.items())
                      if p == protocol and s == size]
            if len(values) >= 2:
                sweep.append((size * scale, values))
        for row in stats.vf_variance_curve(sweep, config.phi):
            curve_rows.append({
                "protocol": protocol,
                "L_over_L0": row["size"],
                "normalized_std": row["normalized_std"],
                "n": row["n"],
                "phi": config.phi,
            })
    stats.write_curve_csv(out / "vf_curve.csv", curve_rows,
                          ["protocol", "L_over_L0", "normalized_std", "n", "phi"])
    return out, len(failures)


def compute_reference(config: StudyConfig, size: int | None = None,
                      realizations: int | None = None) -> stats.StudySummary:
    """Reference apparent conductivity: mean and 99% t-CI of periodized
    runs at the largest affordable size; persisted next to the study."""
    ref_cfg = config.reference or {}
    size = size or int(ref_cfg.get("size", max(config.sizes)))
    realizations = realizations or int(ref_cfg.get("realizations", 10))
    values = []
    n = config.resolution_for(size)
    spec = config.protocol_spec("periodized", size)
    for index in range(realizations):
        seed = realization_seed(config.master_seed, "reference", size, index)
        realization = draw(spec, seed)
        grid = voxelize(realization, n)
        result = apparent_tensor(grid, config.materials, config.solver)
        values.append(result.a_bar)
    summary = stats.summarize(stats.SampleSet(values))
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reference.json").write_text(json.dumps({
        "mean": summary.mean, "std": summary.std,
        "ci99": summary.ci_halfwidth, "n": summary.n,
        "size": size,
    }, indent=2))
    return summary


def summarize_study(study_dir, reference: float | None = None):
    """Recompute summary.csv from the stored realizations."""
    out = Path(study_dir)
    config = _config_from_dict(json.loads((out / "config.json").read_text()))
    rows = stats.read_realizations_csv(out / "realizations.csv")
    records = {}
    for i, row in enumerate(rows):
        records[(row["protocol"], row["K"], i)] = row
    if reference is None:
        reference = _reference_value(config, out)
    summary_rows = _summaries(config, records, reference)
    stats.write_summary_csv(out / "summary.csv", summary_rows)
    return summary_rows


def emit_autocorrelation_csv(config: StudyConfig, protocol: str, size: int,
                             seed: int, path) -> None:
    """Scaled autocorrelation curve of one realization, radially binned,
    distances in units of the particle radius."""
    spec = config.protocol_spec(protocol, size)
    realization = draw(spec, seed)
    grid = voxelize(realization, config.resolution_for(size))
    curve = stats.empirical_autocorrelation(
        grid, radius_unit=realization.species.radius
    )
    rows = [{"r_over_radius": r, "h": h, "count": c}
            for r, h, c in zip(curve.r, curve.h, curve.counts)]
    stats.write_curve_csv(path, rows, ["r_over_radius", "h", "count"])
