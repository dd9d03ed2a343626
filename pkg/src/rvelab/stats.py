"""Aggregate statistics: summaries with Student-t confidence intervals,
error decomposition, success probabilities, log-log scaling fits,
FFT autocorrelation and volume-fraction variance curves.

Conventions: standard deviations use the unbiased N-1 divisor; confidence
intervals are two-sided 99% throughout.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft
from scipy.stats import t as student_t

from .raster import VoxelGrid

__all__ = [
    "SampleSet",
    "StudySummary",
    "CorrelationCurve",
    "summarize",
    "format_summary",
    "error_decomposition",
    "success_probability",
    "scaling_fit",
    "empirical_autocorrelation",
    "vf_variance_curve",
    "realization_columns",
    "SUMMARY_COLUMNS",
    "write_realizations_csv",
    "read_realizations_csv",
    "write_summary_csv",
    "write_curve_csv",
]

CONFIDENCE = 0.99


@dataclass
class SampleSet:
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size == 0:
            raise ValueError("a sample set must not be empty")


@dataclass
class StudySummary:
    mean: float
    std: float
    ci_halfwidth: float
    n: int


def summarize(samples: SampleSet) -> StudySummary:
    """Mean, unbiased std and two-sided 99% Student-t CI half-width."""
    v = samples.values
    n = v.size
    if n < 2:
        raise ValueError("summary needs at least two samples (std undefined)")
    mean = float(v.mean())
    std = float(v.std(ddof=1))
    quantile = float(student_t.ppf(0.5 + CONFIDENCE / 2.0, n - 1))
    return StudySummary(mean=mean, std=std,
                        ci_halfwidth=quantile * std / math.sqrt(n), n=n)


def format_summary(summary: StudySummary) -> str:
    """'mean +- ci' with the CI rounded to one significant digit (two when
    it leads with 1) and the mean aligned to the same decimal place."""
    ci = summary.ci_halfwidth
    if ci <= 0:
        return f"{summary.mean:.6g} +- 0"
    exponent = math.floor(math.log10(ci))
    mantissa = ci / 10.0**exponent
    digits = 2 if mantissa < 2.0 else 1  # keep two digits when leading with 1
    decimals = max(0, (digits - 1) - exponent)
    ci_r = round(ci, (digits - 1) - exponent)
    return f"{summary.mean:.{decimals}f} +- {ci_r:.{decimals}f}"


def error_decomposition(samples: SampleSet, reference: float) -> dict:
    """Relative systematic error |mean/ref - 1| and relative random error
    std/mean against a reference value."""
    if reference <= 0:
        raise ValueError("reference must be positive")
    v = samples.values
    mean = float(v.mean())
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return {
        "relative_systematic": abs(mean / reference - 1.0),
        "relative_random": std / mean,
    }


def success_probability(samples: SampleSet, reference: float, rel_tol: float) -> float:
    """Fraction of samples within rel_tol relative distance of the
    reference."""
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    v = samples.values
    return float(np.mean(np.abs(v / reference - 1.0) <= rel_tol))


def scaling_fit(points) -> dict:
    """Least-squares line through (log10 x, log10 y); needs >= 3 points
    with positive values."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ValueError("scaling fit needs at least 3 points")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise ValueError("scaling fit needs positive coordinates")
    lx = np.log10([p[0] for p in pts])
    ly = np.log10([p[1] for p in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    fit = slope * lx + intercept
    ss_res = float(np.sum((ly - fit) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


@dataclass
class CorrelationCurve:
    """Radially binned scaled autocorrelation h(r).

    ``r`` holds bin midpoints (optionally in units of the particle
    radius); ``h`` the per-bin averages; ``counts`` the shift multiplicity
    per bin."""

    r: np.ndarray
    h: np.ndarray
    counts: np.ndarray
    radius_unit: float | None = None


def empirical_autocorrelation(grid: VoxelGrid, radius_unit: float | None = None,
                              ) -> CorrelationCurve:
    """Scaled autocorrelation of the phase indicator.

    Computed in Fourier space as the circular autocovariance of chi - phi,
    normalized by sigma^2 = phi(1-phi), then radially binned over periodic
    shift distances with half-voxel bins; the zero-shift value is exactly 1
    before binning.  Degenerate fields (phi in {0, 1}) are refused.
    """
    phase = grid.phase.astype(float)
    phi = float(phase.mean())
    if phi <= 0.0 or phi >= 1.0:
        raise ValueError("autocorrelation undefined for single-phase grids")
    f = phase - phi
    spec = scipy.fft.rfftn(f)
    cov = scipy.fft.irfftn(np.abs(spec) ** 2, s=phase.shape) / f.size
    h = cov / (phi * (1.0 - phi))

    n = grid.n
    spacing = grid.spacing
    wrap = np.minimum(np.arange(n), n - np.arange(n)).astype(float)
    grids = np.meshgrid(*([wrap] * grid.dim), indexing="ij")
    dist = np.sqrt(sum(g * g for g in grids)) * spacing
    width = 0.5 * spacing
    idx = np.floor(dist / width).astype(np.int64)
    nbins = int(idx.max()) + 1
    counts = np.bincount(idx.ravel(), minlength=nbins)
    sums = np.bincount(idx.ravel(), weights=h.ravel(), minlength=nbins)
    keep = counts > 0
    centers = (np.nonzero(keep)[0] + 0.5) * width
    if radius_unit is not None:
        centers = centers / radius_unit
    return CorrelationCurve(
        r=centers,
        h=sums[keep] / counts[keep],
        counts=counts[keep],
        radius_unit=radius_unit,
    )


def vf_variance_curve(sweep, phi: float):
    """Normalized volume-fraction dispersion per cell size.

    ``sweep`` is an iterable of (relative size L/L0, measured fractions);
    each entry yields sqrt(Var phi_L / (phi (1 - phi)))."""
    if not 0.0 < phi < 1.0:
        raise ValueError("phi must lie in (0, 1)")
    rows = []
    for size, values in sweep:
        v = np.asarray(values, dtype=float)
        if v.size < 2:
            raise ValueError("variance needs at least two realizations")
        rows.append({
            "size": float(size),
            "normalized_std": float(v.std(ddof=1) / math.sqrt(phi * (1.0 - phi))),
            "n": int(v.size),
        })
    return rows


# ---------------------------------------------------------------------------
# CSV schemas shared with the study runner and the plotting frontend

SUMMARY_COLUMNS = [
    "protocol", "K", "N", "mean", "std", "ci99",
    "rel_sys", "rel_rand", "p_1pct", "p_0.1pct",
]


def realization_columns(dim: int) -> list[str]:
    cols = ["protocol", "K", "seed", "n", "phi_measured", "a11", "a22"]
    if dim == 3:
        cols.append("a33")
    return cols + ["iters", "residual"]


def write_realizations_csv(path, rows, dim: int) -> None:
    cols = realization_columns(dim)
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row[c] for c in cols})


def read_realizations_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = dict(raw)
            for key in ("K", "n", "iters"):
                if key in row and row[key] != "":
                    row[key] = int(row[key])
            for key in ("phi_measured", "a11", "a22", "a33", "residual"):
                if key in row and row[key] not in ("", None):
                    row[key] = float(row[key])
            row["seed"] = int(row["seed"])
            rows.append(row)
        return rows


def write_summary_csv(path, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in SUMMARY_COLUMNS})


def write_curve_csv(path, rows, columns) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row[c] for c in columns})
