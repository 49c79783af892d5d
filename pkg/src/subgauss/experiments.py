"""The four reproducible studies.

* theorem: fitted MGF variance proxies of phi(X) for conditioned covariances,
  checked against the 4 + (2/pi)(kappa - 1) <= 4 kappa envelope, plus
  dimension-independence of the norm estimates.
* corollary: sign-quantized square Gaussian maps, row-partitioned into two
  well-conditioned rectangular blocks combined by the triangle inequality.
* wishart: conditioning of the half-height block, median and tail statistics.
* counterexample: rank-one all-ones covariance, where the norm grows like
  sqrt(n) and well-conditioning is seen to be necessary.

Every row's pass flag follows one convention: pass iff value <= bound when a
bound is present, else the row is informational (pass is vacuously true).
Interval criteria are therefore encoded as deviation rows (value = distance
from the window center, bound = half-width).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import product
from typing import Optional

import numpy as np

from . import __version__
from .errors import DimensionTooSmall, DomainError, ValidationError
from .gaussian_core import (
    CovarianceSpec,
    condition_number,
    sample_gaussian,
    subseed,
    substream,
)
from .nonlinearity import get_map
from .psi2_estimation import (
    RESAMPLES,
    SCAN_BINS,
    _orlicz_estimate,
    direction_set,
    mgf_sigma,
    psi2_vector,
)

LAMBDA_GRID = (0.25, 0.5, 1.0)   # MGF check grid, symmetrized internally
FLATNESS_BOUND = 1.3             # max/min ratio separating O(1) from sqrt(n) growth
KAPPA_WINDOW = (20.0, 50.0)      # asymptotic-regime window for median kappa of a half block
EXCEEDANCE_THRESHOLD = 100.0     # reporting proxy for the ill-conditioned event
EXCEEDANCE_RATE_BOUND = 0.01
SLOPE_WINDOW_HALFWIDTH = 0.05    # accepted deviation of the log-log slope from 1/2

_TAG_SCANDIRS = 201
_TAG_SCANBOOT = 202
_TAG_SCANMGF = 203


# Report structures ----------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    experiment: str
    n: Optional[int]
    kappa: Optional[float]
    estimator: str
    value: float
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    bound: Optional[float] = None

    @property
    def passed(self) -> bool:
        if self.bound is None:
            return True
        return self.value <= self.bound

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment, "n": self.n, "kappa": self.kappa,
            "estimator": self.estimator, "value": self.value,
            "ci_low": self.ci_low, "ci_high": self.ci_high,
            "bound": self.bound, "pass": self.passed,
        }


@dataclass(frozen=True)
class ExperimentReport:
    experiment: str
    rows: tuple
    metadata: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def select(self, prefix: str) -> list:
        return [r for r in self.rows if r.estimator.startswith(prefix)]


def report_metadata(experiment: str, seed: int, config_echo: dict) -> dict:
    digest = hashlib.sha256(json.dumps(
        {"experiment": experiment, "seed": seed, "config": config_echo,
         "version": __version__}, sort_keys=True).encode()).hexdigest()
    return {
        "experiment": experiment,
        "seed": seed,
        "config": config_echo,
        "package_version": __version__,
        "artifact_version": digest[:12],
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "kappa_exceedance_threshold_note": (
            f"exceedance threshold kappa > {EXCEEDANCE_THRESHOLD:g} is a reporting "
            "choice for the ill-conditioned tail, not a derived constant"),
    }


def merge_reports(reports: list) -> ExperimentReport:
    rows = tuple(r for rep in reports for r in rep.rows)
    meta = dict(reports[0].metadata)
    meta["config"] = [rep.metadata.get("config") for rep in reports]
    return ExperimentReport(experiment=reports[0].experiment, rows=rows, metadata=meta)


# Configs ---------------------------------------------------------------------

@dataclass(frozen=True)
class TheoremConfig:
    dims: tuple
    kappas: tuple
    map_name: str = "sgn"
    samples_per_cell: int = 100_000
    directions: int = 64
    seed: int = 42

    def __post_init__(self):
        if any(n < 2 for n in self.dims):
            raise ValidationError(f"dims must be >= 2, got {self.dims}")
        if any(k < 1 for k in self.kappas):
            raise ValidationError(f"kappas must be >= 1, got {self.kappas}")
        if self.samples_per_cell < 10_000:
            raise ValidationError(
                f"samples_per_cell must be >= 1e4, got {self.samples_per_cell}")
        get_map(self.map_name)  # fail fast on unknown names


@dataclass(frozen=True)
class CorollaryConfig:
    dims: tuple
    w_draws: int = 50
    samples_per_w: int = 100_000
    directions: int = 32
    seed: int = 42

    def __post_init__(self):
        if any(n < 2 for n in self.dims):
            raise ValidationError(f"dims must be >= 2, got {self.dims}")
        if self.w_draws < 20:
            raise ValidationError(f"w_draws must be >= 20, got {self.w_draws}")
        if self.samples_per_w < 10_000:
            raise ValidationError(
                f"samples_per_w must be >= 1e4, got {self.samples_per_w}")


# Bounds and fixtures ---------------------------------------------------------

def sigma_sq_bound(kappa: float) -> float:
    """Variance proxy 4 + (2/pi)(kappa - 1); always at most 4*kappa."""
    if kappa < 1.0:
        raise DomainError(f"kappa must be >= 1, got {kappa}")
    value = 4.0 + (2.0 / math.pi) * (kappa - 1.0)
    assert value <= 4.0 * kappa
    return value


def make_conditioned_covariance(n: int, kappa: float, seed: int) -> CovarianceSpec:
    """Random-orthogonal covariance with eigenvalues log-spaced on [1, kappa]."""
    if n < 2:
        raise ValidationError(f"dimension must be >= 2, got {n}")
    if kappa < 1.0:
        raise DomainError(f"kappa must be >= 1, got {kappa}")
    if kappa == 1.0:
        return CovarianceSpec.identity(n)
    rng = substream(seed, "conditioned-cov")
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))[None, :]  # fix the sign convention for determinism
    eigvals = np.geomspace(kappa, 1.0, n)
    return CovarianceSpec.from_factors(q, eigvals, tag="explicit")


def partition_rows(w_matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split an n x n matrix into its first floor(n/2) rows and the remainder."""
    w_matrix = np.asarray(w_matrix)
    n = w_matrix.shape[0]
    if n < 2:
        raise DimensionTooSmall(f"need at least 2 rows to partition, got {n}")
    m = n // 2
    return w_matrix[:m], w_matrix[m:]


# Direction scans --------------------------------------------------------------

@dataclass(frozen=True)
class ScanResult:
    value: float
    ci_low: float
    ci_high: float
    direction: np.ndarray
    n_directions: int
    mgf_sigma_max: Optional[float] = None


def _scan(y: np.ndarray, n_random: int, seed: int, stream_id: int, *,
          lambda_grid=None, bins: int = SCAN_BINS, resamples: int = RESAMPLES) -> ScanResult:
    """Max Orlicz estimate (and optionally max fitted MGF sigma) over the
    canonical + all-ones + random direction set."""
    n = y.shape[1]
    dirs = direction_set(n, n_random, substream(seed, stream_id, _TAG_SCANDIRS))
    proj = y @ dirs.T
    best = (-1.0, 0.0, 0.0, 0)
    sigma_max = None
    for d in range(dirs.shape[0]):
        rng = substream(seed, stream_id, _TAG_SCANBOOT, d)
        value, lo, hi = _orlicz_estimate(proj[:, d], rng, bins, resamples)
        if value > best[0]:
            best = (value, lo, hi, d)
        if lambda_grid is not None:
            fit = mgf_sigma(proj[:, d], lambda_grid,
                            seed=subseed(seed, stream_id, _TAG_SCANMGF, d), bins=bins)
            sigma_max = fit.sigma if sigma_max is None else max(sigma_max, fit.sigma)
    return ScanResult(value=best[0], ci_low=best[1], ci_high=best[2],
                      direction=dirs[best[3]].copy(), n_directions=dirs.shape[0],
                      mgf_sigma_max=sigma_max)


def _ratio(values) -> float:
    values = [v for v in values if v > 0]
    return max(values) / min(values) if values else 1.0


# Experiment runners ------------------------------------------------------------

def run_theorem_experiment(cfg: TheoremConfig, *, threads: int = 1) -> ExperimentReport:
    """Per (n, kappa) cell: sample X ~ N(0, Sigma), form Y = phi(X), center by
    the mean of an independent half, and scan the direction set for the max
    Orlicz estimate and the max fitted MGF sigma.

    The pass gate on each cell is the MGF-form constant: fitted sigma at most
    2 sqrt(kappa).  Orlicz estimates are reported as informational rows.
    """
    bmap = get_map(cfg.map_name)
    eff_seed = subseed(cfg.seed, "theorem", cfg.map_name)
    rows = []
    orlicz_by_kappa = {k: {} for k in cfg.kappas}
    sigma_by_kappa = {k: {} for k in cfg.kappas}
    for cell, (n, kappa) in enumerate(product(cfg.dims, cfg.kappas)):
        cov = make_conditioned_covariance(n, kappa, subseed(eff_seed, "cov", cell))
        batch = sample_gaussian(cov, cfg.samples_per_cell, eff_seed, cell, threads=threads)
        y = np.asarray(bmap(batch.data))
        half = cfg.samples_per_cell // 2
        centered = y[half:] - y[:half].mean(axis=0)  # independent-half centering
        scan = _scan(centered, cfg.directions, eff_seed, cell, lambda_grid=LAMBDA_GRID)
        rows.append(ReportRow("theorem", n, kappa, f"mgf_fit:{cfg.map_name}",
                              scan.mgf_sigma_max, bound=2.0 * math.sqrt(kappa)))
        rows.append(ReportRow("theorem", n, kappa, f"orlicz:{cfg.map_name}",
                              scan.value, scan.ci_low, scan.ci_high))
        orlicz_by_kappa[kappa][n] = scan.value
        sigma_by_kappa[kappa][n] = scan.mgf_sigma_max
    for kappa in cfg.kappas:
        rows.append(ReportRow("theorem", None, kappa, f"dim_flatness:{cfg.map_name}",
                              _ratio(orlicz_by_kappa[kappa].values()), bound=FLATNESS_BOUND))
        rows.append(ReportRow("theorem", None, kappa, f"sigma_flatness:{cfg.map_name}",
                              _ratio(sigma_by_kappa[kappa].values())))
    echo = {"dims": list(cfg.dims), "kappas": list(cfg.kappas), "map_name": cfg.map_name,
            "samples_per_cell": cfg.samples_per_cell, "directions": cfg.directions}
    return ExperimentReport("theorem", tuple(rows),
                            report_metadata("theorem", cfg.seed, echo))


def run_corollary_experiment(cfg: CorollaryConfig, *, threads: int = 1) -> ExperimentReport:
    """Sign-quantized square maps: for each W draw, partition rows, estimate the
    conditional norms of both blocks (x resampled, W fixed), combine them by the
    triangle inequality, and compare against the direct full-vector estimate.

    The blocks need no centering: W x is symmetric about the origin, which is
    asserted empirically (coordinate means within 3 standard errors of 0).
    """
    rows = []
    combined_means = {}
    for n in cfg.dims:
        m1 = n // 2
        eff_seed = subseed(cfg.seed, "corollary", n)
        combined_values = []
        for w_idx in range(cfg.w_draws):
            w_matrix = substream(cfg.seed, "corollary-W", n, w_idx).standard_normal((n, n))
            w1, w2 = partition_rows(w_matrix)
            kappa1 = condition_number(CovarianceSpec.wishart_of(w1))
            kappa2 = condition_number(CovarianceSpec.wishart_of(w2))
            x = sample_gaussian(CovarianceSpec.identity(n), cfg.samples_per_w,
                                eff_seed, w_idx, threads=threads)
            y = np.sign(x.data @ w_matrix.T)
            tag = f"w{w_idx:02d}"

            # Symmetry of W x about the origin: coordinate means should sit
            # within 3 standard errors of 0.  Checked as an exceedance
            # fraction (expected 0.27%), since the max over n coordinates
            # exceeds 3 SE routinely by multiplicity alone.
            z_scores = np.abs(y.mean(axis=0)) * math.sqrt(cfg.samples_per_w)
            rows.append(ReportRow("corollary", n, None, f"symmetry_exceed:{tag}",
                                  float(np.mean(z_scores > 3.0)), bound=0.05))

            blocks = []
            for b, (y_block, kappa_b) in enumerate(
                    ((y[:, :m1], kappa1), (y[:, m1:], kappa2)), start=1):
                mb = y_block.shape[1]
                scan = _scan(y_block, cfg.directions, eff_seed,
                             subseed(eff_seed, "block", w_idx, b) % (2**32),
                             lambda_grid=LAMBDA_GRID)
                trivial = math.sqrt(mb / math.log(2.0))
                rows.append(ReportRow("corollary", n, kappa_b, f"orlicz:{tag}:block{b}",
                                      scan.value, scan.ci_low, scan.ci_high, bound=trivial))
                rows.append(ReportRow("corollary", n, kappa_b, f"mgf_fit:{tag}:block{b}",
                                      scan.mgf_sigma_max, bound=2.0 * math.sqrt(kappa_b)))
                blocks.append(scan)

            combined = blocks[0].value + blocks[1].value
            combined_values.append(combined)
            rows.append(ReportRow("corollary", n, None, f"combined:{tag}", combined))

            full = _scan(y, cfg.directions, eff_seed,
                         subseed(eff_seed, "full", w_idx) % (2**32))
            rows.append(ReportRow("corollary", n, None, f"orlicz:{tag}:full",
                                  full.value, full.ci_low, full.ci_high))
            rows.append(ReportRow("corollary", n, None, f"triangle_gap:{tag}",
                                  full.ci_low - (blocks[0].ci_high + blocks[1].ci_high),
                                  bound=0.0))
        combined_means[n] = float(np.mean(combined_values))
        rows.append(ReportRow("corollary", n, None, "combined_mean", combined_means[n]))
    rows.append(ReportRow("corollary", None, None, "combined_flatness",
                          _ratio(combined_means.values()), bound=FLATNESS_BOUND))
    echo = {"dims": list(cfg.dims), "w_draws": cfg.w_draws,
            "samples_per_w": cfg.samples_per_w, "directions": cfg.directions}
    return ExperimentReport("corollary", tuple(rows),
                            report_metadata("corollary", cfg.seed, echo))


def run_wishart_conditioning(n_list, trials: int, seed: int, *,
                             threshold: float = EXCEEDANCE_THRESHOLD,
                             rate_bound: float = EXCEEDANCE_RATE_BOUND) -> ExperimentReport:
    """Distribution of kappa(W1 W1^T) for the half-height block of a square
    Gaussian matrix: median, 5th/95th percentiles, and the exceedance rate of
    a configurable threshold as the proxy for the ill-conditioned event."""
    if trials < 100:
        raise ValidationError(f"trials must be >= 100, got {trials}")
    n_list = [int(n) for n in n_list]
    rows = []
    center = 0.5 * (KAPPA_WINDOW[0] + KAPPA_WINDOW[1])
    halfwidth = 0.5 * (KAPPA_WINDOW[1] - KAPPA_WINDOW[0])
    for n in n_list:
        kappas = np.empty(trials)
        for t in range(trials):
            w_matrix = substream(seed, "wishart", n, t).standard_normal((n, n))
            w1, _ = partition_rows(w_matrix)
            kappas[t] = condition_number(CovarianceSpec.wishart_of(w1))
        median = float(np.median(kappas))
        rows.append(ReportRow("wishart", n, None, "kappa_median", median))
        rows.append(ReportRow("wishart", n, None, "kappa_p05",
                              float(np.percentile(kappas, 5))))
        rows.append(ReportRow("wishart", n, None, "kappa_p95",
                              float(np.percentile(kappas, 95))))
        if n // 2 >= 32:  # the window check targets the asymptotic regime
            rows.append(ReportRow("wishart", n, None, "kappa_median_dev",
                                  abs(median - center), bound=halfwidth))
        rows.append(ReportRow("wishart", n, None, "kappa_exceed_rate",
                              float(np.mean(kappas > threshold)), bound=rate_bound))
    echo = {"dims": n_list, "trials": trials, "threshold": threshold}
    return ExperimentReport("wishart", tuple(rows),
                            report_metadata("wishart", seed, echo))


def run_counterexample(n_list, samples: int, seed: int, *,
                       threads: int = 1) -> ExperimentReport:
    """Rank-one all-ones covariance: the norm of sgn(X) grows like sqrt(n).

    Estimates include the all-ones direction (where the projection is exactly
    +-sqrt(n)) and the report carries the fitted log-log slope.
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3:
        raise ValidationError(f"need at least 3 dimensions, got {n_list}")
    if max(n_list) < 8 * min(n_list):
        raise ValidationError(
            f"dimensions must span at least a factor of 8, got {n_list}")
    rows = []
    values = []
    for i, n in enumerate(n_list):
        cov = CovarianceSpec.rank_one_ones(n)
        batch = sample_gaussian(cov, samples, subseed(seed, "counterexample"), i,
                                threads=threads)
        y_batch = batch.with_data(np.sign(batch.data), "sgn")
        est = psi2_vector(y_batch, n, refine=False, center=False)
        exact = math.sqrt(n / math.log(2.0))
        rows.append(ReportRow("counterexample", n, None, "orlicz",
                              est.value, est.ci_low, est.ci_high))
        rows.append(ReportRow("counterexample", n, None, "value_dev",
                              abs(est.value - exact) / exact, bound=0.05))
        values.append(est.value)
    slope = float(np.polyfit(np.log(n_list), np.log(values), 1)[0])
    rows.append(ReportRow("counterexample", None, None, "loglog_slope", slope))
    rows.append(ReportRow("counterexample", None, None, "slope_dev",
                          abs(slope - 0.5), bound=SLOPE_WINDOW_HALFWIDTH))
    echo = {"dims": n_list, "samples": samples}
    return ExperimentReport("counterexample", tuple(rows),
                            report_metadata("counterexample", seed, echo))
