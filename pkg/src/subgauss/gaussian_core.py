"""Covariance specs, spectral splitting, and reproducible multivariate Gaussian sampling.

Sampling uses the spectral factor Q * sqrt(Lambda) so that singular covariances
(rank-one all-ones, split residuals) are handled uniformly where Cholesky would
fail.  Draws are generated in fixed-size chunks, each from its own counter-based
substream, so results are bit-identical for any worker count.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import SingularCovariance, ValidationError

# Numerical contract constants.
SYMMETRY_TOL = 1e-10     # max abs asymmetry accepted at construction
DECOMP_TOL = 1e-8        # max abs residual of the cached eigendecomposition
PSD_TOL = 1e-10          # eigenvalues below -PSD_TOL are rejected, above are clamped to 0
SINGULARITY_REL = 1e-12  # lambda_min <= SINGULARITY_REL * lambda_max counts as singular

CHUNK_SIZE = 4096        # fixed chunk size: determinism must not depend on thread count

_LANE_DIRECT = 0
_LANE_SPLIT_Z = 1
_LANE_SPLIT_G = 2


def _key_part(part) -> int:
    if isinstance(part, str):
        return int.from_bytes(hashlib.sha256(part.encode()).digest()[:8], "big")
    return int(part) % (2**64)


def substream(seed, *key) -> np.random.Generator:
    """Independent generator derived from a master seed and a key tuple.

    String key parts are hashed so callers can label logical streams; the
    derivation is stable across platforms and runs.
    """
    entropy = [_key_part(seed)] + [_key_part(k) for k in key]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def subseed(seed, *key) -> int:
    """Derived 64-bit integer seed, for APIs that take a plain seed."""
    entropy = [_key_part(seed)] + [_key_part(k) for k in key]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CovarianceSpec:
    """Symmetric PSD matrix with its cached eigendecomposition.

    eigenvalues are stored nonincreasing; eigenvectors columns match them.
    """

    dim: int
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    constructor_tag: str = "explicit"

    @classmethod
    def from_matrix(cls, matrix, tag: str = "explicit") -> "CovarianceSpec":
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"covariance must be square, got shape {m.shape}")
        asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
        if asym > SYMMETRY_TOL:
            raise ValidationError(f"matrix asymmetry {asym:.3e} exceeds {SYMMETRY_TOL:.0e}")
        sym = (m + m.T) / 2.0
        w, q = np.linalg.eigh(sym)
        w, q = w[::-1].copy(), q[:, ::-1].copy()
        return cls._build(sym, w, q, tag)

    @classmethod
    def from_factors(cls, eigenvectors, eigenvalues, tag: str = "explicit",
                     matrix=None) -> "CovarianceSpec":
        """Construct from a known decomposition, skipping the eigensolver."""
        q = np.array(eigenvectors, dtype=float)
        w = np.array(eigenvalues, dtype=float)
        ortho = float(np.max(np.abs(q.T @ q - np.eye(q.shape[1]))))
        if ortho > SYMMETRY_TOL:
            raise ValidationError(f"eigenvector orthogonality defect {ortho:.3e}")
        order = np.argsort(w)[::-1]
        w, q = w[order], q[:, order]
        if matrix is None:
            m = (q * w) @ q.T
            matrix = (m + m.T) / 2.0
        return cls._build(np.asarray(matrix, dtype=float), w, q, tag)

    @classmethod
    def _build(cls, sym, w, q, tag) -> "CovarianceSpec":
        if w.size and w[-1] < -PSD_TOL:
            raise ValidationError(
                f"matrix is not PSD: smallest eigenvalue {w[-1]:.3e} < -{PSD_TOL:.0e}")
        w = np.clip(w, 0.0, None)
        resid = float(np.max(np.abs(sym - (q * w) @ q.T)))
        if resid > DECOMP_TOL:
            raise ValidationError(f"decomposition residual {resid:.3e} exceeds {DECOMP_TOL:.0e}")
        return cls(dim=sym.shape[0], matrix=_frozen(sym), eigenvalues=_frozen(w),
                   eigenvectors=_frozen(q), constructor_tag=tag)

    # Common constructors ---------------------------------------------------

    @classmethod
    def identity(cls, n: int) -> "CovarianceSpec":
        return cls.from_factors(np.eye(n), np.ones(n), tag="identity", matrix=np.eye(n))

    @classmethod
    def scaled_identity(cls, n: int, c: float) -> "CovarianceSpec":
        if c < 0:
            raise ValidationError(f"scale must be nonnegative, got {c}")
        return cls.from_factors(np.eye(n), np.full(n, float(c)),
                                tag="scaled-identity", matrix=float(c) * np.eye(n))

    @classmethod
    def diagonal(cls, values) -> "CovarianceSpec":
        v = np.asarray(values, dtype=float)
        order = np.argsort(v)[::-1]
        return cls.from_factors(np.eye(len(v))[:, order], v[order],
                                tag="diagonal", matrix=np.diag(v))

    @classmethod
    def rank_one_ones(cls, n: int) -> "CovarianceSpec":
        return cls.from_matrix(np.ones((n, n)), tag="rank-one-ones")

    @classmethod
    def wishart_of(cls, w_matrix) -> "CovarianceSpec":
        w_matrix = np.asarray(w_matrix, dtype=float)
        return cls.from_matrix(w_matrix @ w_matrix.T, tag="wishart-of")

    # Spectral quantities ----------------------------------------------------

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def is_singular(self) -> bool:
        return self.lambda_min <= SINGULARITY_REL * self.lambda_max

    @cached_property
    def sampling_factor(self) -> np.ndarray:
        # Eigenvalues at or below the singularity threshold count as exact
        # zeros, so singular covariances produce exactly degenerate samples.
        w = self.eigenvalues.copy()
        w[w <= SINGULARITY_REL * self.lambda_max] = 0.0
        return _frozen(self.eigenvectors * np.sqrt(w))


@dataclass(frozen=True)
class CovarianceSplit:
    """Decomposition Sigma = a*I + residual with a = lambda_min(Sigma)."""

    a: float
    residual: CovarianceSpec


@dataclass(frozen=True)
class SampleBatch:
    """Seeded, reproducible block of i.i.d. vector draws."""

    dim: int
    count: int
    data: np.ndarray
    seed: int
    stream_id: int
    label: str = "direct"

    def with_data(self, data: np.ndarray, label: str) -> "SampleBatch":
        """Derived batch (e.g. after a coordinate-wise map), keeping provenance."""
        data = np.asarray(data, dtype=float)
        return SampleBatch(dim=data.shape[1], count=data.shape[0], data=_frozen(data),
                           seed=self.seed, stream_id=self.stream_id, label=label)


def condition_number(cov: CovarianceSpec) -> float:
    """Ratio of the extreme eigenvalues, lambda_max / lambda_min."""
    if cov.is_singular:
        raise SingularCovariance(
            f"lambda_min={cov.lambda_min:.3e} at or below threshold "
            f"{SINGULARITY_REL:.0e} * lambda_max={cov.lambda_max:.3e}")
    return cov.lambda_max / cov.lambda_min


def split_covariance(cov: CovarianceSpec) -> CovarianceSplit:
    """Split Sigma into a*I + Sigma_G with a = lambda_min.

    Requires a nonsingular input: a = 0 would make the smoothing step's
    Lipschitz constant infinite downstream.
    """
    if cov.is_singular:
        raise SingularCovariance("cannot split a singular covariance (a would be 0)")
    a = cov.lambda_min
    residual = CovarianceSpec.from_factors(
        cov.eigenvectors, np.clip(cov.eigenvalues - a, 0.0, None),
        tag="explicit", matrix=cov.matrix - a * np.eye(cov.dim))
    recon = float(np.max(np.abs(a * np.eye(cov.dim) + residual.matrix - cov.matrix)))
    if recon > PSD_TOL:
        raise ValidationError(f"split reconstruction residual {recon:.3e}")
    return CovarianceSplit(a=a, residual=residual)


def _fill_chunks(out: np.ndarray, seed, stream_id, lane, factor, threads: int) -> None:
    count, n = out.shape
    starts = range(0, count, CHUNK_SIZE)

    def work(chunk_index_lo):
        chunk_index, lo = chunk_index_lo
        hi = min(lo + CHUNK_SIZE, count)
        rng = substream(seed, stream_id, lane, chunk_index)
        z = rng.standard_normal((hi - lo, n))
        out[lo:hi] = z if factor is None else z @ factor.T

    jobs = list(enumerate(starts))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, jobs))
    else:
        for job in jobs:
            work(job)


def sample_gaussian(cov: CovarianceSpec, count: int, seed: int, stream_id: int,
                    *, threads: int = 1) -> SampleBatch:
    """Draw count i.i.d. N(0, Sigma) rows via the spectral factor.

    Deterministic per (seed, stream_id) and independent of `threads`.
    Singular covariances are allowed.
    """
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    data = np.empty((count, cov.dim))
    _fill_chunks(data, seed, stream_id, _LANE_DIRECT, cov.sampling_factor, threads)
    return SampleBatch(dim=cov.dim, count=count, data=_frozen(data),
                       seed=int(seed), stream_id=int(stream_id), label="direct")


def sample_split_gaussian(split: CovarianceSplit, count: int, seed: int, stream_id: int,
                          *, threads: int = 1) -> tuple[SampleBatch, SampleBatch]:
    """Draw the isotropic part Z ~ N(0, I) and residual part G ~ N(0, Sigma_G).

    Z and G come from independent substreams; sqrt(a)*Z + G has the law of the
    original covariance.
    """
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    n = split.residual.dim
    z = np.empty((count, n))
    _fill_chunks(z, seed, stream_id, _LANE_SPLIT_Z, None, threads)
    g = np.empty((count, n))
    _fill_chunks(g, seed, stream_id, _LANE_SPLIT_G, split.residual.sampling_factor, threads)
    z_batch = SampleBatch(dim=n, count=count, data=_frozen(z),
                          seed=int(seed), stream_id=int(stream_id), label="split-z")
    g_batch = SampleBatch(dim=n, count=count, data=_frozen(g),
                          seed=int(seed), stream_id=int(stream_id), label="split-g")
    return z_batch, g_batch
