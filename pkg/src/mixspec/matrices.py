"""Gram-matrix ensembles and the block/truncation approximations.

``build_Bn``
    one trajectory of length N*n cut into n columns of length N.
``build_An``
    n independent trajectories of length N as columns.
``build_Gn``
    n independent Gaussian columns with the process's Toeplitz covariance.
``build_blocked_matrix`` / ``resample_independent_blocks``
    entries kept only on active blocks of length p separated by gaps of
    3m, replaced by truncated conditional expectations given the block's
    innovations; the resampled version draws every block's innovations
    independently from the stationary block law.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cholesky, toeplitz

from . import processes
from .errors import (
    CovarianceError,
    DomainError,
    InsufficientDataError,
    ParameterError,
    SchemeError,
    ShapeError,
    UnsupportedModelError,
)
from .processes import AutocovarianceSeq, ProcessSpec, Trajectory
from .spectral import empirical_stieltjes, eig_sym


@dataclass(frozen=True)
class EnsembleConfig:
    N: int
    n: int

    def __post_init__(self):
        if int(self.N) != self.N or int(self.n) != self.n:
            raise ParameterError("N and n must be integers")
        if self.N < 2 or self.n < 2:
            raise ParameterError("need N >= 2 and n >= 2")

    @property
    def c(self) -> float:
        return self.N / self.n


@dataclass(frozen=True, eq=False)
class DataMatrix:
    entries: np.ndarray
    kind: str
    provenance: dict = field(default_factory=dict)

    def gram(self) -> np.ndarray:
        return gram_from_columns(self.entries)


def gram_from_columns(x) -> np.ndarray:
    """(1/n) X X^T for an N x n matrix, symmetrised exactly."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("data matrix must be two-dimensional")
    g = x @ x.T / x.shape[1]
    return 0.5 * (g + g.T)


def column_major(values, cfg: EnsembleConfig) -> np.ndarray:
    """Entry (i, j) = X_{(j-1)N + i} (1-based), i.e. columns are consecutive stretches."""
    v = np.asarray(values, dtype=np.float64)
    need = cfg.N * cfg.n
    if v.shape[0] < need:
        raise InsufficientDataError(f"need {need} values for a {cfg.N}x{cfg.n} matrix, got {v.shape[0]}")
    return v[:need].reshape(cfg.n, cfg.N).T


def build_Bn(traj, cfg: EnsembleConfig):
    """Data matrix and Gram matrix B_n = (1/n) X X^T from a single trajectory."""
    values = traj.values if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.float64)
    x = column_major(values, cfg)
    prov = {}
    if isinstance(traj, Trajectory):
        prov = {"spec": traj.spec.to_dict(), "seed": traj.seed}
    dm = DataMatrix(x, "Bn_source", prov)
    return dm, gram_from_columns(x)


def derive_seeds(seed: int, count: int, *tags: int) -> list[int]:
    """``count`` independent 64-bit seeds derived from ``seed`` and integer tags."""
    ss = np.random.SeedSequence([int(seed), *[int(t) for t in tags]])
    return [int(s) for s in ss.generate_state(count, dtype=np.uint64)]


def build_An(spec: ProcessSpec, cfg: EnsembleConfig, seed: int) -> np.ndarray:
    """A_n = (1/n) sum_k X_k X_k^T over n independent length-N trajectories."""
    seeds = derive_seeds(seed, cfg.n, 1)
    cols = np.column_stack([processes.sample_trajectory(spec, cfg.N, s).values for s in seeds])
    return gram_from_columns(cols)


def toeplitz_cholesky(gamma: AutocovarianceSeq, N: int) -> np.ndarray:
    """Lower Cholesky factor of (gamma_|i-j|), with one jitter retry."""
    gam = gamma.padded(N)
    cov = toeplitz(gam)
    try:
        return cholesky(cov, lower=True)
    except np.linalg.LinAlgError:
        pass
    delta = 1e-12 * abs(gam[0])
    try:
        return cholesky(cov + delta * np.eye(N), lower=True)
    except np.linalg.LinAlgError as exc:
        raise CovarianceError("Toeplitz covariance is not positive semi-definite") from exc


def gaussian_columns(gamma: AutocovarianceSeq, cfg: EnsembleConfig, seed: int) -> np.ndarray:
    L = toeplitz_cholesky(gamma, cfg.N)
    rng = np.random.default_rng(processes._check_seed(seed))
    return L @ rng.standard_normal((cfg.N, cfg.n))


def build_Gn(gamma: AutocovarianceSeq, cfg: EnsembleConfig, seed: int) -> np.ndarray:
    """G_n = (1/n) sum Z_i Z_i^T with Z_i ~ N(0, Gamma_N) independent."""
    return gram_from_columns(gaussian_columns(gamma, cfg, seed))


@dataclass(frozen=True)
class BlockScheme:
    """Active blocks I_l of length p and gaps J_l of length 3m inside each column.

    Indices are 1-based, as positions k in 1..N*n of the underlying sequence.
    """

    N: int
    m: int
    a_m: int
    M: float | None = None

    @property
    def p(self) -> int:
        return self.a_m * self.m

    @property
    def period(self) -> int:
        return self.p + 3 * self.m

    @property
    def k_N(self) -> int:
        return self.N // self.period

    def block_starts(self) -> np.ndarray:
        """1-based row of the first entry of each active block within a column."""
        return np.arange(self.k_N) * self.period + 1

    def active_rows(self) -> np.ndarray:
        """Boolean mask over rows 1..N (as 0-based positions) of active entries."""
        mask = np.zeros(self.N, dtype=bool)
        for s in self.block_starts():
            mask[s - 1:s - 1 + self.p] = True
        return mask

    def I_set(self, i: int, ell: int) -> np.ndarray:
        if not 1 <= ell <= self.k_N + 1:
            raise DomainError("block index out of range")
        if ell == self.k_N + 1:
            return np.arange(0)
        base = (i - 1) * self.N + (ell - 1) * self.period
        return np.arange(base + 1, base + self.p + 1)

    def J_set(self, i: int, ell: int) -> np.ndarray:
        if not 1 <= ell <= self.k_N + 1:
            raise DomainError("block index out of range")
        if ell == self.k_N + 1:
            return np.arange((i - 1) * self.N + self.k_N * self.period + 1, i * self.N + 1)
        base = (i - 1) * self.N + (ell - 1) * self.period
        return np.arange(base + self.p + 1, base + self.period + 1)

    def partition(self, n: int):
        """All I sets and all J sets for n columns."""
        I_sets = [self.I_set(i, l) for i in range(1, n + 1) for l in range(1, self.k_N + 2)]
        J_sets = [self.J_set(i, l) for i in range(1, n + 1) for l in range(1, self.k_N + 2)]
        return I_sets, J_sets


def build_block_scheme(N: int, m: int, a_m: int | None = None, M: float | None = None) -> BlockScheme:
    """Block scheme with p = a_m m and k_N = floor(N / (p + 3m)); a_m defaults to m."""
    N, m = int(N), int(m)
    a_m = m if a_m is None else int(a_m)
    if m < 1 or a_m < 1:
        raise SchemeError("need m >= 1 and a_m >= 1")
    if a_m * m + 3 * m > N:
        raise SchemeError(f"block period p + 3m = {a_m * m + 3 * m} exceeds column length N = {N}")
    if M is not None and not M > 0:
        raise SchemeError("truncation level M must be positive")
    if m > math.sqrt(N) / 2:
        warnings.warn(f"m = {m} exceeds sqrt(N)/2 = {math.sqrt(N) / 2:.2f}", stacklevel=2)
    return BlockScheme(N=N, m=m, a_m=a_m, M=None if M is None else float(M))


def truncation_level(spec: ProcessSpec, scheme: BlockScheme) -> float:
    """M from the scheme, else 10 sqrt(gamma_0)."""
    if scheme.M is not None:
        return scheme.M
    return 10.0 * math.sqrt(processes.autocovariance_closed_form(spec, 0).gamma0)


def check_block_support(spec: ProcessSpec, scheme: BlockScheme, M: float) -> None:
    """Raise unless E(phi_M(X_k) | block innovations) is available in closed form."""
    if spec.is_instantaneous:
        return
    if spec.kind == "noncausal_window":
        J = spec.half_width
        if J <= scheme.m:
            return
        # For J > m the projection drops the out-of-block terms, which is the
        # conditional expectation only while phi_M does not bite.
        if M >= float(np.sum(np.abs(spec.window_coeffs))):
            return
        raise UnsupportedModelError(
            f"window J={J} > m={scheme.m} needs M >= sum|c_j| for an exact projection"
        )
    raise UnsupportedModelError(f"no closed-form block projection for {spec.kind}")


def centering_constant(spec: ProcessSpec, scheme: BlockScheme, M: float) -> float:
    """E of the truncated block projection.

    Every supported model has a law symmetric about 0 and an odd projection,
    so the constant is exactly 0.
    """
    check_block_support(spec, scheme, M)
    return 0.0


def project_blocks(spec: ProcessSpec, windows: np.ndarray, scheme: BlockScheme, M: float) -> np.ndarray:
    """Centred, truncated block projections h_k(B) for each row of ``windows``.

    A window row holds eps over the block's p entries plus m on each side;
    the result has one row of p values per window.
    """
    m, p = scheme.m, scheme.p
    if windows.shape[1] != p + 2 * m:
        raise ShapeError("block windows must have p + 2m innovations")
    e = processes.observe(spec, windows)
    if spec.kind == "noncausal_window":
        J = spec.half_width
        coeffs = np.asarray(spec.window_coeffs)
        vals = np.zeros((windows.shape[0], p))
        for idx, cj in enumerate(coeffs):
            j = idx - J
            lo, hi = max(0, -j - m), min(p, p + m - j)  # keep m + t + j inside the window
            if lo < hi:
                vals[:, lo:hi] += cj * e[:, m + lo + j:m + hi + j]
    else:
        vals = e[:, m:m + p]
    return np.clip(vals, -M, M) - centering_constant(spec, scheme, M)


def _trajectory_windows(traj: Trajectory, scheme: BlockScheme, n: int) -> np.ndarray:
    """eps over [start - m, end + m] for every active block, padded with zeros."""
    m, p = scheme.m, scheme.p
    pad = max(m - traj.margin, 0)
    eps = np.concatenate([np.zeros(pad), np.asarray(traj.innovations, dtype=np.float64), np.zeros(pad)])
    offset = pad + traj.margin  # position of eps_1 in ``eps``
    starts = ((np.arange(n)[:, None] * scheme.N) + scheme.block_starts()[None, :]).ravel()
    idx = (starts[:, None] - 1 - m + offset) + np.arange(p + 2 * m)[None, :]
    return eps[idx]


def _assemble(blocks: np.ndarray, scheme: BlockScheme, cfg: EnsembleConfig) -> np.ndarray:
    """Scatter (n * k_N) x p block values into an N x n matrix, zero elsewhere."""
    x = np.zeros((cfg.n, cfg.N))
    rows = scheme.active_rows()
    x[:, rows] = blocks.reshape(cfg.n, scheme.k_N * scheme.p)
    return x.T


def _check_scheme(scheme: BlockScheme, cfg: EnsembleConfig) -> None:
    if scheme.N != cfg.N:
        raise SchemeError("block scheme was built for a different N")


def build_blocked_matrix(traj: Trajectory, scheme: BlockScheme, cfg: EnsembleConfig) -> DataMatrix:
    """Truncated block projections of a trajectory on I blocks, zeros on J blocks."""
    _check_scheme(scheme, cfg)
    spec = traj.spec
    M = truncation_level(spec, scheme)
    check_block_support(spec, scheme, M)
    if len(traj) < cfg.N * cfg.n:
        raise InsufficientDataError("trajectory shorter than N*n")
    blocks = project_blocks(spec, _trajectory_windows(traj, scheme, cfg.n), scheme, M)
    prov = {"spec": spec.to_dict(), "seed": traj.seed, "m": scheme.m, "a_m": scheme.a_m, "M": M}
    return DataMatrix(_assemble(blocks, scheme, cfg), "blocked", prov)


def sample_block_windows(spec: ProcessSpec, n_blocks: int, length: int, rng: np.random.Generator) -> np.ndarray:
    """Independent stationary innovation windows, one per row."""
    if spec.kind == "harris_chain":
        return processes.harris_block_chains(spec.a, n_blocks, length, rng)
    if spec.kind == "noncausal_window":
        return rng.uniform(-1.0, 1.0, size=(n_blocks, length))
    if spec.kind == "iid_baseline":
        return math.sqrt(spec.sigma2) * rng.standard_normal((n_blocks, length))
    raise UnsupportedModelError(f"no block sampler for {spec.kind}")


def resample_independent_blocks(spec: ProcessSpec, scheme: BlockScheme, cfg: EnsembleConfig, seed: int) -> DataMatrix:
    """Blocked matrix whose active blocks use i.i.d. draws of the block innovations.

    For the i.i.d. baseline the blocks of one trajectory are already
    independent, so the trajectory for ``seed`` is reused and the result
    coincides with ``build_blocked_matrix`` on that trajectory.
    """
    _check_scheme(scheme, cfg)
    M = truncation_level(spec, scheme)
    check_block_support(spec, scheme, M)
    seed = processes._check_seed(seed)
    if spec.kind == "iid_baseline":
        traj = processes.sample_trajectory(spec, cfg.N * cfg.n, seed)
        windows = _trajectory_windows(traj, scheme, cfg.n)
    else:
        rng = np.random.default_rng(seed)
        windows = sample_block_windows(spec, cfg.n * scheme.k_N, scheme.p + 2 * scheme.m, rng)
    blocks = project_blocks(spec, windows, scheme, M)
    prov = {"spec": spec.to_dict(), "seed": seed, "m": scheme.m, "a_m": scheme.a_m, "M": M}
    return DataMatrix(_assemble(blocks, scheme, cfg), "blocked_star", prov)


@dataclass(frozen=True)
class PerturbationCheck:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-10


def stieltjes_perturbation_bound(A, B, z) -> PerturbationCheck:
    """Both sides of |S_{AA'/n} - S_{BB'/n}| <= sqrt2/(N v^2) |Tr(AA'+BB')/n|^1/2 |Tr(A-B)(A-B)'/n|^1/2."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape or A.ndim != 2:
        raise ShapeError("A and B must be matrices of equal shape")
    z = complex(z)
    if z.imag <= 0:
        raise DomainError("need Im z > 0")
    N, n = A.shape
    ga, gb = gram_from_columns(A), gram_from_columns(B)
    sa = empirical_stieltjes(eig_sym(ga), z)
    sb = empirical_stieltjes(eig_sym(gb), z)
    diff = A - B
    rhs = (
        math.sqrt(2.0) / (N * z.imag**2)
        * math.sqrt(abs(np.trace(ga) + np.trace(gb)))
        * math.sqrt(abs(np.sum(diff * diff)) / n)
    )
    return PerturbationCheck(lhs=abs(sa - sb), rhs=rhs)


def write_matrix_csv(matrix, path, kind: str, n: int | None = None) -> None:
    """Row-major CSV preceded by a ``# N,n,kind`` comment line."""
    a = np.asarray(matrix, dtype=np.float64)
    with open(Path(path), "w", newline="") as fh:
        fh.write(f"# N,n,kind\n# {a.shape[0]},{a.shape[1] if n is None else n},{kind}\n")
        writer = csv.writer(fh)
        for row in a:
            writer.writerow([repr(float(v)) for v in row])
