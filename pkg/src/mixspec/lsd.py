"""Limiting spectral distribution from the autocovariance of the process.

The Stieltjes transform S of the limit law solves, through its companion
``S_ = -(1-c)/z + c S``,

    z = -1/S_ + (c/2pi) int_0^{2pi} w(l) / (1 + w(l) S_) dl,   w = 2 pi f,

where f is the spectral density.  The integrand is written with ``w`` in the
numerator so that zeros of f cause no division by zero.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    DomainError,
    ParameterError,
    SolverError,
    TruncationOrderError,
    UnsupportedModelError,
)
from .processes import AutocovarianceSeq

log = logging.getLogger(__name__)

DEFAULT_Q = 2048
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10_000
DEFAULT_V = 1e-3
NEGATIVITY_TOL = 1e-8


class SpectralDensityFn:
    """f(l) = (1/2pi)(gamma_0 + 2 sum_{k>=1} gamma_k cos(k l)) on [0, 2pi)."""

    def __init__(self, gamma: AutocovarianceSeq, check_nodes: int = 4096):
        self.gamma = gamma
        g = np.asarray(gamma.gamma, dtype=np.float64)
        if g.ndim != 1 or g.size == 0:
            raise ParameterError("autocovariance sequence is empty")
        if g[0] < 0:
            raise ParameterError("gamma_0 must be non-negative")
        self._g = g
        self.gamma0 = float(g[0])
        raw = self._grid_raw(max(check_nodes, 2 * g.size))
        if raw.min() < -NEGATIVITY_TOL * self.gamma0:
            raise TruncationOrderError(
                f"cosine series reaches {raw.min():.3e} < -{NEGATIVITY_TOL:g} gamma_0; "
                "increase the truncation order K"
            )

    @property
    def K(self) -> int:
        return self._g.size - 1

    def _clip(self, vals):
        return np.where(vals < 0, 0.0, vals)

    def raw(self, lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
        out = np.full(lam.shape, self._g[0])
        k = np.arange(1, self._g.size, dtype=np.float64)
        for start in range(0, lam.size, 256):
            chunk = lam.ravel()[start:start + 256]
            out.ravel()[start:start + 256] += 2.0 * np.cos(np.outer(chunk, k)) @ self._g[1:]
        return out / (2.0 * math.pi)

    def __call__(self, lam):
        scalar = np.ndim(lam) == 0
        vals = self._clip(self.raw(lam))
        return float(vals[0]) if scalar else vals

    def _grid_raw(self, Q: int) -> np.ndarray:
        # Exact at the nodes 2 pi q / Q: fold lags modulo Q, then one FFT.
        folded = np.zeros(Q)
        np.add.at(folded, np.arange(self._g.size) % Q, self._g)
        np.add.at(folded, (-np.arange(1, self._g.size)) % Q, self._g[1:])
        return np.real(np.fft.fft(folded)) / (2.0 * math.pi)

    def on_grid(self, Q: int = DEFAULT_Q) -> np.ndarray:
        """f at the Q uniform nodes 2 pi q / Q, q = 0..Q-1."""
        return self._clip(self._grid_raw(int(Q)))


def spectral_density(gamma: AutocovarianceSeq) -> SpectralDensityFn:
    if not gamma.summable:
        raise UnsupportedModelError("non-summable autocovariance (long memory) is not supported")
    return SpectralDensityFn(gamma)


def constant_density(sigma2: float = 1.0) -> SpectralDensityFn:
    """f = sigma2 / (2 pi): white noise with variance sigma2."""
    return SpectralDensityFn(AutocovarianceSeq(np.array([float(sigma2)]), "closed_form"))


def quadrature_nodes(f: SpectralDensityFn, Q: int = DEFAULT_Q):
    """Distinct values of w = 2 pi f on the uniform grid and their weights.

    The trapezoid rule on a periodic grid is the plain mean.  f is even about
    pi, so nodes q and Q-q are merged; a constant f collapses to one node.
    """
    Q = int(Q)
    if Q < 2:
        raise ParameterError("need at least two quadrature nodes")
    w = 2.0 * math.pi * f.on_grid(Q)
    if np.ptp(w) <= 1e-15 * max(float(np.max(np.abs(w))), 1e-300):
        return np.array([float(np.mean(w))]), np.array([1.0])
    half = Q // 2
    nodes = w[: half + 1].copy()
    weights = np.full(half + 1, 2.0 / Q)
    weights[0] = 1.0 / Q
    if Q % 2 == 0:
        weights[half] = 1.0 / Q
    return nodes, weights


@dataclass(frozen=True, eq=False)
class StieltjesSolution:
    """Solver output on a set of points of the upper half-plane."""

    c: float
    z: np.ndarray
    S: np.ndarray
    S_under: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["re_z", "im_z", "re_S", "im_S", "re_Su", "im_Su", "iters", "residual"]
            )
            for z, s, su, it, r in zip(self.z, self.S, self.S_under, self.iterations, self.residual):
                writer.writerow(
                    [repr(float(z.real)), repr(float(z.imag)), repr(float(s.real)), repr(float(s.imag)),
                     repr(float(su.real)), repr(float(su.imag)), int(it), repr(float(r))]
                )


def _check_z(z) -> np.ndarray:
    z_arr = np.atleast_1d(np.asarray(z, dtype=np.complex128)).ravel()
    if np.any(~np.isfinite(z_arr)) or np.any(z_arr.imag <= 0):
        raise DomainError("solver needs finite z with Im z > 0")
    return z_arr


def solve_fixed_point(
    f: SpectralDensityFn,
    c: float,
    z,
    *,
    Q: int = DEFAULT_Q,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    warm_start: bool = False,
) -> StieltjesSolution:
    """Companion transform S_ and transform S at every point of ``z``.

    Points are independent unless ``warm_start`` is set, in which case they
    are solved in the given order and each starts from its predecessor's
    solution (falling back to a cold start if that fails).
    """
    if not (math.isfinite(c) and c > 0):
        raise ParameterError("aspect ratio c must be positive")
    z_arr = _check_z(z)
    w, p = quadrature_nodes(f, Q)

    if warm_start:
        s = np.empty_like(z_arr)
        iters = np.empty(z_arr.shape, dtype=np.int64)
        res = np.empty(z_arr.shape)
        status = np.empty(z_arr.shape, dtype=np.int64)
        prev = None
        for i, zi in enumerate(z_arr):
            one = np.array([zi])
            out = kernels.solve_points(one, w, p, c, tol, max_iter, None if prev is None else np.array([prev]))
            if out[3][0] != kernels.CONVERGED and prev is not None:
                out = kernels.solve_points(one, w, p, c, tol, max_iter, None)
            s[i], iters[i], res[i], status[i] = out[0][0], out[1][0], out[2][0], out[3][0]
            prev = s[i]
    else:
        s, iters, res, status = kernels.solve_points(z_arr, w, p, c, tol, max_iter, None)

    failed = np.flatnonzero(status != kernels.CONVERGED)
    if failed.size:
        bad = complex(z_arr[failed[0]])
        trace: list[float] = []
        kernels.solve_one_traced(bad, w, p, c, tol, max_iter, None, trace)
        raise SolverError(
            f"fixed point not reached at {failed.size} point(s), first z={bad}, "
            f"residual {res[failed[0]]:.3e} after {iters[failed[0]]} iterations",
            z=bad,
            trace=trace,
        )
    S = (s + (1.0 - c) / z_arr) / c
    return StieltjesSolution(c=float(c), z=z_arr, S=S, S_under=s, iterations=iters, residual=res)


def fixed_point_residual(f: SpectralDensityFn, c: float, z, S_under, Q: int = DEFAULT_Q):
    """|z - (-1/S_ + (c/2pi) int w/(1 + w S_))| by direct substitution on the full grid."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    su = np.atleast_1d(np.asarray(S_under, dtype=np.complex128))
    w = 2.0 * math.pi * f.on_grid(Q)
    integral = np.mean(w[None, :] / (1.0 + w[None, :] * su[:, None]), axis=1)
    return np.abs(z_arr - (-1.0 / su + c * integral))


def mp_reference(z, c: float, sigma2: float = 1.0):
    """Stieltjes transform of the Marchenko-Pastur law with ratio c and scale sigma2.

    Root of c t S1^2 + (t - 1 + c) S1 + 1 = 0 at t = z/sigma2 with Im S1 > 0,
    then S = S1 / sigma2.
    """
    if not (c > 0 and sigma2 > 0):
        raise ParameterError("c and sigma2 must be positive")
    z_arr = np.asarray(z, dtype=np.complex128)
    if np.any(z_arr.imag <= 0):
        raise DomainError("mp_reference needs Im z > 0")
    t = z_arr / sigma2
    b = t - 1.0 + c
    disc = np.sqrt(b * b - 4.0 * c * t)
    r1 = (-b + disc) / (2.0 * c * t)
    r2 = (-b - disc) / (2.0 * c * t)
    root = np.where(r1.imag >= r2.imag, r1, r2) / sigma2
    return complex(root) if root.ndim == 0 else root


@dataclass(frozen=True, eq=False)
class DensityResult:
    x: np.ndarray
    density: np.ndarray
    v: float
    solution: StieltjesSolution

    @property
    def mass(self) -> float:
        return float(np.trapezoid(self.density, self.x))

    def cdf(self):
        """CDF of the recovered density, normalised to unit mass."""
        x, dens = self.x, self.density
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(x))])
        total = cum[-1]
        if total <= 0:
            raise SolverError("recovered density has no mass on the grid")
        cum = cum / total

        def F(t):
            return np.interp(t, x, cum, left=0.0, right=1.0)

        return F

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "density"])
            for xi, di in zip(self.x, self.density):
                writer.writerow([repr(float(xi)), repr(float(di))])


def support_bound(f: SpectralDensityFn, c: float, Q: int = DEFAULT_Q) -> float:
    """Upper bound (1 + sqrt c)^2 max(2 pi f) on the support of the limit law."""
    w_max = float(np.max(2.0 * math.pi * f.on_grid(Q)))
    return (1.0 + math.sqrt(c)) ** 2 * w_max


def default_density_grid(x_max: float, v: float = DEFAULT_V) -> np.ndarray:
    """Grid on [-x_max/4, x_max] that resolves the width-v smoothing near 0."""
    x_max = max(float(x_max), 1.0)
    inner = 50.0 * v
    left = -0.25 * x_max
    parts = [
        np.linspace(left, -inner, 101)[:-1],
        np.linspace(-inner, inner, 501),
        np.geomspace(inner, x_max, 1200)[1:],
        np.linspace(inner, x_max, 1200)[1:],
    ]
    return np.unique(np.concatenate(parts))


CDF_V = 1e-10


@dataclass(frozen=True, eq=False)
class LimitCdf:
    """CDF of the limit law: an atom of mass max(0, 1 - 1/c) at 0 plus a continuous part.

    ``continuous_mass`` is the integral of the recovered density before it
    is rescaled to its exact mass min(1, 1/c); its deviation from that value
    measures the quadrature error.
    """

    x: np.ndarray
    cumulative: np.ndarray
    atom: float
    continuous_mass: float

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = np.interp(t, self.x, self.cumulative, left=0.0, right=1.0 - self.atom)
        out = out + self.atom * (t >= 0.0)
        return float(out) if out.ndim == 0 else out


def limit_cdf(
    f: SpectralDensityFn,
    c: float,
    *,
    points: int = 2000,
    Q: int = DEFAULT_Q,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> LimitCdf:
    """CDF of the limit law from densities evaluated at height 1e-10 above the axis.

    Smoothing at the density-plot height v = 1e-3 moves O(sqrt v) mass when
    the density has the 1/sqrt(x) singularity at 0 (c = 1), so the CDF is
    built from near-real evaluations on a grid that is geometric towards 0.
    For c > 1 the atom at 0 is removed exactly: S + (1 - 1/c)/z = S_/c.
    """
    if not (math.isfinite(c) and c > 0):
        raise ParameterError("aspect ratio c must be positive")
    points = int(points)
    if points < 100:
        raise ParameterError("need at least 100 grid points")
    x_max = 1.2 * support_bound(f, c, Q)
    x = np.unique(np.concatenate([
        [0.0],
        np.geomspace(1e-12 * x_max, x_max, points // 2),
        np.linspace(0.0, x_max, points // 2 + 1)[1:],
    ]))
    sol = solve_fixed_point(f, c, x[1:] + 1j * CDF_V, Q=Q, tol=tol, max_iter=max_iter)
    if c > 1:
        atom = 1.0 - 1.0 / c
        im = sol.S_under.imag / c
    else:
        atom = 0.0
        im = sol.S.imag
    dens = np.concatenate([[0.0], np.maximum(im, 0.0) / math.pi])
    # The point x = 0 contributes a 1/sqrt(x) spike only in the limit; the
    # first interval is integrated as if the density were 0 at its left end.
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(x))])
    mass = float(cum[-1])
    if mass <= 0:
        raise SolverError("recovered density has no mass")
    return LimitCdf(x=x, cumulative=cum * ((1.0 - atom) / mass), atom=atom, continuous_mass=mass)


def density_from_stieltjes(
    f: SpectralDensityFn,
    c: float,
    x=None,
    *,
    v: float = DEFAULT_V,
    Q: int = DEFAULT_Q,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> DensityResult:
    """Density (1/pi) Im S(x + iv) of the limit law on a real grid."""
    if not 1e-4 <= v <= 1e-2:
        raise DomainError("smoothing height v must lie in [1e-4, 1e-2]")
    if x is None:
        x = default_density_grid(1.2 * support_bound(f, c, Q) + 50.0 * v, v)
    x = np.asarray(x, dtype=np.float64)
    sol = solve_fixed_point(f, c, x + 1j * v, Q=Q, tol=tol, max_iter=max_iter)
    density = np.maximum(sol.S.imag, 0.0) / math.pi
    return DensityResult(x=x, density=density, v=v, solution=sol)
