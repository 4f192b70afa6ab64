"""Eigenvalues, empirical spectral distributions and Stieltjes transforms."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, ShapeError

log = logging.getLogger(__name__)

CLIP_RELATIVE = 1e-10


@dataclass(frozen=True, eq=False)
class GramSpectrum:
    """Sorted eigenvalues of an N x N matrix plus its ensemble metadata."""

    eigenvalues: np.ndarray
    N: int
    n: int | None = None
    kind: str = "generic"

    @property
    def c(self) -> float | None:
        return None if self.n is None else self.N / self.n

    def esd(self) -> "EsdFunction":
        return EsdFunction(self.eigenvalues)


class EsdFunction:
    """Right-continuous step CDF F(x) = #{lambda_k <= x} / N."""

    def __init__(self, eigenvalues):
        self.eigenvalues = np.sort(np.asarray(eigenvalues, dtype=np.float64))
        if self.eigenvalues.size == 0:
            raise ShapeError("an ESD needs at least one eigenvalue")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.searchsorted(self.eigenvalues, x, side="right") / self.eigenvalues.size
        return float(out) if out.ndim == 0 else out


def eig_sym(matrix, *, psd: bool = False, n: int | None = None, kind: str = "generic") -> GramSpectrum:
    """Full spectrum of a real symmetric matrix, ascending.

    With ``psd=True`` eigenvalues in ``[-1e-10 max|lambda|, 0)`` are rounding
    noise of a Gram matrix and are clipped to 0.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-8 * max(scale, 1.0):
        raise ShapeError("matrix is not symmetric")
    lam = np.linalg.eigvalsh(a)
    if psd and lam.size:
        floor = -CLIP_RELATIVE * float(np.max(np.abs(lam)))
        tiny = (lam < 0) & (lam >= floor)
        if tiny.any():
            log.debug("clipping %d eigenvalues in [%g, 0) to 0", int(tiny.sum()), floor)
            lam = np.where(tiny, 0.0, lam)
    return GramSpectrum(eigenvalues=lam, N=a.shape[0], n=n, kind=kind)


def _eigs(spectrum) -> np.ndarray:
    if isinstance(spectrum, GramSpectrum):
        return spectrum.eigenvalues
    return np.asarray(spectrum, dtype=np.float64)


def empirical_stieltjes(spectrum, z):
    """S(z) = (1/N) sum_k 1/(lambda_k - z) for scalar or array ``z`` in C+."""
    z_arr = np.asarray(z, dtype=np.complex128)
    if np.any(z_arr.imag <= 0):
        raise DomainError("Stieltjes transform needs Im z > 0")
    lam = _eigs(spectrum)
    out = np.mean(1.0 / (lam[:, None] - z_arr.reshape(-1)[None, :]), axis=0)
    if z_arr.ndim == 0:
        return complex(out[0])
    return out.reshape(z_arr.shape)


def kolmogorov_distance(esd, reference) -> float:
    """sup |F_hat - F_ref| over both one-sided limits at every ESD jump.

    For a monotone reference without jumps between eigenvalues this is the
    exact supremum, since F_hat is constant between jumps.
    """
    if not isinstance(esd, EsdFunction):
        esd = EsdFunction(_eigs(esd))
    jumps = np.unique(esd.eigenvalues)
    left = np.nextafter(jumps, -np.inf)
    f_right = esd(jumps)
    f_left = esd(left)
    r_right = np.asarray(reference(jumps), dtype=np.float64)
    r_left = np.asarray(reference(left), dtype=np.float64)
    d = max(np.max(np.abs(f_right - r_right)), np.max(np.abs(f_left - r_left)))
    return float(min(max(d, 0.0), 1.0))


def write_spectrum_csv(spectrum, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda"])
        writer.writerows([repr(float(v))] for v in _eigs(spectrum))


def write_stieltjes_grid_csv(z, s, path) -> None:
    z = np.asarray(z, dtype=np.complex128).ravel()
    s = np.asarray(s, dtype=np.complex128).ravel()
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re_z", "im_z", "re_S", "im_S"])
        for zi, si in zip(z, s):
            writer.writerow([repr(float(zi.real)), repr(float(zi.imag)), repr(float(si.real)), repr(float(si.imag))])
