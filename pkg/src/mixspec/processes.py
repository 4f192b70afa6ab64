"""Stationary process models X_k = g(xi_k) with known second-order structure.

Four models are available:

``harris_chain``
    Symmetric sticky Markov chain on [-1, 1] with kernel
    ``K(x, .) = (1 - |x|) delta_x + |x| nu`` where nu has density
    ``((a+1)/2)|x|^a``.  Started from its invariant law, whose density is
    ``(a/2)|x|^(a-1)``.  Observed through ``sign(x)|x|^(1/2)`` (default) or
    the identity.
``doubling_map``
    Orbit of ``x -> 2x mod 1`` started from Lebesgue measure, represented by
    a sliding window of 64 i.i.d. fair binary digits, observed as ``x - 1/2``.
``noncausal_window``
    Two-sided moving window ``sum_j c_j g(eps_{k+j})`` of i.i.d. uniform
    [-1, 1] innovations.
``iid_baseline``
    Independent centred Gaussians with variance ``sigma2``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from . import kernels
from .errors import (
    DomainError,
    InsufficientDataError,
    ParameterError,
    UnsupportedModelError,
)

KINDS = ("harris_chain", "doubling_map", "noncausal_window", "iid_baseline")
OBSERVABLES = ("signed_sqrt", "centered_identity")

_DEFAULT_OBSERVABLE = {
    "harris_chain": "signed_sqrt",
    "doubling_map": "centered_identity",
    "noncausal_window": "centered_identity",
    "iid_baseline": "centered_identity",
}

DOUBLING_DIGITS = 64


@dataclass(frozen=True)
class ProcessSpec:
    """Declarative description of one stationary model."""

    kind: str
    a: float = 1.0
    window_coeffs: tuple[float, ...] = ()
    observable: str | None = None
    sigma2: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown process kind {self.kind!r}; expected one of {KINDS}")
        obs = self.observable or _DEFAULT_OBSERVABLE[self.kind]
        if obs not in OBSERVABLES:
            raise ParameterError(f"unknown observable {obs!r}")
        object.__setattr__(self, "observable", obs)
        object.__setattr__(self, "window_coeffs", tuple(float(c) for c in self.window_coeffs))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "sigma2", float(self.sigma2))

        if self.kind == "harris_chain":
            if not (math.isfinite(self.a) and self.a > 0):
                raise ParameterError("harris_chain requires a > 0")
        elif self.kind == "doubling_map":
            if obs != "centered_identity":
                raise ParameterError("doubling_map only supports the observable x - 1/2")
        elif self.kind == "noncausal_window":
            c = self.window_coeffs
            if len(c) == 0 or len(c) % 2 == 0:
                raise ParameterError("window_coeffs must list c_{-J}..c_J (odd length)")
            if not all(math.isfinite(x) for x in c):
                raise ParameterError("window_coeffs must be finite")
            if not any(x != 0.0 for x in c):
                raise ParameterError("window_coeffs are all zero: degenerate process")
        elif self.kind == "iid_baseline":
            if obs != "centered_identity":
                raise ParameterError("iid_baseline draws Gaussians directly; use centered_identity")
            if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
                raise ParameterError("iid_baseline requires sigma2 > 0")

    @property
    def half_width(self) -> int:
        """J for the noncausal window, 0 for the instantaneous models."""
        if self.kind == "noncausal_window":
            return (len(self.window_coeffs) - 1) // 2
        return 0

    @property
    def is_instantaneous(self) -> bool:
        """True when X_k is a function of the single innovation eps_k."""
        return self.kind in ("harris_chain", "iid_baseline")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "a": self.a,
            "window_coeffs": list(self.window_coeffs),
            "observable": self.observable,
            "sigma2": self.sigma2,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProcessSpec":
        if not isinstance(data, dict):
            raise ParameterError("process spec must be a JSON object")
        unknown = set(data) - {"kind", "a", "window_coeffs", "observable", "sigma2"}
        if unknown:
            raise ParameterError(f"unknown process spec fields: {sorted(unknown)}")
        if "kind" not in data:
            raise ParameterError("process spec needs a 'kind'")
        try:
            return cls(
                kind=data["kind"],
                a=float(data.get("a", 1.0)),
                window_coeffs=tuple(data.get("window_coeffs", ()) or ()),
                observable=data.get("observable"),
                sigma2=float(data.get("sigma2", 1.0)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ParameterError):
                raise
            raise ParameterError(f"malformed process spec: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ProcessSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"process spec is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A realised sample X_1..X_L with the innovations that produced it.

    ``innovations[margin + k - 1]`` is eps_k.  For the doubling map the
    innovations are the binary digits and ``margin`` is 0: X_k is read from
    ``innovations[k-1 : k+63]``.
    """

    values: np.ndarray
    innovations: np.ndarray
    seed: int
    spec: ProcessSpec
    margin: int = 0

    def __post_init__(self):
        self.values.setflags(write=False)
        self.innovations.setflags(write=False)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class AutocovarianceSeq:
    gamma: np.ndarray
    source: str
    summable: bool = True

    @property
    def K(self) -> int:
        return self.gamma.shape[0] - 1

    @property
    def gamma0(self) -> float:
        return float(self.gamma[0])

    def padded(self, length: int) -> np.ndarray:
        """gamma_0..gamma_{length-1}, zero beyond the stored lags."""
        out = np.zeros(length)
        k = min(length, self.gamma.shape[0])
        out[:k] = self.gamma[:k]
        return out

    def toeplitz_is_psd(self, tol: float = 1e-12) -> bool:
        """Attempted Cholesky of (gamma_|i-j|) with a relative jitter."""
        from scipy.linalg import toeplitz

        mat = toeplitz(self.gamma) + tol * max(abs(self.gamma0), 1e-300) * np.eye(self.K + 1)
        try:
            np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            return False
        return True


@dataclass(frozen=True)
class BetaDecayModel:
    """Upper-bound class for the beta-mixing coefficients of the innovations.

    For ``n >= 1`` the bound is ``constant * n**-rate`` (polynomial),
    ``constant * exp(-rate * n)`` (exponential) or 0, capped at 1 since a
    beta coefficient never exceeds 1; ``bound(0) = 1``.
    """

    decay: str
    rate: float = 0.0
    constant: float = 1.0

    def bound(self, n):
        n_arr = np.asarray(n, dtype=np.float64)
        with np.errstate(divide="ignore", over="ignore"):
            if self.decay == "polynomial":
                out = self.constant * np.power(np.maximum(n_arr, 1.0), -self.rate)
            elif self.decay == "exponential":
                out = self.constant * np.exp(-self.rate * n_arr)
            elif self.decay == "zero":
                out = np.zeros_like(n_arr)
            else:
                raise ParameterError(f"unknown decay class {self.decay!r}")
        out = np.where(n_arr <= 0, 1.0, np.minimum(out, 1.0))
        return float(out) if out.ndim == 0 else out

    def describe(self) -> str:
        if self.decay == "polynomial":
            return f"beta_n <= {self.constant:g} n^-{self.rate:g}"
        if self.decay == "exponential":
            return f"beta_n <= {self.constant:g} exp(-{self.rate:g} n)"
        return "beta_n = 0 for n >= 1"


@dataclass
class CondBetaDiagnostic:
    partial_sums: np.ndarray
    condensed_ratios: np.ndarray = field(repr=False)
    converged: bool


def _check_seed(seed) -> int:
    try:
        seed = int(seed)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"seed must be an integer, got {seed!r}") from exc
    if not 0 <= seed < 2**64:
        raise ParameterError("seed must lie in [0, 2**64)")
    return seed


def observe(spec: ProcessSpec, eps):
    """Apply the model's pointwise observable to innovations."""
    eps = np.asarray(eps, dtype=np.float64)
    if spec.observable == "signed_sqrt":
        return np.sign(eps) * np.sqrt(np.abs(eps))
    return eps


def _harris_eps(a: float, length: int, rng: np.random.Generator) -> np.ndarray:
    # 1 - U lies in (0, 1], so no state is exactly 0 (which would absorb).
    x0 = (1.0 - rng.random()) ** (1.0 / a)
    if rng.random() < 0.5:
        x0 = -x0
    jump_u = rng.random(length - 1)
    fresh = (1.0 - rng.random(length - 1)) ** (1.0 / (a + 1.0))
    fresh = np.where(rng.random(length - 1) < 0.5, -fresh, fresh)
    return kernels.harris_path(x0, jump_u, fresh)


def harris_block_chains(a: float, n_chains: int, length: int, rng: np.random.Generator) -> np.ndarray:
    """``n_chains`` independent stationary chains of ``length`` steps, one per row."""
    out = np.empty((n_chains, length))
    x = (1.0 - rng.random(n_chains)) ** (1.0 / a)
    x = np.where(rng.random(n_chains) < 0.5, -x, x)
    out[:, 0] = x
    for t in range(1, length):
        jump = rng.random(n_chains) < np.abs(x)
        fresh = (1.0 - rng.random(n_chains)) ** (1.0 / (a + 1.0))
        fresh = np.where(rng.random(n_chains) < 0.5, -fresh, fresh)
        x = np.where(jump, fresh, x)
        out[:, t] = x
    return out


def sample_trajectory(spec: ProcessSpec, L: int, seed: int) -> Trajectory:
    """Draw a stationary sample of length ``L``; identical inputs give identical bytes."""
    if not isinstance(spec, ProcessSpec):
        raise ParameterError("spec must be a ProcessSpec")
    L = int(L)
    if L < 1:
        raise DomainError("trajectory length must be at least 1")
    seed = _check_seed(seed)
    rng = np.random.default_rng(seed)

    if spec.kind == "harris_chain":
        eps = _harris_eps(spec.a, L, rng)
        return Trajectory(observe(spec, eps), eps, seed, spec, 0)

    if spec.kind == "doubling_map":
        digits = rng.integers(0, 2, size=L + DOUBLING_DIGITS - 1, dtype=np.uint8)
        windows = kernels.doubling_windows(digits, L)
        x = windows.astype(np.float64) * 2.0**-64
        return Trajectory(x - 0.5, digits, seed, spec, 0)

    if spec.kind == "noncausal_window":
        J = spec.half_width
        eps = rng.uniform(-1.0, 1.0, size=L + 2 * J)
        coeffs = np.asarray(spec.window_coeffs)
        values = np.correlate(observe(spec, eps), coeffs, mode="valid")
        return Trajectory(values, eps, seed, spec, J)

    values = math.sqrt(spec.sigma2) * rng.standard_normal(L)
    return Trajectory(values, values.copy(), seed, spec, 0)


def doubling_integer_state(traj: Trajectory) -> np.ndarray:
    """The exact 64-bit digit windows behind a doubling-map trajectory."""
    if traj.spec.kind != "doubling_map":
        raise UnsupportedModelError("integer state only exists for doubling_map")
    return kernels.doubling_windows(traj.innovations, len(traj))


def innovation_variance(spec: ProcessSpec) -> float:
    """Var g(eps) for a uniform [-1, 1] innovation (noncausal window model)."""
    return 0.5 if spec.observable == "signed_sqrt" else 1.0 / 3.0


def autocovariance_closed_form(spec: ProcessSpec, K: int) -> AutocovarianceSeq:
    """Exact gamma_0..gamma_K."""
    K = int(K)
    if K < 0:
        raise DomainError("max lag K must be non-negative")
    k = np.arange(K + 1, dtype=np.float64)

    if spec.kind == "harris_chain":
        # theta^-1 * int g(x)^2 (1-|x|)^k |x|^-1 nu(dx) = a * B(k+1, a+1+q)
        # with q = 0 for sign(x)|x|^(1/2) and q = 1 for the identity.
        a = spec.a
        second = a + 1.0 if spec.observable == "signed_sqrt" else a + 2.0
        gamma = a * np.exp(gammaln(k + 1.0) + gammaln(second) - gammaln(k + 1.0 + second))
    elif spec.kind == "doubling_map":
        gamma = np.exp2(-k) / 12.0
    elif spec.kind == "iid_baseline":
        gamma = np.zeros(K + 1)
        gamma[0] = spec.sigma2
    elif spec.kind == "noncausal_window":
        c = np.asarray(spec.window_coeffs)
        full = np.correlate(c, c, mode="full")[len(c) - 1:]
        gamma = np.zeros(K + 1)
        m = min(K + 1, full.shape[0])
        gamma[:m] = innovation_variance(spec) * full[:m]
    else:  # pragma: no cover - guarded by ProcessSpec
        raise UnsupportedModelError(spec.kind)
    return AutocovarianceSeq(gamma=gamma, source="closed_form", summable=True)


def conditional_expectation_harris(x0: float, k: int, a: float = 1.0) -> float:
    """E(g(eps_k) | eps_0 = x0) = (1 - |x0|)^k g(x0) for g = sign(x)|x|^(1/2)."""
    x0 = float(x0)
    if not abs(x0) <= 1.0:
        raise DomainError("x0 must lie in [-1, 1]")
    if int(k) != k or k < 0:
        raise DomainError("lag k must be a non-negative integer")
    if not a > 0:
        raise ParameterError("a must be positive")
    return (1.0 - abs(x0)) ** int(k) * math.copysign(math.sqrt(abs(x0)), x0)


def _values_of(traj) -> np.ndarray:
    if isinstance(traj, Trajectory):
        return traj.values
    return np.asarray(traj, dtype=np.float64)


def estimate_autocovariance(traj, K: int) -> AutocovarianceSeq:
    """Biased sample autocovariance (1/L) sum_t X_t X_{t+k}, k = 0..K."""
    x = _values_of(traj)
    L = x.shape[0]
    K = int(K)
    if K < 0:
        raise DomainError("max lag K must be non-negative")
    if L <= 4 * K or L == 0:
        raise InsufficientDataError(f"need L > 4K samples, got L={L}, K={K}")
    gamma = np.array([np.dot(x[: L - k], x[k:]) / L for k in range(K + 1)])
    return AutocovarianceSeq(gamma=gamma, source="monte_carlo", summable=True)


def batch_means_se(traj, K: int, n_batches: int = 20) -> np.ndarray:
    """Standard error of gamma-hat_0..K from disjoint batches."""
    x = _values_of(traj)
    size = x.shape[0] // n_batches
    if n_batches < 2 or size <= 4 * K:
        raise InsufficientDataError("batches too short for the requested lags")
    est = np.array(
        [estimate_autocovariance(x[b * size:(b + 1) * size], K).gamma for b in range(n_batches)]
    )
    return est.std(axis=0, ddof=1) / math.sqrt(n_batches)


def beta_decay(spec: ProcessSpec, constant: float = 1.0) -> BetaDecayModel:
    """Decay class of beta_n for the innovation sequence of ``spec``.

    Only the class is known; ``constant`` is a free multiplier.
    """
    if not constant > 0:
        raise ParameterError("beta bound constant must be positive")
    if spec.kind == "harris_chain":
        return BetaDecayModel("polynomial", spec.a, constant)
    if spec.kind == "doubling_map":
        return BetaDecayModel("exponential", math.log(2.0), constant)
    return BetaDecayModel("zero", 0.0, constant)


def check_cond_beta(model: BetaDecayModel, alpha: float, horizon: int) -> CondBetaDiagnostic:
    """Partial sums of log(n)^(3 alpha/2) n^(-1/2) beta_n and a convergence verdict.

    The verdict uses Cauchy condensation: with c_j = 2^j t_{2^j}, the series
    converges iff the condensed series does, and for terms of power-log type
    the ratio c_{j+1}/c_j tends to 2^(1-s) times a factor that goes to 1.  The
    last three condensed ratios below the horizon must all be < 1.  This is
    an asymptotic diagnostic: short horizons can flag convergent series.
    """
    if not alpha > 1:
        raise ParameterError("alpha must exceed 1")
    horizon = int(horizon)
    if horizon < 10:
        raise ParameterError("horizon must be at least 10")
    n = np.arange(1, horizon + 1, dtype=np.float64)
    terms = np.log(n) ** (1.5 * alpha) * n**-0.5 * model.bound(n)
    partial = np.cumsum(terms)

    j = np.arange(1, int(math.floor(math.log2(horizon))) + 1)
    dyadic = 2.0**j
    condensed = dyadic * terms[(dyadic - 1).astype(np.int64)]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = condensed[1:] / condensed[:-1]
    ratios = np.where(condensed[1:] == 0.0, 0.0, ratios)
    tail = ratios[-3:]
    converged = bool(np.all(np.isfinite(tail)) and np.all(tail < 1.0))
    return CondBetaDiagnostic(partial_sums=partial, condensed_ratios=ratios, converged=converged)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Single-column CSV with header ``x``."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x"])
        writer.writerows([repr(float(v))] for v in traj.values)


def read_trajectory_csv(path) -> np.ndarray:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["x"]:
        raise ParameterError("trajectory CSV must have the header 'x'")
    return np.array([float(r[0]) for r in rows[1:]])
