"""Seeded Monte Carlo campaigns over matrix sizes and replicates.

Every replicate ``r`` uses seed ``base_seed + r`` for its trajectory, at
every size, so size-to-size comparisons are paired.  Auxiliary draws
(Gaussian matrices, independent columns, resampled blocks) use seeds
derived from the replicate seed and a fixed tag.

Reports hold named tables (``columns`` plus ``rows``).  Table contents
depend only on the configuration; the wall clock and provenance do not
enter them.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import kernels, lsd, matrices, processes
from ._io import atomic_outputs
from ._version import __version__
from .errors import DomainError, ParameterError, UnsupportedModelError
from .processes import ProcessSpec
from .spectral import eig_sym, empirical_stieltjes, kolmogorov_distance

SCHEMA = "mixspec.report/1"
LSD_LAGS = 10_000

TAG_GAUSSIAN = 2
TAG_CONTROL = 3
TAG_COLUMNS = 4
TAG_BLOCKS = 5


@dataclass(frozen=True)
class ExperimentConfig:
    spec: ProcessSpec
    sizes: tuple = ((150, 150), (300, 300), (600, 600))
    replicates: int = 5
    z_grid: tuple = (1j,)
    base_seed: int = 0
    blocks: tuple = ()          # ladder of (m, M); M None means the default level
    a_m: int | None = None
    include_An: bool = False
    alpha: float = 1.5
    x_levels: tuple = (0.01, 0.05, 0.1)
    Q: int = lsd.DEFAULT_Q
    threads: int | None = None
    output: str | None = None

    def __post_init__(self):
        if not isinstance(self.spec, ProcessSpec):
            raise ParameterError("spec must be a ProcessSpec")
        sizes = tuple((int(N), int(n)) for N, n in self.sizes)
        if not sizes:
            raise ParameterError("at least one size is required")
        for N, n in sizes:
            matrices.EnsembleConfig(N, n)
        if any(b[0] < a[0] for a, b in zip(sizes, sizes[1:])):
            raise ParameterError("sizes must be nondecreasing in N")
        object.__setattr__(self, "sizes", sizes)
        if int(self.replicates) < 1:
            raise ParameterError("replicates must be positive")
        object.__setattr__(self, "replicates", int(self.replicates))
        z = tuple(complex(x) for x in self.z_grid)
        if not z:
            raise ParameterError("z grid is empty")
        if any(not x.imag > 0 for x in z):
            raise DomainError("every z must lie in the upper half-plane")
        object.__setattr__(self, "z_grid", z)
        processes._check_seed(self.base_seed)
        object.__setattr__(self, "blocks", tuple(
            (int(m), None if M is None else float(M)) for m, M in self.blocks
        ))
        if not self.alpha > 1:
            raise ParameterError("alpha must exceed 1")
        if any(not x > 0 for x in self.x_levels):
            raise ParameterError("x levels must be positive")
        object.__setattr__(self, "x_levels", tuple(float(x) for x in self.x_levels))
        if self.threads is not None and int(self.threads) < 1:
            raise ParameterError("threads must be positive")

    def replicate_seeds(self) -> list[int]:
        return [self.base_seed + r for r in range(self.replicates)]

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "sizes": [list(s) for s in self.sizes],
            "replicates": self.replicates,
            "z_grid": [[z.real, z.imag] for z in self.z_grid],
            "base_seed": self.base_seed,
            "blocks": [[m, M] for m, M in self.blocks],
            "a_m": self.a_m,
            "include_An": self.include_An,
            "alpha": self.alpha,
            "x_levels": list(self.x_levels),
            "Q": self.Q,
            "threads": self.threads,
            "output": self.output,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ParameterError("experiment config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ParameterError(f"unknown config fields: {sorted(extra)}")
        if "spec" not in d:
            raise ParameterError("config needs a 'spec' object")
        kw = dict(d)
        kw["spec"] = ProcessSpec.from_dict(d["spec"])
        try:
            if "z_grid" in kw:
                kw["z_grid"] = tuple(complex(re, im) for re, im in kw["z_grid"])
            for key in ("sizes", "blocks", "x_levels"):
                if key in kw:
                    kw[key] = tuple(tuple(x) if isinstance(x, list) else x for x in kw[key])
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"malformed config: {exc}") from exc
        return cls(**kw)


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_cell(v) for v in row])
        return buf.getvalue()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


@dataclass
class ExperimentReport:
    experiment: str
    config: ExperimentConfig
    tables: dict
    summary: dict
    notices: list
    wall_clock: float
    provenance: dict

    def metric_csvs(self) -> dict:
        return {name: t.to_csv() for name, t in self.tables.items()}

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "experiment": self.experiment,
            "config": self.config.to_dict(),
            "summary": self.summary,
            "notices": self.notices,
            "tables": {
                name: {"columns": t.columns, "rows": [[_jsonable(v) for v in r] for r in t.rows]}
                for name, t in self.tables.items()
            },
            "wall_clock_seconds": self.wall_clock,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def output_paths(self, directory) -> dict:
        d = Path(directory)
        paths = {"report": d / f"{self.experiment}.json"}
        for name in self.tables:
            paths[name] = d / f"{self.experiment}_{name}.csv"
        return paths

    def write(self, directory) -> list[Path]:
        """Write the JSON report and one CSV per table; all files or none."""
        paths = self.output_paths(directory)
        csvs = self.metric_csvs()
        order = list(paths)
        with atomic_outputs([paths[k] for k in order]) as temps:
            for key, tmp in zip(order, temps):
                text = self.to_json() if key == "report" else csvs[key]
                tmp.write_text(text)
        return [paths[k] for k in order]


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else MIXSPEC_THREADS, else the machine's CPU count."""
    if threads is not None:
        return max(int(threads), 1)
    env = os.environ.get("MIXSPEC_THREADS", "").strip()
    if env:
        try:
            val = int(env)
        except ValueError as exc:
            raise ParameterError(f"MIXSPEC_THREADS must be an integer, got {env!r}") from exc
        if val < 1:
            raise ParameterError("MIXSPEC_THREADS must be positive")
        return val
    return os.cpu_count() or 1


def _map(fn, items, threads: int) -> list:
    """Order-preserving map; results merge in input order whatever the schedule."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _provenance(cfg: ExperimentConfig) -> dict:
    return {
        "package_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "spec_json": cfg.spec.to_json(),
        "replicate_seeds": cfg.replicate_seeds(),
        "sizes": [list(s) for s in cfg.sizes],
    }


def _report(name, cfg, tables, summary, notices, t0) -> ExperimentReport:
    return ExperimentReport(
        experiment=name,
        config=cfg,
        tables=tables,
        summary=summary,
        notices=notices,
        wall_clock=time.perf_counter() - t0,
        provenance=_provenance(cfg),
    )


def _trajectory_gram(spec, cfg_N: matrices.EnsembleConfig, seed):
    traj = processes.sample_trajectory(spec, cfg_N.N * cfg_N.n, seed)
    dm, gram = matrices.build_Bn(traj, cfg_N)
    lhs = np.trace(gram) / cfg_N.N
    rhs = float(np.mean(np.square(traj.values[: cfg_N.N * cfg_N.n])))
    if abs(lhs - rhs) > 1e-10 * max(abs(rhs), 1e-300):
        raise AssertionError(f"trace identity violated: {lhs!r} vs {rhs!r}")
    return traj, dm, gram


def _strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def _require_nondegenerate(spec: ProcessSpec) -> None:
    if processes.autocovariance_closed_form(spec, 0).gamma0 <= 0:
        raise ParameterError("degenerate process: gamma_0 = 0")


def limit_cdf(spec: ProcessSpec, c: float, *, Q: int = lsd.DEFAULT_Q):
    """CDF of the solved limit law for ``spec`` at aspect ratio ``c``."""
    gamma = processes.autocovariance_closed_form(spec, LSD_LAGS)
    return lsd.limit_cdf(lsd.spectral_density(gamma), c, Q=Q)


def run_lsd_convergence(cfg: ExperimentConfig) -> ExperimentReport:
    """KS distance between the ESD of B_n (and A_n) and the solved limit law."""
    t0 = time.perf_counter()
    spec = cfg.spec
    _require_nondegenerate(spec)
    threads = resolve_threads(cfg.threads)

    cdfs = {}
    for N, n in cfg.sizes:
        c = N / n
        if c not in cdfs:
            cdfs[c] = limit_cdf(spec, c, Q=cfg.Q)

    columns = ["N", "n", "replicate", "seed", "ks_Bn"] + (["ks_An"] if cfg.include_An else [])
    table = Table(columns)
    summary_t = Table(["N", "n", "mean_ks_Bn"] + (["mean_ks_An"] if cfg.include_An else []))
    means = []
    for N, n in cfg.sizes:
        ens = matrices.EnsembleConfig(N, n)
        F = cdfs[N / n]

        def one(r, ens=ens, F=F):
            seed = cfg.base_seed + r
            _, _, gram = _trajectory_gram(spec, ens, seed)
            row = [ens.N, ens.n, r, seed, kolmogorov_distance(eig_sym(gram, psd=True).esd(), F)]
            if cfg.include_An:
                a_seed = matrices.derive_seeds(seed, 1, TAG_COLUMNS)[0]
                A = matrices.build_An(spec, ens, a_seed)
                row.append(kolmogorov_distance(eig_sym(A, psd=True).esd(), F))
            return row

        rows = _map(one, range(cfg.replicates), threads)
        table.rows.extend(rows)
        arr = np.array([r[4:] for r in rows], dtype=np.float64)
        m = arr.mean(axis=0)
        means.append(float(m[0]))
        summary_t.rows.append([N, n, *[float(x) for x in m]])

    summary = {
        "mean_ks_Bn": means,
        "strictly_decreasing": _strictly_decreasing(means),
        "final_mean_ks_Bn": means[-1],
    }
    return _report("lsd_convergence", cfg, {"ks": table, "summary": summary_t}, summary, [], t0)


def _stieltjes_row(gram, zs):
    return empirical_stieltjes(eig_sym(gram, psd=True), np.asarray(zs))


def run_universality(cfg: ExperimentConfig) -> ExperimentReport:
    """|S_{B_n}(z) - S_{G_n}(z)| with a G_n-versus-G_n control at the same size."""
    t0 = time.perf_counter()
    spec = cfg.spec
    _require_nondegenerate(spec)
    threads = resolve_threads(cfg.threads)
    zs = np.array(cfg.z_grid)
    gamma = processes.autocovariance_closed_form(spec, max(N for N, _ in cfg.sizes))

    table = Table(["N", "n", "replicate", "re_z", "im_z", "re_SB", "im_SB", "re_SG", "im_SG",
                   "abs_B_minus_G", "abs_G_minus_Gcontrol"])
    summary_t = Table(["N", "n", "re_z", "im_z", "mean_abs_B_minus_G", "abs_mean_B_minus_mean_G",
                       "mean_abs_G_minus_Gcontrol"])
    per_size = []
    for N, n in cfg.sizes:
        ens = matrices.EnsembleConfig(N, n)
        L = matrices.toeplitz_cholesky(gamma, N)

        def gaussian(seed, ens=ens, L=L):
            rng = np.random.default_rng(seed)
            return matrices.gram_from_columns(L @ rng.standard_normal((ens.N, ens.n)))

        def one(r, ens=ens, gaussian=gaussian):
            seed = cfg.base_seed + r
            _, _, B = _trajectory_gram(spec, ens, seed)
            g_seed, c_seed = (matrices.derive_seeds(seed, 1, t)[0] for t in (TAG_GAUSSIAN, TAG_CONTROL))
            return _stieltjes_row(B, zs), _stieltjes_row(gaussian(g_seed), zs), _stieltjes_row(gaussian(c_seed), zs)

        results = _map(one, range(cfg.replicates), threads)
        SB = np.array([x[0] for x in results])
        SG = np.array([x[1] for x in results])
        SC = np.array([x[2] for x in results])
        for r in range(cfg.replicates):
            for j, z in enumerate(zs):
                table.rows.append([N, n, r, z.real, z.imag, SB[r, j].real, SB[r, j].imag,
                                   SG[r, j].real, SG[r, j].imag,
                                   abs(SB[r, j] - SG[r, j]), abs(SG[r, j] - SC[r, j])])
        mean_abs = np.abs(SB - SG).mean(axis=0)
        abs_mean = np.abs(SB.mean(axis=0) - SG.mean(axis=0))
        control = np.abs(SG - SC).mean(axis=0)
        for j, z in enumerate(zs):
            summary_t.rows.append([N, n, z.real, z.imag, float(mean_abs[j]), float(abs_mean[j]), float(control[j])])
        per_size.append(mean_abs)

    per_size = np.array(per_size)
    summary = {
        "mean_abs_B_minus_G": per_size.tolist(),
        "strictly_decreasing": [bool(_strictly_decreasing(per_size[:, j])) for j in range(len(zs))],
        "final_mean_abs_B_minus_G": per_size[-1].tolist(),
    }
    return _report("universality", cfg, {"stieltjes": table, "summary": summary_t},
                   summary, [], t0)


def concentration_envelope(x: float, v: float, N: int, n: int, alpha: float,
                           model: processes.BetaDecayModel) -> float:
    """Upper bound on P(|S - E S| > 4x) from the exponential plus mixing terms."""
    logn = math.log(n) ** alpha
    expo = 4.0 * math.exp(-(x * x * v * v * N * N * logn) / (256.0 * n * n))
    lag = int(n / logn) * N
    mixing = 32.0 * n * n * logn / (x * x * v * v * N * N) * float(model.bound(lag))
    return expo + mixing


def run_concentration(cfg: ExperimentConfig) -> ExperimentReport:
    """Replicate spread of S_{B_n}(z) against the exponential-plus-mixing envelope."""
    t0 = time.perf_counter()
    if cfg.replicates < 50:
        raise ParameterError("concentration needs at least 50 replicates")
    spec = cfg.spec
    _require_nondegenerate(spec)
    threads = resolve_threads(cfg.threads)
    zs = np.array(cfg.z_grid)
    model = processes.beta_decay(spec)

    rep_t = Table(["N", "n", "replicate", "re_z", "im_z", "re_S", "im_S"])
    std_t = Table(["N", "n", "re_z", "im_z", "std_re_S", "std_im_S"])
    env_t = Table(["N", "n", "re_z", "im_z", "x", "envelope", "exceedance"])
    std_re = []
    for N, n in cfg.sizes:
        ens = matrices.EnsembleConfig(N, n)

        def one(r, ens=ens):
            _, _, B = _trajectory_gram(spec, ens, cfg.base_seed + r)
            return _stieltjes_row(B, zs)

        S = np.array(_map(one, range(cfg.replicates), threads))
        for r in range(cfg.replicates):
            for j, z in enumerate(zs):
                rep_t.rows.append([N, n, r, z.real, z.imag, S[r, j].real, S[r, j].imag])
        sr = S.real.std(axis=0, ddof=1)
        si = S.imag.std(axis=0, ddof=1)
        dev = np.abs(S - S.mean(axis=0))
        for j, z in enumerate(zs):
            std_t.rows.append([N, n, z.real, z.imag, float(sr[j]), float(si[j])])
            for x in cfg.x_levels:
                env = concentration_envelope(x, z.imag, N, n, cfg.alpha, model)
                env_t.rows.append([N, n, z.real, z.imag, x, env, float(np.mean(dev[:, j] > 4 * x))])
        std_re.append(sr)

    std_re = np.array(std_re)
    ratio = (std_re[-1] / std_re[0]).tolist() if len(cfg.sizes) > 1 else None
    summary = {
        "std_re_S": std_re.tolist(),
        "std_ratio_last_first": ratio,
        "strictly_decreasing": [bool(_strictly_decreasing(std_re[:, j])) for j in range(len(zs))],
    }
    return _report("concentration", cfg,
                   {"replicates": rep_t, "spread": std_t, "envelope": env_t}, summary, [], t0)


def run_approximation_chain(cfg: ExperimentConfig) -> ExperimentReport:
    """B_n versus its blocked approximation versus the independently resampled blocks."""
    t0 = time.perf_counter()
    spec = cfg.spec
    if not cfg.blocks:
        raise ParameterError("approximation chain needs a ladder of (m, M) block parameters")
    threads = resolve_threads(cfg.threads)
    zs = np.array(cfg.z_grid)
    notices = []

    chain_t = Table(["N", "n", "m", "M", "replicate", "re_z", "im_z", "abs_B_minus_Bbar", "abs_Bbar_minus_Bstar"])
    defect_t = Table(["N", "n", "m", "M", "replicate", "trace_defect", "j_block_energy",
                      "trace_Bbar_over_N", "gamma0_hat", "trace_bound_holds", "sup_norm", "sup_bound_holds"])
    summary_t = Table(["N", "n", "m", "M", "mean_trace_defect", "mean_abs_B_minus_Bbar",
                       "mean_abs_Bbar_minus_Bstar", "all_bounds_hold"])
    summary = {"ladders": []}

    for N, n in cfg.sizes:
        ens = matrices.EnsembleConfig(N, n)
        ladder = []
        for m, M in cfg.blocks:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                scheme = matrices.build_block_scheme(N, m, cfg.a_m, M)
            notices.extend(f"N={N}: {w.message}" for w in caught)
            level = matrices.truncation_level(spec, scheme)
            try:
                matrices.check_block_support(spec, scheme, level)
            except UnsupportedModelError as exc:
                notices.append(f"N={N}, m={m}: skipped ({exc})")
                continue
            ladder.append((scheme, level))

        rows_by_step = []
        for scheme, level in ladder:
            J_mask = ~scheme.active_rows()

            def one(r, scheme=scheme, level=level, J_mask=J_mask, ens=ens):
                seed = cfg.base_seed + r
                traj, dm, B = _trajectory_gram(spec, ens, seed)
                bar = matrices.build_blocked_matrix(traj, scheme, ens)
                star = matrices.resample_independent_blocks(
                    spec, scheme, ens, matrices.derive_seeds(seed, 1, TAG_BLOCKS)[0])
                Bbar, Bstar = bar.gram(), star.gram()
                sB, sBar, sStar = (_stieltjes_row(g, zs) for g in (B, Bbar, Bstar))
                X = dm.entries
                diff = X - bar.entries
                defect = float(np.sum(diff * diff) / (ens.N * ens.n))
                j_energy = float(np.sum(X[J_mask] ** 2) / (ens.N * ens.n))
                tr = float(abs(np.trace(Bbar)) / ens.N)
                g0 = float(np.mean(np.square(traj.values[: ens.N * ens.n])))
                sup = float(max(np.max(np.abs(bar.entries)), np.max(np.abs(star.entries))))
                return (np.abs(sB - sBar), np.abs(sBar - sStar),
                        [defect, j_energy, tr, g0, tr <= 4 * g0, sup, sup <= 2 * level])

            rows = _map(one, range(cfg.replicates), threads)
            defects = []
            for r, (d1, d2, stats) in enumerate(rows):
                for j, z in enumerate(zs):
                    chain_t.rows.append([N, n, scheme.m, level, r, z.real, z.imag, float(d1[j]), float(d2[j])])
                defect_t.rows.append([N, n, scheme.m, level, r, *stats])
                defects.append(stats[0])
            ok = all(s[2][4] and s[2][6] for s in rows)
            mean_defect = float(np.mean(defects))
            summary_t.rows.append([N, n, scheme.m, level, mean_defect,
                                   float(np.mean([x[0].mean() for x in rows])),
                                   float(np.mean([x[1].mean() for x in rows])), ok])
            rows_by_step.append((scheme.m, level, mean_defect, ok))

        defects = [x[2] for x in rows_by_step]
        summary["ladders"].append({
            "N": N,
            "n": n,
            "steps": [[m, M] for m, M, _, _ in rows_by_step],
            "mean_trace_defect": defects,
            "defect_nonincreasing": all(b <= a for a, b in zip(defects, defects[1:])),
            "all_bounds_hold": all(x[3] for x in rows_by_step),
        })
    return _report("approximation_chain", cfg,
                   {"chain": chain_t, "defects": defect_t, "summary": summary_t},
                   summary, notices, t0)


EXPERIMENTS = {
    "lsd_convergence": run_lsd_convergence,
    "universality": run_universality,
    "concentration": run_concentration,
    "approximation_chain": run_approximation_chain,
}
