import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixspec import lsd
from mixspec import matrices as M
from mixspec import processes as P
from mixspec.errors import DomainError, ParameterError, SolverError, TruncationOrderError, UnsupportedModelError
from mixspec.processes import AutocovarianceSeq, ProcessSpec
from mixspec.spectral import eig_sym, empirical_stieltjes

from .conftest import NONCAUSAL_COEFFS
from .oracles import mp_cdf, mp_density, mp_stieltjes_by_quadrature


def harris_f():
    return lsd.spectral_density(P.autocovariance_closed_form(ProcessSpec(kind="harris_chain"), 10**4))


Z_GRID = np.array([complex(u, v) for u in (-1.0, 0.2, 1.0, 2.5, 5.0) for v in (0.1, 0.5, 1.0, 3.0)])


# --- spectral density ------------------------------------------------------

def test_iid_density_constant():
    f = lsd.spectral_density(P.autocovariance_closed_form(ProcessSpec(kind="iid_baseline"), 5))
    assert np.allclose(f(np.linspace(0, 2 * math.pi, 17)), 1 / (2 * math.pi), atol=1e-15)


def test_doubling_density_geometric_series():
    f = lsd.spectral_density(P.autocovariance_closed_form(ProcessSpec(kind="doubling_map"), 60))
    assert abs(f(0.0) - 1 / (8 * math.pi)) < 1e-10
    lam = np.linspace(0, 2 * math.pi, 50)
    r = 0.5
    oracle = (1 / (24 * math.pi)) * (1 - r * r) / (1 - 2 * r * np.cos(lam) + r * r)
    assert np.allclose(f(lam), oracle, atol=1e-15)


def test_harris_density_values():
    f = harris_f()
    assert abs(f(0.0) - 3 / (4 * math.pi)) < 1e-4
    # alternating sum: sum_k (-1)^k / ((k+1)(k+2)) = 2 log 2 - 1
    assert abs(f(math.pi) - (4 * math.log(2) - 2.5) / (2 * math.pi)) < 1e-7


@pytest.mark.parametrize("gamma", [
    P.autocovariance_closed_form(ProcessSpec(kind="harris_chain", a=2.0), 500).gamma,
    P.autocovariance_closed_form(ProcessSpec(kind="noncausal_window", window_coeffs=NONCAUSAL_COEFFS), 20).gamma,
])
def test_density_invariants(gamma):
    f = lsd.SpectralDensityFn(AutocovarianceSeq(gamma, "closed_form"))
    lam = np.linspace(0.01, 3.1, 40)
    assert np.allclose(f(lam), f(2 * math.pi - lam), atol=1e-14)
    Q = 4096
    assert abs(np.mean(f.on_grid(Q)) * 2 * math.pi - gamma[0]) < 1e-6
    assert np.allclose(f.on_grid(64), f(2 * math.pi * np.arange(64) / 64), atol=1e-12)
    assert np.all(f.on_grid(Q) >= 0)


def test_negative_truncation_rejected():
    with pytest.raises(TruncationOrderError):
        lsd.SpectralDensityFn(AutocovarianceSeq(np.array([1.0, 0.9]), "closed_form"))


def test_non_summable_rejected():
    with pytest.raises(UnsupportedModelError):
        lsd.spectral_density(AutocovarianceSeq(np.array([1.0]), "closed_form", summable=False))


@given(st.lists(st.floats(-0.3, 0.3), min_size=1, max_size=6), st.integers(4, 64))
def test_quadrature_nodes_reproduce_grid_mean(tail, Q):
    gamma = np.array([2.0] + tail)
    try:
        f = lsd.SpectralDensityFn(AutocovarianceSeq(gamma, "closed_form"))
    except TruncationOrderError:
        return
    w, p = lsd.quadrature_nodes(f, Q)
    full = 2 * math.pi * f.on_grid(Q)
    assert p.sum() == pytest.approx(1.0)
    for g in (lambda x: x, lambda x: 1 / (1 + x * (0.3 + 1j))):
        assert np.sum(p * g(w)) == pytest.approx(np.mean(g(full)), rel=1e-12, abs=1e-14)


# --- solver ----------------------------------------------------------------

def test_zero_process_gives_point_mass():
    f = lsd.SpectralDensityFn(AutocovarianceSeq(np.array([0.0]), "closed_form"))
    sol = lsd.solve_fixed_point(f, 0.7, Z_GRID)
    assert np.allclose(sol.S_under, -1 / Z_GRID, rtol=1e-14)
    assert np.allclose(sol.S, -1 / Z_GRID, rtol=1e-14)


@pytest.mark.parametrize("c,sigma2", [(0.5, 1.0), (1.0, 1.0), (2.0, 1.0), (1.0, 2.0)])
def test_mp_reference_against_quadrature(c, sigma2):
    for z in (0.5 + 0.2j, 2 + 0.1j, -1 + 1j, 3 + 2j):
        assert lsd.mp_reference(z, c, sigma2) == pytest.approx(mp_stieltjes_by_quadrature(z, c, sigma2), abs=1e-7)


def test_mp_reference_golden_ratio():
    assert abs(lsd.mp_reference(-1 + 1e-6j, 1.0, 1.0) - (math.sqrt(5) - 1) / 2) < 1e-5


def test_mp_reference_domain():
    with pytest.raises(DomainError):
        lsd.mp_reference(1.0 + 0j, 1.0)


@pytest.mark.parametrize("c,sigma2", [(0.5, 1.0), (1.0, 1.0), (2.0, 1.0), (1.0, 2.0), (0.1, 3.0)])
def test_solver_matches_mp(c, sigma2):
    f = lsd.constant_density(sigma2)
    sol = lsd.solve_fixed_point(f, c, Z_GRID)
    assert np.max(np.abs(sol.S - lsd.mp_reference(Z_GRID, c, sigma2))) <= 1e-6


def test_solver_near_axis_golden_ratio():
    sol = lsd.solve_fixed_point(lsd.constant_density(), 1.0, -1 + 1e-6j)
    assert abs(sol.S[0] - (math.sqrt(5) - 1) / 2) < 1e-4


@pytest.mark.parametrize("spec", [
    ProcessSpec(kind="harris_chain"),
    ProcessSpec(kind="doubling_map"),
    ProcessSpec(kind="noncausal_window", window_coeffs=NONCAUSAL_COEFFS),
])
@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_solution_invariants(spec, c):
    f = lsd.spectral_density(P.autocovariance_closed_form(spec, 2000))
    z = np.concatenate([Z_GRID, np.linspace(-0.5, 6, 15) + 1e-3j])
    sol = lsd.solve_fixed_point(f, c, z)
    assert np.all(sol.S.imag > 0) and np.all(sol.S_under.imag > 0)
    assert np.all(np.abs(sol.S_under) <= 1 / z.imag * (1 + 1e-9))
    assert np.allclose(sol.S_under, -(1 - c) / z + c * sol.S, rtol=1e-12, atol=1e-12)
    res = lsd.fixed_point_residual(f, c, z, sol.S_under)
    assert np.all(res <= 1e-10 * (1 + np.abs(z)))
    assert np.all(sol.residual <= lsd.DEFAULT_TOL * (1 + np.abs(z)))


@pytest.mark.parametrize("spec", [ProcessSpec(kind="harris_chain"), ProcessSpec(kind="iid_baseline", sigma2=3.0)])
def test_large_z_expansion(spec):
    gamma = P.autocovariance_closed_form(spec, 10**4)
    f = lsd.spectral_density(gamma)
    z = 1e3j
    S = lsd.solve_fixed_point(f, 1.0, z).S[0]
    assert abs(S + 1 / z) <= 10 * gamma.gamma0 / abs(z) ** 2
    assert 0.99 <= (-1j * 1e3 * S).real <= 1.01


@pytest.mark.parametrize("spec", [
    ProcessSpec(kind="doubling_map"),
    ProcessSpec(kind="noncausal_window", window_coeffs=NONCAUSAL_COEFFS),
])
def test_grid_refinement_stability(spec):
    f = lsd.spectral_density(P.autocovariance_closed_form(spec, 60))
    s1 = lsd.solve_fixed_point(f, 1.0, Z_GRID, Q=2048).S
    s2 = lsd.solve_fixed_point(f, 1.0, Z_GRID, Q=4096).S
    assert np.max(np.abs(s1 - s2)) < 1e-8


def test_solver_matches_large_gaussian_matrices():
    spec = ProcessSpec(kind="harris_chain")
    gamma = P.autocovariance_closed_form(spec, 800)
    f = harris_f()
    zs = np.array([1j, 0.5 + 0.5j, 2 + 0.3j])
    S = lsd.solve_fixed_point(f, 1.0, zs).S
    G = M.build_Gn(gamma, M.EnsembleConfig(800, 800), 3)
    emp = empirical_stieltjes(eig_sym(G, psd=True), zs)
    assert np.max(np.abs(S - emp)) < 0.02


def test_warm_start_agrees_with_cold():
    f = harris_f()
    z = np.linspace(0.05, 3, 40) + 0.01j
    cold = lsd.solve_fixed_point(f, 1.0, z)
    warm = lsd.solve_fixed_point(f, 1.0, z, warm_start=True)
    assert np.allclose(cold.S, warm.S, atol=1e-9)


def test_solver_errors():
    f = lsd.constant_density()
    with pytest.raises(DomainError):
        lsd.solve_fixed_point(f, 1.0, 1.0 + 0j)
    with pytest.raises(ParameterError):
        lsd.solve_fixed_point(f, 0.0, 1j)
    with pytest.raises(SolverError) as info:
        lsd.solve_fixed_point(f, 1.0, 2 + 1e-3j, max_iter=2)
    assert info.value.trace and info.value.z == 2 + 1e-3j


def test_solution_csv(tmp_path):
    sol = lsd.solve_fixed_point(lsd.constant_density(), 1.0, [1j, 2 + 1j])
    sol.write_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "re_z,im_z,re_S,im_S,re_Su,im_Su,iters,residual"
    assert len(lines) == 3 and "np." not in lines[1]
    assert float(lines[2].split(",")[0]) == 2.0


# --- density and CDF -------------------------------------------------------

def test_mp_density_values():
    d = lsd.density_from_stieltjes(lsd.constant_density(), 1.0, np.array([2.0, 5.0]))
    assert mp_density(2.0, 1.0) == pytest.approx(1 / (2 * math.pi))
    assert abs(d.density[0] - mp_density(2.0, 1.0)) < 0.01
    assert d.density[1] < 5e-3


@pytest.mark.parametrize("c", [0.25, 0.5, 1.0, 2.0, 4.0])
def test_mp_density_support_and_mass(c):
    d = lsd.density_from_stieltjes(lsd.constant_density(), c)
    tol = 0.05 if c > 1 else 0.02
    assert abs(d.mass - 1) <= tol
    assert np.all(d.density >= 0)
    b = (1 + math.sqrt(c)) ** 2
    assert np.all(d.density[d.x > b + 0.05] < 5e-3)
    if c < 1:
        a = (1 - math.sqrt(c)) ** 2
        assert np.all(d.density[(d.x < a - 0.05) & (d.x > 0.05)] < 5e-3)


def test_zero_process_density_is_poisson_kernel():
    f = lsd.SpectralDensityFn(AutocovarianceSeq(np.array([0.0]), "closed_form"))
    x = np.linspace(-0.05, 0.05, 41)
    v = 2e-3
    d = lsd.density_from_stieltjes(f, 1.0, x, v=v)
    assert np.allclose(d.density, v / (x * x + v * v) / math.pi, rtol=1e-10)


def test_density_height_range():
    with pytest.raises(DomainError):
        lsd.density_from_stieltjes(lsd.constant_density(), 1.0, v=0.5)


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_limit_cdf_matches_mp(c):
    F = lsd.limit_cdf(lsd.constant_density(), c)
    x = np.linspace(-0.2, (1 + math.sqrt(c)) ** 2 + 0.2, 60)
    oracle = np.array([mp_cdf(t, c) for t in x])
    assert np.max(np.abs(F(x) - oracle)) < 1e-3
    assert abs(F.continuous_mass - min(1.0, 1 / c)) < 1e-3
    assert F(-1.0) == 0.0 and F(100.0) == pytest.approx(1.0)


def test_limit_cdf_close_to_smoothed_cdf_away_from_zero():
    f = harris_f()
    F = lsd.limit_cdf(f, 0.5)
    G = lsd.density_from_stieltjes(f, 0.5).cdf()
    x = np.linspace(0.3, 3.5, 30)
    assert np.max(np.abs(F(x) - G(x))) < 5e-3


def test_density_csv(tmp_path):
    d = lsd.density_from_stieltjes(lsd.constant_density(), 1.0, np.array([1.0, 2.0]))
    d.write_csv(tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "x,density"
