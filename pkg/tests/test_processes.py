import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.linalg import toeplitz

from mixspec import processes as P
from mixspec.errors import DomainError, InsufficientDataError, ParameterError
from mixspec.processes import ProcessSpec

from .conftest import NONCAUSAL_COEFFS


def harris_gamma_quad(a, k, observable="signed_sqrt"):
    """theta^-1 int g^2 (1-|x|)^k |x|^-1 nu(dx), integrated numerically on (0, 1]."""
    g2 = (lambda x: x) if observable == "signed_sqrt" else (lambda x: x * x)
    nu = lambda x: 0.5 * (a + 1) * x**a
    theta = 2 * integrate.quad(lambda x: nu(x) / x, 0, 1)[0]
    val = 2 * integrate.quad(lambda x: g2(x) * (1 - x) ** k * nu(x) / x, 0, 1, limit=200)[0]
    return val / theta


# --- spec validation -------------------------------------------------------

@pytest.mark.parametrize("kw", [
    {"kind": "harris_chain", "a": 0.0},
    {"kind": "harris_chain", "a": -1.0},
    {"kind": "noncausal_window", "window_coeffs": (0.0, 0.0, 0.0)},
    {"kind": "noncausal_window", "window_coeffs": (1.0, 1.0)},
    {"kind": "noncausal_window", "window_coeffs": ()},
    {"kind": "iid_baseline", "sigma2": 0.0},
    {"kind": "doubling_map", "observable": "signed_sqrt"},
    {"kind": "random_walk"},
    {"kind": "harris_chain", "observable": "cube"},
])
def test_invalid_specs_rejected(kw):
    with pytest.raises(ParameterError):
        ProcessSpec(**kw)


def test_spec_json_round_trip(noncausal):
    again = ProcessSpec.from_json(noncausal.to_json())
    assert again == noncausal
    assert set(noncausal.to_dict()) == {"kind", "a", "window_coeffs", "observable", "sigma2"}


def test_spec_json_rejects_unknown_fields():
    with pytest.raises(ParameterError):
        ProcessSpec.from_dict({"kind": "iid_baseline", "colour": "red"})
    with pytest.raises(ParameterError):
        ProcessSpec.from_json("{not json")


# --- sampling --------------------------------------------------------------

def test_zero_length_is_domain_error(harris):
    with pytest.raises(DomainError):
        P.sample_trajectory(harris, 0, 1)


@pytest.mark.parametrize("kind", P.KINDS)
def test_sampling_is_deterministic(kind):
    spec = ProcessSpec(kind=kind, window_coeffs=NONCAUSAL_COEFFS if kind == "noncausal_window" else ())
    t1 = P.sample_trajectory(spec, 3, 11)
    t2 = P.sample_trajectory(spec, 3, 11)
    assert len(t1) == 3
    assert t1.values.tobytes() == t2.values.tobytes()
    assert P.sample_trajectory(spec, 3, 12).values.tobytes() != t1.values.tobytes()


def test_trajectory_is_read_only(harris):
    t = P.sample_trajectory(harris, 10, 1)
    with pytest.raises(ValueError):
        t.values[0] = 0.0


def test_iid_sample_mean_near_zero(iid):
    x = P.sample_trajectory(iid, 10**5, 5).values
    assert abs(x.mean()) < 3 / math.sqrt(10**5)


def test_doubling_shift_is_one_map_step(doubling):
    t = P.sample_trajectory(doubling, 500, 2)
    u = P.doubling_integer_state(t)
    # One application of T: drop the leading digit and append the next one.
    shifted = ((u[:-1] << np.uint64(1)) | t.innovations[64:64 + 499].astype(np.uint64))
    assert np.array_equal(shifted, u[1:])
    # Values are x - 1/2 with x the 64-digit binary fraction.
    x = np.array([sum(int(d) * 2.0 ** -(j + 1) for j, d in enumerate(t.innovations[k:k + 64])) for k in range(3)])
    assert np.allclose(t.values[:3], x - 0.5, atol=1e-15)


def test_harris_marginal_is_stationary_law(harris):
    eps = P.sample_trajectory(harris, 10**5, 3).innovations
    # pi density (a/2)|x|^(a-1): P(|eps| <= t) = t^a, symmetric sign.
    cdf = lambda x: 0.5 + 0.5 * np.sign(x) * np.abs(x) ** harris.a
    assert stats.kstest(eps, cdf).statistic < 0.02


def test_harris_marginal_other_exponent():
    spec = ProcessSpec(kind="harris_chain", a=2.5)
    eps = P.sample_trajectory(spec, 10**5, 8).innovations
    cdf = lambda x: 0.5 + 0.5 * np.sign(x) * np.abs(x) ** 2.5
    assert stats.kstest(eps, cdf).statistic < 0.02


def test_harris_block_chains_stationary(rng):
    chains = P.harris_block_chains(1.0, 20000, 6, rng)
    cdf = lambda x: 0.5 + 0.5 * np.sign(x) * np.abs(x)
    for col in (0, 5):
        assert stats.kstest(chains[:, col], cdf).statistic < 0.02


@pytest.mark.parametrize("kind", ["harris_chain", "noncausal_window", "doubling_map"])
def test_odd_observable_mean_near_zero(kind):
    spec = ProcessSpec(kind=kind, window_coeffs=NONCAUSAL_COEFFS if kind == "noncausal_window" else ())
    t = P.sample_trajectory(spec, 10**5, 21)
    x = t.values
    batches = x[: 10**5 // 20 * 20].reshape(20, -1).mean(axis=1)
    se = batches.std(ddof=1) / math.sqrt(20)
    assert abs(x.mean()) < 3 * se


# --- closed-form autocovariance -------------------------------------------

def test_harris_gamma_values(harris):
    g = P.autocovariance_closed_form(harris, 3).gamma
    assert np.allclose(g, [1 / 2, 1 / 6, 1 / 12, 1 / 20], rtol=1e-13)


@pytest.mark.parametrize("a", [0.3, 1.0, 2.5])
@pytest.mark.parametrize("observable", ["signed_sqrt", "centered_identity"])
def test_harris_gamma_matches_quadrature(a, observable):
    spec = ProcessSpec(kind="harris_chain", a=a, observable=observable)
    g = P.autocovariance_closed_form(spec, 6).gamma
    oracle = [harris_gamma_quad(a, k, observable) for k in range(7)]
    assert np.allclose(g, oracle, rtol=1e-8)


def test_doubling_gamma_one_by_quadrature(doubling):
    oracle = integrate.quad(lambda x: (x - 0.5) * ((2 * x) % 1 - 0.5), 0, 1, points=[0.5])[0]
    assert abs(oracle - 1 / 24) < 1e-12
    assert P.autocovariance_closed_form(doubling, 1).gamma[1] == pytest.approx(oracle, abs=1e-14)


def test_iid_gamma(iid):
    assert np.array_equal(P.autocovariance_closed_form(iid, 4).gamma, [1.0, 0, 0, 0, 0])


@pytest.mark.parametrize("observable", ["signed_sqrt", "centered_identity"])
def test_noncausal_gamma_double_sum(observable):
    spec = ProcessSpec(kind="noncausal_window", window_coeffs=NONCAUSAL_COEFFS, observable=observable)
    g2 = (lambda u: abs(u)) if observable == "signed_sqrt" else (lambda u: u * u)
    var = integrate.quad(lambda u: 0.5 * g2(u), -1, 1)[0]
    c = NONCAUSAL_COEFFS
    oracle = [var * sum(c[i] * c[i + k] for i in range(len(c) - k)) if k < len(c) else 0.0 for k in range(12)]
    assert np.allclose(P.autocovariance_closed_form(spec, 11).gamma, oracle, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("kind", P.KINDS)
def test_gamma_invariants(kind):
    spec = ProcessSpec(kind=kind, window_coeffs=NONCAUSAL_COEFFS if kind == "noncausal_window" else ())
    seq = P.autocovariance_closed_form(spec, 40)
    assert seq.gamma0 > 0
    assert np.all(np.abs(seq.gamma) <= seq.gamma0 + 1e-15)
    assert seq.toeplitz_is_psd()
    assert seq.source == "closed_form" and seq.summable


@pytest.mark.parametrize("kind", P.KINDS)
def test_empirical_gamma_single_run_within_three_se(kind):
    spec = ProcessSpec(kind=kind, window_coeffs=NONCAUSAL_COEFFS if kind == "noncausal_window" else ())
    t = P.sample_trajectory(spec, 2 * 10**5, 0)
    est = P.estimate_autocovariance(t, 10).gamma
    se = P.batch_means_se(t, 10)
    exact = P.autocovariance_closed_form(spec, 10).gamma
    assert np.all(np.abs(est - exact) < 3 * se)


@pytest.mark.parametrize("kind", ["harris_chain", "doubling_map", "noncausal_window"])
def test_empirical_gamma_unbiased_over_seeds(kind):
    # Between-run spread gives an honest standard error even when batch
    # means understate it (Harris products decorrelate slowly).
    spec = ProcessSpec(kind=kind, window_coeffs=NONCAUSAL_COEFFS if kind == "noncausal_window" else ())
    runs = np.array([P.estimate_autocovariance(P.sample_trajectory(spec, 5 * 10**4, 100 + s), 10).gamma
                     for s in range(12)])
    exact = P.autocovariance_closed_form(spec, 10).gamma
    se = runs.std(axis=0, ddof=1) / math.sqrt(runs.shape[0])
    assert np.all(np.abs(runs.mean(axis=0) - exact) < 4 * se + 1e-12)


def test_iid_gamma0_interval(iid):
    g0 = P.estimate_autocovariance(P.sample_trajectory(iid, 10**5, 4), 0).gamma0
    assert 0.97 <= g0 <= 1.03


def test_estimate_zero_trajectory():
    est = P.estimate_autocovariance(np.zeros(100), 5)
    assert np.all(est.gamma == 0) and est.source == "monte_carlo"


def test_estimate_needs_enough_data():
    with pytest.raises(InsufficientDataError):
        P.estimate_autocovariance(np.ones(20), 5)


@given(st.lists(st.floats(-10, 10), min_size=9, max_size=60))
def test_estimate_toeplitz_psd(values):
    x = np.asarray(values)
    K = (len(x) - 1) // 4
    seq = P.estimate_autocovariance(x, K)
    if seq.gamma0 > 1e-6:
        # the 1/L normalisation keeps the Toeplitz estimate PSD
        assert np.min(np.linalg.eigvalsh(toeplitz(seq.gamma))) >= -1e-9 * seq.gamma0


# --- conditional expectation ----------------------------------------------

def test_conditional_expectation_examples():
    assert P.conditional_expectation_harris(0.25, 2) == pytest.approx(0.28125, abs=1e-15)
    for x0 in (-0.7, 0.0, 0.3, 1.0):
        assert P.conditional_expectation_harris(x0, 0) == pytest.approx(math.copysign(math.sqrt(abs(x0)), x0))
    vals = [P.conditional_expectation_harris(0.5, k) for k in range(60)]
    assert all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-15


def test_conditional_expectation_domain():
    with pytest.raises(DomainError):
        P.conditional_expectation_harris(1.5, 1)


def test_conditional_expectation_by_simulation():
    # Run many chains from x0 and average g(eps_k).
    rng = np.random.default_rng(3)
    x0, k, n = -0.3, 3, 200_000
    x = np.full(n, x0)
    for _ in range(k):
        jump = rng.random(n) < np.abs(x)
        fresh = rng.random(n) ** 0.5 * np.where(rng.random(n) < 0.5, -1.0, 1.0)
        x = np.where(jump, fresh, x)
    mc = np.sign(x) * np.sqrt(np.abs(x))
    se = mc.std() / math.sqrt(n)
    assert abs(mc.mean() - P.conditional_expectation_harris(x0, k)) < 4 * se


# --- beta decay ------------------------------------------------------------

def test_beta_decay_classes(harris, iid, doubling):
    h = P.beta_decay(harris, constant=2.0)
    assert h.bound(10) == pytest.approx(0.2)
    assert P.beta_decay(iid).bound(np.arange(1, 5)).tolist() == [0, 0, 0, 0]
    d = P.beta_decay(doubling)
    for n in (1, 3, 7):
        assert d.bound(2 * n) / d.bound(n) == pytest.approx(2.0**-n, rel=1e-12)
    for model in (h, d, P.beta_decay(iid)):
        b = model.bound(np.arange(0, 200))
        assert b[0] == 1.0 and np.all(np.diff(b) <= 0)


def test_cond_beta_verdicts():
    assert P.check_cond_beta(P.BetaDecayModel("exponential", math.log(2)), 1.5, 10**4).converged
    assert P.check_cond_beta(P.BetaDecayModel("polynomial", 1.0), 1.5, 10**6).converged
    slow = P.check_cond_beta(P.BetaDecayModel("polynomial", 0.3), 1.5, 10**6)
    assert not slow.converged
    ps = slow.partial_sums
    assert ps[-1] > 2 * ps[10**5 - 1]


def test_cond_beta_alpha_must_exceed_one():
    with pytest.raises(ParameterError):
        P.check_cond_beta(P.BetaDecayModel("zero"), 1.0, 100)


# --- csv -------------------------------------------------------------------

def test_trajectory_csv_round_trip(tmp_path, noncausal):
    t = P.sample_trajectory(noncausal, 50, 9)
    path = tmp_path / "t.csv"
    P.write_trajectory_csv(t, path)
    assert path.read_text().splitlines()[0] == "x"
    assert np.array_equal(P.read_trajectory_csv(path), t.values)
