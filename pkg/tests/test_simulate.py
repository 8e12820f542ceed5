import numpy as np
import pytest

from fiberfit import (
    CoreGeometry,
    GgdParams,
    LognParams,
    MixtureParams,
    SimSpec,
    density_v,
    density_w_component,
    density_x_mixture,
    ggd_pdf,
    prob_uncut,
    sample_v,
    sample_w,
    sample_x,
    sample_y,
)
from fiberfit.scales import k_theta
from conftest import MIX_SIM, cdf_interpolator

KS_CRIT_1PCT = 1.6276  # asymptotic Kolmogorov quantile at alpha = 0.01


def ks_stat(sample, cdf):
    n = sample.size
    s = np.sort(sample)
    u = cdf(s)
    ecdf_hi = np.arange(1, n + 1) / n
    ecdf_lo = np.arange(0, n) / n
    return max(np.abs(ecdf_hi - u).max(), np.abs(ecdf_lo - u).max())


def test_spec_validation(geom25):
    p = GgdParams(2.4, 3.3, 1.5)
    with pytest.raises(ValueError):
        SimSpec("Q", p, geom25, 10)
    with pytest.raises(ValueError):
        SimSpec("Y", p, geom25, 0)
    with pytest.raises(ValueError):
        SimSpec("V", MIX_SIM, geom25, 10)
    with pytest.raises(ValueError):
        SimSpec("X", p, geom25, 10)


def test_sample_y_gamma_reduction(geom25):
    # d = 1 turns the draw into a plain gamma with mean b * k
    p = GgdParams(2.0, 1.0, 3.0)
    s = sample_y(SimSpec("Y", p, geom25, 100_000, seed=50))
    se = s.std() / np.sqrt(s.size)
    assert abs(s.mean() - 6.0) < 3.0 * se


def test_sample_y_component_choice(geom25):
    only_fines = MixtureParams(1.0, GgdParams(0.1, 1.5, 2.0), GgdParams(2.0, 2.8, 2.2))
    s = sample_y(SimSpec("Y", only_fines, geom25, 5000, seed=51))
    assert s.max() < 1.5  # fines alone are short


def test_sample_y_ks(geom25):
    p = GgdParams(2.4, 3.3, 1.5)
    s = sample_y(SimSpec("Y", p, geom25, 10_000, seed=52))
    cdf = cdf_interpolator(lambda y: ggd_pdf(y, p), 0.0, 12.0)
    assert ks_stat(s, cdf) < KS_CRIT_1PCT / np.sqrt(s.size)


def test_sample_w_mean_and_ks(geom25):
    p = GgdParams(2.4, 3.3, 1.5)
    s = sample_w(SimSpec("W", p, geom25, 100_000, seed=53))
    se = s.std() / np.sqrt(s.size)
    assert abs(s.mean() - 2.4536) < 3.0 * se
    sub = s[:10_000]
    cdf = cdf_interpolator(lambda w: density_w_component(w, p, geom25), 0.0, 12.0)
    assert ks_stat(sub, cdf) < KS_CRIT_1PCT / np.sqrt(sub.size)


def test_sample_v_support_and_ks(geom25):
    p = GgdParams(2.4, 3.3, 1.5)
    s = sample_v(SimSpec("V", p, geom25, 10_000, seed=54))
    assert s.min() > 0.0 and s.max() < 5.0
    cdf = cdf_interpolator(lambda v: density_v(v, p, geom25), 0.0, None, x_scale_r=2.5)
    assert ks_stat(s, cdf) < KS_CRIT_1PCT / np.sqrt(s.size)


def test_sample_v_acceptance_matches_k_theta(geom25):
    # thinning acceptance frequency estimates k_theta
    p = GgdParams(2.4, 3.3, 1.5)
    rng = np.random.default_rng(55)
    y = 2.4 * rng.gamma(1.5, 1.0, 200_000) ** (1 / 3.3)
    acc = (rng.random(y.size) < prob_uncut(y, geom25)).mean()
    kt = k_theta(p, geom25)
    se = np.sqrt(kt * (1 - kt) / y.size)
    assert abs(acc - kt) < 3.0 * se


def test_sample_x_support_and_ks(geom6):
    s = sample_x(SimSpec("X", MIX_SIM, geom6, 10_000, seed=56))
    assert s.min() > 0.0 and s.max() < 12.0
    cdf = cdf_interpolator(lambda x: density_x_mixture(x, MIX_SIM, geom6), 0.0, None, x_scale_r=6.0)
    assert ks_stat(s, cdf) < KS_CRIT_1PCT / np.sqrt(s.size)


def test_sample_x_long_ancestors_always_cut(geom25):
    # true lengths beyond the core diameter can never be observed whole
    fibers_only = MixtureParams(0.0, GgdParams(0.1, 1.5, 2.0), GgdParams(4.0, 3.0, 2.0))
    s = sample_x(SimSpec("X", fibers_only, geom25, 20_000, seed=57))
    assert s.max() < 5.0


def test_sample_x_mean_matches_density_mean(geom6):
    s = sample_x(SimSpec("X", MIX_SIM, geom6, 50_000, seed=58))
    from conftest import x_scale_integral_oracle

    want = x_scale_integral_oracle(
        lambda x: x * density_x_mixture(x, MIX_SIM, geom6), 6.0
    )
    se = s.std() / np.sqrt(s.size)
    assert abs(s.mean() - want) < 4.0 * se


def test_determinism_and_distinct_seeds(geom25):
    p = GgdParams(2.4, 3.3, 1.5)
    a = sample_v(SimSpec("V", p, geom25, 500, seed=60))
    b = sample_v(SimSpec("V", p, geom25, 500, seed=60))
    c = sample_v(SimSpec("V", p, geom25, 500, seed=61))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_lognormal_sampling_moments(geom25):
    p = LognParams(0.3, 0.4)
    s = sample_y(SimSpec("Y", p, geom25, 100_000, seed=62))
    want = np.exp(0.3 + 0.5 * 0.4**2)
    se = s.std() / np.sqrt(s.size)
    assert abs(s.mean() - want) < 3.0 * se


def test_rejection_acceptance_guard():
    # absurd geometry: nearly zero acceptance for the W weight
    p = LognParams(8.0, 0.1)  # lengths near 3000
    tiny = CoreGeometry(1e-4)
    with pytest.raises(RuntimeError):
        sample_w(SimSpec("W", p, tiny, 50, seed=63))
