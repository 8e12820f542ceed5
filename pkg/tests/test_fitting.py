import numpy as np
import pytest

from fiberfit import (
    CoreGeometry,
    Dataset,
    FitConfig,
    GgdParams,
    LognParams,
    MixtureParams,
    ModelSpec,
    SimSpec,
    covariance_original_scale,
    decode,
    fit,
    initialize,
    init_loglik,
    micro_loglik,
    sample_v,
    sample_x,
)
from conftest import MIX_SIM

GGD_DEFAULT_START = (0.5, 0.01, 0.1, 10.0, 2.0, 2.0, 2.0)


@pytest.fixture(scope="module")
def micro_fit():
    geom = CoreGeometry(2.5)
    data = Dataset(sample_v(SimSpec("V", GgdParams(2.4, 3.3, 1.5), geom, 300, seed=7)), "V")
    model = ModelSpec("ggamma", "microscopy", geom)
    return fit(data, model, FitConfig(n_starts=3, seed=1)), data, model


def test_model_spec_validation():
    geom = CoreGeometry(2.5)
    with pytest.raises(ValueError):
        ModelSpec("weibull", "ofa", geom)
    with pytest.raises(ValueError):
        ModelSpec("ggamma", "sem", geom)
    m = ModelSpec("lognorm", "ofa", geom)
    assert m.param_names == ("eps", "mu1", "sigma1", "mu2", "sigma2")
    assert m.n_params == 5


def test_transform_round_trip():
    m = ModelSpec("ggamma", "ofa", CoreGeometry(6.0))
    orig = np.array([0.3, 0.1, 1.5, 2.0, 2.0, 2.8, 2.2])
    assert np.allclose(m.from_theta(m.to_theta(orig)), orig, rtol=1e-14)
    chain = m.chain_vector(m.to_theta(orig))
    assert chain[0] == pytest.approx(0.3 - 0.09)
    assert np.allclose(chain[1:], orig[1:], rtol=1e-12)


def test_chain_vector_fixtures():
    m = ModelSpec("lognorm", "ofa", CoreGeometry(6.0))
    theta = m.to_theta([0.5, -1.0, 0.7, 0.9, 0.25])
    chain = m.chain_vector(theta)
    assert chain[0] == pytest.approx(0.25)  # eps - eps^2 at 1/2
    assert np.allclose(chain, [0.25, 1.0, 0.7, 1.0, 0.25], rtol=1e-12)


def test_fit_config_validation():
    with pytest.raises(ValueError):
        FitConfig(grad_mode="auto")
    with pytest.raises(ValueError):
        FitConfig(n_starts=0)
    with pytest.raises(ValueError):
        FitConfig(fixed_mask=(True, False, False))  # no par_start


def test_initialize_default_start_decodes():
    m = ModelSpec("ggamma", "ofa", CoreGeometry(6.0))
    theta0 = np.array([0.0, np.log(0.01), np.log(0.1), np.log(10.0)] + [np.log(2.0)] * 3)
    assert np.allclose(m.from_theta(theta0), GGD_DEFAULT_START, rtol=1e-12)


def test_initialize_returns_par_start_unchanged():
    m = ModelSpec("ggamma", "ofa", CoreGeometry(6.0))
    data = Dataset(np.array([0.5, 1.0, 2.0]), "X")
    start = (0.4, 0.2, 1.0, 2.0, 2.0, 2.0, 2.0)
    pv = initialize(data, m, FitConfig(par_start=start))
    assert np.allclose(m.from_theta(np.array(pv.values)), start, rtol=1e-12)


def test_initialize_recovers_separation():
    geom = CoreGeometry(6.0)
    data = Dataset(sample_x(SimSpec("X", MIX_SIM, geom, 2000, seed=21)), "X")
    model = ModelSpec("ggamma", "ofa", geom)
    pv = initialize(data, model, FitConfig())
    eps_hat = decode(pv).eps
    assert abs(eps_hat - MIX_SIM.eps) < 0.15
    # initialization maximizes the uncensored problem: no worse than the seed
    theta0 = model.to_theta(np.array(GGD_DEFAULT_START))
    l_seed = init_loglik(model.params_from_original(np.array(GGD_DEFAULT_START)), data).loglik
    l_init = init_loglik(decode(pv), data).loglik
    assert l_init >= l_seed - 1e-9


def test_micro_fit_recovers_truth(micro_fit):
    res, data, model = micro_fit
    assert res.convergence == "success"
    truth = np.array([2.4, 3.3, 1.5])
    assert np.all(np.abs(res.theta_tilde - truth) < 4.0 * res.se_tilde)
    ll_truth = micro_loglik(GgdParams(2.4, 3.3, 1.5), data, model.geom).loglik
    assert res.loglik >= ll_truth
    assert res.starts_tried == 3
    assert res.cov_theta.shape == (3, 3)


def test_fit_rejects_scale_mismatch(micro_fit):
    _, data, model = micro_fit
    with pytest.raises(ValueError):
        fit(Dataset(data.values, "X"), model, FitConfig())


def test_fit_deterministic(micro_fit):
    res, data, model = micro_fit
    res2 = fit(data, model, FitConfig(n_starts=3, seed=1))
    assert res2.loglik == res.loglik
    assert np.array_equal(res2.theta_tilde, res.theta_tilde)
    assert np.array_equal(res2.cov_tilde, res.cov_tilde)


def test_fit_monotone_vs_initialization(micro_fit):
    res, data, model = micro_fit
    pv = initialize(data, model, FitConfig(n_starts=3, seed=1))
    l_init = micro_loglik(decode(pv), data, model.geom).loglik
    assert res.loglik >= l_init - 1e-9


def test_fit_respects_bounds(micro_fit):
    _, data, model = micro_fit
    cfg = FitConfig(lower=(1.0, 1.0, 1.0), upper=(3.0, 3.0, 1.2), n_starts=2, seed=0)
    res = fit(data, model, cfg)
    assert np.all(res.theta_tilde >= 1.0 - 1e-12)
    assert np.all(res.theta_tilde <= np.array([3.0, 3.0, 1.2]) + 1e-12)


def test_fixed_mask_pins_values():
    geom = CoreGeometry(6.0)
    data = Dataset(sample_x(SimSpec("X", MIX_SIM, geom, 500, seed=22)), "X")
    model = ModelSpec("ggamma", "ofa", geom)
    cfg = FitConfig(
        par_start=(0.5, 0.01, 1.0, 1.0, 2.0, 1.0, 1.0),
        fixed_mask=(False, False, True, False, False, True, False),
        n_starts=2,
        seed=2,
    )
    res = fit(data, model, cfg)
    assert res.theta_tilde[2] == 1.0 and res.theta_tilde[5] == 1.0
    assert res.theta_hat.fixed_mask == (False, False, True, False, False, True, False)
    # fixed coordinates carry no uncertainty
    assert res.cov_theta[2, 2] == 0.0 and res.cov_tilde[5, 5] == 0.0


def test_all_fixed_evaluates_without_optimizing():
    geom = CoreGeometry(2.5)
    data = Dataset(sample_v(SimSpec("V", GgdParams(2.4, 3.3, 1.5), geom, 100, seed=3)), "V")
    model = ModelSpec("ggamma", "microscopy", geom)
    cfg = FitConfig(par_start=(2.4, 3.3, 1.5), fixed_mask=(True, True, True))
    res = fit(data, model, cfg)
    assert res.convergence == "success"
    assert np.array_equal(res.theta_tilde, [2.4, 3.3, 1.5])
    # order-0 and order-2 evaluations may refine quadrature differently
    ref = micro_loglik(GgdParams(2.4, 3.3, 1.5), data, geom).loglik
    assert res.loglik == pytest.approx(ref, abs=1e-9)
    assert res.starts_tried == 0


def test_eps_fixed_at_zero_boundary():
    # a proportion pinned at 0 makes the fines block unidentifiable, so the
    # sensible call fixes the fines parameters as well
    geom = CoreGeometry(6.0)
    fibers_only = MixtureParams(0.0, MIX_SIM.fines, MIX_SIM.fibers)
    x = sample_x(SimSpec("X", fibers_only, geom, 300, seed=23))
    model = ModelSpec("ggamma", "ofa", geom)
    cfg = FitConfig(
        par_start=(0.0, 0.1, 1.5, 2.0, 2.0, 2.8, 2.2),
        fixed_mask=(True, True, True, True, False, False, False),
        n_starts=2,
        seed=4,
    )
    res = fit(Dataset(x, "X"), model, cfg)
    assert res.theta_tilde[0] == 0.0
    assert res.convergence == "success"
    truth = np.array([2.0, 2.8, 2.2])
    assert np.all(np.abs(res.theta_tilde[4:] - truth) < 4.0 * res.se_tilde[4:])
    # leaving the dead fines block free is reported, not papered over
    loose = FitConfig(
        par_start=(0.0, 0.1, 1.5, 2.0, 2.0, 2.8, 2.2),
        fixed_mask=(True, False, False, False, False, False, False),
        n_starts=1,
        seed=4,
    )
    res2 = fit(Dataset(x, "X"), model, loose)
    assert res2.convergence == "singular_hessian"
    assert res2.cov_tilde is None
    with pytest.raises(ValueError):
        covariance_original_scale(res2)


def test_objective_never_leaves_box(micro_fit):
    _, data, model = micro_fit
    seen = []
    import fiberfit.likelihood as lk

    original = lk.micro_loglik

    def spy(theta, *args, **kwargs):
        seen.append(theta)
        return original(theta, *args, **kwargs)

    import fiberfit.fitting as ft

    lo = np.array([1.5, 2.0, 0.5])
    hi = np.array([3.5, 5.0, 3.0])
    old = ft.micro_loglik
    ft.micro_loglik = spy
    try:
        fit(data, model, FitConfig(lower=tuple(lo), upper=tuple(hi), n_starts=2, seed=5))
    finally:
        ft.micro_loglik = old
    assert seen
    for params in seen:
        vals = np.array([params.b, params.d, params.k])
        assert np.all(vals >= lo - 1e-9) and np.all(vals <= hi + 1e-9)


def test_finite_difference_mode_agrees(micro_fit):
    _, data, model = micro_fit
    res_fd = fit(data, model, FitConfig(n_starts=1, seed=1, grad_mode="finite_difference"))
    res_an = fit(data, model, FitConfig(n_starts=1, seed=1))
    assert res_fd.loglik == pytest.approx(res_an.loglik, abs=1e-4)


def test_covariance_original_scale_chain(micro_fit):
    res, _, _ = micro_fit
    cov = covariance_original_scale(res)
    assert np.allclose(cov, res.cov_tilde, rtol=1e-12)
    assert np.all(np.diag(cov) >= 0.0)
    eig = np.linalg.eigvalsh(cov)
    assert eig.min() > -1e-10 * eig.max()


def test_se_matches_fisher_information_toy():
    # lognormal microscopy with sigma fixed and a huge core radius reduces to
    # a gaussian location problem: Var(mu-hat) = sigma^2 / n
    rng = np.random.default_rng(30)
    sigma = 0.35
    n = 4000
    geom = CoreGeometry(1e4)
    v = np.exp(0.9 + sigma * rng.standard_normal(n))
    data = Dataset(v, "V")
    model = ModelSpec("lognorm", "microscopy", geom)
    cfg = FitConfig(par_start=(0.5, sigma), fixed_mask=(False, True), n_starts=1, seed=0)
    res = fit(data, model, cfg)
    assert res.se_tilde[0] == pytest.approx(sigma / np.sqrt(n), rel=0.05)


def test_lognorm_ofa_fit_runs():
    geom = CoreGeometry(6.0)
    truth = MixtureParams(0.3, LognParams(-2.0, 0.5), LognParams(0.9, 0.25))
    data = Dataset(sample_x(SimSpec("X", truth, geom, 1500, seed=31)), "X")
    model = ModelSpec("lognorm", "ofa", geom)
    res = fit(data, model, FitConfig(n_starts=2, seed=6))
    assert res.convergence == "success"
    assert abs(res.theta_tilde[0] - 0.3) < 4.0 * res.se_tilde[0] + 0.05
    assert abs(res.theta_tilde[3] - 0.9) < 4.0 * res.se_tilde[3] + 0.05
