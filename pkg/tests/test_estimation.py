import math

import numpy as np
import pytest

import oracles
from gasinar.distributions import NegativeBinomial, Poisson
from gasinar.estimation import (
    FitOptions,
    fit,
    from_unconstrained,
    hessian_std_errors,
    lr_pvalue,
    lr_test,
    natural_std_errors,
    param_names,
    std_errors,
    to_unconstrained,
)
from gasinar.exceptions import InputError, NoSurvivalInformationError, NotNestedError
from gasinar.filter import GasParams
from gasinar.models import MODEL_KINDS, GasInar, RcInar, StaticInar, loglik_sum
from gasinar.simulation import simulate

P5 = Poisson(5.0)
TABLE1 = GasInar(GasParams.from_mean_logit(-0.5, 0.9, 0.15, Poisson(6.0)))


def test_beta_transform():
    assert to_unconstrained(GasInar(GasParams(0.0, 0.0, 0.0, P5)))[1] == 0.0
    assert to_unconstrained(GasInar(GasParams(0.0, 0.9, 0.0, P5)))[1] == pytest.approx(1.4722, abs=1e-4)


def test_negbin_transform():
    v = to_unconstrained(StaticInar(0.5, NegativeBinomial(6.0, 15.0)))
    assert v[1:] == pytest.approx([math.log(6.0), math.log(9.0)])
    back = from_unconstrained("inar-negbin", v)
    assert back.error.mean == pytest.approx(6.0, rel=1e-14)
    assert back.error.variance == pytest.approx(15.0, rel=1e-14)


@pytest.mark.parametrize("model", [
    GasInar(GasParams(-0.3, 0.85, 0.2, P5)),
    GasInar(GasParams(0.4, -0.5, -0.1, NegativeBinomial(3.0, 7.0))),
    StaticInar(0.37, P5),
    StaticInar(0.9, NegativeBinomial(6.0, 15.0)),
    RcInar(-1.0, 0.1, P5),
    RcInar(0.5, -0.2, NegativeBinomial(2.0, 2.5)),
])
def test_round_trip(model):
    back = from_unconstrained(type(model) is GasInar and f"gas-{model.error.family}"
                              or (f"inar-{model.error.family}" if isinstance(model, StaticInar)
                                  else f"rc-{model.error.family}"), to_unconstrained(model))
    a = np.array([getattr(model, "alpha", 0.0), model.error.mean, model.error.variance])
    b = np.array([getattr(back, "alpha", 0.0), back.error.mean, back.error.variance])
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
    if isinstance(model, GasInar):
        for f in ("omega", "beta", "tau"):
            assert getattr(back.params, f) == pytest.approx(getattr(model.params, f), rel=1e-12, abs=1e-12)


def test_param_names():
    assert param_names("gas-negbin") == ["omega", "beta", "tau", "mu", "sigma2"]
    assert param_names("rc-poisson") == ["omega", "tau", "mu"]
    with pytest.raises(ValueError):
        param_names("garch")


def test_static_fit_matches_grid_search_oracle():
    y = simulate(StaticInar(0.5, P5), 300, 21).series
    ll, a, mu = oracles.brute_force_static_mle(
        y.tolist(), np.round(np.arange(0.3, 0.71, 0.02), 2), np.round(np.arange(3.5, 6.51, 0.1), 2))
    res = fit("inar-poisson", y)
    assert res.loglik_sum >= ll - 1e-9
    assert abs(res.params["alpha"] - a) <= 0.02
    assert abs(res.params["mu"] - mu) <= 0.1


def test_static_consistency():
    y = simulate(StaticInar(0.5, P5), 2000, 22).series
    assert abs(fit("inar-poisson", y).params["alpha"] - 0.5) < 0.05


def test_fit_result_fields():
    y = simulate(TABLE1, 500, 3).series
    res = fit("gas-poisson", y, FitOptions(restarts=2))
    assert res.n_obs == 499 and res.n_params == 4
    assert res.aic == pytest.approx(2 * 4 - 2 * res.loglik_sum)
    assert res.loglik_avg == pytest.approx(res.loglik_sum / 499)
    assert res.loglik_sum == pytest.approx(loglik_sum(res.model, y), rel=1e-12)
    assert res.std_errors is not None and set(res.std_errors) == {"omega", "beta", "tau", "mu"}
    doc = res.to_dict()
    assert doc["options"]["seed"] == 0 and doc["kind"] == "gas-poisson"


@pytest.mark.parametrize("kind", ["gas-poisson", "rc-poisson", "gas-negbin", "rc-negbin"])
def test_nested_models_dominate_static(kind):
    y = simulate(TABLE1, 400, 5).series
    family = kind.split("-")[1]
    full = fit(kind, y, FitOptions(restarts=1, compute_se=False))
    static = fit(f"inar-{family}", y, FitOptions(compute_se=False))
    assert full.loglik_sum >= static.loglik_sum - 1e-6


def test_refit_from_optimum_is_stable():
    y = simulate(TABLE1, 500, 6).series
    res = fit("gas-poisson", y, FitOptions(restarts=2, compute_se=False))
    again = fit("gas-poisson", y, FitOptions(restarts=1, compute_se=False, nested_start=False),
                extra_starts=[res.theta])
    assert again.loglik_sum >= res.loglik_sum - 1e-8
    assert abs(again.loglik_sum - res.loglik_sum) < 1e-6


def test_more_restarts_never_worse():
    y = simulate(TABLE1, 400, 7).series
    lls = [fit("gas-poisson", y, FitOptions(restarts=r, compute_se=False)).loglik_sum for r in (1, 2, 4)]
    assert lls[1] >= lls[0] - 1e-8 and lls[2] >= lls[1] - 1e-8


def test_fit_is_deterministic():
    y = simulate(TABLE1, 300, 8).series
    a = fit("gas-negbin", y, FitOptions(restarts=2, seed=4, compute_se=False))
    b = fit("gas-negbin", y, FitOptions(restarts=2, seed=4, compute_se=False))
    assert np.array_equal(a.theta, b.theta)


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_every_kind_fits(kind):
    y = simulate(TABLE1, 200, 9).series
    res = fit(kind, y, FitOptions(restarts=1, compute_se=False))
    assert math.isfinite(res.loglik_sum)


def test_uninformative_series():
    with pytest.raises(NoSurvivalInformationError):
        fit("gas-poisson", [0] * 30)
    with pytest.raises(NoSurvivalInformationError):
        fit("rc-poisson", [4] * 30)
    with pytest.raises(InputError):
        fit("inar-poisson", [1, 2, 3])


def test_quadratic_objective_standard_errors():
    se, cov = hessian_std_errors(lambda v: -0.5 * float(np.dot(v, v)), np.zeros(3))
    assert np.allclose(se, 1.0, rtol=1e-6)
    assert np.allclose(cov, np.eye(3), atol=1e-6)


def test_non_concave_point_gives_none():
    se, cov = hessian_std_errors(lambda v: 0.5 * float(np.dot(v, v)), np.zeros(2))
    assert se is None and cov is None


def test_delta_method_matches_natural_hessian():
    y = simulate(StaticInar(0.4, NegativeBinomial(4.0, 10.0)), 2000, 10).series
    res = fit("inar-negbin", y)
    delta = std_errors(res, y)
    direct = natural_std_errors(res, y)
    for name in delta:
        assert delta[name] == pytest.approx(direct[name], rel=0.05)


def test_lr_test_machinery():
    assert lr_pvalue(12.24, 2) == pytest.approx(0.002, abs=5e-4)
    y = simulate(TABLE1, 300, 12).series
    static = fit("inar-poisson", y, FitOptions(compute_se=False))
    same = lr_test(static, static.__class__(**{**static.__dict__, "kind": "gas-poisson"}))
    assert same.statistic == 0.0 and same.pvalue == 1.0 and same.df == 2
    rc = fit("rc-poisson", y, FitOptions(compute_se=False))
    assert lr_test(static, rc).df == 1
    with pytest.raises(NotNestedError):
        lr_test(rc, static)


@pytest.mark.xfail(strict=True, reason=(
    "chi-square(2) reference is not attainable: beta is unidentified at tau=0 and the "
    "multistart ML often lands on non-invertible beta~1, tau<0 fits that overfit in sample"))
def test_lr_size_under_the_null():
    rejections = 0
    reps = 500
    for i in range(reps):
        y = simulate(StaticInar(0.5, P5), 500, 5000 + i).series
        opts = FitOptions(restarts=1, seed=i, compute_se=False)
        rejections += lr_test(fit("inar-poisson", y, opts), fit("gas-poisson", y, opts)).pvalue < 0.05
    assert 0.02 <= rejections / reps <= 0.10


def test_negbin_fit_reaches_poisson_limit_without_error():
    # Poisson data: the NB variance excess is driven toward zero
    y = simulate(StaticInar(0.4, Poisson(3.0)), 400, 12).series
    res = fit("inar-negbin", y, FitOptions(restarts=2, compute_se=False))
    p = res.params
    assert p["sigma2"] > p["mu"] and math.isfinite(res.loglik_sum)
    pois = fit("inar-poisson", y, FitOptions(restarts=2, compute_se=False))
    assert res.loglik_sum >= pois.loglik_sum - 1e-3


def test_objective_is_finite_or_minus_inf_far_out():
    from gasinar.estimation import _loglik_function

    y = simulate(StaticInar(0.4, Poisson(3.0)), 100, 1).series
    f = _loglik_function("gas-negbin", y)
    for v in ([0.0, 0.0, 0.0, 800.0, 0.0], [0.0, 0.0, 0.0, 1.0, -900.0], [0.0, 0.0, 0.0, 1.0, 900.0]):
        val = f(np.array(v))
        assert val == -np.inf or math.isfinite(val)
