import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from vdsim.errors import InsufficientDataError, RankDeficientError, SchemaError
from vdsim.stats import (
    OLS, RegressionSpec, design_matrix, fit_spec, ols_fit, placebo_spec, pooled_controls_spec, primary_spec,
    t_test_two_sided,
)


def sandwich_oracle(X, y):
    """HC1 by explicit inverse and a per-row outer-product loop."""
    n, k = X.shape
    inv = np.linalg.inv(X.T @ X)
    beta = inv @ X.T @ y
    meat = np.zeros((k, k))
    for i in range(n):
        e = y[i] - X[i] @ beta
        meat += e * e * np.outer(X[i], X[i])
    return np.sqrt(np.diag(inv @ meat @ inv) * n / (n - k))


def with_const(x):
    return np.column_stack([np.ones(len(x)), x])


class TestOls:
    def test_exact_fit(self):
        x = np.arange(10.0)
        fit = ols_fit(with_const(x), 2 * x)
        np.testing.assert_allclose(fit.coef, [0, 2], atol=1e-12)
        np.testing.assert_allclose(fit.resid, 0, atol=1e-12)

    def test_four_point_fixture(self):
        # normal equations by hand: slope = Sxy/Sxx = 11.5/5, intercept = 4.25 - 1.5*2.3
        fit = ols_fit(with_const([0, 1, 2, 3]), [1, 3, 5, 8], se_kind="classic")
        np.testing.assert_allclose(fit.coef, [0.8, 2.3], rtol=0, atol=1e-10)

    def test_hc1_matches_sandwich_oracle(self):
        rng = np.random.default_rng(50)
        x = rng.normal(size=(50, 2))
        y = 1 + x @ [0.5, -1] + rng.normal(size=50) * (1 + np.abs(x[:, 0]))
        X = with_const(x)
        fit = ols_fit(X, y, "HC1")
        np.testing.assert_allclose(fit.se, sandwich_oracle(X, y), rtol=0, atol=1e-8)

    def test_hc1_close_to_classic_under_homoskedasticity(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(20000, 2))
        y = x @ [1, 2] + rng.normal(size=20000)
        X = with_const(x)
        a, b = ols_fit(X, y, "HC1").se, ols_fit(X, y, "classic").se
        np.testing.assert_allclose(a, b, rtol=0.05)

    def test_rank_deficient_names_column(self):
        x = np.arange(10.0)
        X = np.column_stack([np.ones(10), x, 2 * x])
        with pytest.raises(RankDeficientError) as err:
            ols_fit(X, x ** 2, names=["const", "x", "x_twice"])
        assert err.value.column == "x_twice"

    def test_too_few_rows(self):
        with pytest.raises(InsufficientDataError):
            ols_fit(with_const([1.0, 2.0]), [1.0, 2.0])

    def test_unknown_se_kind(self):
        with pytest.raises(ValueError):
            ols_fit(with_const([1.0, 2.0, 3.0]), [1, 2, 3], se_kind="HC9")

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.integers(8, 200))
    def test_residual_orthogonality_and_permutation(self, seed, n):
        rng = np.random.default_rng(seed)
        X = with_const(rng.normal(size=(n, 3)) * [1, 40, 0.01])
        y = rng.normal(size=n) * 3 + X[:, 1]
        fit = ols_fit(X, y)
        assert np.abs(X.T @ fit.resid).max() < 1e-8 * np.linalg.norm(y) * np.abs(X).max()
        perm = rng.permutation(n)
        other = ols_fit(X[perm], y[perm])
        np.testing.assert_allclose(other.coef, fit.coef, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(other.se, fit.se, rtol=1e-9, atol=1e-12)
        assert (fit.se >= 0).all()
        assert np.allclose(fit.cov, fit.cov.T) and np.linalg.eigvalsh(fit.cov).min() > -1e-12

    def test_noise_column_stability(self):
        rng = np.random.default_rng(8)
        shifts = []
        for _ in range(100):
            x = rng.normal(size=(300, 2))
            y = 1 + x @ [1, -1] + rng.normal(size=300)
            base = ols_fit(with_const(x), y)
            more = ols_fit(with_const(np.column_stack([x, rng.normal(size=300)])), y)
            shifts.append(np.abs(more.coef[:3] - base.coef) / base.se)
        assert np.mean(shifts) < 1.0

    def test_wald_matches_single_t(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(200, 2))
        fit = ols_fit(with_const(x), x[:, 0] + rng.normal(size=200), names=["const", "a", "b"])
        F, df1, _, _ = fit.wald_test(["a"])
        assert df1 == 1 and F == pytest.approx(fit.term("a")[2] ** 2)

    def test_outputs(self):
        fit = ols_fit(with_const([0, 1, 2, 3, 4]), [1, 3, 4, 8, 9], names=["const", "x"])
        text = fit.to_csv(header_comment="config_hash=abc")
        assert text.splitlines()[:2] == ["# config_hash=abc", "term,estimate,robust_se,t"]
        assert "adj. R2" in fit.summary()

    def test_sklearn_estimator(self):
        rng = np.random.default_rng(0)
        X = pd.DataFrame({"a": rng.normal(size=40), "b": rng.normal(size=40)})
        y = 1 + 2 * X.a + rng.normal(size=40) * 0.1
        est = OLS().fit(X, y)
        assert est.fit_.names == ["const", "a", "b"]
        assert est.coef_[0] == pytest.approx(2, abs=0.1) and est.intercept_ == pytest.approx(1, abs=0.1)
        assert est.score(X, y) > 0.9
        assert est.get_params() == {"se_kind": "HC1", "fit_intercept": True}


class TestWelch:
    def test_identical(self):
        assert t_test_two_sided([1, 2, 3], [1, 2, 3]).t == 0

    def test_two_point_groups(self):
        # means 1 vs 2, variances 2 and 2, so SE = sqrt(2/2 + 2/2) = sqrt(2)
        res = t_test_two_sided([0, 2], [1, 3])
        assert res.t == pytest.approx(-1 / np.sqrt(2), abs=1e-12)
        assert res.dof == pytest.approx(2.0)

    def test_matches_scipy(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=30), rng.normal(1, 2, size=45)
        ref = sps.ttest_ind(a, b, equal_var=False)
        res = t_test_two_sided(a, b)
        assert res.t == pytest.approx(ref.statistic) and res.pvalue == pytest.approx(ref.pvalue)

    def test_large_equal_variance_matches_pooled(self):
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=5000), rng.normal(0.05, 1, size=5000)
        pooled = sps.ttest_ind(a, b, equal_var=True).statistic
        assert abs(t_test_two_sided(a, b).t - pooled) < 1e-3

    def test_degenerate(self):
        with pytest.raises(InsufficientDataError):
            t_test_two_sided([1], [1, 2])
        with pytest.raises(InsufficientDataError):
            t_test_two_sided([1, 1], [2, 2])


def toy_frame(n=400, seed=0):
    rng = np.random.default_rng(seed)
    groups = rng.choice(["n", "n1", "n2", "few"], size=n)
    return pd.DataFrame({
        "guilty": (rng.random(n) < 0.5).astype(int),
        "def_group": groups, "pros_group": rng.choice(["n", "n1", "n2", "few"], size=n),
        "def_exhausts": (groups == "n").astype(int),
        "pros_exhausts": 0, "felony": rng.integers(0, 2, n), "life_eligible": 0,
        "judge": rng.choice(["a", "b", "c"], size=n),
    }).assign(life_eligible=lambda d: d.felony * (rng.random(n) < 0.2))


class TestSpecs:
    def test_primary_shape(self):
        spec = primary_spec("defense")
        assert spec.regressors == ("def_exhausts", "def_nn1_group", "felony", "life_eligible")
        assert primary_spec("prosecution").regressors[0] == "pros_exhausts"

    def test_outcome_not_regressor(self):
        with pytest.raises(ValueError):
            RegressionSpec("guilty", ("guilty",))

    def test_planted_placebo_effect(self):
        df = toy_frame()
        df["guilty"] = (df.def_group == "n1").astype(int)
        fit = fit_spec(df, placebo_spec())
        assert fit.term("def_placebo_exhausts")[0] == pytest.approx(1.0)

    def test_missing_columns(self):
        with pytest.raises(SchemaError) as err:
            fit_spec(toy_frame().drop(columns=["felony"]), primary_spec())
        assert err.value.missing == ["felony"]

    def test_fixed_effects_drop_one_level(self):
        spec = RegressionSpec("guilty", ("def_exhausts",), fixed_effects=("judge",))
        X, y, names = design_matrix(toy_frame(), spec)
        assert names == ["const", "def_exhausts", "judge_b", "judge_c"]

    def test_pooled_controls_spec(self):
        spec = pooled_controls_spec()
        assert spec.regressors[:4] == primary_spec().regressors and "prop_black" in spec.regressors
