"""OLS with heteroskedasticity-robust standard errors, Welch t-tests and the
regression specifications used by the strike-exhaustion harness."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd
from scipy import stats as sps
from scipy.linalg import solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._validation import check_columns
from .errors import InsufficientDataError, InvariantViolation, RankDeficientError

SE_KINDS = ("classic", "HC0", "HC1")


@dataclass
class OlsFit:
    names: list
    coef: np.ndarray
    se: np.ndarray
    cov: np.ndarray
    resid: np.ndarray
    se_kind: str
    n: int
    r2: float
    adj_r2: float
    xtx_inv: np.ndarray = field(repr=False)

    @property
    def k(self):
        return len(self.coef)

    @property
    def tvalues(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coef / self.se

    @property
    def pvalues(self):
        return 2 * sps.t.sf(np.abs(self.tvalues), self.n - self.k)

    def __getitem__(self, term):
        i = self.names.index(term)
        return self.coef[i]

    def term(self, name):
        """(estimate, se, t) for one term."""
        i = self.names.index(name)
        return self.coef[i], self.se[i], self.tvalues[i]

    def wald_test(self, terms):
        """Joint test that ``terms`` are all zero; returns ``(F, df1, df2, p)``."""
        idx = [self.names.index(t) for t in terms]
        b = self.coef[idx]
        V = self.cov[np.ix_(idx, idx)]
        q, df2 = len(idx), self.n - self.k
        try:
            F = float(b @ np.linalg.solve(V, b)) / q
        except np.linalg.LinAlgError:
            return float("nan"), q, df2, float("nan")
        if not np.isfinite(F):
            return float("nan"), q, df2, float("nan")
        return F, q, df2, float(sps.f.sf(F, q, df2))

    def to_frame(self):
        return pd.DataFrame({"term": self.names, "estimate": self.coef,
                             "robust_se": self.se, "t": self.tvalues})

    def to_csv(self, path=None, header_comment=None):
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        self.to_frame().to_csv(buf, index=False, float_format="%.10g", lineterminator="\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def summary(self, title=None):
        width = max(len(n) for n in self.names) + 2
        lines = []
        if title:
            lines.append(title)
        lines.append(f"{'term':<{width}}{'estimate':>12}{'se(' + self.se_kind + ')':>14}{'t':>9}")
        for name, b, s, t in zip(self.names, self.coef, self.se, self.tvalues):
            lines.append(f"{name:<{width}}{b:>12.5f}{s:>14.5f}{t:>9.2f}")
        lines.append(f"n = {self.n}, adj. R2 = {self.adj_r2:.4f}")
        return "\n".join(lines)


def ols_fit(X, y, se_kind="HC1", names: Sequence[str] | None = None) -> OlsFit:
    """Least squares through a QR factorisation of ``X`` (intercept included by caller).

    ``HC1`` scales the White sandwich by ``n / (n - k)``.
    """
    if se_kind not in SE_KINDS:
        raise ValueError(f"se_kind must be one of {SE_KINDS}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, k = X.shape
    names = list(names) if names is not None else [f"x{i}" for i in range(k)]
    if len(y) != n:
        raise ValueError("X and y have different numbers of rows")
    if n < k + 1:
        raise InsufficientDataError(f"{n} rows for {k} columns; need at least {k + 1}")

    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    tol = max(n, k) * np.finfo(float).eps * max(diag.max(initial=0.0), 1.0) * 1e3
    bad = np.flatnonzero(diag <= tol)
    if len(bad):
        raise RankDeficientError(names[bad[0]])

    coef = solve_triangular(R, Q.T @ y)
    r_inv = solve_triangular(R, np.eye(k))
    xtx_inv = r_inv @ r_inv.T
    resid = y - X @ coef
    orth = np.abs(X.T @ resid).max() if n else 0.0
    bound = 1e-8 * max(np.linalg.norm(y), np.finfo(float).tiny) * max(1.0, np.abs(X).max())
    if orth > bound:
        raise InvariantViolation(f"residuals not orthogonal to the design (|X'e| = {orth:.3g})")
    if se_kind == "classic":
        cov = xtx_inv * (resid @ resid) / (n - k)
    else:
        Xe = X * resid[:, None]
        cov = xtx_inv @ (Xe.T @ Xe) @ xtx_inv
        if se_kind == "HC1":
            cov *= n / (n - k)
    cov = (cov + cov.T) / 2
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    ssr = resid @ resid
    sst = ((y - y.mean()) ** 2).sum()
    r2 = 1 - ssr / sst if sst > 0 else 1.0
    adj = 1 - (1 - r2) * (n - 1) / (n - k) if n > k else float("nan")
    return OlsFit(names, coef, se, cov, resid, se_kind, n, float(r2), float(adj), xtx_inv)


class OLS(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`ols_fit`.

    Exposes ``coef_``, ``intercept_``, ``bse_`` (standard errors) and
    ``tvalues_``; ``fit_`` keeps the full :class:`OlsFit`.
    """

    def __init__(self, se_kind="HC1", fit_intercept=True):
        self.se_kind = se_kind
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        names = list(map(str, X.columns)) if hasattr(X, "columns") else None
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        names = names or [f"x{i}" for i in range(X.shape[1])]
        if self.fit_intercept:
            X = np.column_stack([np.ones(len(X)), X])
            names = ["const"] + names
        self.fit_ = ols_fit(X, y, self.se_kind, names)
        off = 1 if self.fit_intercept else 0
        self.intercept_ = float(self.fit_.coef[0]) if self.fit_intercept else 0.0
        self.coef_ = self.fit_.coef[off:]
        self.bse_ = self.fit_.se[off:]
        self.tvalues_ = self.fit_.tvalues[off:]
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        X = check_array(X)
        return self.intercept_ + X @ self.coef_


# --------------------------------------------------------------------------
# Welch t-test


class WelchResult(NamedTuple):
    t: float
    dof: float
    pvalue: float


def t_test_two_sided(sample_a, sample_b) -> WelchResult:
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise InsufficientDataError("each sample needs at least two values")
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    if va + vb <= 0:
        raise InsufficientDataError("both samples have zero variance")
    t = (a.mean() - b.mean()) / np.sqrt(va + vb)
    dof = (va + vb) ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    return WelchResult(float(t), float(dof), float(2 * sps.t.sf(abs(t), dof)))


# --------------------------------------------------------------------------
# Regression specifications

POOL_STATS = ("prop_black", "prop_female", "avg_age", "ln_median_income", "prop_dem", "prop_rep")
_PREFIX = {"defense": "def", "prosecution": "pros"}


@dataclass(frozen=True)
class RegressionSpec:
    """``sample`` is a tuple of ``(column, allowed values)`` row filters."""

    outcome: str
    regressors: tuple
    fixed_effects: tuple = ()
    sample: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.outcome in self.regressors:
            raise ValueError("outcome cannot also be a regressor")

    def with_regressors(self, extra, name=None):
        return RegressionSpec(self.outcome, tuple(self.regressors) + tuple(extra),
                              self.fixed_effects, self.sample, name or self.name)


def _prefix(side):
    side = getattr(side, "value", side)
    try:
        return _PREFIX[side]
    except KeyError:
        raise ValueError(f"side must be defense or prosecution, got {side!r}") from None


def add_design_columns(frame: pd.DataFrame) -> pd.DataFrame:
    """Add the group dummies used by the specifications (idempotent)."""
    out = frame.copy()
    for p in _PREFIX.values():
        g = out.get(f"{p}_group")
        if g is None:
            continue
        out[f"{p}_nn1_group"] = g.isin(["n", "n1"]).astype(int)
        out[f"{p}_placebo_exhausts"] = (g == "n1").astype(int)
        out[f"{p}_n1n2_group"] = g.isin(["n1", "n2"]).astype(int)
    return out


def primary_spec(side="defense") -> RegressionSpec:
    p = _prefix(side)
    return RegressionSpec(
        "guilty", (f"{p}_exhausts", f"{p}_nn1_group", "felony", "life_eligible"),
        sample=((f"{p}_group", ("n", "n1", "n2", "few")),), name=f"primary[{side}]")


def placebo_spec(side="defense") -> RegressionSpec:
    p = _prefix(side)
    return RegressionSpec(
        "guilty", (f"{p}_placebo_exhausts", f"{p}_n1n2_group", "felony", "life_eligible"),
        sample=((f"{p}_group", ("n", "n1", "n2", "few")),), name=f"placebo[{side}]")


def pooled_controls_spec(side="defense") -> RegressionSpec:
    return primary_spec(side).with_regressors(POOL_STATS, name=f"pooled-controls[{side}]")


SPECS = {"primary": primary_spec, "placebo": placebo_spec, "pooled-controls": pooled_controls_spec}


def design_matrix(frame: pd.DataFrame, spec: RegressionSpec, intercept=True):
    frame = add_design_columns(frame)
    cols = [spec.outcome, *spec.regressors, *spec.fixed_effects, *(c for c, _ in spec.sample)]
    check_columns(frame, list(dict.fromkeys(cols)))
    keep = np.ones(len(frame), dtype=bool)
    for col, allowed in spec.sample:
        keep &= frame[col].isin(allowed).to_numpy()
    sub = frame.loc[keep]
    parts = [sub[list(spec.regressors)].astype(float)]
    for fe in spec.fixed_effects:
        parts.append(pd.get_dummies(sub[fe], prefix=fe, drop_first=True, dtype=float))
    X = pd.concat(parts, axis=1)
    names = list(X.columns)
    X = X.to_numpy()
    if intercept:
        X = np.column_stack([np.ones(len(X)), X])
        names = ["const"] + names
    if len(X) < X.shape[1] + 1:
        raise InsufficientDataError(f"sample has {len(X)} rows for {X.shape[1]} columns")
    return X, sub[spec.outcome].to_numpy(dtype=float), names


def fit_spec(frame: pd.DataFrame, spec: RegressionSpec, se_kind="HC1") -> OlsFit:
    X, y, names = design_matrix(frame, spec)
    return ols_fit(X, y, se_kind, names)
