"""Monte Carlo case generator and the strike-exhaustion identification harness.

Cases are generated in fixed blocks of :data:`BLOCK_SIZE`.  Each block draws
from its own stream ``SeedSequence(master_seed, spawn_key=(block,))``, so a
case is a deterministic function of ``(master_seed, case_index)`` and the
dataset does not depend on how blocks are spread over workers.
"""
from __future__ import annotations

import hashlib
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator

from ._validation import check_columns, check_distribution, check_positive_int, check_probability
from .agents import Side, StrategyPolicy, policy_from_dict
from .engine import (
    OFFENSES, CauseProbs, Covariates, Juror, JuryPool, OffenseClass, SelectionBatch,
    cause_codes_from_uniforms, classify_strike_groups, required_survivors, select_batch,
)
from .errors import ConfigError, EmptyGroupError, InsufficientDataError, InvariantViolation, VdsimError
from .model import JURY_SIZE, Jpf, VerdictModel, eval_affine
from .stats import POOL_STATS, fit_spec, ols_fit, t_test_two_sided

log = logging.getLogger(__name__)

SCHEMA = "vdsim.config/1"
BLOCK_SIZE = 256

DEFENDANT_COVARIATES = ("def_age", "def_black", "def_female", "public_defender")
DATASET_COLUMNS = (
    "case_id", "guilty", "felony", "life_eligible", "def_group", "pros_group",
    "def_exhausts", "pros_exhausts", "def_strikes", "pros_strikes",
    "cause_judge", "cause_pros", "cause_def", *POOL_STATS, *DEFENDANT_COVARIATES,
)


# --------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class JpfPopulation:
    """Jurors are ``Affine(a, b)`` with ``a ~ N(intercept_mean + shift, intercept_sd)``
    (``shift`` is a pool-level draw with sd ``pool_shift_sd``) and
    ``b = max(0, N(slope_mean, slope_sd))``."""

    intercept_mean: float = 0.3
    intercept_sd: float = 0.2
    slope_mean: float = 0.5
    slope_sd: float = 0.0
    pool_shift_sd: float = 0.0


@dataclass(frozen=True)
class CovariateConfig:
    # pool members (defaults: all-case means of the pool characteristics)
    prop_black: float = 0.13
    prop_female: float = 0.54
    age_mean: float = 46.91
    age_sd: float = 16.0
    income_log_mean: float = float(np.log(62404.0) - 0.3 ** 2 / 2)
    income_log_sd: float = 0.3
    prop_dem: float = 0.29
    prop_rep: float = 0.21
    # defendant and attorney block
    def_age_mean: float = 36.84
    def_age_sd: float = 12.68
    def_black: float = 0.55
    def_female: float = 0.14
    public_defender: float = 0.75


_DEFAULT_POOL = {OffenseClass.MISDEMEANOR: 54, OffenseClass.FELONY: 68, OffenseClass.LIFE_FELONY: 86}
_DEFAULT_MIX = {OffenseClass.MISDEMEANOR: 0.3, OffenseClass.FELONY: 0.6, OffenseClass.LIFE_FELONY: 0.1}


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int
    n_cases: int = 1000
    pool_size: dict = field(default_factory=lambda: dict(_DEFAULT_POOL))
    offense_mix: dict = field(default_factory=lambda: dict(_DEFAULT_MIX))
    fact_alpha: float = 2.0
    fact_beta: float = 2.0
    jpf: JpfPopulation = field(default_factory=JpfPopulation)
    noise_sigma: dict = field(default_factory=lambda: {Side.DEFENSE: 0.15, Side.PROSECUTION: 0.15})
    verdict: VerdictModel = field(default_factory=lambda: VerdictModel.logistic(30.0, 0.3))
    cause: CauseProbs = field(default_factory=CauseProbs)
    covariates: CovariateConfig = field(default_factory=CovariateConfig)
    policies: dict = field(default_factory=lambda: {Side.DEFENSE: policy_from_dict({"kind": "greedy_rank"}),
                                                    Side.PROSECUTION: policy_from_dict({"kind": "greedy_rank"})})

    @property
    def defense_policy(self) -> StrategyPolicy:
        return self.policies[Side.DEFENSE]

    @property
    def prosecution_policy(self) -> StrategyPolicy:
        return self.policies[Side.PROSECUTION]

    @property
    def max_pool(self):
        return max(self.pool_size.values())

    def to_dict(self):
        return {
            "schema": SCHEMA,
            "master_seed": self.master_seed,
            "n_cases": self.n_cases,
            "pool_size": {o.value: self.pool_size[o] for o in OFFENSES},
            "offense_mix": {o.value: self.offense_mix[o] for o in OFFENSES},
            "fact_distribution": {"alpha": self.fact_alpha, "beta": self.fact_beta},
            "jpf_population": asdict(self.jpf),
            "noise_sigma": {s.value: self.noise_sigma[s] for s in Side},
            "verdict": self.verdict.to_dict(),
            "cause_probs": self.cause._asdict(),
            "covariates": asdict(self.covariates),
            "policies": {s.value: self.policies[s].to_dict() for s in Side},
        }

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_(self, **changes):
        return replace(self, **changes)

    @classmethod
    def from_dict(cls, d):
        return _parse_config(d)

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"invalid JSON: {exc}") from None
        return cls.from_dict(d)


def _section(d, key, kind):
    """Build dataclass ``kind`` from ``d[key]`` with field-level errors."""
    raw = d.get(key, {})
    if not isinstance(raw, dict):
        raise ConfigError(key, "expected an object")
    names = {f for f in kind.__dataclass_fields__}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{key}.{sorted(unknown)[0]}", "unknown field")
    vals = {}
    for k, v in raw.items():
        try:
            vals[k] = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}.{k}", f"expected a number, got {v!r}") from None
    return kind(**vals)


def _by_offense(raw, field_name, cast):
    if not isinstance(raw, dict):
        return {o: cast(raw, field_name) for o in OFFENSES}
    unknown = set(raw) - {o.value for o in OFFENSES}
    if unknown:
        raise ConfigError(f"{field_name}.{sorted(unknown)[0]}", "unknown offense class")
    missing = [o.value for o in OFFENSES if o.value not in raw]
    if missing:
        raise ConfigError(f"{field_name}.{missing[0]}", "missing")
    return {o: cast(raw[o.value], f"{field_name}.{o.value}") for o in OFFENSES}


_TOP_LEVEL = {"schema", "master_seed", "n_cases", "pool_size", "offense_mix", "fact_distribution",
              "jpf_population", "noise_sigma", "verdict", "cause_probs", "covariates", "policies"}


def _parse_config(d) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("<document>", "config must be a JSON object")
    unknown = set(d) - _TOP_LEVEL
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    if d.get("schema", SCHEMA) != SCHEMA:
        raise ConfigError("schema", f"unsupported schema {d.get('schema')!r}; expected {SCHEMA!r}")
    if "master_seed" not in d:
        raise ConfigError("master_seed", "required field is missing")
    seed = check_positive_int(d["master_seed"], "master_seed", minimum=0)
    kw = {"master_seed": seed}
    if "n_cases" in d:
        kw["n_cases"] = check_positive_int(d["n_cases"], "n_cases", minimum=0)
    if "pool_size" in d:
        kw["pool_size"] = _by_offense(d["pool_size"], "pool_size", check_positive_int)
        for o, p in kw["pool_size"].items():
            if p < required_survivors(o.strike_limit):
                raise ConfigError(f"pool_size.{o.value}",
                                  f"{p} is below the {required_survivors(o.strike_limit)} survivors needed")
    if "offense_mix" in d:
        mix = d["offense_mix"]
        if not isinstance(mix, dict):
            raise ConfigError("offense_mix", "expected an object")
        mix = {**{o.value: 0.0 for o in OFFENSES}, **mix}
        _by_offense(mix, "offense_mix", check_probability)
        kw["offense_mix"] = {OffenseClass(k): v for k, v in check_distribution(mix, "offense_mix").items()}
    if "fact_distribution" in d:
        fd = d["fact_distribution"]
        for k in ("alpha", "beta"):
            if not isinstance(fd, dict) or not isinstance(fd.get(k), (int, float)) or fd[k] <= 0:
                raise ConfigError(f"fact_distribution.{k}", "must be a positive number")
        kw["fact_alpha"], kw["fact_beta"] = float(fd["alpha"]), float(fd["beta"])
    if "jpf_population" in d:
        kw["jpf"] = _section(d, "jpf_population", JpfPopulation)
        for k in ("intercept_sd", "slope_sd", "pool_shift_sd"):
            if getattr(kw["jpf"], k) < 0:
                raise ConfigError(f"jpf_population.{k}", "must be non-negative")
    if "noise_sigma" in d:
        ns = d["noise_sigma"]
        if isinstance(ns, (int, float)):
            ns = {s.value: ns for s in Side}
        out = {}
        for s in Side:
            v = ns.get(s.value, 0.0) if isinstance(ns, dict) else None
            if not isinstance(v, (int, float)) or v < 0:
                raise ConfigError(f"noise_sigma.{s.value}", "must be a non-negative number")
            out[s] = float(v)
        kw["noise_sigma"] = out
    if "verdict" in d:
        try:
            kw["verdict"] = VerdictModel.from_dict(d["verdict"])
        except (KeyError, ValueError, TypeError, AttributeError) as exc:
            raise ConfigError("verdict", str(exc)) from None
    if "cause_probs" in d:
        cp = d["cause_probs"]
        if not isinstance(cp, dict):
            raise ConfigError("cause_probs", "expected an object")
        vals = {k: check_probability(cp.get(k, 0.0), f"cause_probs.{k}") for k in ("judge", "prosecution", "defense")}
        if sum(vals.values()) > 1:
            raise ConfigError("cause_probs", "probabilities sum to more than 1")
        kw["cause"] = CauseProbs(**vals)
    if "covariates" in d:
        cov = _section(d, "covariates", CovariateConfig)
        for k in ("prop_black", "prop_female", "prop_dem", "prop_rep", "def_black", "def_female", "public_defender"):
            check_probability(getattr(cov, k), f"covariates.{k}")
        if cov.prop_dem + cov.prop_rep > 1:
            raise ConfigError("covariates.prop_rep", "party shares sum to more than 1")
        kw["covariates"] = cov
    if "policies" in d:
        pol = d["policies"]
        out = {}
        for s in Side:
            try:
                out[s] = policy_from_dict(pol[s.value])
            except (KeyError, TypeError):
                raise ConfigError(f"policies.{s.value}", "missing or malformed policy") from None
            except ValueError as exc:
                raise ConfigError(f"policies.{s.value}", str(exc)) from None
        kw["policies"] = out
    return ExperimentConfig(**kw)


# --------------------------------------------------------------------------
# Case generation


@dataclass
class CaseBlock:
    """Everything drawn for one block of cases (row-aligned arrays)."""

    first_case: int
    offense: np.ndarray
    pool_size: np.ndarray
    fact: np.ndarray
    a: np.ndarray
    b: np.ndarray
    noise: np.ndarray
    in_pool: np.ndarray
    cause: np.ndarray
    black: np.ndarray
    female: np.ndarray
    age: np.ndarray
    income: np.ndarray
    party: np.ndarray
    defendant: dict
    policy_uniforms: np.ndarray
    verdict_uniform: np.ndarray

    def __len__(self):
        return len(self.fact)

    def predispositions(self):
        return eval_affine(self.a, self.b, self.fact[:, None])


def block_rng(master_seed, block):
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(block,)))


def generate_block(config: ExperimentConfig, block: int) -> CaseBlock:
    rng = block_rng(config.master_seed, block)
    B, P = BLOCK_SIZE, config.max_pool
    cov, pop = config.covariates, config.jpf

    offense = rng.choice(len(OFFENSES), size=B, p=[config.offense_mix[o] for o in OFFENSES])
    sizes = np.array([config.pool_size[o] for o in OFFENSES])[offense]
    fact = rng.beta(config.fact_alpha, config.fact_beta, size=B)
    shift = pop.pool_shift_sd * rng.standard_normal(B)
    a = pop.intercept_mean + shift[:, None] + pop.intercept_sd * rng.standard_normal((B, P))
    b = np.maximum(pop.slope_mean + pop.slope_sd * rng.standard_normal((B, P)), 0.0)
    sig = np.array([config.noise_sigma[Side.PROSECUTION], config.noise_sigma[Side.DEFENSE]])
    noise = rng.standard_normal((B, P, 2)) * sig
    in_pool = np.arange(P)[None, :] < sizes[:, None]
    cause = np.where(in_pool, cause_codes_from_uniforms(rng.random((B, P)), config.cause), 0)

    black = rng.random((B, P)) < cov.prop_black
    female = rng.random((B, P)) < cov.prop_female
    age = np.clip(cov.age_mean + cov.age_sd * rng.standard_normal((B, P)), 18.0, 95.0)
    income = np.exp(cov.income_log_mean + cov.income_log_sd * rng.standard_normal((B, P)))
    u = rng.random((B, P))
    party = np.where(u < cov.prop_dem, 1, np.where(u < cov.prop_dem + cov.prop_rep, 2, 0))

    defendant = {
        "def_age": np.round(cov.def_age_mean + cov.def_age_sd * rng.standard_normal(B), 2),
        "def_black": (rng.random(B) < cov.def_black).astype(int),
        "def_female": (rng.random(B) < cov.def_female).astype(int),
        "public_defender": (rng.random(B) < cov.public_defender).astype(int),
    }
    policy_uniforms = rng.random((B, P, 2))
    verdict_uniform = rng.random(B)
    return CaseBlock(block * B, offense, sizes, fact, a, b, noise, in_pool, cause, black, female, age,
                     income, party, defendant, policy_uniforms, verdict_uniform)


_PARTY = {0: "none", 1: "dem", 2: "rep"}


def generate_case(config: ExperimentConfig, case_index: int):
    """Return ``(JuryPool, fact, OffenseClass, defendant covariates)`` for one case."""
    block, row = divmod(int(case_index), BLOCK_SIZE)
    blk = generate_block(config, block)
    P = int(blk.pool_size[row])
    jurors = []
    for k in range(P):
        cov = Covariates(bool(blk.black[row, k]), bool(blk.female[row, k]), float(blk.age[row, k]),
                         float(blk.income[row, k]), _PARTY[int(blk.party[row, k])])
        jurors.append(Juror(k + 1, Jpf.affine(blk.a[row, k], blk.b[row, k]), cov,
                            noise_defense=float(blk.noise[row, k, 1]),
                            noise_prosecution=float(blk.noise[row, k, 0])))
    defendant = {k: v[row].item() for k, v in blk.defendant.items()}
    return JuryPool(jurors), float(blk.fact[row]), OFFENSES[int(blk.offense[row])], defendant


def case_cause_strikes(config: ExperimentConfig, case_index: int) -> dict:
    """The cause strikes drawn for one case, as ``{juror_id: label}``."""
    block, row = divmod(int(case_index), BLOCK_SIZE)
    blk = generate_block(config, block)
    labels = {1: "JC", 2: "PC", 3: "DC"}
    return {k + 1: labels[int(c)] for k, c in enumerate(blk.cause[row]) if c}


def _compact(mask, *arrays):
    """Move entries where ``mask`` is true to the left of each row, preserving order."""
    order = np.argsort(~mask, axis=1, kind="stable")
    out = [np.take_along_axis(a, order if a.ndim == 2 else order[..., None], axis=1) for a in arrays]
    return order, out


def simulate_block(config: ExperimentConfig, block: int, oracle=False, seating_override=None) -> pd.DataFrame:
    """Simulate one block of cases and return its dataset rows.

    ``seating_override`` replaces the selected juries by survivor positions
    ``(n, 6)``; used to check that perception noise never reaches the verdict.
    """
    blk = generate_block(config, block)
    B = len(blk)
    alive = blk.in_pool & (blk.cause == 0)
    true = blk.predispositions()
    perceived = np.clip(true[..., None] + blk.noise, 0.0, 1.0)
    ids = np.broadcast_to(np.arange(1, config.max_pool + 1), alive.shape)
    order, (true_c, pros_c, def_c, ids_c) = _compact(alive, true, perceived[..., 0], perceived[..., 1], ids)
    n_surv = alive.sum(axis=1)
    pad = np.arange(alive.shape[1])[None, :] >= n_surv[:, None]
    for arr in (true_c, pros_c, def_c):
        arr[pad] = np.nan
    limits = np.array([o.strike_limit for o in OFFENSES])[blk.offense]
    batch = SelectionBatch(pros_c, def_c, np.where(pad, 0, ids_c), n_surv, limits, blk.fact,
                           blk.policy_uniforms, JURY_SIZE)
    try:
        out = select_batch(batch, config.prosecution_policy, config.defense_policy)
    except VdsimError as exc:
        raise type(exc)(f"block {block} (cases {blk.first_case}..{blk.first_case + B - 1}): {exc}") from exc

    seats = out.seated_pos if seating_override is None else np.asarray(seating_override)
    jury = np.take_along_axis(true_c, seats, axis=1)
    p = config.verdict.conviction_probability(jury)
    guilty = (blk.verdict_uniform < p).astype(int)

    size = blk.pool_size
    frame = {
        "case_id": blk.first_case + np.arange(B),
        "guilty": guilty,
        "felony": (blk.offense != 0).astype(int),
        "life_eligible": (blk.offense == 2).astype(int),
        "def_group": classify_strike_groups(out.def_used, limits),
        "pros_group": classify_strike_groups(out.pros_used, limits),
        "def_exhausts": (out.def_used == limits).astype(int),
        "pros_exhausts": (out.pros_used == limits).astype(int),
        "def_strikes": out.def_used,
        "pros_strikes": out.pros_used,
        "cause_judge": (blk.cause == 1).sum(axis=1),
        "cause_pros": (blk.cause == 2).sum(axis=1),
        "cause_def": (blk.cause == 3).sum(axis=1),
        "prop_black": (blk.black & blk.in_pool).sum(axis=1) / size,
        "prop_female": (blk.female & blk.in_pool).sum(axis=1) / size,
        "avg_age": np.where(blk.in_pool, blk.age, 0).sum(axis=1) / size,
        "ln_median_income": np.log(np.nanmedian(np.where(blk.in_pool, blk.income, np.nan), axis=1)),
        "prop_dem": ((blk.party == 1) & blk.in_pool).sum(axis=1) / size,
        "prop_rep": ((blk.party == 2) & blk.in_pool).sum(axis=1) / size,
        **blk.defendant,
    }
    if oracle:
        frame["fact_index"] = blk.fact
    df = pd.DataFrame(frame)
    if (out.violations.sum()) or (df["def_group"] == "over").any() or (df["pros_group"] == "over").any():
        raise InvariantViolation(f"block {block}: engine produced an over-limit or policy-violating case")
    return df


def _simulate_block_star(args):
    return simulate_block(*args)


def run_experiment(config: ExperimentConfig, workers: int = 1, oracle: bool = False) -> pd.DataFrame:
    """Simulate ``config.n_cases`` cases; the result is independent of ``workers``."""
    n = config.n_cases
    if n == 0:
        cols = list(DATASET_COLUMNS) + (["fact_index"] if oracle else [])
        return pd.DataFrame({c: pd.Series(dtype=object if c.endswith("_group") else float) for c in cols})
    n_blocks = -(-n // BLOCK_SIZE)
    jobs = [(config, b, oracle) for b in range(n_blocks)]
    if workers > 1 and n_blocks > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_simulate_block_star, jobs))
    else:
        parts = [_simulate_block_star(j) for j in jobs]
    df = pd.concat(parts, ignore_index=True).iloc[:n]
    return df.reset_index(drop=True)


def dataset_to_csv(df: pd.DataFrame, path=None, header_comment=None) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    df.to_csv(buf, index=False, float_format="%.10g", lineterminator="\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_dataset(path) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, comment="#")
    except pd.errors.EmptyDataError:
        raise InsufficientDataError(f"{path}: empty dataset file") from None
    check_columns(df, DATASET_COLUMNS)
    return df


def drop_over_limit(df: pd.DataFrame, expect_none=False) -> pd.DataFrame:
    over = (df["def_group"] == "over") | (df["pros_group"] == "over")
    if expect_none and over.any():
        raise InvariantViolation(f"{int(over.sum())} over-limit rows in a simulated dataset")
    return df.loc[~over]


# --------------------------------------------------------------------------
# Estimators and checks


def _group_col(side):
    side = Side.parse(side)
    return ("def" if side is Side.DEFENSE else "pros") + "_group", side


def gamma_hat(dataset: pd.DataFrame, side="defense") -> float:
    """Mean guilt in the exhausted group minus mean guilt one strike short."""
    return ExhaustionContrast(side=side).fit(dataset).gamma_


class ExhaustionContrast(BaseEstimator):
    """Difference in conviction rates between the n-strike and (n-1)-strike groups.

    After :meth:`fit`: ``gamma_``, its standard error ``se_``, the group means
    ``mean_n_``/``mean_n1_`` and sizes ``n_n_``/``n_n1_``.
    """

    def __init__(self, side="defense", outcome="guilty"):
        self.side = side
        self.outcome = outcome

    def fit(self, dataset, y=None):
        col, side = _group_col(self.side)
        check_columns(dataset, [col, self.outcome])
        g = dataset[col].to_numpy()
        y = dataset[self.outcome].to_numpy(dtype=float)
        yn, yn1 = y[g == "n"], y[g == "n1"]
        if len(yn) == 0:
            raise EmptyGroupError("n", side.value)
        if len(yn1) == 0:
            raise EmptyGroupError("n1", side.value)
        self.mean_n_, self.mean_n1_ = float(yn.mean()), float(yn1.mean())
        self.n_n_, self.n_n1_ = len(yn), len(yn1)
        self.gamma_ = self.mean_n_ - self.mean_n1_
        var = (yn.var(ddof=1) / len(yn) if len(yn) > 1 else 0.0) + (yn1.var(ddof=1) / len(yn1) if len(yn1) > 1 else 0.0)
        self.se_ = float(np.sqrt(var))
        return self


def balance_table(dataset: pd.DataFrame, side="defense", covariates=None) -> pd.DataFrame:
    """Covariate means in the n, n-1 and n-2 groups with Welch t for n vs n-1."""
    col, side = _group_col(side)
    covariates = list(covariates or (*DEFENDANT_COVARIATES, *POOL_STATS))
    check_columns(dataset, [col, *covariates])
    g = dataset[col].to_numpy()
    rows = []
    for c in covariates:
        x = dataset[c].to_numpy(dtype=float)
        xn, xn1, xn2 = x[g == "n"], x[g == "n1"], x[g == "n2"]
        row = {"covariate": c,
               "mean_n": xn.mean() if len(xn) else np.nan,
               "mean_n1": xn1.mean() if len(xn1) else np.nan,
               "mean_n2": xn2.mean() if len(xn2) else np.nan,
               "count_n": len(xn), "count_n1": len(xn1), "count_n2": len(xn2)}
        try:
            res = t_test_two_sided(xn, xn1)
            row.update(diff=row["mean_n"] - row["mean_n1"], t=res.t, dof=res.dof, pvalue=res.pvalue, testable=True)
        except InsufficientDataError:
            row.update(diff=np.nan, t=np.nan, dof=np.nan, pvalue=np.nan, testable=False)
        rows.append(row)
    return pd.DataFrame(rows).set_index("covariate")


@dataclass
class RandomizationCheck:
    table: pd.DataFrame
    fits: dict


def randomization_check(dataset: pd.DataFrame, pool_stats=POOL_STATS, covariates=DEFENDANT_COVARIATES,
                        se_kind="HC1") -> RandomizationCheck:
    """Regress each pool-composition statistic on the defendant covariate block."""
    covariates = list(covariates)
    check_columns(dataset, [*pool_stats, *covariates])
    if len(dataset) < 2 * (len(covariates) + 1):
        raise InsufficientDataError(f"need at least {2 * (len(covariates) + 1)} rows, got {len(dataset)}")
    X = np.column_stack([np.ones(len(dataset)), dataset[covariates].to_numpy(dtype=float)])
    names = ["const", *covariates]
    rows, fits = [], {}
    for stat in pool_stats:
        fit = ols_fit(X, dataset[stat].to_numpy(dtype=float), se_kind, names)
        F, df1, df2, p = fit.wald_test(covariates)
        row = {"pool_stat": stat}
        for name in covariates:
            est, se, _ = fit.term(name)
            row[name] = est
            row[f"{name}_se"] = se
        row.update(F=F, df1=df1, df2=df2, pvalue=p)
        rows.append(row)
        fits[stat] = fit
    return RandomizationCheck(pd.DataFrame(rows).set_index("pool_stat"), fits)


def estimate(dataset: pd.DataFrame, spec, se_kind="HC1"):
    """Fit a :class:`~vdsim.stats.RegressionSpec` after dropping over-limit rows."""
    return fit_spec(drop_over_limit(dataset), spec, se_kind)


PRESETS = ("default", "demo", "null", "informative_defense", "informative_both")


def preset_path(name):
    from importlib.resources import files
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return files("vdsim") / "data" / f"{name}.json"


def load_preset(name) -> ExperimentConfig:
    return ExperimentConfig.from_dict(json.loads(preset_path(name).read_text()))
