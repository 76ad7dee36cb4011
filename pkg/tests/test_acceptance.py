"""Acceptance gate: one PASS/FAIL line per criterion, each at its stated tolerance."""
import time
from importlib.resources import files

import numpy as np
import pytest

from conftest import record
from game_oracle import enumerate_game, separated_pool_invariance
from vdsim.agents import Action, EquilibriumSolver, Side, last_strike_decision, solve_equilibrium
from vdsim.cli import main
from vdsim.experiment import balance_table, estimate, load_preset, randomization_check, run_experiment
from vdsim.model import VerdictModel
from vdsim.oracle import gamma_limit_oracle
from vdsim.stats import ols_fit, placebo_spec, primary_spec

DATA = files("vdsim") / "data"


def test_c1_example_sheet_replay(capsys):
    t = time.perf_counter()
    code = main(["replay", str(DATA / "example_sheet.csv")])
    elapsed = time.perf_counter() - t
    out = capsys.readouterr().out.strip()
    ok = code == 0 and out == "seated: 3 6 10 12 21 25; defense 6/6 (exhausted); prosecution 4/6" and elapsed < 1
    assert record("C1 example strike sheet replay", ok, f"'{out}' in {elapsed:.3f}s")


def test_c2_separated_pool_invariance():
    t = time.perf_counter()
    rng = np.random.default_rng(20240101)
    problems = []
    for _ in range(1000):
        problems += separated_pool_invariance(rng)
    elapsed = time.perf_counter() - t
    ok = not problems and elapsed < 30
    assert record("C2 F-invariance on separated pools", ok,
                  f"1000 separated pools x 11 F points, {len(problems)} violations, {elapsed:.1f}s")


def _contrast(g, grp):
    a, b = g[grp == "n"], g[grp == "n1"]
    return a.mean() - b.mean(), np.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))


@pytest.mark.slow
def test_c3_estimator_oracle_agreement():
    t = time.perf_counter()
    sizes = (1_000, 10_000, 100_000)
    pooled = {n: [] for n in sizes}
    details, ok = [], True
    for name in ("null", "informative_defense", "informative_both"):
        cfg = load_preset(name).with_(n_cases=1_000_000)
        ref = gamma_limit_oracle(cfg, 1_500_000)
        df = run_experiment(cfg)
        g, grp = df.guilty.to_numpy(float), df.def_group.to_numpy()
        g5, s5 = _contrast(g[:100_000], grp[:100_000])
        z = (g5 - ref.gamma) / np.hypot(s5, ref.se)
        rmse = {}
        for n in sizes:
            errs = [_contrast(g[k:k + n], grp[k:k + n])[0] - ref.gamma for k in range(0, len(df), n)]
            pooled[n] += errs
            rmse[n] = np.sqrt(np.mean(np.square(errs)))
        slope = np.polyfit(np.log10(sizes), np.log10([rmse[n] for n in sizes]), 1)[0]
        ok &= abs(z) <= 3 and abs(slope + 0.5) <= 0.1
        details.append(f"{name}: gamma_hat {g5:+.4f} vs oracle {ref.gamma:+.4f} (z={z:+.2f}), slope {slope:.3f}")
    prmse = [np.sqrt(np.mean(np.square(pooled[n]))) for n in sizes]
    pslope = np.polyfit(np.log10(sizes), np.log10(prmse), 1)[0]
    elapsed = time.perf_counter() - t
    ok &= elapsed <= 300
    assert record("C3 estimator vs oracle", ok,
                  "; ".join(details) + f"; pooled slope {pslope:.3f}; {elapsed:.0f}s")


@pytest.mark.slow
def test_c4_direction_and_placebo():
    base = load_preset("informative_defense")
    df = run_experiment(base)
    main_fit = estimate(df, primary_spec())
    b, se, t_main = main_fit.term("def_exhausts")
    direction = b > 0 and t_main > 1.96

    good, main_sig = 0, 0
    for k in range(100):
        rep = run_experiment(base.with_(master_seed=base.master_seed + 1000 + k))
        m = estimate(rep, primary_spec()).term("def_exhausts")
        p = estimate(rep, placebo_spec()).term("def_placebo_exhausts")
        good += abs(p[0]) < abs(m[0]) and abs(p[2]) < 1.96
        main_sig += m[2] > 1.96
    ok = direction and good >= 90
    assert record("C4 direction + placebo", ok,
                  f"pinned Exhausts {b:+.4f} (t={t_main:.2f}); placebo smaller and insignificant in {good}/100 "
                  f"replications; Exhausts significant in {main_sig}/100")


@pytest.mark.slow
def test_c5_null_calibration():
    base = load_preset("null").with_(n_cases=2000)
    reps = 500
    exhausts_rej = 0
    cov_rej, f_rej = None, None
    for k in range(reps):
        df = run_experiment(base.with_(master_seed=base.master_seed + 5000 + k))
        exhausts_rej += estimate(df, primary_spec()).term("def_exhausts")[2].__abs__() > 1.96
        tab = balance_table(df, "defense")
        rej = (tab["pvalue"] < 0.05).astype(int)
        cov_rej = rej if cov_rej is None else cov_rej + rej
        fr = (randomization_check(df).table["pvalue"] < 0.05).astype(int)
        f_rej = fr if f_rej is None else f_rej + fr
    rate = exhausts_rej / reps
    bal = cov_rej.sum() / (reps * len(cov_rej))
    frate = f_rej.sum() / (reps * len(f_rej))
    in_band = lambda r: 0.03 <= r <= 0.07
    ok = in_band(rate) and in_band(bal) and in_band(frate)
    per_cov = ", ".join(f"{c} {v / reps:.3f}" for c, v in cov_rej.items())
    per_f = ", ".join(f"{c} {v / reps:.3f}" for c, v in f_rej.items())
    assert record("C5 null calibration", ok,
                  f"Exhausts rejection {rate:.3f}; balance t pooled {bal:.3f} [{per_cov}]; "
                  f"randomization F pooled {frate:.3f} [{per_f}] (band 0.03-0.07, {reps} replications)")


def test_c6a_solver_matches_enumeration():
    t = time.perf_counter()
    rng = np.random.default_rng(606)
    mismatches, total = 0, 0
    for model in (VerdictModel.threshold(0.5), VerdictModel.logistic(30.0, 0.3)):
        for _ in range(1500):
            n = int(rng.integers(4, 9))
            pros = np.round(rng.random(n), 2)
            dfn = pros if rng.random() < 0.5 else np.round(np.clip(pros + rng.normal(0, 0.2, n), 0, 1), 2)
            sol = solve_equilibrium(pros, dfn, (1, 1), model, jury_size=2)
            value, strike = enumerate_game(list(pros), list(dfn), 2, 1, 1, model)
            mismatches += sol.value_by_side != value or (sol.root_decision is Action.STRIKE) != strike
            total += 1
    elapsed = time.perf_counter() - t
    ok = mismatches == 0 and elapsed < 120
    assert record("C6a solver vs exhaustive enumeration", ok,
                  f"{total} instances (<=8 survivors, S=2, 1 strike each), {mismatches} mismatches, {elapsed:.1f}s")


def test_c6b_solver_final_decision_vs_last_strike_rule():
    t = time.perf_counter()
    rng = np.random.default_rng(607)
    model = load_preset("default").verdict
    agree = 0
    n_states = 10_000
    for _ in range(n_states):
        n = int(rng.integers(18, 25))
        v = rng.random(n)
        solver = EquilibriumSolver(v, v, 0, 1, model)
        i = int(rng.integers(5, n - 1))
        seated = sorted(int(p) for p in rng.choice(i, 5, replace=False))
        dp = solver.decision(solver.state(i, seated, 0, 1, Side.DEFENSE))
        rule = last_strike_decision(Side.DEFENSE, v[seated + [i]], v[i + 1])
        agree += dp is rule
    elapsed = time.perf_counter() - t
    ok = agree == n_states and elapsed < 120
    assert record("C6b solver final decision vs last-strike rule", ok,
                  f"{agree}/{n_states} sampled states agree ({agree / n_states:.1%}), {elapsed:.1f}s")


def test_c7_ols_kernel():
    fit = ols_fit(np.column_stack([np.ones(4), [0, 1, 2, 3]]), [1, 3, 5, 8])
    err_beta = np.abs(fit.coef - [0.8, 2.3]).max()

    rng = np.random.default_rng(50)
    x = rng.normal(size=(50, 2))
    y = 1 + x @ [0.5, -1] + rng.normal(size=50) * (1 + np.abs(x[:, 0]))
    X = np.column_stack([np.ones(50), x])
    inv = np.linalg.inv(X.T @ X)
    beta = inv @ X.T @ y
    meat = sum((y[i] - X[i] @ beta) ** 2 * np.outer(X[i], X[i]) for i in range(50))
    oracle = np.sqrt(np.diag(inv @ meat @ inv) * 50 / 47)
    err_se = np.abs(ols_fit(X, y, "HC1").se - oracle).max()

    worst = 0.0
    for k in range(200):
        r = np.random.default_rng(k)
        n = int(r.integers(10, 500))
        Xr = np.column_stack([np.ones(n), r.normal(size=(n, 4))])
        yr = r.normal(size=n) + Xr[:, 1]
        f = ols_fit(Xr, yr)
        worst = max(worst, np.abs(Xr.T @ f.resid).max() / np.linalg.norm(yr))
    ok = err_beta < 1e-10 and err_se < 1e-8 and worst < 1e-8
    assert record("C7 OLS kernel", ok,
                  f"normal-equation error {err_beta:.1e}, HC1 vs sandwich oracle {err_se:.1e}, "
                  f"max |X'e|/|y| {worst:.1e} over 200 fits (every fit is also guarded in ols_fit)")


def test_c8_determinism(tmp_path, capsys):
    paths = [tmp_path / "run1.csv", tmp_path / "run2.csv", tmp_path / "w8.csv"]
    codes = [main(["simulate", "-c", "demo", "-o", str(paths[0]), "--workers", "1"]),
             main(["simulate", "-c", "demo", "-o", str(paths[1]), "--workers", "1"]),
             main(["simulate", "-c", "demo", "-o", str(paths[2]), "--workers", "8"])]
    capsys.readouterr()
    blobs = [p.read_bytes() for p in paths]
    ok = codes == [0, 0, 0] and blobs[0] == blobs[1] == blobs[2]
    assert record("C8 determinism", ok,
                  f"demo config: 2 runs with 1 worker and 1 run with 8 workers, {len(blobs[0])} bytes each, "
                  f"{'identical' if ok else 'differ'}")
