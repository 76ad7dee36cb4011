"""Brute-force conditioning oracle for the exhaustion contrast.

A scalar, compiled re-implementation of case generation and the one-pass
strike protocol.  It shares only the predisposition and verdict primitives
with the main pipeline and draws from numba's own random stream, so agreement
with :func:`vdsim.experiment.gamma_hat` is evidence against bugs in either
path.  Outcomes are the exact conviction probabilities of the seated juries
rather than Bernoulli draws, which removes verdict noise from the limit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .agents import AlwaysStrike, Benchmark, GreedyRank, NeverStrike, RandomStrike, Side
from .engine import OFFENSES
from .errors import ConfigError, EmptyGroupError
from .model import JURY_SIZE

_NEVER, _ALWAYS, _RANDOM, _GREEDY, _BENCH = range(5)


def _encode(policy):
    if isinstance(policy, NeverStrike):
        return (_NEVER, 0.0, 0.0, 0.0)
    if isinstance(policy, AlwaysStrike):
        return (_ALWAYS, 0.0, 0.0, 0.0)
    if isinstance(policy, RandomStrike):
        return (_RANDOM, policy.prob, 0.0, 0.0)
    if isinstance(policy, GreedyRank):
        return (_GREEDY, 0.0, 0.0, 0.0)
    if isinstance(policy, Benchmark):
        return (_BENCH, 0.0, policy.reference.a, policy.reference.b)
    raise ConfigError("policies", f"the oracle does not support {policy.kind!r} policies")


@numba.njit(cache=True)
def _clamp(x):
    return min(max(x, 0.0), 1.0)


@numba.njit(cache=True)
def _wants(code, prob, ra, rb, is_def, own, t, n, seated, left, other_left, fact):
    if left <= 0:
        return False
    x = own[t]
    if code == _NEVER:
        return False
    if code == _ALWAYS:
        return True
    if code == _RANDOM:
        return np.random.random() < prob
    if code == _BENCH:
        ref = _clamp(ra + rb * fact)
        return x > ref if is_def else x < ref
    # greedy rank over the reachable window
    L = min(JURY - seated + left + other_left, n - t)
    if left >= L:
        return True
    better = 0
    for k in range(t, t + L):
        if (is_def and own[k] < x) or ((not is_def) and own[k] > x):
            better += 1
    return better >= L - left


JURY = JURY_SIZE


@numba.njit(cache=True)
def _simulate(seed, n_cases, mix_cdf, pool_sizes, limits, fa, fb, am, asd, bm, bsd, shift_sd,
              sig_p, sig_d, c_total, pcode, pparams, dcode, dparams, vkind, vtau, vbeta, out):
    """Fill ``out[i] = (offense, def_used, pros_used, conviction probability)``."""
    np.random.seed(seed)
    P = pool_sizes.max()
    true = np.empty(P)
    pv = np.empty(P)
    dv = np.empty(P)
    for i in range(n_cases):
        u = np.random.random()
        o = 0
        while u >= mix_cdf[o]:
            o += 1
        fact = np.random.beta(fa, fb)
        shift = shift_sd * np.random.standard_normal()
        n = 0
        for _ in range(pool_sizes[o]):
            if np.random.random() < c_total:
                continue
            a = am + shift + asd * np.random.standard_normal()
            b = max(bm + bsd * np.random.standard_normal(), 0.0)
            x = _clamp(a + b * fact)
            true[n] = x
            pv[n] = _clamp(x + sig_p * np.random.standard_normal())
            dv[n] = _clamp(x + sig_d * np.random.standard_normal())
            n += 1
        lim = limits[o]
        if n < JURY + 2 * lim:
            out[i, 0] = -1.0
            continue
        pl = lim
        dl = lim
        seated = 0
        jmin = 1.0
        t = 0
        while seated < JURY:
            if _wants(pcode, pparams[0], pparams[1], pparams[2], False, pv, t, n, seated, pl, dl, fact):
                pl -= 1
            elif _wants(dcode, dparams[0], dparams[1], dparams[2], True, dv, t, n, seated, dl, pl, fact):
                dl -= 1
            else:
                seated += 1
                jmin = min(jmin, true[t])
            t += 1
        if vkind == 0:
            g = 1.0 if jmin >= vtau else 0.0
        else:
            g = 1.0 / (1.0 + np.exp(-vbeta * (jmin - vtau)))
        out[i, 0] = o
        out[i, 1] = lim - dl
        out[i, 2] = lim - pl
        out[i, 3] = g


@dataclass(frozen=True)
class OracleResult:
    gamma: float
    se: float
    mean_n: float
    mean_n1: float
    count_n: int
    count_n1: int
    n_oracle: int

    def __float__(self):
        return self.gamma


def simulate_oracle_cases(config, n_oracle, seed=None):
    """Raw oracle draws: columns offense, def_used, pros_used, conviction probability."""
    mix = np.cumsum([config.offense_mix[o] for o in OFFENSES])
    mix[-1] = 1.0 + 1e-12
    c = config.cause
    v = config.verdict
    pop = config.jpf
    out = np.empty((int(n_oracle), 4))
    seed = (config.master_seed * 1_000_003 + 7919) % (2 ** 31) if seed is None else seed
    _simulate(
        np.int64(seed), int(n_oracle), mix,
        np.array([config.pool_size[o] for o in OFFENSES], dtype=np.int64),
        np.array([o.strike_limit for o in OFFENSES], dtype=np.int64),
        config.fact_alpha, config.fact_beta,
        pop.intercept_mean, pop.intercept_sd, pop.slope_mean, pop.slope_sd, pop.pool_shift_sd,
        config.noise_sigma[Side.PROSECUTION], config.noise_sigma[Side.DEFENSE],
        c.judge + c.prosecution + c.defense,
        *_split(_encode(config.prosecution_policy)), *_split(_encode(config.defense_policy)),
        0 if v.kind == "threshold" else 1, v.tau, v.beta or 0.0, out)
    if (out[:, 0] < 0).any():
        raise ConfigError("pool_size", "oracle drew a pool with too few survivors for the strike limits")
    return out


def _split(code):
    return code[0], np.array(code[1:], dtype=float)


def gamma_limit_oracle(config, n_oracle=1_000_000, side="defense", seed=None) -> OracleResult:
    """E[G | side exhausted] - E[G | side one strike short], by direct conditioning."""
    side = Side.parse(side)
    out = simulate_oracle_cases(config, n_oracle, seed)
    limits = np.array([o.strike_limit for o in OFFENSES])[out[:, 0].astype(int)]
    used = out[:, 1] if side is Side.DEFENSE else out[:, 2]
    g = out[:, 3]
    gn, gn1 = g[used == limits], g[used == limits - 1]
    if len(gn) == 0:
        raise EmptyGroupError("n", side.value)
    if len(gn1) == 0:
        raise EmptyGroupError("n1", side.value)
    se = np.sqrt((gn.var(ddof=1) / len(gn) if len(gn) > 1 else 0.0)
                 + (gn1.var(ddof=1) / len(gn1) if len(gn1) > 1 else 0.0))
    return OracleResult(float(gn.mean() - gn1.mean()), float(se), float(gn.mean()), float(gn1.mean()),
                        len(gn), len(gn1), int(n_oracle))
