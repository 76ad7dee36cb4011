"""Juror predisposition functions, fact sets and verdict aggregation.

A juror predisposition function (JPF) maps the strength of the case against
a defendant, a fact index in [0, 1], to that juror's predisposition to
convict, also in [0, 1].  Verdicts aggregate the six seated jurors'
predispositions; both built-in verdict models reduce the jury to its most
lenient member, which is how unanimity enters.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from ._validation import check_unit_interval

JURY_SIZE = 6

_JPF_KINDS = ("constant", "identity", "affine")
_VERDICT_KINDS = ("threshold", "logistic")


def check_fact_index(f):
    """Validate a fact index (scalar or array) and return it as float/ndarray."""
    if np.ndim(f) == 0:
        return check_unit_interval(f, "fact index")
    arr = np.asarray(f, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError("fact index values must lie in [0, 1]")
    return arr


def eval_affine(a, b, f):
    """Vectorised clamp(a + b*f) into [0, 1]; broadcasting follows numpy rules."""
    return np.clip(np.add(a, np.multiply(b, f)), 0.0, 1.0)


@dataclass(frozen=True)
class Jpf:
    """A clamped affine JPF.  ``Constant`` and ``Identity`` are special cases.

    Use the constructors :meth:`constant`, :meth:`identity` and :meth:`affine`
    rather than building instances by hand.
    """

    kind: str
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in _JPF_KINDS:
            raise ValueError(f"unknown JPF kind {self.kind!r}")
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("JPF parameters must be finite")
        if self.b < 0:
            raise ValueError(f"JPF slope must be non-negative, got {self.b}")
        if self.kind == "identity" and (self.a, self.b) != (0.0, 1.0):
            raise ValueError("identity JPF has fixed parameters a=0, b=1")
        if self.kind == "constant" and self.b != 0.0:
            raise ValueError("constant JPF has zero slope")

    @classmethod
    def constant(cls, c):
        return cls("constant", float(c), 0.0)

    @classmethod
    def identity(cls):
        return cls("identity", 0.0, 1.0)

    @classmethod
    def affine(cls, a, b):
        return cls("affine", float(a), float(b))

    def __call__(self, f):
        return eval_affine(self.a, self.b, f)

    def kinks(self):
        """Fact values where clamping switches on or off (may lie outside [0, 1])."""
        if self.b == 0:
            return ()
        return (-self.a / self.b, (1.0 - self.a) / self.b)

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "c": self.a}
        if self.kind == "identity":
            return {"kind": "identity"}
        return {"kind": "affine", "a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind")
        if kind == "constant":
            return cls.constant(d["c"])
        if kind == "identity":
            return cls.identity()
        if kind == "affine":
            return cls.affine(d["a"], d["b"])
        raise ValueError(f"unknown JPF kind {kind!r}")


def eval_jpf(jpf: Jpf, f) -> float:
    f = check_fact_index(f)
    return jpf(f) if np.ndim(f) else float(jpf(f))


@dataclass(frozen=True)
class FSet:
    """Closed interval of fact indices, with a grid resolution for checks."""

    lo: float = 0.0
    hi: float = 1.0
    grid_points: int = 11

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(f"need 0 <= lo <= hi <= 1, got [{self.lo}, {self.hi}]")
        if int(self.grid_points) < 2:
            raise ValueError("grid_points must be >= 2")

    def grid(self):
        return np.linspace(self.lo, self.hi, int(self.grid_points))


def _pairwise_separated(values, tol):
    """values: (P, m) evaluations at m fact points.

    A pair is separated when its difference is identically zero or keeps one
    strict sign at every point.
    """
    diff = values[:, None, :] - values[None, :, :]
    pos = diff > tol
    neg = diff < -tol
    zero = ~(pos | neg)
    ok = pos.all(-1) | neg.all(-1) | zero.all(-1)
    return bool(ok.all())


def is_f_separated(pool: Sequence[Jpf], fset: FSet, method: str = "analytic", tol: float = 1e-12) -> bool:
    """True when no two JPFs in ``pool`` cross or touch on ``fset`` unless identical.

    ``method="analytic"`` evaluates every JPF at the interval end points and at
    all clamp kinks inside the interval.  Differences of clamped affine maps are
    linear between consecutive kinks, so sign changes and zeros are decided
    exactly from those nodes.  ``method="grid"`` evaluates on ``fset.grid()``.
    """
    pool = list(pool)
    if not pool:
        raise ValueError("pool must be non-empty")
    if method == "grid":
        nodes = fset.grid()
    elif method == "analytic":
        nodes = [fset.lo, fset.hi]
        for jpf in pool:
            nodes.extend(k for k in jpf.kinks() if fset.lo < k < fset.hi)
        nodes = np.unique(np.asarray(nodes, dtype=float))
    else:
        raise ValueError(f"unknown method {method!r}")
    a = np.array([j.a for j in pool])[:, None]
    b = np.array([j.b for j in pool])[:, None]
    return _pairwise_separated(eval_affine(a, b, nodes[None, :]), tol)


@dataclass(frozen=True)
class VerdictModel:
    """Maps the seated jury's predispositions to a conviction probability.

    ``threshold``: convict iff the most lenient juror is at least ``tau``.
    ``logistic``: convict with probability ``expit(beta * (min - tau))``.
    """

    kind: str
    tau: float
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in _VERDICT_KINDS:
            raise ValueError(f"unknown verdict kind {self.kind!r}")
        if not np.isfinite(self.tau):
            raise ValueError("tau must be finite")
        if self.kind == "logistic" and (self.beta is None or not self.beta > 0):
            raise ValueError("logistic verdict needs beta > 0")

    @classmethod
    def threshold(cls, tau):
        return cls("threshold", float(tau))

    @classmethod
    def logistic(cls, beta, tau):
        return cls("logistic", float(tau), float(beta))

    def probability_from_min(self, m):
        m = np.asarray(m, dtype=float)
        if self.kind == "threshold":
            return (m >= self.tau).astype(float)
        return expit(self.beta * (m - self.tau))

    def conviction_probability(self, predispositions, jury_size=JURY_SIZE):
        """Exact conviction probability; accepts one jury or an (n, jury_size) batch."""
        x = np.asarray(predispositions, dtype=float)
        if x.shape[-1:] != (jury_size,) or x.ndim > 2:
            raise ValueError(f"expected {jury_size} predispositions per jury, got shape {x.shape}")
        p = self.probability_from_min(x.min(axis=-1))
        return float(p) if x.ndim == 1 else p

    def verdict(self, predispositions, rng=None, jury_size=JURY_SIZE):
        p = self.conviction_probability(predispositions, jury_size)
        if self.kind == "threshold":
            return int(p)
        if rng is None:
            raise ValueError("logistic verdicts need an rng")
        return int(rng.random() < p)

    def to_dict(self):
        d = {"kind": self.kind, "tau": self.tau}
        if self.kind == "logistic":
            d["beta"] = self.beta
        return d

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") == "threshold":
            return cls.threshold(d["tau"])
        if d.get("kind") == "logistic":
            return cls.logistic(d["beta"], d["tau"])
        raise ValueError(f"unknown verdict kind {d.get('kind')!r}")


def conviction_probability(model: VerdictModel, predispositions, jury_size=JURY_SIZE):
    return model.conviction_probability(predispositions, jury_size)


def verdict(model: VerdictModel, predispositions, rng=None, jury_size=JURY_SIZE) -> int:
    return model.verdict(predispositions, rng, jury_size)
