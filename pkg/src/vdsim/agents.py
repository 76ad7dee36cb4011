"""Attorney strike policies and the full-information strike game solver.

Policies are evaluated in batch: the selection engine hands them a
:class:`DecisionContext` describing the current candidate for every case in
the batch, and they return one boolean per case (``True`` = strike).  The
engine enforces strike budgets itself, so a policy that asks for a strike it
does not have is recorded as a violation and treated as a pass.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import PoolExhausted, StateBudgetExceeded
from .model import JURY_SIZE, Jpf, VerdictModel


class Side(str, enum.Enum):
    DEFENSE = "defense"
    PROSECUTION = "prosecution"

    @property
    def other(self):
        return Side.PROSECUTION if self is Side.DEFENSE else Side.DEFENSE

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"def": cls.DEFENSE, "d": cls.DEFENSE, "pros": cls.PROSECUTION, "p": cls.PROSECUTION}
        v = str(value).lower()
        return aliases.get(v) or cls(v)


class Action(str, enum.Enum):
    STRIKE = "strike"
    PASS = "pass"


def _worse(side, x, y):
    """Elementwise: is x strictly worse than y for ``side``?"""
    return (x > y) if side is Side.DEFENSE else (x < y)


@dataclass
class DecisionContext:
    """State seen by a policy when deciding on survivor position ``t``.

    Array fields are row-aligned over the cases in a batch; ``own`` and
    ``other`` hold perceived predispositions of every survivor (NaN padded).
    """

    side: Side
    t: int
    own: np.ndarray
    other: np.ndarray
    ids: np.ndarray
    n_survivors: np.ndarray
    seated: np.ndarray
    seated_pos: np.ndarray
    own_left: np.ndarray
    other_left: np.ndarray
    facts: np.ndarray
    active: np.ndarray
    uniforms: np.ndarray | None = None
    jury_size: int = JURY_SIZE

    @property
    def candidate(self):
        return self.own[:, self.t]

    @property
    def window_size(self):
        """Candidates that can still be reached: open seats plus both budgets."""
        reach = (self.jury_size - self.seated) + self.own_left + self.other_left
        return np.minimum(reach, self.n_survivors - self.t)


class StrategyPolicy:
    """Base class.  Subclasses implement :meth:`decide`."""

    kind = "abstract"
    #: True when decisions depend on perceived values only through their order
    rank_only = False

    def prepare(self, batch):
        return None

    def decide(self, ctx: DecisionContext, plan=None) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self):
        return {"kind": self.kind}

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.to_dict().items() if k != "kind")
        return f"{type(self).__name__}({params})"

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self))


class NeverStrike(StrategyPolicy):
    kind = "never"
    rank_only = True

    def decide(self, ctx, plan=None):
        return np.zeros(len(ctx.active), dtype=bool)


class AlwaysStrike(StrategyPolicy):
    kind = "always"
    rank_only = True

    def decide(self, ctx, plan=None):
        return ctx.own_left > 0


class RandomStrike(StrategyPolicy):
    """Predisposition-blind: strike with a fixed probability while strikes remain."""

    kind = "random"
    rank_only = True

    def __init__(self, prob):
        if not 0.0 <= prob <= 1.0:
            raise ValueError("prob must lie in [0, 1]")
        self.prob = float(prob)

    def decide(self, ctx, plan=None):
        if ctx.uniforms is None:
            raise ValueError("RandomStrike needs per-candidate uniforms (pass an rng)")
        return (ctx.own_left > 0) & (ctx.uniforms[:, ctx.t] < self.prob)

    def to_dict(self):
        return {"kind": self.kind, "prob": self.prob}


class GreedyRank(StrategyPolicy):
    """Strike candidates ranked in the side's worst quantile of the reachable window.

    With ``s`` strikes left and a window of ``L`` reachable candidates, the
    candidate is struck when at least ``L - s`` window members are strictly
    better than it (so ``q = s / L``).  Ties favour passing.
    """

    kind = "greedy_rank"
    rank_only = True

    def decide(self, ctx, plan=None):
        t = ctx.t
        L = ctx.window_size
        s = ctx.own_left
        width = int(max(L.max(initial=0), 1))
        block = ctx.own[:, t:t + width]
        offsets = np.arange(block.shape[1])
        in_window = offsets[None, :] < L[:, None]
        cand = ctx.own[:, t][:, None]
        better = np.where(in_window, _worse(ctx.side, cand, block), False).sum(axis=1)
        return (s > 0) & ((s >= L) | (better >= L - s))


class Benchmark(StrategyPolicy):
    """Strike any candidate perceived as worse than a reference juror.

    The reference is a JPF evaluated at the case's fact index, so on pools
    whose JPFs do not cross the reference the decision is the same for every
    fact index.
    """

    kind = "benchmark"

    def __init__(self, reference: Jpf):
        self.reference = reference

    def decide(self, ctx, plan=None):
        ref = self.reference(ctx.facts)
        return (ctx.own_left > 0) & _worse(ctx.side, ctx.candidate, ref)

    def to_dict(self):
        return {"kind": self.kind, "reference": self.reference.to_dict()}


class Scripted(StrategyPolicy):
    """Strike exactly the listed juror ids (when reached and budget allows)."""

    kind = "scripted"

    def __init__(self, strike_ids):
        self.strike_ids = frozenset(int(i) for i in strike_ids)

    @classmethod
    def from_sheet(cls, sheet, side):
        code = "D" if Side.parse(side) is Side.DEFENSE else "P"
        return cls(e.juror_id for e in sheet.entries if e.disposition == code)

    def decide(self, ctx, plan=None):
        cand = ctx.ids[:, ctx.t]
        hit = np.fromiter((int(i) in self.strike_ids for i in cand), dtype=bool, count=len(cand))
        return hit & (ctx.own_left > 0)

    def to_dict(self):
        return {"kind": self.kind, "strike_ids": sorted(self.strike_ids)}


class Equilibrium(StrategyPolicy):
    """Play the subgame-perfect strategy from :class:`EquilibriumSolver`."""

    kind = "equilibrium"

    def __init__(self, verdict_model: VerdictModel, max_states=2_000_000):
        self.verdict_model = verdict_model
        self.max_states = max_states

    def prepare(self, batch):
        return {"batch": batch}

    def _solver(self, plan, ctx, row):
        solver = plan.get(row)
        if solver is None:
            batch = plan.get("batch")
            if batch is None:
                raise RuntimeError("equilibrium policy needs prepare(batch) before decide")
            n = int(batch.n_survivors[row])
            limit = int(np.asarray(batch.limits)[row])
            solver = EquilibriumSolver(batch.pros_values[row, :n], batch.def_values[row, :n], limit, limit,
                                       self.verdict_model, jury_size=batch.jury_size, max_states=self.max_states)
            plan[row] = solver
        return solver

    def decide(self, ctx, plan=None):
        if plan is None:
            plan = {}
        out = np.zeros(len(ctx.active), dtype=bool)
        for row in np.flatnonzero(ctx.active):
            solver = self._solver(plan, ctx, row)
            k = int(ctx.seated[row])
            seated = tuple(int(p) for p in ctx.seated_pos[row, :k])
            if ctx.side is Side.PROSECUTION:
                pl, dl = int(ctx.own_left[row]), int(ctx.other_left[row])
            else:
                pl, dl = int(ctx.other_left[row]), int(ctx.own_left[row])
            state = solver.state(ctx.t, seated, pl, dl, ctx.side)
            out[row] = solver.decision(state) is Action.STRIKE
        return out

    def to_dict(self):
        return {"kind": self.kind, "verdict": self.verdict_model.to_dict()}


def policy_from_dict(d) -> StrategyPolicy:
    kind = d.get("kind")
    if kind == "never":
        return NeverStrike()
    if kind == "always":
        return AlwaysStrike()
    if kind == "greedy_rank":
        return GreedyRank()
    if kind == "random":
        return RandomStrike(d["prob"])
    if kind == "benchmark":
        return Benchmark(Jpf.from_dict(d["reference"]))
    if kind == "scripted":
        return Scripted(d["strike_ids"])
    if kind == "equilibrium":
        return Equilibrium(VerdictModel.from_dict(d["verdict"]))
    raise ValueError(f"unknown policy kind {kind!r}")


# --------------------------------------------------------------------------
# Scalar decision rules


def last_strike_decision(side, seated: Sequence[float], replacement: float) -> Action:
    """Last-strike rule with a known replacement juror.

    The defense strikes when its worst seated juror (highest predisposition)
    is strictly worse than the replacement; the prosecution mirrors this on
    the most lenient juror.
    """
    side = Side.parse(side)
    seated = np.asarray(seated, dtype=float)
    if seated.shape != (JURY_SIZE,):
        raise ValueError(f"expected {JURY_SIZE} seated predispositions, got shape {seated.shape}")
    if side is Side.DEFENSE:
        strike = seated.max() > replacement
    else:
        strike = seated.min() < replacement
    return Action.STRIKE if strike else Action.PASS


@dataclass(frozen=True)
class GameState:
    """Node of the strike game.

    ``seated`` is the sorted tuple of (prosecution view, defense view) pairs,
    discretised to the solver resolution.
    """

    candidate: int
    seated: tuple
    pros_left: int
    def_left: int
    mover: Side

    def __post_init__(self):
        if len(self.seated) > JURY_SIZE:
            raise ValueError("more than six seated jurors")
        if self.pros_left < 0 or self.def_left < 0:
            raise ValueError("strikes remaining must be non-negative")


def greedy_rank_decide(side, strikes_remaining: int, candidate: float, suffix: Sequence[float]) -> Action:
    """Scalar form of :class:`GreedyRank`.

    ``suffix`` is the reachable window starting at the candidate itself.
    """
    side = Side.parse(side)
    suffix = np.asarray(suffix, dtype=float)
    L = len(suffix)
    s = int(strikes_remaining)
    if s <= 0 or L == 0:
        return Action.PASS
    better = int(_worse(side, candidate, suffix).sum())
    return Action.STRIKE if (s >= L or better >= L - s) else Action.PASS


# --------------------------------------------------------------------------
# Backward induction


@dataclass
class _Node:
    value: tuple
    strike: bool


class EquilibriumSolver:
    """Memoised alternating-move backward induction for the one-pass strike game.

    Each side evaluates terminal juries with its own perceived predispositions;
    the prosecution maximises and the defense minimises its view of the
    conviction probability.  With identical perceptions this is the zero-sum
    game and the two components of :meth:`value` coincide.  Ties favour
    passing.
    """

    def __init__(self, pros_values, def_values, pros_limit, def_limit, verdict_model,
                 jury_size=JURY_SIZE, resolution=1e-6, max_states=2_000_000):
        pros_values = np.asarray(pros_values, dtype=float)
        def_values = np.asarray(def_values, dtype=float)
        if pros_values.shape != def_values.shape or pros_values.ndim != 1:
            raise ValueError("perceived value arrays must be 1-d and equal length")
        if len(pros_values) < jury_size:
            raise PoolExhausted(f"{len(pros_values)} survivors cannot seat a jury of {jury_size}")
        self.n = len(pros_values)
        self.jury_size = jury_size
        self.resolution = resolution
        self.verdict_model = verdict_model
        self.max_states = max_states
        self._keys = [
            (int(round(p / resolution)), int(round(d / resolution)))
            for p, d in zip(pros_values, def_values)
        ]
        # terminal payoffs use a representative input value for each key
        self._repr = {}
        for key, p, d in zip(self._keys, pros_values, def_values):
            self._repr.setdefault(key, (float(p), float(d)))
        self.pros_limit = int(pros_limit)
        self.def_limit = int(def_limit)
        self._memo: dict = {}

    @property
    def n_states(self):
        return len(self._memo)

    def state(self, candidate, seated_positions, pros_left, def_left, mover) -> GameState:
        seated = tuple(sorted(self._keys[p] for p in seated_positions))
        return GameState(candidate, seated, pros_left, def_left, Side.parse(mover))

    @property
    def root(self):
        return GameState(0, (), self.pros_limit, self.def_limit, Side.PROSECUTION)

    def _terminal(self, seated):
        arr = np.array([self._repr[k] for k in seated])
        vm, S = self.verdict_model, self.jury_size
        return (vm.conviction_probability(arr[:, 0], S), vm.conviction_probability(arr[:, 1], S))

    def _can_strike(self, i, seated):
        return self.n - (i + 1) >= self.jury_size - len(seated)

    def _solve(self, s: GameState) -> _Node:
        node = self._memo.get(s)
        if node is not None:
            return node
        if len(self._memo) >= self.max_states:
            raise StateBudgetExceeded(f"more than {self.max_states} game states")
        i, seated = s.candidate, s.seated
        if s.mover is Side.PROSECUTION:
            passed = self._solve(GameState(i, seated, s.pros_left, s.def_left, Side.DEFENSE)).value
            if s.pros_left > 0 and self._can_strike(i, seated):
                struck = self._solve(GameState(i + 1, seated, s.pros_left - 1, s.def_left, Side.PROSECUTION)).value
                node = _Node(struck, True) if struck[0] > passed[0] else _Node(passed, False)
            else:
                node = _Node(passed, False)
        else:
            new = tuple(sorted(seated + (self._keys[i],)))
            if len(new) == self.jury_size:
                passed = self._terminal(new)
            else:
                passed = self._solve(GameState(i + 1, new, s.pros_left, s.def_left, Side.PROSECUTION)).value
            if s.def_left > 0 and self._can_strike(i, seated):
                struck = self._solve(GameState(i + 1, seated, s.pros_left, s.def_left - 1, Side.PROSECUTION)).value
                node = _Node(struck, True) if struck[1] < passed[1] else _Node(passed, False)
            else:
                node = _Node(passed, False)
        self._memo[s] = node
        return node

    def value(self, state: GameState | None = None):
        """(prosecution view, defense view) conviction probability under equilibrium play."""
        return self._solve(state or self.root).value

    def decision(self, state: GameState | None = None) -> Action:
        return Action.STRIKE if self._solve(state or self.root).strike else Action.PASS


@dataclass
class EquilibriumSolution:
    value: float
    value_by_side: tuple
    root_decision: Action
    solver: EquilibriumSolver = field(repr=False)

    def decision(self, state):
        return self.solver.decision(state)


def solve_equilibrium(pros_values, def_values, limits, verdict_model, jury_size=JURY_SIZE,
                      max_states=2_000_000) -> EquilibriumSolution:
    """Solve the strike game among cause-strike survivors.

    ``limits`` is ``(prosecution, defense)`` or a single int for both.  The
    reported ``value`` is the prosecution's view, which equals the defense's
    view when both perceive the pool identically.
    """
    if np.ndim(limits) == 0:
        limits = (int(limits), int(limits))
    if len(pros_values) > 24:
        raise ValueError("the exact solver is limited to 24 survivors")
    solver = EquilibriumSolver(pros_values, def_values, limits[0], limits[1], verdict_model,
                               jury_size=jury_size, max_states=max_states)
    val = solver.value()
    return EquilibriumSolution(val[0], val, solver.decision(), solver)
