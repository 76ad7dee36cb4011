"""One voir dire: cause strikes, alternating peremptory strikes, seating.

The protocol is one-pass.  Survivors of the cause round are considered in
pool order; on each candidate the prosecution decides first and, if it
passes, the defense decides.  A candidate neither side strikes is seated,
and selection stops once six jurors are seated.  Jurors never reached are
marked ``NU``.

:func:`select_batch` runs many independent selections in lock-step over
numpy arrays; :func:`run_selection` is the single-pool wrapper that also
produces a :class:`StrikeSheet`.
"""
from __future__ import annotations

import csv
import enum
import io
import logging
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .agents import DecisionContext, Side, StrategyPolicy
from .errors import PoolExhausted, SheetError
from .model import JURY_SIZE, Jpf, check_fact_index

log = logging.getLogger(__name__)


class OffenseClass(str, enum.Enum):
    MISDEMEANOR = "misdemeanor"
    FELONY = "felony"
    LIFE_FELONY = "life_felony"

    @property
    def strike_limit(self):
        return _LIMITS[self]

    @property
    def felony(self):
        return self is not OffenseClass.MISDEMEANOR

    @property
    def life_eligible(self):
        return self is OffenseClass.LIFE_FELONY


_LIMITS = {OffenseClass.MISDEMEANOR: 3, OffenseClass.FELONY: 6, OffenseClass.LIFE_FELONY: 10}
OFFENSES = tuple(OffenseClass)


def required_survivors(limit, jury_size=JURY_SIZE):
    return jury_size + 2 * limit


@dataclass(frozen=True)
class Covariates:
    black: bool = False
    female: bool = False
    age: float = 46.91
    zip_median_income: float = 62404.0
    party: str = "none"

    def __post_init__(self):
        if self.party not in ("dem", "rep", "none"):
            raise ValueError(f"party must be dem, rep or none, got {self.party!r}")


@dataclass(frozen=True)
class Juror:
    """A pool member.  Perception errors are fixed per juror and side."""

    id: int
    jpf: Jpf
    covariates: Covariates = field(default_factory=Covariates)
    noise_defense: float = 0.0
    noise_prosecution: float = 0.0

    def predisposition(self, fact):
        return float(self.jpf(fact))

    def perceived(self, side, fact):
        eps = self.noise_defense if Side.parse(side) is Side.DEFENSE else self.noise_prosecution
        return float(np.clip(self.jpf(fact) + eps, 0.0, 1.0))


class JuryPool:
    """Jurors ordered by their randomly assigned number."""

    def __init__(self, jurors: Sequence[Juror]):
        jurors = sorted(jurors, key=lambda j: j.id)
        ids = [j.id for j in jurors]
        if len(set(ids)) != len(ids):
            raise ValueError("juror ids must be unique within a pool")
        self.jurors = tuple(jurors)

    @classmethod
    def from_jpfs(cls, jpfs, noise_defense=None, noise_prosecution=None):
        n = len(jpfs)
        nd = np.zeros(n) if noise_defense is None else noise_defense
        npr = np.zeros(n) if noise_prosecution is None else noise_prosecution
        return cls([Juror(i + 1, j, Covariates(), float(nd[i]), float(npr[i])) for i, j in enumerate(jpfs)])

    def __len__(self):
        return len(self.jurors)

    def __iter__(self):
        return iter(self.jurors)

    def __getitem__(self, i):
        return self.jurors[i]

    @property
    def ids(self):
        return [j.id for j in self.jurors]


class CauseProbs(NamedTuple):
    judge: float = 0.308
    prosecution: float = 0.027
    defense: float = 0.023

    @classmethod
    def coerce(cls, probs):
        if isinstance(probs, cls):
            out = probs
        elif isinstance(probs, Mapping):
            get = lambda *keys: next((probs[k] for k in keys if k in probs), 0.0)
            out = cls(get("judge"), get("prosecution", "pros"), get("defense", "def"))
        else:
            out = cls(*probs)
        if any(not 0.0 <= p <= 1.0 for p in out) or sum(out) > 1.0 + 1e-12:
            raise ValueError(f"invalid cause-strike probabilities {tuple(out)}")
        return out


def cause_codes_from_uniforms(u, probs: CauseProbs):
    """Map uniforms to 0 (survives), 1 judge, 2 prosecution, 3 defense.

    A single uniform per juror is split judge -> prosecution -> defense, which
    gives the stated marginal rates with at most one source per juror.
    """
    c1 = probs.judge
    c2 = c1 + probs.prosecution
    c3 = c2 + probs.defense
    return np.select([u < c1, u < c2, u < c3], [1, 2, 3], 0).astype(np.int8)


_CAUSE_LABELS = {1: "JC", 2: "PC", 3: "DC"}


def apply_cause_strikes(pool: JuryPool, probs, rng) -> dict:
    """Return ``{juror_id: "JC" | "PC" | "DC"}`` for jurors struck for cause."""
    probs = CauseProbs.coerce(probs)
    codes = cause_codes_from_uniforms(rng.random(len(pool)), probs)
    return {j.id: _CAUSE_LABELS[int(c)] for j, c in zip(pool, codes) if c}


# --------------------------------------------------------------------------
# Strike sheets

DISPOSITIONS = ("JC", "DC", "PC", "D", "P", "J", "NU")
_STRUCK = frozenset({"JC", "DC", "PC", "D", "P"})


class SheetEntry(NamedTuple):
    juror_id: int
    disposition: str
    ordinal: int | None = None


@dataclass(frozen=True)
class StrikeSheet:
    """Per-juror dispositions in the layout of a courtroom strike sheet."""

    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(sorted(
            (SheetEntry(int(e[0]), str(e[1]), None if e[2] in (None, "") else int(e[2])) for e in self.entries),
            key=lambda e: e.juror_id)))
        for e in self.entries:
            if e.disposition not in DISPOSITIONS:
                raise SheetError(f"juror {e.juror_id}: unknown disposition {e.disposition!r}")

    def __len__(self):
        return len(self.entries)

    def ids_with(self, disposition):
        return [e.juror_id for e in self.entries if e.disposition == disposition]

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["juror_id", "disposition", "ordinal"])
        for e in self.entries:
            w.writerow([e.juror_id, e.disposition, "" if e.ordinal is None else e.ordinal])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source):
        """Read from a path, a file object or CSV text."""
        if hasattr(source, "read"):
            text = source.read()
        elif isinstance(source, str) and "\n" in source:
            text = source
        else:
            with open(source, newline="") as fh:
                text = fh.read()
        rows = list(csv.reader(line for line in io.StringIO(text) if not line.startswith("#")))
        if not rows:
            raise SheetError("strike sheet is empty")
        header = [h.strip() for h in rows[0]]
        if header != ["juror_id", "disposition", "ordinal"]:
            raise SheetError(f"unexpected strike sheet header {header}")
        entries = []
        for r in rows[1:]:
            if not r:
                continue
            try:
                entries.append((int(r[0]), r[1].strip(), r[2].strip() if len(r) > 2 else ""))
            except (ValueError, IndexError) as exc:
                raise SheetError(f"bad strike sheet row {r}: {exc}") from None
        if not entries:
            raise SheetError("strike sheet has no juror rows")
        return cls(tuple(entries))


class ReplayResult(NamedTuple):
    seated: tuple
    def_strikes: int
    pros_strikes: int

    def summary(self, limit):
        def part(name, used):
            tag = " (exhausted)" if used == limit else ""
            return f"{name} {used}/{limit}{tag}"
        return (f"seated: {' '.join(map(str, self.seated))}; "
                f"{part('defense', self.def_strikes)}; {part('prosecution', self.pros_strikes)}")


def _check_ordinals(ordinals, label):
    if any(o is None for o in ordinals):
        raise SheetError(f"{label} entries need an ordinal")
    if len(set(ordinals)) != len(ordinals):
        raise SheetError(f"duplicate {label} ordinals")
    if sorted(ordinals) != list(range(1, len(ordinals) + 1)):
        raise SheetError(f"{label} ordinals must run 1..{len(ordinals)}")


def replay_strike_sheet(sheet: StrikeSheet, pool_size: int | None = None, jury_size=JURY_SIZE) -> ReplayResult:
    """Recover the seated jury and strike tallies from a strike sheet."""
    if len(sheet) == 0:
        raise SheetError("strike sheet is empty")
    ids = [e.juror_id for e in sheet.entries]
    if len(set(ids)) != len(ids):
        raise SheetError("duplicate juror ids")
    P = len(ids) if pool_size is None else int(pool_size)
    if ids != list(range(1, len(ids) + 1)) or len(ids) != P:
        raise SheetError(f"juror ids must be 1..{P}")
    for code in ("D", "P"):
        _check_ordinals([e.ordinal for e in sheet.entries if e.disposition == code], code)
    unstruck = [e.juror_id for e in sheet.entries if e.disposition not in _STRUCK]
    if len(unstruck) < jury_size:
        raise SheetError(f"only {len(unstruck)} unstruck jurors; cannot seat {jury_size}")
    seated = tuple(unstruck[:jury_size])
    marked = [e for e in sheet.entries if e.disposition == "J"]
    if marked:
        if len(marked) != jury_size:
            raise SheetError(f"sheet marks {len(marked)} seated jurors, expected {jury_size}")
        if tuple(e.juror_id for e in marked) != seated:
            raise SheetError("J marks disagree with the first unstruck jurors")
        if [e.ordinal for e in marked] != list(range(1, jury_size + 1)):
            raise SheetError("J ordinals must run 1..6 in pool order")
    return ReplayResult(seated, len(sheet.ids_with("D")), len(sheet.ids_with("P")))


# --------------------------------------------------------------------------
# Strike groups


class StrikeGroup(str, enum.Enum):
    OVER = "over"
    N = "n"
    N1 = "n1"
    N2 = "n2"
    FEWER = "few"


def classify_strike_group(used, limit) -> StrikeGroup:
    if used < 0 or limit < 1:
        raise ValueError("need used >= 0 and limit >= 1")
    gap = limit - used
    if gap < 0:
        return StrikeGroup.OVER
    return {0: StrikeGroup.N, 1: StrikeGroup.N1, 2: StrikeGroup.N2}.get(gap, StrikeGroup.FEWER)


def classify_strike_groups(used, limit):
    """Vectorised :func:`classify_strike_group` returning group labels."""
    gap = np.asarray(limit) - np.asarray(used)
    labels = np.select([gap < 0, gap == 0, gap == 1, gap == 2], ["over", "n", "n1", "n2"], "few")
    return labels.astype(object)


# --------------------------------------------------------------------------
# Batched selection

UNREACHED, PROS_STRUCK, DEF_STRUCK, SEATED = 0, 1, 2, 3


@dataclass
class SelectionBatch:
    """Cause-strike survivors of many pools, compacted to the left (NaN padded)."""

    pros_values: np.ndarray
    def_values: np.ndarray
    ids: np.ndarray
    n_survivors: np.ndarray
    limits: np.ndarray
    facts: np.ndarray
    uniforms: np.ndarray | None = None
    jury_size: int = JURY_SIZE

    def __len__(self):
        return len(self.n_survivors)


@dataclass
class BatchOutcome:
    disposition: np.ndarray
    ordinal: np.ndarray
    pros_used: np.ndarray
    def_used: np.ndarray
    seated_pos: np.ndarray
    violations: np.ndarray
    def_last_decision: np.ndarray


def _context(batch, side, t, seated, seated_pos, pl, dl, active):
    pros = side is Side.PROSECUTION
    return DecisionContext(
        side=side, t=t,
        own=batch.pros_values if pros else batch.def_values,
        other=batch.def_values if pros else batch.pros_values,
        ids=batch.ids, n_survivors=batch.n_survivors,
        seated=seated, seated_pos=seated_pos,
        own_left=pl if pros else dl, other_left=dl if pros else pl,
        facts=batch.facts, active=active,
        uniforms=None if batch.uniforms is None else batch.uniforms[:, :, 0 if pros else 1],
        jury_size=batch.jury_size,
    )


def select_batch(batch: SelectionBatch, pros_policy: StrategyPolicy, def_policy: StrategyPolicy) -> BatchOutcome:
    """Run the one-pass strike protocol on every pool in ``batch``."""
    n, W = batch.pros_values.shape
    S = batch.jury_size
    need = S + 2 * np.asarray(batch.limits)
    short = np.flatnonzero(batch.n_survivors < need)
    if len(short):
        r = int(short[0])
        raise PoolExhausted(
            f"row {r}: {int(batch.n_survivors[r])} survivors after cause strikes, need {int(need[r])}")

    pl = np.asarray(batch.limits, dtype=np.int64).copy()
    dl = pl.copy()
    seated = np.zeros(n, dtype=np.int64)
    seated_pos = np.full((n, S), -1, dtype=np.int64)
    disp = np.zeros((n, W), dtype=np.int8)
    ordinal = np.zeros((n, W), dtype=np.int16)
    violations = np.zeros((n, 2), dtype=np.int64)
    def_last = np.full(n, -1, dtype=np.int64)
    plan_p = pros_policy.prepare(batch)
    plan_d = def_policy.prepare(batch)
    rows = np.arange(n)

    t = 0
    while True:
        active = seated < S
        if not active.any():
            break
        if t >= W:
            raise PoolExhausted("ran past the end of the survivor list")
        ctx = _context(batch, Side.PROSECUTION, t, seated, seated_pos, pl, dl, active)
        req = np.asarray(pros_policy.decide(ctx, plan_p), dtype=bool) & active
        violations[:, 0] += req & (pl == 0)
        sp = req & (pl > 0)

        still = active & ~sp
        ctx = _context(batch, Side.DEFENSE, t, seated, seated_pos, pl, dl, still)
        req = np.asarray(def_policy.decide(ctx, plan_d), dtype=bool) & still
        violations[:, 1] += req & (dl == 0)
        sd = req & (dl > 0)
        def_last[still & (dl > 0)] = t
        seat = still & ~sd

        pl -= sp
        dl -= sd
        disp[sp, t] = PROS_STRUCK
        ordinal[sp, t] = (batch.limits - pl)[sp]
        disp[sd, t] = DEF_STRUCK
        ordinal[sd, t] = (batch.limits - dl)[sd]
        disp[seat, t] = SEATED
        ordinal[seat, t] = seated[seat] + 1
        seated_pos[rows[seat], seated[seat]] = t
        seated += seat
        t += 1

    nv = violations.sum()
    if nv:
        log.warning("policies requested %d strikes with an empty budget; treated as passes", nv)
    limits = np.asarray(batch.limits)
    return BatchOutcome(disp, ordinal, limits - pl, limits - dl, seated_pos, violations, def_last)


# --------------------------------------------------------------------------
# Single selection


@dataclass
class SelectionOutcome:
    seated: tuple
    def_strikes_used: int
    pros_strikes_used: int
    def_exhausted: bool
    pros_exhausted: bool
    cause_counts: dict
    sheet: StrikeSheet
    limit: int
    policy_violations: dict = field(default_factory=dict)

    def to_csv(self):
        return self.sheet.to_csv()


def survivors_of(pool: JuryPool, cause: Mapping | None):
    cause = cause or {}
    return [j for j in pool if j.id not in cause]


def run_selection(pool: JuryPool, offense, def_policy: StrategyPolicy, pros_policy: StrategyPolicy,
                  fact, rng=None, cause: Mapping | None = None, jury_size=JURY_SIZE) -> SelectionOutcome:
    """Run one voir dire on ``pool`` after the cause strikes in ``cause``.

    ``cause`` maps juror ids to ``JC``/``PC``/``DC`` (see
    :func:`apply_cause_strikes`).  ``rng`` is only consumed by randomised
    policies.
    """
    offense = OffenseClass(offense)
    fact = check_fact_index(fact)
    cause = dict(cause or {})
    surv = survivors_of(pool, cause)
    m = len(surv)
    uniforms = None if rng is None else rng.random((1, m, 2))
    batch = SelectionBatch(
        pros_values=np.array([[j.perceived(Side.PROSECUTION, fact) for j in surv]]).reshape(1, m),
        def_values=np.array([[j.perceived(Side.DEFENSE, fact) for j in surv]]).reshape(1, m),
        ids=np.array([[j.id for j in surv]], dtype=np.int64).reshape(1, m),
        n_survivors=np.array([m]),
        limits=np.array([offense.strike_limit]),
        facts=np.array([fact]),
        uniforms=uniforms,
        jury_size=jury_size,
    )
    out = select_batch(batch, pros_policy, def_policy)

    codes = {UNREACHED: "NU", PROS_STRUCK: "P", DEF_STRUCK: "D", SEATED: "J"}
    entries = [(jid, label, None) for jid, label in cause.items()]
    for k, j in enumerate(surv):
        code = int(out.disposition[0, k])
        entries.append((j.id, codes[code], None if code == UNREACHED else int(out.ordinal[0, k])))
    sheet = StrikeSheet(tuple(entries))
    limit = offense.strike_limit
    du, pu = int(out.def_used[0]), int(out.pros_used[0])
    seated = tuple(surv[p].id for p in out.seated_pos[0])
    counts = {"judge": 0, "prosecution": 0, "defense": 0}
    names = {"JC": "judge", "PC": "prosecution", "DC": "defense"}
    for label in cause.values():
        counts[names[label]] += 1
    return SelectionOutcome(
        seated=seated, def_strikes_used=du, pros_strikes_used=pu,
        def_exhausted=du == limit, pros_exhausted=pu == limit,
        cause_counts=counts, sheet=sheet, limit=limit,
        policy_violations={"prosecution": int(out.violations[0, 0]), "defense": int(out.violations[0, 1])},
    )
