"""Counter model ``H``: a line of counters ``(l, c, r)`` and its link to ``F``.

Each step every counter is incremented by ``a = 1``, or ``a = 2`` when its
left neighbour has ``r == 1`` (an overflow arriving).  A counter that wraps
starts a countdown ``r = l, l-1, ..., 1, 0``; the step at which ``r == 1`` is
the step its overflow reaches the right neighbour.

Reliability: when the input of the leftmost counter is unknown, counter ``i``
may be wrong from time ``u_i`` on, with ``u_first = 1`` and
``u_{i+1} = u_i + l_i``.  A wrong input can only change whether a wrap starts
(``r`` is ``0`` or ``l``), and the countdown itself ignores the input, so a
wrong overflow needs ``l_i`` steps to come out.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import kernels
from .automaton import emitter_positions
from .engine import WindowConfig

MAX_LENGTH = 62
POLICIES = ("unknown", "silent", "overflow")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Counter:
    l: int
    c: int
    r: int = 0

    def __post_init__(self):
        if self.l < 3:
            raise ModelError(f"counter length {self.l} < 3")
        if not 0 <= self.c < (1 << self.l):
            raise ModelError(f"counter state {self.c} outside [0, 2^{self.l})")
        if not 0 <= self.r <= self.l:
            raise ModelError(f"countdown {self.r} outside [0, {self.l}]")

    @property
    def capacity(self):
        return 1 << self.l

    def __str__(self):
        return f"{self.l}:{self.c}:{self.r}"


def increment_counter(u: Counter, a: int) -> Counter:
    """Add ``a`` in {1, 2} following the wrap / countdown rules."""
    if a not in (1, 2):
        raise ModelError("increment must be 1 or 2")
    cap = u.capacity
    c = u.c + a
    if u.r > 0:
        return Counter(u.l, c % cap, u.r - 1)
    if c < cap:
        return Counter(u.l, c, 0)
    return Counter(u.l, c - cap, u.l)


@dataclass
class CounterLine:
    """Counters with consecutive indices ``first, first+1, ...``.

    ``s_positions[k]`` is the absolute coordinate of the emitter left of
    counter ``first + k``; the final entry closes the last counter.
    """

    l: np.ndarray
    c: np.ndarray
    r: np.ndarray
    first: int = 0
    s_positions: Optional[np.ndarray] = None
    time: int = 0
    left: str = "unknown"
    reliable_until: Optional[np.ndarray] = None

    def __post_init__(self):
        self.l = np.asarray(self.l, dtype=np.int64)
        self.c = np.asarray(self.c, dtype=np.int64)
        self.r = np.asarray(self.r, dtype=np.int64)
        if len(self.l) == 0:
            raise ModelError("empty counter line")
        if self.left not in POLICIES:
            raise ModelError(f"left policy must be one of {POLICIES}")
        if np.any(self.l > MAX_LENGTH):
            raise ModelError(f"counter longer than {MAX_LENGTH} digits")
        if self.s_positions is None:
            self.s_positions = np.concatenate([[0], np.cumsum(self.l + 1)]).astype(np.int64)
        self.s_positions = np.asarray(self.s_positions, dtype=np.int64)
        if np.any(np.diff(self.s_positions) - 1 != self.l):
            raise ModelError("lengths inconsistent with emitter positions")
        if self.reliable_until is None:
            if self.left == "unknown":
                u = self.time + 1 + np.concatenate([[0], np.cumsum(self.l[:-1])])
                self.reliable_until = u.astype(np.float64)
            else:
                self.reliable_until = np.full(len(self.l), np.inf)

    @classmethod
    def from_counters(cls, counters, first=0, s0=0, **kw):
        l = [u.l for u in counters]
        s = np.concatenate([[s0], s0 + np.cumsum(np.asarray(l) + 1)])
        return cls(l, [u.c for u in counters], [u.r for u in counters], first=first, s_positions=s, **kw)

    def __len__(self):
        return len(self.l)

    @property
    def indices(self):
        return range(self.first, self.first + len(self.l))

    def counter(self, i) -> Counter:
        k = i - self.first
        return Counter(int(self.l[k]), int(self.c[k]), int(self.r[k]))

    def counters(self):
        return [self.counter(i) for i in self.indices]

    def reliable(self):
        return self.time < self.reliable_until

    @property
    def origin_index(self):
        """Index ``i`` with ``s_i <= 0 < s_{i+1}``, if visible."""
        s = self.s_positions
        k = np.flatnonzero((s[:-1] <= 0) & (s[1:] > 0))
        return self.first + int(k[0]) if len(k) else None

    def by_position(self):
        """``{left emitter coordinate: (l, c, r)}`` for reliable counters."""
        ok = self.reliable()
        return {
            int(s): (int(a), int(b), int(cr))
            for s, a, b, cr, good in zip(self.s_positions[:-1], self.l, self.c, self.r, ok)
            if good
        }


def _drive(policy, steps, stream=None):
    if stream is not None:
        return np.asarray(stream, dtype=np.int64)
    return np.full(steps, 2 if policy == "overflow" else 1, dtype=np.int64)


def run_H(line: CounterLine, steps: int, record=False, stream=None):
    """Iterate ``H`` ``steps`` times.

    ``stream`` optionally fixes the increment (1 or 2) fed to the leftmost
    counter at each step.  Returns the new line, the per-counter overflow
    counts ``#{t in [0, steps): r_i(t) == 1}`` and, if ``record``, the
    ``(c, r)`` histories of shape ``(steps + 1, m)``.
    """
    drive = _drive(line.left, steps, stream)
    c, r, counts, hc, hr = kernels.h_run(line.l, line.c, line.r, drive, record)
    new = CounterLine(
        line.l,
        c,
        r,
        first=line.first,
        s_positions=line.s_positions,
        time=line.time + steps,
        left=line.left,
        reliable_until=line.reliable_until,
    )
    if record:
        return new, counts, (hc, hr)
    return new, counts


def step_H(line: CounterLine) -> CounterLine:
    return run_H(line, 1)[0]


def phi(cfg: WindowConfig) -> CounterLine:
    """Counter line of a window: one counter per pair of consecutive emitters
    inside the valid interval.  The leftmost digit has weight 1; a digit
    ``> 1`` carries its overflow to the next position."""
    pos = emitter_positions(cfg)
    if len(pos) < 2:
        raise ModelError("phi needs at least two emitters in the valid interval")
    ls, cs, rs = [], [], []
    for a, b in zip(pos[:-1], pos[1:]):
        digits = cfg.cells[a + 1 - cfg.origin : b - cfg.origin]
        l = len(digits)
        if l < 3:
            raise ModelError(f"counter between {a} and {b} has {l} < 3 digits")
        if l > MAX_LENGTH:
            raise ModelError(f"counter between {a} and {b} longer than {MAX_LENGTH}")
        d = sum(int(v) << j for j, v in enumerate(digits))
        cap = 1 << l
        if d >= cap:
            big = np.flatnonzero(digits > 1)
            r = l + 1 - (int(big[-1]) + 1)
        else:
            r = 0
        ls.append(l)
        cs.append(d % cap)
        rs.append(r)
    lo = cfg.valid[0]
    prefix = cfg.cells[lo - cfg.origin : pos[0] - cfg.origin]
    silent = cfg.left_fill == 0 and lo == cfg.origin and np.all(prefix <= 1)
    first = _first_index(pos)
    return CounterLine(
        ls, cs, rs, first=first, s_positions=np.asarray(pos), time=cfg.time, left="silent" if silent else "unknown"
    )


def _first_index(pos):
    """Index of the leftmost visible counter so that counter 0 satisfies s_0 <= 0 < s_1."""
    pos = np.asarray(pos)
    left = np.flatnonzero(pos <= 0)
    if len(left) == 0:
        # every emitter is right of the origin; counter 0 starts left of the window
        return 1
    return -int(left[-1])


@dataclass
class SemiConjugacyReport:
    steps: int
    compared: int = 0
    mismatches: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.mismatches

    @property
    def first_mismatch(self):
        return self.mismatches[0] if self.mismatches else None


def check_semiconjugacy(cfg: WindowConfig, t: int, rule=None) -> SemiConjugacyReport:
    """Compare ``phi(F^k(cfg))`` with ``H^k(phi(cfg))`` for ``k <= t`` on
    counters valid in both, matched by absolute emitter position."""
    from .automaton import F_RULE, orbit_F

    rule = rule or F_RULE
    diagram = orbit_F(cfg, t, rule)
    line0 = phi(cfg)
    _, _, (hc, hr) = run_H(line0, t, record=True)
    rep = SemiConjugacyReport(steps=t)
    for k, row in enumerate(diagram.rows):
        try:
            ca = phi(row).by_position()
        except ModelError:
            continue
        ok = (line0.time + k) < line0.reliable_until
        for j, s in enumerate(line0.s_positions[:-1]):
            s = int(s)
            if not ok[j] or s not in ca:
                continue
            rep.compared += 1
            model = (int(line0.l[j]), int(hc[k, j]), int(hr[k, j]))
            if ca[s] != model:
                rep.mismatches.append((k, s, ca[s], model))
    return rep


# ---------------------------------------------------------------------------
# real periods


@dataclass(frozen=True)
class PeriodEstimate:
    value: Fraction
    truncation_error: Fraction
    terms_used: int

    @property
    def period(self):
        return 1 / self.value

    def bounds(self):
        return self.value, self.value + self.truncation_error


def real_period_formula(lengths) -> PeriodEstimate:
    """Overflow rate of a counter from the lengths ``l_i, l_{i-1}, ...``
    (own length first, then leftwards), as an exact partial sum with a tail
    bound that uses ``l >= 3`` for every unseen counter."""
    lengths = [int(v) for v in lengths]
    if not lengths:
        raise ModelError("need at least one length")
    if min(lengths) < 3:
        raise ModelError("lengths must be >= 3")
    total = Fraction(0)
    s = 0
    for v in lengths:
        s += v
        total += Fraction(1, 1 << s)
    return PeriodEstimate(total, Fraction(1, 7 * (1 << s)), len(lengths))


def remainder_deviation(line: CounterLine, i: int) -> float:
    """Bound ``D_i`` with ``|n_i^t - N_i t| <= D_i`` on a line with a silent
    or saturating left boundary, ``N_i`` the finite-line rate."""
    k_end = i - line.first
    d = 0.0
    for k in range(k_end + 1):
        cap = float(1 << int(line.l[k]))
        d = 2.0 + (2.0 * line.l[k] + d) / cap
    return d


def finite_line_rate(line: CounterLine, i: int) -> Fraction:
    """Exact overflow rate of counter ``i`` given the line's left boundary."""
    base = {"silent": Fraction(0), "overflow": Fraction(1)}.get(line.left)
    if base is None:
        raise ModelError("finite-line rate needs a silent or overflow boundary")
    n = base
    for k in range(i - line.first + 1):
        n = (1 + n) / (1 << int(line.l[k]))
    return n


@dataclass
class EmpiricalPeriod:
    frequency: float
    count: int
    left_count: int
    steps: int
    bracket: tuple

    @property
    def in_bracket(self):
        lo, hi = self.bracket
        return lo <= self.frequency <= hi


def real_period_empirical(line: CounterLine, i: int, t: int) -> EmpiricalPeriod:
    """Overflow frequency of counter ``i`` over ``t`` steps.

    The counter receives exactly ``t + n_{i-1}`` increments, wraps no more
    than once per countdown, and at most one wrap is pending at either end
    of the run, so ``|n_i - (t + n_{i-1}) / c| < 2``.
    """
    k = i - line.first
    if not 0 <= k < len(line):
        raise ModelError(f"counter {i} not on the line")
    if line.time + t > line.reliable_until[k]:
        raise ModelError(f"counter {i} is reliable only up to time {line.reliable_until[k]}")
    _, counts = run_H(line, t)
    if k > 0:
        prev = int(counts[k - 1])
    else:
        prev = t if line.left == "overflow" else 0
    cap = 1 << int(line.l[k])
    lo = (t + prev - 2 * cap) / cap / t
    hi = (t + prev + 2 * cap) / cap / t
    return EmpiricalPeriod(int(counts[k]) / t, int(counts[k]), prev, t, (lo, hi))


# ---------------------------------------------------------------------------
# crossing time in the model


@dataclass
class ModelCrossing:
    steps: int
    censored: bool
    frontier: Optional[int]
    target: Optional[int]


def _frontier_and_target(s_positions, n, margin):
    s = np.asarray(s_positions)
    fixed = np.flatnonzero(s[:-1] >= -n + margin)
    tgt = np.flatnonzero(s[1:] >= 1)
    f = int(fixed[0]) if len(fixed) else None
    k = int(tgt[0]) if len(tgt) else None
    return f, k


def crossing_time_model(line: CounterLine, n: int, horizon: int = 4096, margin: int = 3) -> ModelCrossing:
    """Steps for which the origin side provably ignores every perturbation
    beyond coordinate ``-n``.

    Counters whose left emitter sits at ``>= -n + margin`` are fixed; the
    leftmost fixed one is driven by a saturating boundary (overflow every
    step) and by a silent one.  Overflow counts are monotone in the input,
    so the first step where the two runs feed different inputs to the first
    counter reaching coordinate 0 bounds every perturbation.
    """
    f, k = _frontier_and_target(line.s_positions, n, margin)
    if k is None:
        raise ModelError("line does not reach coordinate 0")
    if f is None or f >= k:
        return ModelCrossing(0, False, f, k)
    sub = CounterLine(
        line.l[f:k], line.c[f:k], line.r[f:k], s_positions=line.s_positions[f : k + 1], left="overflow"
    )
    _, _, (_, hr_hi) = run_H(sub, horizon, record=True, stream=np.full(horizon, 2))
    _, _, (_, hr_lo) = run_H(sub, horizon, record=True, stream=np.full(horizon, 1))
    diff = np.flatnonzero((hr_hi[:, -1] == 1) != (hr_lo[:, -1] == 1))
    if len(diff) == 0:
        return ModelCrossing(horizon, True, line.first + f, line.first + k)
    return ModelCrossing(int(diff[0]), False, line.first + f, line.first + k)


# ---------------------------------------------------------------------------
# text format


def format_line(line: CounterLine) -> str:
    head = f"first_e={int(line.s_positions[0])} first={line.first} time={line.time} left={line.left}"
    body = " ".join(f"{a}:{b}:{c}" for a, b, c in zip(line.l, line.c, line.r))
    return head + "\n" + body + "\n"


def parse_line(text: str) -> CounterLine:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = dict(tok.split("=", 1) for tok in lines[0].split())
    toks = " ".join(lines[1:]).split()
    trip = [tuple(int(v) for v in tok.split(":")) for tok in toks]
    for u in trip:
        Counter(*u)
    l = np.array([u[0] for u in trip])
    s = int(head["first_e"]) + np.concatenate([[0], np.cumsum(l + 1)])
    return CounterLine(
        l,
        [u[1] for u in trip],
        [u[2] for u in trip],
        first=int(head.get("first", 0)),
        s_positions=s,
        time=int(head.get("time", 0)),
        left=head.get("left", "unknown"),
    )
