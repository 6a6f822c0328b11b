"""Positive expansiveness on reference rules; sensitivity of the counter automaton.

``find_nplus`` searches the least ``N`` such that two configurations equal
left of ``-r`` whose central windows ``[-r, r]`` agree for ``N`` steps must
also agree on ``[r, 2r]``; the mirrored condition gives ``N^-``.  Both are
finite for a positively expansive rule, and ``r / max(N+, N-)`` bounds the
exponents from below.

Sensitivity runs put a silent (all-zero) region left of the leftmost
emitter.  Zero is quiescent and ``F_d`` only looks left, so such a window
evolves exactly for any number of steps without losing cells.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import kernels
from .automaton import COUNTER_ALPHABET, E
from .engine import RuleTable, WindowConfig
from .measures import MeasureParams, sample_lengths
from .model import real_period_formula

CENTRE = (-1, 1)


# ---------------------------------------------------------------------------
# positive expansiveness


@dataclass
class ExpansivityReport:
    n_plus: Optional[int]
    n_minus: Optional[int]
    cap: int
    radius: int
    patterns: dict = field(default_factory=dict)

    @property
    def found(self):
        return self.n_plus is not None and self.n_minus is not None

    @property
    def n(self):
        return max(self.n_plus, self.n_minus) if self.found else None

    @property
    def lambda_bound(self):
        return Fraction(self.radius, self.n) if self.found else None

    def summary(self):
        if not self.found:
            return f"not found <= {self.cap} (N+={self.n_plus}, N-={self.n_minus})"
        return f"N+={self.n_plus} N-={self.n_minus} Lambda={self.lambda_bound}"


def _mirror(rule: RuleTable) -> RuleTable:
    k, r = rule.alphabet.size, rule.radius
    t = rule.table.reshape((k,) * (2 * r + 1))
    t = np.transpose(t, axes=tuple(range(2 * r, -1, -1)))
    return RuleTable(rule.alphabet, r, t.ravel(), name=f"{rule.name}~")


def _traces(rule, cells, N):
    """Central windows ``[-r, r]`` at steps ``1..N``; ``cells`` cover
    ``[-r - rN, r + rN]`` (column ``j`` is coordinate ``j - r - rN``)."""
    r = rule.radius
    cur = cells
    out = []
    for m in range(1, N + 1):
        cur = rule.apply(cur)
        c = r * (N - m)  # coordinate -r sits at column c after m steps
        out.append(cur[:, c : c + 2 * r + 1])
    return np.concatenate(out, axis=1)


def _holds(rule, N):
    """No counterexample at depth ``N``; returns ``(ok, patterns checked)``."""
    k, r = rule.alphabet.size, rule.radius
    left_w = r * N
    right_w = 2 * r + 1 + r * N
    rights = np.array(list(itertools.product(range(k), repeat=right_w)), dtype=np.uint8)
    target = slice(left_w + 2 * r, left_w + 3 * r + 1)  # coordinates r..2r
    checked = 0
    for left in itertools.product(range(k), repeat=left_w):
        cells = np.concatenate([np.tile(np.array(left, dtype=np.uint8), (len(rights), 1)), rights], axis=1)
        tr = _traces(rule, cells, N)
        key = np.concatenate([tr, cells[:, target]], axis=1)
        checked += len(rights)
        tv = np.ascontiguousarray(tr).view(np.dtype((np.void, tr.shape[1]))).ravel()
        kv = np.ascontiguousarray(key).view(np.dtype((np.void, key.shape[1]))).ravel()
        if len(np.unique(tv)) != len(np.unique(kv)):
            return False, checked
    return True, checked


def find_nplus(rule: RuleTable, cap: int = 6) -> ExpansivityReport:
    """Exhaustive search for ``N+`` (and the mirrored ``N-``) up to ``cap``."""
    rep = ExpansivityReport(None, None, cap, rule.radius)
    for side, rr in (("+", rule), ("-", _mirror(rule))):
        for N in range(1, cap + 1):
            if rule.alphabet.size ** (rule.radius * (2 * N + 2) + 1) > 1 << 24:
                break
            ok, count = _holds(rr, N)
            rep.patterns[f"{side}{N}"] = count
            if ok:
                if side == "+":
                    rep.n_plus = N
                else:
                    rep.n_minus = N
                break
    return rep


def verify_nplus(rule: RuleTable, N: int) -> bool:
    """Independent pairwise check of the defining property at depth ``N``."""
    k, r = rule.alphabet.size, rule.radius
    width = 2 * r + 2 * r * N + 1
    allc = np.array(list(itertools.product(range(k), repeat=width)), dtype=np.uint8)
    tr = _traces(rule, allc, N)
    lw = r * N
    for i in range(len(allc)):
        same_left = np.all(allc[:, :lw] == allc[i, :lw], axis=1)
        same_trace = np.all(tr == tr[i], axis=1)
        differ = np.any(allc[:, lw + 2 * r : lw + 3 * r + 1] != allc[i, lw + 2 * r : lw + 3 * r + 1], axis=1)
        if np.any(same_left & same_trace & differ):
            return False
    return True


@dataclass
class GrowthCheck:
    rows: list
    status: str


def expansive_growth_check(rule, report: ExpansivityReport, x: WindowConfig, t_max: int = 8, side="-"):
    """Check ``I_{tN}(x) >= (t + 1) r`` through brackets for ``t <= t_max``."""
    from .lyapunov import bracket

    if not report.found:
        return GrowthCheck([], "fail: no expansiveness constant")
    N = report.n_minus if side == "-" else report.n_plus
    rows, status = [], "pass"
    for t in range(1, t_max + 1):
        b = bracket(x, rule, t * N, side)
        need = (t + 1) * rule.radius
        verdict = "pass" if b.lower >= need else ("fail" if b.upper < need else "inconclusive")
        rows.append((t, t * N, b.lower, b.upper, need, verdict))
        if verdict == "fail":
            status = "fail"
        elif verdict == "inconclusive" and status == "pass":
            status = "inconclusive"
    return GrowthCheck(rows, status)


# ---------------------------------------------------------------------------
# sensitivity of the counter automaton


@dataclass
class SilentLine:
    """Counters ``-K..-1`` then counter 0 up to coordinate 1, with a silent
    region further left.  ``digits[j]`` belongs to counter ``j - K``."""

    lengths: list
    digits: list

    def cells(self, pad=2):
        out = [0] * pad
        for d in self.digits[:-1]:
            out.append(E)
            out.extend(d)
        out.append(E)
        out.extend(self.digits[-1][:1])
        return np.array(out, dtype=np.uint8)

    def origin_column(self, pad=2):
        return len(self.cells(pad)) - 2


def sample_silent_line(params: MeasureParams, rng, K: Optional[int] = None) -> SilentLine:
    K = K or params.half_width
    ls = sample_lengths(params, K + 1, rng).tolist()
    digits = [rng.integers(0, 2, size=l).astype(np.uint8).tolist() for l in ls]
    return SilentLine(ls, digits)


def resize(line: SilentLine, depth: int, new_length: int) -> SilentLine:
    """Change counter ``-depth``; its rightmost digits are kept, new digits
    are zeros added on its left, so cells right of it are untouched."""
    j = len(line.lengths) - 1 - depth
    d = list(line.digits[j])
    L = len(d)
    d = [0] * (new_length - L) + d if new_length >= L else d[L - new_length :]
    ls = list(line.lengths)
    ls[j] = new_length
    digits = [list(v) for v in line.digits]
    digits[j] = d
    return SilentLine(ls, digits)


def period_gap(x: SilentLine, y: SilentLine):
    """Exact rates of counter 0 on both silent lines, their gap and the gap
    left after subtracting the tail bounds of the infinite-line formula."""
    nx = real_period_formula(x.lengths[::-1])
    ny = real_period_formula(y.lengths[::-1])
    gap = abs(nx.value - ny.value)
    return gap, gap - nx.truncation_error - ny.truncation_error


@dataclass
class DivergenceRecord:
    depth: int
    pair: int
    description: str
    time: Optional[int]
    horizon: int
    gap: Fraction
    margin: Fraction
    x: str = ""
    y: str = ""

    @property
    def censored(self):
        return self.time is None

    def row(self):
        return {
            "depth": self.depth,
            "pair": self.pair,
            "time": "" if self.time is None else self.time,
            "censored": int(self.censored),
            "period_gap": float(self.gap),
            "gap_exact": str(self.gap),
        }


def _aligned(x: SilentLine, y: SilentLine):
    a, b = x.cells(), y.cells()
    w = max(len(a), len(b))
    a = np.concatenate([np.zeros(w - len(a), np.uint8), a])
    b = np.concatenate([np.zeros(w - len(b), np.uint8), b])
    return a, b, w - 2


def divergence_time(x: SilentLine, y: SilentLine, T_max: int):
    a, b, oc = _aligned(x, y)
    t = int(kernels.fd_anchored_divergence(a, b, oc - 1, oc + 2, T_max))
    return None if t < 0 else t


def sensitivity_divergence(x: SilentLine, depth: int = 1, new_length: Optional[int] = None, T_max=10**5, pair=0):
    """First ``t <= T_max`` at which the cells ``-1, 0, 1`` differ after
    resizing counter ``-depth`` (default: one digit longer)."""
    j = len(x.lengths) - 1 - depth
    new_length = new_length or x.lengths[j] + 1
    y = resize(x, depth, new_length)
    gap, margin = period_gap(x, y)
    t = divergence_time(x, y, T_max) if y.lengths != x.lengths or y.digits != x.digits else None
    desc = f"counter -{depth}: {x.lengths[j]} -> {new_length}"
    A = COUNTER_ALPHABET
    return DivergenceRecord(depth, pair, desc, t, T_max, gap, margin, A.decode(x.cells()), A.decode(y.cells()))


def replay_record(rec: DivergenceRecord) -> Optional[int]:
    a = COUNTER_ALPHABET.encode(rec.x)
    b = COUNTER_ALPHABET.encode(rec.y)
    w = max(len(a), len(b))
    a = np.concatenate([np.zeros(w - len(a), np.uint8), a])
    b = np.concatenate([np.zeros(w - len(b), np.uint8), b])
    t = int(kernels.fd_anchored_divergence(a, b, w - 3, w, rec.horizon))
    return None if t < 0 else t


def resample_left(x: SilentLine, depth: int, params: MeasureParams, rng) -> SilentLine:
    """Fresh lengths and digits for counters ``-depth`` and further left."""
    keep = len(x.lengths) - depth
    fresh = sample_silent_line(params, rng, K=len(x.lengths) - 1)
    ls = fresh.lengths[:keep] + list(x.lengths[keep:])
    ds = [list(v) for v in fresh.digits[:keep]] + [list(v) for v in x.digits[keep:]]
    return SilentLine(ls, ds)


@dataclass
class MuExpansiveness:
    depth: int
    pairs: int
    diverged: int
    horizon: int
    times: list

    @property
    def fraction(self):
        return self.diverged / self.pairs if self.pairs else 0.0

    def fraction_by(self, T):
        return sum(1 for t in self.times if t is not None and t <= T) / self.pairs if self.pairs else 0.0


def mu_expansiveness_stat(params: MeasureParams, pairs: int, T_max: int, depth: int = 1, identical=False):
    """Fraction of pairs ``(x, y)``, ``y`` resampled from counter ``-depth``
    leftwards, whose cells ``-1, 0, 1`` differ within ``T_max`` steps."""
    times = []
    for ss in np.random.SeedSequence([params.seed, depth]).spawn(pairs):
        rng = np.random.default_rng(ss)
        x = sample_silent_line(params, rng)
        y = x if identical else resample_left(x, depth, params, rng)
        times.append(divergence_time(x, y, T_max))
    return MuExpansiveness(depth, pairs, sum(t is not None for t in times), T_max, times)


def write_divergence_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["depth", "pair", "time", "censored", "period_gap", "gap_exact"])
        w.writeheader()
        for r in records:
            w.writerow(r.row())
