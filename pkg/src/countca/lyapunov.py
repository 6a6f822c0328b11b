"""How fast perturbations travel: certified brackets for ``I_n^+`` / ``I_n^-``.

``I_n^+(x)`` is the least ``s`` such that every ``y`` equal to ``x`` on
``[-s, inf)`` keeps ``F^i(y) = F^i(x)`` on ``[0, inf)`` for ``1 <= i <= n``
(mirror image for ``I_n^-``).

* Upper bounds come from certificates: a set-valued orbit with every cell
  left of ``-s`` unknown, and for the counter automaton a counter-resolved
  argument (two extreme input streams bracket every perturbation).
* Lower bounds come from concrete witnesses ``y`` replayed exactly.

Both only ever inspect the cells ``[0, reach)`` next to the origin: the
first disagreement on ``[0, inf)`` must appear there, so windows do not need
to extend far to the right.
"""
from __future__ import annotations

import csv
import itertools
import json
import time as _time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from ._accel import backend_name
from .automaton import E, CounterRule, F_RULE, is_separated
from .engine import WindowConfig, WindowExhausted

SIDES = ("+", "-")


class BracketError(AssertionError):
    pass


# ---------------------------------------------------------------------------
# step schedules


def _is_counter(rule):
    return isinstance(rule, CounterRule)


def _schedule(rule, t):
    """``(exact, sets, lr, rr)`` for step ``t`` (0-based).  Output column ``j``
    of both maps corresponds to input column ``j + lr``."""
    if _is_counter(rule):
        if t == 0:
            return rule.apply, rule.apply_sets, 5, 3
        return rule.apply_separated, rule.apply_sets_separated, 2, 0
    return rule.apply, rule.apply_sets, rule.radius, rule.radius


def _speed(rule, side, t):
    """Cells per step that information can travel towards the origin."""
    if _is_counter(rule):
        if side == "+":
            return 5 if t == 0 else 2
        return 3 if t == 0 else 0
    lr, rr = rule.reach()
    return lr if side == "+" else rr


def reach_bound(rule, n, side="+"):
    """Radius bound: ``I_n <= reach_bound`` for every configuration."""
    return sum(_speed(rule, side, t) for t in range(n))


def _check_region(rule, side, t):
    """Coordinates where a first disagreement at step ``t + 1`` must show."""
    v = _speed(rule, side, t)
    if v == 0:
        return None
    return (0, v - 1) if side == "+" else (-(v - 1), 0)


def _region(x: WindowConfig, a, b):
    """Cells of ``x`` on ``[a, b]`` using fills; ``None`` where unknown."""
    lo, hi = x.valid
    out = np.full(b - a + 1, 255, dtype=np.uint8)
    ia, ib = max(a, lo), min(b, hi)
    if ia <= ib:
        out[ia - a : ib - a + 1] = x.cells[ia - x.origin : ib - x.origin + 1]
    if x.left_fill is not None and lo == x.origin and a < lo:
        out[: min(lo, b + 1) - a] = x.left_fill
    if x.right_fill is not None and hi == x.end and b > hi:
        out[max(hi + 1, a) - a :] = x.right_fill
    return out


# ---------------------------------------------------------------------------
# certificates


def _cellwise_steps(x, rule, s, side, horizon):
    """Leading steps certified by the set-valued orbit (at most ``horizon``)."""
    full = (1 << rule.alphabet.size) - 1
    total_lr = sum(_schedule(rule, t)[2] for t in range(horizon))
    total_rr = sum(_schedule(rule, t)[3] for t in range(horizon))
    if side == "+":
        a, b = -s - 1, 8 + total_rr
    else:
        a, b = -8 - total_lr, s + 1
    cells = _region(x, a, b)
    masks = np.where(cells == 255, full, np.left_shift(1, np.minimum(cells, 7).astype(np.int64))).astype(np.uint8)
    if side == "+":
        masks[0] = full
    else:
        masks[-1] = full
    lo, hi = a, b
    for t in range(horizon):
        _, sets, lr, rr = _schedule(rule, t)
        pad_l = np.full(lr if side == "+" else 0, full, dtype=np.uint8)
        pad_r = np.full(rr if side == "-" else 0, full, dtype=np.uint8)
        m = np.concatenate([pad_l, masks, pad_r])
        lo = lo - len(pad_l) + lr
        hi = hi + len(pad_r) - rr
        if len(m) < lr + rr + 1:
            return t
        masks = sets(m[None, :])[0]
        region = _check_region(rule, side, t)
        if region is None:
            continue
        ra, rb = region
        if ra < lo or rb > hi:
            return t
        chunk = masks[ra - lo : rb - lo + 1]
        if np.any(chunk & (chunk - 1)):
            return t
    return horizon


def _counter_steps(x, s, horizon):
    """Steps certified by the two extreme input streams (counter automaton, ``+`` side)."""
    lo, hi = x.valid
    cells = _region(x, -s, 4)
    if np.any(cells == 255) or not is_separated(cells):
        return 0
    es = [int(j) - s for j in np.flatnonzero(cells == E)]
    es = [p for p in es if p >= -s + 3]
    if not es or es[0] > 0:
        return 0
    e0 = es[0]
    sk = max(p for p in es if p <= 0)
    if horizon <= 1:
        return horizon
    if sk == e0:
        return 1
    seg = np.ascontiguousarray(_region(x, e0 - 2, sk - 1))
    return int(kernels.fd_split(seg, int(seg[1]), int(horizon)))


def certified_steps(x: WindowConfig, rule, s: int, side="+", horizon=64, detail=False):
    """Steps ``T`` such that every perturbation beyond ``s`` leaves the origin
    side unchanged for steps ``1..T`` (``T <= horizon``)."""
    cell = _cellwise_steps(x, rule, s, side, horizon)
    cnt = _counter_steps(x, s, horizon) if (_is_counter(rule) and side == "+") else 0
    best = max(cell, cnt)
    if detail:
        return best, {"cellwise": cell, "counter": cnt}
    return best


# ---------------------------------------------------------------------------
# witnesses


def _diverge(rule, base, a, cands, n, side):
    """First step (1-based) at which each candidate differs from ``base`` in
    the check region, or ``-1``.  ``base`` and ``cands`` cover ``[a, ...]``."""
    arr = np.concatenate([base[None, :], cands]).astype(np.uint8)
    lo = a
    first = np.full(len(cands), -1, dtype=np.int64)
    for t in range(n):
        exact, _, lr, rr = _schedule(rule, t)
        if arr.shape[1] < lr + rr + 1:
            break
        arr = exact(arr)
        lo += lr
        region = _check_region(rule, side, t)
        if region is None:
            continue
        ra, rb = region
        if ra < lo or rb > lo + arr.shape[1] - 1:
            break
        d = np.any(arr[1:, ra - lo : rb - lo + 1] != arr[0, ra - lo : rb - lo + 1], axis=1)
        new = d & (first < 0)
        first[new] = t + 1
        if np.all(first >= 0):
            break
    return first


def _candidates(x, rule, sp, side, budget, rng, a, b, base):
    """Perturbed copies of ``base`` (covering ``[a, b]``) differing from ``x``
    only beyond ``sp``."""
    k = rule.alphabet.size
    rows, meta = [], []
    if side == "+":
        edge = -sp - 1
        room = edge - a + 1
    else:
        edge = sp + 1
        room = b - edge + 1
    if room <= 0:
        return np.empty((0, len(base)), np.uint8), []

    def put(strip, kind):
        w = len(strip)
        y = base.copy()
        if side == "+":
            y[edge - w + 1 - a : edge + 1 - a] = strip
        else:
            y[edge - a : edge - a + w] = strip
        if np.array_equal(y, base):
            return
        rows.append(y)
        meta.append(kind)

    w_ex = max(1, min(room, int(np.log(max(budget, 2)) / np.log(k))))
    for combo in itertools.product(range(k), repeat=w_ex):
        put(np.array(combo, dtype=np.uint8), "exhaustive")
        if len(rows) >= budget:
            break
    if _is_counter(rule):
        for j in range(min(6, room)):
            for sym in (E, 2):
                strip = np.zeros(j + 1, dtype=np.uint8)
                if side == "+":
                    strip[:] = base[edge - j - a : edge + 1 - a]
                    strip[0] = sym
                else:
                    strip[:] = base[edge - a : edge - a + j + 1]
                    strip[-1] = sym
                put(strip, f"insert-{rule.alphabet.chars[sym]}")
    wmax = min(room, 24)
    for _ in range(budget):
        w = int(rng.integers(1, wmax + 1))
        if _is_counter(rule) and rng.random() < 0.5:
            strip = rng.choice(np.array([0, 1, E], dtype=np.uint8), size=w, p=[0.4, 0.4, 0.2])
        else:
            strip = rng.integers(0, k, size=w).astype(np.uint8)
        put(strip, "random")
    if not rows:
        return np.empty((0, len(base)), np.uint8), []
    return np.array(rows, dtype=np.uint8), meta


def find_witness(x, rule, sp, n, side="+", budget=256, rng=None):
    """A ``y`` equal to ``x`` up to ``sp`` that changes the origin side within
    ``n`` steps, as ``(step, cells, interval, kind)``; ``None`` if none found."""
    rng = rng if rng is not None else np.random.default_rng(0)
    total = reach_bound(rule, n, side)
    pad = sum(_schedule(rule, t)[2 if side == "+" else 3] for t in range(n))
    if side == "+":
        a, b = -sp - 1 - min(24, max(1, total)) - pad, 8 + sum(_schedule(rule, t)[3] for t in range(n))
    else:
        a, b = -8 - sum(_schedule(rule, t)[2] for t in range(n)), sp + 1 + min(24, max(1, total)) + pad
    base = _region(x, a, b)
    known = np.flatnonzero(base != 255)
    if len(known) == 0:
        return None
    # trim to the contiguous known part
    ka, kb = int(known[0]), int(known[-1])
    if np.any(base[ka : kb + 1] == 255):
        raise WindowExhausted("window has gaps")
    base = base[ka : kb + 1]
    a, b = a + ka, a + kb
    cands, meta = _candidates(x, rule, sp, side, budget, rng, a, b, base)
    if len(cands) == 0:
        return None
    first = _diverge(rule, base, a, cands, n, side)
    hit = np.flatnonzero(first > 0)
    if len(hit) == 0:
        return None
    j = int(hit[np.argmin(first[hit])])
    return {
        "step": int(first[j]),
        "cells": rule.alphabet.decode(cands[j]),
        "interval": (int(a), int(b)),
        "kind": meta[j],
        "s": int(sp),
    }


# ---------------------------------------------------------------------------
# brackets


@dataclass
class InBracket:
    n: int
    side: str
    lower: int
    upper: int
    witness: Optional[dict] = None
    certificate: Optional[dict] = None
    inconclusive: bool = False

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}")
        if not 0 <= self.lower <= self.upper:
            raise BracketError(f"bracket violated: lower {self.lower} > upper {self.upper} at n={self.n}")

    @property
    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def tight(self):
        return self.lower == self.upper


def in_upper(x: WindowConfig, rule, n: int, side="+"):
    """Least ``s`` (binary search) whose certificate covers ``n`` steps."""
    cap = reach_bound(rule, n, side)
    if n == 0 or cap == 0:
        return 0, {"s": 0, "steps": n, "method": "radius"}
    if certified_steps(x, rule, cap, side, n) < n:
        return cap, {"s": cap, "steps": n, "method": "radius", "inconclusive": True}
    lo, hi = -1, cap
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if certified_steps(x, rule, mid, side, n) >= n:
            hi = mid
        else:
            lo = mid
    _, how = certified_steps(x, rule, hi, side, n, detail=True)
    return hi, {"s": hi, "steps": n, "method": "set-valued" if how["cellwise"] >= n else "counter", **how}


def in_lower(x: WindowConfig, rule, n: int, side="+", budget=256, rng=None, upper=None):
    """Largest witnessed ``s'`` plus one (binary search), with the witness."""
    rng = rng if rng is not None else np.random.default_rng(0)
    if upper is None:
        upper = reach_bound(rule, n, side)
    if upper == 0 or n == 0:
        return 0, None
    w = find_witness(x, rule, upper - 1, n, side, budget, rng)
    if w is not None:
        return upper, w
    lo, hi, best = -1, upper - 1, None
    while hi - lo > 1:
        mid = (lo + hi) // 2
        w = find_witness(x, rule, mid, n, side, budget, rng)
        if w is not None:
            lo, best = mid, w
        else:
            hi = mid
    return lo + 1, best


def bracket(x, rule, n, side="+", budget=256, rng=None) -> InBracket:
    up, cert = in_upper(x, rule, n, side)
    low, wit = in_lower(x, rule, n, side, budget, rng, upper=up)
    return InBracket(n, side, low, up, wit, cert, bool(cert.get("inconclusive", False)))


def replay_witness(x, rule, n, side, witness) -> bool:
    """Re-simulate a witness and confirm it changes the origin side."""
    a, b = witness["interval"]
    base = _region(x, a, b)
    y = rule.alphabet.encode(witness["cells"])
    diff = np.flatnonzero(y != base) + a
    if side == "+" and np.any(diff >= -witness["s"]):
        return False
    if side == "-" and np.any(diff <= witness["s"]):
        return False
    first = _diverge(rule, base, a, y[None, :], n, side)
    return bool(first[0] == witness["step"])


def pointwise_exponents(x, rule, n_grid, side="+", budget=256, seed=0):
    """Brackets along ``n_grid``; the curves are made monotone in ``n``
    (a witness for ``n`` serves every larger ``n``, a certificate every smaller)."""
    rng = np.random.default_rng(seed)
    out = [bracket(x, rule, int(n), side, budget, rng) for n in n_grid]
    order = np.argsort(n_grid)
    best = 0
    for k in order:
        if out[k].lower < best:
            out[k].lower = best
        best = out[k].lower
    best = None
    for k in order[::-1]:
        if best is not None and out[k].upper > best:
            out[k].upper = best
        best = out[k].upper
    for b in out:
        b.__post_init__()
    return out


def exponent_curve(brackets):
    return [(b.n, b.lower / b.n, b.upper / b.n) for b in brackets]


# ---------------------------------------------------------------------------
# Monte Carlo averages


@dataclass
class ExponentEstimate:
    n_grid: list
    side: str
    means: list
    lower_mean: list
    upper_mean: list
    stderr: list
    upper_stderr: list
    sample_count: int
    seed: int
    manifest: dict = field(default_factory=dict)

    def rows(self):
        for k, n in enumerate(self.n_grid):
            yield {
                "n": n,
                "side": self.side,
                "lower_mean": self.lower_mean[k],
                "upper_mean": self.upper_mean[k],
                "stderr": self.stderr[k],
                "samples": self.sample_count,
                "seed": self.seed,
            }

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["n", "side", "lower_mean", "upper_mean", "stderr", "samples", "seed"])
            w.writeheader()
            for row in self.rows():
                w.writerow(row)

    def write_manifest(self, path):
        with open(path, "w") as fh:
            json.dump(self.manifest, fh, indent=2, default=str)


def average_exponents(
    sampler: Callable[[np.random.Generator], WindowConfig],
    rule,
    n_grid,
    samples: int,
    seed: int = 0,
    side="+",
    budget=64,
    upper_only=False,
    params=None,
) -> ExponentEstimate:
    """Sample means of ``I_n / n`` brackets.  ``sampler(rng)`` draws one
    configuration; each sample gets its own child seed."""
    t0 = _time.perf_counter()
    n_grid = [int(n) for n in n_grid]
    children = np.random.SeedSequence(seed).spawn(samples)
    lows = np.zeros((samples, len(n_grid)))
    ups = np.zeros((samples, len(n_grid)))
    for i, ss in enumerate(children):
        rng = np.random.default_rng(ss)
        x = sampler(rng)
        for k, n in enumerate(n_grid):
            up, _ = in_upper(x, rule, n, side)
            low = 0 if upper_only else in_lower(x, rule, n, side, budget, rng, upper=up)[0]
            InBracket(n, side, low, up)
            lows[i, k] = low / n
            ups[i, k] = up / n
    mids = 0.5 * (lows + ups)
    se = lambda a: (a.std(axis=0, ddof=1) / np.sqrt(samples)).tolist() if samples > 1 else [0.0] * len(n_grid)
    manifest = {
        "rule": getattr(rule, "name", repr(rule)),
        "side": side,
        "n_grid": n_grid,
        "samples": samples,
        "seed": seed,
        "budget": budget,
        "upper_only": upper_only,
        "params": asdict(params) if params is not None and hasattr(params, "__dataclass_fields__") else params,
        "backend": backend_name(),
        "wall_time_s": _time.perf_counter() - t0,
    }
    return ExponentEstimate(
        n_grid,
        side,
        mids.mean(axis=0).tolist(),
        lows.mean(axis=0).tolist(),
        ups.mean(axis=0).tolist(),
        se(mids),
        se(ups),
        samples,
        seed,
        manifest,
    )


# ---------------------------------------------------------------------------
# crossing times


@dataclass
class CrossingTime:
    steps: int
    bound: str
    censored: bool
    strategy: str
    witness: Optional[dict] = None
    detail: Optional[dict] = None


def crossing_time_F(x: WindowConfig, n: int, strategy="alphabet-front", horizon=4096, rule=F_RULE):
    """Steps during which nothing beyond coordinate ``-n`` reaches ``[0, inf)``.

    ``alphabet-front`` returns a certified lower bound ``T`` (agreement on
    steps ``1..T`` for every perturbation); ``counter-resize`` returns an
    upper bound from a concrete structural perturbation (the last step
    before it shows).  ``T >= m`` holds exactly when ``I_m^+ <= n``.
    """
    if strategy == "alphabet-front":
        steps, how = certified_steps(x, rule, n, "+", horizon, detail=True)
        return CrossingTime(steps, "lower", steps >= horizon, strategy, detail=how)
    if strategy == "counter-resize":
        return _resize_crossing(x, n, horizon, rule)
    raise ValueError(f"unknown strategy {strategy!r}")


def _resize_crossing(x, n, horizon, rule):
    a = -n - 2 - 2 * horizon - 8
    base = _region(x, a, 8)
    if np.any(base == 255):
        known = np.flatnonzero(base != 255)
        ka = int(known[0])
        if np.any(base[ka:] == 255):
            raise WindowExhausted("window does not reach the origin side")
        base, a = base[ka:], a + ka
    edge = -n - 1 - a
    es = [int(j) for j in np.flatnonzero(base[: edge + 1] == E)]
    cands, kinds = [], []
    if es:
        p = es[-1]
        for shift in (1, 2):
            if p - shift >= 0:
                y = base.copy()
                y[p] = 0
                y[p - shift] = E
                cands.append(y)
                kinds.append(f"resize+{shift}")
    for j in range(max(0, edge - 3), edge + 1):
        for sym in (E, 2):
            y = base.copy()
            y[j] = sym
            if not np.array_equal(y, base):
                cands.append(y)
                kinds.append(f"insert-{rule.alphabet.chars[sym]}@{a + j}")
    if not cands:
        return CrossingTime(horizon, "upper", True, "counter-resize")
    first = _diverge(rule, base, a, np.array(cands, dtype=np.uint8), horizon, "+")
    hit = np.flatnonzero(first > 0)
    if len(hit) == 0:
        return CrossingTime(horizon, "upper", True, "counter-resize")
    j = int(hit[np.argmin(first[hit])])
    wit = {"step": int(first[j]), "kind": kinds[j], "interval": (int(a), int(a + len(base) - 1))}
    return CrossingTime(int(first[j]) - 1, "upper", False, "counter-resize", witness=wit)


def replay_certificate(x: WindowConfig, rule, s: int, side="+", steps=None, trials=100, rng=None):
    """Replay ``trials`` random perturbations beyond ``s`` exactly and count
    those that reach the origin side within ``steps`` (default: the certified
    steps).  A sound certificate gives zero."""
    rng = rng if rng is not None else np.random.default_rng(0)
    if steps is None:
        steps = certified_steps(x, rule, s, side, horizon=256)
    if steps == 0:
        return 0
    lr_tot = sum(_schedule(rule, t)[2] for t in range(steps))
    rr_tot = sum(_schedule(rule, t)[3] for t in range(steps))
    width = 32
    if side == "+":
        a, b = -s - 1 - width - lr_tot, 8 + rr_tot
    else:
        a, b = -8 - lr_tot, s + 1 + width + rr_tot
    base = _region(x, a, b)
    known = np.flatnonzero(base != 255)
    ka, kb = int(known[0]), int(known[-1])
    base, a = base[ka : kb + 1], a + ka
    if np.any(base == 255):
        raise WindowExhausted("window has gaps")
    k = rule.alphabet.size
    rows = []
    for _ in range(trials):
        y = base.copy()
        if side == "+":
            hi = -s - 1 - a
            lo = max(0, hi - int(rng.integers(1, width + 1)) + 1)
            sl = slice(lo, hi + 1)
        else:
            lo = s + 1 - a
            sl = slice(lo, min(len(y), lo + int(rng.integers(1, width + 1))))
        m = sl.stop - sl.start
        if m <= 0:
            continue
        if _is_counter(rule) and rng.random() < 0.5:
            y[sl] = rng.choice(np.array([0, 1, 2, E], dtype=np.uint8), size=m)
        else:
            y[sl] = rng.integers(0, k, size=m)
        rows.append(y)
    if not rows:
        return 0
    first = _diverge(rule, base, a, np.array(rows, dtype=np.uint8), steps, side)
    return int(np.sum((first > 0) & (first <= steps)))
