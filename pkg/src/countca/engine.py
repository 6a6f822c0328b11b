"""One-dimensional cellular automata on finite windows of bi-infinite configurations.

A configuration is never stored in full.  :class:`WindowConfig` keeps a slice
of it together with the interval of coordinates whose values are known to be
exact; every step shrinks that interval by the rule's reach.  A side may
instead be declared *filled*: all cells beyond the window on that side hold a
single quiescent symbol, which is exact as long as the rule maps the constant
neighbourhood to itself.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels


class WindowExhausted(ValueError):
    """Raised when a window is too short for the requested iteration."""

    def __init__(self, message, depth=None):
        super().__init__(message)
        self.depth = depth


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class Alphabet:
    chars: str

    def __post_init__(self):
        if len(self.chars) < 2:
            raise ValueError("alphabet needs at least two symbols")
        if len(set(self.chars)) != len(self.chars):
            raise ValueError("duplicate symbol characters")

    @property
    def size(self):
        return len(self.chars)

    @property
    def symbols(self):
        return tuple(range(self.size))

    @property
    def full_mask(self):
        return (1 << self.size) - 1

    def encode(self, text):
        text = "".join(text.split())
        try:
            return np.array([self.chars.index(ch) for ch in text], dtype=np.uint8)
        except ValueError as exc:
            raise ValueError(f"symbol not in alphabet {self.chars!r}: {text!r}") from exc

    def decode(self, cells):
        return "".join(self.chars[int(v)] for v in cells)


BINARY = Alphabet("01")


def _dependence(table, k, width):
    """Neighbourhood positions on which the table actually depends."""
    t = table.reshape((k,) * width)
    used = []
    for p in range(width):
        moved = np.moveaxis(t, p, 0)
        if np.any(moved != moved[:1]):
            used.append(p)
    return used


class RuleTable:
    """Exhaustive local rule of radius ``r``; lookup index is the neighbourhood
    read as a base-``|A|`` number with the leftmost cell most significant."""

    SET_TABLE_LIMIT = 1 << 20

    def __init__(self, alphabet: Alphabet, radius: int, table, name: str = ""):
        self.alphabet = alphabet
        self.radius = int(radius)
        self.name = name
        k = alphabet.size
        table = np.asarray(table, dtype=np.int64)
        if table.shape != (k ** (2 * self.radius + 1),):
            raise RuleError(f"table must have {k ** (2 * self.radius + 1)} entries")
        if table.min() < 0 or table.max() >= k:
            raise RuleError("table entry outside the alphabet")
        self.table = table.astype(np.uint8)
        self.support = _dependence(self.table, k, 2 * self.radius + 1)
        self._settable = None

    def __repr__(self):
        return f"RuleTable({self.name or 'anonymous'}, |A|={self.alphabet.size}, r={self.radius})"

    def __eq__(self, other):
        return (
            isinstance(other, RuleTable)
            and self.alphabet == other.alphabet
            and self.radius == other.radius
            and np.array_equal(self.table, other.table)
        )

    __hash__ = None

    def local(self, *neigh):
        idx = 0
        for v in neigh:
            idx = idx * self.alphabet.size + int(v)
        return int(self.table[idx])

    # -- rule protocol used by the engine -------------------------------

    def radii(self, cfg=None):
        return self.radius, self.radius

    set_radii = radii

    def reach(self):
        """Effective ``(left, right)`` reach from the positions the table reads."""
        if not self.support:
            return 0, 0
        return max(0, self.radius - min(self.support)), max(0, max(self.support) - self.radius)

    def apply(self, cells, cfg=None):
        return kernels.table_apply(np.ascontiguousarray(cells, dtype=np.uint8), self.table, self.alphabet.size, self.radius)

    def after(self, cfg):
        return False

    def quiescent(self, sym):
        return self.local(*([sym] * (2 * self.radius + 1))) == sym

    def _set_table(self):
        if self._settable is None:
            k = self.alphabet.size
            base = 1 << k
            n_sup = len(self.support)
            if base**n_sup > self.SET_TABLE_LIMIT:
                self._settable = False
                return self._settable
            settable = np.zeros(base**n_sup, dtype=np.uint8)
            width = 2 * self.radius + 1
            full = np.arange(k)
            for combo in itertools.product(range(1, base), repeat=n_sup):
                choices = [full] * width
                for p, m in zip(self.support, combo):
                    choices[p] = np.flatnonzero((m >> np.arange(k)) & 1)
                grids = np.meshgrid(*choices, indexing="ij")
                idx = np.zeros(grids[0].size, dtype=np.int64)
                for g in grids:
                    idx = idx * k + g.ravel()
                out = np.bitwise_or.reduce(np.left_shift(1, self.table[idx].astype(np.int64)))
                flat = 0
                for m in combo:
                    flat = flat * base + m
                settable[flat] = out
            self._settable = settable
        return self._settable

    def apply_sets(self, masks):
        masks = np.ascontiguousarray(masks, dtype=np.uint8)
        st = self._set_table()
        if st is not False:
            return kernels.set_table_apply(
                masks, st, np.asarray(self.support, dtype=np.int64), 1 << self.alphabet.size, self.radius
            )
        return kernels.set_enum_apply(masks, self.table, self.alphabet.size, self.radius)


def build_rule(alphabet: Alphabet, radius: int, local, name: str = "") -> RuleTable:
    """Tabulate ``local`` (a callable on ``2r+1`` symbols, or an explicit
    sequence/dict indexed by neighbourhood tuples) into a :class:`RuleTable`."""
    k = alphabet.size
    width = 2 * radius + 1
    table = np.empty(k**width, dtype=np.int64)
    for idx, neigh in enumerate(itertools.product(range(k), repeat=width)):
        if callable(local):
            v = local(*neigh)
        elif isinstance(local, dict):
            if neigh not in local:
                raise RuleError(f"local rule undefined at {neigh}")
            v = local[neigh]
        else:
            v = local[idx]
        if not isinstance(v, (int, np.integer)) or not 0 <= v < k:
            raise RuleError(f"local rule output {v!r} at {neigh} is not a symbol")
        table[idx] = v
    return RuleTable(alphabet, radius, table, name=name)


def identity_rule(alphabet: Alphabet = BINARY, radius: int = 1) -> RuleTable:
    return build_rule(alphabet, radius, lambda *w: w[radius], name="identity")


def xor_rule() -> RuleTable:
    """Additive rule ``x[i-1] + x[i+1] mod 2`` (Wolfram 90), positively expansive."""
    return build_rule(BINARY, 1, lambda a, b, c: (a + c) % 2, name="xor")


def shift_rule(alphabet: Alphabet = BINARY) -> RuleTable:
    """Left shift: ``F(x)_i = x_{i+1}``."""
    return build_rule(alphabet, 1, lambda a, b, c: c, name="shift")


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class WindowConfig:
    """Cells ``cells[k]`` sit at coordinate ``origin + k``.

    ``valid`` is the inclusive coordinate interval known to be exact.
    ``left_fill`` / ``right_fill`` declare the configuration beyond the
    window on that side to be constant (and make that side never shrink).
    ``separated`` certifies that no two emitters of the counter automaton
    lie within distance 3 anywhere in the bi-infinite configuration.
    """

    cells: np.ndarray
    origin: int = 0
    time: int = 0
    valid: Optional[tuple] = None
    left_fill: Optional[int] = None
    right_fill: Optional[int] = None
    separated: bool = False

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.uint8)
        object.__setattr__(self, "cells", cells)
        if self.valid is None:
            object.__setattr__(self, "valid", (self.origin, self.origin + len(cells) - 1))
        lo, hi = self.valid
        if lo < self.origin or hi > self.end:
            raise ValueError("valid interval must lie inside the window")

    @classmethod
    def from_string(cls, text, alphabet: Alphabet, origin=0, **kw):
        return cls(alphabet.encode(text), origin=origin, **kw)

    @property
    def end(self):
        return self.origin + len(self.cells) - 1

    @property
    def valid_length(self):
        return self.valid[1] - self.valid[0] + 1

    def at(self, coord):
        lo, hi = self.valid
        if lo <= coord <= hi:
            return int(self.cells[coord - self.origin])
        if coord < self.origin and self.left_fill is not None:
            return self.left_fill
        if coord > self.end and self.right_fill is not None:
            return self.right_fill
        raise WindowExhausted(f"coordinate {coord} outside valid interval {self.valid}")

    def segment(self, lo, hi):
        """Cells on ``[lo, hi]``; each coordinate must be valid or filled."""
        return np.array([self.at(c) for c in range(lo, hi + 1)], dtype=np.uint8)

    def valid_cells(self):
        lo, hi = self.valid
        return self.cells[lo - self.origin : hi - self.origin + 1]

    def with_cells(self, cells, origin):
        return replace(self, cells=cells, origin=origin, valid=None)


@dataclass(frozen=True)
class CyclicConfig:
    cells: np.ndarray
    time: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cells", np.asarray(self.cells, dtype=np.uint8))

    @property
    def period(self):
        return len(self.cells)


@dataclass(frozen=True)
class SetConfig:
    """Cellwise symbol sets as bitmasks; same coordinate conventions as WindowConfig."""

    masks: np.ndarray
    origin: int = 0
    time: int = 0
    valid: Optional[tuple] = None

    def __post_init__(self):
        masks = np.asarray(self.masks, dtype=np.uint8)
        object.__setattr__(self, "masks", masks)
        if np.any(masks == 0):
            raise ValueError("empty cell set")
        if self.valid is None:
            object.__setattr__(self, "valid", (self.origin, self.origin + len(masks) - 1))

    @classmethod
    def from_window(cls, cfg: WindowConfig):
        lo, hi = cfg.valid
        return cls(np.left_shift(1, cfg.valid_cells()).astype(np.uint8), origin=lo, time=cfg.time)

    def mask_at(self, coord):
        lo, hi = self.valid
        if not lo <= coord <= hi:
            raise WindowExhausted(f"coordinate {coord} outside valid interval {self.valid}")
        return int(self.masks[coord - self.origin])

    def contains(self, cfg: WindowConfig):
        """True when every valid cell of ``cfg`` on the shared interval is in the set."""
        lo = max(self.valid[0], cfg.valid[0])
        hi = min(self.valid[1], cfg.valid[1])
        if lo > hi:
            return True
        m = self.masks[lo - self.origin : hi - self.origin + 1]
        c = cfg.cells[lo - cfg.origin : hi - cfg.origin + 1]
        return bool(np.all((m >> c) & 1))


@dataclass
class SpaceTimeDiagram:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, k):
        return self.rows[k]


# ---------------------------------------------------------------------------
# stepping


def _fill_ok(rule, sym):
    q = getattr(rule, "quiescent", None)
    return q is None or q(sym)


def step(cfg: WindowConfig, rule) -> WindowConfig:
    """One application of ``rule``; the valid interval shrinks by the rule's reach."""
    lr, rr = rule.radii(cfg)
    lo, hi = cfg.valid
    cells = cfg.valid_cells()
    left = cfg.left_fill is not None and lo == cfg.origin
    right = cfg.right_fill is not None and hi == cfg.end
    pad = lr + rr
    if left:
        if not _fill_ok(rule, cfg.left_fill):
            raise RuleError("left fill symbol is not quiescent for this rule")
        cells = np.concatenate([np.full(pad, cfg.left_fill, np.uint8), cells])
        lo -= pad
    if right:
        if not _fill_ok(rule, cfg.right_fill):
            raise RuleError("right fill symbol is not quiescent for this rule")
        cells = np.concatenate([cells, np.full(pad, cfg.right_fill, np.uint8)])
        hi += pad
    if hi - lo + 1 < lr + rr + 1:
        raise WindowExhausted(f"window exhausted: valid length {cfg.valid_length} < {lr + rr + 1}", depth=0)
    out = rule.apply(cells[None, :], cfg)[0]
    new_lo, new_hi = lo + lr, hi - rr
    if left:
        k = 0
        while k < len(out) - 1 and out[k] == cfg.left_fill:
            k += 1
        out, new_lo = out[k:], new_lo + k
    if right:
        k = len(out)
        while k > 1 and out[k - 1] == cfg.right_fill:
            k -= 1
        new_hi -= len(out) - k
        out = out[:k]
    return WindowConfig(
        out,
        origin=new_lo,
        time=cfg.time + 1,
        left_fill=cfg.left_fill if left else None,
        right_fill=cfg.right_fill if right else None,
        separated=rule.after(cfg),
    )


def step_cyclic(cfg: CyclicConfig, rule) -> CyclicConfig:
    lr, rr = rule.radii(None)
    p = cfg.period
    if p < lr + rr + 1:
        raise RuleError(f"period {p} shorter than neighbourhood {lr + rr + 1}")
    ext = np.concatenate([cfg.cells[p - lr :], cfg.cells, cfg.cells[:rr]]) if lr else np.concatenate([cfg.cells, cfg.cells[:rr]])
    out = rule.apply(ext[None, :], None)[0]
    return CyclicConfig(out, time=cfg.time + 1)


def orbit(cfg, rule, t: int) -> SpaceTimeDiagram:
    rows = [cfg]
    stepper = step_cyclic if isinstance(cfg, CyclicConfig) else step
    for k in range(t):
        try:
            rows.append(stepper(rows[-1], rule))
        except WindowExhausted as exc:
            raise WindowExhausted(f"orbit exhausted after {k} of {t} steps", depth=k) from exc
    return SpaceTimeDiagram(rows)


def set_step(cfg: SetConfig, rule) -> SetConfig:
    lr, rr = rule.set_radii()
    lo, hi = cfg.valid
    if hi - lo + 1 < lr + rr + 1:
        raise WindowExhausted("window exhausted", depth=0)
    masks = cfg.masks[lo - cfg.origin : hi - cfg.origin + 1]
    out = rule.apply_sets(masks[None, :])[0]
    return SetConfig(out, origin=lo + lr, time=cfg.time + 1)


def set_valued_orbit(cfg: SetConfig, rule, t: int) -> list:
    """Sound cellwise over-approximation of every orbit through ``cfg``."""
    rows = [cfg]
    for k in range(t):
        try:
            rows.append(set_step(rows[-1], rule))
        except WindowExhausted as exc:
            raise WindowExhausted(f"set orbit exhausted after {k} of {t} steps", depth=k) from exc
    return rows


def diff_front(x: WindowConfig, y: WindowConfig, rule, t: int):
    """Leftmost and rightmost disagreeing coordinates at each step, or ``None``."""
    ox, oy = orbit(x, rule, t), orbit(y, rule, t)
    fronts = []
    for a, b in zip(ox.rows, oy.rows):
        lo = max(a.valid[0], b.valid[0])
        hi = min(a.valid[1], b.valid[1])
        if lo > hi:
            raise WindowExhausted("no common valid cells")
        da = a.cells[lo - a.origin : hi - a.origin + 1]
        db = b.cells[lo - b.origin : hi - b.origin + 1]
        where = np.flatnonzero(da != db)
        fronts.append(None if len(where) == 0 else (lo + int(where[0]), lo + int(where[-1])))
    return fronts


# ---------------------------------------------------------------------------
# plain-text space-time format


def format_diagram(diagram, alphabet: Alphabet) -> str:
    rows = diagram.rows if isinstance(diagram, SpaceTimeDiagram) else list(diagram)
    first = rows[0]
    lo = min(r.valid[0] for r in rows)
    hi = max(r.valid[1] for r in rows)
    lines = [f"origin={lo} time0={first.time} valid={first.valid[0]}..{first.valid[1]}"]
    for r in rows:
        chars = []
        for c in range(lo, hi + 1):
            chars.append(alphabet.chars[int(r.cells[c - r.origin])] if r.valid[0] <= c <= r.valid[1] else ".")
        lines.append("".join(chars))
    return "\n".join(lines) + "\n"


def parse_diagram(text: str, alphabet: Alphabet) -> SpaceTimeDiagram:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty diagram")
    header = dict(tok.split("=", 1) for tok in lines[0].split())
    origin = int(header["origin"])
    t0 = int(header["time0"])
    rows = []
    for k, ln in enumerate(lines[1:]):
        ln = ln.strip()
        known = [i for i, ch in enumerate(ln) if ch != "."]
        if not known:
            raise ValueError(f"row {k} has no valid cells")
        a, b = known[0], known[-1]
        seg = ln[a : b + 1]
        if "." in seg:
            raise ValueError(f"row {k}: valid cells must be contiguous")
        rows.append(WindowConfig(alphabet.encode(seg), origin=origin + a, time=t0 + k))
    return SpaceTimeDiagram(rows)
