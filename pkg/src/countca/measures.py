"""Random counter configurations, burn-in, uniformity and entropy estimates.

Counter lengths are i.i.d. with ``P(l = k) = (1 - nu) nu^(k-3)``, ``k >= 3``,
and counter states are uniform, i.e. the digits are fair coin flips.  The
stationary sampler places the origin on the renewal sequence (emitter plus
its ``l`` digits is one cycle of length ``l + 1``) by size-biasing the origin
cycle and choosing the origin uniformly inside it.
"""
from __future__ import annotations

import json
import math
from collections import Counter as _Counter
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .automaton import E, CounterRule, validate_omega
from .engine import WindowConfig
from .model import MAX_LENGTH

SCHEMES = ("renewal", "shifts")


@dataclass(frozen=True)
class MeasureParams:
    nu: float = 2 / 3
    min_length: int = 3
    half_width: int = 30
    burn_in_T: int = 256
    seed: int = 0
    extent: int = 0

    def __post_init__(self):
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0, 1)")
        if self.min_length != 3:
            raise ValueError("min_length is fixed to 3")
        if self.half_width < 1:
            raise ValueError("half_width must be >= 1")
        if self.burn_in_T < 1:
            raise ValueError("burn_in_T must be >= 1")

    @property
    def mean_length(self):
        return self.min_length + self.nu / (1 - self.nu)

    def length_pmf(self, k):
        k = np.asarray(k)
        return np.where(k >= 3, (1 - self.nu) * self.nu ** (k - 3.0), 0.0)


def _rng(params, rng):
    return rng if rng is not None else np.random.default_rng(params.seed)


def sample_lengths(params: MeasureParams, count: int, rng=None) -> np.ndarray:
    rng = _rng(params, rng)
    return rng.geometric(1 - params.nu, size=count).astype(np.int64) + 2


def sample_origin_length(params: MeasureParams, count: int, rng=None, scheme="renewal"):
    """Length of the counter holding the origin, size-biased by ``l + 1``
    (renewal) or by ``l`` (literal shift average)."""
    rng = _rng(params, rng)
    ks = np.arange(3, 3 + 400)
    w = params.length_pmf(ks) * (ks + 1 if scheme == "renewal" else ks)
    return rng.choice(ks, size=count, p=w / w.sum()).astype(np.int64)


def _line(params, rng, l0, extent_left, extent_right):
    """Cells from one emitter-anchored line; emitter of counter 0 at index ``z``."""
    hw = params.half_width
    right = [int(l0)]
    while len(right) < hw or sum(right) + len(right) <= extent_right:
        right.extend(sample_lengths(params, max(hw, 8), rng).tolist())
    left = []
    while len(left) < hw or sum(left) + len(left) < extent_left:
        left.extend(sample_lengths(params, max(hw, 8), rng).tolist())
    # trim surplus counters beyond what is needed
    def trim(ls, need_cells):
        out, tot = [], 0
        for v in ls:
            if len(out) >= hw and tot >= need_cells:
                break
            out.append(v)
            tot += v + 1
        return out

    right = trim(right, extent_right + 1)
    left = trim(left, extent_left)
    ls = left[::-1] + right
    total = sum(ls) + len(ls) + 1
    cells = rng.integers(0, 2, size=total).astype(np.uint8)
    es = np.concatenate([[0], np.cumsum(np.asarray(ls) + 1)])
    cells[es] = E
    return cells, int(es[len(left)]), ls, len(left)


def sample_omega_star(params: MeasureParams, rng=None) -> WindowConfig:
    """Emitter at 0, ``half_width`` counters on each side, uniform states."""
    rng = _rng(params, rng)
    l0 = sample_lengths(params, 1, rng)[0]
    cells, z, _, _ = _line(params, rng, l0, params.extent, params.extent)
    return WindowConfig(cells, origin=-z, separated=True)


def sample_stationary(params: MeasureParams, rng=None, scheme="renewal", return_offset=False, extra_left=0):
    """Shift-invariant sample: the origin is uniform on a size-biased cycle.

    ``scheme="shifts"`` reproduces the literal average over the ``l_0`` shifts
    that keep the origin on the emitter or the first ``l_0 - 1`` digits.
    ``extra_left`` widens the window on the left only (room for burn-in).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    rng = _rng(params, rng)
    l0 = int(sample_origin_length(params, 1, rng, scheme)[0])
    k = int(rng.integers(0, l0 + 1 if scheme == "renewal" else l0))
    cells, z, _, _ = _line(params, rng, l0, params.extent + extra_left, params.extent + l0)
    cfg = WindowConfig(cells, origin=-(z + k), separated=True)
    return (cfg, k) if return_offset else cfg


def sample_batch(params: MeasureParams, count: int, left: int, right: int, rng=None, scheme="renewal"):
    """``(count, left + right + 1)`` stationary cells on coordinates ``[-left, right]``."""
    rng = _rng(params, rng)
    p = MeasureParams(params.nu, 3, 1, params.burn_in_T, params.seed, max(left, right) + 1)
    out = np.empty((count, left + right + 1), dtype=np.uint8)
    for i in range(count):
        cfg = sample_stationary(p, rng, scheme)
        out[i] = cfg.cells[-left - cfg.origin : right - cfg.origin + 1]
    return out


def cesaro_burnin(cfg: WindowConfig, T: int, rng=None, k: Optional[int] = None):
    """``F^k(cfg)`` with ``k`` uniform on ``{0..T-1}`` (or given); returns ``(cfg, k)``.

    The configuration must be E-separated, where ``F`` is ``F_d``; the window
    then loses two cells per step on the left only.
    """
    if k is None:
        rng = rng if rng is not None else np.random.default_rng()
        k = int(rng.integers(0, T))
    if k == 0:
        return cfg, 0
    lo, hi = cfg.valid
    cells = cfg.valid_cells()
    if len(cells) <= 2 * k:
        from .engine import WindowExhausted

        raise WindowExhausted(f"window of {len(cells)} cells cannot support {k} steps", depth=len(cells) // 2)
    if not cfg.separated:
        raise ValueError("burn-in expects an E-separated configuration")
    out = kernels.fd_run(np.ascontiguousarray(cells[None, :]), k)[0]
    return WindowConfig(out, origin=lo + 2 * k, time=cfg.time + k, separated=True), k


@dataclass
class SampleManifest:
    seed: int
    params: dict
    count: int
    kind: str
    offsets: list = field(default_factory=list)
    burn_in_steps: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def draw_samples(params: MeasureParams, count: int, kind="stationary", burn=True, scheme="renewal"):
    """Independent samples, one child seed per index, plus a replayable manifest."""
    if kind not in ("stationary", "omega_star"):
        raise ValueError("kind must be 'stationary' or 'omega_star'")
    man = SampleManifest(params.seed, asdict(params), count, kind)
    out = []
    extra = 2 * params.burn_in_T if burn else 0
    for ss in np.random.SeedSequence(params.seed).spawn(count):
        rng = np.random.default_rng(ss)
        if kind == "stationary":
            cfg, off = sample_stationary(params, rng, scheme, return_offset=True, extra_left=extra)
        else:
            p = MeasureParams(params.nu, 3, params.half_width, params.burn_in_T, params.seed, params.extent + extra)
            cfg, off = sample_omega_star(p, rng), 0
        k = 0
        if burn:
            cfg, k = cesaro_burnin(cfg, params.burn_in_T, rng)
        out.append(cfg)
        man.offsets.append(off)
        man.burn_in_steps.append(k)
    return out, man


def replay(manifest: SampleManifest, scheme="renewal"):
    params = MeasureParams(**manifest.params)
    return draw_samples(params, manifest.count, manifest.kind, burn=any(manifest.burn_in_steps) or None, scheme=scheme)[0]


# ---------------------------------------------------------------------------
# condition (*) and uniformity


@dataclass
class ConditionStarReport:
    samples: int
    in_omega: int
    collisions: int
    collision_bound: float

    @property
    def ok(self):
        return self.in_omega == self.samples and self.collisions == 0


def check_condition_star(samples, params: Optional[MeasureParams] = None) -> ConditionStarReport:
    """Every sample must look like an element of Omega, and no two samples
    may share their full length sequence.  ``collision_bound`` is the
    birthday bound under the length law for sequences of the observed size."""
    params = params or MeasureParams()
    inside = 0
    seqs = []
    for cfg in samples:
        rep = validate_omega(cfg)
        inside += rep.ok
        seqs.append(tuple(np.diff(rep.e_positions).tolist()))
    counts = _Counter(seqs)
    collisions = sum(v - 1 for v in counts.values() if v > 1)
    ks = np.arange(3, 400)
    p = params.length_pmf(ks)
    q = float(np.sum(p**2))
    m = min(len(s) for s in seqs) if seqs else 0
    bound = len(seqs) * (len(seqs) - 1) / 2 * q**m
    return ConditionStarReport(len(samples), inside, collisions, bound)


@dataclass
class UniformityClass:
    length: int
    count: int
    tv: Optional[float]
    note: str = ""


def total_variation_uniform(values, length):
    cap = 1 << length
    h = np.bincount(np.asarray(values, dtype=np.int64), minlength=cap) / max(len(values), 1)
    return 0.5 * float(np.abs(h - 1 / cap).sum())


_REACH0 = MAX_LENGTH + 1


def uniformity_check(samples, i: int = 0, classes=(3, 4), min_count=100):
    """Total-variation distance between the law of ``c_i`` given ``l_i`` and uniform."""
    from .model import ModelError, phi

    by = {L: [] for L in classes}
    for cfg in samples:
        if i == 0:
            # counter 0 lies within MAX_LENGTH + 1 cells of the origin
            a, b = max(cfg.valid[0], -_REACH0), min(cfg.valid[1], _REACH0)
            cfg = WindowConfig(cfg.segment(a, b), origin=a, time=cfg.time)
        try:
            line = phi(cfg)
        except ModelError:
            continue
        k = i - line.first
        if not 0 <= k < len(line):
            continue
        L = int(line.l[k])
        if L in by:
            by[L].append(int(line.c[k]))
    out = []
    for L in classes:
        vals = by[L]
        if len(vals) < min_count:
            out.append(UniformityClass(L, len(vals), None, "starved"))
        else:
            out.append(UniformityClass(L, len(vals), total_variation_uniform(vals, L)))
    return out


# ---------------------------------------------------------------------------
# entropy


@dataclass
class EntropyEstimate:
    k: int
    block: float
    difference: float
    coverage: float
    stderr: float
    samples: int

    @property
    def saturated(self):
        return self.coverage > 0.5


def _plugin(rows):
    rows = np.ascontiguousarray(rows)
    if rows.shape[1] == 0:
        return 0.0, 0
    view = rows.view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))).ravel()
    _, counts = np.unique(view, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum()), len(counts)


def block_entropy(blocks, k: Optional[int] = None, batches: int = 20) -> EntropyEstimate:
    """Plug-in entropy of k-blocks (rows of ``blocks``), nats per site.

    ``block`` is ``H_k / k``, ``difference`` is ``H_k - H_{k-1}``; the
    standard error comes from splitting the rows into batches."""
    blocks = np.asarray(blocks, dtype=np.uint8)
    k = blocks.shape[1] if k is None else k
    blocks = blocks[:, :k]
    hk, distinct = _plugin(blocks)
    hk1, _ = _plugin(blocks[:, : k - 1])
    n = len(blocks)
    parts = np.array_split(np.arange(n), batches) if n >= 2 * batches else []
    diffs = [_plugin(blocks[p])[0] - _plugin(blocks[p, : k - 1])[0] for p in parts]
    se = float(np.std(diffs, ddof=1) / np.sqrt(len(diffs))) if len(diffs) > 1 else float("nan")
    return EntropyEstimate(k, hk / k, hk - hk1, distinct / n, se, n)


def column_words(cells, rule, T: int, w: int = 1, col: Optional[int] = None, burn=None):
    """Column words ``(count, T, w)`` at columns ``[col, col + w)`` over times
    ``0..T-1`` (after an optional per-row burn-in)."""
    cells = np.ascontiguousarray(cells, dtype=np.uint8)
    n, width = cells.shape
    burn = np.zeros(n, dtype=np.int64) if burn is None else np.asarray(burn, dtype=np.int64)
    if isinstance(rule, CounterRule) and rule.genuine:
        col = width - w if col is None else col
        out = np.empty((n, T, w), dtype=np.uint8)
        for j in range(w):
            out[:, :, j] = kernels.fd_column(cells, burn, T - 1, col + j)
        return out
    lr, rr = rule.radius, rule.radius
    steps = int(burn.max()) + T
    if width < (lr + rr) * steps + w:
        raise ValueError("window too narrow for the requested horizon")
    col = lr * steps if col is None else col
    out = np.empty((n, T, w), dtype=np.uint8)
    cur, off = cells, 0
    for t in range(steps):
        rel = t - burn
        take = (rel >= 0) & (rel < T)
        if np.any(take):
            out[take, rel[take]] = cur[take, col - off : col - off + w]
        cur = rule.apply(cur)
        off += lr
    rel = steps - burn
    take = (rel >= 0) & (rel < T)
    if np.any(take):
        out[take, rel[take]] = cur[take, col - off : col - off + w]
    return out


def column_entropy(cells, rule, T: int, w: int = 1, col=None, burn=None, batches=20) -> EntropyEstimate:
    """Plug-in entropy of the width-``w`` column word over ``T`` steps, per step."""
    words = column_words(cells, rule, T, w, col, burn).reshape(len(cells), T * w)
    est = block_entropy(words, T * w, batches)
    prev = _plugin(words[:, : (T - 1) * w])[0]
    h = _plugin(words)[0]
    return EntropyEstimate(T, h / T, h - prev, est.coverage, est.stderr, est.samples)


# ---------------------------------------------------------------------------
# exact oracle: the stationary law as a hidden-age Markov chain


def _age_chain(nu):
    """States: emitter, digit ages 1, 2 and 3+.  Emissions: E, or a fair digit."""
    P = np.zeros((4, 4))
    P[0, 1] = P[1, 2] = P[2, 3] = 1.0
    P[3, 3], P[3, 0] = nu, 1 - nu
    pi = np.array([1.0, 1.0, 1.0, 1 / (1 - nu)])
    return P, pi / pi.sum()


def renewal_block_law(k: int, nu: float = 2 / 3):
    """Exact probabilities of every k-block over ``{0, 1, E}``."""
    P, pi = _age_chain(nu)
    emit = {0: {E: 1.0}, 1: {0: 0.5, 1: 0.5}, 2: {0: 0.5, 1: 0.5}, 3: {0: 0.5, 1: 0.5}}
    law = {}

    def rec(prefix, alpha):
        if len(prefix) == k:
            p = float(alpha.sum())
            if p > 0:
                law[tuple(prefix)] = p
            return
        for sym in (0, 1, E):
            a = np.array([alpha[s] * emit[s].get(sym, 0.0) for s in range(4)])
            if a.sum() == 0:
                continue
            rec(prefix + [sym], a @ P if len(prefix) + 1 < k else a)

    rec([], pi.copy())
    return law


def renewal_block_entropy(k: int, nu: float = 2 / 3) -> float:
    p = np.array(list(renewal_block_law(k, nu).values()))
    return float(-(p * np.log(p)).sum())


def renewal_entropy_rate(nu: float = 2 / 3) -> float:
    """Entropy rate (nats/site): the age is visible from the past, so the
    rate is the mean entropy of the next symbol given the age."""
    _, pi = _age_chain(nu)
    h_digit = math.log(2)
    h_old = -(nu * math.log(nu / 2) + (1 - nu) * math.log(1 - nu))
    return float(pi[0] * h_digit + pi[1] * h_digit + pi[2] * h_digit + pi[3] * h_old)
