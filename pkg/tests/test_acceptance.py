"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line (also collected
into the terminal summary).  Run directly with ``python3 tests/test_acceptance.py``.
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import record
from countca.automaton import F_RULE, FIGURE1_ORIGIN, FIGURE1_ROWS, COUNTER_ALPHABET, figure1_initial, orbit_F
from countca.engine import WindowConfig, xor_rule
from countca.expansivity import find_nplus, replay_record, sample_silent_line, sensitivity_divergence, verify_nplus
from countca.lyapunov import (
    InBracket,
    average_exponents,
    bracket,
    crossing_time_F,
    in_upper,
    reach_bound,
    replay_certificate,
)
from countca.measures import (
    MeasureParams,
    block_entropy,
    column_entropy,
    draw_samples,
    renewal_entropy_rate,
    sample_batch,
    uniformity_check,
)
from countca.model import (
    CounterLine,
    check_semiconjugacy,
    crossing_time_model,
    finite_line_rate,
    remainder_deviation,
    phi,
    real_period_empirical,
    real_period_formula,
)

A = COUNTER_ALPHABET
N_GRID = [32, 64, 128, 256]

# shared between criteria 5, 8 and 10
_shared = {"brackets": 0, "certificates": 0, "replay_violations": 0}


def _count_bracket(b: InBracket):
    _shared["brackets"] += 1
    return b


@pytest.fixture(scope="module")
def burned():
    """Burned-in stationary samples; enough for 10^4 per length class."""
    params = MeasureParams(half_width=2, extent=16, burn_in_T=256, seed=2024)
    xs, man = draw_samples(params, 60_000)
    return params, xs


@pytest.fixture(scope="module")
def exponent_run():
    """Mean I_n^+/n and I_n^-/n brackets of F under burned-in samples."""
    T = 256
    extent = reach_bound(F_RULE, max(N_GRID), "+") + 48
    params = MeasureParams(half_width=2, extent=extent, burn_in_T=T, seed=77)
    xs, _ = draw_samples(params, 100)
    it = iter(xs)
    plus = average_exponents(lambda rng: next(it), F_RULE, N_GRID, 100, seed=77, side="+", budget=16, params=params)
    it = iter(xs)
    minus = average_exponents(lambda rng: next(it), F_RULE, [256], 100, seed=78, side="-", budget=16, params=params)
    _shared["brackets"] += 100 * (len(N_GRID) + 1)
    return params, xs, plus, minus


def test_c01_figure1_exact():
    t0 = time.perf_counter()
    d = orbit_F(figure1_initial(), 9)
    bad = []
    for k, row in enumerate(FIGURE1_ROWS):
        got = A.decode(d.rows[k].segment(FIGURE1_ORIGIN, FIGURE1_ORIGIN + len(row) - 1))
        if got != row:
            bad.append(k)
    dt = time.perf_counter() - t0
    ok = not bad and dt < 1.0
    record(1, ok, f"10 rows reproduced cell-for-cell in {dt * 1000:.1f} ms" if not bad else f"rows differ: {bad}")
    assert ok


def test_c02_semiconjugacy():
    params = MeasureParams(half_width=30, seed=2)
    xs, _ = draw_samples(params, 1000, kind="omega_star", burn=False)
    compared = mismatched = 0
    first = None
    for x in xs:
        rep = check_semiconjugacy(x, 100)
        compared += rep.compared
        mismatched += len(rep.mismatches)
        if first is None and rep.mismatches:
            first = rep.first_mismatch
    ok = mismatched == 0 and compared > 0
    record(2, ok, f"1000 samples, k<=100: {compared} counter comparisons, {mismatched} mismatches")
    assert ok, first


def _constant_line(lengths, seed):
    rng = np.random.default_rng(seed)
    cs = [int(rng.integers(0, 1 << L)) for L in lengths]
    return CounterLine(lengths, cs, [0] * len(lengths), left="silent")


def test_c03_real_period():
    notes, ok = [], True
    for L in (3, 4, 5):
        m = 40
        line = _constant_line([L] * m, L)
        t = 100 * (1 << L)
        e = real_period_empirical(line, m - 1, t)
        target = Fraction(1, (1 << L) - 1)
        lo, hi = e.bracket
        slack = remainder_deviation(line, m - 1) / t + abs(float(finite_line_rate(line, m - 1) - target))
        good = e.in_bracket and lo <= float(target) <= hi and abs(e.frequency - float(target)) <= slack
        ok &= good
        notes.append(f"L={L}: {e.frequency:.5f} vs 1/{(1 << L) - 1} in [{lo:.5f},{hi:.5f}]")
    m = 41
    lengths = [3 if (m - 1 - k) % 2 == 0 else 4 for k in range(m)]
    line = _constant_line(lengths, 34)
    t = 10**5
    e = real_period_empirical(line, m - 1, t)
    lo, hi = e.bracket
    est = real_period_formula(lengths[::-1])
    lo_f, hi_f = est.bounds()
    target = Fraction(17, 127)
    good = e.in_bracket and lo <= float(target) <= hi and lo_f <= target <= hi_f
    ok &= good
    notes.append(f"3/4: {e.frequency:.5f} vs 17/127 in [{lo:.5f},{hi:.5f}]")
    record(3, ok, "; ".join(notes))
    assert ok


def test_c04_expansive_reference():
    rule = xor_rule()
    rep = find_nplus(rule)
    ok = rep.n_plus == 2 and verify_nplus(rule, 2) and not verify_nplus(rule, 1)
    exact = 0
    rng = np.random.default_rng(4)
    for j in range(10):
        x = WindowConfig(rng.integers(0, 2, size=301).astype(np.uint8), origin=-150)
        for side in ("+", "-"):
            for n in range(1, 7):
                b = _count_bracket(bracket(x, rule, n, side, budget=64))
                exact += b.lower == b.upper == n
    ratio = 1.0
    for j in range(3):
        x = WindowConfig(rng.integers(0, 2, size=301).astype(np.uint8), origin=-150)
        for side in ("+", "-"):
            for n in (8, 12, 16, 24, 32, 48, 64):
                b = _count_bracket(bracket(x, rule, n, side, budget=32))
                ratio = min(ratio, b.lower / n)
    ok = ok and exact == 120 and ratio >= 0.5
    record(4, ok, f"N+={rep.n_plus} N-={rep.n_minus}; exact n<=6 on {exact}/120; min lower/n for n<=64 = {ratio:.3f}")
    assert ok


def test_c05a_fresh_counter_blocks():
    params = MeasureParams(half_width=2, extent=300, burn_in_T=256, seed=505)
    xs, _ = draw_samples(params, 500)
    rng = np.random.default_rng(505)
    checked = bad = 0
    for x in xs:
        n = int(rng.choice([16, 32, 64, 128]))
        a = -n - 8
        line = phi(WindowConfig(x.segment(a, 8), origin=a))
        s = line.s_positions
        need = 0
        for k in range(len(line)):
            if s[k] >= -n + 3 and s[k + 1] <= 0 and line.r[k] == 0:
                need = max(need, ((1 << int(line.l[k])) - int(line.c[k])) / 2)
        if not need:
            continue
        checked += 1
        got = crossing_time_F(x, n, horizon=math.ceil(need)).steps
        bad += got < need
    ok = bad == 0 and checked > 0
    record("5a", ok, f"{checked} samples with a fresh counter inside the frontier, {bad} below (2^L-c)/2")
    assert ok


def test_c05b_upper_trend(exponent_run):
    _, _, plus, _ = exponent_run
    up = plus.upper_mean
    se = plus.upper_stderr
    mono = all(up[k + 1] <= up[k] + math.hypot(se[k], se[k + 1]) for k in range(len(up) - 1))
    ok = up[-1] < 0.5 * 2 and mono
    curve = ", ".join(f"{n}:{u:.3f}" for n, u in zip(N_GRID, up))
    record("5b", ok, f"mean upper I+/n {curve}; below 0.5*r=1 at 256 and non-increasing")
    assert ok


def test_c05c_model_vs_automaton():
    params = MeasureParams(half_width=2, extent=300, burn_in_T=256, seed=515)
    xs, _ = draw_samples(params, 200)
    rng = np.random.default_rng(515)
    both = bad = 0
    for x in xs:
        n = int(rng.choice([16, 32, 64, 128]))
        line = phi(WindowConfig(x.segment(-n - 8, 80), origin=-n - 8))
        th = crossing_time_model(line, n, horizon=4096)
        tf = crossing_time_F(x, n, horizon=4096)
        if th.censored or tf.censored:
            continue
        both += 1
        bad += tf.steps < th.steps
    ok = bad == 0 and both > 0
    record("5c", ok, f"t_F >= t_H on {both - bad}/{both} doubly certified instances")
    assert ok


def test_c06_uniformity(burned):
    _, xs = burned
    res = uniformity_check(xs, 0, (3, 4), min_count=10_000)
    ok = all(c.tv is not None and c.tv <= 0.05 for c in res)
    detail = ", ".join(f"l={c.length}: n={c.count} TV={'-' if c.tv is None else f'{c.tv:.4f}'}" for c in res)
    record(6, ok, detail + " (burn-in T=256)")
    assert ok


def test_c07_spatial_entropy(burned):
    _, xs = burned
    blocks = np.array([x.segment(0, 7) for x in xs[:30_000]])
    est = block_entropy(blocks, 8)
    z = est.difference / est.stderr
    ok = 0.6 <= est.difference <= 1.1 and z >= 5
    record(7, ok, f"k=8 difference {est.difference:.4f} +- {est.stderr:.4f} nats (z={z:.0f}); oracle {renewal_entropy_rate():.4f}")
    assert ok


def test_c08_temporal_entropy(exponent_run):
    params, _, plus, minus = exponent_run
    rng = np.random.default_rng(808)
    N = 32_000
    T_max = 256
    p = MeasureParams(burn_in_T=params.burn_in_T, seed=808)
    cells = sample_batch(p, N, 2 * (p.burn_in_T + T_max) + 2, 0, rng)
    burn = rng.integers(0, p.burn_in_T, size=N)
    ests = [column_entropy(cells, F_RULE, T, 1, burn=burn) for T in (64, 128, 256)]
    h_sigma = block_entropy(sample_batch(p, 20_000, 0, 7, rng), 8).difference
    budget = h_sigma * (plus.upper_mean[-1] + minus.upper_mean[-1])
    blocks = [e.block for e in ests]
    mono = all(blocks[k + 1] <= blocks[k] for k in range(2))
    ratio = blocks[-1] / budget
    ok = mono and ratio <= 0.25
    record(
        8,
        ok,
        f"H_T/T at T=64,128,256: {', '.join(f'{b:.4f}' for b in blocks)} (coverage {ests[-1].coverage:.2f}); "
        f"budget {budget:.4f}, ratio at 256 = {ratio:.2f} (limit 0.25); "
        f"difference estimator {ests[-1].difference:.4f}",
    )
    assert ok


def test_c09_sensitivity():
    params = MeasureParams(half_width=30, seed=909)
    diverged = positive = replayed = 0
    pairs = 100
    for i, ss in enumerate(np.random.SeedSequence(909).spawn(pairs)):
        x = sample_silent_line(params, np.random.default_rng(ss))
        rec = sensitivity_divergence(x, 1, T_max=10**5, pair=i)
        diverged += not rec.censored
        positive += rec.gap > 0
        if i < 10:
            replayed += replay_record(rec) == rec.time
    ok = diverged >= 95 and positive == pairs and replayed == 10
    record(9, ok, f"{diverged}/{pairs} diverged within 1e5 steps; period gap > 0 on {positive}/{pairs}")
    assert ok


def test_c10_bracket_soundness(exponent_run):
    _, xs, _, _ = exponent_run
    certs = violations = 0
    rng = np.random.default_rng(1010)
    for x in xs[:25]:
        for side, grid in (("+", N_GRID), ("-", [256])):
            for n in grid:
                up, how = in_upper(x, F_RULE, n, side)
                if how.get("inconclusive"):
                    continue
                certs += 1
                violations += replay_certificate(x, F_RULE, up, side, steps=n, trials=100, rng=rng)
    rule = xor_rule()
    x = WindowConfig(rng.integers(0, 2, size=301).astype(np.uint8), origin=-150)
    for side in ("+", "-"):
        for n in (4, 16, 64):
            up, _ = in_upper(x, rule, n, side)
            certs += 1
            violations += replay_certificate(x, rule, up, side, steps=n, trials=100, rng=rng)
    total = _shared["brackets"]
    ok = violations == 0 and certs > 0
    record(10, ok, f"lower<=upper enforced on {total} brackets; {certs} certificates x 100 replays, {violations} escapes")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
