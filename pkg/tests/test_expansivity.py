from fractions import Fraction

import numpy as np

from countca.engine import WindowConfig, identity_rule, shift_rule, xor_rule
from countca.expansivity import (
    SilentLine,
    divergence_time,
    expansive_growth_check,
    find_nplus,
    mu_expansiveness_stat,
    period_gap,
    replay_record,
    resample_left,
    resize,
    sample_silent_line,
    sensitivity_divergence,
    verify_nplus,
    write_divergence_csv,
)
from countca.measures import MeasureParams
from countca.model import real_period_formula


def test_xor_constant():
    rep = find_nplus(xor_rule())
    assert rep.n_plus == 2 and rep.n_minus == 2
    assert rep.lambda_bound == Fraction(1, 2)
    assert verify_nplus(xor_rule(), 2)
    assert not verify_nplus(xor_rule(), 1)


def test_identity_is_not_expansive():
    rep = find_nplus(identity_rule(), cap=4)
    assert not rep.found and rep.n is None
    assert "not found" in rep.summary()


def test_shift_is_only_one_sided():
    rep = find_nplus(shift_rule(), cap=4)
    assert rep.n_plus == 1 and rep.n_minus is None and not rep.found


def test_growth_check_on_xor():
    x = WindowConfig(np.random.default_rng(0).integers(0, 2, size=121).astype(np.uint8), origin=-60)
    g = expansive_growth_check(xor_rule(), find_nplus(xor_rule()), x, t_max=6)
    assert g.status == "pass" and len(g.rows) == 6


def test_growth_check_without_constant():
    x = WindowConfig(np.zeros(21, np.uint8), origin=-10)
    assert expansive_growth_check(identity_rule(), find_nplus(identity_rule(), 3), x).status.startswith("fail")


def test_silent_line_layout():
    line = SilentLine([3, 4], [[1, 0, 1], [0, 1, 1, 0]])
    cells = line.cells()
    assert cells.tolist() == [0, 0, 4, 1, 0, 1, 4, 0]
    assert cells[line.origin_column()] == 4


def test_resize_keeps_right_digits():
    line = SilentLine([3, 4, 3], [[1, 1, 0], [1, 0, 1, 1], [0, 0, 0]])
    longer = resize(line, 1, 6)
    assert longer.digits[1] == [0, 0, 1, 0, 1, 1] and longer.lengths == [3, 6, 3]
    shorter = resize(line, 1, 3)
    assert shorter.digits[1] == [0, 1, 1]
    assert line.lengths == [3, 4, 3]


def test_period_gap_is_exact():
    x = SilentLine([3, 3, 3], [[0] * 3] * 3)
    y = resize(x, 1, 4)
    gap, margin = period_gap(x, y)
    want = abs(real_period_formula([3, 3, 3]).value - real_period_formula([3, 4, 3]).value)
    assert gap == want and margin > 0


def test_identical_lines_never_diverge():
    x = sample_silent_line(MeasureParams(half_width=8), np.random.default_rng(1))
    assert divergence_time(x, x, 2000) is None


def test_sensitivity_and_replay(tmp_path):
    params = MeasureParams(half_width=12)
    recs = []
    for i in range(10):
        x = sample_silent_line(params, np.random.default_rng(i))
        rec = sensitivity_divergence(x, 1, T_max=20000, pair=i)
        assert rec.gap > 0
        assert replay_record(rec) == rec.time
        recs.append(rec)
    assert sum(not r.censored for r in recs) >= 9
    write_divergence_csv(recs, tmp_path / "d.csv")
    assert len((tmp_path / "d.csv").read_text().splitlines()) == 11


def test_resample_left_keeps_right_part():
    params = MeasureParams(half_width=6)
    x = sample_silent_line(params, np.random.default_rng(2))
    y = resample_left(x, 2, params, np.random.default_rng(3))
    assert y.lengths[-2:] == x.lengths[-2:] and y.digits[-2:] == x.digits[-2:]


def test_mu_statistic():
    params = MeasureParams(half_width=10, seed=4)
    stat = mu_expansiveness_stat(params, 20, 5000, depth=1)
    assert stat.fraction >= 0.9
    assert stat.fraction_by(5000) == stat.fraction
    assert mu_expansiveness_stat(params, 5, 500, identical=True).fraction == 0.0
