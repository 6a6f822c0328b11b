import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from countca.automaton import (
    COUNTER_ALPHABET,
    E,
    FIGURE1_ORIGIN,
    FIGURE1_ROWS,
    F_RULE,
    CounterRule,
    assert_orbit_structure,
    emitter_positions,
    fd_local,
    fd_rule,
    figure1_initial,
    fp_project,
    is_separated,
    orbit_F,
    validate_omega,
)
from countca.engine import WindowConfig, orbit

A = COUNTER_ALPHABET


def cells_strategy(min_size=12, max_size=60):
    return st.lists(st.integers(0, 4), min_size=min_size, max_size=max_size).map(lambda v: np.array(v, np.uint8))


def test_odometer_local_rule_examples():
    assert fd_local(0, 0, 1) == 1
    assert fd_local(0, E, 0) == 1  # emitter increments its right neighbour
    assert fd_local(2, E, 1) == 3  # ... by two when a carry reaches it
    assert fd_local(0, 3, 1) == 2  # carry moves right
    assert fd_local(0, 0, 2) == 0  # carry leaves
    assert fd_local(1, 1, E) == E


def test_projection_removes_crowded_emitters():
    assert fp_project([0, 0, E, E, 0, 0, 0]) == 0
    assert fp_project([E, 0, 0, E, 0, 0, E]) == 0
    assert fp_project([0, 0, 0, E, 0, 0, 0]) == E
    assert fp_project([0, 0, 0, 1, E, E, E]) == 1


def test_figure1_is_reproduced():
    d = orbit_F(figure1_initial(), len(FIGURE1_ROWS) - 1)
    for k, row in enumerate(FIGURE1_ROWS):
        want = A.encode(row)
        got = d.rows[k].segment(FIGURE1_ORIGIN, FIGURE1_ORIGIN + len(want) - 1)
        assert A.decode(got) == row, f"row {k}"


def test_figure1_structure():
    d = orbit_F(figure1_initial(), 9)
    assert assert_orbit_structure(d).ok


def test_validate_omega():
    x = WindowConfig(A.encode("E000E0110E101"), origin=-4)
    rep = validate_omega(x)
    assert rep.ok and rep.min_gap == 4
    bad = validate_omega(WindowConfig(A.encode("E00E000E"), origin=-3))
    assert not bad.ok and bad.violations == [(-3, 0)]


def test_corrupted_table_is_not_genuine():
    t = fd_rule().table.copy()
    t[0] = 1
    assert not CounterRule(t).genuine
    assert CounterRule(fd_rule().table).genuine


@settings(max_examples=80, deadline=None)
@given(cells_strategy())
def test_images_are_separated(cells):
    x = WindowConfig(cells)
    y = orbit(x, F_RULE, 1).rows[1]
    assert is_separated(y.valid_cells())
    assert y.separated


@settings(max_examples=80, deadline=None)
@given(cells_strategy(30, 80), st.integers(1, 5))
def test_separated_shortcut_is_exact(cells, t):
    """After one step the reduced reach (2, 0) gives the same cells as the full rule."""
    x = orbit(WindowConfig(cells), F_RULE, 1).rows[1]
    fast = orbit(x, F_RULE, t).rows[-1]
    slow = orbit(WindowConfig(x.valid_cells(), origin=x.valid[0]), F_RULE, t).rows[-1]
    for c in range(slow.valid[0], slow.valid[1] + 1):
        assert fast.at(c) == slow.at(c)


@settings(max_examples=60, deadline=None)
@given(cells_strategy(40, 90))
def test_orbit_structure_on_random_input(cells):
    x = WindowConfig(cells)
    d = orbit(x, F_RULE, 8)
    rep = assert_orbit_structure(d)
    assert rep.core_ok, rep.failures[:3]


def test_two_twos_bound_fails_on_real_orbits():
    """Three travelling carries in one counter: the report must flag it."""
    cells = np.zeros(40, np.uint8)
    cells[24:32] = [2, E, 3, 0, 0, 2, 1, 1]
    cells[36] = E
    d = orbit(WindowConfig(cells), F_RULE, 2)
    assert A.decode(d.rows[2].segment(25, 36)) == "E2200020000E"
    rep = assert_orbit_structure(d)
    assert not rep.ok and rep.core_ok
    assert rep.failures == [("too-many-2", 2, 25)]


@settings(max_examples=40, deadline=None)
@given(cells_strategy(30, 60))
def test_emitters_are_fixed_after_first_step(cells):
    d = orbit(WindowConfig(cells), F_RULE, 6)
    ref = set(emitter_positions(d.rows[1]))
    for row in d.rows[2:]:
        lo, hi = row.valid
        assert set(emitter_positions(row)) == {p for p in ref if lo <= p <= hi}


def test_reduced_reach_only_on_separated():
    assert F_RULE.radii(WindowConfig(np.zeros(5, np.uint8))) == (5, 3)
    assert F_RULE.radii(WindowConfig(np.zeros(5, np.uint8), separated=True)) == (2, 0)
