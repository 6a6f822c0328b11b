import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from countca.engine import (
    BINARY,
    Alphabet,
    CyclicConfig,
    RuleError,
    SetConfig,
    WindowConfig,
    WindowExhausted,
    build_rule,
    diff_front,
    format_diagram,
    identity_rule,
    orbit,
    parse_diagram,
    set_valued_orbit,
    shift_rule,
    step,
    step_cyclic,
    xor_rule,
)


def test_alphabet_roundtrip():
    a = Alphabet("0123E")
    assert a.decode(a.encode("01E3 2")) == "01E32"
    assert a.full_mask == 31
    with pytest.raises(ValueError):
        a.encode("5")
    with pytest.raises(ValueError):
        Alphabet("00")


def test_build_rule_rejects_bad_outputs():
    with pytest.raises(RuleError):
        build_rule(BINARY, 1, lambda a, b, c: 2)
    with pytest.raises(RuleError):
        build_rule(BINARY, 1, {(0, 0, 0): 0})


def test_reference_rules():
    x = WindowConfig(BINARY.encode("0110100"), origin=0)
    assert BINARY.decode(step(x, identity_rule()).valid_cells()) == "11010"
    assert BINARY.decode(step(x, shift_rule()).valid_cells()) == "10100"
    assert BINARY.decode(step(x, xor_rule()).valid_cells()) == "11001"


def test_reach_uses_support():
    assert shift_rule().reach() == (0, 1)
    assert identity_rule().reach() == (0, 0)
    assert xor_rule().reach() == (1, 1)


def test_window_shrinks_and_tracks_coordinates():
    x = WindowConfig(np.zeros(10, np.uint8), origin=-3)
    y = step(x, xor_rule())
    assert y.valid == (-2, 5) and y.time == 1
    with pytest.raises(WindowExhausted):
        orbit(x, xor_rule(), 6)


def test_fill_keeps_window_on_quiescent_side():
    x = WindowConfig(BINARY.encode("1"), origin=0, left_fill=0, right_fill=0)
    rows = orbit(x, xor_rule(), 3).rows
    assert BINARY.decode(rows[3].valid_cells()) == "1010101"
    assert rows[3].valid == (-3, 3)


def test_non_quiescent_fill_is_refused():
    x = WindowConfig(BINARY.encode("0101"), origin=0, left_fill=1)
    with pytest.raises(RuleError):
        step(x, build_rule(BINARY, 1, lambda a, b, c: 1 - b))


def test_diagram_roundtrip():
    x = WindowConfig(BINARY.encode("0110100101"), origin=-4)
    d = orbit(x, xor_rule(), 3)
    text = format_diagram(d, BINARY)
    back = parse_diagram(text, BINARY)
    for a, b in zip(d.rows, back.rows):
        assert a.valid == b.valid
        assert np.array_equal(a.valid_cells(), b.valid_cells())


def test_diff_front_of_xor_spreads_both_ways():
    x = WindowConfig(np.zeros(21, np.uint8), origin=-10)
    y = WindowConfig(np.eye(1, 21, 10, dtype=np.uint8)[0], origin=-10)
    assert diff_front(x, y, xor_rule(), 4) == [(0, 0), (-1, 1), (-2, 2), (-3, 3), (-4, 4)]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=8, max_size=30), st.integers(1, 4))
def test_window_agrees_with_cyclic(bits, t):
    """On a periodic point the window orbit is a sub-window of the cyclic orbit."""
    period = np.array(bits, np.uint8)
    rule = xor_rule()
    c = CyclicConfig(period)
    w = WindowConfig(np.tile(period, 3), origin=0)
    for _ in range(t):
        c = step_cyclic(c, rule)
        w = step(w, rule)
    p = len(period)
    for coord in range(w.valid[0], w.valid[1] + 1):
        assert w.at(coord) == c.cells[coord % p]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=12, max_size=24), st.integers(0, 2**24 - 1))
def test_set_orbit_contains_every_completion(bits, seed):
    """Cells left unknown in the set config can be anything; every completion
    stays inside the set-valued orbit."""
    rule = xor_rule()
    cells = np.array(bits, np.uint8)
    masks = (1 << cells).astype(np.uint8)
    masks[:3] = 3
    rows = set_valued_orbit(SetConfig(masks), rule, 4)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        y = cells.copy()
        y[:3] = rng.integers(0, 2, 3)
        o = orbit(WindowConfig(y), rule, 4)
        for s, r in zip(rows, o.rows):
            assert s.contains(r)
