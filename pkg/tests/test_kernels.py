"""The compiled and numpy paths of every kernel agree."""
import numpy as np
import pytest

from countca import kernels
from countca._accel import HAVE_NUMBA
from countca.automaton import COUNTER_ALPHABET, E, fd_rule
from countca.engine import build_rule, xor_rule

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def both(name):
    return kernels.implementations(name)


def separated_rows(rng, n, w):
    rows = np.zeros((n, w), dtype=np.uint8)
    for b in range(n):
        i = int(rng.integers(0, 3))
        while i < w:
            rows[b, i] = E
            L = int(rng.integers(3, 7))
            rows[b, i + 1 : i + 1 + L] = rng.integers(0, 4, size=min(L, max(0, w - i - 1)))
            i += L + 1
    return rows


def test_table_apply_agrees():
    rng = np.random.default_rng(0)
    rule = build_rule(COUNTER_ALPHABET, 1, lambda a, b, c: (a + 2 * b + c) % 5)
    cells = rng.integers(0, 5, size=(20, 40)).astype(np.uint8)
    nb, np_ = both("table_apply")
    assert np.array_equal(nb(cells, rule.table, 5, 1), np_(cells, rule.table, 5, 1))


def test_set_kernels_agree():
    rng = np.random.default_rng(1)
    rule = xor_rule()
    masks = rng.integers(1, 4, size=(15, 30)).astype(np.uint8)
    st = rule._set_table()
    sup = np.asarray(rule.support, dtype=np.int64)
    nb, np_ = both("set_table_apply")
    assert np.array_equal(nb(masks, st, sup, 4, 1), np_(masks, st, sup, 4, 1))
    nb, np_ = both("set_enum_apply")
    assert np.array_equal(nb(masks, rule.table, 2, 1), np_(masks, rule.table, 2, 1))
    # enumeration and the precomputed set table give the same images
    assert np.array_equal(np_(masks, rule.table, 2, 1), both("set_table_apply")[1](masks, st, sup, 4, 1))


def test_fd_apply_matches_table():
    rng = np.random.default_rng(2)
    cells = rng.integers(0, 5, size=(30, 50)).astype(np.uint8)
    nb, np_ = both("fd_apply")
    ref = fd_rule().apply(np.concatenate([cells, np.zeros((30, 2), np.uint8)], axis=1))
    assert np.array_equal(nb(cells), ref)
    assert np.array_equal(np_(cells), ref)


@pytest.mark.parametrize("steps", [0, 1, 7, 25])
def test_fd_run_agrees(steps):
    cells = separated_rows(np.random.default_rng(3), 12, 80)
    nb, np_ = both("fd_run")
    assert np.array_equal(nb(cells, steps), np_(cells, steps))


def test_fd_column_agrees():
    rng = np.random.default_rng(4)
    cells = separated_rows(rng, 16, 120)
    burn = rng.integers(0, 10, size=16).astype(np.int64)
    nb, np_ = both("fd_column")
    assert np.array_equal(nb(cells, burn, 20, 110), np_(cells, burn, 20, 110))


def test_fd_driven_agrees():
    rng = np.random.default_rng(5)
    cells = separated_rows(rng, 8, 20)
    drive = rng.choice(np.array([0, 2], dtype=np.uint8), size=(8, 30))
    nb, np_ = both("fd_driven")
    assert np.array_equal(nb(cells, drive), np_(cells, drive))


def test_anchored_divergence_agrees():
    rng = np.random.default_rng(6)
    for _ in range(10):
        x = separated_rows(rng, 1, 60)[0]
        y = x.copy()
        j = int(rng.integers(2, 20))
        y[j] = (y[j] + 1) % 4 if y[j] != E else E
        nb, np_ = both("fd_anchored_divergence")
        assert nb(x, y, 55, 58, 500) == np_(x, y, 55, 58, 500)


def test_h_run_agrees():
    rng = np.random.default_rng(7)
    l = rng.integers(3, 7, size=6).astype(np.int64)
    c = np.array([rng.integers(0, 1 << int(v)) for v in l], dtype=np.int64)
    r = np.zeros(6, dtype=np.int64)
    drive = rng.integers(1, 3, size=200).astype(np.int64)
    a = both("h_run")[0](l, c, r, drive, True)
    b = both("h_run")[1](l, c, r, drive, True)
    for u, v in zip(a, b):
        assert np.array_equal(u, v)


def test_fd_split_agrees():
    rng = np.random.default_rng(8)
    nb, np_ = both("fd_split")
    for _ in range(20):
        seg = separated_rows(rng, 1, int(rng.integers(8, 30)))[0]
        seg[0] = 0
        for first in (0, 2):
            assert nb(seg, first, 3000) == np_(seg, first, 3000, chunk=97)


def test_disable_flag_selects_numpy(tmp_path):
    import os
    import subprocess
    import sys

    env = dict(os.environ, COUNTCA_DISABLE_NUMBA="1")
    code = (
        "from countca import kernels; from countca._accel import backend_name;"
        "from countca.cli import main;"
        "assert backend_name() == 'numpy';"
        "assert kernels.fd_run is kernels.implementations('fd_run')[1];"
        "raise SystemExit(main(['fixture-check']))"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "fixture ok" in out.stdout
