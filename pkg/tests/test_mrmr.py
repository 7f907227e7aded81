import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bin_column, brute_force_mrmr, mi_bits
from pupilemo import mrmr
from pupilemo.errors import InputError
from pupilemo.features import FeatureMatrix, descriptor_from_name


def matrix(X, y):
    X = np.asarray(X, dtype=float)
    names = [f"le_time_f{j}" for j in range(X.shape[1])]
    return FeatureMatrix(X, np.asarray(y), tuple(descriptor_from_name(n) for n in names))


def test_discretize_edges():
    assert mrmr.discretize([0.0, 0.5, 1.0], 10).tolist() == [0, 5, 9]
    assert mrmr.discretize([2.0, 2.0, 2.0]).tolist() == [0, 0, 0]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60), st.integers(2, 12))
def test_discretize_matches_oracle(col, bins):
    assert mrmr.discretize(col, bins).tolist() == bin_column(col, bins)


def test_mi_of_identical_uniform_four_symbols_is_two_bits():
    x = np.repeat(np.arange(4), 2500)
    assert mrmr.mutual_information(x, x) == pytest.approx(2.0, abs=1e-9)


def test_mi_of_independent_columns_is_small():
    rng = np.random.default_rng(0)
    assert mrmr.mutual_information(rng.integers(0, 4, 10_000), rng.integers(0, 4, 10_000)) < 0.01


def test_mi_of_noisy_channel():
    # joint 0.4 / 0.1 / 0.1 / 0.4: I = 0.8 log2 1.6 + 0.2 log2 0.4
    x = np.repeat([0, 0, 1, 1], [4000, 1000, 1000, 4000])
    y = np.repeat([0, 1, 0, 1], [4000, 1000, 1000, 4000])
    expected = 0.8 * math.log2(1.6) + 0.2 * math.log2(0.4)
    assert mrmr.mutual_information(x, y) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 3)), min_size=1, max_size=200))
def test_mi_properties(pairs):
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    mi = mrmr.mutual_information(x, y)
    assert mi >= 0
    assert mi == pytest.approx(mrmr.mutual_information(y, x), abs=1e-12)
    assert mi == pytest.approx(max(mi_bits(x.tolist(), y.tolist()), 0.0), abs=1e-12)
    assert mi <= mrmr.mutual_information(x, x) + 1e-12


def test_selects_label_copy_first_and_skips_its_duplicate():
    rng = np.random.default_rng(2)
    y = rng.integers(0, 4, 400)
    X = np.column_stack([rng.normal(size=400), y + 0.01 * rng.normal(size=400),
                         y + 0.01 * rng.normal(size=400), rng.normal(size=400) + 0.3 * y])
    res = mrmr.mrmr_select(matrix(X, y), k=2)
    assert res.selected[0] in (1, 2)
    assert res.selected[1] not in (1, 2)


def test_tie_goes_to_lower_index():
    y = np.repeat([0, 1, 2, 3], 5)
    X = np.column_stack([y, y, y]).astype(float)
    assert mrmr.mrmr_select(matrix(X, y), k=1).selected == (0,)


def test_full_ranking_is_a_permutation():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 9))
    res = mrmr.mrmr_select(matrix(X, rng.integers(0, 4, 80)), k=9)
    assert sorted(res.selected) == list(range(9))
    assert res.scores[0].redundancy_bits == 0.0


def test_bad_k():
    fm = matrix(np.zeros((4, 3)) + np.arange(3), [0, 1, 2, 3])
    with pytest.raises(ValueError):
        mrmr.mrmr_select(fm, k=4)
    with pytest.raises(ValueError):
        mrmr.mrmr_select(fm, k=0)


def test_k_prefix_consistency():
    rng = np.random.default_rng(4)
    fm = matrix(rng.normal(size=(120, 12)), rng.integers(0, 4, 120))
    assert mrmr.mrmr_select(fm, k=8).selected[:4] == mrmr.mrmr_select(fm, k=4).selected


@pytest.mark.parametrize("seed", range(5))
def test_matches_brute_force_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    X = rng.normal(size=(60, 8))
    y = rng.integers(0, 4, 60)
    X[:, 3] += y
    res = mrmr.mrmr_select(matrix(X, y), k=5)
    idx, scores = brute_force_mrmr(X, y, 5)
    assert list(res.selected) == idx
    for got, want in zip(res.scores, scores):
        assert (got.relevance_bits, got.redundancy_bits, got.objective) == pytest.approx(want, abs=1e-12)


def test_report_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    fm = matrix(rng.normal(size=(50, 4)), rng.integers(0, 4, 50))
    res = mrmr.mrmr_select(fm, k=3)
    text = mrmr.format_report(res, fm.names)
    assert text.splitlines()[0] == "rank,feature,relevance_bits,redundancy_bits,objective"
    (tmp_path / "s.csv").write_text(text)
    assert mrmr.read_report(tmp_path / "s.csv") == [fm.names[i] for i in res.selected]
    (tmp_path / "bad.csv").write_text("a,b\n")
    with pytest.raises(InputError):
        mrmr.read_report(tmp_path / "bad.csv")
