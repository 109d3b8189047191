from functools import partial

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polygaf.results import ExperimentResult, reduce_results, wilson_interval
from polygaf.runner import chunk_ranges, run_chunks

values = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=0, max_size=40)


@given(values, values, values)
def test_merge_associative(a, b, c):
    A, B, C = (ExperimentResult.from_values(v, {"failed": len(v) % 3}) for v in (a, b, c))
    left = A.merge(B).merge(C)
    right = A.merge(B.merge(C))
    assert left.trials == right.trials == len(a) + len(b) + len(c)
    assert left.diagnostics == right.diagnostics
    scale = 1 + max([abs(x) for x in a + b + c] or [0])
    assert left.mean == pytest.approx(right.mean, rel=1e-12, abs=1e-12 * scale)
    assert left.m2 == pytest.approx(right.m2, rel=1e-12, abs=1e-9 * scale**2)


@given(values, values)
def test_merge_commutative_and_matches_pooled(a, b):
    A, B = ExperimentResult.from_values(a), ExperimentResult.from_values(b)
    AB, BA = A.merge(B), B.merge(A)
    pooled = ExperimentResult.from_values(a + b)
    assert AB.trials == BA.trials == pooled.trials
    scale = 1 + max([abs(x) for x in a + b] or [0])
    for r in (AB, BA):
        assert r.mean == pytest.approx(pooled.mean, rel=1e-12, abs=1e-12 * scale)
        assert r.m2 == pytest.approx(pooled.m2, rel=1e-10, abs=1e-9 * scale**2)


def test_moments_and_errors():
    rng = np.random.default_rng(1)
    x = rng.normal(2.0, 3.0, 10_000)
    parts = [ExperimentResult.from_values(x[i : i + 999]) for i in range(0, x.size, 999)]
    r = reduce_results(parts)
    assert r.trials == x.size
    assert r.mean == pytest.approx(x.mean(), rel=1e-13)
    assert r.variance == pytest.approx(x.var(ddof=1), rel=1e-12)
    assert r.standard_error == pytest.approx(x.std(ddof=1) / 100, rel=1e-12)
    assert r.variance_standard_error == pytest.approx(x.var(ddof=1) * np.sqrt(2 / 9999), rel=1e-12)
    assert np.isnan(ExperimentResult.from_values([1.0]).variance)
    d = r.to_dict()
    assert d["trials"] == 10_000 and set(d) >= {"mean", "variance", "standard_error"}


def test_wilson():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0 < hi < 0.05
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - 0.5 == pytest.approx(0.5 - lo, rel=1e-12)
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def _square_range(lo, hi):
    return np.arange(lo, hi) ** 2


def test_chunks_independent_of_workers():
    assert chunk_ranges(10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert chunk_ranges(5, 4, start=3) == [(3, 7), (7, 8)]
    one = np.concatenate(run_chunks(_square_range, 103, 10, workers=1))
    many = np.concatenate(run_chunks(partial(_square_range), 103, 10, workers=3))
    np.testing.assert_array_equal(one, many)
    np.testing.assert_array_equal(one, np.arange(103) ** 2)
