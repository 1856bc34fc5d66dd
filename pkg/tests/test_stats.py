import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sabha import DegenerateInputError, InvalidInputError, paired_t_test, two_sided_z
from sabha.stats import one_sided_z, paired_t_rows

mp.mp.dps = 50


def mp_two_sided_t(t, df):
    """Two-sided t tail through the regularized incomplete beta function."""
    x = mp.mpf(df) / (df + mp.mpf(t) ** 2)
    return float(mp.betainc(mp.mpf(df) / 2, mp.mpf(1) / 2, 0, x, regularized=True))


def mp_two_sided_z(z):
    return float(mp.erfc(abs(mp.mpf(z)) / mp.sqrt(2)))


def test_z_examples():
    assert two_sided_z(0.0) == 1.0
    assert two_sided_z(1.959964) == pytest.approx(0.05, abs=1e-6)
    assert two_sided_z(-2.3) == two_sided_z(2.3)


@settings(max_examples=200, deadline=None)
@given(st.floats(-12, 12))
def test_z_matches_high_precision(z):
    got = two_sided_z(z)
    ref = mp_two_sided_z(z)
    assert abs(got - ref) <= 1e-10 * max(ref, 1e-300) + 1e-300 or abs(got - ref) <= 1e-15


def test_z_rejects_nonfinite():
    with pytest.raises(InvalidInputError):
        two_sided_z(np.inf)


def test_one_sided_z():
    assert one_sided_z(0.0) == 0.5
    np.testing.assert_allclose(one_sided_z([-1.0, 1.0]).sum(), 1.0, rtol=1e-15)


def test_paired_t_example():
    t, p = paired_t_test([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
    assert t == pytest.approx(4.242640687119285, rel=1e-12)
    assert p == pytest.approx(mp_two_sided_t(t, 4), abs=1e-10)
    assert p == pytest.approx(0.0132, abs=5e-5)


def test_paired_t_symmetric_zero():
    t, p = paired_t_test([1, -1, 1, -1], [0, 0, 0, 0])
    assert t == 0.0
    assert p == 1.0


@pytest.mark.parametrize("a, b", [([1, 2, 3], [1, 2, 3]), ([5, 6], [4, 5])])
def test_paired_t_degenerate(a, b):
    with pytest.raises(DegenerateInputError):
        paired_t_test(a, b)


@pytest.mark.parametrize("a, b", [([1], [2]), ([1, 2], [1, 2, 3])])
def test_paired_t_invalid(a, b):
    with pytest.raises(InvalidInputError):
        paired_t_test(a, b)


def test_paired_t_matches_incomplete_beta():
    rng = np.random.default_rng(17)
    for _ in range(100):
        n = int(rng.integers(2, 30))
        a = rng.normal(size=n)
        b = a + rng.normal(0.3, 1.0, n)
        t, p = paired_t_test(a, b)
        assert abs(p - mp_two_sided_t(t, n - 1)) <= 1e-10


def test_paired_t_rows_agree_with_scalar():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(7, 20))
    B = rng.normal(size=(7, 20))
    t, p = paired_t_rows(A, B)
    for i in range(7):
        ti, pi = paired_t_test(A[i], B[i])
        assert t[i] == pytest.approx(ti, rel=1e-13)
        assert p[i] == pytest.approx(pi, rel=1e-12)
