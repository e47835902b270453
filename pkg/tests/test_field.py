import numpy as np
import pytest

from relzk.field import GaloisField, _order_of_x, find_primitive_polynomial, galois_field


@pytest.mark.parametrize("m", [1, 2, 3, 4, 6])
def test_primitive_polynomial_has_full_order(m):
    coeffs = find_primitive_polynomial(m)
    assert len(coeffs) == m
    assert _order_of_x(coeffs, 3 ** m - 1) == 3 ** m - 1


def test_degree_must_be_positive():
    with pytest.raises(ValueError):
        find_primitive_polynomial(0)


@pytest.mark.parametrize("m", [2, 3, 5])
def test_antilog_enumerates_every_nonzero_element(m):
    gf = GaloisField(m)
    codes = gf.antilog @ (3 ** np.arange(m))
    assert sorted(codes.tolist()) == list(range(1, 3 ** m))


@pytest.mark.parametrize("m", [2, 3, 4])
def test_trace_is_balanced(m):
    counts = np.bincount(galois_field(m).traces.astype(np.int64), minlength=3)
    assert counts.tolist() == [3 ** (m - 1) - 1, 3 ** (m - 1), 3 ** (m - 1)]


def test_trace_is_frobenius_invariant():
    gf = galois_field(3)
    k = np.arange(gf.order)
    assert np.array_equal(gf.traces[k], gf.traces[(3 * k) % gf.order])


def test_field_is_cached():
    assert galois_field(4) is galois_field(4)
