"""
Tests for couplings, coefficient windows, regions, the duality map and the
Jensen log-integral.
"""

import sys
import os
import math

# Add parent directory to path to import modules
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.strategies import floats

from config import GOLDEN_MEAN
from errors import DomainError
from model import (
    ConstantModel,
    Coupling,
    HarperModel,
    ReflectedModel,
    classify_region,
    coefficients,
    convergents,
    diophantine_witness,
    golden_or_float,
    jensen_log_integral_closed,
    jensen_log_integral_quadrature,
    sample_c,
    sigma_dual,
)

unit = floats(min_value=0.0, max_value=1.0, allow_nan=False)


def test_coupling_validation():
    """Test: negative, non-finite and all-zero couplings are rejected."""
    for bad in [(-0.1, 1.0, 0.0), (0.0, math.nan, 0.0), (0.0, math.inf, 0.0), (0.0, 0.0, 0.0)]:
        with pytest.raises(DomainError):
            Coupling(*bad)
    assert Coupling(0.0, 0.0, 0.5).as_tuple() == (0.0, 0.0, 0.5)
    print("✓ test_coupling_validation: invalid couplings raise DomainError")


def test_harper_model_validation():
    """Test: alpha outside (0,1) and theta outside [0,1) are rejected."""
    coupling = Coupling(0.0, 1.0, 0.0)
    for alpha in (0.0, 1.0, 1.5):
        with pytest.raises(DomainError):
            HarperModel(coupling, alpha)
    with pytest.raises(DomainError):
        HarperModel(coupling, GOLDEN_MEAN, 1.0)
    assert HarperModel(coupling).with_phase(1.25).theta == pytest.approx(0.25)
    print("✓ test_harper_model_validation: domain checks hold")


def test_almost_mathieu_window():
    """Test: coupling (0,1,0), theta=0, N=3 gives b = (2, 2cos 2pi alpha, 2cos 4pi alpha), a = 1."""
    window = coefficients(HarperModel(Coupling(0.0, 1.0, 0.0)), 0, 3)
    expected_b = [2.0, 2.0 * math.cos(2 * math.pi * GOLDEN_MEAN), 2.0 * math.cos(4 * math.pi * GOLDEN_MEAN)]
    assert np.allclose(window.b, expected_b, atol=1e-12), f"Expected b={expected_b}, got {window.b}"
    assert np.allclose(window.a, 1.0, atol=1e-15), f"Expected a=1, got {window.a}"
    assert window.near_singular == ()
    print(f"✓ test_almost_mathieu_window: b = {window.b}")


def test_window_start_offset():
    """Test: a window starting at n matches the tail of a window starting earlier."""
    model = HarperModel(Coupling(0.3, 0.5, 0.2), GOLDEN_MEAN, 0.1)
    long = model.window(-5, 20)
    short = model.window(3, 5)
    assert np.allclose(short.a, long.a[8:13], atol=1e-12)
    assert np.allclose(short.b, long.b[8:13], atol=1e-12)
    assert short.a_at(4) == pytest.approx(long.a_at(4))
    print("✓ test_window_start_offset: windows are consistent under shifts")


def test_sample_c_modulus_bound():
    """Test: |c(x)| <= l1 + l2 + l3 and c is constant when l1 = l3 = 0."""
    coupling = Coupling(0.3, 0.5, 0.2)
    x = np.linspace(0.0, 1.0, 101)
    assert np.all(np.abs(sample_c(coupling, GOLDEN_MEAN, x)) <= 1.0 + 1e-12)
    flat = sample_c(Coupling(0.0, 0.7, 0.0), GOLDEN_MEAN, x)
    assert np.allclose(flat, 0.7)
    print("✓ test_sample_c_modulus_bound: bounds hold")


def test_singular_entries_flagged():
    """Test: a coefficient at a zero of c is flagged as near-singular."""
    # (0.5, 1, 0.5): c vanishes where x + alpha/2 = 1/2
    coupling = Coupling(0.5, 1.0, 0.5)
    theta = (0.5 - 0.5 * GOLDEN_MEAN) % 1.0
    window = HarperModel(coupling, GOLDEN_MEAN, theta).window(0, 4, threshold=1e-8)
    assert 0 in window.near_singular, f"Expected index 0 flagged, got {window.near_singular}"
    print(f"✓ test_singular_entries_flagged: flagged {window.near_singular}")


def test_reflected_model():
    """Test: the reflected model has a'_n = conj(a_{-n-1}) and b'_n = b_{-n}."""
    base = HarperModel(Coupling(0.3, 0.5, 0.2), GOLDEN_MEAN, 0.37)
    reflected = ReflectedModel(base)
    window = reflected.window(-3, 7)
    original = base.window(-10, 21)
    for n in range(-3, 4):
        assert window.a_at(n) == pytest.approx(np.conj(original.a_at(-n - 1)), abs=1e-12)
        assert window.b_at(n) == pytest.approx(original.b_at(-n), abs=1e-12)
    print("✓ test_reflected_model: reflection formulas hold")


def test_classify_region_examples():
    """Test: region tags for interior and boundary couplings; l1+l3 = 0 and l2 = 0 are boundary edges."""
    cases = {
        (0.0, 0.5, 0.0): ("I", True),
        (0.3, 0.0, 0.2): ("I", True),
        (0.0, 2.0, 0.0): ("II", True),
        (0.3, 0.5, 0.2): ("I", False),
        (0.2, 2.0, 0.1): ("II", False),
        (1.0, 1.0, 1.0): ("III", False),
        (0.5, 1.0, 0.5): ("I", True),
        (0.3, 1.0, 0.2): ("I", True),
        (1.0, 2.0, 1.0): ("II", True),
    }
    for triple, (tag, boundary) in cases.items():
        region = classify_region(Coupling(*triple))
        assert region.tag == tag, f"{triple}: expected {tag}, got {region.tag}"
        assert region.on_boundary == boundary, f"{triple}: expected on_boundary={boundary}"
    print(f"✓ test_classify_region_examples: {len(cases)} couplings classified")


def test_sigma_dual_examples():
    """Test: sigma(0.2,2,0.1) = (0.05,0.5,0.1); (0,1,0) is fixed; l2=0 is rejected."""
    dual = sigma_dual(Coupling(0.2, 2.0, 0.1))
    assert dual.as_tuple() == pytest.approx((0.05, 0.5, 0.1))
    assert sigma_dual(Coupling(0.0, 1.0, 0.0)).as_tuple() == (0.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        sigma_dual(Coupling(0.5, 0.0, 0.5))
    print(f"✓ test_sigma_dual_examples: sigma(0.2,2,0.1) = {dual}")


@settings(max_examples=200, deadline=None)
@given(unit, floats(min_value=0.01, max_value=10.0), unit)
def test_sigma_is_an_involution(l1, l2, l3):
    """Test: sigma(sigma(l)) = l."""
    coupling = Coupling(l1, l2, l3)
    back = sigma_dual(sigma_dual(coupling))
    assert back.as_tuple() == pytest.approx(coupling.as_tuple(), rel=1e-12, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(floats(min_value=0.0, max_value=0.98), floats(min_value=0.01, max_value=0.98), unit)
def test_sigma_maps_region_i_interior_to_region_ii(s, l2, split):
    """Test: the interior of region I is mapped into region II."""
    coupling = Coupling(s * split, l2, s * (1.0 - split))
    assert classify_region(coupling).tag == "I"
    assert classify_region(sigma_dual(coupling)).tag == "II"


def test_jensen_closed_examples():
    """Test: closed-form Jensen integral on each branch."""
    assert jensen_log_integral_closed(Coupling(0.0, 0.5, 0.0)) == pytest.approx(math.log(0.5))
    assert jensen_log_integral_closed(Coupling(0.3, 0.5, 0.2)) == pytest.approx(math.log(0.3))
    assert jensen_log_integral_closed(Coupling(1.0, 1.0, 1.0)) == pytest.approx(0.0, abs=1e-15)
    assert jensen_log_integral_closed(Coupling(0.1, 0.5, 0.2)) == pytest.approx(
        math.log((0.5 + math.sqrt(0.25 - 0.08)) / 2.0)
    )
    assert jensen_log_integral_closed(Coupling(0.6, 0.1, 0.2)) == pytest.approx(math.log(0.6))
    print("✓ test_jensen_closed_examples: all branches match")


def test_jensen_quadrature_matches_closed_form():
    """Test: tanh-sinh quadrature agrees with the closed form, including a zero of c on the circle."""
    for triple in [(0.0, 0.5, 0.0), (0.1, 0.5, 0.2), (0.3, 0.5, 0.2), (0.6, 0.1, 0.2), (0.2, 0.7, 0.9)]:
        coupling = Coupling(*triple)
        quad = jensen_log_integral_quadrature(coupling)
        closed = jensen_log_integral_closed(coupling)
        assert abs(quad - closed) <= 1e-6, f"{triple}: quadrature {quad} vs closed {closed}"
    print("✓ test_jensen_quadrature_matches_closed_form: 5 couplings agree")


def test_diophantine_witness():
    """Test: the golden mean passes the witness; a near-rational alpha fails it."""
    assert diophantine_witness(GOLDEN_MEAN, 2.0, 1e-2, 10_000)
    assert not diophantine_witness(0.25 + 1e-9, 2.0, 1e-2, 10)
    with pytest.raises(DomainError):
        diophantine_witness(GOLDEN_MEAN, 1.0, 1e-2, 10)
    print("✓ test_diophantine_witness: witness behaves")


def test_convergents_of_golden_mean():
    """Test: convergents of the golden mean are ratios of Fibonacci numbers."""
    fractions = convergents(GOLDEN_MEAN, 8)
    expected = ["0/1", "1/1", "1/2", "2/3", "3/5", "5/8", "8/13", "13/21"]
    assert [f"{f.numerator}/{f.denominator}" for f in fractions] == expected
    print(f"✓ test_convergents_of_golden_mean: {expected}")


def test_golden_keyword():
    """Test: 'golden' resolves to (sqrt 5 - 1)/2, other text parses as float."""
    assert golden_or_float("golden") == (math.sqrt(5.0) - 1.0) / 2.0
    assert golden_or_float(" Golden ") == GOLDEN_MEAN
    assert golden_or_float("0.25") == 0.25
    print("✓ test_golden_keyword: keyword resolved")


def test_mean_log_offdiag():
    """Test: the mean of log|a| is the Jensen integral for Harper and log|a| for constant models."""
    assert HarperModel(Coupling(0.3, 0.5, 0.2)).mean_log_offdiag() == pytest.approx(math.log(0.3))
    assert ConstantModel().mean_log_offdiag() == 0.0
    assert ConstantModel(a=2.0).mean_log_offdiag() == pytest.approx(math.log(2.0))
    print("✓ test_mean_log_offdiag: values match")


if __name__ == "__main__":
    print("Running model tests...\n")

    test_coupling_validation()
    test_harper_model_validation()
    test_almost_mathieu_window()
    test_window_start_offset()
    test_sample_c_modulus_bound()
    test_singular_entries_flagged()
    test_reflected_model()
    test_classify_region_examples()
    test_sigma_dual_examples()
    test_sigma_is_an_involution()
    test_sigma_maps_region_i_interior_to_region_ii()
    test_jensen_closed_examples()
    test_jensen_quadrature_matches_closed_form()
    test_diophantine_witness()
    test_convergents_of_golden_mean()
    test_golden_keyword()
    test_mean_log_offdiag()

    print("\n✓ All tests passed!")
