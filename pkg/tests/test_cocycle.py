"""
Tests for transfer matrices, Lyapunov exponent estimation and solution propagation.
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

from cocycle import (
    BACKWARD,
    FORWARD,
    CocycleResult,
    lyapunov_curve,
    lyapunov_epsilon_ladder,
    lyapunov_exponent,
    propagate_solution,
    transfer_matrix,
    wronskian,
)
from errors import DegenerateOrbitError, DomainError, SingularStepError
from model import CoefficientWindow, ConstantModel, Coupling, HarperModel

FREE = ConstantModel()
modulus = floats(min_value=0.05, max_value=3.0, allow_nan=False)
angle = floats(min_value=0.0, max_value=2 * math.pi, allow_nan=False)
real = floats(min_value=-5.0, max_value=5.0, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(modulus, angle, modulus, angle, real, real, floats(min_value=0.0, max_value=2.0))
def test_transfer_matrix_determinant(r_prev, phi_prev, r_cur, phi_cur, b, e, eta):
    """Test: det B_n = conj(a_{n-1}) / a_n."""
    a_prev = r_prev * complex(math.cos(phi_prev), math.sin(phi_prev))
    a_cur = r_cur * complex(math.cos(phi_cur), math.sin(phi_cur))
    det = transfer_matrix(a_prev, a_cur, b, complex(e, eta)).det()
    expected = np.conj(a_prev) / a_cur
    assert abs(det - expected) <= 1e-12 * max(1.0, abs(expected)), f"det {det} != {expected}"


def test_transfer_matrix_singular_step():
    """Test: |a_n| below the threshold raises SingularStepError carrying the index."""
    with pytest.raises(SingularStepError) as excinfo:
        transfer_matrix(1.0, 1e-14, 0.0, 0.5j, index=7)
    assert excinfo.value.index == 7
    print("✓ test_transfer_matrix_singular_step: index carried")


def test_transfer_matrix_maps_solutions():
    """Test: B_n advances phi_n = (-1)^n psi_n for the free solution psi_n = n + 1 at E = 2."""
    step = transfer_matrix(1.0, 1.0, 0.0, 2.0)
    # phi_3 = -4, phi_2 = 3, phi_4 = 5
    assert step.apply(-4.0, 3.0) == pytest.approx((5.0, -4.0))
    print("✓ test_transfer_matrix_maps_solutions: (-4, 3) -> (5, -4)")


def test_free_lyapunov_outside_spectrum():
    """Test: free Laplacian at E=3 has L = log((3 + sqrt 5)/2) = 0.96242."""
    result = lyapunov_exponent(FREE, 3.0, 10_000)
    expected = math.log((3.0 + math.sqrt(5.0)) / 2.0)
    assert abs(result.le_estimate - expected) <= 1e-3, f"Expected {expected:.5f}, got {result.le_estimate:.5f}"
    assert result.steps == 10_000 and result.skipped == 0
    print(f"✓ test_free_lyapunov_outside_spectrum: L(3) = {result.le_estimate:.5f}")


def test_free_lyapunov_complex_energy():
    """Test: free Laplacian at z=3i has L = log((3 + sqrt 13)/2)."""
    result = lyapunov_exponent(FREE, 3j, 10_000)
    expected = math.log((3.0 + math.sqrt(13.0)) / 2.0)
    assert abs(result.le_estimate - expected) <= 1e-3, f"Expected {expected:.5f}, got {result.le_estimate:.5f}"
    print(f"✓ test_free_lyapunov_complex_energy: L(3i) = {result.le_estimate:.5f}")


def test_free_lyapunov_inside_spectrum():
    """Test: free Laplacian at E=0 has L = 0 (clamped, never negative)."""
    result = lyapunov_exponent(FREE, 0.0, 10_000)
    assert 0.0 <= result.le_estimate <= 1e-3, f"Expected ~0, got {result.le_estimate}"
    assert result.le_estimate == max(result.raw_estimate, 0.0)
    print(f"✓ test_free_lyapunov_inside_spectrum: L(0) = {result.le_estimate:.2e}")


def test_almost_mathieu_region_i():
    """Test: coupling (0, 0.5, 0) at E=0 has L = log 2."""
    model = HarperModel(Coupling(0.0, 0.5, 0.0))
    result = lyapunov_exponent(model, 0.0, 100_000)
    assert abs(result.le_estimate - math.log(2.0)) <= 0.02, f"Expected log 2, got {result.le_estimate:.5f}"
    assert result.stderr_estimate < 0.02
    print(f"✓ test_almost_mathieu_region_i: L(0) = {result.le_estimate:.5f} ± {result.stderr_estimate:.1e}")


def test_step_doubling_within_stderr():
    """Test: doubling the step count moves the (0, 0.5, 0) estimate by less than 3 stderr."""
    model = HarperModel(Coupling(0.0, 0.5, 0.0))
    short = lyapunov_exponent(model, 0.0, 100_000)
    long = lyapunov_exponent(model, 0.0, 200_000)
    bound = 3.0 * max(short.stderr_estimate, long.stderr_estimate, 1e-4)
    assert abs(long.le_estimate - short.le_estimate) <= bound, f"{short.le_estimate} -> {long.le_estimate}"
    print(f"✓ test_step_doubling_within_stderr: {short.le_estimate:.5f} -> {long.le_estimate:.5f}")


def test_complex_shift_does_not_lower_le():
    """Test: L(E + i eps) >= L(E) up to estimation error on a 21-point real grid."""
    model = HarperModel(Coupling(0.3, 0.5, 0.2))
    energies = list(np.linspace(-3.0, 3.0, 21))
    on_axis = [r.le_estimate for r in lyapunov_curve(model, energies, 10_000)]
    for eps in (1e-1, 1e-2):
        shifted = [r.le_estimate for r in lyapunov_curve(model, [complex(E, eps) for E in energies], 10_000)]
        for E, real_le, shifted_le in zip(energies, on_axis, shifted):
            assert shifted_le >= real_le - 2e-2, f"E={E:.2f} eps={eps}: {shifted_le:.4f} < {real_le:.4f}"
    print(f"✓ test_complex_shift_does_not_lower_le: {len(energies)} energies")


def test_coefficient_window_input():
    """Test: a CoefficientWindow gives the same estimate as its family."""
    model = HarperModel(Coupling(0.3, 0.5, 0.2))
    window = model.window(0, 2001)
    from_window = lyapunov_exponent(window, 0.4, 2000)
    from_model = lyapunov_exponent(model, 0.4, 2000)
    assert from_window.raw_estimate == pytest.approx(from_model.raw_estimate, rel=1e-12)
    with pytest.raises(DomainError):
        lyapunov_exponent(window, 0.4, 5000)
    print("✓ test_coefficient_window_input: window and family agree")


def test_degenerate_orbit():
    """Test: more than 0.1% singular steps raises DegenerateOrbitError."""
    a = np.ones(1001, dtype=complex)
    a[::10] = 0.0
    window = CoefficientWindow(0, a, np.zeros(1001))
    with pytest.raises(DegenerateOrbitError) as excinfo:
        lyapunov_exponent(window, 3.0, 1000)
    assert excinfo.value.skipped >= 100
    print(f"✓ test_degenerate_orbit: {excinfo.value.skipped} skipped steps rejected")


def test_log_growth_trace():
    """Test: the running-average trace ends at the raw estimate."""
    result = lyapunov_exponent(FREE, 3.0, 500, trace=True)
    assert result.log_growth_trace is not None and result.log_growth_trace.shape == (500,)
    assert result.log_growth_trace[-1] == pytest.approx(result.raw_estimate, rel=1e-12)
    assert lyapunov_exponent(FREE, 3.0, 500).log_growth_trace is None
    print("✓ test_log_growth_trace: trace consistent")


def test_lyapunov_curve_order():
    """Test: curve results come back in input order."""
    energies = [3.0, 3j, 0.0, 5.0]
    results = lyapunov_curve(FREE, energies, 5_000, max_concurrent=2)
    assert all(isinstance(r, CocycleResult) for r in results)
    sequential = [lyapunov_exponent(FREE, z, 5_000).le_estimate for z in energies]
    assert [r.le_estimate for r in results] == sequential
    with pytest.raises(DomainError):
        lyapunov_curve(FREE, [], 100)
    print(f"✓ test_lyapunov_curve_order: {len(results)} energies in order")


def test_epsilon_ladder():
    """Test: L(E + i eps) shrinks with eps inside the free spectrum and ends at eps = 0."""
    ladder = lyapunov_epsilon_ladder(FREE, 0.0, 20_000)
    assert [eps for eps, _ in ladder] == [1e-1, 1e-2, 1e-3, 0.0]
    values = [result.le_estimate for _, result in ladder]
    assert values[0] > values[1] > values[2] - 1e-3, f"Expected decreasing values, got {values}"
    assert values[0] == pytest.approx(math.asinh(0.05), abs=2e-3)
    print(f"✓ test_epsilon_ladder: {values}")


def test_propagate_free_linear_solution():
    """Test: free Laplacian at E=2 with seeds (1, 2) gives psi_n = n + 1."""
    window = FREE.window(0, 10)
    psi = propagate_solution(window, 2.0, 1.0, 2.0, FORWARD)
    assert np.allclose(psi.values, np.arange(1, 11)), f"Expected 1..10, got {psi.values.real}"
    constant = propagate_solution(window, 2.0, 1.0, 1.0, FORWARD)
    assert np.allclose(constant.values, 1.0)
    print("✓ test_propagate_free_linear_solution: psi_n = n + 1")


def test_propagate_backward_recovers_forward():
    """Test: propagating back from the end seeds recovers the forward solution."""
    model = HarperModel(Coupling(0.2, 2.0, 0.1), theta=0.2)
    window = model.window(-5, 12)
    forward = propagate_solution(window, 0.5 + 0.1j, 1.0, 0.5, FORWARD)
    backward = propagate_solution(window, 0.5 + 0.1j, forward.values[-1], forward.values[-2], BACKWARD)
    scale = np.max(np.abs(forward.values))
    assert np.max(np.abs(backward.values - forward.values)) <= 1e-9 * scale
    assert backward.start_index == -5
    with pytest.raises(DomainError):
        propagate_solution(window, 0.5, 1.0, 0.0, "sideways")
    print("✓ test_propagate_backward_recovers_forward: round trip agrees")


def test_wronskian_conservation():
    """Test: conj(a_{n-1}) W_{n-1} = a_n W_n along 100-step propagations."""
    model = HarperModel(Coupling(0.2, 0.7, 0.9), theta=0.41)
    window = model.window(0, 101)
    z = 0.7 + 0.05j
    u = propagate_solution(window, z, 1.0, 0.0)
    v = propagate_solution(window, z, 0.0, 1.0)
    worst = 0.0
    for n in range(1, 99):
        lhs = np.conj(window.a_at(n - 1)) * wronskian(u, v, n - 1)
        rhs = window.a_at(n) * wronskian(u, v, n)
        size = abs(window.a_at(n)) * (abs(u.at(n) * v.at(n + 1)) + abs(u.at(n + 1) * v.at(n)))
        worst = max(worst, abs(lhs - rhs) / max(size, 1e-300))
    assert worst <= 1e-10, f"Relative Wronskian drift {worst:.2e}"
    with pytest.raises(DomainError):
        wronskian(u, v, 100)
    print(f"✓ test_wronskian_conservation: max relative drift {worst:.2e}")


if __name__ == "__main__":
    print("Running cocycle tests...\n")

    test_transfer_matrix_determinant()
    test_transfer_matrix_singular_step()
    test_transfer_matrix_maps_solutions()
    test_free_lyapunov_outside_spectrum()
    test_free_lyapunov_complex_energy()
    test_free_lyapunov_inside_spectrum()
    test_almost_mathieu_region_i()
    test_step_doubling_within_stderr()
    test_complex_shift_does_not_lower_le()
    test_coefficient_window_input()
    test_degenerate_orbit()
    test_log_growth_trace()
    test_lyapunov_curve_order()
    test_epsilon_ladder()
    test_propagate_free_linear_solution()
    test_propagate_backward_recovers_forward()
    test_wronskian_conservation()

    print("\n✓ All tests passed!")
