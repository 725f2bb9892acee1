"""
Tests for finite truncations, gauge reduction, Sturm eigenvalues and the density of states.
"""

import sys
import os

# Add parent directory to path to import modules
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from errors import DomainError
from model import ConstantModel, Coupling, HarperModel
from spectrum import (
    TridiagonalOperator,
    dos_cdf,
    dos_estimate,
    eigenvalues_sturm,
    gauge_to_real,
    kolmogorov_distance,
    multiplicity_profile,
    pooled_eigenvalues,
    spectrum_samples,
    sturm_count,
    truncate,
)

FREE = ConstantModel()


def test_operator_validation():
    """Test: mismatched diagonal and off-diagonal lengths are rejected."""
    with pytest.raises(DomainError):
        TridiagonalOperator(np.zeros(3), np.zeros(3))
    with pytest.raises(DomainError):
        TridiagonalOperator(np.zeros(0), np.zeros(0))
    with pytest.raises(DomainError):
        truncate(FREE, 0)
    print("✓ test_operator_validation: shapes checked")


def test_free_two_site_truncation():
    """Test: the free N=2 truncation has eigenvalues -1 and 1 with both solvers."""
    op = gauge_to_real(truncate(FREE, 2)).operator
    for method in ("bisect", "lapack"):
        values = eigenvalues_sturm(op, method=method)
        assert np.allclose(values, [-1.0, 1.0], atol=1e-10), f"{method}: got {values}"
    with pytest.raises(DomainError):
        eigenvalues_sturm(op, method="qr")
    print("✓ test_free_two_site_truncation: eigenvalues ±1")


def test_gauge_to_real_phases():
    """Test: off-diagonal (i, -1) gauges to (1, 1) and D* H D is the real matrix."""
    op = TridiagonalOperator(np.array([0.3, -0.2, 0.5]), np.array([1j, -1.0 + 0j]))
    gauge = gauge_to_real(op)
    assert np.allclose(gauge.operator.offdiag, [1.0, 1.0])
    assert np.allclose(np.abs(gauge.phases), 1.0)
    d = np.diag(gauge.phases)
    conjugated = d.conj().T @ op.dense() @ d
    assert np.allclose(conjugated, gauge.operator.dense(), atol=1e-14)
    assert gauge.blocks == ((0, 2),)
    print(f"✓ test_gauge_to_real_phases: phases {gauge.phases}")


def test_gauge_splits_on_zero_offdiagonal():
    """Test: an exactly zero off-diagonal decouples the operator into blocks."""
    op = TridiagonalOperator(np.zeros(4), np.array([1j, 0.0, 2.0 + 0j]))
    gauge = gauge_to_real(op)
    assert gauge.blocks == ((0, 1), (2, 3))
    assert gauge.phases[2] == 1.0
    values = eigenvalues_sturm(gauge.operator, method="bisect")
    assert np.allclose(values, [-2.0, -1.0, 1.0, 2.0], atol=1e-10)
    print("✓ test_gauge_splits_on_zero_offdiagonal: blocks (0,1), (2,3)")


def test_sturm_eigenvalues_match_dense_solver():
    """Test: bisection and LAPACK eigenvalues of a Harper truncation match a dense Hermitian solve."""
    model = HarperModel(Coupling(0.3, 0.5, 0.2), theta=0.13)
    op = truncate(model, 60)
    reference = np.linalg.eigvalsh(op.dense())
    real = gauge_to_real(op).operator
    for method in ("bisect", "lapack"):
        values = eigenvalues_sturm(real, method=method)
        assert np.max(np.abs(values - reference)) <= 1e-9, f"{method} deviates from dense eigvalsh"
    midpoints = 0.5 * (reference[:-1] + reference[1:])
    gaps = np.diff(reference) > 1e-8
    for k in np.flatnonzero(gaps)[::7]:
        assert sturm_count(real, midpoints[k]) == k + 1
    assert sturm_count(real, reference[0] - 1.0) == 0
    assert sturm_count(real, reference[-1] + 1.0) == 60
    print("✓ test_sturm_eigenvalues_match_dense_solver: both solvers agree with eigvalsh")


def test_sturm_count_requires_real_form():
    """Test: Sturm counts on a complex off-diagonal raise DomainError."""
    op = TridiagonalOperator(np.zeros(3), np.array([1j, 1.0 + 0j]))
    with pytest.raises(DomainError):
        sturm_count(op, 0.0)
    with pytest.raises(DomainError):
        eigenvalues_sturm(op)
    print("✓ test_sturm_count_requires_real_form: rejected")


def test_multiplicity_profile():
    """Test: clusters within tol are counted, simple spectra give 1."""
    assert multiplicity_profile(np.array([0.0, 1e-14, 1.0]), tol=1e-12) == 2
    assert multiplicity_profile(np.array([0.0, 1.0, 2.0])) == 1
    assert multiplicity_profile(np.array([0.5])) == 1
    print("✓ test_multiplicity_profile: cluster sizes")


def test_dos_mass_is_one():
    """Test: histogram masses of the DOS sum to 1."""
    model = HarperModel(Coupling(0.3, 0.5, 0.2))
    dos = dos_estimate(model, 50, 4, bins=32)
    assert abs(dos.masses.sum() - 1.0) <= 1e-12
    assert dos.eigenvalues.shape == (200,)
    assert np.all(np.diff(dos.eigenvalues) >= 0.0)
    single = dos_estimate(model, 50, 4, bins=1)
    assert single.masses.tolist() == [1.0]
    with pytest.raises(DomainError):
        dos_estimate(model, 50, 4, bins=0)
    print("✓ test_dos_mass_is_one: total mass 1")


def test_free_dos_is_symmetric():
    """Test: the free truncation CDF at 0 is one half."""
    dos = dos_estimate(FREE, 100, 2, bins=16)
    assert dos_cdf(dos, 0.0) == pytest.approx(0.5, abs=1e-12)
    assert dos_cdf(dos, -3.0) == 0.0
    assert dos_cdf(dos, 3.0) == 1.0
    print("✓ test_free_dos_is_symmetric: CDF(0) = 0.5")


def test_almost_mathieu_dos_symmetric():
    """Test: coupling (0,1,0) with an even number of phases has CDF(0) near 1/2."""
    dos = dos_estimate(HarperModel(Coupling(0.0, 1.0, 0.0)), 200, 8, bins=64)
    assert abs(dos_cdf(dos, 0.0) - 0.5) <= 0.01, f"CDF(0) = {dos_cdf(dos, 0.0)}"
    print(f"✓ test_almost_mathieu_dos_symmetric: CDF(0) = {dos_cdf(dos, 0.0):.4f}")


def test_pooled_eigenvalues_independent_of_concurrency():
    """Test: the pool does not depend on how many phases run at once."""
    model = HarperModel(Coupling(0.2, 2.0, 0.1))
    serial = pooled_eigenvalues(model, 40, 6, max_concurrent=1)
    parallel = pooled_eigenvalues(model, 40, 6, max_concurrent=4)
    assert np.array_equal(serial, parallel)
    print("✓ test_pooled_eigenvalues_independent_of_concurrency: identical pools")


def test_pooled_eigenvalues_within_norm_bound():
    """Test: every pooled eigenvalue lies in [-||H||, ||H||] for the model's norm bound."""
    models = [
        FREE,
        ConstantModel(a=0.5, b=-1.0),
        HarperModel(Coupling(0.3, 0.5, 0.2)),
        HarperModel(Coupling(0.2, 2.0, 0.1), theta=0.3),
    ]
    for model in models:
        bound = model.norm_bound()
        for method in ("bisect", "lapack"):
            pool = pooled_eigenvalues(model, 60, 4, method)
            assert pool.shape == (240,)
            assert np.all(np.abs(pool) <= bound + 1e-9), f"{model}: max |E| {np.max(np.abs(pool))} > {bound}"
    print(f"✓ test_pooled_eigenvalues_within_norm_bound: {len(models)} models inside their hulls")


def test_kolmogorov_distance():
    """Test: distance 0 for equal pools, 1 for separated pools, 1/2 for a half shift."""
    pool = np.array([0.0, 1.0, 2.0, 3.0])
    assert kolmogorov_distance(pool, pool) == 0.0
    assert kolmogorov_distance(np.array([0.0, 1.0]), np.array([2.0, 3.0])) == 1.0
    assert kolmogorov_distance(pool, pool + 1.5) == pytest.approx(0.5)
    print("✓ test_kolmogorov_distance: exact values")


def test_spectrum_samples_edges():
    """Test: count=1 picks the median rank, count=N*M returns the whole pool."""
    model = HarperModel(Coupling(0.3, 0.5, 0.2))
    pool = pooled_eigenvalues(model, 30, 2)
    one = spectrum_samples(model, 30, 2, 1)
    assert one.tolist() == [pool[30]]
    everything = spectrum_samples(model, 30, 2, 60)
    assert np.array_equal(everything, pool)
    for bad in (0, 61):
        with pytest.raises(DomainError):
            spectrum_samples(model, 30, 2, bad)
    print("✓ test_spectrum_samples_edges: rank selection")


if __name__ == "__main__":
    print("Running spectrum tests...\n")

    test_operator_validation()
    test_free_two_site_truncation()
    test_gauge_to_real_phases()
    test_gauge_splits_on_zero_offdiagonal()
    test_sturm_eigenvalues_match_dense_solver()
    test_sturm_count_requires_real_form()
    test_multiplicity_profile()
    test_dos_mass_is_one()
    test_free_dos_is_symmetric()
    test_almost_mathieu_dos_symmetric()
    test_pooled_eigenvalues_independent_of_concurrency()
    test_pooled_eigenvalues_within_norm_bound()
    test_kolmogorov_distance()
    test_spectrum_samples_edges()

    print("\n✓ All tests passed!")
