"""Eigensolver certification: closed-form spectra, a dense brute-force oracle,
residual/orthogonality contracts, determinism, and the refinement loop."""

import math

import numpy as np
import pytest
import scipy.sparse as sp

import vmon
from vmon.eigensolver import EigensolverError, refined_spectrum
from vmon.grid import GridSpec, SparseOperator


def free_particle_operator(e_c=1.9517, grid=None):
    """Kinetic-only Hamiltonian (e_j = e_l = 0 limit) with a known spectrum."""
    if grid is None:
        grid = GridSpec(16, 32, 1.5)
    t_p = 0.5 * e_c / grid.h_plus**2
    t_m = 0.5 * e_c / grid.h_minus**2
    n, m = grid.n_plus, grid.n_minus
    kp = sp.diags([2 * t_p * np.ones(n), -t_p * np.ones(n - 1), -t_p * np.ones(n - 1)],
                  [0, 1, -1], format="lil")
    kp[0, n - 1] += -t_p
    kp[n - 1, 0] += -t_p
    km = sp.diags([2 * t_m * np.ones(m), -t_m * np.ones(m - 1), -t_m * np.ones(m - 1)],
                  [0, 1, -1])
    h = sp.kron(kp.tocsr(), sp.identity(m, format="csr"), format="csr") + sp.kron(
        sp.identity(n, format="csr"), km, format="csr"
    )
    return SparseOperator(h.tocsr(), grid, kind="hamiltonian", symmetry="symmetric").check()


def free_particle_levels(e_c, grid, count):
    """Closed-form stencil eigenvalues: periodic ring plus Dirichlet box."""
    ring = (e_c / grid.h_plus**2) * (1 - np.cos(2 * np.pi * np.arange(grid.n_plus) / grid.n_plus))
    box = (e_c / grid.h_minus**2) * (
        1 - np.cos(np.pi * np.arange(1, grid.n_minus + 1) / (grid.n_minus + 1))
    )
    return np.sort([r + b for r in ring for b in box])[:count]


class TestLowestEigenpairs:
    def test_free_particle_closed_form(self):
        grid = GridSpec(16, 32, 1.5)
        op = free_particle_operator(grid=grid)
        spec = vmon.lowest_eigenpairs(op, 8, seed=3)
        want = free_particle_levels(1.9517, grid, 8)
        assert np.abs(spec.eigenvalues - want).max() <= 1e-9

    def test_dense_brute_force_oracle_24x24(self, ref_params):
        grid = GridSpec(24, 24, 2.6)
        op = vmon.assemble_hamiltonian(ref_params, grid)
        spec = vmon.lowest_eigenpairs(op, 10, seed=0)
        dense = np.linalg.eigvalsh(op.matrix.toarray())
        assert np.abs(spec.eigenvalues - dense[:10]).max() <= 1e-9

    def test_contracts_hold(self, default_spectrum):
        s = default_spectrum
        assert np.all(np.diff(s.eigenvalues) >= 0)
        assert np.abs(np.linalg.norm(s.eigenvectors, axis=0) - 1).max() <= 1e-10
        gram = s.eigenvectors.T @ s.eigenvectors - np.eye(s.k)
        assert np.abs(gram).max() <= 1e-8
        assert s.residual_norms.max() <= 1e-6

    def test_residuals_recomputed(self, ref_params):
        op = vmon.assemble_hamiltonian(ref_params, GridSpec(32, 64, 3.62))
        spec = vmon.lowest_eigenpairs(op, 4)
        want = np.linalg.norm(
            op.matrix @ spec.eigenvectors - spec.eigenvectors * spec.raw_eigenvalues, axis=0
        )
        assert np.allclose(spec.residual_norms, want, atol=1e-14)

    def test_deterministic_for_fixed_seed(self, ref_params):
        op = vmon.assemble_hamiltonian(ref_params, GridSpec(32, 64, 3.62))
        a = vmon.lowest_eigenpairs(op, 5, seed=7)
        b = vmon.lowest_eigenpairs(op, 5, seed=7)
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
        assert np.array_equal(a.eigenvectors, b.eigenvectors)

    def test_seed_independent_within_tolerance(self, ref_params):
        op = vmon.assemble_hamiltonian(ref_params, GridSpec(32, 64, 3.62))
        a = vmon.lowest_eigenpairs(op, 5, seed=0)
        b = vmon.lowest_eigenpairs(op, 5, seed=12345)
        assert np.abs(a.eigenvalues - b.eigenvalues).max() <= 1e-6

    def test_rejects_nonsymmetric(self, ref_params):
        grid = GridSpec(16, 32, 3.0)
        charge = vmon.observable("charge_plus", ref_params, grid)
        with pytest.raises(ValueError):
            vmon.lowest_eigenpairs(charge, 3)

    @pytest.mark.parametrize("k", [0, 33])
    def test_rejects_bad_k(self, k):
        with pytest.raises(ValueError):
            vmon.lowest_eigenpairs(free_particle_operator(), k)

    def test_rejects_bad_tolerance(self):
        with pytest.raises(ValueError):
            vmon.lowest_eigenpairs(free_particle_operator(), 3, tol=0.0)


class TestConvergedSpectrum:
    def test_loose_target_stops_after_one_confirmation(self, ref_params):
        spec = vmon.converged_spectrum(ref_params, 4, target=0.5, seed=0)
        assert len(spec.history) == 2
        assert spec.history[1].raw_change <= 0.5
        assert spec.metadata["converged"]

    def test_tight_target_uses_extrapolation_sequence(self, converged_full):
        hist = converged_full.history
        assert len(hist) >= 3
        assert hist[-1].extrapolated_change <= 1e-3
        # reported eigenvalues are the latest extrapolation
        assert np.allclose(
            np.sort(converged_full.eigenvalues), np.sort(hist[-1].extrapolated), atol=1e-12
        )

    def test_quadratic_oracle_within_1mhz(self, converged_quadratic, ref_params):
        f_qb, f_a = vmon.harmonic_mode_frequencies(ref_params)
        want = np.sort([n * f_qb + m * f_a for n in range(7) for m in range(3)])[:6]
        got = converged_quadratic.excitations()
        assert np.abs(got - want).max() <= 1e-3

    def test_refinement_cap_raises_with_trace(self, ref_params):
        with pytest.raises(EigensolverError) as err:
            vmon.converged_spectrum(
                ref_params, 8, target=1e-4, grid=GridSpec(16, 32, 3.62), max_doublings=1
            )
        assert err.value.history is not None
        assert len(err.value.history) == 2

    def test_rejects_sub_resolution_target(self, ref_params):
        with pytest.raises(ValueError):
            vmon.converged_spectrum(ref_params, 4, target=1e-5)


class TestRefinedSpectrum:
    def test_matches_quadratic_oracle(self, ref_params):
        spec = refined_spectrum(ref_params, 4, mode="quadratic")
        f_qb, f_a = vmon.harmonic_mode_frequencies(ref_params)
        want = np.array([0.0, f_qb, 2 * f_qb, 3 * f_qb])
        assert np.abs(spec.excitations() - want).max() <= 2e-3

    def test_history_records_both_grids(self, ref_params):
        grid = GridSpec(32, 64, 3.62)
        spec = refined_spectrum(ref_params, 3, grid=grid)
        assert spec.history[0].grid == grid
        assert spec.history[1].grid == grid.doubled()
        assert math.isfinite(spec.history[1].raw_change)
