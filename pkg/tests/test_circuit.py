"""Circuit formulas against independently computed values.

Expected numbers are recomputed inline from scipy.constants (an independent
source of the CODATA values) rather than hard-coding package output.
"""

import math

import numpy as np
import pytest
import scipy.constants as sc

import vmon
from vmon.circuit import reduced_from_lines
from vmon.constants import CODATA2018, PHI0, PhysicalConstants

PHI0_SC = sc.h / (2 * sc.e)


def test_flux_quantum_identity():
    assert abs(CODATA2018.phi0 - CODATA2018.h / (2 * CODATA2018.e_charge)) <= 1e-15 * PHI0
    assert PHI0 == pytest.approx(sc.physical_constants["mag. flux quantum"][0], rel=1e-12)


def test_constants_validated():
    with pytest.raises(ValueError):
        PhysicalConstants(phi0=2.1e-15)


class TestDerivedEnergies:
    def test_measured_device_values(self):
        p = vmon.reference_params()
        s = vmon.derived_energies(p)
        e_j = PHI0_SC * 8.19e-9 / (2 * math.pi * sc.h) / 1e9
        e_c = (2 * sc.e) ** 2 / (2 * 39.7e-15 * sc.h) / 1e9
        l_j = PHI0_SC / (2 * math.pi * 8.19e-9)
        assert s.e_j == pytest.approx(e_j, rel=1e-12)
        assert s.e_c == pytest.approx(e_c, rel=1e-12)
        assert s.l_j == pytest.approx(l_j, rel=1e-12)
        # the quoted fit: L = 0.192 L_J = 7.715 nH and L_J = 40.18 nH
        assert s.l_j == pytest.approx(40.18e-9, abs=0.01e-9)
        assert p.l == pytest.approx(7.715e-9, abs=0.001e-9)
        assert s.e_j == pytest.approx(4.068, abs=1e-3)
        assert s.e_c == pytest.approx(1.951, abs=1e-3)
        assert s.e_l == pytest.approx(s.e_j / 0.192, rel=1e-12)

    @pytest.mark.parametrize("field", ["ic", "c", "l"])
    def test_rejects_nonpositive(self, field):
        good = {"ic": 8e-9, "c": 4e-14, "l": 8e-9}
        for bad in (0.0, -1.0):
            with pytest.raises(ValueError):
                vmon.CircuitParams(**{**good, field: bad})

    def test_rejects_bad_asymmetry_and_flux(self):
        with pytest.raises(ValueError):
            vmon.CircuitParams(ic=8e-9, c=4e-14, l=8e-9, d=1.0)
        with pytest.raises(ValueError):
            vmon.CircuitParams(ic=8e-9, c=4e-14, l=8e-9, phi_b=math.inf)


class TestChainInductance:
    def test_single_junction_is_josephson_inductance(self):
        s = vmon.derived_energies(vmon.CircuitParams(ic=5e-9, c=4e-14, l=1e-8))
        assert vmon.chain_inductance(5e-9, 1) == pytest.approx(s.l_j, rel=1e-14)

    def test_twelve_junction_chain(self):
        want = 12 * PHI0_SC / (2 * math.pi * 512e-9)
        assert vmon.chain_inductance(512e-9, 12) == pytest.approx(want, rel=1e-12)
        # and that chain realizes the fitted loop inductance
        assert vmon.chain_inductance(512e-9, 12) == pytest.approx(7.715e-9, rel=5e-4)

    def test_linear_in_length(self):
        assert vmon.chain_inductance(3e-7, 24) == pytest.approx(
            2 * vmon.chain_inductance(3e-7, 12), rel=1e-14
        )

    def test_validation(self):
        with pytest.raises(ValueError):
            vmon.chain_inductance(-1e-9, 12)
        with pytest.raises(ValueError):
            vmon.chain_inductance(1e-9, 0)


class TestPotential:
    def test_global_minimum_at_origin(self):
        p = vmon.reference_params()
        s = vmon.derived_energies(p)
        assert vmon.potential_energy(p, 0.0, 0.0) == pytest.approx(-2 * s.e_j, rel=1e-14)

    def test_quarter_flux_value(self):
        # U(0, 0) at phi_b = 1/4 is -2 e_j + (e_l/2)(pi/2)^2
        p = vmon.reference_params(phi_b=0.25)
        s = vmon.derived_energies(p)
        want = -2 * s.e_j + 0.5 * s.e_l * (math.pi / 2) ** 2
        assert vmon.potential_energy(p, 0.0, 0.0) == pytest.approx(want, rel=1e-14)
        assert want == pytest.approx(18.0, abs=0.05)

    def test_parity_symmetries(self, rng):
        pts = rng.uniform(-math.pi, math.pi, size=(20, 2))
        p0 = vmon.reference_params()
        for x, y in pts:
            assert vmon.potential_energy(p0, x, y) == pytest.approx(
                vmon.potential_energy(p0, -x, y), rel=1e-12
            )
            assert vmon.potential_energy(p0, x, y) == pytest.approx(
                vmon.potential_energy(p0, x, -y), rel=1e-12
            )
        # even in phi_plus at any flux, even in phi_minus only at (half-)integer flux
        pf = vmon.reference_params(phi_b=0.3)
        ph = vmon.reference_params(phi_b=0.5)
        x, y = 0.7, 0.4
        assert vmon.potential_energy(pf, x, y) == pytest.approx(
            vmon.potential_energy(pf, -x, y), rel=1e-12
        )
        assert vmon.potential_energy(pf, x, y) != pytest.approx(
            vmon.potential_energy(pf, x, -y), rel=1e-6
        )
        # at phi_b = 1/2 the minus-parity partner sits at the mirrored well
        assert vmon.potential_energy(ph, x, y) == pytest.approx(
            vmon.potential_energy(ph.replace(phi_b=-0.5), x, -y), rel=1e-12
        )

    def test_periodic_in_phi_plus(self, rng):
        p = vmon.reference_params(phi_b=0.17, d=0.35)
        for x, y in rng.uniform(-3, 3, size=(12, 2)):
            assert vmon.potential_energy(p, x + 2 * math.pi, y) == pytest.approx(
                vmon.potential_energy(p, x, y), rel=1e-12
            )

    def test_vectorized(self):
        p = vmon.reference_params()
        x = np.linspace(-1, 1, 7)
        u = vmon.potential_energy(p, x, 0.0 * x)
        assert u.shape == x.shape

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            vmon.potential_energy(vmon.reference_params(), math.nan, 0.0)


class TestHarmonicModes:
    def test_sweet_spot_frequencies(self):
        p = vmon.reference_params()
        s = vmon.derived_energies(p)
        f_qb, f_a = vmon.harmonic_mode_frequencies(p)
        assert f_qb == pytest.approx(math.sqrt(2 * s.e_j * s.e_c), rel=1e-14)
        assert f_qb == pytest.approx(3.985, abs=1e-3)
        assert f_a == pytest.approx(f_qb * math.sqrt(1 + 2 / 0.192), rel=1e-12)
        assert f_a == pytest.approx(13.46, abs=5e-3)
        assert f_a / f_qb == pytest.approx(3.3788, abs=2e-4)

    def test_rejects_flux_bias(self):
        with pytest.raises(ValueError):
            vmon.harmonic_mode_frequencies(vmon.reference_params(phi_b=0.1))

    def test_large_inductance_limit(self):
        p = vmon.reference_params().replace(l=1e3)
        f_qb, f_a = vmon.harmonic_mode_frequencies(p)
        assert f_a == pytest.approx(f_qb, rel=1e-6)


class TestGzz:
    def test_paper_value(self):
        g = vmon.gzz_perturbative(vmon.reference_params())
        assert 2e3 * g == pytest.approx(144.0, abs=2.0)  # g_zz/pi in MHz
        assert 2e3 * g == pytest.approx(144.402, abs=1e-2)

    def test_limit_and_scalings(self):
        p = vmon.reference_params()
        assert vmon.gzz_perturbative(p.replace(l=1e3)) == pytest.approx(
            vmon.derived_energies(p).e_c / 8, rel=1e-5
        )
        # doubling C halves E_C and halves g at fixed L_J/L
        assert vmon.gzz_perturbative(p.replace(c=2 * p.c)) == pytest.approx(
            vmon.gzz_perturbative(p) / 2, rel=1e-12
        )

    def test_monotone_in_loop_inductance(self):
        p = vmon.reference_params()
        gs = [vmon.gzz_perturbative(p.replace(l=l)) for l in (4e-9, 8e-9, 16e-9, 64e-9)]
        assert all(a < b for a, b in zip(gs, gs[1:]))
        assert all(g < vmon.derived_energies(p).e_c / 8 for g in gs)

    def test_rejects_flux_bias(self):
        with pytest.raises(ValueError):
            vmon.gzz_perturbative(vmon.reference_params(phi_b=0.2))


class TestReducedModel:
    def test_transition_algebra(self):
        m = vmon.ReducedModel(f_qb=3.67, f_a=13.0, g=0.0722)
        h = vmon.reduced_hamiltonian(m)
        d = np.diag(h)
        assert d[1] - d[0] == pytest.approx(3.7422, abs=1e-12)          # qubit line
        assert (d[3] - d[2]) - (d[1] - d[0]) == pytest.approx(-0.1444, abs=1e-12)
        assert np.trace(h) == pytest.approx(0.0, abs=1e-12)

    def test_uncoupled_limit_is_additive(self):
        m = vmon.ReducedModel(f_qb=3.67, f_a=13.0, g=1e-9)
        d = np.diag(vmon.reduced_hamiltonian(m))
        chi = d[3] - d[2] - d[1] + d[0]
        assert abs(chi) <= 3e-9
        assert d[3] - d[0] == pytest.approx((d[1] - d[0]) + (d[2] - d[0]), abs=1e-8)

    def test_invariants(self):
        with pytest.raises(ValueError):
            vmon.ReducedModel(f_qb=13.0, f_a=3.0, g=0.07)
        with pytest.raises(ValueError):
            vmon.ReducedModel(f_qb=3.0, f_a=13.0, g=-0.07)

    def test_reduced_from_lines_reproduces_all_four_transitions(self):
        m = reduced_from_lines(3.6497, 13.3697, 0.0739)
        d = np.diag(vmon.reduced_hamiltonian(m))
        assert d[1] - d[0] == pytest.approx(3.6497, abs=1e-12)
        assert d[2] - d[0] == pytest.approx(13.3697, abs=1e-12)
        assert d[3] - d[2] == pytest.approx(3.6497 - 2 * 0.0739, abs=1e-12)
        assert d[3] - d[1] == pytest.approx(13.3697 - 2 * 0.0739, abs=1e-12)
