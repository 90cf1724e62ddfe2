"""Physical constants (CODATA-2018 exact values) and unit helpers.

Internal unit convention used throughout the package: energies are stored as
ordinary frequencies in GHz (i.e. E/h), times in ns for dynamics, phases in
radians, and magnetic flux in units of the flux quantum Phi0.
"""

from dataclasses import dataclass

# SI defining constants (exact since the 2019 redefinition)
E_CHARGE = 1.602176634e-19   # elementary charge, C
PLANCK_H = 6.62607015e-34    # Planck constant, J s

# Magnetic flux quantum Phi0 = h / (2e), Wb
PHI0 = PLANCK_H / (2.0 * E_CHARGE)

# Reduced flux quantum Phi0 / (2 pi), Wb
PHI0_BAR = PHI0 / (2.0 * 3.141592653589793)

GHZ = 1e9  # Hz per GHz


@dataclass(frozen=True)
class PhysicalConstants:
    """Bundle of the constants the circuit formulas depend on."""

    e_charge: float = E_CHARGE
    h: float = PLANCK_H
    phi0: float = PHI0

    def __post_init__(self):
        expected = self.h / (2.0 * self.e_charge)
        if abs(self.phi0 - expected) > 1e-15 * expected:
            raise ValueError("phi0 must equal h/(2e)")


CODATA2018 = PhysicalConstants()
