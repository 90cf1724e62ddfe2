"""Circuit model of two transmons coupled by a shared loop inductance.

Two identical small junctions (critical current ``ic``, shunt capacitance
``c``) sit in a loop closed by a linear inductance ``l`` and threaded by an
external flux ``phi_b`` (in units of Phi0).  In the symmetric/antisymmetric
phase coordinates phi_plus = (phi1 + phi2)/2 and phi_minus = (phi1 - phi2)/2
the circuit Hamiltonian is

    H = (E_C/2) (n_plus^2 + n_minus^2) + U(phi_plus, phi_minus)

with the potential assembled in :func:`potential_energy`.  The low-frequency
(symmetric, "qubit") mode carries the electric dipole, the high-frequency
(antisymmetric, "ancilla") mode carries the magnetic dipole, and the junction
nonlinearity couples them diagonally (sigma_z sigma_z), which is what this
package is built to quantify.

All energies returned by this module are frequencies in GHz (E/h).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import E_CHARGE, GHZ, PHI0, PHI0_BAR, PLANCK_H

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CircuitParams:
    """Physical description of the device.

    ic: critical current of each small junction (A)
    c: shunt capacitance of each junction (F)
    l: loop inductance (H)
    d: junction asymmetry, E_J1 = E_J (1 + d), E_J2 = E_J (1 - d)
    phi_b: flux bias through the loop, in units of Phi0
    """

    ic: float
    c: float
    l: float
    d: float = 0.0
    phi_b: float = 0.0

    def __post_init__(self):
        if not self.ic > 0:
            raise ValueError(f"critical current must be positive, got {self.ic}")
        if not self.c > 0:
            raise ValueError(f"capacitance must be positive, got {self.c}")
        if not self.l > 0:
            raise ValueError(f"inductance must be positive, got {self.l}")
        if not abs(self.d) < 1:
            raise ValueError(f"junction asymmetry must satisfy |d| < 1, got {self.d}")
        if not math.isfinite(self.phi_b):
            raise ValueError("flux bias must be finite")

    def replace(self, **kwargs) -> "CircuitParams":
        fields = {"ic": self.ic, "c": self.c, "l": self.l, "d": self.d, "phi_b": self.phi_b}
        fields.update(kwargs)
        return CircuitParams(**fields)


@dataclass(frozen=True)
class EnergyScales:
    """Derived energy scales in GHz, plus the Josephson inductance in henry."""

    e_j: float
    e_c: float
    e_l: float
    l_j: float

    def __post_init__(self):
        for name in ("e_j", "e_c", "e_l", "l_j"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def derived_energies(p: CircuitParams) -> EnergyScales:
    """Josephson, charging and inductive energies of the circuit.

    E_J = Phi0 ic / (2 pi), E_C = (2e)^2 / (2 c), E_L = (Phi0/2pi)^2 / l,
    each converted to GHz; L_J = Phi0 / (2 pi ic) in henry.
    """
    e_j = PHI0 * p.ic / (TWO_PI * PLANCK_H) / GHZ
    e_c = (2.0 * E_CHARGE) ** 2 / (2.0 * p.c * PLANCK_H) / GHZ
    e_l = PHI0_BAR**2 / (p.l * PLANCK_H) / GHZ
    l_j = PHI0 / (TWO_PI * p.ic)
    return EnergyScales(e_j=e_j, e_c=e_c, e_l=e_l, l_j=l_j)


def chain_inductance(ic_chain: float, n: int = 12) -> float:
    """Inductance of a series chain of n large junctions, L = n Phi0/(2 pi ic')."""
    if not ic_chain > 0:
        raise ValueError(f"chain critical current must be positive, got {ic_chain}")
    if n < 1:
        raise ValueError(f"chain length must be at least 1, got {n}")
    return n * PHI0 / (TWO_PI * ic_chain)


def reference_params(phi_b: float = 0.0, d: float = 0.0) -> CircuitParams:
    """Device parameters extracted from the measured spectroscopy.

    ic = 8.19 nA, c = 39.7 fF, l = 0.192 L_J.
    """
    ic = 8.19e-9
    l_j = PHI0 / (TWO_PI * ic)
    return CircuitParams(ic=ic, c=39.7e-15, l=0.192 * l_j, d=d, phi_b=phi_b)


def potential_energy(p: CircuitParams, phi_plus, phi_minus):
    """Potential U/h in GHz at (phi_plus, phi_minus); accepts arrays.

    U = -2 E_J cos(phi_plus) cos(phi_minus)
        + 2 E_J d sin(phi_plus) sin(phi_minus)
        + (E_L/2) (2 phi_minus - 2 pi phi_b)^2
    """
    s = derived_energies(p)
    phi_plus = np.asarray(phi_plus, dtype=float)
    phi_minus = np.asarray(phi_minus, dtype=float)
    if not (np.all(np.isfinite(phi_plus)) and np.all(np.isfinite(phi_minus))):
        raise ValueError("phase arguments must be finite")
    u = -2.0 * s.e_j * np.cos(phi_plus) * np.cos(phi_minus)
    u += 2.0 * s.e_j * p.d * np.sin(phi_plus) * np.sin(phi_minus)
    u += 0.5 * s.e_l * (2.0 * phi_minus - TWO_PI * p.phi_b) ** 2
    return u if u.ndim else float(u)


def harmonic_mode_frequencies(p: CircuitParams) -> tuple[float, float]:
    """Sweet-spot harmonic frequencies (f_qb, f_a) in GHz.

    f_qb = sqrt(2 E_J E_C) and f_a = f_qb sqrt(1 + 2 L_J / L).  Valid only
    at phi_b = 0; off the sweet spot use the grid solver instead.  The
    junction asymmetry does not enter at harmonic order.
    """
    if p.phi_b != 0.0:
        raise ValueError(
            "harmonic formulas are quoted at the sweet spot phi_b = 0; "
            "use the grid solver for a flux-biased circuit"
        )
    s = derived_energies(p)
    f_qb = math.sqrt(2.0 * s.e_j * s.e_c)
    f_a = f_qb * math.sqrt(1.0 + 2.0 * s.l_j / p.l)
    return f_qb, f_a


def gzz_perturbative(p: CircuitParams) -> float:
    """Perturbative diagonal coupling g = g_zz/2pi in GHz at phi_b = 0.

    h g = E_C / (8 sqrt(1 + 2 L_J / L)).  The conditional-line splitting
    observed in spectroscopy is 2 g = g_zz/pi.
    """
    if p.phi_b != 0.0:
        raise ValueError("perturbative coupling is derived at the sweet spot phi_b = 0")
    s = derived_energies(p)
    return s.e_c / (8.0 * math.sqrt(1.0 + 2.0 * s.l_j / p.l))


# Ordered two-mode basis used by the reduced model and the dynamics module:
# index 0 = both modes ground, 1 = qubit excited, 2 = ancilla excited, 3 = both.
REDUCED_BASIS = ("gg", "eg", "ge", "ee")


@dataclass(frozen=True)
class ReducedModel:
    """Four-level diagonal model: two modes with a sigma_z sigma_z coupling.

    f_qb, f_a are the bare mode frequencies and g = g_zz/2pi the diagonal
    coupling, all in GHz.
    """

    f_qb: float
    f_a: float
    g: float

    def __post_init__(self):
        if not self.f_qb > 0:
            raise ValueError("qubit frequency must be positive")
        if not self.f_a > self.f_qb:
            raise ValueError("ancilla frequency must exceed the qubit frequency")
        if not self.g > 0:
            raise ValueError("diagonal coupling must be positive")

    @property
    def qubit_line(self) -> float:
        """gg -> eg transition frequency."""
        return self.f_qb + self.g

    @property
    def ancilla_line(self) -> float:
        """gg -> ge transition frequency."""
        return self.f_a + self.g

    @property
    def conditional_qubit_line(self) -> float:
        """ge -> ee transition frequency (qubit line with the ancilla excited)."""
        return self.f_qb - self.g


def reduced_hamiltonian(m: ReducedModel) -> np.ndarray:
    """Diagonal 4x4 energy matrix (GHz) over the basis gg, eg, ge, ee.

    E(s_q, s_a) = (f_qb s_q + f_a s_a - g s_q s_a) / 2 with s = -1 for g and
    +1 for e, i.e. the two-mode sigma_z Hamiltonian with a -g sigma_z sigma_z/2
    coupling term.  The trace vanishes by construction.
    """
    signs = [(-1, -1), (+1, -1), (-1, +1), (+1, +1)]
    diag = [0.5 * (m.f_qb * sq + m.f_a * sa - m.g * sq * sa) for sq, sa in signs]
    return np.diag(diag)


def reduced_from_lines(f_qubit_line: float, f_ancilla_line: float, g: float) -> ReducedModel:
    """Build the reduced model from measured/computed transition lines.

    With f_qb = f_qubit_line - g and f_a = f_ancilla_line - g the diagonal
    model reproduces all four one-excitation transitions of the full circuit:
    gg->eg, gg->ge, ge->ee (= qubit line - 2g) and eg->ee (= ancilla line - 2g).
    """
    return ReducedModel(f_qb=f_qubit_line - g, f_a=f_ancilla_line - g, g=g)
