"""Finite-difference discretization of the two-mode circuit Hamiltonian.

The symmetric phase phi_plus lives on a 2 pi-periodic ring (the offset charge
is negligible in the transmon regime), the antisymmetric phase phi_minus is an
extended coordinate confined by the inductive term and is truncated to a box
[-lambda, lambda] with hard walls.  Kinetic terms use central second
differences (5-point stencil), so assembled operators are real and have at
most five off-diagonal entries per row.

Two assembly modes exist.  "full" is the physical model.  "quadratic" replaces
the cosine terms by their second-order expansion about (0, phi_minus_min) and
serves as the analytic 2D-oscillator oracle for the solver; in that mode the
phi_plus axis is widened to a hard-wall box as well, because a quadratic well
on a ring is *not* the textbook oscillator (the periodic wrap shifts the
fourth excited ladder state by a few MHz, which would poison the oracle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .circuit import TWO_PI, CircuitParams, derived_energies
from .constants import PHI0_BAR

SYMMETRY_TOL = 1e-12


class GridConfigurationError(ValueError):
    """Grid cannot represent the requested problem; carries a suggested fix."""

    def __init__(self, message, suggested_lambda=None):
        super().__init__(message)
        self.suggested_lambda = suggested_lambda


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid: n_plus points along phi_plus (periodic over
    [-pi, pi) in full mode), n_minus points spanning
    [-lambda_minus, lambda_minus] inclusive (Dirichlet walls one step outside
    the end points)."""

    n_plus: int
    n_minus: int
    lambda_minus: float

    def __post_init__(self):
        if self.n_plus < 8 or self.n_plus % 2:
            raise ValueError(f"n_plus must be even and at least 8, got {self.n_plus}")
        if self.n_minus < 8:
            raise ValueError(f"n_minus must be at least 8, got {self.n_minus}")
        if not self.lambda_minus > 0:
            raise ValueError("lambda_minus must be positive")

    @property
    def h_plus(self) -> float:
        return TWO_PI / self.n_plus

    @property
    def h_minus(self) -> float:
        return 2.0 * self.lambda_minus / (self.n_minus - 1)

    @property
    def dimension(self) -> int:
        return self.n_plus * self.n_minus

    def phi_plus(self) -> np.ndarray:
        return -math.pi + self.h_plus * np.arange(self.n_plus)

    def phi_minus(self) -> np.ndarray:
        return -self.lambda_minus + self.h_minus * np.arange(self.n_minus)

    def doubled(self) -> "GridSpec":
        """Grid with the mesh spacings halved (for convergence runs)."""
        return GridSpec(2 * self.n_plus, 2 * self.n_minus - 1, self.lambda_minus)

    def as_dict(self) -> dict:
        return {
            "n_plus": self.n_plus,
            "n_minus": self.n_minus,
            "lambda_minus": self.lambda_minus,
        }


def default_grid(p: CircuitParams, n_plus: int = 64, n_minus: int = 256) -> GridSpec:
    """Default grid for the circuit parameters.

    The box half-width is max(1.5, 8 (2 E_C / (2 E_J + 4 E_L))^(1/4)), which
    keeps the wall amplitude negligible at zero flux; at finite flux the well
    displaces toward pi*phi_b, so the box grows by that much (with n_minus
    scaled up to preserve the mesh spacing).
    """
    s = derived_energies(p)
    base = max(1.5, 8.0 * (2.0 * s.e_c / (2.0 * s.e_j + 4.0 * s.e_l)) ** 0.25)
    lam = base + math.pi * abs(p.phi_b)
    if p.phi_b != 0.0:
        n_minus = int(math.ceil(n_minus * lam / base / 32.0)) * 32
    return GridSpec(n_plus=n_plus, n_minus=n_minus, lambda_minus=lam)


def sweep_grid(p: CircuitParams, fluxes, n_plus: int = 64, n_minus: int = 256) -> GridSpec:
    """One grid able to hold the well at every flux in the sweep."""
    worst = max(abs(f) for f in fluxes)
    return default_grid(p.replace(phi_b=worst), n_plus=n_plus, n_minus=n_minus)


@dataclass(frozen=True)
class SparseOperator:
    """Real sparse operator on the grid, in CSR layout, values in the unit
    stated by ``kind`` (GHz for the Hamiltonian, nA for the loop current,
    Cooper-pair number for the symmetric charge).  ``periodic_plus`` records
    the boundary treatment of the phi_plus axis (ring in full mode, box in
    quadratic-oracle mode)."""

    matrix: sp.csr_matrix = field(repr=False)
    grid: GridSpec
    kind: str
    symmetry: str  # "symmetric" or "antisymmetric"
    periodic_plus: bool = True

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def row_offsets(self) -> np.ndarray:
        return self.matrix.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self.matrix.indices

    @property
    def values(self) -> np.ndarray:
        return self.matrix.data

    def symmetry_defect(self) -> float:
        """max |A -+ A^T| entry, sign per the declared symmetry."""
        sign = 1.0 if self.symmetry == "symmetric" else -1.0
        delta = self.matrix - sign * self.matrix.T
        return 0.0 if delta.nnz == 0 else float(np.abs(delta.data).max())

    def check(self):
        scale = float(np.abs(self.matrix.data).max()) if self.matrix.nnz else 0.0
        if scale and self.symmetry_defect() > SYMMETRY_TOL * scale:
            raise ValueError(f"operator is not numerically {self.symmetry}")
        return self


def _kinetic_1d(n: int, step: float, e_c: float, periodic: bool) -> sp.csr_matrix:
    """-(E_C/2) d^2/dphi^2 by central differences on n points."""
    t = 0.5 * e_c / step**2
    off = -t * np.ones(n - 1)
    k = sp.diags([2.0 * t * np.ones(n), off, off], [0, 1, -1], format="lil")
    if periodic:
        k[0, n - 1] += -t
        k[n - 1, 0] += -t
    return k.tocsr()


def minimum_location(p: CircuitParams, grid: GridSpec) -> float:
    """phi_minus position of the potential minimum along the phi_plus = 0 cut."""
    s = derived_energies(p)
    y = grid.phi_minus()
    u_slice = -2.0 * s.e_j * np.cos(y) + 0.5 * s.e_l * (2.0 * y - TWO_PI * p.phi_b) ** 2
    j0 = int(np.argmin(u_slice))

    def du(yv):
        return 2.0 * s.e_j * math.sin(yv) + 2.0 * s.e_l * (2.0 * yv - TWO_PI * p.phi_b)

    lo = y[max(j0 - 1, 0)]
    hi = y[min(j0 + 1, grid.n_minus - 1)]
    if du(lo) * du(hi) < 0:
        from scipy.optimize import brentq

        return float(brentq(du, lo, hi, xtol=1e-12))
    return float(y[j0])


def quadratic_box_plus(p: CircuitParams, grid: GridSpec) -> float:
    """Half-width of the phi_plus box used by the quadratic-oracle mode."""
    s = derived_energies(p)
    m = minimum_location(p, grid)
    curv = s.e_j * math.cos(m)
    if curv <= 0:
        raise GridConfigurationError(
            "quadratic mode undefined: non-positive phi_plus curvature at the minimum"
        )
    sigma = (s.e_c / (8.0 * curv)) ** 0.25
    return max(math.pi, 9.0 * sigma)


def _axis_plus(p: CircuitParams, grid: GridSpec, mode: str) -> tuple[np.ndarray, float, bool]:
    """phi_plus sample points, spacing and periodicity for the given mode.

    The quadratic-mode box is cell-centered (no points on the walls) so that
    doubling n_plus halves the spacing exactly; the half-step wobble of the
    effective wall position is irrelevant at 9 sigma from the well.
    """
    if mode == "full":
        return grid.phi_plus(), grid.h_plus, True
    lam = quadratic_box_plus(p, grid)
    h = 2.0 * lam / grid.n_plus
    return -lam + h * (np.arange(grid.n_plus) + 0.5), h, False


def _quadratic_potential(p: CircuitParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second-order Taylor expansion of the cosine terms about
    (0, phi_minus_min); the inductive term is kept exactly."""
    s = derived_energies(p)
    u_slice = -2.0 * s.e_j * np.cos(y) + 0.5 * s.e_l * (2.0 * y - TWO_PI * p.phi_b) ** 2
    # the polished minimum is recomputed here from the y samples
    j0 = int(np.argmin(u_slice))

    def du(yv):
        return 2.0 * s.e_j * math.sin(yv) + 2.0 * s.e_l * (2.0 * yv - TWO_PI * p.phi_b)

    lo, hi = y[max(j0 - 1, 0)], y[min(j0 + 1, len(y) - 1)]
    if du(lo) * du(hi) < 0:
        from scipy.optimize import brentq

        m = float(brentq(du, lo, hi, xtol=1e-12))
    else:
        m = float(y[j0])

    cm, sm = math.cos(m), math.sin(m)
    xx, yy = np.meshgrid(x, y - m, indexing="ij")
    return (
        -2.0 * s.e_j * cm
        + 2.0 * s.e_j * p.d * sm * xx
        + 2.0 * s.e_j * sm * yy
        + s.e_j * cm * (xx**2 + yy**2)
        + 2.0 * s.e_j * p.d * cm * xx * yy
        + 0.5 * s.e_l * (2.0 * (yy + m) - TWO_PI * p.phi_b) ** 2
    )


def _full_potential(p: CircuitParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    s = derived_energies(p)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    u = -2.0 * s.e_j * np.cos(xx) * np.cos(yy)
    u += 2.0 * s.e_j * p.d * np.sin(xx) * np.sin(yy)
    u += 0.5 * s.e_l * (2.0 * yy - TWO_PI * p.phi_b) ** 2
    return u


def _check_containment(p: CircuitParams, u: np.ndarray):
    """phi_minus walls must sit at least 20 f_a above the potential minimum."""
    s = derived_energies(p)
    f_a = math.sqrt(2.0 * s.e_j * s.e_c) * math.sqrt(1.0 + 2.0 * s.l_j / p.l)
    u_min = float(u.min())
    wall = float(min(u[:, 0].min(), u[:, -1].min()))
    need = 20.0 * f_a
    if wall - u_min < need:
        # invert (e_l/2)(2 lam - 2 pi |phi_b|)^2 - 2 e_j >= need + u_min
        rhs = max(need + u_min + 2.0 * s.e_j, 0.0)
        lam = math.pi * abs(p.phi_b) + 0.5 * math.sqrt(2.0 * rhs / s.e_l)
        raise GridConfigurationError(
            f"phi_minus box too small: wall sits {wall - u_min:.2f} GHz above the "
            f"minimum but {need:.2f} GHz is required; use lambda_minus >= {lam:.3f}",
            suggested_lambda=lam,
        )


def assemble_hamiltonian(
    p: CircuitParams, grid: GridSpec | None = None, mode: str = "full"
) -> SparseOperator:
    """Sparse grid Hamiltonian (GHz) for the circuit.

    mode="full" uses the exact potential on the periodic-ring x extended-box
    domain; mode="quadratic" is the harmonic oracle described in the module
    docstring.
    """
    if grid is None:
        grid = default_grid(p)
    if mode not in ("full", "quadratic"):
        raise ValueError(f"unknown assembly mode {mode!r}")
    s = derived_energies(p)
    x, h_plus, periodic = _axis_plus(p, grid, mode)
    y = grid.phi_minus()
    u = _full_potential(p, x, y) if mode == "full" else _quadratic_potential(p, x, y)
    _check_containment(p, u)

    kp = _kinetic_1d(grid.n_plus, h_plus, s.e_c, periodic=periodic)
    km = _kinetic_1d(grid.n_minus, grid.h_minus, s.e_c, periodic=False)
    h = (
        sp.kron(kp, sp.identity(grid.n_minus, format="csr"), format="csr")
        + sp.kron(sp.identity(grid.n_plus, format="csr"), km, format="csr")
        + sp.diags(u.ravel())
    )
    return SparseOperator(
        h.tocsr(), grid, kind="hamiltonian", symmetry="symmetric", periodic_plus=periodic
    ).check()


def observable(kind: str, p: CircuitParams, grid: GridSpec) -> SparseOperator:
    """Dipole observables on the (full-mode) grid.

    "loop_current": diagonal persistent-current operator
    (Phi0/2pi)(2 phi_minus - 2 pi phi_b)/L in nA — the magnetic dipole,
    carried by the ancilla mode.

    "charge_plus": the symmetric-mode charge n_plus = -i d/dphi_plus — the
    electric dipole, carried by the qubit mode.  Stored as the real
    antisymmetric central-difference generator d/dphi_plus; matrix elements
    of n_plus are obtained as their absolute value.
    """
    if kind == "loop_current":
        y = grid.phi_minus()
        amps = PHI0_BAR * (2.0 * y - TWO_PI * p.phi_b) / p.l  # amperes
        vals = np.tile(amps * 1e9, (grid.n_plus, 1)).ravel()
        op = sp.diags(vals).tocsr()
        return SparseOperator(op, grid, kind=kind, symmetry="symmetric").check()
    if kind == "charge_plus":
        n = grid.n_plus
        t = 1.0 / (2.0 * grid.h_plus)
        d1 = sp.diags([t * np.ones(n - 1), -t * np.ones(n - 1)], [1, -1], format="lil")
        d1[0, n - 1] = -t
        d1[n - 1, 0] = t
        op = sp.kron(d1.tocsr(), sp.identity(grid.n_minus, format="csr"), format="csr")
        return SparseOperator(op, grid, kind=kind, symmetry="antisymmetric").check()
    raise ValueError(f"unknown observable {kind!r}")


def reflection_permutation(grid: GridSpec, periodic_plus: bool = True) -> np.ndarray:
    """Index permutation implementing phi_plus -> -phi_plus on grid vectors."""
    i = np.arange(grid.n_plus)
    pi = (grid.n_plus - i) % grid.n_plus if periodic_plus else grid.n_plus - 1 - i
    return (pi[:, None] * grid.n_minus + np.arange(grid.n_minus)[None, :]).ravel()


def parity_expectation(vec: np.ndarray, perm: np.ndarray) -> float:
    """<v|P|v> for the phi_plus reflection permutation P (unit-norm v)."""
    return float(np.dot(vec, vec[perm]))


def dump_operator(op: SparseOperator, path):
    """Text dump, one 'row col value' line per nonzero, for cross-checks."""
    m = op.matrix.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# kind={op.kind} dimension={op.dimension} "
            f"n_plus={op.grid.n_plus} n_minus={op.grid.n_minus} "
            f"lambda_minus={op.grid.lambda_minus!r}\n"
        )
        for r, c, v in zip(m.row, m.col, m.data):
            fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")
