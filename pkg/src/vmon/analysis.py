"""Labeling of eigenlevels, transition tables, selection rules and flux sweeps.

Levels of the two-mode circuit are labeled |i,j> with i qubit (symmetric mode)
and j ancilla (antisymmetric mode) excitation quanta.  At d = 0 the circuit is
symmetric under phi_plus reflection, so i mod 2 is read off the parity
<v|P|v>; the full (i, j) assignment comes from maximal overlap with a
separable product basis built from the two 1D problems along the grid axes,
which stays unambiguous even where high qubit-ladder states interleave with
ancilla excitations.  Away from the symmetric point (d != 0) or along a flux
sweep, labels are carried by maximal-overlap continuation from a previously
classified table.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .circuit import CircuitParams
from .eigensolver import Spectrum, lowest_eigenpairs, refined_spectrum
from .grid import (
    GridSpec,
    SparseOperator,
    _axis_plus,
    _full_potential,
    _kinetic_1d,
    _quadratic_potential,
    assemble_hamiltonian,
    minimum_location,
    parity_expectation,
    reflection_permutation,
    sweep_grid,
)

PARITY_THRESHOLD = 0.999
TRACKING_THRESHOLD = 0.8

_NAMES = {0: "g", 1: "e"}


def label_str(label: tuple[int, int]) -> str:
    """(1, 0) -> 'eg', (3, 1) -> 'q3a1'."""
    i, j = label
    if i in _NAMES and j in _NAMES:
        return _NAMES[i] + _NAMES[j]
    return f"q{i}a{j}"


def parse_label(text) -> tuple[int, int]:
    if isinstance(text, tuple):
        return text
    rev = {"g": 0, "e": 1}
    if len(text) == 2 and text[0] in rev and text[1] in rev:
        return rev[text[0]], rev[text[1]]
    raise ValueError(f"cannot parse level label {text!r}")


class ClassificationError(RuntimeError):
    """Levels could not be labeled; carries the parity expectations seen."""

    def __init__(self, message, parities=None):
        super().__init__(message)
        self.parities = parities


@dataclass(frozen=True)
class Level:
    index: int
    energy: float               # GHz, absolute
    excitation: float           # GHz, relative to the ground level
    label: tuple[int, int]      # (qubit quanta, ancilla quanta)
    parity: float               # <v|P_plus|v>
    overlap: float              # classification/tracking overlap diagnostic
    provenance: str             # "parity" or "overlap"
    flagged: bool = False

    @property
    def name(self) -> str:
        return label_str(self.label)


@dataclass
class LevelTable:
    levels: list[Level]
    spectrum: Spectrum
    params: CircuitParams

    def __iter__(self):
        return iter(self.levels)

    def __len__(self):
        return len(self.levels)

    def get(self, label) -> Level | None:
        want = parse_label(label)
        for lev in self.levels:
            if lev.label == want:
                return lev
        return None

    def energy(self, label) -> float:
        lev = self.get(label)
        if lev is None:
            raise ValueError(f"level {label_str(parse_label(label))!r} not in table")
        return lev.energy

    def vector(self, label) -> np.ndarray:
        lev = self.get(label)
        if lev is None:
            raise ValueError(f"level {label_str(parse_label(label))!r} not in table")
        return self.spectrum.eigenvectors[:, lev.index]

    @property
    def any_flagged(self) -> bool:
        return any(lev.flagged for lev in self.levels)


@dataclass(frozen=True)
class TransitionSet:
    """Zero-excitation-referenced transition lines, all GHz.

    chi = (E_ee - E_ge - E_eg + E_gg)/h is the cross-anharmonicity; for this
    circuit chi = -2 g with g > 0.  alpha is the qubit self-anharmonicity.
    """

    f_qubit_line: float
    f_ancilla_line: float
    f_qubit_12: float
    chi: float
    alpha: float
    flagged: bool = False

    @classmethod
    def nan(cls) -> "TransitionSet":
        return cls(math.nan, math.nan, math.nan, math.nan, math.nan, flagged=True)


def _solve_1d(h1: sp.csr_matrix, k: int, seed: int = 0):
    n = h1.shape[0]
    k = min(k, n - 2)
    diag = h1.diagonal()
    radii = np.asarray(np.abs(h1).sum(axis=1)).ravel() - np.abs(diag)
    sigma = float((diag - radii).min()) - 1.0
    v0 = np.random.default_rng(seed).standard_normal(n)
    vals, vecs = spla.eigsh(h1, k=k, sigma=sigma, which="LM", v0=v0)
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def _product_reference(p: CircuitParams, grid: GridSpec, mode: str, kx: int, ky: int):
    """1D eigenbases along the two axes, for separable product labels."""
    from .circuit import derived_energies

    s = derived_energies(p)
    x, h_plus, periodic = _axis_plus(p, grid, mode)
    y = grid.phi_minus()
    m = minimum_location(p, grid)
    pot = _full_potential if mode == "full" else _quadratic_potential
    ux = pot(p, x, np.array([m]))[:, 0]
    uy = pot(p, np.array([0.0]), y)[0, :]
    hx = _kinetic_1d(grid.n_plus, h_plus, s.e_c, periodic=periodic) + sp.diags(ux)
    hy = _kinetic_1d(grid.n_minus, grid.h_minus, s.e_c, periodic=False) + sp.diags(uy)
    _, vx = _solve_1d(hx.tocsr(), kx)
    _, vy = _solve_1d(hy.tocsr(), ky)
    return vx, vy


def _greedy_assign(overlap: np.ndarray):
    """Assign each row (2D level) a column (candidate label), best overlap first."""
    n_rows, n_cols = overlap.shape
    order = np.dstack(np.unravel_index(np.argsort(overlap, axis=None)[::-1], overlap.shape))[0]
    row_of, col_used = {}, set()
    for r, c in order:
        if r not in row_of and c not in col_used:
            row_of[int(r)] = int(c)
            col_used.add(int(c))
            if len(row_of) == n_rows:
                break
    return row_of


def classify_levels(
    spectrum: Spectrum,
    p: CircuitParams,
    reference: LevelTable | None = None,
    parity_threshold: float = PARITY_THRESHOLD,
    tracking_threshold: float = TRACKING_THRESHOLD,
) -> LevelTable:
    """Label the levels of ``spectrum`` as |i,j> states.

    Without a reference table the circuit must be classifiable on symmetry
    grounds: parity fixes i mod 2 and the separable product basis fixes the
    rest (for d != 0 a d = 0 twin is solved on the same grid and used as the
    reference).  With a reference table, labels are carried over by maximal
    overlap; overlaps below ``tracking_threshold`` flag the level rather
    than silently relabel it.
    """
    if spectrum.k < 6:
        raise ValueError(f"classification needs at least 6 levels, got {spectrum.k}")
    mode = spectrum.metadata.get("mode", "full")
    periodic = mode == "full"
    perm = reflection_permutation(spectrum.grid, periodic_plus=periodic)
    vecs = spectrum.eigenvectors
    parities = np.array([parity_expectation(vecs[:, i], perm) for i in range(spectrum.k)])

    if reference is not None:
        return _classify_by_reference(spectrum, p, reference, parities, tracking_threshold)

    if p.d != 0.0:
        twin = p.replace(d=0.0)
        twin_spec = lowest_eigenpairs(
            assemble_hamiltonian(twin, spectrum.grid, mode),
            spectrum.k,
            seed=spectrum.metadata.get("seed", 0),
        )
        twin_spec.metadata["mode"] = mode
        base = classify_levels(twin_spec, twin, parity_threshold=parity_threshold)
        return _classify_by_reference(spectrum, p, base, parities, tracking_threshold)

    kx = min(spectrum.k + 2, 16)
    ky = min(max(4, spectrum.k // 2 + 2), 12)
    vx, vy = _product_reference(p, spectrum.grid, mode, kx, ky)
    n_minus = spectrum.grid.n_minus
    candidates = [(n, m) for n in range(vx.shape[1]) for m in range(vy.shape[1])]
    overlap = np.empty((spectrum.k, len(candidates)))
    for ci, (n, m) in enumerate(candidates):
        prod = np.outer(vx[:, n], vy[:, m]).ravel()
        overlap[:, ci] = np.abs(prod @ vecs)
    assignment = _greedy_assign(overlap)

    if np.any(np.abs(parities) < parity_threshold):
        raise ClassificationError(
            "parity is ambiguous and no reference table was given; "
            f"parity expectations: {np.round(parities, 4).tolist()}",
            parities=parities,
        )

    levels = []
    e0 = spectrum.eigenvalues[0]
    for i in range(spectrum.k):
        ci = assignment[i]
        n, m = candidates[ci]
        ov = float(overlap[i, ci])
        if math.copysign(1.0, parities[i]) != (-1.0) ** n:
            raise ClassificationError(
                f"level {i} at {spectrum.eigenvalues[i]:.4f} GHz: parity "
                f"{parities[i]:+.4f} contradicts product label {label_str((n, m))}",
                parities=parities,
            )
        levels.append(
            Level(
                index=i,
                energy=float(spectrum.eigenvalues[i]),
                excitation=float(spectrum.eigenvalues[i] - e0),
                label=(n, m),
                parity=float(parities[i]),
                overlap=ov,
                provenance="parity",
                flagged=ov < tracking_threshold,
            )
        )
    return LevelTable(levels=levels, spectrum=spectrum, params=p)


def _classify_by_reference(spectrum, p, reference, parities, tracking_threshold):
    if reference.spectrum.eigenvectors.shape[0] != spectrum.eigenvectors.shape[0]:
        raise ValueError("reference table lives on a different grid")
    ref_vecs = reference.spectrum.eigenvectors
    ov = np.abs(spectrum.eigenvectors.T @ ref_vecs)  # (new, ref)
    assignment = _greedy_assign(ov)
    labels_by_ref = {lev.index: lev.label for lev in reference.levels}
    e0 = spectrum.eigenvalues[0]
    levels = []
    for i in range(spectrum.k):
        ri = assignment.get(i)
        if ri is None or ri not in labels_by_ref:
            raise ClassificationError(
                f"level {i} could not be matched to the reference table", parities=parities
            )
        best = float(ov[i, ri])
        levels.append(
            Level(
                index=i,
                energy=float(spectrum.eigenvalues[i]),
                excitation=float(spectrum.eigenvalues[i] - e0),
                label=labels_by_ref[ri],
                parity=float(parities[i]),
                overlap=best,
                provenance="overlap",
                flagged=best < tracking_threshold,
            )
        )
    return LevelTable(levels=levels, spectrum=spectrum, params=p)


def transition_table(table: LevelTable) -> TransitionSet:
    """Transition lines from the labeled gg, eg, ge, ee and qubit-2 energies."""
    needed = {"gg": (0, 0), "eg": (1, 0), "ge": (0, 1), "ee": (1, 1), "qubit-2": (2, 0)}
    energies = {}
    flagged = False
    for name, lab in needed.items():
        lev = table.get(lab)
        if lev is None:
            raise ValueError(f"transition table needs level {name} ({label_str(lab)})")
        energies[name] = lev.energy
        flagged = flagged or lev.flagged
    f_qubit = energies["eg"] - energies["gg"]
    f_ancilla = energies["ge"] - energies["gg"]
    f_12 = energies["qubit-2"] - energies["eg"]
    chi = energies["ee"] - energies["ge"] - energies["eg"] + energies["gg"]
    return TransitionSet(
        f_qubit_line=f_qubit,
        f_ancilla_line=f_ancilla,
        f_qubit_12=f_12,
        chi=chi,
        alpha=f_12 - f_qubit,
        flagged=flagged,
    )


@dataclass
class SweepPoint:
    flux: float
    transitions: TransitionSet
    tracking_overlap: float     # min overlap against the neighbouring point
    flags: list[str] = field(default_factory=list)


@dataclass
class SweepResult:
    points: list[SweepPoint]
    grid: GridSpec
    k: int

    @property
    def fluxes(self) -> np.ndarray:
        return np.array([pt.flux for pt in self.points])

    def line(self, which: str) -> np.ndarray:
        return np.array([getattr(pt.transitions, which) for pt in self.points])

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["flux", "f_qubit_line", "f_ancilla_line", "f_qubit_12", "chi", "flags"])
            for pt in self.points:
                t = pt.transitions
                w.writerow(
                    [
                        repr(pt.flux),
                        repr(t.f_qubit_line),
                        repr(t.f_ancilla_line),
                        repr(t.f_qubit_12),
                        repr(t.chi),
                        ";".join(pt.flags),
                    ]
                )


def _solve_flux_point(args):
    p_dict, flux, grid, k, seed, refine = args
    p = CircuitParams(**p_dict).replace(phi_b=flux)
    if refine:
        spec = refined_spectrum(p, k, grid=grid, seed=seed)
    else:
        spec = lowest_eigenpairs(assemble_hamiltonian(p, grid), k, seed=seed)
    spec.metadata["mode"] = "full"
    return spec


def flux_sweep(
    p: CircuitParams,
    fluxes,
    k: int = 12,
    grid: GridSpec | None = None,
    seed: int = 0,
    refine: bool = True,
    jobs: int = 1,
) -> SweepResult:
    """Labeled transition lines across a list of flux biases (Phi0 units).

    Every flux point is solved independently on one shared grid sized for the
    largest |flux|; labels are then carried outward from the point nearest
    zero flux by maximal-overlap continuation.  ``refine=True`` adds one grid
    doubling per point so the reported lines are Richardson-extrapolated.
    Tracking overlaps below 0.8 flag the affected point instead of relabeling.
    """
    fluxes = sorted(float(f) for f in fluxes)
    if not fluxes:
        raise ValueError("flux list is empty")
    if any(abs(f) > 1.0 for f in fluxes):
        raise ValueError("fluxes must lie within [-1, 1] Phi0")
    gaps = np.diff(fluxes)
    if len(gaps) and gaps.max() > 0.02 + 1e-12:
        raise ValueError("adjacent flux spacing must be <= 0.02 for reliable tracking")
    if grid is None:
        grid = sweep_grid(p, fluxes)

    p_dict = {"ic": p.ic, "c": p.c, "l": p.l, "d": p.d, "phi_b": p.phi_b}
    tasks = [(p_dict, f, grid, k, seed, refine) for f in fluxes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            specs = list(pool.map(_solve_flux_point, tasks))
    else:
        specs = [_solve_flux_point(t) for t in tasks]

    i0 = int(np.argmin(np.abs(fluxes)))
    tables: list[LevelTable | None] = [None] * len(fluxes)
    base_params = p.replace(phi_b=fluxes[i0])
    tables[i0] = classify_levels(specs[i0], base_params)
    for i in range(i0 + 1, len(fluxes)):
        tables[i] = classify_levels(
            specs[i], p.replace(phi_b=fluxes[i]), reference=tables[i - 1]
        )
    for i in range(i0 - 1, -1, -1):
        tables[i] = classify_levels(
            specs[i], p.replace(phi_b=fluxes[i]), reference=tables[i + 1]
        )

    points = []
    for flux, table in zip(fluxes, tables):
        flags = []
        min_overlap = min(lev.overlap for lev in table.levels)
        if table.any_flagged:
            flags.append("tracking")
        try:
            trans = transition_table(table)
        except ValueError:
            trans = TransitionSet.nan()
            flags.append("missing-levels")
        if trans.flagged and "tracking" not in flags:
            flags.append("tracking")
        points.append(
            SweepPoint(flux=flux, transitions=trans, tracking_overlap=min_overlap, flags=flags)
        )
    return SweepResult(points=points, grid=grid, k=k)


@dataclass
class SelectionRules:
    """|<a|O|b>| for the electric (charge) and magnetic (loop current) dipoles
    between the labeled gg, eg, ge levels."""

    charge: dict
    current: dict
    level_names: tuple = ("gg", "eg", "ge")

    def rows(self):
        out = []
        for a in self.level_names:
            for b in self.level_names:
                out.append(
                    {
                        "bra": a,
                        "ket": b,
                        "charge_plus": self.charge[(a, b)],
                        "loop_current_na": self.current[(a, b)],
                    }
                )
        return out


def selection_rules(
    table: LevelTable, charge_op: SparseOperator, loop_op: SparseOperator
) -> SelectionRules:
    """Dipole matrix-element table over the V-shape levels gg, eg, ge.

    The symmetric-mode charge only connects states differing by one qubit
    quantum (electric dipole), the loop current only by one ancilla quantum
    (magnetic dipole); cross elements vanish by parity at phi_b = 0, d = 0.
    """
    names = ("gg", "eg", "ge")
    vecs = {name: table.vector(name) for name in names}
    charge, current = {}, {}
    for a in names:
        qa = charge_op.matrix @ vecs[a]
        ia = loop_op.matrix @ vecs[a]
        for b in names:
            charge[(b, a)] = float(abs(np.dot(vecs[b], qa)))
            current[(b, a)] = float(abs(np.dot(vecs[b], ia)))
    return SelectionRules(charge=charge, current=current)
