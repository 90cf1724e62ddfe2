"""Pulsed dynamics of the reduced 4-level model with Lindblad dissipation.

The lab-frame master equation

    drho/dt = -i 2 pi [H0 + sum_p amp_p cos(2 pi f_p t) X_p, rho] + D(rho)

is integrated with fixed-step classical RK4 (no rotating-wave approximation);
H0 is the diagonal reduced-model Hamiltonian in GHz, times are in ns.
Collapse channels are mode lowering at 1/T1 and sigma_z dephasing at
1/(2 Tphi) per mode.  This reproduces the pulsed conditional-spectroscopy
experiment: a short conditioning pulse on the ancilla line followed by a
qubit spectroscopy pulse splits the qubit response into two dips separated by
twice the diagonal coupling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from ._kernels import rk4_span
from .circuit import REDUCED_BASIS, ReducedModel, reduced_hamiltonian

TWO_PI = 2.0 * math.pi

HERMITICITY_TOL = 1e-9
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-9

PULSE_TARGETS = ("qubit", "ancilla", "readout")


class IntegrationError(RuntimeError):
    """Density-matrix invariant violated during integration."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class DissipationParams:
    """Relaxation and pure-dephasing times per mode, in seconds (inf disables)."""

    t1_qubit: float = math.inf
    t1_ancilla: float = math.inf
    tphi_qubit: float = math.inf
    tphi_ancilla: float = math.inf

    def __post_init__(self):
        for name in ("t1_qubit", "t1_ancilla", "tphi_qubit", "tphi_ancilla"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive (or inf to disable)")

    @classmethod
    def off(cls) -> "DissipationParams":
        return cls()

    @classmethod
    def from_coherence(cls, t1: float = 0.6e-6, t2_rabi: float = 0.5e-6) -> "DissipationParams":
        """Dissipation reproducing a measured driven-Rabi decay time.

        The resonant Rabi envelope decays at Gamma_R = 3/(4 T1) + 1/(2 Tphi),
        so Tphi is chosen as 1/(2/T2_rabi - 3/(2 T1)).  The ancilla, for
        which no coherence data exists, inherits the qubit values.
        """
        gamma_phi = 2.0 / t2_rabi - 1.5 / t1
        if gamma_phi <= 0:
            raise ValueError("t2_rabi too long for the given t1 (needs t2 < 4 t1 / 3)")
        tphi = 1.0 / gamma_phi
        return cls(t1_qubit=t1, t1_ancilla=t1, tphi_qubit=tphi, tphi_ancilla=tphi)

    @property
    def enabled(self) -> bool:
        return any(
            math.isfinite(t)
            for t in (self.t1_qubit, self.t1_ancilla, self.tphi_qubit, self.tphi_ancilla)
        )


@dataclass(frozen=True)
class Pulse:
    """Rectangular drive pulse.

    amplitude is the Rabi rate Omega/2pi in GHz: a resonant pulse of duration
    1/(2 amplitude) is a pi pulse.  target "readout" is recorded for sequence
    fidelity but drives nothing (the resonator is not modeled; the measured
    signal is the qubit excited-state population).
    """

    target: str
    frequency: float  # GHz
    amplitude: float  # GHz
    start: float      # ns
    duration: float   # ns

    def __post_init__(self):
        if self.target not in PULSE_TARGETS:
            raise ValueError(f"unknown pulse target {self.target!r}")
        if not self.duration > 0:
            raise ValueError("pulse duration must be positive")
        if self.amplitude < 0:
            raise ValueError("pulse amplitude must be non-negative")
        if not self.frequency >= 0:
            raise ValueError("pulse frequency must be non-negative")

    @property
    def end(self) -> float:
        return self.start + self.duration


def validate_sequence(seq) -> list[Pulse]:
    pulses = sorted(seq, key=lambda p: p.start)
    for a, b in zip(pulses, pulses[1:]):
        if b.start < a.end - 1e-12:
            raise ValueError(
                f"pulses overlap: [{a.start}, {a.end}) and [{b.start}, {b.end}) ns"
            )
    return pulses


@dataclass(frozen=True)
class DensityMatrix:
    """4x4 mixed state over the reduced basis gg, eg, ge, ee."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("density matrix must be 4x4")
        object.__setattr__(self, "matrix", m)
        self.validate()

    def validate(self):
        m = self.matrix
        if np.abs(m - m.conj().T).max() > HERMITICITY_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > TRACE_TOL or abs(np.trace(m).imag) > TRACE_TOL:
            raise ValueError("density matrix trace must be 1")
        if np.linalg.eigvalsh(m).min() < -POSITIVITY_TOL:
            raise ValueError("density matrix must be positive semidefinite")
        return self

    @classmethod
    def pure(cls, label: str) -> "DensityMatrix":
        i = REDUCED_BASIS.index(label)
        m = np.zeros((4, 4), dtype=complex)
        m[i, i] = 1.0
        return cls(m)

    @classmethod
    def ground(cls) -> "DensityMatrix":
        return cls.pure("gg")

    def population(self, label: str) -> float:
        return float(self.matrix[REDUCED_BASIS.index(label), REDUCED_BASIS.index(label)].real)


# Mode operators on the 4-level space.  In the (gg, eg, ge, ee) ordering the
# qubit flips the fast index, so qubit operators sit on the right kron factor.
def _mode_ops():
    sm = np.array([[0.0, 1.0], [0.0, 0.0]])  # lowering
    sz = np.array([[-1.0, 0.0], [0.0, 1.0]])  # -1 on g, +1 on e
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    eye = np.eye(2)
    return {
        "lower_qubit": np.kron(eye, sm),
        "lower_ancilla": np.kron(sm, eye),
        "sz_qubit": np.kron(eye, sz),
        "sz_ancilla": np.kron(sz, eye),
        "x_qubit": np.kron(eye, sx),
        "x_ancilla": np.kron(sx, eye),
    }


_OPS = _mode_ops()


def _commutator_superop(a: np.ndarray) -> np.ndarray:
    """vec(row-major) superoperator of -i*2pi*[a, .] for a real matrix a."""
    eye = np.eye(4)
    return -1j * TWO_PI * (np.kron(a, eye) - np.kron(eye, a.T))


def _dissipator_superop(c: np.ndarray, rate: float) -> np.ndarray:
    """vec superoperator of rate*(c . c^T - {c^T c, .}/2) for real c."""
    eye = np.eye(4)
    cdc = c.T @ c
    return rate * (np.kron(c, c) - 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T)))


def _static_superop(m: ReducedModel, diss: DissipationParams) -> np.ndarray:
    l0 = _commutator_superop(reduced_hamiltonian(m))
    for t1, op in ((diss.t1_qubit, "lower_qubit"), (diss.t1_ancilla, "lower_ancilla")):
        if math.isfinite(t1):
            l0 = l0 + _dissipator_superop(_OPS[op], 1.0 / (t1 * 1e9))
    for tphi, op in ((diss.tphi_qubit, "sz_qubit"), (diss.tphi_ancilla, "sz_ancilla")):
        if math.isfinite(tphi):
            l0 = l0 + _dissipator_superop(_OPS[op], 0.5 / (tphi * 1e9))
    return np.ascontiguousarray(l0, dtype=np.complex128)


_DRIVE_SUPEROPS = {
    "qubit": np.ascontiguousarray(_commutator_superop(_OPS["x_qubit"])),
    "ancilla": np.ascontiguousarray(_commutator_superop(_OPS["x_ancilla"])),
}
_ZERO_DRIVE = np.zeros((16, 16), dtype=np.complex128)


def max_frequency(m: ReducedModel, seq) -> float:
    """Largest transition or carrier frequency (GHz) in the problem."""
    diag = np.diag(reduced_hamiltonian(m))
    f = max(abs(a - b) for a in diag for b in diag)
    for p in seq:
        if p.target != "readout":
            f = max(f, p.frequency)
    return float(f)


@dataclass
class Trajectory:
    times: np.ndarray           # ns
    rhos: np.ndarray            # (n, 4, 4) complex
    dt: float
    steps: int

    def populations(self) -> np.ndarray:
        return np.real(np.einsum("tii->ti", self.rhos))

    def excited_qubit(self) -> np.ndarray:
        """P(eg) + P(ee), the measured readout signal."""
        pops = self.populations()
        return pops[:, 1] + pops[:, 3]

    def final(self) -> DensityMatrix:
        return DensityMatrix(self.rhos[-1])

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise KeyError(f"time {t} ns was not sampled")
        return self.rhos[i]


def _check_state(v: np.ndarray, t: float):
    rho = v.reshape(4, 4)
    herm = np.abs(rho - rho.conj().T).max()
    if herm > HERMITICITY_TOL:
        raise IntegrationError(f"hermiticity drift {herm:.2e} at t={t:.3f} ns", time=t)
    tr = np.trace(rho)
    if abs(tr.real - 1.0) > TRACE_TOL or abs(tr.imag) > TRACE_TOL:
        raise IntegrationError(f"trace drift {tr} at t={t:.3f} ns", time=t)
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if w.min() < -POSITIVITY_TOL:
        raise IntegrationError(f"negative population {w.min():.2e} at t={t:.3f} ns", time=t)


def evolve(
    m: ReducedModel,
    diss: DissipationParams,
    seq,
    rho0: DensityMatrix,
    dt: float | None = None,
    t_end: float | None = None,
    sample_every: float = 1.0,
    extra_samples=(),
    check: bool = True,
) -> Trajectory:
    """Integrate the driven Lindblad equation over the pulse sequence.

    The trajectory is sampled every ``sample_every`` ns, at every pulse
    boundary, and at ``extra_samples``.  ``dt`` is the maximum RK4 step; it
    must resolve the fastest oscillation, dt <= 1/(50 f_max).  Hermiticity,
    trace and positivity are checked at every sample when ``check`` is on.
    """
    pulses = validate_sequence(seq)
    f_max = max_frequency(m, pulses)
    dt_bound = 1.0 / (50.0 * f_max)
    if dt is None:
        dt = 1.0 / (64.0 * f_max)
    if dt > dt_bound * (1 + 1e-12):
        raise ValueError(
            f"dt={dt:.3e} ns too coarse for f_max={f_max:.3f} GHz; need <= {dt_bound:.3e}"
        )
    if t_end is None:
        t_end = max((p.end for p in pulses), default=0.0)
    if t_end <= 0:
        raise ValueError("nothing to integrate: empty sequence and no t_end")

    marks = {0.0, t_end}
    marks.update(np.arange(0.0, t_end, sample_every)[1:].tolist())
    for p in pulses:
        if p.start < t_end:
            marks.add(p.start)
        if p.end < t_end:
            marks.add(p.end)
    for t in extra_samples:
        if 0.0 <= t <= t_end:
            marks.add(float(t))
    times = np.array(sorted(marks))

    l0 = _static_superop(m, diss)
    v = rho0.matrix.astype(np.complex128).ravel().copy()
    out = np.empty((len(times), 4, 4), dtype=np.complex128)
    out[0] = v.reshape(4, 4)

    def active_pulse(t0, t1):
        for p in pulses:
            if p.target == "readout":
                continue
            if p.start <= t0 + 1e-12 and t1 <= p.end + 1e-12:
                return p
        return None

    steps_total = 0
    for i in range(1, len(times)):
        t0, t1 = times[i - 1], times[i]
        span = t1 - t0
        nsteps = max(1, int(math.ceil(span / dt - 1e-12)))
        h = span / nsteps
        pulse = active_pulse(t0, t1)
        if pulse is None:
            rk4_span(l0, _ZERO_DRIVE, 0.0, 0.0, v, t0, h, nsteps)
        else:
            rk4_span(
                l0,
                _DRIVE_SUPEROPS[pulse.target],
                TWO_PI * pulse.frequency,
                pulse.amplitude,
                v,
                t0,
                h,
                nsteps,
            )
        steps_total += nsteps
        if check:
            _check_state(v, t1)
        out[i] = v.reshape(4, 4)
    return Trajectory(times=times, rhos=out, dt=dt, steps=steps_total)


def conditional_spectroscopy_sequence(
    m: ReducedModel,
    conditioning_amp: float,
    fs: float,
    spectroscopy_amp: float = 0.006,
    conditioning_duration: float = 10.0,
    spectroscopy_duration: float = 80.0,
    readout_duration: float = 250.0,
    readout_frequency: float = 7.2,
) -> list[Pulse]:
    """Fig.-style pulse train: conditioning on the ancilla line, spectroscopy
    scan across the qubit lines, then the (passive) readout pulse."""
    pulses = []
    if conditioning_amp > 0:
        pulses.append(Pulse("ancilla", m.ancilla_line, conditioning_amp, 0.0, conditioning_duration))
    pulses.append(Pulse("qubit", fs, spectroscopy_amp, conditioning_duration, spectroscopy_duration))
    t_ro = conditioning_duration + spectroscopy_duration
    pulses.append(Pulse("readout", readout_frequency, 0.0, t_ro, readout_duration))
    return pulses


@dataclass
class SpectroscopyTraces:
    fs: np.ndarray                   # GHz
    conditioning_amps: np.ndarray    # GHz
    signal: np.ndarray               # (n_amps, n_fs) qubit excited population
    dips: list                       # per amplitude: list of {frequency, height}
    flags: list = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["fs_ghz", "conditioning_amp_ghz", "p_excited"])
            for ia, amp in enumerate(self.conditioning_amps):
                for jf, f in enumerate(self.fs):
                    w.writerow([repr(float(f)), repr(float(amp)), repr(float(self.signal[ia, jf]))])

    def dips_json(self) -> dict:
        return {
            "conditioning_amps_ghz": [float(a) for a in self.conditioning_amps],
            "dips": [
                [{"frequency_ghz": d["frequency"], "height": d["height"]} for d in per_amp]
                for per_amp in self.dips
            ],
            "flags": list(self.flags),
        }


def detect_peaks(x: np.ndarray, y: np.ndarray, prominence: float | None = None) -> list[dict]:
    """Prominent local maxima, refined by parabolic interpolation.

    The default prominence cut (15 % of the signal range) keeps the response
    peaks while rejecting the sinc sidelobes of the rectangular spectroscopy
    pulse.
    """
    from scipy.signal import find_peaks

    if prominence is None:
        span = float(y.max() - y.min())
        prominence = 0.15 * span if span > 0 else 1.0
    idx, _ = find_peaks(y, prominence=prominence)
    out = []
    for i in idx:
        if 0 < i < len(y) - 1:
            denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
            shift = 0.0 if denom == 0 else float(np.clip(0.5 * (y[i - 1] - y[i + 1]) / denom, -0.5, 0.5))
            step = x[i + 1] - x[i] if shift >= 0 else x[i] - x[i - 1]
            out.append({"frequency": float(x[i] + shift * step), "height": float(y[i])})
        else:
            out.append({"frequency": float(x[i]), "height": float(y[i])})
    return out


def conditional_spectroscopy(
    m: ReducedModel,
    diss: DissipationParams,
    fs_list,
    conditioning_amps,
    spectroscopy_amp: float = 0.006,
    dt: float | None = None,
    peak_prominence: float | None = None,
) -> SpectroscopyTraces:
    """Qubit excited-state population vs spectroscopy frequency, one trace per
    conditioning amplitude; the readout signal is taken at the end of the
    spectroscopy pulse (start of the passive readout pulse).

    With the conditioning drive off there is a single response at the qubit
    line; as the conditioning pulse populates the ancilla, a second response
    grows at the conditional line 2g below it.
    """
    fs = np.asarray(sorted(float(f) for f in fs_list))
    amps = np.asarray([float(a) for a in conditioning_amps])
    if fs.size < 5:
        raise ValueError("need at least 5 spectroscopy frequencies")
    signal = np.empty((amps.size, fs.size))
    rho0 = DensityMatrix.ground()
    for ia, amp in enumerate(amps):
        for jf, f in enumerate(fs):
            seq = conditional_spectroscopy_sequence(m, amp, f, spectroscopy_amp)
            t_meas = max(p.end for p in seq if p.target != "readout")
            traj = evolve(m, diss, seq, rho0, dt=dt, t_end=t_meas, sample_every=t_meas)
            signal[ia, jf] = traj.excited_qubit()[-1]

    flags = []
    lo, hi = m.conditional_qubit_line, m.qubit_line
    margin = 3.0 * float(np.diff(fs).max()) if fs.size > 1 else 0.0
    if fs[0] > lo - margin or fs[-1] < hi + margin:
        flags.append("fs-window-may-miss-conditional-lines")
    dips = [detect_peaks(fs, signal[ia], peak_prominence) for ia in range(amps.size)]
    return SpectroscopyTraces(fs=fs, conditioning_amps=amps, signal=signal, dips=dips, flags=flags)


@dataclass
class RabiResult:
    durations: np.ndarray
    p_excited: np.ndarray
    amplitude: float
    frequency: float | None = None   # fitted oscillation frequency, GHz
    decay_time: float | None = None  # fitted 1/e envelope time, ns
    flags: list = field(default_factory=list)

    @property
    def fitted(self) -> bool:
        return self.decay_time is not None


def _damped_cosine(t, c0, a, tau, nu, phi):
    return c0 + a * np.exp(-t / tau) * np.cos(TWO_PI * nu * t + phi)


def rabi_trace(
    m: ReducedModel,
    diss: DissipationParams,
    amp: float = 0.01,
    durations=None,
    dt: float | None = None,
) -> RabiResult:
    """Resonant qubit Rabi oscillations and the 1/e decay time of their envelope.

    One lab-frame simulation runs to the longest duration with the drive held
    on; P(excited) is sampled at each requested duration and fitted with a
    damped cosine.  Fewer than three visible oscillations flag the samples
    instead of fitting; without dissipation the fit is flagged undamped.
    """
    if durations is None:
        durations = np.arange(0.0, 1500.0 + 1e-9, 4.0)
    durations = np.asarray(sorted(float(t) for t in durations))
    span = durations[-1]
    if span <= 0:
        raise ValueError("need a positive maximum duration")
    seq = [Pulse("qubit", m.qubit_line, amp, 0.0, span)]
    traj = evolve(
        m,
        diss,
        seq,
        DensityMatrix.ground(),
        dt=dt,
        sample_every=max(span, 1.0),
        extra_samples=durations,
    )
    p_e = np.array([traj.excited_qubit()[np.argmin(np.abs(traj.times - t))] for t in durations])

    flags = []
    n_osc = amp * span
    if n_osc < 3.0:
        return RabiResult(durations, p_e, amp, flags=["too-few-oscillations"])
    p0 = [float(p_e.mean()), -0.5, span / 2.0, amp, 0.0]
    try:
        popt, _ = curve_fit(
            _damped_cosine,
            durations,
            p_e,
            p0=p0,
            maxfev=20000,
            bounds=(
                [-1.0, -2.0, 1.0, 0.25 * amp, -math.pi],
                [2.0, 2.0, 1e7, 4.0 * amp, math.pi],
            ),
        )
    except RuntimeError:
        return RabiResult(durations, p_e, amp, flags=["fit-failed"])
    c0, a, tau, nu, phi = popt
    if tau > 5.0 * span:
        flags.append("undamped")
    return RabiResult(
        durations, p_e, amp, frequency=float(nu), decay_time=float(tau), flags=flags
    )
