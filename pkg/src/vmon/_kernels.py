"""Compiled inner loop for the Lindblad integrator.

The density matrix is integrated in vectorized form (16 complex components)
with classical fixed-step RK4.  The right-hand side is L0 @ v plus, when a
pulse is active, amp*cos(w t) * (Ld @ v); both superoperators are dense
16 x 16 complex matrices precomputed in Python.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def rk4_span(l0, ld, w, amp, v, t0, h, nsteps):
    """Advance v (in place) over nsteps steps of size h starting at t0.

    Drive coefficient is amp*cos(w*t); pass amp=0 for free evolution.
    """
    n = v.shape[0]
    k1 = np.empty(n, np.complex128)
    k2 = np.empty(n, np.complex128)
    k3 = np.empty(n, np.complex128)
    k4 = np.empty(n, np.complex128)
    tmp = np.empty(n, np.complex128)
    for s in range(nsteps):
        t = t0 + s * h
        c = amp * np.cos(w * t)
        for i in range(n):
            acc = 0.0 + 0.0j
            for j in range(n):
                acc += (l0[i, j] + c * ld[i, j]) * v[j]
            k1[i] = acc
        c = amp * np.cos(w * (t + 0.5 * h))
        for i in range(n):
            tmp[i] = v[i] + 0.5 * h * k1[i]
        for i in range(n):
            acc = 0.0 + 0.0j
            for j in range(n):
                acc += (l0[i, j] + c * ld[i, j]) * tmp[j]
            k2[i] = acc
        for i in range(n):
            tmp[i] = v[i] + 0.5 * h * k2[i]
        for i in range(n):
            acc = 0.0 + 0.0j
            for j in range(n):
                acc += (l0[i, j] + c * ld[i, j]) * tmp[j]
            k3[i] = acc
        c = amp * np.cos(w * (t + h))
        for i in range(n):
            tmp[i] = v[i] + h * k3[i]
        for i in range(n):
            acc = 0.0 + 0.0j
            for j in range(n):
                acc += (l0[i, j] + c * ld[i, j]) * tmp[j]
            k4[i] = acc
        for i in range(n):
            v[i] = v[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return v
