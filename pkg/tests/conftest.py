"""Shared fixtures; expensive solves are session-scoped and reused."""

import numpy as np
import pytest

import vmon
from vmon.analysis import classify_levels, transition_table


@pytest.fixture(scope="session")
def ref_params():
    return vmon.reference_params()


@pytest.fixture(scope="session")
def default_spectrum(ref_params):
    """k=10 solve on the default grid (raw stencil values, full mode)."""
    spec = vmon.lowest_eigenpairs(vmon.assemble_hamiltonian(ref_params), 10, seed=0)
    spec.metadata["mode"] = "full"
    return spec


@pytest.fixture(scope="session")
def converged_full(ref_params):
    """k=10 grid-converged spectrum at the measured parameters (about 15 s)."""
    spec = vmon.converged_spectrum(ref_params, 10, target=1e-3, seed=0)
    spec.metadata["mode"] = "full"
    return spec


@pytest.fixture(scope="session")
def converged_quadratic(ref_params):
    """k=6 grid-converged oracle-mode spectrum (about 15 s)."""
    spec = vmon.converged_spectrum(ref_params, 6, target=1e-3, mode="quadratic", seed=0)
    spec.metadata["mode"] = "quadratic"
    return spec


@pytest.fixture(scope="session")
def level_table(converged_full, ref_params):
    return classify_levels(converged_full, ref_params)


@pytest.fixture(scope="session")
def transitions(level_table):
    return transition_table(level_table)


@pytest.fixture(scope="session")
def reduced_model(transitions):
    return vmon.reduced_from_lines(
        transitions.f_qubit_line, transitions.f_ancilla_line, -transitions.chi / 2.0
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260811)
