import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from superradiance_mf.model import (
    E,
    G,
    ModelParams,
    basis_label,
    build_cos,
    build_j1,
    build_kinetic,
    flat_index,
    operators,
    order_parameter,
)

from .conftest import random_density_matrix


def plane_wave_cos(n_max):
    """cos(kx) on plane waves |m hbar k>, projected onto the symmetric states."""
    ms = np.arange(-n_max, n_max + 1)
    dim = ms.size
    shift = np.zeros((dim, dim))
    for i in range(dim - 1):
        shift[i + 1, i] = 1.0  # e^{ikx}|m> = |m+1>
    cos_pw = 0.5 * (shift + shift.T)
    # columns: symmetric states Psi_n in the plane-wave basis
    u = np.zeros((dim, n_max + 1))
    u[n_max, 0] = 1.0
    for n in range(1, n_max + 1):
        u[n_max + n, n] = u[n_max - n, n] = 1 / math.sqrt(2)
    return u.T @ cos_pw @ u


@pytest.mark.parametrize("n_max", [1, 2, 4, 9])
def test_cos_matches_plane_wave_projection(n_max):
    assert_allclose(build_cos(n_max), plane_wave_cos(n_max), atol=1e-15)


def test_cos_low_entries():
    c = build_cos(4)
    assert c[0, 1] == pytest.approx(1 / math.sqrt(2))
    assert c[2, 3] == 0.5
    assert c[1, 3] == 0.0
    assert np.all(np.diag(c) == 0)


def test_kinetic_is_n_squared():
    assert_allclose(np.diag(build_kinetic(3)), [0, 1, 4, 9])


def test_operators_read_only():
    with pytest.raises(ValueError):
        build_cos(3)[0, 0] = 1.0


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_bad_cutoff(bad):
    with pytest.raises(ValueError):
        build_cos(bad)
    with pytest.raises(ValueError):
        ModelParams(lam=1.0, w=0.0, n_max=bad)


@pytest.mark.parametrize("kwargs", [dict(lam=0.0, w=1.0), dict(lam=1.0, w=-0.1),
                                    dict(lam=1.0, w=0.0, delta_over_kappa=float("nan"))])
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def test_resonant_coupling_exact():
    p = ModelParams(lam=6.0, w=0.0, delta_over_kappa=0.0)
    assert p.chi == math.pi / 2
    assert p.coupling == -3j


def test_half_detuning_coupling():
    p = ModelParams(lam=2.0, w=0.0, delta_over_kappa=0.5)
    assert p.chi == pytest.approx(math.pi / 4)
    assert p.coupling == pytest.approx(-2.0 / math.sqrt(2) * np.exp(1j * math.pi / 4))


@given(st.floats(-20, 20, allow_nan=False), st.floats(0.1, 30))
def test_chi_branch(dk, lam):
    p = ModelParams(lam=lam, w=0.0, delta_over_kappa=dk)
    assert 0 < p.chi < math.pi
    assert math.sin(p.chi) * 2 * dk == pytest.approx(math.cos(p.chi), abs=1e-12)
    assert p.alpha == complex(2 * dk, -1)


@given(st.integers(0, 1), st.integers(0, 7))
def test_flat_index_roundtrip(internal, n):
    assert basis_label(flat_index(internal, n, 7), 7) == (internal, n)


def test_flat_index_layout():
    assert flat_index(G, 0, 3) == 0
    assert flat_index(E, 0, 3) == 4


def test_order_parameter_matches_trace(rng):
    n_max = 5
    rho = random_density_matrix(rng, 2 * (n_max + 1))
    assert order_parameter(rho) == pytest.approx(np.trace(build_j1(n_max) @ rho), abs=1e-14)


def test_sigma_lowers():
    ops = operators(3)
    up = ops.sigma.conj().T
    assert up[flat_index(E, 2, 3), flat_index(G, 2, 3)] == 1
    assert_allclose(ops.n_excited, np.diag([0] * 4 + [1] * 4))
