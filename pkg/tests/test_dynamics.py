import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from superradiance_mf.dynamics import (
    IntegrationError,
    Trajectory,
    initial_state_bec,
    integrate,
    liouville_rhs,
    max_stable_dt,
    mf_hamiltonian,
    project_physical,
    pump_dissipator,
)
from superradiance_mf.model import E, G, ModelParams, basis_projector, flat_index, operators, order_parameter

from .conftest import random_density_matrix


def lindblad_pump(rho, w, n_max):
    up = operators(n_max).sigma.conj().T
    down = up.conj().T
    return w * (up @ rho @ down - 0.5 * (down @ up @ rho + rho @ down @ up))


def test_pump_block_form_matches_lindblad(rng):
    rho = random_density_matrix(rng, 8)
    assert_allclose(pump_dissipator(rho, 0.7), lindblad_pump(rho, 0.7, 3), atol=1e-15)


def test_hamiltonian_hermitian(small_params):
    h = mf_hamiltonian(0.3 - 0.1j, small_params, frame_shift=0.4)
    assert_allclose(h, h.conj().T, atol=1e-15)


@given(st.floats(0.5, 15), st.floats(0, 8), st.floats(-2, 2))
def test_rhs_trace_free_and_hermitian(lam, w, dk):
    rng = np.random.default_rng(1)
    p = ModelParams(lam, w, dk, n_max=3)
    rho = random_density_matrix(rng, p.dim)
    drho = liouville_rhs(rho, p)
    assert abs(np.trace(drho)) < 1e-12
    assert_allclose(drho, drho.conj().T, atol=1e-12)


def test_initial_state(small_params):
    rho = initial_state_bec(small_params, 1e-4)
    n = small_params.n_max
    assert rho[flat_index(E, 0, n), flat_index(E, 0, n)].real == pytest.approx(1 - 1e-4)
    assert abs(order_parameter(rho)) == pytest.approx(math.sqrt(1e-4 * (1 - 1e-4)) / math.sqrt(2))
    assert np.linalg.eigvalsh(rho)[0] > -1e-14
    with pytest.raises(ValueError):
        initial_state_bec(small_params, 0.5)


def test_project_physical_clips():
    rho = np.diag([1.2, -0.2]).astype(complex)
    out = project_physical(rho)
    assert_allclose(out, np.diag([1.0, 0.0]))


def test_numba_rhs_matches_dense(small_params, rng):
    """One RK4 step of the compiled kernel against a numpy RK4 step."""
    rho = random_density_matrix(rng, small_params.dim)
    dt = 1e-3

    def f(r):
        return liouville_rhs(r, small_params, 0.3)

    k1 = f(rho)
    k2 = f(rho + 0.5 * dt * k1)
    k3 = f(rho + 0.5 * dt * k2)
    k4 = f(rho + dt * k3)
    ref = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    # the positivity monitor is irrelevant for one step from a valid state
    traj = integrate(rho, small_params, dt, dt=dt, sample_every=dt, frame_shift=0.3)
    assert_allclose(traj.final_state, 0.5 * (ref + ref.conj().T), atol=1e-13)


def test_pump_only_populations():
    # ground condensate has X = 0 exactly, so only the pump acts
    p = ModelParams(lam=5.0, w=0.8, n_max=3)
    rho0 = basis_projector(G, 0, 3)
    traj = integrate(rho0, p, 5.0, dt=1e-2, sample_every=0.5)
    assert_allclose(traj.excited_population, 1 - np.exp(-0.8 * traj.times), atol=1e-9)
    assert_allclose(traj.abs_X, 0.0, atol=1e-15)


def test_pump_only_coherence_decay():
    # (|g,0> + |e,0>)/sqrt(2): cos has no diagonal so X stays 0; the
    # internal coherence decays at w/2 and rotates with the frame shift
    p = ModelParams(lam=5.0, w=0.6, n_max=3)
    psi = np.zeros(p.dim, complex)
    psi[flat_index(G, 0, 3)] = psi[flat_index(E, 0, 3)] = 1 / math.sqrt(2)
    rho0 = np.outer(psi, psi.conj())
    t = 3.0
    traj = integrate(rho0, p, t, dt=1e-2, sample_every=1.0, frame_shift=0.7)
    coh = traj.final_state[flat_index(G, 0, 3), flat_index(E, 0, 3)]
    assert coh == pytest.approx(0.5 * np.exp(-0.3 * t) * np.exp(0.7j * t), abs=1e-9)


def test_parity_sets_decouple_without_pump():
    p = ModelParams(lam=9.0, w=0.0, n_max=6)
    traj = integrate(initial_state_bec(p, 1e-3), p, 20.0, dt=2e-3, sample_every=1.0)
    n = p.n_levels
    pops = traj.populations
    odd_excited = pops[:, n + 1::2]
    even_ground = pops[:, 0:n:2]
    assert np.max(np.abs(odd_excited)) < 1e-14
    assert np.max(np.abs(even_ground)) < 1e-14
    assert pops[-1, 1] > 1e-3  # |g, Psi_1> did get populated


def mixed_start(p):
    psi = np.zeros(p.dim, complex)
    psi[flat_index(E, 0, p.n_max)] = math.sqrt(0.7)
    psi[flat_index(G, 1, p.n_max)] = math.sqrt(0.3) * np.exp(0.4j)
    rho = 0.9 * np.outer(psi, psi.conj()) + 0.1 * basis_projector(E, 2, p.n_max)
    return rho


def test_trace_drift_small():
    p = ModelParams(lam=9.0, w=2.25, n_max=8)
    t_end = 50.0
    traj = integrate(mixed_start(p), p, t_end, dt=2e-3, sample_every=1.0)
    drift = abs(np.trace(traj.final_state).real - 1)
    assert drift / t_end < 1e-8
    assert np.linalg.eigvalsh(traj.final_state)[0] > -1e-6


def test_rk4_fourth_order():
    p = ModelParams(lam=6.0, w=1.5, n_max=4)
    rho0 = mixed_start(p)
    finals = [integrate(rho0, p, 2.0, dt=dt, sample_every=2.0).final_state for dt in (0.016, 0.008, 0.004)]
    e1 = np.linalg.norm(finals[0] - finals[1])
    e2 = np.linalg.norm(finals[1] - finals[2])
    assert e1 / e2 == pytest.approx(16, rel=0.15)


def energy_balance_residual(p, t_end=4.0, dt=1e-3):
    """Relative residual of the power balance along a trajectory."""
    traj = integrate(mixed_start(p), p, t_end, dt=dt, sample_every=dt)
    t, X = traj.times, traj.X_values
    dk = p.delta_over_kappa
    energy = traj.kinetic_energy - 2 * p.lam * dk * np.abs(X) ** 2
    h = t[1] - t[0]
    lhs = (energy[2:] - energy[:-2]) / (2 * h)
    dX = (X[2:] - X[:-2]) / (2 * h)
    Xm = X[1:-1]
    rhs = p.lam * dk * p.w * np.abs(Xm) ** 2 - p.lam * np.real(np.conj(p.alpha) * dX * np.conj(Xm))
    return np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs))


@pytest.mark.parametrize("dk", [0.0, 0.5, 1.5])
def test_energy_balance(dk):
    p = ModelParams(lam=9.0, w=2.25, delta_over_kappa=dk, n_max=8)
    assert energy_balance_residual(p) < 1e-3


def test_growth_rate_independent_of_seed():
    p = ModelParams(lam=9.0, w=2.25, n_max=8)
    rates = []
    for eps in (1e-9, 1e-12):
        traj = integrate(initial_state_bec(p, eps), p, 5.0, dt=2e-3, sample_every=0.05)
        sel = (traj.times > 2.0) & (traj.times < 5.0)
        rates.append(np.polyfit(traj.times[sel], np.log(traj.abs_X[sel]), 1)[0])
    assert rates[0] == pytest.approx(rates[1], rel=1e-3)


def test_phase_covariance():
    """Rotating the internal phase rotates X and commutes with the flow."""
    p = ModelParams(lam=9.0, w=2.25, n_max=5)
    theta = 0.9
    u = np.diag(np.exp(1j * theta * np.diag(operators(5).n_excited).real))
    rho0 = mixed_start(p)
    a = integrate(rho0, p, 1.0, dt=2e-3, sample_every=0.5)
    b = integrate(u @ rho0 @ u.conj().T, p, 1.0, dt=2e-3, sample_every=0.5)
    assert_allclose(b.X_values, np.exp(1j * theta) * a.X_values, atol=1e-12)
    assert_allclose(b.final_state, u @ a.final_state @ u.conj().T, atol=1e-12)


def test_dt_guard(small_params):
    with pytest.raises(ValueError, match="stability bound"):
        integrate(initial_state_bec(small_params), small_params, 1.0, dt=1.0)
    assert max_stable_dt(small_params) == pytest.approx(0.5 / (25 + 9))


def test_monitor_trips():
    p = ModelParams(lam=9.0, w=2.25, n_max=3)
    bad = np.diag([1.5, 0, 0, 0, 0, 0, 0, 0]).astype(complex)
    with pytest.raises(IntegrationError):
        integrate(bad, p, 0.1, dt=1e-3, sample_every=1e-3)


def test_trajectory_csv(tmp_path, small_params):
    traj = integrate(initial_state_bec(small_params), small_params, 0.2, dt=1e-2, sample_every=0.1)
    path = traj.to_csv(tmp_path / "t.csv", ["hello"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# hello"
    assert lines[1] == "t,Re_X,Im_X,abs_X,p_e,Ekin"
    assert len(lines) == 2 + traj.times.size
    assert isinstance(traj, Trajectory)
