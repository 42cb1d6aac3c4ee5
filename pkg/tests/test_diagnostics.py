import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from superradiance_mf.diagnostics import (
    PhasePoint,
    Spectrum,
    classify_phase,
    fourier_magnitude,
    min_eigenvalue_ppt,
    partial_transpose,
    spectrum,
    time_averaged_diagnostics,
)
from superradiance_mf.dynamics import Trajectory
from superradiance_mf.model import E, G, ModelParams, flat_index

from .conftest import random_density_matrix


def tone(nu, t_end=200.0, dt=0.05, amp=1.0):
    t = np.arange(0, t_end + dt / 2, dt)
    return Trajectory(t, amp * np.exp(-1j * nu * t), np.zeros((t.size, 4)))


def test_pure_tone_peak():
    spec = spectrum(tone(1.3), omega_max=3.0, n_omega=601)
    assert spec.peak_frequency == pytest.approx(1.3, abs=spec.resolution)
    assert spec.count_peaks() == 1
    # magnitude at the carrier is the signal duration
    assert spec.magnitudes.max() == pytest.approx(200.0, rel=1e-3)


def test_trapezoid_exact_for_constant():
    t = np.linspace(0, 3, 31)
    assert fourier_magnitude(t, np.full(31, 2.0), np.array([0.0]))[0] == pytest.approx(6.0)


def test_non_uniform_rejected():
    t = np.array([0.0, 0.1, 0.3])
    with pytest.raises(ValueError, match="uniform"):
        fourier_magnitude(t, np.ones(3), np.array([0.0]))


def test_two_tones_counted():
    tr = tone(1.0)
    tr.X_values = tr.X_values + 0.8 * np.exp(-2.5j * tr.times)
    spec = spectrum(tr, omega_max=4.0, n_omega=801)
    assert_allclose(np.sort(spec.peaks()), [1.0, 2.5], atol=spec.resolution)


def test_spectrum_csv(tmp_path):
    spec = Spectrum([0.0, 1.0], [1.0, 2.0])
    lines = spec.to_csv(tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "omega,magnitude"
    with pytest.raises(ValueError):
        Spectrum([0.0, 1.0], [1.0])


def bell(n_max):
    psi = np.zeros(2 * (n_max + 1), complex)
    psi[flat_index(E, 0, n_max)] = psi[flat_index(G, 1, n_max)] = 1 / math.sqrt(2)
    return np.outer(psi, psi.conj())


def test_bell_state_witness():
    rho = bell(4)
    assert min_eigenvalue_ppt(rho) == pytest.approx(-0.5, abs=1e-10)
    vals = np.sort(np.linalg.eigvalsh(partial_transpose(rho)))
    nonzero = vals[np.abs(vals) > 1e-12]
    assert_allclose(nonzero, [-0.5, 0.5, 0.5, 0.5], atol=1e-12)


def test_product_state_positive(rng):
    rho_int = random_density_matrix(rng, 2)
    rho_mom = random_density_matrix(rng, 5)
    rho = np.kron(rho_int, rho_mom)
    assert_allclose(partial_transpose(rho), np.kron(rho_int.T, rho_mom), atol=1e-15)
    assert min_eigenvalue_ppt(rho) >= -1e-14


def test_maximally_mixed():
    assert min_eigenvalue_ppt(np.eye(12) / 12) == pytest.approx(1 / 12)


@given(st.integers(1, 6), st.integers(0, 2**31))
def test_partial_transpose_involution(n_max, seed):
    rho = random_density_matrix(np.random.default_rng(seed), 2 * (n_max + 1))
    pt = partial_transpose(rho)
    assert np.array_equal(partial_transpose(pt), rho)
    assert_allclose(pt, pt.conj().T, atol=1e-14)
    assert np.trace(pt) == pytest.approx(1.0)


def test_time_averages_constant_trajectory():
    rho = bell(2)
    t = np.arange(0, 10.0, 0.5)
    tr = Trajectory(t, np.full(t.size, 0.3 * np.exp(0.2j)), np.zeros((t.size, 6)),
                    snapshot_times=t[::4], snapshots=np.stack([rho] * t[::4].size))
    lam_bar, x_av = time_averaged_diagnostics(tr)
    assert x_av == pytest.approx(0.3, abs=1e-15)
    assert lam_bar == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        time_averaged_diagnostics(Trajectory(t, tr.X_values, tr.populations))


def test_phase_point_label_checked():
    with pytest.raises(ValueError):
        PhasePoint(1.0, 2.0, "weird")


def test_classify_normal_and_incoherent():
    tmpl = ModelParams(1.0, 0.0, 0.5, n_max=8)
    assert classify_phase(5.0, 8.0, tmpl).label == "normal"
    pt = classify_phase(1.0, 4.0, tmpl)
    assert pt.label == "incoherent"
    assert pt.lambda_min >= -1e-8


@pytest.mark.parametrize("w,label", [(2.5, "coherent"), (1.0, "chaotic")])
def test_classify_path_b(w, label):
    pt = classify_phase(w, 15.0, ModelParams(1.0, 0.0, 0.5, n_max=15))
    assert pt.label == label
    assert pt.abs_X_st > 1e-4
    assert (pt.gamma.real > 0) == (label == "chaotic")


def test_chirp_z_matches_direct_sum(rng):
    t = np.arange(0, 50.0, 0.05)
    x = np.exp(-0.7j * t) + 0.3 * rng.normal(size=t.size)
    om = np.linspace(-3, 3, 301)
    assert_allclose(fourier_magnitude(t, x, om), fourier_magnitude(t, x, om, method="direct"), rtol=1e-8, atol=1e-9)
