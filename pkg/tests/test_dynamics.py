"""Unit tests for the Lindblad/invariant integrators and the coefficient
equation in a moving basis."""
from __future__ import annotations

import numpy as np
import pytest

from hkit import dynamics, frames, models
from hkit.dynamics import LindbladModel, OperatorTrajectory, TimeGrid
from hkit.matlib import NumericalError, herm_defect


def _decay(gamma=0.0, theta0=np.pi / 2, **kw):
    return models.TwoLevelDecayParams(gamma=gamma, theta0=theta0, **kw)


def test_time_grid_spacing_and_samples():
    grid = TimeGrid(0.0, 2.0, 5)
    assert grid.dt == pytest.approx(0.5)
    assert np.allclose(grid.times, [0.0, 0.5, 1.0, 1.5, 2.0])


def test_time_grid_refinement_inserts_midpoints():
    grid = TimeGrid(0.3, 1.1, 9)
    fine = grid.refined()
    assert fine.n_steps == 17
    assert fine.t0 == grid.t0 and fine.t1 == grid.t1
    # every coarse sample survives refinement
    assert np.allclose(fine.times[::2], grid.times)


def test_time_grid_rejects_degenerate_input():
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, 1)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(2.0, 1.0, 10)


def test_model_validation():
    H = lambda t: np.eye(2, dtype=complex)
    with pytest.raises(ValueError):
        LindbladModel(dim=1, hamiltonian=H)
    with pytest.raises(ValueError):
        LindbladModel(dim=2, hamiltonian=H, jump_ops=[lambda t: np.eye(2)])
    bad = LindbladModel(
        dim=2,
        hamiltonian=H,
        jump_ops=[lambda t: np.eye(2)],
        couplings=lambda t: np.zeros((2, 2)),
    )
    with pytest.raises(ValueError):
        bad.rates(0.0)


def test_is_closed_tracks_the_rates():
    params = _decay(gamma=0.0)
    assert models.two_level_model(params).is_closed(np.linspace(0, 1, 5))
    open_model = models.two_level_model(_decay(gamma=0.1))
    assert not open_model.is_closed(np.linspace(0, 1, 5))


def test_operator_trajectory_validation():
    grid = TimeGrid(0.0, 1.0, 4)
    samples = np.zeros((4, 2, 2))
    with pytest.raises(ValueError):
        OperatorTrajectory(grid, samples, "wavefunction")
    with pytest.raises(ValueError):
        OperatorTrajectory(grid, samples[:3], "density")


def test_lindblad_rhs_is_traceless_and_hermiticity_preserving():
    rng = np.random.default_rng(3)
    model = models.two_level_model(_decay(gamma=0.4, theta0=1.0))
    for _ in range(20):
        G = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        rho = 0.5 * (G + G.conj().T)
        out = dynamics.lindblad_rhs(model, rng.uniform(0.0, 3.0), rho)
        assert abs(np.trace(out)) < 1e-14
        assert herm_defect(out) < 1e-14


def test_invariant_rhs_reduces_to_commutator_when_closed():
    model = models.two_level_model(_decay(gamma=0.0))
    I = np.array([[0.2, 0.3 - 0.1j], [0.3 + 0.1j, -0.2]])
    H = model.hamiltonian(0.0)
    expect = -1j * (H @ I - I @ H)
    got = dynamics.invariant_rhs(model, 0.7, I)
    assert np.max(np.abs(got - expect)) < 1e-15


def test_excited_population_decays_at_the_stated_rate():
    """rho_ee(t) = exp(-gamma t): pins down the coupling-rate convention."""
    gamma = 0.2
    model = models.two_level_model(_decay(gamma=gamma))
    grid = TimeGrid(0.0, 5.0, 2001)
    traj = dynamics.propagate(model, np.diag([0.0, 1.0]), grid, kind="density")
    pop = traj.samples[:, 1, 1].real
    assert np.max(np.abs(pop - np.exp(-gamma * grid.times))) < 1e-9
    # log-linear fit recovers the exponent itself
    slope = np.polyfit(grid.times, np.log(pop), 1)[0]
    assert slope == pytest.approx(-gamma, abs=1e-8)


def test_propagated_invariant_matches_closed_form():
    params = _decay(gamma=0.08, theta0=2.0)
    model = models.two_level_model(params)
    grid = TimeGrid(0.0, 4.0, 1601)
    traj = dynamics.propagate(
        model, models.chi_closed_form(params, 0.0), grid, kind="invariant"
    )
    err = max(
        np.max(np.abs(traj.samples[k] - models.chi_closed_form(params, t)))
        for k, t in enumerate(grid.times)
    )
    assert err < 1e-9


def test_propagate_rejects_bad_initial_operators():
    model = models.two_level_model(_decay())
    grid = TimeGrid(0.0, 1.0, 11)
    with pytest.raises(ValueError):
        dynamics.propagate(model, np.zeros((3, 3)), grid)
    with pytest.raises(ValueError):
        dynamics.propagate(model, np.array([[0.0, 1.0], [0.0, 0.0]]), grid)
    with pytest.raises(ValueError):  # density needs unit trace
        dynamics.propagate(model, np.eye(2), grid, kind="density")
    with pytest.raises(ValueError):
        dynamics.propagate(model, np.eye(2) / 2.0, grid, kind="coefficient")


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_propagate_aborts_on_overflow_with_last_valid_time():
    blowup = LindbladModel(
        dim=2, hamiltonian=lambda t: 1e200 * np.array([[0.0, 1.0], [1.0, 0.0]])
    )
    grid = TimeGrid(0.0, 1.0, 11)
    with pytest.raises(NumericalError, match="last valid time"):
        dynamics.propagate(blowup, np.diag([1.0, 0.0]), grid)


def test_trace_drift_is_renormalized_and_flagged(monkeypatch):
    model = models.two_level_model(_decay())
    orig = dynamics.lindblad_rhs
    leak = lambda m, t, rho: orig(m, t, rho) + 1e-6 * np.eye(2)
    monkeypatch.setattr(dynamics, "lindblad_rhs", leak)
    traj = dynamics.propagate(model, np.diag([1.0, 0.0]), TimeGrid(0.0, 1.0, 51))
    assert any("renormalized" in f for f in traj.flags)
    assert abs(np.trace(traj.samples[-1]).real - 1.0) < 1e-12


def test_invariant_expectation_is_conserved():
    params = _decay(gamma=0.1, theta0=2.0, r0=0.8)
    model = models.two_level_model(params)
    grid = TimeGrid(0.0, 6.0, 2401)
    chi0 = models.chi_closed_form(params, 0.0)
    rho = dynamics.propagate(model, 0.5 * (np.eye(2) + chi0), grid, kind="density")
    inv = dynamics.propagate(model, chi0, grid, kind="invariant")
    vals = dynamics.invariant_expectation(inv, rho)
    # Tr[chi(0)^2]/2 = r0^2 for a traceless initial invariant
    assert np.max(np.abs(vals - params.r0**2)) < 1e-9


def test_invariant_expectation_rejects_imaginary_parts():
    grid = TimeGrid(0.0, 1.0, 3)
    rho = OperatorTrajectory(grid, np.stack([np.eye(2) / 2.0] * 3), "density")
    crooked = OperatorTrajectory(grid, np.stack([1j * np.eye(2)] * 3), "invariant")
    with pytest.raises(NumericalError):
        dynamics.invariant_expectation(crooked, rho)
    other = OperatorTrajectory(TimeGrid(0.0, 1.0, 5), np.zeros((5, 2, 2)), "invariant")
    with pytest.raises(ValueError):
        dynamics.invariant_expectation(other, rho)


def test_basis_matrices_closed_system_has_pure_diagonal_generator():
    """With gamma = 0 the moving-basis generator H + A collapses to
    (omega0/2) diag(1, -1): no off-diagonal coupling, no dissipator."""
    params = _decay(gamma=0.0, theta0=2 * np.pi / 3)
    model = models.two_level_model(params)
    grid = TimeGrid(0.0, 2.0 * np.pi, 4001)
    fr = models.analytic_frames(params, grid)
    for k in (0, 1000, 2500, 4000):
        B = dynamics.basis_matrices(model, fr, k)
        HA = B.H + B.A
        assert abs(HA[0, 1]) < 5e-6  # finite-difference error in A only
        assert HA[0, 0].real == pytest.approx(0.5 * params.omega0, abs=5e-6)
        assert HA[1, 1].real == pytest.approx(-0.5 * params.omega0, abs=5e-6)
        assert np.max(np.abs(B.D)) == 0.0
        assert B.Lambda == []


def test_basis_matrices_index_bounds():
    params = _decay()
    model = models.two_level_model(params)
    fr = models.analytic_frames(params, TimeGrid(0.0, 1.0, 5))
    with pytest.raises(ValueError):
        dynamics.basis_matrices(model, fr, 7)


def test_coefficient_propagation_requires_refined_frames():
    params = _decay(gamma=0.01)
    model = models.two_level_model(params)
    grid = TimeGrid(0.0, 1.0, 101)
    fr = models.analytic_frames(params, grid)  # not grid.refined()
    c0 = np.diag([0.5, 0.5])
    with pytest.raises(ValueError):
        dynamics.propagate_coefficients(model, fr, c0, grid)


def test_coefficient_route_reproduces_the_direct_density_solution():
    """Integrating c = V^dag rho V in the moving frame and rotating back
    must agree with integrating rho directly."""
    params = _decay(gamma=0.05, theta0=1.2, r0=0.9)
    model = models.two_level_model(params)
    grid = TimeGrid(0.0, 3.0, 1201)  # agreement is limited by the O(dt^2) connection
    fr = models.analytic_frames(params, grid.refined())

    chi0 = models.chi_closed_form(params, 0.0)
    rho0 = 0.5 * (np.eye(2) + chi0)
    V0 = fr.vectors[0]
    c0 = V0.conj().T @ rho0 @ V0
    c_traj = dynamics.propagate_coefficients(model, fr, c0, grid)
    rho_traj = dynamics.propagate(model, rho0, grid, kind="density")

    V = fr.vectors[::2]
    rebuilt = np.einsum("kij,kjl,kml->kim", V, c_traj.samples, V.conj())
    assert np.max(np.abs(rebuilt - rho_traj.samples)) < 1e-6
