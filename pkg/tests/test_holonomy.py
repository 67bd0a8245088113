"""Unit tests for transport cases, the time-ordered transporter, and the
holonomy assembly."""
from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import expm

from hkit import dynamics, frames, holonomy, models
from hkit.dynamics import TimeGrid
from hkit.frames import ConnectionSeries, FrameTrajectory
from hkit.matlib import NumericalError, match_phase_sets

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)


def _params(**kw):
    base = dict(gamma=1e-3, theta0=2 * np.pi / 3)
    base.update(kw)
    return models.TwoLevelDecayParams(**base)


def _rotation_frames(grid, angle_fn):
    n = grid.n_steps
    V = np.empty((n, 2, 2), dtype=complex)
    for k, t in enumerate(grid.times):
        a = angle_fn(t)
        V[k] = [[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]]
    lam = np.tile([0.0, 1.0], (n, 1))
    return FrameTrajectory(grid, lam, [[0], [1]], V, "analytic")


def test_case_restrict_masks_follow_the_block_structure():
    M = np.arange(9.0).reshape(3, 3) + 1.0
    blocks = [[0, 1], [2]]
    assert np.array_equal(holonomy.case_restrict(M, blocks, "general"), M)
    assert np.array_equal(holonomy.case_restrict(M, blocks, "t_nd"), M)
    nt = holonomy.case_restrict(M, blocks, "nt_nd")
    assert np.array_equal(nt, np.diag([1.0, 5.0, 9.0]))
    td = holonomy.case_restrict(M, blocks, "t_d")
    expect = np.array([[1.0, 2.0, 0.0], [4.0, 5.0, 0.0], [0.0, 0.0, 9.0]])
    assert np.array_equal(td, expect)
    # stacked input restricts every sample
    stack = holonomy.case_restrict(np.stack([M, 2.0 * M]), blocks, "t_d")
    assert np.array_equal(stack[1], 2.0 * expect)
    with pytest.raises(ValueError, match="case tag"):
        holonomy.case_restrict(M, blocks, "diag")


def test_case_tags_are_checked_against_the_spectrum_structure():
    params = _params()
    fr = models.analytic_frames(params, TimeGrid(0.0, 1.0, 5))
    with pytest.raises(ValueError, match="degenerate block"):
        holonomy.geometric_phase(fr, 4, "t_d")
    lam = np.zeros((5, 2))
    degen = FrameTrajectory(
        TimeGrid(0.0, 1.0, 5), lam, [[0, 1]],
        np.stack([np.eye(2, dtype=complex)] * 5), "analytic",
    )
    with pytest.raises(ValueError, match="nondegenerate"):
        holonomy.geometric_phase(degen, 4, "nt_nd")


def test_transporter_of_a_constant_connection_is_the_exponential():
    grid = TimeGrid(0.0, 2.0, 801)
    A0 = np.array([[0.3, 0.2 - 0.4j], [0.2 + 0.4j, -0.1]])
    series = ConnectionSeries(grid, np.tile(A0, (801, 1, 1)))
    V = holonomy.transporter(series)
    assert np.max(np.abs(V[0] - np.eye(2))) == 0.0
    assert np.max(np.abs(V[-1] - expm(1j * 2.0 * A0))) < 1e-12
    gram = np.einsum("kji,kjl->kil", V.conj(), V)
    assert np.max(np.abs(gram - np.eye(2))) < 1e-12


def test_transporter_orders_later_factors_to_the_left():
    """Piecewise-constant generator: sigma_x then sigma_z.  Only the
    latest-leftmost product matches; the swapped order misses by a
    commutator-sized amount."""
    n = 2001
    grid = TimeGrid(0.0, 2.0, n)
    A = np.empty((n, 2, 2), dtype=complex)
    A[: n // 2 + 1] = SIGMA_X
    A[n // 2 + 1 :] = SIGMA_Z
    V_end = holonomy.transporter(ConnectionSeries(grid, A))[-1]
    correct = expm(1j * SIGMA_Z) @ expm(1j * SIGMA_X)
    swapped = expm(1j * SIGMA_X) @ expm(1j * SIGMA_Z)
    assert np.max(np.abs(V_end - correct)) < 1e-2
    assert np.max(np.abs(V_end - swapped)) > 0.5


def test_unrestricted_transport_of_a_complete_frame_is_trivial():
    """With every level retained, the transporter undoes the overlap
    exactly and O collapses to the identity."""
    params = _params()
    grid = TimeGrid(0.0, 2.0 * np.pi, 4001)
    samples = np.array([models.chi_closed_form(params, t) for t in grid.times])
    fr = frames.eigenframes(dynamics.OperatorTrajectory(grid, samples, "invariant"))
    res = holonomy.geometric_phase(fr, 4000, "general")
    assert np.max(np.abs(res.O - np.eye(2))) < 1e-5
    assert np.max(np.abs(res.eigenphases)) < 1e-5


def test_polar_factors_rebuild_the_restricted_overlap():
    params = _params(gamma=0.05)
    grid = TimeGrid(0.0, 2.0 * np.pi, 801)
    fr = models.analytic_frames(params, grid)
    for case in ("nt_nd", "t_nd"):
        res = holonomy.geometric_phase(fr, 600, case)
        W = holonomy.case_restrict(frames.overlap(fr, 600), fr.blocks, case)
        assert np.max(np.abs(res.R @ res.U - W)) < 1e-12
        gram = res.O.conj().T @ res.O
        assert np.max(np.abs(gram - np.eye(2))) < 1e-10
        assert res.trace_O == pytest.approx(np.trace(res.O))


def test_geometric_phase_index_bounds():
    fr = models.analytic_frames(_params(), TimeGrid(0.0, 1.0, 5))
    with pytest.raises(ValueError, match="out of range"):
        holonomy.geometric_phase(fr, 5, "nt_nd")


def test_vanishing_overlap_modulus_aborts_the_diagonal_case():
    grid = TimeGrid(0.0, 1.0, 33)
    fr = _rotation_frames(grid, lambda t: 0.5 * np.pi * t)
    with pytest.raises(NumericalError, match="phase undefined"):
        holonomy.geometric_phase(fr, 32, "nt_nd")


def test_cyclic_closed_system_reproduces_the_adiabatic_phases():
    for theta0 in (np.pi / 3, 2 * np.pi / 3, 2.5):
        params = _params(gamma=0.0, theta0=theta0)
        grid = TimeGrid(0.0, 2.0 * np.pi / params.omega0, 4001)
        fr = models.analytic_frames(params, grid)
        res = holonomy.geometric_phase(fr, 4000, "nt_nd")
        assert match_phase_sets(res.eigenphases, models.berry_reference(params)) < 1e-5


def test_noncyclic_phase_agrees_with_the_cyclic_limit():
    params = _params(gamma=0.0, theta0=np.pi / 3)
    grid = TimeGrid(0.0, 2.0 * np.pi, 4001)
    fr = models.analytic_frames(params, grid)
    got = sorted(holonomy.noncyclic_abelian_gp(fr, lv, 4000) for lv in (0, 1))
    assert match_phase_sets(np.array(got), models.berry_reference(params)) < 1e-5
    # and mid-path it tracks the diagonal-case eigenphases
    res = holonomy.geometric_phase(fr, 2400, "nt_nd")
    mid = sorted(holonomy.noncyclic_abelian_gp(fr, lv, 2400) for lv in (0, 1))
    assert match_phase_sets(np.array(mid), res.eigenphases) < 1e-8


def test_noncyclic_phase_validation():
    fr = models.analytic_frames(_params(), TimeGrid(0.0, 1.0, 9))
    with pytest.raises(ValueError, match="level"):
        holonomy.noncyclic_abelian_gp(fr, 2, 5)
    with pytest.raises(ValueError, match="out of range"):
        holonomy.noncyclic_abelian_gp(fr, 0, 9)


def test_parallel_residual_flags_untransported_frames():
    params = _params(gamma=0.0)
    grid = TimeGrid(0.0, 2.0 * np.pi, 2001)
    fr = models.analytic_frames(params, grid)
    conn = frames.connection(fr)
    Vpar = holonomy.transporter(conn)
    assert holonomy.parallel_residual(fr, Vpar) < 1e-4
    # the raw frames are not parallel-transported: residual ~ ||A||
    plain = np.broadcast_to(np.eye(2, dtype=complex), Vpar.shape).copy()
    assert holonomy.parallel_residual(fr, plain) > 0.1
    with pytest.raises(ValueError, match="match"):
        holonomy.parallel_residual(fr, Vpar[:100])


def test_witness_vanishes_for_diagonal_transport():
    params = _params(gamma=0.0)
    fr = models.analytic_frames(params, TimeGrid(0.0, 2.0 * np.pi, 1001))
    w = holonomy.nonabelian_witness(fr, "nt_nd")
    assert w["commutator_max"] < 1e-12
    assert w["reversal_gap"] < 1e-12
    # keeping the off-diagonal connection turns both diagnostics on
    full = holonomy.nonabelian_witness(fr, "t_nd")
    assert full["commutator_max"] > 1e-3
    assert full["reversal_gap"] > 1e-6


def test_block_solution_matches_the_scalar_closed_form():
    """At zero coupling each nondegenerate block generator is constant,
    (H + A)_pm pm = +/- omega0 / 2, so the (+,-) coefficient just rotates."""
    params = _params(gamma=0.0, theta0=1.1)
    grid = TimeGrid(0.0, 2.0 * np.pi, 2001)
    fr = models.analytic_frames(params, grid)
    model = models.two_level_model(params)
    c0 = np.array([[0.37 - 0.21j]])
    same = holonomy.dissipative_free_block_solution(model, fr, 0, 0, c0)
    assert np.max(np.abs(same[:, 0, 0] - c0[0, 0])) < 1e-4
    cross = holonomy.dissipative_free_block_solution(model, fr, 0, 1, c0)
    expect = c0[0, 0] * np.exp(1j * params.omega0 * grid.times)
    assert np.max(np.abs(cross[:, 0, 0] - expect)) < 1e-4


def test_block_solution_validation():
    params = _params(gamma=0.1)
    grid = TimeGrid(0.0, 1.0, 9)
    fr = models.analytic_frames(params, grid)
    model = models.two_level_model(params)
    c0 = np.array([[1.0]])
    with pytest.raises(ValueError, match="vanishing coupling rates"):
        holonomy.dissipative_free_block_solution(model, fr, 0, 1, c0)
    closed = models.two_level_model(_params(gamma=0.0))
    fr0 = models.analytic_frames(_params(gamma=0.0), grid)
    with pytest.raises(ValueError, match="block index"):
        holonomy.dissipative_free_block_solution(closed, fr0, 0, 2, c0)
    with pytest.raises(ValueError, match="1x1"):
        holonomy.dissipative_free_block_solution(closed, fr0, 0, 1, np.eye(2))
