"""Open-system dynamics: Lindblad propagation, dynamical invariants, and
the equation of motion for density-matrix coefficients in a moving basis.

The master equation used throughout is

    d(rho)/dt = -i [H0, rho] + sum_ij g_ij ( [G_i, rho G_j^dag] + [G_i rho, G_j^dag] )

with real symmetric coupling rates g_ij(t) and jump operators G_i(t).  A
dynamical invariant I(t) satisfies the companion equation

    dI/dt = -i [H0, I] + sum_ij g_ij ( G_j^dag [G_i, I] + [I, G_j^dag] G_i )

which guarantees that Tr[I(t) rho(t)] is constant along any solution of the
master equation.  Both right-hand sides are integrated with fixed-step RK4
and re-Hermitized after every step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np

from .matlib import CMatrix, NumericalError, herm_defect, series_derivative

if TYPE_CHECKING:  # pragma: no cover
    from .frames import FrameTrajectory

TRACE_RTOL = 1e-9
EXPECTATION_IMAG_TOL = 1e-8


@dataclass
class LindbladModel:
    """Time-dependent generator data for the master equation.

    hamiltonian(t) -> (dim, dim) Hermitian matrix
    jump_ops[i](t) -> (dim, dim) matrix
    couplings(t)   -> (n_jump, n_jump) real symmetric rate matrix
    """

    dim: int
    hamiltonian: Callable[[float], CMatrix]
    jump_ops: list[Callable[[float], CMatrix]] = field(default_factory=list)
    couplings: Callable[[float], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise ValueError("model dimension must be at least 2")
        if self.jump_ops and self.couplings is None:
            raise ValueError("jump operators given without coupling rates")

    def rates(self, t: float) -> np.ndarray:
        if self.couplings is None:
            return np.zeros((0, 0))
        g = np.asarray(self.couplings(t), dtype=float)
        if g.shape != (len(self.jump_ops), len(self.jump_ops)):
            raise ValueError("coupling matrix shape does not match jump operators")
        return g

    def is_closed(self, times: np.ndarray) -> bool:
        """True if all coupling rates vanish on the sampled times."""
        if not self.jump_ops:
            return True
        return all(np.max(np.abs(self.rates(t))) == 0.0 for t in times)


@dataclass
class TimeGrid:
    """Uniform time grid with n_steps sample points (n_steps - 1 RK4 steps)."""

    t0: float
    t1: float
    n_steps: int

    def __post_init__(self) -> None:
        if self.n_steps < 2:
            raise ValueError("a time grid needs at least 2 points")
        if not self.t1 > self.t0:
            raise ValueError("t1 must exceed t0")

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / (self.n_steps - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.n_steps)

    def refined(self) -> "TimeGrid":
        """Grid with the same span and a sample inserted mid-step (2n - 1 points)."""
        return TimeGrid(self.t0, self.t1, 2 * self.n_steps - 1)


TRAJECTORY_KINDS = ("density", "invariant", "coefficient")


@dataclass
class OperatorTrajectory:
    """Sampled operator-valued trajectory on a uniform grid."""

    grid: TimeGrid
    samples: np.ndarray  # (n_steps, dim, dim)
    kind: str
    flags: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.kind not in TRAJECTORY_KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.shape[0] != self.grid.n_steps:
            raise ValueError("sample count does not match the grid")

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def lindblad_rhs(model: LindbladModel, t: float, rho: CMatrix) -> CMatrix:
    """Master-equation right-hand side; traceless by construction."""
    H = np.asarray(model.hamiltonian(t), dtype=complex)
    out = -1j * (H @ rho - rho @ H)
    if model.jump_ops:
        g = model.rates(t)
        ops = [np.asarray(G(t), dtype=complex) for G in model.jump_ops]
        for i, Gi in enumerate(ops):
            for j, Gj in enumerate(ops):
                if g[i, j] == 0.0:
                    continue
                Gjd = Gj.conj().T
                sand = Gi @ rho @ Gjd
                out += g[i, j] * (2.0 * sand - Gjd @ Gi @ rho - rho @ Gjd @ Gi)
    return out


def invariant_rhs(model: LindbladModel, t: float, I: CMatrix) -> CMatrix:
    """Right-hand side of the dynamical-invariant equation (not trace-free)."""
    H = np.asarray(model.hamiltonian(t), dtype=complex)
    out = -1j * (H @ I - I @ H)
    if model.jump_ops:
        g = model.rates(t)
        ops = [np.asarray(G(t), dtype=complex) for G in model.jump_ops]
        for i, Gi in enumerate(ops):
            for j, Gj in enumerate(ops):
                if g[i, j] == 0.0:
                    continue
                Gjd = Gj.conj().T
                out += g[i, j] * (Gjd @ (Gi @ I - I @ Gi) + (I @ Gjd - Gjd @ I) @ Gi)
    return out


def _validate_initial(X0: CMatrix, dim: int, kind: str) -> CMatrix:
    X0 = np.asarray(X0, dtype=complex)
    if X0.shape != (dim, dim):
        raise ValueError(f"initial operator must be {dim}x{dim}")
    if herm_defect(X0) > 1e-10:
        raise ValueError("initial operator must be Hermitian")
    if kind == "density" and abs(np.trace(X0).real - 1.0) > 1e-10:
        raise ValueError("initial density matrix must have unit trace")
    return 0.5 * (X0 + X0.conj().T)


def _rk4_step(rhs, t: float, dt: float, X: CMatrix) -> CMatrix:
    k1 = rhs(t, X)
    k2 = rhs(t + 0.5 * dt, X + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, X + 0.5 * dt * k2)
    k4 = rhs(t + dt, X + dt * k3)
    return X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def propagate(
    model: LindbladModel,
    X0: CMatrix,
    grid: TimeGrid,
    kind: str = "density",
) -> OperatorTrajectory:
    """Integrate the master equation (kind='density') or the invariant
    equation (kind='invariant') with fixed-step RK4.

    Every step is re-Hermitized.  A density trace drifting by more than
    TRACE_RTOL is renormalized and flagged; NaN/Inf aborts with the last
    valid time in the message.
    """
    if kind not in ("density", "invariant"):
        raise ValueError("propagate handles 'density' or 'invariant' trajectories")
    rhs = lindblad_rhs if kind == "density" else invariant_rhs

    X = _validate_initial(X0, model.dim, kind)
    times = grid.times
    dt = grid.dt
    samples = np.empty((grid.n_steps, model.dim, model.dim), dtype=complex)
    samples[0] = X
    flags: list[str] = []
    max_drift = 0.0

    for k in range(grid.n_steps - 1):
        X = _rk4_step(lambda t, Y: rhs(model, t, Y), times[k], dt, X)
        X = 0.5 * (X + X.conj().T)
        if not np.all(np.isfinite(X)):
            raise NumericalError(
                f"propagation produced non-finite values; last valid time t={times[k]:.6g}"
            )
        if kind == "density":
            tr = np.trace(X).real
            drift = abs(tr - 1.0)
            if drift > TRACE_RTOL:
                X = X / tr
                max_drift = max(max_drift, drift)
        samples[k + 1] = X

    if max_drift > 0.0:
        flags.append(f"density trace renormalized (max drift {max_drift:.3e})")
    return OperatorTrajectory(grid, samples, kind, flags)


def invariant_expectation(
    I_traj: OperatorTrajectory, rho_traj: OperatorTrajectory
) -> np.ndarray:
    """Tr[I(t) rho(t)] along paired trajectories, as a real array.

    Constancy of this quantity is what makes I(t) an invariant; the trace
    should be real, and a residual imaginary part above
    EXPECTATION_IMAG_TOL aborts.
    """
    if I_traj.grid.n_steps != rho_traj.grid.n_steps:
        raise ValueError("trajectories must share a grid")
    vals = np.einsum("kij,kji->k", I_traj.samples, rho_traj.samples)
    worst = float(np.max(np.abs(vals.imag)))
    if worst > EXPECTATION_IMAG_TOL:
        raise NumericalError(f"expectation value has imaginary part {worst:.3e}")
    return vals.real


@dataclass
class BasisMatrices:
    """Generator data of the coefficient equation at one grid time.

    With frame columns V(t) and the model operators H0, G_i, g_ij:

        H      = -V^dag H0 V
        A      = i V^dag dV/dt   (Hermitized finite difference)
        D      = sum_ij g_ij V^dag G_j^dag G_i V
        Lambda = [V^dag G_i V]

    The coefficient matrix c = V^dag rho V then obeys

        dc/dt = i[H + A, c] + sum_ij g_ij 2 Lambda_i c Lambda_j^dag - (D c + c D)
    """

    H: CMatrix
    A: CMatrix
    D: CMatrix
    Lambda: list[CMatrix]


def basis_matrices(model: LindbladModel, frames: "FrameTrajectory", k: int) -> BasisMatrices:
    """Evaluate the coefficient-equation matrices at grid index k."""
    V = frames.vectors
    n = V.shape[0]
    if not -n <= k < n:
        raise ValueError(f"grid index {k} out of range for {n} samples")
    k = k % n
    t = frames.grid.times[k]
    Vk = V[k]
    dV = series_derivative(V, frames.grid.dt)[k] if n >= 3 else None
    if dV is None:
        raise ValueError("need at least 3 frame samples to form the connection")
    A = 1j * Vk.conj().T @ dV
    A = 0.5 * (A + A.conj().T)
    H0 = np.asarray(model.hamiltonian(t), dtype=complex)
    H = -Vk.conj().T @ H0 @ Vk
    ops = [np.asarray(G(t), dtype=complex) for G in model.jump_ops]
    Lam = [Vk.conj().T @ G @ Vk for G in ops]
    D = np.zeros((model.dim, model.dim), dtype=complex)
    if ops:
        g = model.rates(t)
        for i, Gi in enumerate(ops):
            for j, Gj in enumerate(ops):
                if g[i, j] != 0.0:
                    D += g[i, j] * (Vk.conj().T @ Gj.conj().T @ Gi @ Vk)
    return BasisMatrices(H=H, A=A, D=D, Lambda=Lam)


def _coefficient_rhs_tables(
    model: LindbladModel, frames: "FrameTrajectory"
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Precompute (H+A, D, Lambda, rates) on every frame sample."""
    V = frames.vectors
    n, dim = V.shape[0], V.shape[1]
    dV = series_derivative(V, frames.grid.dt)
    A = 1j * np.einsum("kji,kjl->kil", V.conj(), dV)
    A = 0.5 * (A + np.conj(np.swapaxes(A, 1, 2)))
    times = frames.grid.times
    m = len(model.jump_ops)
    HA = np.empty((n, dim, dim), dtype=complex)
    D = np.zeros((n, dim, dim), dtype=complex)
    Lam = np.zeros((n, m, dim, dim), dtype=complex)
    g_tab = np.zeros((n, m, m))
    for k in range(n):
        Vk = V[k]
        H0 = np.asarray(model.hamiltonian(times[k]), dtype=complex)
        HA[k] = -Vk.conj().T @ H0 @ Vk + A[k]
        if m:
            g = model.rates(times[k])
            g_tab[k] = g
            ops = [np.asarray(G(times[k]), dtype=complex) for G in model.jump_ops]
            for i, Gi in enumerate(ops):
                Lam[k, i] = Vk.conj().T @ Gi @ Vk
                for j, Gj in enumerate(ops):
                    if g[i, j] != 0.0:
                        D[k] += g[i, j] * (Vk.conj().T @ Gj.conj().T @ Gi @ Vk)
    return HA, D, Lam, g_tab


def _coefficient_rhs(HA, D, Lam, g, c):
    out = 1j * (HA @ c - c @ HA)
    m = Lam.shape[0]
    for i in range(m):
        for j in range(m):
            if g[i, j] != 0.0:
                out += 2.0 * g[i, j] * (Lam[i] @ c @ Lam[j].conj().T)
    out -= D @ c + c @ D
    return out


def propagate_coefficients(
    model: LindbladModel,
    frames: "FrameTrajectory",
    c0: CMatrix,
    grid: TimeGrid,
) -> OperatorTrajectory:
    """Integrate the coefficient matrix c = V^dag rho V on `grid`.

    The frames must be sampled on grid.refined() (a point at every RK4
    half-step), so the moving-basis matrices are available at the stage
    times without interpolation.
    """
    fine = frames.grid
    if fine.n_steps != 2 * grid.n_steps - 1 or fine.t0 != grid.t0 or fine.t1 != grid.t1:
        raise ValueError("frames must be sampled on grid.refined()")
    c = _validate_initial(c0, model.dim, "coefficient")
    HA, D, Lam, g = _coefficient_rhs_tables(model, frames)

    dt = grid.dt
    samples = np.empty((grid.n_steps, model.dim, model.dim), dtype=complex)
    samples[0] = c
    for k in range(grid.n_steps - 1):
        a, mid, b = 2 * k, 2 * k + 1, 2 * k + 2
        k1 = _coefficient_rhs(HA[a], D[a], Lam[a], g[a], c)
        k2 = _coefficient_rhs(HA[mid], D[mid], Lam[mid], g[mid], c + 0.5 * dt * k1)
        k3 = _coefficient_rhs(HA[mid], D[mid], Lam[mid], g[mid], c + 0.5 * dt * k2)
        k4 = _coefficient_rhs(HA[b], D[b], Lam[b], g[b], c + dt * k3)
        c = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        c = 0.5 * (c + c.conj().T)
        if not np.all(np.isfinite(c)):
            raise NumericalError(
                f"coefficient propagation produced non-finite values; "
                f"last valid time t={grid.times[k]:.6g}"
            )
        samples[k + 1] = c
    return OperatorTrajectory(grid, samples, "coefficient", [])
