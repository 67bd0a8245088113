"""Time-dependent eigenbases of an operator trajectory and their connection.

An eigenframe trajectory carries, per grid time, the ascending eigenvalues
and an orthonormal set of eigenvectors of a Hermitian operator series,
together with a fixed degeneracy block structure.  Two gauges appear:

* ``analytic``   - closed-form frames supplied by a model,
* ``continuity`` - numerically diagonalized frames, with the residual
  gauge freedom fixed by aligning each sample to its predecessor (phase
  fixing on nondegenerate levels, polar alignment inside degenerate
  blocks).

The connection series A(t) = i V^dag dV/dt is the central object consumed
by the holonomy layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import OperatorTrajectory, TimeGrid
from .matlib import (
    CMatrix,
    NumericalError,
    degeneracy_blocks,
    polar_unitary,
    series_derivative,
)

GAUGE_TAGS = ("analytic", "continuity")
ORTHONORMAL_TOL = 1e-8
CONNECTION_HERM_TOL = 1e-5
BLOCK_OVERLAP_MIN = 0.1


@dataclass
class FrameTrajectory:
    """Sampled eigenbasis trajectory with a constant degeneracy structure.

    vectors[k] holds the basis states as columns, ordered to match
    eigenvalues[k]; blocks indexes columns into degenerate groups and is
    the same at every time.
    """

    grid: TimeGrid
    eigenvalues: np.ndarray  # (n_steps, dim) real
    blocks: list[list[int]]
    vectors: np.ndarray  # (n_steps, dim, dim) complex
    gauge_tag: str
    flags: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.gauge_tag not in GAUGE_TAGS:
            raise ValueError(f"unknown gauge tag {self.gauge_tag!r}")
        self.vectors = np.asarray(self.vectors, dtype=complex)
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        n, dim = self.eigenvalues.shape
        if self.vectors.shape != (n, dim, dim):
            raise ValueError("vectors shape does not match eigenvalues")
        if n != self.grid.n_steps:
            raise ValueError("sample count does not match the grid")
        if sorted(i for b in self.blocks for i in b) != list(range(dim)):
            raise ValueError("blocks must partition the level indices")
        gram = np.einsum("kji,kjl->kil", self.vectors.conj(), self.vectors)
        worst = float(np.max(np.abs(gram - np.eye(dim))))
        if worst > ORTHONORMAL_TOL:
            raise ValueError(f"frame columns are not orthonormal (deviation {worst:.3e})")

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[1]

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps


@dataclass
class ConnectionSeries:
    """Hermitian connection A(t) = i V^dag dV/dt sampled on the frame grid."""

    grid: TimeGrid
    samples: np.ndarray  # (n_steps, dim, dim) Hermitian
    herm_deviation: float = 0.0
    flags: list[str] = field(default_factory=list)


def _align_block(prev: CMatrix, new: CMatrix) -> CMatrix:
    """Rotate the columns of `new` to lie closest to `prev` (polar alignment)."""
    B = new.conj().T @ prev
    if B.shape == (1, 1):  # nondegenerate level: pure phase fix
        mod = abs(B[0, 0])
        if mod < BLOCK_OVERLAP_MIN:
            raise NumericalError(
                f"frame continuity lost: level overlap {mod:.3e} "
                "(grid too coarse or level crossing)"
            )
        return new * (B[0, 0] / mod)
    sig = np.linalg.svd(B, compute_uv=False)
    if sig[-1] < BLOCK_OVERLAP_MIN:
        raise NumericalError(
            f"frame continuity lost: block overlap {sig[-1]:.3e} "
            "(grid too coarse or level crossing)"
        )
    M, _ = polar_unitary(B)
    return new @ M


def eigenframes(I_traj: OperatorTrajectory, deg_tol: float = 1e-8) -> FrameTrajectory:
    """Continuity-gauged eigenframes of a Hermitian operator trajectory.

    Per time: diagonalize (ascending).  Across time, three fixes make the
    frames smooth: blocks are matched to the previous sample by largest
    subspace overlap, nondegenerate phases are fixed so successive overlaps
    are real positive, and degenerate blocks are polar-aligned to their
    predecessors.  A change in degeneracy block structure aborts and
    reports the crossing time.
    """
    if I_traj.kind not in ("invariant", "density"):
        raise ValueError("eigenframes expects an operator trajectory (invariant/density)")
    n = I_traj.grid.n_steps
    dim = I_traj.dim
    devs = np.max(np.abs(I_traj.samples - I_traj.samples.conj().transpose(0, 2, 1)), axis=(1, 2))
    if np.max(devs) > 1e-10:
        k = int(np.argmax(devs))
        raise ValueError(f"trajectory sample {k} is not Hermitian ({devs[k]:.3e})")
    sym = 0.5 * (I_traj.samples + I_traj.samples.conj().transpose(0, 2, 1))
    eigenvalues, vectors = np.linalg.eigh(sym)
    blocks_ref: list[list[int]] | None = None
    flags: list[str] = []

    for k in range(n):
        blocks = degeneracy_blocks(eigenvalues[k], deg_tol)
        if blocks_ref is None:
            blocks_ref = blocks
        elif [len(b) for b in blocks] != [len(b) for b in blocks_ref]:
            raise NumericalError(
                f"degeneracy block structure changed at t={I_traj.grid.times[k]:.6g}: "
                f"{[len(b) for b in blocks_ref]} -> {[len(b) for b in blocks]}"
            )
        if k > 0:
            # Match current blocks to the previous sample's by subspace overlap,
            # then align within each matched block.
            prev = vectors[k - 1]
            V = vectors[k]
            for prev_b, cur_b in zip(blocks_ref, blocks):
                ov = np.linalg.norm(prev[:, prev_b].conj().T @ V[:, cur_b])
                if ov**2 / len(prev_b) < BLOCK_OVERLAP_MIN:
                    raise NumericalError(
                        f"frame continuity lost at t={I_traj.grid.times[k]:.6g}: "
                        f"subspace overlap {ov:.3e}"
                    )
                V[:, cur_b] = _align_block(prev[:, prev_b], V[:, cur_b])

    assert blocks_ref is not None
    return FrameTrajectory(
        grid=I_traj.grid,
        eigenvalues=eigenvalues,
        blocks=blocks_ref,
        vectors=vectors,
        gauge_tag="continuity",
        flags=flags,
    )


def eigen_residual(I_traj: OperatorTrajectory, frames: FrameTrajectory) -> float:
    """max_k || I(t_k) V_k - V_k diag(lam_k) ||_max, a frame-quality metric."""
    IV = np.einsum("kij,kjl->kil", I_traj.samples, frames.vectors)
    VL = frames.vectors * frames.eigenvalues[:, None, :]
    return float(np.max(np.abs(IV - VL)))


def connection(frames: FrameTrajectory) -> ConnectionSeries:
    """Connection A(t_k) = i V_k^dag (dV/dt)_k, Hermitized finite differences.

    The raw finite-difference matrix fails Hermiticity only at the
    discretization level; the worst deviation is recorded and flagged when
    it exceeds CONNECTION_HERM_TOL.
    """
    V = frames.vectors
    dV = series_derivative(V, frames.grid.dt)
    A_raw = 1j * np.einsum("kji,kjl->kil", V.conj(), dV)
    dev = float(np.max(np.abs(A_raw - np.conj(np.swapaxes(A_raw, 1, 2)))))
    A = 0.5 * (A_raw + np.conj(np.swapaxes(A_raw, 1, 2)))
    flags = []
    if dev > CONNECTION_HERM_TOL:
        flags.append(f"connection hermiticity deviation {dev:.3e}")
    return ConnectionSeries(grid=frames.grid, samples=A, herm_deviation=dev, flags=flags)


def overlap(frames: FrameTrajectory, k: int) -> CMatrix:
    """Frame overlap W(t_k, t_0) = V(t_0)^dag V(t_k); entries <a;0|b;t_k>."""
    n = frames.n_steps
    if not -n <= k < n:
        raise ValueError(f"grid index {k} out of range for {n} samples")
    return frames.vectors[0].conj().T @ frames.vectors[k % n]


def _check_block_compatible(M: np.ndarray, blocks: list[list[int]], dim: int) -> None:
    """Reject entries outside the degeneracy blocks (works on stacks too)."""
    mask = np.zeros((dim, dim), dtype=bool)
    for b in blocks:
        idx = np.ix_(b, b)
        mask[idx] = True
    worst = float(np.max(np.abs(np.where(mask, 0.0, M))))
    if worst > 1e-10:
        raise ValueError(
            f"gauge transformation mixes degeneracy blocks (off-block entry {worst:.3e})"
        )


def gauge_transform(frames: FrameTrajectory, M: np.ndarray) -> FrameTrajectory:
    """Apply a block-compatible unitary gauge V_k -> V_k @ M_k.

    M may be a single (dim, dim) matrix or one per sample.  Entries that
    couple different degeneracy blocks are rejected, as are non-unitary
    samples: the transformed frames must stay eigenframes of the same
    operator trajectory.
    """
    M = np.asarray(M, dtype=complex)
    n, dim = frames.n_steps, frames.dim
    if M.shape == (dim, dim):
        M = np.broadcast_to(M, (n, dim, dim))
    if M.shape != (n, dim, dim):
        raise ValueError("gauge must be one matrix or one per grid sample")
    gram = np.einsum("kji,kjl->kil", M.conj(), M)
    devs = np.max(np.abs(gram - np.eye(dim)), axis=(1, 2))
    if np.max(devs) > ORTHONORMAL_TOL:
        k = int(np.argmax(devs))
        raise ValueError(f"gauge sample {k} is not unitary (deviation {devs[k]:.3e})")
    _check_block_compatible(M, frames.blocks, dim)
    return FrameTrajectory(
        grid=frames.grid,
        eigenvalues=frames.eigenvalues.copy(),
        blocks=[list(b) for b in frames.blocks],
        vectors=np.einsum("kij,kjl->kil", frames.vectors, M),
        gauge_tag=frames.gauge_tag,
        flags=list(frames.flags),
    )


def smooth_random_gauge(
    frames: FrameTrajectory,
    amplitude: float = 0.1,
    seed: int = 0,
    n_harmonics: int = 2,
) -> np.ndarray:
    """Seeded smooth block-diagonal gauge samples for covariance checks.

    Each degeneracy block gets exp(i Theta_b(t)) with Theta_b a low-order
    Fourier series in t with Hermitian matrix coefficients; the result is
    periodic over the grid span and block-compatible by construction.
    """
    rng = np.random.default_rng(seed)
    n, dim = frames.n_steps, frames.dim
    s = (frames.grid.times - frames.grid.t0) / (frames.grid.t1 - frames.grid.t0)
    M = np.zeros((n, dim, dim), dtype=complex)
    M[:] = np.eye(dim)
    for b in frames.blocks:
        g = len(b)
        theta = np.zeros((n, g, g), dtype=complex)
        for m in range(1, n_harmonics + 1):
            for wave in (np.cos, np.sin):
                G = rng.normal(size=(g, g)) + 1j * rng.normal(size=(g, g))
                G = 0.5 * (G + G.conj().T)
                theta += (amplitude / m) * wave(2.0 * np.pi * m * s)[:, None, None] * G
        lam, Q = np.linalg.eigh(theta)
        M[(slice(None),) + np.ix_(b, b)] = np.einsum(
            "kij,kj,klj->kil", Q, np.exp(1j * lam), Q.conj()
        )
    return M
