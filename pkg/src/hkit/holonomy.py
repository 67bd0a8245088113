"""Geometric phases from parallel transport along a basis trajectory.

The pipeline splits the frame overlap W(t, 0) = V(0)^dag V(t) into a
dynamical-distortion factor and a transport factor, and combines the
unitary part with the time-ordered transporter

    Vpar(t) = Texp( i int_0^t A )        (latest factor leftmost)

into the phase-carrying matrix O(t, 0) = U(t, 0) @ Vpar(t).  Which matrix
elements participate depends on the scenario:

* ``nt_nd``  - no transitions, nondegenerate: diagonal entries only,
* ``t_d``    - transitions within degenerate blocks: block-diagonal part,
* ``t_nd``   - transitions, nondegenerate: the full matrix,
* ``general``- no restriction (complete-frame transport; O is trivial
               for a complete frame and useful mainly for diagnostics).

Restrictions are applied to the connection before exponentiation and to
the overlap before its polar split, so every case is the holonomy of its
own reduced transport problem.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import LindbladModel, TimeGrid
from .frames import ConnectionSeries, FrameTrajectory, connection, overlap
from .matlib import (
    CMatrix,
    NumericalError,
    polar_unitary,
    principal_phase,
    series_derivative,
    unitary_eigenphases,
)

CASE_TAGS = ("general", "t_d", "t_nd", "nt_nd")
OVERLAP_MODULUS_MIN = 1e-12


@dataclass
class HolonomyResult:
    """Phase data of one transport problem at a fixed final time."""

    O: CMatrix
    U: CMatrix
    Vpar: CMatrix
    R: CMatrix
    trace_O: complex
    eigenphases: np.ndarray
    case_tag: str
    flags: list[str] = field(default_factory=list)


def case_restrict(M: CMatrix, blocks: list[list[int]], case_tag: str) -> CMatrix:
    """Zero the matrix elements a transport case does not couple."""
    if case_tag not in CASE_TAGS:
        raise ValueError(f"unknown case tag {case_tag!r}")
    M = np.asarray(M)
    if case_tag in ("general", "t_nd"):
        return M.copy()
    out = np.zeros_like(M)
    if case_tag == "nt_nd":
        idx = np.arange(M.shape[-1])
        out[..., idx, idx] = M[..., idx, idx]
        return out
    for b in blocks:  # t_d
        idx = np.ix_(b, b)
        if M.ndim == 3:
            out[(slice(None),) + idx] = M[(slice(None),) + idx]
        else:
            out[idx] = M[idx]
    return out


def _check_case(blocks: list[list[int]], case_tag: str) -> None:
    sizes = [len(b) for b in blocks]
    if case_tag == "t_d" and max(sizes) < 2:
        raise ValueError("case 't_d' needs at least one degenerate block")
    if case_tag == "nt_nd" and max(sizes) > 1:
        raise ValueError("case 'nt_nd' requires a fully nondegenerate spectrum")


def transporter(A_series: ConnectionSeries) -> np.ndarray:
    """Cumulative time-ordered exponential of the connection.

    Per interval the midpoint rule exp(i dt (A_k + A_{k+1})/2) is used and
    later factors multiply from the left; the result is unitary to machine
    precision by construction.  Returns the full series, identity first.
    """
    A = A_series.samples
    n, dim = A.shape[0], A.shape[1]
    dt = A_series.grid.dt
    mid = 0.5 * (A[:-1] + A[1:])
    lam, V = np.linalg.eigh(mid)
    phase = np.exp(1j * dt * lam)
    factors = np.einsum("kij,kj,klj->kil", V, phase, V.conj())
    out = np.empty((n, dim, dim), dtype=complex)
    out[0] = np.eye(dim)
    for k in range(n - 1):
        out[k + 1] = factors[k] @ out[k]
    return out


def _restricted_polar(
    W: CMatrix, blocks: list[list[int]], case_tag: str
) -> tuple[CMatrix, CMatrix, list[str]]:
    """Polar split W ~ R U adapted to the case structure.

    nt_nd treats each diagonal entry on its own, t_d runs an independent
    polar decomposition per degenerate block; this keeps the split from
    coupling levels the case forbids (a full SVD could mix blocks with
    close singular values).
    """
    flags: list[str] = []
    dim = W.shape[0]
    if case_tag == "nt_nd":
        w = np.diag(W)
        mod = np.abs(w)
        if np.min(mod) < OVERLAP_MODULUS_MIN:
            raise NumericalError(
                f"overlap diagonal entry modulus {np.min(mod):.3e}: phase undefined"
            )
        return np.diag(w / mod), np.diag(mod).astype(complex), flags
    if case_tag == "t_d":
        U = np.zeros_like(W)
        R = np.zeros_like(W)
        for b in blocks:
            idx = np.ix_(b, b)
            Ub, Rb = polar_unitary(W[idx])
            U[idx] = Ub
            R[idx] = Rb
        return U, R, flags
    U, R = polar_unitary(W)
    return U, R, flags


def geometric_phase(
    frames: FrameTrajectory, k: int, case_tag: str = "general"
) -> HolonomyResult:
    """Holonomy data O(t_k, 0) = U(t_k, 0) @ Vpar(t_k) for one case.

    The connection is case-restricted before building the transporter and
    the overlap is case-restricted before its polar split, so U and Vpar
    belong to the same reduced problem and O is unitary.
    """
    _check_case(frames.blocks, case_tag)
    n = frames.n_steps
    if not -n <= k < n:
        raise ValueError(f"grid index {k} out of range for {n} samples")
    k = k % n

    conn = connection(frames)
    A_r = case_restrict(conn.samples, frames.blocks, case_tag)
    restricted = ConnectionSeries(
        grid=conn.grid, samples=A_r, herm_deviation=conn.herm_deviation,
        flags=list(conn.flags),
    )
    Vpar = transporter(restricted)[k]
    W = case_restrict(overlap(frames, k), frames.blocks, case_tag)
    U, R, polar_flags = _restricted_polar(W, frames.blocks, case_tag)
    O = U @ Vpar
    return HolonomyResult(
        O=O,
        U=U,
        Vpar=Vpar,
        R=R,
        trace_O=complex(np.trace(O)),
        eigenphases=unitary_eigenphases(O),
        case_tag=case_tag,
        flags=list(conn.flags) + polar_flags,
    )


def noncyclic_abelian_gp(frames: FrameTrajectory, level: int, k: int) -> float:
    """Noncyclic geometric phase of one nondegenerate level up to t_k.

    arg <level;0|level;t_k> plus the integrated diagonal connection
    (trapezoid rule), wrapped to (-pi, pi].  For a cyclic trajectory the
    overlap phase drops out and the pure holonomy integral remains.
    """
    n = frames.n_steps
    if not 0 <= level < frames.dim:
        raise ValueError(f"level {level} out of range")
    if not -n <= k < n:
        raise ValueError(f"grid index {k} out of range for {n} samples")
    k = k % n
    w = overlap(frames, k)[level, level]
    if abs(w) < OVERLAP_MODULUS_MIN:
        raise NumericalError(f"overlap modulus {abs(w):.3e}: noncyclic phase undefined")
    diag = connection(frames).samples[: k + 1, level, level].real
    integral = float(np.trapezoid(diag, dx=frames.grid.dt)) if k > 0 else 0.0
    total = float(np.angle(w)) + integral
    return float(principal_phase(total))


def parallel_residual(frames: FrameTrajectory, Vpar_series: np.ndarray) -> float:
    """Largest connection entry of the transported frame T = V @ Vpar.

    Parallel transport means i T^dag dT/dt vanishes; the returned value is
    the max-norm of that matrix over the grid (central differences inside,
    one-sided second-order stencils at the ends).
    """
    if Vpar_series.shape != frames.vectors.shape:
        raise ValueError("transporter series does not match the frames")
    T = np.einsum("kij,kjl->kil", frames.vectors, Vpar_series)
    dT = series_derivative(T, frames.grid.dt)
    res = np.einsum("kji,kjl->kil", T.conj(), dT)
    return float(np.max(np.abs(res)))


def nonabelian_witness(
    frames: FrameTrajectory, case_tag: str = "general", n_probe: int = 64
) -> dict[str, float]:
    """Two scalar diagnostics of path-ordering sensitivity.

    commutator_max: largest ||[A(t_i), A(t_j)]||_max over a probe subsample
    of the case-restricted connection.  reversal_gap: max-norm difference
    between the transporter and its reversed-order counterpart at the final
    time.  Both vanish for Abelian (commuting-connection) transport.
    """
    _check_case(frames.blocks, case_tag)
    conn = connection(frames)
    A = case_restrict(conn.samples, frames.blocks, case_tag)
    n = A.shape[0]
    probe = np.linspace(0, n - 1, min(n, n_probe)).astype(int)
    comm = 0.0
    for a in range(len(probe)):
        Ai = A[probe[a]]
        for b in range(a + 1, len(probe)):
            Aj = A[probe[b]]
            comm = max(comm, float(np.max(np.abs(Ai @ Aj - Aj @ Ai))))

    restricted = ConnectionSeries(grid=conn.grid, samples=A)
    forward = transporter(restricted)[-1]
    # Feeding the time-reversed samples yields the same interval factors
    # multiplied earliest-leftmost: the opposite ordering convention.
    reversed_conn = ConnectionSeries(grid=conn.grid, samples=A[::-1].copy())
    backward = transporter(reversed_conn)[-1]
    gap = float(np.max(np.abs(forward - backward)))
    return {"commutator_max": comm, "reversal_gap": gap}


def dissipative_free_block_solution(
    model: LindbladModel,
    frames: FrameTrajectory,
    left_block: int,
    right_block: int,
    c0_block: CMatrix,
) -> np.ndarray:
    """Closed-form coefficient block evolution when no dissipator acts.

    For vanishing coupling rates and no transitions between blocks, the
    coefficient block between degeneracy blocks mu (left) and mu' (right)
    evolves as

        c(t) = E_mu(t) c(0) E_mu'(t)^dag,
        E_mu(t) = Texp( i int_0^t (H + A)_mumu ),

    with H = -V^dag H0 V.  Rejects models whose rates do not vanish on the
    grid.  Returns the sampled block series (n_steps, |mu|, |mu'|).
    """
    if not model.is_closed(frames.grid.times):
        raise ValueError("dissipative-free solution requires vanishing coupling rates")
    blocks = frames.blocks
    if not (0 <= left_block < len(blocks) and 0 <= right_block < len(blocks)):
        raise ValueError("block index out of range")
    bl, br = blocks[left_block], blocks[right_block]
    c0_block = np.asarray(c0_block, dtype=complex)
    if c0_block.shape != (len(bl), len(br)):
        raise ValueError(f"initial block must be {len(bl)}x{len(br)}")

    conn = connection(frames)
    times = frames.grid.times
    V = frames.vectors
    n = frames.n_steps

    def block_generator(idx):
        sub = np.ix_(idx, idx)
        gen = np.empty((n, len(idx), len(idx)), dtype=complex)
        for j in range(n):
            H0 = np.asarray(model.hamiltonian(times[j]), dtype=complex)
            Hm = -V[j].conj().T @ H0 @ V[j]
            gen[j] = Hm[sub] + conn.samples[j][sub]
            gen[j] = 0.5 * (gen[j] + gen[j].conj().T)
        return gen

    E_left = transporter(ConnectionSeries(grid=frames.grid, samples=block_generator(bl)))
    E_right = transporter(ConnectionSeries(grid=frames.grid, samples=block_generator(br)))
    out = np.einsum("kij,jl,kml->kim", E_left, c0_block, E_right.conj())
    return out
