"""Exact ground states by Lanczos iteration in the S^z = 0 sector.

The Lanczos runs with full reorthogonalization (cheap at these sector sizes,
and it removes ghost eigenvalues), restarting from the current Ritz vector
whenever the Krylov space hits its cap.  The start vector comes from a seeded
RNG so the wavefunction gauge is reproducible, and the global sign is fixed
by making the largest-magnitude amplitude positive.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .lattice import BondList, HamiltonianAction, MAX_EXACT_SITES

WAVE_MAGIC = b"EBPWAVE1"


class LanczosError(RuntimeError):
    """Lanczos failed to converge; carries the best residual reached."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateGroundStateError(LanczosError):
    """Ground state is (near-)degenerate, so bipartition entropies would be basis-dependent."""


@dataclass
class Wavefunction:
    """Normalized real amplitude vector over the full 2^N spin basis."""

    n_sites: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.amplitudes.shape != (1 << self.n_sites,):
            raise ValueError(
                f"amplitude vector has shape {self.amplitudes.shape}, expected ({1 << self.n_sites},)"
            )
        nrm = np.linalg.norm(self.amplitudes)
        if abs(nrm - 1.0) > 1e-12:
            raise ValueError(f"wavefunction norm {nrm!r} is not 1 within 1e-12")

    def dump(self, path) -> None:
        """Binary dump: 16-byte header (magic, u32 n_sites, u32 reserved) + little-endian f64 amplitudes."""
        header = WAVE_MAGIC + struct.pack("<II", self.n_sites, 0)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.amplitudes.astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "Wavefunction":
        with open(path, "rb") as fh:
            header = fh.read(16)
            if len(header) != 16 or header[:8] != WAVE_MAGIC:
                raise ValueError(f"{path}: not a wavefunction dump (bad magic)")
            n_sites, _ = struct.unpack("<II", header[8:])
            amps = np.frombuffer(fh.read(), dtype="<f8")
        return cls(n_sites, amps.astype(float))


@dataclass
class GroundStateResult:
    energy: float
    wavefunction: Wavefunction
    residual: float
    gap_estimate: float


def sz_zero_basis(n_sites: int) -> np.ndarray:
    """Sorted basis states with equal numbers of up and down spins."""
    if n_sites % 2:
        raise ValueError("S^z = 0 sector requires an even number of sites")
    states = np.arange(1 << n_sites, dtype=np.uint32)
    return states[np.bitwise_count(states) == n_sites // 2]


def lanczos_ground(matvec, dim: int, v0: np.ndarray, tol: float = 1e-10,
                   max_krylov: int = 200, max_rounds: int = 30):
    """Lowest eigenpair of a symmetric operator given by ``matvec``.

    Returns (energy, vector, residual, gap_estimate) where the gap is the
    distance to the second Ritz value of the final Krylov space.  Raises
    LanczosError if the residual never reaches ``tol``.
    """
    v = np.asarray(v0, dtype=float)
    v = v / np.linalg.norm(v)
    if dim == 1:
        e = float(matvec(v)[0] / v[0])
        return e, v, 0.0, np.inf
    best_res = np.inf
    gap = np.inf
    for _ in range(max_rounds):
        m = min(max_krylov, dim)
        V = np.empty((m, dim))
        alphas = np.empty(m)
        betas = np.empty(m)
        V[0] = v
        k = 0
        for j in range(m):
            w = matvec(V[j])
            alphas[j] = V[j] @ w
            k = j + 1
            if k == m:
                break
            w -= alphas[j] * V[j]
            if j > 0:
                w -= betas[j - 1] * V[j - 1]
            # full reorthogonalization, twice for safety
            w -= V[:k].T @ (V[:k] @ w)
            w -= V[:k].T @ (V[:k] @ w)
            b = np.linalg.norm(w)
            if b < 1e-13:
                break  # exact invariant subspace
            betas[j] = b
            V[k] = w / b
        T = np.diag(alphas[:k])
        if k > 1:
            T += np.diag(betas[:k - 1], 1) + np.diag(betas[:k - 1], -1)
        theta, S = np.linalg.eigh(T)
        x = V[:k].T @ S[:, 0]
        x /= np.linalg.norm(x)
        res = float(np.linalg.norm(matvec(x) - theta[0] * x))
        best_res = min(best_res, res)
        if k > 1:
            gap = float(theta[1] - theta[0])
        if res <= tol:
            return float(theta[0]), x, res, gap
        v = x  # restart from the Ritz vector
    raise LanczosError(f"Lanczos did not reach residual {tol:g} (best {best_res:.3e})",
                       residual=best_res)


def ground_state(bonds: BondList, seed: int = 0, tol: float = 1e-10,
                 max_krylov: int = 200) -> GroundStateResult:
    """Exact ground state of the Heisenberg model defined by ``bonds``.

    The Lanczos runs in the S^z = 0 sector (which hosts the singlet ground
    states of the models treated here) and the result is embedded back into
    the full 2^N basis.  The gap is estimated by a second, deflated Lanczos
    run (the found state is shifted upward), which also sees a degenerate
    partner state that a single Krylov sequence cannot; an estimated gap
    below 1e-10 raises DegenerateGroundStateError, since bipartition
    entropies would then be basis-dependent.
    """
    n = bonds.n_sites
    if n % 2 or n > MAX_EXACT_SITES:
        raise ValueError(f"exact solve requires even n_sites <= {MAX_EXACT_SITES}, got {n}")
    basis = sz_zero_basis(n)
    H = HamiltonianAction(bonds, basis)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(H.dim)
    energy, x, res, _ = lanczos_ground(H, H.dim, v0, tol=tol, max_krylov=max_krylov)
    if H.dim > 1:
        shift = abs(energy) * 10 + 10

        def deflated(v):
            return H(v) + (shift * (x @ v)) * x

        w0 = rng.standard_normal(H.dim)
        w0 -= (x @ w0) * x
        second, _, _, _ = lanczos_ground(deflated, H.dim, w0, tol=1e-8,
                                         max_krylov=max_krylov)
        gap = second - energy
    else:
        gap = np.inf
    if gap < 1e-10:
        raise DegenerateGroundStateError(
            f"ground state is near-degenerate (gap estimate {gap:.3e})", residual=res)
    # fix the global sign, then embed into the full basis
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    full = np.zeros(1 << n)
    full[basis] = x
    full /= np.linalg.norm(full)
    return GroundStateResult(float(energy), Wavefunction(n, full), res, float(gap))
