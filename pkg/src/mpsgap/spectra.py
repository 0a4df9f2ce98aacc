"""Lowest eigenpairs, spectral gaps with degeneracy detection, and the
excited-state overlap matrix that pairs with the mixing matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError
from .parent import KernelBasis, SparseHamiltonian
from .symmetry import SectorMap

DENSE_CUTOFF = 4096


def _as_sparse(hamiltonian) -> sp.csr_matrix:
    if isinstance(hamiltonian, SparseHamiltonian):
        return hamiltonian.matrix
    return sp.csr_matrix(hamiltonian)


def operator_norm_estimate(hmat: sp.csr_matrix) -> float:
    """Cheap upper bound on the spectral norm: max absolute row sum."""
    if hmat.nnz == 0:
        return 0.0
    return float(abs(hmat).sum(axis=1).max())


def default_deg_tol(hmat: sp.csr_matrix) -> float:
    return 1e-8 * max(1.0, operator_norm_estimate(hmat))


@dataclass
class EigenResult:
    """The k lowest eigenpairs of a Hermitian operator, sorted ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, matching eigenvalues
    ground_degeneracy: int
    solver: str
    residuals: np.ndarray
    deg_tol: float


def _deterministic_start(dim: int) -> np.ndarray:
    rng = np.random.default_rng(1234)
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def lowest_eigenpairs(hamiltonian, k: int = 2, deg_tol: float | None = None) -> EigenResult:
    """Compute the k lowest eigenpairs; dense below DENSE_CUTOFF, Lanczos above.

    The iterative path grows k until the ground-state cluster (eigenvalues
    within deg_tol of the minimum) is fully resolved or the space is
    exhausted.
    """
    hmat = _as_sparse(hamiltonian)
    dim = hmat.shape[0]
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > dim:
        raise ValueError(f"k={k} exceeds the operator dimension {dim}")
    if deg_tol is None:
        deg_tol = default_deg_tol(hmat)

    if hmat.nnz == 0:
        vecs = np.zeros((dim, k), dtype=complex)
        vecs[np.arange(k), np.arange(k)] = 1.0
        return EigenResult(
            eigenvalues=np.zeros(k),
            eigenvectors=vecs,
            ground_degeneracy=dim,
            solver="dense",
            residuals=np.zeros(k),
            deg_tol=deg_tol,
        )

    if dim < DENSE_CUTOFF:
        evals, evecs = np.linalg.eigh(hmat.toarray())
        degeneracy = int(np.count_nonzero(evals - evals[0] < deg_tol))
        kk = max(k, min(dim, degeneracy + 2))
        vals, vecs, solver = evals[:kk], evecs[:, :kk], "dense"
    else:
        kk = k
        while True:
            kk = min(kk, dim - 1)
            try:
                vals, vecs = spla.eigsh(
                    hmat, k=kk, which="SA", v0=_deterministic_start(dim), maxiter=max(4000, 40 * kk)
                )
            except spla.ArpackNoConvergence as err:
                res = None
                if getattr(err, "eigenvectors", None) is not None and err.eigenvectors.size:
                    res = _residuals(hmat, err.eigenvalues, err.eigenvectors)
                raise ConvergenceError("iterative eigensolver did not converge", residuals=res) from err
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
            cluster = int(np.count_nonzero(vals - vals[0] < deg_tol))
            # need the cluster plus two states above it to report a reliable gap
            if kk >= cluster + 2 or kk >= dim - 1:
                break
            kk = min(dim - 1, max(cluster + 2, 2 * kk))
        degeneracy = int(np.count_nonzero(vals - vals[0] < deg_tol))
        solver = "iterative"

    residuals = _residuals(hmat, vals, vecs)
    return EigenResult(
        eigenvalues=np.asarray(vals, dtype=float),
        eigenvectors=np.asarray(vecs, dtype=complex),
        ground_degeneracy=degeneracy,
        solver=solver,
        residuals=residuals,
        deg_tol=deg_tol,
    )


def _residuals(hmat, vals, vecs) -> np.ndarray:
    res = hmat @ vecs - vecs * np.asarray(vals)[None, :]
    return np.linalg.norm(res, axis=0)


@dataclass
class GapResult:
    """Spectral gap report; degenerate ground spaces report a zero gap."""

    gap: float
    excited: np.ndarray | None
    ground_energy: float
    ground_degeneracy: int
    excited_degenerate: bool
    eigenvalues: np.ndarray
    solver: str


def spectral_gap(hamiltonian, deg_tol: float | None = None) -> GapResult:
    """Gap above the ground cluster, with the matching excited eigenvector."""
    hmat = _as_sparse(hamiltonian)
    if deg_tol is None:
        deg_tol = default_deg_tol(hmat)
    res = lowest_eigenpairs(hamiltonian, k=2, deg_tol=deg_tol)
    vals = res.eigenvalues
    e0 = vals[0]
    deg = res.ground_degeneracy
    if deg >= hmat.shape[0]:
        return GapResult(0.0, None, float(e0), deg, False, vals, res.solver)
    if deg < vals.size:
        excited = res.eigenvectors[:, deg]
        gap = float(vals[deg] - e0)
        excited_degenerate = deg + 1 < vals.size and vals[deg + 1] - vals[deg] < deg_tol
    else:
        # dense path always resolves the cluster; iterative path grew k past it
        excited, gap, excited_degenerate = None, 0.0, False
    if deg > 1:
        gap = 0.0
    return GapResult(gap, excited, float(e0), deg, excited_degenerate, vals, res.solver)


@dataclass
class OverlapMatrix:
    """Gram-type matrix of excited-state overlaps with the shifted kernel vectors.

    Pairing it with a mixing matrix S via sum_ab S_ab * entries_ab gives the
    excited-state energy (the gap, for a converged first excited state).
    """

    entries: np.ndarray
    excited_energy: float = field(default=np.nan)


def chi_matrix(
    excited: np.ndarray,
    basis: KernelBasis,
    n_sites: int,
    sector: SectorMap | None = None,
    excited_energy: float = np.nan,
) -> OverlapMatrix:
    """Overlap matrix summed over all cyclic placements of the kernel block.

    If a sector is given, the excited vector lives in the sector and is
    lifted through the isometry before overlaps are taken.
    """
    d, block, m = basis.phys_dim, basis.block_len, basis.size
    psi = np.asarray(excited, dtype=complex).ravel()
    if sector is not None:
        if psi.size != sector.dim:
            raise ValueError("excited vector does not match the sector dimension")
        psi = sector.isometry @ psi
    if psi.size != d**n_sites:
        raise ValueError("excited vector does not match the chain dimension")
    tensor = psi.reshape((d,) * n_sites)
    chi = np.zeros((m, m), dtype=complex)
    axes_all = list(range(n_sites))
    for i in range(n_sites):
        local_axes = [(i + kk) % n_sites for kk in range(block)]
        rest_axes = [a for a in axes_all if a not in local_axes]
        blockmat = tensor.transpose(local_axes + rest_axes).reshape(d**block, -1)
        u = basis.vectors.conj().T @ blockmat  # u[alpha, rest] = <phi_alpha | psi>_rest
        chi += u.conj() @ u.T
    chi = (chi + chi.conj().T) / 2.0
    return OverlapMatrix(entries=chi, excited_energy=excited_energy)


def pair_energy(smatrix: np.ndarray, chi: np.ndarray) -> float:
    """sum_ab S_ab chi_ab = tr(S chi^T), real for Hermitian inputs."""
    return float(np.real(np.sum(np.asarray(smatrix) * np.asarray(chi))))
