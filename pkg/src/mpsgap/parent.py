"""Kernel bases, mixing matrices, and sparse parent-Hamiltonian assembly.

The Hamiltonian is a cyclic sum of one local term per site; the local term
mixes projectors onto an orthonormal basis of the orthogonal complement of
the blocked tensor's image with a positive-definite, trace-one matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import SizeGuardError
from .tensors import SIZE_GUARD, InjectivityMap

KERNEL_RANK_TOL = 1e-10


@dataclass(frozen=True)
class KernelBasis:
    """Orthonormal basis of the left-null space of an injectivity map.

    ``vectors`` holds the basis as columns of a (d**L, M) array.
    """

    block_len: int
    phys_dim: int
    vectors: np.ndarray
    lambda_tag: float
    convention: str

    def __post_init__(self):
        vectors = np.ascontiguousarray(self.vectors, dtype=complex)
        if vectors.shape[0] != self.phys_dim**self.block_len:
            raise ValueError("basis vectors must have length d**L")
        vectors.flags.writeable = False
        object.__setattr__(self, "vectors", vectors)

    @property
    def size(self) -> int:
        """Number of basis vectors M."""
        return self.vectors.shape[1]


def _fix_phases(columns: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    out = columns.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        k = int(np.argmax(np.abs(col)))
        pivot = col[k]
        if pivot != 0:
            out[:, j] = col * (np.abs(pivot) / pivot)
    return out


def kernel_basis_svd(imap: InjectivityMap, tol: float = KERNEL_RANK_TOL) -> KernelBasis:
    """Orthonormal basis of (Im T)^perp by SVD, with pinned column phases."""
    u, svals, _ = np.linalg.svd(imap.matrix, full_matrices=True)
    if svals.size and svals[0] > 0:
        rank = int(np.count_nonzero(svals > tol * svals[0]))
    else:
        rank = 0
    null = _fix_phases(u[:, rank:])
    return KernelBasis(
        block_len=imap.block_len,
        phys_dim=imap.phys_dim,
        vectors=null,
        lambda_tag=np.nan,
        convention="svd",
    )


def aklt_kernel_basis(lam: float) -> KernelBasis:
    """Closed-form five-vector kernel basis of the blocked AKLT-family tensor.

    At lam=1 the vectors are the Dicke states of the two-site spin-2 subspace.
    Qutrit ordering (+1, 0, -1); two-site rows are big-endian.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    vecs = np.zeros((9, 5), dtype=complex)
    vecs[0, 0] = 1.0  # |+1,+1>
    n2 = np.sqrt(1.0 + lam**2)
    vecs[1, 1] = 1.0 / n2  # |+1,0>
    vecs[3, 1] = lam / n2  # |0,+1>
    n3 = np.sqrt(1.0 + 5.0 * lam**4)
    vecs[2, 2] = 1.0 / n3  # |+1,-1>
    vecs[4, 2] = 2.0 * lam**2 / n3  # |0,0>
    vecs[6, 2] = lam**2 / n3  # |-1,+1>
    vecs[5, 3] = 1.0 / n2  # |0,-1>
    vecs[7, 3] = lam / n2  # |-1,0>
    vecs[8, 4] = 1.0  # |-1,-1>
    return KernelBasis(
        block_len=2, phys_dim=3, vectors=vecs, lambda_tag=lam, convention="aklt-closed-form"
    )


def ghz_kernel_basis(lam: float) -> KernelBasis:
    """Closed-form four-vector kernel basis of the three-site GHZ-family block.

    Well-defined for every lam, but spans the full orthogonal complement only
    at lam != 0 (the GHZ point itself is not injective).
    """
    if not -1.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [-1, 1], got {lam}")
    vecs = np.zeros((8, 4), dtype=complex)
    n1 = np.sqrt(lam**2 + 1.0)
    vecs[0b000, 0] = lam / n1
    vecs[0b010, 0] = -1.0 / n1
    vecs[0b001, 1] = 1.0 / np.sqrt(2.0)
    vecs[0b011, 1] = -1.0 / np.sqrt(2.0)
    vecs[0b100, 2] = -1.0 / np.sqrt(2.0)
    vecs[0b110, 2] = 1.0 / np.sqrt(2.0)
    vecs[0b101, 3] = -1.0 / n1
    vecs[0b111, 3] = lam / n1
    return KernelBasis(
        block_len=3, phys_dim=2, vectors=vecs, lambda_tag=lam, convention="ghz-closed-form"
    )


@dataclass(frozen=True)
class MixingMatrix:
    """Positive-definite, trace-one mixing matrix over kernel projectors.

    Stored through its Hermitian generator: matrix = exp(-generator),
    normalized to unit trace.
    """

    generator: np.ndarray
    matrix: np.ndarray
    structure: object | None = None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def s_from_generator(generator: np.ndarray, structure=None) -> MixingMatrix:
    """Map a Hermitian generator B to the mixing matrix exp(-B)/tr(exp(-B)).

    If ``structure`` (a parameter template) is given, B is first projected
    onto the template's allowed subspace.
    """
    b = np.asarray(generator, dtype=complex)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError("generator must be a square matrix")
    if np.max(np.abs(b - b.conj().T)) > 1e-10:
        raise ValueError("generator must be Hermitian to 1e-10")
    if structure is not None:
        b = structure.project_generator(b)
    evals, evecs = np.linalg.eigh(b)
    weights = np.exp(-(evals - evals.min()))  # shift for overflow safety
    weights /= weights.sum()
    s = (evecs * weights) @ evecs.conj().T
    s = (s + s.conj().T) / 2.0
    return MixingMatrix(generator=b, matrix=s, structure=structure)


def s_from_matrix(s: np.ndarray, structure=None) -> MixingMatrix:
    """Wrap an explicit positive-definite, trace-one matrix, recovering B = -log S."""
    s = np.asarray(s, dtype=complex)
    if np.max(np.abs(s - s.conj().T)) > 1e-10:
        raise ValueError("mixing matrix must be Hermitian to 1e-10")
    if abs(np.trace(s).real - 1.0) > 1e-10:
        raise ValueError("mixing matrix must have unit trace")
    evals, evecs = np.linalg.eigh(s)
    if evals.min() <= 0:
        raise ValueError("mixing matrix must be positive definite")
    gen = (evecs * (-np.log(evals))) @ evecs.conj().T
    gen = (gen + gen.conj().T) / 2.0
    return MixingMatrix(generator=gen, matrix=(s + s.conj().T) / 2.0, structure=structure)


def canonical_mixing(size: int) -> MixingMatrix:
    """The canonical choice: identity / M."""
    return s_from_generator(np.zeros((size, size)))


@dataclass(frozen=True)
class SparseHamiltonian:
    """Assembled parent Hamiltonian (or its sector compression)."""

    matrix: sp.csr_matrix
    locality: int
    n_terms: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _digit_table(d: int, n_sites: int) -> np.ndarray:
    """(n_sites, d**n) table of base-d digits, big-endian."""
    idx = np.arange(d**n_sites, dtype=np.int64)
    return np.stack([(idx // d ** (n_sites - 1 - j)) % d for j in range(n_sites)])


def embed_sites(op: np.ndarray | sp.spmatrix, sites, d: int, n_sites: int) -> sp.coo_matrix:
    """Embed a k-site operator at the given (ordered) sites of a d-level chain.

    ``op`` is (d**k, d**k) with big-endian rows over ``sites``; the result is
    the (d**n, d**n) operator acting as identity elsewhere.
    """
    sites = list(sites)
    k = len(sites)
    if len(set(sites)) != k:
        raise ValueError("sites must be distinct")
    dim = d**n_sites
    if dim >= SIZE_GUARD:
        raise SizeGuardError(f"embedding dimension {dim} reaches the guard {SIZE_GUARD}")
    rest = [j for j in range(n_sites) if j not in sites]
    digits = _digit_table(d, n_sites)
    local = np.zeros(dim, dtype=np.int64)
    for pos, site in enumerate(sites):
        local += digits[site] * d ** (k - 1 - pos)
    rest_val = np.zeros(dim, dtype=np.int64)
    for pos, site in enumerate(rest):
        rest_val += digits[site] * d ** (len(rest) - 1 - pos)
    # grouped index g = (local block index, remaining sites); invert to standard order
    grouped = local * d ** (n_sites - k) + rest_val
    to_standard = np.empty(dim, dtype=np.int64)
    to_standard[grouped] = np.arange(dim, dtype=np.int64)

    op = sp.coo_matrix(op)
    m = d ** (n_sites - k)
    span = np.arange(m, dtype=np.int64)
    rows = (op.row.astype(np.int64)[:, None] * m + span[None, :]).ravel()
    cols = (op.col.astype(np.int64)[:, None] * m + span[None, :]).ravel()
    data = np.repeat(op.data, m)
    return sp.coo_matrix((data, (to_standard[rows], to_standard[cols])), shape=(dim, dim))


def _assemble_matrix(basis: KernelBasis, weights: np.ndarray, n_sites: int, sector=None) -> sp.csr_matrix:
    """Cyclic sum of local terms Phi @ weights @ Phi^dagger; no positivity checks."""
    d, block = basis.phys_dim, basis.block_len
    dim = d**n_sites
    if dim >= SIZE_GUARD:
        raise SizeGuardError(f"Hilbert-space dimension {dim} reaches the guard {SIZE_GUARD}")
    if sector is not None and sector.full_dim != dim:
        raise ValueError("sector isometry dimension does not match the chain")
    out_dim = sector.dim if sector is not None else dim
    if basis.size == 0:
        return sp.csr_matrix((out_dim, out_dim), dtype=complex)
    local = basis.vectors @ np.asarray(weights, dtype=complex) @ basis.vectors.conj().T
    local = (local + local.conj().T) / 2.0
    total = sp.coo_matrix((dim, dim), dtype=complex)
    for i in range(n_sites):
        placement = [(i + kk) % n_sites for kk in range(block)]
        total += embed_sites(local, placement, d, n_sites)
    hmat = total.tocsr()
    if sector is not None:
        w = sector.isometry
        hmat = sp.csr_matrix(w.conj().T @ (hmat @ w))
        hmat = (hmat + hmat.conj().T) / 2.0
    return hmat


def assemble(basis: KernelBasis, s: MixingMatrix, n_sites: int, sector=None) -> SparseHamiltonian:
    """Assemble the full parent Hamiltonian, optionally compressed to a sector.

    Raises for chains too short for overlapping terms, for size-guard
    violations, and for sector/operator dimension mismatches.  An empty
    kernel basis yields the zero operator.
    """
    if n_sites < basis.block_len + 1:
        raise ValueError(f"n_sites must be >= block_len + 1 = {basis.block_len + 1}, got {n_sites}")
    if basis.size and s.size != basis.size:
        raise ValueError("mixing matrix size does not match the kernel basis")
    hmat = _assemble_matrix(basis, s.matrix, n_sites, sector=sector)
    return SparseHamiltonian(matrix=hmat, locality=basis.block_len, n_terms=n_sites)
