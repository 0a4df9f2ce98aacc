"""MPS site tensors, blocking, injectivity maps, and interpolation families.

Index conventions, fixed globally:
  * site tensor entries are indexed (physical, left bond, right bond);
  * multi-site physical indices are big-endian (first site most significant);
  * the virtual pair (alpha, beta) of an injectivity map is flattened
    row-major, i.e. column index = alpha * D + beta.

The AKLT family uses the qutrit ordering (+1, 0, -1) for the physical basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import SizeGuardError

# Dense statevector work refuses Hilbert-space dimensions at or above this.
SIZE_GUARD = 2**20

_SQRT2 = np.sqrt(2.0)


def _frozen_complex(array) -> np.ndarray:
    out = np.ascontiguousarray(array, dtype=complex)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SiteTensor:
    """A single MPS tensor A^sigma_{alpha beta}, stored as a (d, D, D) array."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries)
        if entries.ndim != 3 or entries.shape[1] != entries.shape[2]:
            raise ValueError(f"site tensor must have shape (d, D, D), got {entries.shape}")
        d, bond = entries.shape[0], entries.shape[1]
        if d < 2:
            raise ValueError(f"physical dimension must be >= 2, got {d}")
        if bond < 1:
            raise ValueError(f"bond dimension must be >= 1, got {bond}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("site tensor entries must be finite")
        object.__setattr__(self, "entries", _frozen_complex(entries))

    @property
    def phys_dim(self) -> int:
        return self.entries.shape[0]

    @property
    def bond_dim(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class Mps:
    """A periodic chain of site tensors."""

    sites: tuple[SiteTensor, ...]
    translation_invariant: bool

    def __post_init__(self):
        sites = tuple(self.sites)
        if len(sites) < 2:
            raise ValueError(f"an MPS needs at least 2 sites, got {len(sites)}")
        for j, site in enumerate(sites):
            nxt = sites[(j + 1) % len(sites)]
            if site.bond_dim != nxt.bond_dim:
                raise ValueError("adjacent bond dimensions must match cyclically")
        if self.translation_invariant:
            first = sites[0].entries
            for site in sites[1:]:
                if site.entries.shape != first.shape or not np.array_equal(site.entries, first):
                    raise ValueError("translation-invariant MPS requires identical site tensors")
        object.__setattr__(self, "sites", sites)

    @property
    def n_sites(self) -> int:
        return len(self.sites)


@dataclass(frozen=True)
class InjectivityMap:
    """The virtual-to-physical map of a block of L sites.

    ``matrix`` has shape (d**L, D**2); the row index runs over physical
    block states (big-endian), the column index over virtual pairs
    (alpha, beta) flattened row-major.  Entry (sigma_1..sigma_L, (alpha, beta))
    equals (A^{sigma_1} ... A^{sigma_L})_{alpha beta}.
    """

    block_len: int
    phys_dim: int
    bond_dim: int
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        rows, cols = matrix.shape
        if cols != self.bond_dim**2:
            raise ValueError("column count must equal D**2")
        if rows != self.phys_dim**self.block_len:
            raise ValueError("row count must equal d**L")
        object.__setattr__(self, "matrix", _frozen_complex(matrix))


def make_mps(tensor: SiteTensor, n_sites: int) -> Mps:
    """Build a translation-invariant periodic MPS from one site tensor."""
    if n_sites < 2:
        raise ValueError(f"n_sites must be >= 2, got {n_sites}")
    return Mps(sites=(tensor,) * n_sites, translation_invariant=True)


def contract_to_statevector(mps: Mps) -> np.ndarray:
    """Contract a periodic MPS into the (unnormalized) dense state vector.

    The result is indexed big-endian over the physical sites.  Refuses
    chains whose Hilbert space reaches the size guard.
    """
    dim = 1
    for site in mps.sites:
        dim *= site.phys_dim
        if dim >= SIZE_GUARD:
            raise SizeGuardError(f"statevector dimension {dim} reaches the guard {SIZE_GUARD}")
    bond = mps.sites[0].bond_dim
    # running tensor of shape (d^k, D, D): partial products over the first k sites
    acc = mps.sites[0].entries
    for site in mps.sites[1:]:
        acc = np.einsum("iab,sbc->isac", acc, site.entries)
        acc = acc.reshape(-1, bond, bond)
    return np.trace(acc, axis1=1, axis2=2)


def block_tensor(tensor: SiteTensor, block_len: int) -> InjectivityMap:
    """Block ``block_len`` copies of a tensor into one virtual-to-physical map."""
    if block_len < 1:
        raise ValueError(f"block_len must be >= 1, got {block_len}")
    d, bond = tensor.phys_dim, tensor.bond_dim
    if d**block_len >= SIZE_GUARD:
        raise SizeGuardError(f"blocked physical dimension {d**block_len} reaches the guard")
    acc = tensor.entries
    for _ in range(block_len - 1):
        acc = np.einsum("iab,sbc->isac", acc, tensor.entries).reshape(-1, bond, bond)
    return InjectivityMap(
        block_len=block_len,
        phys_dim=d,
        bond_dim=bond,
        matrix=acc.reshape(d**block_len, bond * bond),
    )


def is_injective(imap: InjectivityMap, tol: float = 1e-10) -> bool:
    """True iff the map has full numerical column rank D**2."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    svals = np.linalg.svd(imap.matrix, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return False
    rank = int(np.count_nonzero(svals > tol * svals[0]))
    return rank == imap.bond_dim**2


def aklt_tensor(lam: float) -> SiteTensor:
    """AKLT interpolation tensor; product state at lam=0, AKLT state at lam=1.

    Physical ordering is (+1, 0, -1).
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    a_plus = np.array([[0.0, -lam], [0.0, 0.0]])
    a_zero = np.array([[1.0 / _SQRT2, 0.0], [0.0, -lam / _SQRT2]])
    a_minus = np.array([[0.0, 0.0], [lam, 0.0]])
    return SiteTensor(entries=np.stack([a_plus, a_zero, a_minus]))


def ghz_tensor(lam: float) -> SiteTensor:
    """GHZ/cluster interpolation tensor; GHZ point at lam=0, cluster state at lam=1."""
    if not -1.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [-1, 1], got {lam}")
    a0 = np.array([[0.0, 0.0], [1.0, 1.0]])
    a1 = np.array([[1.0, lam], [0.0, 0.0]])
    return SiteTensor(entries=np.stack([a0, a1]))


def expm_hermitian(k: np.ndarray, prefactor: complex = 1.0) -> np.ndarray:
    """exp(prefactor * K) for Hermitian K, via eigendecomposition."""
    evals, evecs = np.linalg.eigh(k)
    return (evecs * np.exp(prefactor * evals)) @ evecs.conj().T


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Hermitized complex Ginibre matrix, normalized to unit spectral radius."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    k = (g + g.conj().T) / 2.0
    radius = np.max(np.abs(np.linalg.eigvalsh(k)))
    return k / radius


# Singlet amplitudes of one virtual pair: omega[a, b] on (first, second) pair site.
PAIR_STATE = np.array([[0.0, 1.0], [-1.0, 0.0]]) / _SQRT2

# Two-qubit unitary taking |up,up> to the singlet (|ud> - |du>)/sqrt(2).
# The remaining columns are an arbitrary but fixed orthonormal completion.
PAIR_UNITARY = np.array(
    [
        [0.0, 0.0, 1.0, 0.0],
        [1.0 / _SQRT2, 1.0 / _SQRT2, 0.0, 0.0],
        [-1.0 / _SQRT2, 1.0 / _SQRT2, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)


@dataclass(frozen=True)
class RandomMpsFamily:
    """Deterministic family of random injective MPS built from entangled pairs.

    The chain state is a product of singlet pairs with the two-site map
    P(lam) = exp(lam * K1) @ exp(1j * K2 * t) applied across adjacent sites
    of consecutive pairs.  K1 and K2 are seeded Hermitian draws.
    """

    k1: np.ndarray
    k2: np.ndarray
    t: float
    seed: int
    pair_state_dim: int = 2

    def __post_init__(self):
        for name, k in (("k1", self.k1), ("k2", self.k2)):
            k = np.asarray(k, dtype=complex)
            if np.max(np.abs(k - k.conj().T)) > 1e-12:
                raise ValueError(f"{name} must be Hermitian to 1e-12 in max-norm")
            object.__setattr__(self, name, _frozen_complex(k))

    @classmethod
    def from_seed(cls, seed: int, t: float = 0.0) -> "RandomMpsFamily":
        rng = np.random.default_rng(seed)
        k1 = random_hermitian(rng, 4)
        k2 = random_hermitian(rng, 4)
        return cls(k1=k1, k2=k2, t=t, seed=seed)

    def positive_map(self, lam: float) -> np.ndarray:
        """The two-site map P = Q W = exp(lam K1) exp(i K2 t)."""
        q = expm_hermitian(self.k1, lam)
        w = expm_hermitian(self.k2, 1j * self.t)
        return q @ w

    def inverse_map(self, lam: float) -> np.ndarray:
        return expm_hermitian(self.k2, -1j * self.t) @ expm_hermitian(self.k1, -lam)


def random_family_tensor(family: RandomMpsFamily, lam: float) -> SiteTensor:
    """Blocked two-spin site tensor (d=4, D=2) of the random family at lam.

    One blocked site holds the second leg of one singlet and the first leg
    of the next, with P applied inside the block; the singlets become the
    virtual bonds.
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    d = family.pair_state_dim
    # unmapped tensor: entries[(u, v), alpha, beta] = omega[alpha, u] * delta(v, beta)
    bare = np.einsum("au,vb->uvab", PAIR_STATE, np.eye(d)).reshape(d * d, d, d)
    mapped = np.tensordot(family.positive_map(lam), bare, axes=(1, 0))
    return SiteTensor(entries=mapped)


def random_family_chain_state(family: RandomMpsFamily, lam: float, n_spins: int) -> np.ndarray:
    """Dense chain state on n_spins spin-1/2 sites: singlet pairs, then P maps.

    Pairs sit on sites (0,1), (2,3), ...; the maps act on (1,2), (3,4), ...,
    (n-1, 0).  Used as the reference for the pair-construction Hamiltonian.
    """
    if n_spins % 2 or n_spins < 4:
        raise ValueError("n_spins must be even and >= 4")
    dim = 2**n_spins
    if dim >= SIZE_GUARD:
        raise SizeGuardError(f"chain dimension {dim} reaches the guard")
    state = PAIR_STATE.ravel()
    for _ in range(n_spins // 2 - 1):
        state = np.kron(state, PAIR_STATE.ravel())
    p = family.positive_map(lam)
    for j in range(1, n_spins, 2):
        state = apply_two_site(p, state, j, (j + 1) % n_spins, n_spins)
    return state


def apply_two_site(op: np.ndarray, state: np.ndarray, i: int, j: int, n_spins: int) -> np.ndarray:
    """Apply a two-qubit operator to sites (i, j) of a spin-1/2 chain state."""
    psi = state.reshape((2,) * n_spins)
    psi = np.moveaxis(psi, (i, j), (0, 1)).reshape(4, -1)
    psi = (op @ psi).reshape((2, 2) + (2,) * (n_spins - 2))
    psi = np.moveaxis(psi, (0, 1), (i, j))
    return psi.reshape(-1)
