"""Model registry: interpolation families, kernel bases, templates, and
canonical reference Hamiltonians for the three supported models.

For the random family, "n_sites" counts blocked d=4 sites; the underlying
spin-1/2 chain has twice as many spins and carries the 5-local canonical
Hamiltonian of the pair construction.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import parent, symmetry, tensors

MODEL_NAMES = ("aklt", "ghz", "random")

LAMBDA_RANGES = {"aklt": (0.0, 1.0), "ghz": (-1.0, 1.0), "random": (0.0, 1.0)}

# blocking length used for the kernel basis (for 'random', in blocked sites)
BLOCK_LEN = {"aklt": 2, "ghz": 3, "random": 2}

PHYS_DIM = {"aklt": 3, "ghz": 2, "random": 4}


def site_tensor(model: str, lam: float, family: tensors.RandomMpsFamily | None = None):
    if model == "aklt":
        return tensors.aklt_tensor(lam)
    if model == "ghz":
        return tensors.ghz_tensor(lam)
    if model == "random":
        if family is None:
            raise ValueError("the random model needs a RandomMpsFamily")
        return tensors.random_family_tensor(family, lam)
    raise ValueError(f"unknown model {model!r}")


def kernel_basis(
    model: str,
    lam: float,
    family: tensors.RandomMpsFamily | None = None,
    convention: str = "closed-form",
) -> parent.KernelBasis:
    """Kernel basis at lam: closed form for aklt/ghz, SVD for the random family."""
    if convention not in ("closed-form", "svd"):
        raise ValueError(f"unknown basis convention {convention!r}")
    if model == "random" or convention == "svd":
        imap = tensors.block_tensor(site_tensor(model, lam, family), BLOCK_LEN[model])
        basis = parent.kernel_basis_svd(imap)
        return parent.KernelBasis(
            block_len=basis.block_len,
            phys_dim=basis.phys_dim,
            vectors=basis.vectors,
            lambda_tag=lam,
            convention="svd",
        )
    if model == "aklt":
        return parent.aklt_kernel_basis(lam)
    if model == "ghz":
        return parent.ghz_kernel_basis(lam)
    raise ValueError(f"unknown model {model!r}")


def template(model: str) -> symmetry.STemplate | None:
    """Default mixing-matrix template (None for the unconstrained random model)."""
    if model == "random":
        return None
    return symmetry.symmetric_s_template(model)


def ground_sector(model: str, n_sites: int) -> symmetry.SectorMap:
    return symmetry.build_sector(model, n_sites, symmetry.ground_sector_spec(model))


def _two_site(op: np.ndarray, i: int, j: int, n_spins: int) -> sp.csr_matrix:
    return sp.csr_matrix(parent.embed_sites(op, [i, j], 2, n_spins))


def random_canonical_hamiltonian(
    family: tensors.RandomMpsFamily, lam: float, n_spins: int, normalize: bool = True
) -> parent.SparseHamiltonian:
    """The pair-construction reference Hamiltonian on the spin-1/2 chain.

    The term at a pair undoes the two overlapping maps and the
    pair-preparation unitary, then penalizes any down component on the
    pair's sites; it acts on a window of consecutive spins around the pair.

    With ``normalize`` (the default) each pair term is scaled to unit trace
    on its local support, the same convention the kernel-projector family
    carries through tr(S) = 1; gaps of the two constructions are then
    directly comparable.  ``normalize=False`` keeps the construction's raw
    per-spin sum (each pair term entering twice, unscaled).
    """
    if n_spins % 2 or n_spins < 4:
        raise ValueError("n_spins must be even and >= 4")
    pinv = family.inverse_map(lam)
    u_inv = tensors.PAIR_UNITARY.conj().T
    down = np.diag([0.0, 1.0])
    dim = 2**n_spins
    support = min(4, n_spins)  # the term touches the pair plus one spin each side
    total = sp.csr_matrix((dim, dim), dtype=complex)
    for left in range(0, n_spins, 2):
        right = left + 1
        op = _two_site(u_inv, left, right, n_spins)
        op = op @ _two_site(pinv, right, (right + 1) % n_spins, n_spins)
        op = op @ _two_site(pinv, (left - 1) % n_spins, left, n_spins)
        penalty = parent.embed_sites(down, [left], 2, n_spins) + parent.embed_sites(
            down, [right], 2, n_spins
        )
        term = op.conj().T @ (sp.csr_matrix(penalty) @ op)
        if normalize:
            local_trace = term.diagonal().sum().real / 2 ** (n_spins - support)
            term = term / local_trace
        else:
            term = 2.0 * term
        total = total + term
    total = (total + total.conj().T) / 2.0
    return parent.SparseHamiltonian(matrix=total.tocsr(), locality=support, n_terms=n_spins)


def canonical_reference_gap(
    model: str,
    lam: float,
    n_sites: int,
    family: tensors.RandomMpsFamily | None = None,
    deg_tol: float | None = None,
):
    """Gap of the model's canonical reference Hamiltonian.

    aklt/ghz: the assembled parent Hamiltonian at S = 1/M (full space).
    random: the 5-local pair-construction Hamiltonian on the spin chain.
    """
    from . import spectra

    if model == "random":
        if family is None:
            raise ValueError("the random model needs a RandomMpsFamily")
        ham = random_canonical_hamiltonian(family, lam, 2 * n_sites)
    else:
        basis = kernel_basis(model, lam)
        ham = parent.assemble(basis, parent.canonical_mixing(basis.size), n_sites)
    return spectra.spectral_gap(ham, deg_tol=deg_tol)
