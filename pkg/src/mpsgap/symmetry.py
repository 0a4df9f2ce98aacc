"""Symmetry sectors, their isometries, and reduced parameter templates.

All symmetry operators used here permute computational basis states:
translation T (cyclic right shift of the site string), site reversal R,
the AKLT flip-reflection Q = (flip m -> -m on every site) o R, and the
GHZ parity P (flip every qubit).  A sector is the simultaneous eigenspace
of the selected operators; its orthonormal basis consists of weighted
group-orbit sums, ordered by their lexicographically smallest basis state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import EmptySectorError, SizeGuardError
from .tensors import SIZE_GUARD

MODEL_PHYS_DIM = {"aklt": 3, "ghz": 2}

_ALLOWED_NUMBERS = {
    "aklt": ("momentum", "sz_total", "q_eigen"),
    "ghz": ("momentum", "parity", "reversal"),
}


@dataclass(frozen=True)
class SectorSpec:
    """Quantum numbers selecting a symmetry sector; unset numbers are ignored.

    ``momentum`` is the translation wavenumber k (eigenvalue exp(2*pi*i*k/N);
    the ground sectors use k=0).  The remaining numbers are +-1 eigenvalues.
    """

    momentum: int | None = None
    sz_total: int | None = None
    q_eigen: int | None = None
    parity: int | None = None
    reversal: int | None = None

    def __post_init__(self):
        for name in ("q_eigen", "parity", "reversal"):
            val = getattr(self, name)
            if val is not None and val not in (-1, 1):
                raise ValueError(f"{name} must be +1 or -1, got {val}")


def ground_sector_spec(model: str) -> SectorSpec:
    """The sector containing the interpolated ground state, per model."""
    if model == "aklt":
        return SectorSpec(momentum=0, sz_total=0, q_eigen=1)
    if model == "ghz":
        return SectorSpec(momentum=0, reversal=1, parity=1)
    raise ValueError(f"model {model!r} has no symmetry sector")


@dataclass(frozen=True)
class SectorMap:
    """Isometry from the full chain Hilbert space onto a symmetry sector."""

    isometry: sp.csc_matrix
    spec: SectorSpec
    model: str
    n_sites: int

    @property
    def dim(self) -> int:
        return self.isometry.shape[1]

    @property
    def full_dim(self) -> int:
        return self.isometry.shape[0]


def _digit_table(d: int, n_sites: int) -> np.ndarray:
    idx = np.arange(d**n_sites, dtype=np.int64)
    return np.stack([(idx // d ** (n_sites - 1 - j)) % d for j in range(n_sites)])


def _index_of_digits(digits: np.ndarray, d: int) -> np.ndarray:
    n_sites = digits.shape[0]
    powers = d ** np.arange(n_sites - 1, -1, -1, dtype=np.int64)
    return powers @ digits


def _basis_permutations(d: int, n_sites: int) -> dict[str, np.ndarray]:
    """Index permutations for T, R, flip, and their composites."""
    digits = _digit_table(d, n_sites)
    shift = _index_of_digits(np.roll(digits, 1, axis=0), d)  # T: right cyclic shift
    reverse = _index_of_digits(digits[::-1], d)
    flip = _index_of_digits((d - 1) - digits, d)
    return {"translation": shift, "reversal": reverse, "flip": flip}


def sector_operators(model: str, n_sites: int) -> dict[str, sp.csr_matrix]:
    """Sparse matrices of the symmetry operators relevant for the model."""
    d = MODEL_PHYS_DIM[model]
    perms = _basis_permutations(d, n_sites)
    dim = d**n_sites

    def perm_matrix(perm):
        return sp.csr_matrix(
            (np.ones(dim), (perm, np.arange(dim))), shape=(dim, dim), dtype=complex
        )

    ops = {"translation": perm_matrix(perms["translation"])}
    if model == "aklt":
        q_perm = perms["flip"][perms["reversal"]]
        ops["q"] = perm_matrix(q_perm)
        total_m = (1 - _digit_table(d, n_sites)).sum(axis=0)  # digit 0,1,2 -> m +1,0,-1
        ops["sz_total"] = sp.diags(total_m.astype(complex)).tocsr()
    else:
        ops["reversal"] = perm_matrix(perms["reversal"])
        ops["parity"] = perm_matrix(perms["flip"])
    return ops


def build_sector(model: str, n_sites: int, spec: SectorSpec) -> SectorMap:
    """Construct the orthonormal isometry onto the requested sector.

    Columns are weighted orbit sums of the permutation group generated by
    the selected operators, ordered by their smallest member state.
    """
    if model not in MODEL_PHYS_DIM:
        raise ValueError(f"unknown sector model {model!r}")
    for name in ("momentum", "sz_total", "q_eigen", "parity", "reversal"):
        if getattr(spec, name) is not None and name not in _ALLOWED_NUMBERS[model]:
            raise ValueError(f"quantum number {name!r} is not valid for model {model!r}")
    d = MODEL_PHYS_DIM[model]
    dim = d**n_sites
    if dim >= SIZE_GUARD:
        raise SizeGuardError(f"sector construction dimension {dim} reaches the guard")
    if spec.q_eigen is not None and spec.sz_total not in (None, 0):
        raise ValueError("the flip-reflection quantum number requires total Sz = 0")

    perms = _basis_permutations(d, n_sites)
    generators: list[tuple[np.ndarray, complex]] = []
    if spec.momentum is not None:
        generators.append((perms["translation"], np.exp(2j * np.pi * spec.momentum / n_sites)))
    if spec.q_eigen is not None:
        generators.append((perms["flip"][perms["reversal"]], complex(spec.q_eigen)))
    if spec.parity is not None:
        generators.append((perms["flip"], complex(spec.parity)))
    if spec.reversal is not None:
        generators.append((perms["reversal"], complex(spec.reversal)))

    # close the generated group, tracking the character of each element
    identity = np.arange(dim, dtype=np.int64)
    elements: dict[bytes, tuple[np.ndarray, complex]] = {identity.tobytes(): (identity, 1.0 + 0j)}
    frontier = [(identity, 1.0 + 0j)]
    while frontier:
        nxt = []
        for perm, char in frontier:
            for gen_perm, gen_char in generators:
                new_perm = gen_perm[perm]
                new_char = gen_char * char
                key = new_perm.tobytes()
                if key in elements:
                    if abs(elements[key][1] - new_char) > 1e-9:
                        raise ValueError("incompatible quantum numbers for this chain length")
                else:
                    elements[key] = (new_perm, new_char)
                    nxt.append((new_perm, new_char))
        frontier = nxt
    group = list(elements.values())
    order = len(group)

    if model == "aklt" and spec.sz_total is not None:
        total_m = (1 - _digit_table(d, n_sites)).sum(axis=0)
        candidates = np.flatnonzero(total_m == spec.sz_total)
    else:
        candidates = np.arange(dim, dtype=np.int64)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    visited = np.zeros(dim, dtype=bool)
    n_cols = 0
    for state in candidates:
        if visited[state]:
            continue
        amp: dict[int, complex] = {}
        for perm, char in group:
            img = int(perm[state])
            visited[img] = True
            amp[img] = amp.get(img, 0.0) + np.conj(char) / order
        vec = np.array(list(amp.values()))
        norm = np.linalg.norm(vec)
        if norm < 1e-12:
            continue
        rows.append(np.fromiter(amp.keys(), dtype=np.int64, count=len(amp)))
        cols.append(np.full(len(amp), n_cols, dtype=np.int64))
        vals.append(vec / norm)
        n_cols += 1
    if n_cols == 0:
        raise EmptySectorError(f"sector {spec} of model {model!r} at N={n_sites} is empty")
    isometry = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, n_cols),
    )
    return SectorMap(isometry=isometry, spec=spec, model=model, n_sites=n_sites)


@dataclass(frozen=True)
class STemplate:
    """Affine parametrization of the mixing matrix respecting model symmetries.

    embed(params) = base + sum_k params[k] * directions[k] is Hermitian with
    unit trace for every parameter value; positivity is checked at use sites.
    """

    model: str
    param_names: tuple[str, ...]
    base: np.ndarray
    directions: np.ndarray
    constraint_ops: tuple[np.ndarray, ...]
    canonical: np.ndarray

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    @property
    def size(self) -> int:
        return self.base.shape[0]

    def embed(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {params.shape}")
        return self.base + np.tensordot(params, self.directions, axes=1)

    def canonical_params(self) -> np.ndarray:
        return self.canonical.copy()

    def project_generator(self, b: np.ndarray) -> np.ndarray:
        """Orthogonal projection of a Hermitian generator onto the template set."""
        b = np.asarray(b, dtype=complex)
        if self.model in ("aklt", "ghz_diag"):
            diag = np.real(np.diagonal(b))
            diag = (diag + diag[::-1]) / 2.0
            return np.diag(diag).astype(complex)
        # ghz: real symmetric, persymmetric
        real = (b + b.conj().T).real / 2.0
        real = (real + real.T) / 2.0
        return ((real + real[::-1, ::-1]) / 2.0).astype(complex)


def symmetric_s_template(model: str) -> STemplate:
    """Reduced mixing-matrix template for a model ('aklt', 'ghz', 'ghz_diag')."""
    if model == "aklt":
        return STemplate(
            model="aklt",
            param_names=("s11", "s22"),
            base=np.diag([0.0, 0.0, 1.0, 0.0, 0.0]).astype(complex),
            directions=np.stack(
                [
                    np.diag([1.0, 0.0, -2.0, 0.0, 1.0]),
                    np.diag([0.0, 1.0, -2.0, 1.0, 0.0]),
                ]
            ).astype(complex),
            constraint_ops=(
                np.diag([2.0, 1.0, 0.0, -1.0, -2.0]).astype(complex),
                np.eye(5)[::-1].astype(complex),
            ),
            canonical=np.array([0.2, 0.2]),
        )
    if model == "ghz":
        eye = np.eye(4)

        def placed(pairs):
            mat = np.zeros((4, 4))
            for r, c in pairs:
                mat[r, c] = 1.0
            return mat - np.trace(mat) / 4.0 * eye

        directions = np.stack(
            [
                placed([(0, 0), (3, 3)]),
                placed([(1, 1), (2, 2)]),
                placed([(0, 1), (1, 0), (2, 3), (3, 2)]),
                placed([(0, 2), (2, 0), (1, 3), (3, 1)]),
                placed([(0, 3), (3, 0)]),
                placed([(1, 2), (2, 1)]),
            ]
        ).astype(complex)
        return STemplate(
            model="ghz",
            param_names=("s11", "s22", "s12", "s13", "s14", "s23"),
            base=(eye / 4.0).astype(complex),
            directions=directions,
            constraint_ops=(eye[::-1].astype(complex),),
            canonical=np.array([0.25, 0.25, 0.0, 0.0, 0.0, 0.0]),
        )
    if model == "ghz_diag":
        return STemplate(
            model="ghz_diag",
            param_names=("s11",),
            base=np.diag([0.0, 0.5, 0.5, 0.0]).astype(complex),
            directions=np.diag([1.0, -1.0, -1.0, 1.0])[None].astype(complex),
            constraint_ops=(
                np.eye(4)[::-1].astype(complex),
                np.diag([0.0, 1.0, 2.0, 3.0]).astype(complex),
            ),
            canonical=np.array([0.25]),
        )
    raise ValueError(f"no symmetric template for model {model!r} (random MPS uses unconstrained S)")


@dataclass(frozen=True)
class SymmetryReport:
    """Max-norm commutators of a Hamiltonian with the sector's operators."""

    commutator_norms: dict[str, float]
    tolerance: float = 1e-9

    @property
    def passes(self) -> bool:
        return all(v < self.tolerance for v in self.commutator_norms.values())


def symmetrize_check(hamiltonian, spec: SectorSpec, model: str, n_sites: int) -> SymmetryReport:
    """Report ||[H, O]||_max for every quantum number set in the spec."""
    hmat = hamiltonian.matrix if hasattr(hamiltonian, "matrix") else sp.csr_matrix(hamiltonian)
    ops = sector_operators(model, n_sites)
    selected = {
        "momentum": "translation",
        "sz_total": "sz_total",
        "q_eigen": "q",
        "parity": "parity",
        "reversal": "reversal",
    }
    norms = {}
    for number, op_name in selected.items():
        if getattr(spec, number) is None or op_name not in ops:
            continue
        comm = (hmat @ ops[op_name] - ops[op_name] @ hmat).tocoo()
        norms[op_name] = float(np.max(np.abs(comm.data))) if comm.nnz else 0.0
    return SymmetryReport(commutator_norms=norms)
