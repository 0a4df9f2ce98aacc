"""Spectral-gap maximization over the parent-Hamiltonian family.

Two parametrizations are supported: the free parameters of a symmetry
template (affine in the mixing matrix, kept positive by a weak log
barrier), and the full set of real degrees of freedom of the Hermitian
generator B with S = exp(-B)/tr(exp(-B)).  Gradients are exact, obtained
from the excited-state overlap matrix; the quasi-Newton ascent, the
optimality certificate, pointwise sweeps with warm starts, and the
optimal-path ODE all build on them.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import models, spectra
from .errors import FeasibilityError, StiffnessError
from .parent import KernelBasis, _assemble_matrix
from .symmetry import SectorMap, STemplate
from .tensors import RandomMpsFamily

DEFAULT_GRAD_TOL = 1e-7
DEFAULT_MAX_ITER = 500
BARRIER_WEIGHT = 1e-8
_COMPONENT_CACHE_DIM = 4096  # densify affine components up to this dimension


@dataclass
class OptimizerOptions:
    grad_tol: float = DEFAULT_GRAD_TOL
    max_iter: int = DEFAULT_MAX_ITER
    barrier_weight: float = BARRIER_WEIGHT
    armijo_c1: float = 1e-4
    max_backtracks: int = 40
    stall_iters: int = 20  # stop (unconverged) after this many stagnant iterations
    stall_rtol: float = 1e-13


@dataclass
class GapEvaluation:
    """One objective evaluation at fixed interpolation parameter."""

    gap: float
    value: float  # gap plus barrier; -inf outside the positive cone
    smatrix: np.ndarray
    min_eig: float
    feasible: bool
    degenerate_ground: bool
    excited_degenerate: bool
    excited: np.ndarray | None = None
    chi: np.ndarray | None = None
    aux: tuple | None = None  # eigendecomposition of B for generator problems


class Objective:
    """Deterministic gap objective for one model, chain length, and working space."""

    def __init__(
        self,
        model: str,
        n_sites: int,
        family: RandomMpsFamily | None = None,
        sector: SectorMap | None = None,
        template: STemplate | None = None,
        basis_convention: str = "closed-form",
        deg_tol: float | None = None,
        barrier_weight: float = BARRIER_WEIGHT,
    ):
        if model not in models.MODEL_NAMES:
            raise ValueError(f"unknown model {model!r}")
        if model == "random" and family is None:
            raise ValueError("the random model needs a RandomMpsFamily")
        self.model = model
        self.n_sites = n_sites
        self.family = family
        self.sector = sector
        self.template = template
        self.basis_convention = basis_convention
        self.deg_tol = deg_tol
        self.barrier_weight = barrier_weight
        self._basis_cache: OrderedDict[float, KernelBasis] = OrderedDict()
        self._component_cache: OrderedDict[float, tuple] = OrderedDict()
        self._cache_size = 16
        self._m = self.basis(models.LAMBDA_RANGES[model][1]).size

    # -- parametrization ---------------------------------------------------

    @property
    def n_params(self) -> int:
        if self.template is not None:
            return self.template.n_params
        return self._m * self._m

    def initial_params(self) -> np.ndarray:
        """Canonical starting point: template canonical point, or B = 0."""
        if self.template is not None:
            return self.template.canonical_params()
        return np.zeros(self.n_params)

    def generator_from_params(self, params: np.ndarray) -> np.ndarray:
        """Hermitian B from the real parameter vector (generator problems)."""
        m = self._m
        params = np.asarray(params, dtype=float)
        b = np.diag(params[:m]).astype(complex)
        iu = np.triu_indices(m, k=1)
        n_off = iu[0].size
        b[iu] = params[m : m + n_off] + 1j * params[m + n_off :]
        b[(iu[1], iu[0])] = np.conj(b[iu])
        return b

    def params_from_generator(self, b: np.ndarray) -> np.ndarray:
        m = self._m
        iu = np.triu_indices(m, k=1)
        return np.concatenate([np.real(np.diag(b)), np.real(b[iu]), np.imag(b[iu])])

    def smatrix_of(self, params) -> tuple[np.ndarray, tuple | None]:
        """Mixing matrix of a parameter vector; aux carries (evecs, evals) of B."""
        if self.template is not None:
            return self.template.embed(params), None
        b = self.generator_from_params(params)
        evals, evecs = np.linalg.eigh(b)
        shifted = evals - evals.min()
        weights = np.exp(-shifted)
        weights /= weights.sum()
        s = (evecs * weights) @ evecs.conj().T
        return (s + s.conj().T) / 2.0, (evecs, evals)

    # -- Hamiltonian evaluation --------------------------------------------

    def basis(self, lam: float) -> KernelBasis:
        if lam not in self._basis_cache:
            self._basis_cache[lam] = models.kernel_basis(
                self.model, lam, family=self.family, convention=self.basis_convention
            )
            while len(self._basis_cache) > self._cache_size:
                self._basis_cache.popitem(last=False)
        return self._basis_cache[lam]

    def _template_components(self, lam: float):
        """Dense working-space operators for the affine template decomposition."""
        if lam not in self._component_cache:
            basis = self.basis(lam)
            base = _assemble_matrix(basis, self.template.base, self.n_sites, self.sector).toarray()
            dirs = [
                _assemble_matrix(basis, direction, self.n_sites, self.sector).toarray()
                for direction in self.template.directions
            ]
            self._component_cache[lam] = (base, np.stack(dirs))
            while len(self._component_cache) > self._cache_size:
                self._component_cache.popitem(last=False)
        return self._component_cache[lam]

    def _working_dim(self) -> int:
        if self.sector is not None:
            return self.sector.dim
        return models.PHYS_DIM[self.model] ** self.n_sites

    def hamiltonian(self, lam: float, smatrix: np.ndarray):
        if self.template is not None and self._working_dim() <= _COMPONENT_CACHE_DIM:
            base, dirs = self._template_components(lam)
            params = self._template_coordinates(smatrix)
            return base + np.tensordot(params, dirs, axes=1)
        return _assemble_matrix(self.basis(lam), smatrix, self.n_sites, self.sector)

    def _template_coordinates(self, smatrix: np.ndarray) -> np.ndarray:
        """Invert the affine embedding on its own range (least squares)."""
        diff = (smatrix - self.template.base).ravel()
        dirs = self.template.directions.reshape(self.template.n_params, -1).T
        coeff, *_ = np.linalg.lstsq(dirs, diff, rcond=None)
        return np.real(coeff)

    def evaluate(self, params, lam: float, need_chi: bool = False) -> GapEvaluation:
        smatrix, aux = self.smatrix_of(params)
        min_eig = float(np.linalg.eigvalsh(smatrix)[0])
        if min_eig <= 0.0 and self.template is not None:
            return GapEvaluation(
                gap=np.nan,
                value=-np.inf,
                smatrix=smatrix,
                min_eig=min_eig,
                feasible=False,
                degenerate_ground=False,
                excited_degenerate=False,
                aux=aux,
            )
        ham = self.hamiltonian(lam, smatrix)
        res = spectra.spectral_gap(ham, deg_tol=self.deg_tol)
        value = res.gap
        if self.template is not None and self.barrier_weight > 0:
            value += self.barrier_weight * np.log(min_eig)
        chi = None
        if need_chi and res.excited is not None:
            chi = spectra.chi_matrix(
                res.excited, self.basis(lam), self.n_sites, sector=self.sector,
                excited_energy=res.gap + res.ground_energy,
            ).entries
        return GapEvaluation(
            gap=res.gap,
            value=value,
            smatrix=smatrix,
            min_eig=min_eig,
            feasible=True,
            degenerate_ground=res.ground_degeneracy > 1,
            excited_degenerate=res.excited_degenerate,
            excited=res.excited,
            chi=chi,
            aux=aux,
        )


def _divided_difference_table(evals: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """exp(-b) weights, first divided differences of exp(-.), and their sum.

    Eigenvalues are shifted by their minimum first; every downstream use is
    invariant under that shift.
    """
    shifted = evals - evals.min()
    expvals = np.exp(-shifted)
    total = float(expvals.sum())
    mean = (shifted[:, None] + shifted[None, :]) / 2.0
    delta = shifted[None, :] - shifted[:, None]
    small = np.abs(delta) < 1e-7
    safe = np.where(small, 1.0, delta)
    table = np.where(
        small,
        np.exp(-mean) * (1.0 + delta**2 / 24.0),
        (expvals[:, None] - expvals[None, :]) / safe,
    )
    return expvals, table, total


def gradient(params, objective: Objective, lam: float, evaluation: GapEvaluation | None = None):
    """Exact gradient of the gap with respect to the free parameters.

    Returns (grad, evaluation).  When the first excited state is degenerate,
    the returned vector is a subgradient (flagged on the evaluation).
    """
    ev = evaluation if evaluation is not None else objective.evaluate(params, lam, need_chi=True)
    if not ev.feasible:
        raise FeasibilityError("cannot differentiate outside the positive cone")
    if ev.chi is None:
        ev.chi = spectra.chi_matrix(
            ev.excited, objective.basis(lam), objective.n_sites, sector=objective.sector
        ).entries
    chi = ev.chi
    if objective.template is not None:
        dirs = objective.template.directions
        grad = np.real(np.tensordot(dirs, chi, axes=([1, 2], [0, 1])))
        return grad, ev
    evecs, evals = ev.aux
    expvals, table, total = _divided_difference_table(evals)
    pairing = float(np.real(np.sum(ev.smatrix * chi)))
    y = evecs.conj().T @ chi.T @ evecs
    kmat = -(table * y.T) / total + np.diag(pairing * expvals / total)
    k0 = evecs.conj() @ kmat @ evecs.T
    m = objective._m
    iu = np.triu_indices(m, k=1)
    grad = np.concatenate(
        [np.real(np.diag(k0)), 2.0 * np.real(k0[iu]), -2.0 * np.imag(k0[iu])]
    )
    return grad, ev


def _barrier_gradient(objective: Objective, params: np.ndarray, smatrix: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(smatrix)
    vmin = evecs[:, 0]
    dirs = objective.template.directions
    slopes = np.real(np.einsum("i,kij,j->k", vmin.conj(), dirs, vmin))
    return objective.barrier_weight * slopes / evals[0]


def objective_gradient(objective: Objective, params, lam: float, evaluation: GapEvaluation | None = None):
    """Gradient of the optimizer's objective (gap plus barrier when templated)."""
    grad, ev = gradient(params, objective, lam, evaluation=evaluation)
    if objective.template is not None and objective.barrier_weight > 0 and ev.feasible:
        grad = grad + _barrier_gradient(objective, params, ev.smatrix)
    return grad, ev


def _feasible_step(objective: Objective, theta, direction, trust: float) -> float:
    """Largest probed step (<= trust) keeping the template inside the cone."""
    if objective.template is None:
        return trust
    step = trust
    for _ in range(60):
        smat = objective.template.embed(theta + step * direction)
        if np.linalg.eigvalsh(smat)[0] > 0:
            return step
        step *= 0.5
    return step


@dataclass
class OptimalityReport:
    """Certificate data: the overlap matrix in the eigenbasis of the optimum."""

    off_diag_norm: float
    eigen_spread: float
    common_eigenvalue: float
    s_rank: int
    chi_rank: int
    support_size: int
    converged: bool


@dataclass
class OptState:
    params: np.ndarray
    value: float  # the gap at the final point
    gradient: np.ndarray
    iteration: int
    converged: bool
    smatrix: np.ndarray
    chi: np.ndarray | None
    grad_norm: float
    subgradient_steps: int = 0
    non_smooth: bool = False
    degenerate_ground: bool = False
    accepted_gaps: list = field(default_factory=list)
    certificate: OptimalityReport | None = None


def maximize(
    objective: Objective,
    init_params,
    lam: float,
    opts: OptimizerOptions | None = None,
) -> OptState:
    """Quasi-Newton (BFGS) ascent with backtracking line search.

    Stops when the infinity norm of the objective gradient drops below
    grad_tol, on iteration exhaustion, or after repeated line-search
    failures (flagged as a non-smooth point).  Accepted steps never
    decrease the objective.
    """
    opts = opts or OptimizerOptions()
    theta = np.asarray(init_params, dtype=float).copy()
    ev = objective.evaluate(theta, lam, need_chi=True)
    if not ev.feasible:
        raise FeasibilityError("initial point is outside the positive cone")
    if ev.degenerate_ground:
        return OptState(
            params=theta, value=ev.gap, gradient=np.zeros(objective.n_params),
            iteration=0, converged=False, smatrix=ev.smatrix, chi=ev.chi,
            grad_norm=np.nan, degenerate_ground=True,
        )
    grad, ev = objective_gradient(objective, theta, lam)
    n = theta.size
    hinv = np.eye(n)
    subgradient_steps = int(ev.excited_degenerate)
    accepted = [ev.gap]
    non_smooth = False
    converged = False
    consecutive_failures = 0
    stagnant = 0
    trust = 1.0
    iteration = 0

    while iteration < opts.max_iter:
        grad_norm = float(np.max(np.abs(grad))) if grad.size else 0.0
        if grad_norm < opts.grad_tol:
            converged = True
            break
        if stagnant >= opts.stall_iters:
            break
        iteration += 1
        direction = hinv @ grad
        if float(direction @ grad) <= 0.0:
            hinv = np.eye(n)
            direction = grad.copy()
        slope = float(direction @ grad)

        step = min(trust, _feasible_step(objective, theta, direction, trust))
        new_ev = None
        for _ in range(opts.max_backtracks):
            candidate = theta + step * direction
            trial = objective.evaluate(candidate, lam)
            if trial.feasible and not trial.degenerate_ground and np.isfinite(trial.value):
                if trial.value >= ev.value + opts.armijo_c1 * step * slope:
                    new_ev = trial
                    break
            step *= 0.5
        if new_ev is None:
            consecutive_failures += 1
            if consecutive_failures == 1:
                hinv = np.eye(n)  # retry along steepest ascent
                continue
            if consecutive_failures == 2:
                trust *= 0.5
                hinv = np.eye(n)
                continue
            non_smooth = True
            break
        consecutive_failures = 0
        trust = min(1.0, trust * 2.0)

        candidate = theta + step * direction
        new_grad, new_ev = objective_gradient(objective, candidate, lam, evaluation=new_ev)
        subgradient_steps += int(new_ev.excited_degenerate)
        stagnant = stagnant + 1 if new_ev.value - ev.value < opts.stall_rtol * max(1.0, abs(ev.value)) else 0
        s_vec = step * direction
        y_vec = grad - new_grad  # curvature pair for the ascent problem
        sy = float(s_vec @ y_vec)
        if sy > 1e-12 * np.linalg.norm(s_vec) * max(np.linalg.norm(y_vec), 1e-300):
            rho = 1.0 / sy
            outer = np.outer(s_vec, y_vec)
            hinv = (np.eye(n) - rho * outer) @ hinv @ (np.eye(n) - rho * outer.T)
            hinv += rho * np.outer(s_vec, s_vec)
        theta, ev, grad = candidate, new_ev, new_grad
        accepted.append(ev.gap)

    grad_norm = float(np.max(np.abs(grad))) if grad.size else 0.0
    return OptState(
        params=theta,
        value=ev.gap,
        gradient=grad,
        iteration=iteration,
        converged=converged,
        smatrix=ev.smatrix,
        chi=ev.chi,
        grad_norm=grad_norm,
        subgradient_steps=subgradient_steps,
        non_smooth=non_smooth,
        accepted_gaps=accepted,
    )


def certify(opt: OptState, chi: np.ndarray | None = None, rank_tol: float = 1e-6) -> OptimalityReport:
    """Rotate the overlap matrix into the eigenbasis of the optimal mixing matrix.

    Within degenerate eigenvalue clusters of S the basis is re-chosen to
    diagonalize the overlap block, so the report isolates genuine
    simultaneous-diagonalizability violations.  Diagonal spread is taken
    over the support of S only; the support threshold sits above the log
    barrier's floor, so directions pinned at the cone boundary are excluded.
    """
    chi = chi if chi is not None else opt.chi
    if chi is None:
        raise ValueError("certification needs the overlap matrix of the optimum")
    smatrix = opt.smatrix
    evals, evecs = np.linalg.eigh(smatrix)
    scale = max(np.max(np.abs(evals)), 1.0)
    clusters: list[list[int]] = [[0]]
    for idx in range(1, evals.size):
        if evals[idx] - evals[clusters[-1][-1]] < 1e-8 * scale:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    basis = evecs.copy()
    for cluster in clusters:
        if len(cluster) > 1:
            block = basis[:, cluster]
            sub = block.conj().T @ chi @ block
            _, rot = np.linalg.eigh((sub + sub.conj().T) / 2.0)
            basis[:, cluster] = block @ rot
    rotated = basis.conj().T @ chi @ basis
    off = rotated - np.diag(np.diag(rotated))
    off_diag_norm = float(np.max(np.abs(off))) if off.size else 0.0
    support = evals > rank_tol * scale
    diag = np.real(np.diag(rotated))
    if np.any(support):
        spread_vals = np.abs(diag[support] - opt.value)
        eigen_spread = float(np.max(spread_vals))
        common = float(np.mean(diag[support]))
    else:
        eigen_spread, common = np.nan, np.nan
    chi_evals = np.linalg.eigvalsh((chi + chi.conj().T) / 2.0)
    chi_scale = max(np.max(np.abs(chi_evals)), 1e-300)
    return OptimalityReport(
        off_diag_norm=off_diag_norm,
        eigen_spread=eigen_spread,
        common_eigenvalue=common,
        s_rank=int(np.count_nonzero(support)),
        chi_rank=int(np.count_nonzero(np.abs(chi_evals) > rank_tol * chi_scale)),
        support_size=int(np.count_nonzero(support)),
        converged=opt.converged,
    )


@dataclass
class PathResult:
    """Per-grid-point record of a sweep or an ODE follow."""

    lambdas: np.ndarray
    gaps_canonical: np.ndarray
    gaps_optimized: np.ndarray
    s_params: list
    s_matrices: list
    diagnostics: list
    min_gap_canonical: float
    min_gap_optimized: float

    @property
    def improvement_ratio(self) -> float:
        can = self.gaps_canonical[-1]
        return float(self.gaps_optimized[-1] / can) if can else np.inf


def _canonical_gap(objective: Objective, lam: float) -> float:
    """Gap of the model's canonical reference in the sweep's working space."""
    if objective.model == "random":
        res = models.canonical_reference_gap(
            "random", lam, objective.n_sites, family=objective.family
        )
        return res.gap
    if objective.template is not None:
        params = objective.template.canonical_params()
        return objective.evaluate(params, lam).gap
    basis = objective.basis(lam)
    smatrix = np.eye(basis.size) / basis.size
    ham = objective.hamiltonian(lam, smatrix)
    return spectra.spectral_gap(ham, deg_tol=objective.deg_tol).gap


def sweep(
    model: str,
    n_sites: int,
    lambda_grid,
    family: RandomMpsFamily | None = None,
    sector: SectorMap | None = None,
    template: STemplate | None = None,
    opts: OptimizerOptions | None = None,
    warm_start: bool = True,
    init_params=None,
    with_certificates: bool = True,
) -> PathResult:
    """Pointwise gap optimization along the interpolation grid.

    Each grid point starts from the previous optimum (warm start) or from
    the canonical point; per-point failures are recorded and the sweep
    continues.
    """
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    if lambda_grid.size < 1 or np.any(np.diff(lambda_grid) <= 0):
        raise ValueError("lambda grid must be sorted and non-empty")
    objective = Objective(
        model, n_sites, family=family, sector=sector, template=template,
        basis_convention="svd" if model == "random" else "closed-form",
    )
    opts = opts or OptimizerOptions()
    gaps_can = np.full(lambda_grid.size, np.nan)
    gaps_opt = np.full(lambda_grid.size, np.nan)
    params_list, smatrix_list, diagnostics = [], [], []
    prev = np.asarray(init_params, dtype=float) if init_params is not None else None
    n_failed = 0
    for pos, lam in enumerate(lambda_grid):
        record = {"lambda": float(lam), "error": None}
        try:
            gaps_can[pos] = _canonical_gap(objective, lam)
            start = prev if (warm_start and prev is not None) else objective.initial_params()
            state = maximize(objective, start, lam, opts=opts)
            if warm_start and not state.converged and not state.degenerate_ground:
                # a stalled warm start (e.g. across a cone-boundary kink) may
                # recover from the canonical point; keep the better result
                retry = maximize(objective, objective.initial_params(), lam, opts=opts)
                if retry.value > state.value or (retry.converged and not state.converged
                                                 and retry.value >= state.value - 1e-9):
                    state = retry
            if with_certificates and state.converged and state.chi is not None:
                state.certificate = certify(state)
            gaps_opt[pos] = state.value
            params_list.append(state.params.copy())
            smatrix_list.append(state.smatrix.copy())
            record.update(
                n_iter=state.iteration,
                converged=state.converged,
                grad_norm=state.grad_norm,
                degenerate_ground=state.degenerate_ground,
                non_smooth=state.non_smooth,
                subgradient_steps=state.subgradient_steps,
                certificate=state.certificate,
            )
            if warm_start and not state.degenerate_ground:
                prev = state.params
        except Exception as err:  # per-point failure: record and continue
            n_failed += 1
            record["error"] = f"{type(err).__name__}: {err}"
            params_list.append(None)
            smatrix_list.append(None)
        diagnostics.append(record)
    if n_failed == lambda_grid.size:
        raise RuntimeError("every sweep point failed; first error: " + str(diagnostics[0]["error"]))
    return PathResult(
        lambdas=lambda_grid,
        gaps_canonical=gaps_can,
        gaps_optimized=gaps_opt,
        s_params=params_list,
        s_matrices=smatrix_list,
        diagnostics=diagnostics,
        min_gap_canonical=float(np.nanmin(gaps_can)),
        min_gap_optimized=float(np.nanmin(gaps_opt)),
    )


@dataclass
class OdeOptions:
    h_params: float = 1e-4
    h_lambda: float = 1e-4
    cond_tol: float = 1e12
    substeps: int = 4  # RK4 substeps per grid interval
    reproject_every: int = 0
    on_stiff: str = "raise"  # or "reproject"
    # gradient-residual threshold of the kink detector: after each interval
    # the stationarity condition is checked at the integrated point, and a
    # violation re-anchors with one warm maximize call (None disables)
    residual_tol: float | None = 1e-3


def _grad_at(objective: Objective, params: np.ndarray, lam: float) -> np.ndarray:
    grad, _ = objective_gradient(objective, params, lam)
    return grad


def _lambda_slope(objective: Objective, params: np.ndarray, lam: float, h: float) -> np.ndarray:
    """d(gradient)/d(lambda) at fixed parameters; one-sided at range edges."""
    lo, hi = models.LAMBDA_RANGES[objective.model]
    if lam + h <= hi and lam - h >= lo:
        gp = _grad_at(objective, params, lam + h)
        gm = _grad_at(objective, params, lam - h)
        return (gp - gm) / (2.0 * h)
    if lam + h > hi:
        g0 = _grad_at(objective, params, lam)
        g1 = _grad_at(objective, params, lam - h)
        g2 = _grad_at(objective, params, lam - 2.0 * h)
        return (3.0 * g0 - 4.0 * g1 + g2) / (2.0 * h)
    g0 = _grad_at(objective, params, lam)
    g1 = _grad_at(objective, params, lam + h)
    g2 = _grad_at(objective, params, lam + 2.0 * h)
    return (-3.0 * g0 + 4.0 * g1 - g2) / (2.0 * h)


def _ode_rhs(objective: Objective, params: np.ndarray, lam: float, opts: OdeOptions) -> np.ndarray:
    n = params.size
    hess = np.zeros((n, n))
    try:
        for k in range(n):
            shift = np.zeros(n)
            shift[k] = opts.h_params
            gp = _grad_at(objective, params + shift, lam)
            gm = _grad_at(objective, params - shift, lam)
            hess[:, k] = (gp - gm) / (2.0 * opts.h_params)
    except FeasibilityError as err:
        # finite differencing stepped over the cone boundary: the optimum is
        # pinned there and the smooth ODE does not apply
        raise StiffnessError(f"optimum pinned at the cone boundary near lambda={lam:g}") from err
    hess = (hess + hess.T) / 2.0
    if np.linalg.cond(hess) > opts.cond_tol:
        raise StiffnessError(
            f"gap Hessian condition number exceeds {opts.cond_tol:g} at lambda={lam:g}; "
            "consider pointwise optimization"
        )
    mixed = _lambda_slope(objective, params, lam, opts.h_lambda)
    return -np.linalg.solve(hess, mixed)


def ode_follow(
    model: str,
    n_sites: int,
    lambda_grid,
    init_params,
    family: RandomMpsFamily | None = None,
    sector: SectorMap | None = None,
    template: STemplate | None = None,
    opts: OdeOptions | None = None,
    optimizer_opts: OptimizerOptions | None = None,
) -> PathResult:
    """Integrate the optimal-parameter ODE along the grid with RK4 steps.

    ``init_params`` must be a (certified) optimum at the first grid point.
    Stiff points either raise or, with on_stiff='reproject', restart from a
    fresh pointwise optimum.  Every reproject_every-th grid point can also
    be refreshed by one maximize call.
    """
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    opts = opts or OdeOptions()
    objective = Objective(
        model, n_sites, family=family, sector=sector, template=template,
        basis_convention="svd" if model == "random" else "closed-form",
    )
    theta = np.asarray(init_params, dtype=float).copy()
    gaps_can = np.full(lambda_grid.size, np.nan)
    gaps_opt = np.full(lambda_grid.size, np.nan)
    params_list, smatrix_list, diagnostics = [], [], []

    def rhs(par, lam):
        return _ode_rhs(objective, par, lam, opts)

    for pos, lam in enumerate(lambda_grid):
        reanchored = False
        if pos > 0:
            prev_lam = lambda_grid[pos - 1]
            h = (lam - prev_lam) / max(opts.substeps, 1)
            try:
                for sub in range(max(opts.substeps, 1)):
                    start = prev_lam + sub * h
                    k1 = rhs(theta, start)
                    k2 = rhs(theta + 0.5 * h * k1, start + 0.5 * h)
                    k3 = rhs(theta + 0.5 * h * k2, start + 0.5 * h)
                    k4 = rhs(theta + h * k3, start + h)
                    theta = theta + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            except StiffnessError:
                if opts.on_stiff != "reproject":
                    raise
                theta = maximize(objective, theta, lam, opts=optimizer_opts).params
                reanchored = True
            if opts.residual_tol is not None and not reanchored:
                try:
                    residual = float(np.max(np.abs(_grad_at(objective, theta, lam))))
                except FeasibilityError:
                    residual = np.inf
                if residual > opts.residual_tol:
                    # stationarity violated at the integrated point: a kink,
                    # re-anchor on the optimum with one warm maximize call
                    theta = maximize(objective, theta, lam, opts=optimizer_opts).params
                    reanchored = True
        if opts.reproject_every > 0 and pos > 0 and pos % opts.reproject_every == 0 and not reanchored:
            theta = maximize(objective, theta, lam, opts=optimizer_opts).params
            reanchored = True
        ev = objective.evaluate(theta, lam)
        if not ev.feasible or ev.min_eig <= 0:
            raise FeasibilityError(f"ODE solution left the positive cone at lambda={lam:g}")
        gaps_can[pos] = _canonical_gap(objective, lam)
        gaps_opt[pos] = ev.gap
        params_list.append(theta.copy())
        smatrix_list.append(ev.smatrix.copy())
        diagnostics.append({"lambda": float(lam), "min_eig": ev.min_eig, "reanchored": reanchored, "error": None})
    return PathResult(
        lambdas=lambda_grid,
        gaps_canonical=gaps_can,
        gaps_optimized=gaps_opt,
        s_params=params_list,
        s_matrices=smatrix_list,
        diagnostics=diagnostics,
        min_gap_canonical=float(np.nanmin(gaps_can)),
        min_gap_optimized=float(np.nanmin(gaps_opt)),
    )
