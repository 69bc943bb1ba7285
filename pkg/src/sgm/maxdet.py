"""Determinant maximization by log-barrier Newton path following.

Solves problems of the form

    maximize   sum_i w_i log det(A_i0 + sum_k theta_k A_ik) + c' theta
    subject to B_j0 + sum_k theta_k B_jk  positive definite
               a_l' theta <= b_l,

with all matrices dense symmetric.  Constraints enter through a logarithmic
barrier scaled by mu; damped Newton steps recenter after each geometric
shrink of mu.  All arithmetic is deterministic: identical inputs and
configuration produce bitwise-identical iterate sequences.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .errors import DomainError, InfeasibleStartError, LineSearchError

logger = logging.getLogger("sgm.maxdet")

_ARMIJO = 0.01
_BACKTRACK = 0.5
_MIN_STEP = 1e-14


def _symmetrize(A: np.ndarray, what: str) -> np.ndarray:
    if np.abs(A - np.swapaxes(A, -1, -2)).max() > 1e-10 * (1.0 + np.abs(A).max()):
        raise DomainError(f"{what} must be symmetric")
    return 0.5 * (A + np.swapaxes(A, -1, -2))


@dataclass(frozen=True)
class AffineMatrix:
    """Affine symmetric-matrix map theta -> base + sum_k theta_k coeffs[k]."""

    base: np.ndarray      # (s, s)
    coeffs: np.ndarray    # (p, s, s)
    weight: float = 1.0   # objective weight; ignored for constraints

    def __post_init__(self):
        base = _symmetrize(np.asarray(self.base, dtype=float), "base matrix")
        coeffs = _symmetrize(np.asarray(self.coeffs, dtype=float), "coefficient matrices")
        if coeffs.ndim != 3 or coeffs.shape[1:] != base.shape:
            raise DomainError("coefficient stack must be (p, s, s) matching base")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def size(self) -> int:
        return self.base.shape[0]

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        return self.base + np.tensordot(theta, self.coeffs, axes=1)


class _Block:
    """A stack of same-shape affine maps evaluated with batched linear algebra."""

    def __init__(self, mats: list[AffineMatrix]):
        self.bases = np.stack([m.base for m in mats])        # (T, s, s)
        self.coeffs = np.stack([m.coeffs for m in mats])     # (T, p, s, s)
        self.weights = np.array([m.weight for m in mats])    # (T,)
        self.size = mats[0].size
        self.count = len(mats)

    def matrices(self, theta) -> np.ndarray:
        return self.bases + np.einsum("p,tpij->tij", theta, self.coeffs)

    def cholesky(self, theta) -> np.ndarray | None:
        try:
            return np.linalg.cholesky(self.matrices(theta))
        except np.linalg.LinAlgError:
            return None

    def logdets(self, L: np.ndarray) -> np.ndarray:
        return 2.0 * np.log(np.diagonal(L, axis1=-2, axis2=-1)).sum(axis=-1)

    def whitened(self, L: np.ndarray) -> np.ndarray:
        """W[t, k] = L_t^{-1} A_tk L_t^{-T}, shape (T, p, s, s)."""
        X = np.linalg.solve(L[:, None], self.coeffs)
        return np.linalg.solve(L[:, None], X.transpose(0, 1, 3, 2))

    def grad_rows(self, L: np.ndarray) -> np.ndarray:
        """Per-map gradient of log det, shape (T, p)."""
        W = self.whitened(L)
        return np.trace(W, axis1=-2, axis2=-1)


def _group_blocks(mats: tuple[AffineMatrix, ...]) -> list[_Block]:
    groups: dict[tuple[int, int], list[AffineMatrix]] = {}
    for m in mats:
        groups.setdefault((m.size, m.coeffs.shape[0]), []).append(m)
    return [_Block(v) for v in groups.values()]


@dataclass(frozen=True)
class MaxDetProblem:
    nvars: int
    objective_terms: tuple[AffineMatrix, ...]
    psd_constraints: tuple[AffineMatrix, ...] = ()
    linear_constraints: tuple[tuple[np.ndarray, float], ...] = ()
    linear_cost: np.ndarray | None = None

    def __post_init__(self):
        terms = tuple(self.objective_terms)
        psd = tuple(self.psd_constraints)
        for t in terms + psd:
            if t.coeffs.shape[0] != self.nvars:
                raise DomainError("coefficient stack does not match nvars")
        lin = []
        for a, b in self.linear_constraints:
            a = np.asarray(a, dtype=float).reshape(-1)
            if a.shape != (self.nvars,):
                raise DomainError("linear constraint vector has wrong length")
            lin.append((a, float(b)))
        cost = self.linear_cost
        if cost is not None:
            cost = np.asarray(cost, dtype=float).reshape(-1)
            if cost.shape != (self.nvars,):
                raise DomainError("linear cost has wrong length")
        object.__setattr__(self, "objective_terms", terms)
        object.__setattr__(self, "psd_constraints", psd)
        object.__setattr__(self, "linear_constraints", tuple(lin))
        object.__setattr__(self, "linear_cost", cost)
        A = np.stack([a for a, _ in lin]) if lin else np.zeros((0, self.nvars))
        b = np.array([b for _, b in lin])
        object.__setattr__(self, "_lin_A", A)
        object.__setattr__(self, "_lin_b", b)
        object.__setattr__(self, "_obj_blocks", _group_blocks(terms))
        object.__setattr__(self, "_psd_blocks", _group_blocks(psd))

    @property
    def barrier_degree(self) -> int:
        """Total barrier complexity: sum of PSD block sizes plus linear count."""
        return sum(c.size for c in self.psd_constraints) + len(self.linear_constraints)


@dataclass(frozen=True)
class SolverConfig:
    barrier_init: float = 1.0
    barrier_shrink: float = 0.2
    newton_tol: float = 1e-9
    max_newton: int = 50
    max_outer: int = 30

    def __post_init__(self):
        if min(self.barrier_init, self.barrier_shrink, self.newton_tol) <= 0:
            raise DomainError("solver parameters must be positive")
        if not self.barrier_shrink < 1:
            raise DomainError("barrier_shrink must be < 1")
        if min(self.max_newton, self.max_outer) < 1:
            raise DomainError("iteration budgets must be >= 1")


@dataclass(frozen=True)
class SolveReport:
    theta: np.ndarray
    objective: float
    kkt_residual: float
    newton_iterations: int
    outer_iterations: int
    converged: bool
    mu_final: float
    path: tuple[tuple[float, float], ...] = field(default=())
    message: str = ""


def _logdet_sum(blocks, theta, need_hess, weighted):
    """Accumulate (value, grad, hess) over blocks; None if any map is not PD."""
    if not blocks:
        return 0.0, None, None
    p = blocks[0].coeffs.shape[1]
    value = 0.0
    grad = np.zeros(p)
    hess = np.zeros((p, p)) if need_hess else None
    for blk in blocks:
        L = blk.cholesky(theta)
        if L is None:
            return None
        w = blk.weights if weighted else np.ones(blk.count)
        value += float(w @ blk.logdets(L))
        W = blk.whitened(L)
        grad += np.einsum("t,tkii->k", w, W)
        if need_hess:
            hess -= np.einsum("t,tkij,tlij->kl", w, W, W)
    return value, grad, hess


def _logdet_values(blocks, theta, weighted):
    """Weighted sum of log-dets only; None if any map is not PD."""
    value = 0.0
    for blk in blocks:
        L = blk.cholesky(theta)
        if L is None:
            return None
        w = blk.weights if weighted else np.ones(blk.count)
        value += float(w @ blk.logdets(L))
    return value


def objective_eval(problem: MaxDetProblem, theta, need_hess: bool = True):
    """Value, gradient, and curvature matrix of the barrier-free objective.

    The curvature matrix is negative semidefinite (the objective is concave).
    Raises DomainError if any objective term fails to factorize at theta.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    p = problem.nvars
    parts = _logdet_sum(problem._obj_blocks, theta, need_hess, weighted=True)
    if parts is None:
        raise DomainError("objective term is not positive definite at theta")
    value, grad, hess = parts
    if grad is None:
        grad = np.zeros(p)
        hess = np.zeros((p, p)) if need_hess else None
    if problem.linear_cost is not None:
        value = value + float(problem.linear_cost @ theta)
        grad = grad + problem.linear_cost
    return value, grad, hess


def _barrier_parts(problem: MaxDetProblem, theta, need_hess: bool):
    """(value, grad, hess) of the unit-mu barrier; None when theta is infeasible."""
    p = problem.nvars
    parts = _logdet_sum(problem._psd_blocks, theta, need_hess, weighted=False)
    if parts is None:
        return None
    value, grad, hess = parts
    if grad is None:
        grad = np.zeros(p)
        hess = np.zeros((p, p)) if need_hess else None
    A, b = problem._lin_A, problem._lin_b
    if len(b):
        s = b - A @ theta
        if (s <= 0).any():
            return None
        value += float(np.log(s).sum())
        grad = grad - A.T @ (1.0 / s)
        if need_hess:
            hess = hess - (A.T / s**2) @ A
    return value, grad, hess


def _merit(problem, theta, mu):
    """Barrier-augmented objective value, or None if theta is out of domain."""
    value = _logdet_values(problem._obj_blocks, theta, weighted=True)
    if value is None:
        return None
    if problem.linear_cost is not None:
        value += float(problem.linear_cost @ theta)
    bar = _logdet_values(problem._psd_blocks, theta, weighted=False)
    if bar is None:
        return None
    A, b = problem._lin_A, problem._lin_b
    if len(b):
        s = b - A @ theta
        if (s <= 0).any():
            return None
        bar += float(np.log(s).sum())
    return value + mu * bar


def _newton_direction(grad, hess):
    """Solve (-hess) d = grad with an escalating ridge if the curvature is flat."""
    W = -hess
    scale = max(np.trace(W) / max(len(grad), 1), 1.0)
    ridge = 0.0
    for _ in range(12):
        try:
            L = np.linalg.cholesky(W + ridge * np.eye(len(grad)))
        except np.linalg.LinAlgError:
            ridge = max(20.0 * ridge, 1e-11 * scale)
            continue
        y = np.linalg.solve(L, grad)
        return np.linalg.solve(L.T, y)
    raise LineSearchError("Newton system could not be factorized")


def _newton_step(problem, theta, mu, grad_tol):
    """One damped Newton step; returns (theta_new, at_center).

    Centering is declared when the barrier-objective gradient norm falls
    below grad_tol (this is what bounds the final KKT residual), or when
    the Newton decrement reaches the floating-point floor.  Once the
    decrement drops below the resolution at which merit improvements are
    verifiable, the full Newton step is trusted subject to feasibility only.
    """
    value, grad, hess = objective_eval(problem, theta, need_hess=True)
    bar = _barrier_parts(problem, theta, need_hess=True)
    if bar is None:
        raise InfeasibleStartError("theta is not strictly feasible")
    bval, bgrad, bhess = bar
    g = grad + mu * bgrad
    if np.linalg.norm(g) <= grad_tol:
        return theta, True
    H = hess + mu * bhess
    direction = _newton_direction(g, H)
    decrement = float(g @ direction)
    merit0 = value + mu * bval
    scale = 1.0 + abs(merit0)
    if decrement / 2.0 <= 1e-19 * scale:
        return theta, True  # flat to machine precision; cannot improve further
    check_merit = decrement / 2.0 > 1e-12 * scale
    t = 1.0
    while t >= _MIN_STEP:
        cand = theta + t * direction
        merit = _merit(problem, cand, mu)
        if merit is not None and (
            not check_merit or merit >= merit0 + _ARMIJO * t * decrement
        ):
            return cand, False
        t *= _BACKTRACK
    raise LineSearchError(f"line search failed (decrement {decrement:.3e})")


def barrier_step(
    problem: MaxDetProblem, theta, mu: float, config: SolverConfig | None = None
) -> np.ndarray:
    """One damped Newton step on the barrier-augmented objective at parameter mu.

    Backtracking rejects any step leaving the strictly feasible domain, and
    the merit value never decreases beyond floating-point resolution.  At
    the barrier optimum the input is returned unchanged (within newton_tol).
    """
    config = config or SolverConfig()
    theta = np.asarray(theta, dtype=float).reshape(-1)
    new, _ = _newton_step(problem, theta, mu, config.newton_tol)
    return new


def kkt_residual(problem: MaxDetProblem, theta) -> float:
    """Stationarity-plus-complementarity residual with barrier-recovered multipliers.

    Each constraint gets a nonnegative multiplier scale along its barrier
    gradient direction (mu_l / slack for linear rows, mu_j P_j^{-1} for PSD
    blocks); the scales minimize the combined norm of the stationarity
    residual and the complementarity products.  Zero at the true optimum;
    equals the plain gradient norm when the problem has no constraints.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    _, g, _ = objective_eval(problem, theta, need_hess=False)
    if problem.barrier_degree == 0:
        return float(np.linalg.norm(g))
    cols = []
    comp_weight = []
    for blk in problem._psd_blocks:
        L = blk.cholesky(theta)
        if L is None:
            raise InfeasibleStartError("theta is not strictly feasible")
        rows = blk.grad_rows(L)  # (T, p)
        cols.append(rows.T)
        comp_weight.extend([float(blk.size)] * blk.count)
    A, b = problem._lin_A, problem._lin_b
    if len(b):
        s = b - A @ theta
        if (s <= 0).any():
            raise InfeasibleStartError("theta is not strictly feasible")
        cols.append(-(A / s[:, None]).T)
        comp_weight.extend([1.0] * len(b))
    M = np.concatenate(cols, axis=1)
    q = M.shape[1]
    augmented = np.vstack([M, np.diag(comp_weight)])
    rhs = np.concatenate([-g, np.zeros(q)])
    _, resid = nnls(augmented, rhs)
    return float(resid)


def solve(problem: MaxDetProblem, config: SolverConfig | None = None) -> SolveReport:
    """Maximize the objective over the strictly feasible region from theta = 0.

    The outer loop shrinks mu geometrically until the recovered KKT residual
    falls below newton_tol * (1 + |grad f(0)|); each center is found by
    damped Newton iteration.  Exhausted budgets return the best iterate
    flagged as not converged.
    """
    config = config or SolverConfig()
    theta = np.zeros(problem.nvars)
    try:
        _, g0, _ = objective_eval(problem, theta, need_hess=False)
    except DomainError as exc:
        raise InfeasibleStartError(f"objective terms not positive definite at 0: {exc}") from exc
    if _barrier_parts(problem, theta, need_hess=False) is None:
        raise InfeasibleStartError("a constraint margin at theta = 0 is not strictly positive")
    target = config.newton_tol * (1.0 + float(np.linalg.norm(g0)))
    grad_tol = 0.5 * target
    nu = problem.barrier_degree

    mu = config.barrier_init
    newton_total = 0
    outer = 0
    path: list[tuple[float, float]] = []
    converged = False
    message = ""
    best: tuple[float, np.ndarray, float] | None = None  # (kkt, theta, mu)
    while outer < config.max_outer:
        outer += 1
        centered = False
        for _ in range(config.max_newton):
            try:
                new, centered = _newton_step(problem, theta, mu, grad_tol)
            except LineSearchError as exc:
                message = str(exc)
                break
            if centered:
                break
            newton_total += 1
            theta = new
        value, _, _ = objective_eval(problem, theta, need_hess=False)
        path.append((mu, value))
        logger.debug("outer %d: mu=%.3e objective=%.12g", outer, mu, value)
        if nu == 0:
            converged = centered
            if not centered and not message:
                message = "newton budget exhausted"
            break
        if message:
            break
        if not centered:
            message = "newton budget exhausted"
            break
        if mu * nu <= 0.5 * target:
            kkt = kkt_residual(problem, theta)
            if best is None or kkt < best[0]:
                best = (kkt, theta, mu)
            if kkt <= target:
                converged = True
                break
            if kkt > 4.0 * best[0]:
                # shrinking mu further only degrades the certificate numerically
                message = "KKT residual at the floating-point floor"
                break
        mu *= config.barrier_shrink
    else:
        message = "outer iteration budget exhausted"

    if best is not None:
        kkt, theta, mu = best
        converged = converged or kkt <= target
    else:
        kkt = kkt_residual(problem, theta)
        if message and nu > 0 and not converged:
            converged = kkt <= 10.0 * target
    value, _, _ = objective_eval(problem, theta, need_hess=False)
    return SolveReport(
        theta=theta,
        objective=value,
        kkt_residual=kkt,
        newton_iterations=newton_total,
        outer_iterations=outer,
        converged=converged,
        mu_final=mu,
        path=tuple(path),
        message=message,
    )
