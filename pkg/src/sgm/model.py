"""Core gradient-model mathematics on the unit hypercube.

The density is p(x) = det(D2 psi(x)) where the potential

    psi(x | theta) = x.x / 2 - sum_u theta_u / pi^2 * prod_j cos(pi u_j x_j)

is indexed by a finite set of nonnegative integer frequency vectors u.
This module provides the frequency-set construction, the Hessian field,
density, score, the mixture baseline, and Fisher information (both the
diagonal at the origin and the two known closed forms).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, IndefiniteHessianError, SingularHessianError

# Pivot tolerance separating "semidefinite" from "indefinite" in factorizations.
EPS_PD = 1e-10

# Below this |theta| the closed-form Fisher expressions switch to their
# analytic limits (removable 0/0 singularity).
_FISHER_LIMIT_THETA = 1e-6


@dataclass(frozen=True)
class FrequencySet:
    """An ordered set of distinct nonzero frequency vectors in Z>=0^m.

    Vectors are kept in lexicographic order with the last coordinate most
    significant, so parameter indices are reproducible across runs.
    """

    dim: int
    freqs: np.ndarray  # (size, dim) int array

    def __post_init__(self):
        arr = np.asarray(self.freqs, dtype=int)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise DomainError(f"frequency array must be (k, {self.dim})")
        if self.dim < 1:
            raise DomainError("dimension must be >= 1")
        if arr.shape[0] == 0:
            raise DomainError("frequency set must be nonempty")
        if (arr < 0).any():
            raise DomainError("frequencies must be nonnegative")
        if (arr.sum(axis=1) == 0).any():
            raise DomainError("the all-zero frequency is not identifiable")
        arr = arr[np.lexsort(arr.T)]
        if any(np.array_equal(arr[i], arr[i + 1]) for i in range(len(arr) - 1)):
            raise DomainError("frequency vectors must be distinct")
        arr.setflags(write=False)
        object.__setattr__(self, "freqs", arr)

    @classmethod
    def from_vectors(cls, vectors) -> "FrequencySet":
        arr = np.atleast_2d(np.asarray(vectors, dtype=int))
        return cls(dim=arr.shape[1], freqs=arr)

    @property
    def size(self) -> int:
        return self.freqs.shape[0]

    def __len__(self) -> int:
        return self.size

    @property
    def u_max(self) -> int:
        """Largest single component over all vectors."""
        return int(self.freqs.max())

    @property
    def sqnorms(self) -> np.ndarray:
        """Squared Euclidean norm ||u||^2 per vector."""
        return (self.freqs.astype(float) ** 2).sum(axis=1)

    @property
    def supports(self) -> np.ndarray:
        """Support size |{j : u_j > 0}| per vector."""
        return (self.freqs > 0).sum(axis=1)

    def index(self, u) -> int:
        u = np.asarray(u, dtype=int)
        hits = np.nonzero((self.freqs == u).all(axis=1))[0]
        if len(hits) == 0:
            raise KeyError(f"{tuple(u)} not in frequency set")
        return int(hits[0])

    def check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape != (self.size,):
            raise DomainError(f"theta must have length {self.size}, got {theta.shape}")
        if not np.isfinite(theta).all():
            raise DomainError("theta entries must be finite")
        return theta


def standard_freq_set(m: int) -> FrequencySet:
    """All nonzero u with max-norm <= 2 and 1-norm <= 3, canonically ordered.

    The cardinality is m(m+1)(m+5)/6.
    """
    if m < 1:
        raise DomainError("m must be a positive integer")
    vecs = []
    for j in range(m):
        for v in (1, 2):
            u = [0] * m
            u[j] = v
            vecs.append(u)
    for i, j in itertools.combinations(range(m), 2):
        for vi, vj in ((1, 1), (1, 2), (2, 1)):
            u = [0] * m
            u[i], u[j] = vi, vj
            vecs.append(u)
    for i, j, k in itertools.combinations(range(m), 3):
        u = [0] * m
        u[i] = u[j] = u[k] = 1
        vecs.append(u)
    return FrequencySet.from_vectors(vecs)


# ---------------------------------------------------------------------------
# Vectorized trigonometric evaluation
# ---------------------------------------------------------------------------

def _points(x, dim) -> tuple[np.ndarray, bool]:
    """Normalize x to an (N, dim) array; report whether it was a single point."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape != (dim,):
            raise DomainError(f"point must have {dim} coordinates")
        return x[None, :], True
    if x.ndim != 2 or x.shape[1] != dim:
        raise DomainError(f"points must be (N, {dim})")
    return x, False


def _check_unit_cube(x):
    if (x < -1e-12).any() or (x > 1 + 1e-12).any():
        raise DomainError("coordinates must lie in [0, 1]")


def _trig_tables(freqs: FrequencySet, X: np.ndarray):
    """cos/sin tables of shape (N, k, m) for pi * u_j * x_j."""
    ang = np.pi * X[:, None, :] * freqs.freqs[None, :, :]
    return np.cos(ang), np.sin(ang)


def _prod_excluding(C: np.ndarray, skip: tuple[int, ...]) -> np.ndarray:
    """Product of C over the last axis, excluding the listed columns."""
    m = C.shape[-1]
    keep = [j for j in range(m) if j not in skip]
    if not keep:
        return np.ones(C.shape[:-1])
    return C[..., keep].prod(axis=-1)


def gram_batch(freqs: FrequencySet, theta, X) -> np.ndarray:
    """Model Hessians D2 psi(x | theta) for a batch of points, shape (N, m, m).

    Exactly symmetric by construction.  The trigonometric formulas extend
    naturally outside [0, 1]^m; the domain is not checked here.
    """
    theta = freqs.check_theta(theta)
    X = np.asarray(X, dtype=float)
    m = freqs.dim
    U = freqs.freqs.astype(float)
    C, S = _trig_tables(freqs, X)
    P = C.prod(axis=-1)  # (N, k)
    G = np.zeros((X.shape[0], m, m))
    for j in range(m):
        G[:, j, j] = 1.0 + P @ (theta * U[:, j] ** 2)
    for j in range(m):
        for l in range(j + 1, m):
            w = -theta * U[:, j] * U[:, l]
            if not w.any():
                continue
            L2 = _prod_excluding(C, (j, l))
            v = (S[:, :, j] * S[:, :, l] * L2) @ w
            G[:, j, l] = v
            G[:, l, j] = v
    return G


def hessian_basis_batch(freqs: FrequencySet, X) -> np.ndarray:
    """Per-frequency Hessian basis matrices H_u(x), shape (N, k, m, m)."""
    X = np.asarray(X, dtype=float)
    m = freqs.dim
    U = freqs.freqs.astype(float)
    C, S = _trig_tables(freqs, X)
    P = C.prod(axis=-1)
    H = np.zeros((X.shape[0], freqs.size, m, m))
    for j in range(m):
        H[:, :, j, j] = U[None, :, j] ** 2 * P
    for j in range(m):
        for l in range(j + 1, m):
            w = U[:, j] * U[:, l]
            if not w.any():
                continue
            L2 = _prod_excluding(C, (j, l))
            v = -w[None, :] * S[:, :, j] * S[:, :, l] * L2
            H[:, :, j, l] = v
            H[:, :, l, j] = v
    return H


def density_batch(freqs: FrequencySet, theta, X) -> np.ndarray:
    """det(D2 psi) for a batch of points.  No feasibility checking."""
    return np.linalg.det(gram_batch(freqs, theta, X))


def mixm_density_batch(freqs: FrequencySet, theta, X) -> np.ndarray:
    theta = freqs.check_theta(theta)
    X = np.asarray(X, dtype=float)
    C, _ = _trig_tables(freqs, X)
    return 1.0 + C.prod(axis=-1) @ (theta * freqs.sqnorms)


def potential_batch(freqs: FrequencySet, theta, X) -> np.ndarray:
    theta = freqs.check_theta(theta)
    X = np.asarray(X, dtype=float)
    C, _ = _trig_tables(freqs, X)
    return 0.5 * (X**2).sum(axis=1) - C.prod(axis=-1) @ theta / np.pi**2


def gradient_map_batch(freqs: FrequencySet, theta, X) -> np.ndarray:
    theta = freqs.check_theta(theta)
    X = np.asarray(X, dtype=float)
    U = freqs.freqs.astype(float)
    C, S = _trig_tables(freqs, X)
    out = X.copy()
    for j in range(freqs.dim):
        L1 = _prod_excluding(C, (j,))
        out[:, j] += (S[:, :, j] * L1) @ (theta * U[:, j]) / np.pi
    return out


def score_batch(freqs: FrequencySet, theta, X, H: np.ndarray | None = None) -> np.ndarray:
    """Score components tr(G^{-1} H_u) for a batch of points, shape (N, k)."""
    G = gram_batch(freqs, theta, X)
    if H is None:
        H = hessian_basis_batch(freqs, X)
    try:
        Y = np.linalg.solve(G[:, None, :, :], H)
    except np.linalg.LinAlgError as exc:
        raise SingularHessianError("model Hessian is singular at a sample point") from exc
    return np.trace(Y, axis1=-2, axis2=-1)


# ---------------------------------------------------------------------------
# Single-point operations
# ---------------------------------------------------------------------------

def hessian_basis(u, x) -> np.ndarray:
    """The basis matrix H_u(x) = D2(-pi^{-2} prod_j cos(pi u_j x_j))."""
    u = np.atleast_2d(np.asarray(u, dtype=int))
    fs = FrequencySet(dim=u.shape[1], freqs=u)
    x, _ = _points(x, fs.dim)
    _check_unit_cube(x)
    return hessian_basis_batch(fs, x)[0, 0]


def hessian(freqs: FrequencySet, theta, x) -> np.ndarray:
    """D2 psi(x | theta) = I + sum_u theta_u H_u(x)."""
    x, _ = _points(x, freqs.dim)
    _check_unit_cube(x)
    return gram_batch(freqs, theta, x)[0]


def potential(freqs: FrequencySet, theta, x) -> float:
    x, _ = _points(x, freqs.dim)
    _check_unit_cube(x)
    return float(potential_batch(freqs, theta, x)[0])


def gradient_map(freqs: FrequencySet, theta, x) -> np.ndarray:
    """The transport map D psi.  Fixes every face of the hypercube."""
    x, _ = _points(x, freqs.dim)
    _check_unit_cube(x)
    return gradient_map_batch(freqs, theta, x)[0]


def density(freqs: FrequencySet, theta, x) -> float:
    """det(D2 psi(x | theta)) via Cholesky factorization.

    Returns 0.0 when the matrix is semidefinite at x; raises
    IndefiniteHessianError when it has an eigenvalue below -EPS_PD,
    which signals an infeasible theta.
    """
    G = hessian(freqs, theta, x)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        lam = np.linalg.eigvalsh(G)
        if lam[0] < -EPS_PD:
            raise IndefiniteHessianError(
                f"Hessian indefinite at x={np.asarray(x)}: min eigenvalue {lam[0]:.3e}"
            ) from None
        return 0.0
    return float(np.prod(np.diag(L)) ** 2)


def mixm_density(freqs: FrequencySet, theta, x) -> float:
    """Mixture-model density 1 + sum_u theta_u ||u||^2 prod_j cos(pi u_j x_j)."""
    x, _ = _points(x, freqs.dim)
    _check_unit_cube(x)
    return float(mixm_density_batch(freqs, theta, x)[0])


def score(freqs: FrequencySet, theta, x) -> np.ndarray:
    """Per-frequency score d log p / d theta_u = tr(G^{-1} H_u(x))."""
    x, _ = _points(x, freqs.dim)
    _check_unit_cube(x)
    return score_batch(freqs, theta, x)[0]


# ---------------------------------------------------------------------------
# Fisher information
# ---------------------------------------------------------------------------

def fisher_origin(freqs: FrequencySet) -> np.ndarray:
    """Diagonal of the Fisher information at theta = 0: ||u||^4 / 2^{|supp u|}.

    The off-diagonal entries vanish, so the diagonal is returned as a vector.
    """
    return freqs.sqnorms**2 / 2.0 ** freqs.supports


def fisher_closed_1d(u: int, theta: float) -> float:
    """Closed-form Fisher information for the one-dimensional single-frequency model.

    Valid for |theta| u^2 < 1; returns the analytic limit u^4 / 2 near 0.
    """
    if not (isinstance(u, (int, np.integer)) and u >= 1):
        raise DomainError("u must be a positive integer")
    t = theta**2 * float(u) ** 4
    if t >= 1.0:
        raise DomainError(f"theta^2 u^4 = {t:g} >= 1 is outside the model domain")
    if abs(theta) < _FISHER_LIMIT_THETA:
        return float(u) ** 4 / 2.0
    r = np.sqrt(1.0 - t)
    return float((1.0 - r) / (theta**2 * r))


def fisher_closed_corr(theta: float) -> float:
    """Closed-form Fisher information for the two-dimensional u=(1,1) model.

    Valid for |theta| < 1; returns the analytic limit 1 near 0.
    """
    if abs(theta) >= 1.0:
        raise DomainError("|theta| must be < 1")
    if abs(theta) < _FISHER_LIMIT_THETA:
        return 1.0
    r = np.sqrt(1.0 - theta**2)
    return float(2.0 * (1.0 - r) / (theta**2 * r))
