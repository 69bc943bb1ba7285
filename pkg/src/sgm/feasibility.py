"""Feasible-region geometry.

Membership tests for the L1-type conservative region and the lattice inner
approximation, grid scans of the minimum Hessian eigenvalue, the exact MA(2)
region for the two-frequency special case, and the Fejer-kernel
reconstruction identity used as a numerical oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, ResourceLimitError
from .model import EPS_PD, FrequencySet, gram_batch

# Hard cap on the number of lattice / reconstruction points evaluated at once.
LATTICE_POINT_CAP = 10**7

# Default scan resolutions per axis for min_eig_grid.
_GRID_RESOLUTION = {1: 201, 2: 201, 3: 41}
_MULTISTART_COUNT = 64
_CHUNK = 65536


@dataclass(frozen=True)
class LitRegion:
    """L1-type region: tau - sum_u |theta_u| u_j^2 >= 0 for every axis j."""

    tau: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.tau <= 1.0):
            raise DomainError("tau must lie in [0, 1]")


@dataclass(frozen=True)
class LatticeRegion:
    """Lattice inner approximation with rescaled coefficients, resolution M."""

    M: int

    def __post_init__(self):
        if self.M < 1:
            raise DomainError("M must be a positive integer")


Region = LitRegion | LatticeRegion


def lit_margin(freqs: FrequencySet, theta, tau: float = 1.0) -> float:
    """min_j (tau - sum_u |theta_u| u_j^2); nonnegative iff theta is in the region."""
    if not (0.0 <= tau <= 1.0):
        raise DomainError("tau must lie in [0, 1]")
    theta = freqs.check_theta(theta)
    loads = np.abs(theta) @ freqs.freqs.astype(float) ** 2
    return float((tau - loads).min())


def km_factors(freqs: FrequencySet, M: int) -> np.ndarray:
    """Per-frequency products prod_j (1 - u_j / M) of the lattice rescaling."""
    if M < freqs.u_max + 1:
        raise DomainError(f"M must be >= U_max + 1 = {freqs.u_max + 1}")
    return (1.0 - freqs.freqs / float(M)).prod(axis=1)


def scale_km(freqs: FrequencySet, theta, M: int) -> np.ndarray:
    """Componentwise rescaling theta_u / prod_j (1 - u_j / M); invertible."""
    theta = freqs.check_theta(theta)
    return theta / km_factors(freqs, M)


def _min_eig(G: np.ndarray) -> np.ndarray:
    """Minimum eigenvalue of a batch of symmetric matrices (N, m, m)."""
    m = G.shape[-1]
    if m == 1:
        return G[..., 0, 0]
    if m == 2:
        tr = G[..., 0, 0] + G[..., 1, 1]
        disc = (G[..., 0, 0] - G[..., 1, 1]) ** 2 + 4.0 * G[..., 0, 1] ** 2
        return 0.5 * (tr - np.sqrt(disc))
    return np.linalg.eigvalsh(G)[..., 0]


def _min_eig_over(freqs: FrequencySet, theta, points: np.ndarray) -> float:
    best = np.inf
    for lo in range(0, len(points), _CHUNK):
        G = gram_batch(freqs, theta, points[lo : lo + _CHUNK])
        best = min(best, float(_min_eig(G).min()))
    return best


def _tensor_grid(values_per_axis: list[np.ndarray]) -> np.ndarray:
    mesh = np.meshgrid(*values_per_axis, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


class LatticeCheck(NamedTuple):
    feasible: bool
    margin: float


def lattice_feasible(
    freqs: FrequencySet, theta, M: int, cap: int = LATTICE_POINT_CAP
) -> LatticeCheck:
    """Membership in the lattice region: rescaled Hessian PD at every lattice point.

    Returns the minimum eigenvalue margin over the lattice {0, 1/M, ..., 1}^m;
    feasible means the margin exceeds EPS_PD.
    """
    scaled = scale_km(freqs, theta, M)
    npts = (M + 1) ** freqs.dim
    if npts > cap:
        raise ResourceLimitError(f"lattice has {npts} points, cap is {cap}")
    axis = np.arange(M + 1) / float(M)
    margin = _min_eig_over(freqs, scaled, _tensor_grid([axis] * freqs.dim))
    return LatticeCheck(feasible=margin > EPS_PD, margin=margin)


def min_eig_grid(
    freqs: FrequencySet, theta, resolution: int | None = None, seed: int = 0
) -> float:
    """Approximate min over [0,1]^m of the smallest Hessian eigenvalue.

    Dense grid scan for m <= 3; random multistart coordinate descent for
    m >= 4.  The sign decides approximate membership of the feasible region.
    """
    theta = freqs.check_theta(theta)
    m = freqs.dim
    if resolution is None:
        resolution = _GRID_RESOLUTION.get(m, 33)
    if resolution < 2:
        raise DomainError("resolution must be >= 2")
    axis = np.linspace(0.0, 1.0, resolution)
    if m <= 3:
        return _min_eig_over(freqs, theta, _tensor_grid([axis] * m))

    rng = np.random.default_rng(seed)
    starts = rng.random((_MULTISTART_COUNT, m))
    best = np.inf
    for x0 in starts:
        x = x0.copy()
        val = _min_eig(gram_batch(freqs, theta, x[None]))[0]
        for _ in range(8):  # coordinate-descent sweeps
            improved = False
            for j in range(m):
                cand = np.tile(x, (resolution, 1))
                cand[:, j] = axis
                vals = _min_eig(gram_batch(freqs, theta, cand))
                i = int(vals.argmin())
                if vals[i] < val - 1e-14:
                    val = vals[i]
                    x[j] = axis[i]
                    improved = True
            if not improved:
                break
        best = min(best, float(val))
    return best


def ma2_feasible(theta11: float, theta22: float) -> bool:
    """Exact feasibility for the frequency set {(1,1), (2,2)}.

    Both Hessian eigenvalues have the form 1 + a cos(z) + b cos(2z) with
    a = theta11 and b = 4 theta22.  Writing c = cos(z), the minimum of the
    quadratic 2b c^2 + a c + (1 - b) over c in [-1, 1] is nonnegative iff
    a^2 <= 8b(1-b) when the vertex is interior (b > 0 and |a| <= 4b), and
    |a| <= 1 + b otherwise.
    """
    a, b = float(theta11), 4.0 * float(theta22)
    if b > 0.0 and abs(a) <= 4.0 * b:
        return bool(a**2 <= 8.0 * b * (1.0 - b))
    return bool(abs(a) <= 1.0 + b)


def fejer_kernel(M: int, z):
    """Nonnegative kernel (1 / 2M^2) (sin(pi M z / 2) / sin(pi z / 2))^2.

    The removable singularity at even integers evaluates to 1/2.
    """
    if M < 1:
        raise DomainError("M must be a positive integer")
    z = np.asarray(z, dtype=float)
    denom = np.sin(np.pi * z / 2.0)
    out = np.full(z.shape, 0.5)
    ok = np.abs(denom) > 1e-9
    num = np.sin(np.pi * M * z[ok] / 2.0)
    out[ok] = (num / denom[ok]) ** 2 / (2.0 * M**2)
    return out if out.ndim else float(out)


def fejer_reconstruct(
    freqs: FrequencySet, theta, M: int, x, cap: int = LATTICE_POINT_CAP
) -> np.ndarray:
    """Reconstruct D2 psi(x | theta) from rescaled Hessians on the signed lattice.

    Evaluates sum over xi in R_M^m of D2 psi(xi | K_M theta) prod_j Q_M(x_j - xi_j)
    with R_M = {-(M-1)/M, ..., (M-1)/M, 1}, using the periodic/even extension of
    the trigonometric formulas.  Serves as a numerical oracle for ``hessian``.
    """
    scaled = scale_km(freqs, theta, M)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (freqs.dim,):
        raise DomainError(f"point must have {freqs.dim} coordinates")
    npts = (2 * M) ** freqs.dim
    if npts > cap:
        raise ResourceLimitError(f"reconstruction needs {npts} points, cap is {cap}")
    axis = np.arange(-(M - 1), M + 1) / float(M)
    pts = _tensor_grid([axis] * freqs.dim)
    weights = np.ones(len(pts))
    for j in range(freqs.dim):
        weights = weights * fejer_kernel(M, x[j] - pts[:, j])
    G = gram_batch(freqs, scaled, pts)
    return np.einsum("n,nij->ij", weights, G)
