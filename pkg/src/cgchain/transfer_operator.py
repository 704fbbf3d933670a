"""Discretized transfer operator for second-neighbour chains.

The partition function of a chain with first- and second-neighbour pair
interactions factorizes through the integral kernel

    K0(x, y) = exp(-beta*W2(x + y) - (beta/2)*W1(x) - (beta/2)*W1(y)),

and the exponentially tilted family

    K0_xi(x, y) = exp(xi*x/2) * exp(xi*y/2) * K0(x, y),

whose leading eigenvalue lambda(xi) encodes the scaled cumulant generating
function of the bond lengths: ln(lambda(xi)/lambda(0)) is convex in xi and
its Legendre transform gives the thermodynamic-limit free energy.

This module discretizes the (symmetric, positive) kernel on a uniform grid
with trapezoid weights, in the similarity-transformed form

    M[i, j] = sqrt(w_i) * sqrt(w_j) * K0_xi(y_i, y_j),

which is symmetric, so power iteration converges to the leading eigenpair
and the eigenvector recovers the weighted eigenfunction sqrt(w_i)*psi(y_i).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .potentials import PairPotential
from .quadrature import NonIntegrableError

#: Hard floor (in log10) for the kernel tail relative to its peak; grids whose
#: endpoints carry more mass than this fail the tail test.
_TAIL_LOG_DROP = 40.0 * np.log(10.0)


@dataclass(frozen=True)
class UniformGrid:
    """Uniform 1D grid with trapezoid quadrature weights."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("grid needs at least 3 points")
        if not self.hi > self.lo:
            raise ValueError("grid needs hi > lo")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    @property
    def weights(self) -> np.ndarray:
        h = (self.hi - self.lo) / (self.n - 1)
        w = np.full(self.n, h)
        w[0] = w[-1] = h / 2.0
        return w


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetrized discretization of the tilted transfer kernel.

    Attributes
    ----------
    grid : UniformGrid
        The y-grid the kernel is discretized on.
    weights : ndarray
        Trapezoid weights of the grid.
    entries : ndarray, shape (n, n)
        M[i, j] = sqrt(w_i w_j) K0_xi(y_i, y_j); symmetric, nonnegative.
    """

    grid: UniformGrid
    weights: np.ndarray
    entries: np.ndarray


@dataclass
class SpectralTable:
    """Tabulated ln(lambda0 * Lambda(xi)) over a tilt grid.

    ``log_lambda0Lambda[k]`` is the log of the leading eigenvalue of the
    tilted kernel at ``xi_values[k]``; ``mean_y[k]`` is the first moment
    of the squared leading eigenfunction, which equals the derivative of
    the log-eigenvalue curve.  Eigenfunctions (weight-normalized, positive)
    are cached per tilt.
    """

    xi_values: np.ndarray
    log_lambda0Lambda: np.ndarray
    mean_y: np.ndarray
    grid: UniformGrid
    eigenfunctions: dict = field(default_factory=dict)

    @property
    def log_lambda0(self) -> float:
        """ln lambda(0), so that ln Lambda(xi) = table - log_lambda0."""
        k = int(np.argmin(np.abs(self.xi_values)))
        if abs(self.xi_values[k]) > 1e-12:
            raise ValueError("tilt grid does not contain xi = 0")
        return float(self.log_lambda0Lambda[k])

    def log_Lambda(self) -> np.ndarray:
        return self.log_lambda0Lambda - self.log_lambda0


def _log_tilted_w1(W1: PairPotential, beta: float, xi: float,
                   y: np.ndarray) -> np.ndarray:
    v, _ = W1(y)
    return xi * y / 2.0 - (beta / 2.0) * v


def tail_test(W1: PairPotential, beta: float, xi: float,
              grid: UniformGrid) -> None:
    """Check that exp(xi*y/2 - (beta/2)W1(y)) is negligible at the grid ends.

    Raises
    ------
    NonIntegrableError
        If either endpoint is within ``1e-40`` (relative) of the peak.
    """
    logs = _log_tilted_w1(W1, beta, xi, grid.nodes)
    peak = np.max(logs)
    if logs[0] > peak - _TAIL_LOG_DROP or logs[-1] > peak - _TAIL_LOG_DROP:
        raise NonIntegrableError(
            "grid [%g, %g] too narrow for tilt xi=%g: endpoint mass "
            "exp(%.1f)/exp(%.1f) relative to peak"
            % (grid.lo, grid.hi, xi, max(logs[0], logs[-1]), peak))


def auto_grid(W1: PairPotential, beta: float, xi_max: float,
              n: int = 400) -> UniformGrid:
    """Pick a y-window wide enough for all tilts |xi| <= xi_max.

    Starts from the minimizer of W1 and doubles the half-width until the
    tail test passes for the extreme tilts on both sides.
    """
    c = W1.argmin()
    half = 2.0
    for _ in range(60):
        grid = UniformGrid(c - half, c + half, n)
        try:
            tail_test(W1, beta, xi_max, grid)
            tail_test(W1, beta, -xi_max, grid)
            return grid
        except NonIntegrableError:
            half *= 2.0
    raise NonIntegrableError("no finite window passes the tail test")


def build_kernel(W1: PairPotential, W2: PairPotential, beta: float,
                 xi: float, grid: UniformGrid) -> KernelMatrix:
    """Assemble the symmetrized tilted kernel matrix on ``grid``."""
    tail_test(W1, beta, xi, grid)
    y = grid.nodes
    w = grid.weights
    log_diag = _log_tilted_w1(W1, beta, xi, y)
    v2, _ = W2(y[:, None] + y[None, :])
    log_m = (log_diag[:, None] + log_diag[None, :] - beta * v2
             + 0.5 * (np.log(w)[:, None] + np.log(w)[None, :]))
    return KernelMatrix(grid=grid, weights=w, entries=np.exp(log_m))


def leading_eigenpair(K: KernelMatrix, v0: np.ndarray | None = None,
                      tol: float = 1e-13, max_iter: int = 100000):
    """Leading eigenvalue and weight-normalized positive eigenfunction.

    Power iteration on the symmetric matrix, started from the all-ones
    vector (or ``v0``), stopping when the relative eigenvalue change drops
    below ``tol``.  Returns ``(lam, psi)`` where ``psi`` is the
    eigenfunction on the grid nodes, positive, with sum(w * psi**2) == 1.

    Raises
    ------
    RuntimeError
        If the iteration does not converge within ``max_iter`` steps.
    """
    M = K.entries
    n = M.shape[0]
    v = np.ones(n) if v0 is None else np.abs(np.asarray(v0, dtype=float))
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        mv = M @ v
        new_lam = float(v @ mv)
        norm = np.linalg.norm(mv)
        if norm == 0.0:
            raise RuntimeError("kernel annihilated the iterate")
        v = mv / norm
        if abs(new_lam - lam) <= tol * abs(new_lam):
            lam = new_lam
            break
        lam = new_lam
    else:
        resid = float(np.linalg.norm(M @ v - lam * v))
        raise RuntimeError(
            "power iteration did not converge: residual %.3e" % resid)
    if np.sum(v) < 0:
        v = -v
    # v approximates sqrt(w) * psi with unit Euclidean norm, which is the
    # weight-normalization of psi on the grid.
    psi = v / np.sqrt(K.weights)
    return lam, psi


def log_lambda_curve(W1: PairPotential, W2: PairPotential, beta: float,
                     xi_grid: np.ndarray,
                     y_grid: UniformGrid | None = None,
                     cache_eigenfunctions: bool = True) -> SpectralTable:
    """Tabulate ln lambda(xi) over ``xi_grid``.

    Eigenpairs are computed in order of increasing |xi| away from the
    center so each power iteration is warm-started from the neighbouring
    eigenvector.
    """
    xi_grid = np.asarray(xi_grid, dtype=float)
    if y_grid is None:
        y_grid = auto_grid(W1, beta, float(np.max(np.abs(xi_grid))))
    order = np.argsort(xi_grid)
    xs = xi_grid[order]
    k0 = int(np.argmin(np.abs(xs)))
    log_lam = np.empty_like(xs)
    mean_y = np.empty_like(xs)
    cache: dict = {}
    y = y_grid.nodes
    w = y_grid.weights

    def sweep(indices):
        v0 = None
        for k in indices:
            K = build_kernel(W1, W2, beta, xs[k], y_grid)
            lam, psi = leading_eigenpair(K, v0=v0)
            v0 = np.sqrt(w) * psi
            log_lam[k] = np.log(lam)
            mean_y[k] = float(np.sum(w * y * psi ** 2))
            if cache_eigenfunctions:
                cache[float(xs[k])] = psi

    sweep(range(k0, len(xs)))
    sweep(range(k0, -1, -1))
    # undo the sort so the table matches the caller's xi order
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    return SpectralTable(xi_values=xi_grid,
                         log_lambda0Lambda=log_lam[inv],
                         mean_y=mean_y[inv],
                         grid=y_grid,
                         eigenfunctions=cache)


def default_xi_grid(xi_max: float = 12.0, step: float = 0.05) -> np.ndarray:
    """Symmetric tilt grid including 0."""
    m = int(round(xi_max / step))
    return step * np.arange(-m, m + 1)
