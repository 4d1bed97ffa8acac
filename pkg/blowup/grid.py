"""
Uniform-grid discretization of a box with homogeneous Dirichlet boundaries.

A field is a flat float64 array holding one value per interior node; the
boundary values are identically zero and never stored. In 2D nodes are
flattened in C order of the (nx, ny) grid, so x is the slow index.

Integrals use mass-lumped quadrature (every node carries the weight
h_x * h_y), which makes discrete integration by parts exact:
<A f, g> = <f, A g> under that inner product.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from django.conf import settings
from scipy import sparse

from blowup.exceptions import EigenSolverError, FieldShapeError, GridError

logger = logging.getLogger(__name__)

Field = npt.NDArray[np.float64]

# Multiples of eps * ||A_h||_inf below which an eigen residual is roundoff.
ROUNDOFF_FACTOR = 64


@dataclass(frozen=True)
class DomainSpec:
    """Box (0, L_x) or (0, L_x) x (0, L_y) with N interior points per axis."""

    extents: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        if len(self.extents) not in (1, 2):
            raise GridError(f"dimension must be 1 or 2, got {len(self.extents)}")
        if len(self.points) != len(self.extents):
            raise GridError("extents and points must have the same length")
        for n in self.points:
            if int(n) != n or n < 1:
                raise GridError(f"interior points per axis must be an integer >= 1, got {n!r}")
        for extent in self.extents:
            if not math.isfinite(extent) or extent <= 0:
                raise GridError(f"extent must be a positive real, got {extent!r}")

    @classmethod
    def interval(cls, extent, n):
        return cls((float(extent),), (int(n),))

    @classmethod
    def rectangle(cls, extent_x, extent_y, nx, ny):
        return cls((float(extent_x), float(extent_y)), (int(nx), int(ny)))

    @property
    def dimension(self):
        return len(self.extents)

    @property
    def widths(self):
        return tuple(extent / (n + 1) for extent, n in zip(self.extents, self.points))

    @property
    def n_nodes(self):
        return math.prod(self.points)

    @property
    def weight(self):
        """Mass-lumped quadrature weight shared by every node."""
        return math.prod(self.widths)

    def axis_coordinates(self):
        return [h * np.arange(1, n + 1) for h, n in zip(self.widths, self.points)]

    def nodes(self):
        """Node coordinates, shape (n_nodes, dimension), in field order."""
        axes = np.meshgrid(*self.axis_coordinates(), indexing='ij')
        return np.stack([axis.ravel() for axis in axes], axis=1)


def _second_difference(n, h):
    return sparse.diags(
        [-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)],
        [-1, 0, 1],
        format='csr',
    ) / h**2


def laplacian_matrix(spec: DomainSpec):
    """Discrete -Laplacian with Dirichlet elimination (3-point / 5-point)."""
    (hx, *rest) = spec.widths
    if spec.dimension == 1:
        return _second_difference(spec.points[0], hx).tocsr()
    nx, ny = spec.points
    hy = rest[0]
    ax = _second_difference(nx, hx)
    ay = _second_difference(ny, hy)
    return (sparse.kron(ax, sparse.identity(ny)) + sparse.kron(sparse.identity(nx), ay)).tocsr()


@dataclass(frozen=True, eq=False)
class SpatialOperator:
    """A_h together with its quadrature weight and principal eigenpair."""

    spec: DomainSpec
    matrix: sparse.csr_matrix
    weight: float
    lambda1: float
    rho1: Field

    @property
    def n_nodes(self):
        return self.spec.n_nodes

    def apply(self, f):
        return self.matrix @ check_field(self, f)

    def inner(self, f, g):
        return self.weight * float(np.dot(check_field(self, f), check_field(self, g)))

    def diagonal(self):
        return self.matrix.diagonal()

    def is_m_matrix(self):
        """Positive diagonal, nonpositive off-diagonal, weak diagonal dominance."""
        dense = self.matrix.toarray()
        diag = np.diag(dense)
        off = dense - np.diag(diag)
        if np.any(diag <= 0) or np.any(off > 0):
            return False
        return bool(np.all(diag + off.sum(axis=1) >= -1e-12 * diag))


def check_field(op_or_spec, values, name='field') -> Field:
    spec = op_or_spec.spec if isinstance(op_or_spec, SpatialOperator) else op_or_spec
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != 1 or array.shape[0] != spec.n_nodes:
        raise FieldShapeError(
            f"{name} has shape {array.shape}, expected ({spec.n_nodes},)"
        )
    return array


def sup_norm(f):
    return float(np.max(np.abs(f))) if len(f) else 0.0


def eigen_residual_floor(matrix) -> float:
    """Smallest residual per unit ||rho||_inf that float64 can resolve for this matrix."""
    row_sums = np.asarray(abs(matrix).sum(axis=1)).ravel()
    return ROUNDOFF_FACTOR * np.finfo(np.float64).eps * float(row_sums.max())


def _inverse_power(spec, matrix, weight, tol, max_iterations):
    from blowup.linalg import ShiftedOperator

    solver = ShiftedOperator(spec, matrix, np.zeros(spec.n_nodes), tol=min(tol, 1e-14))
    x = np.ones(spec.n_nodes)
    lam = float('nan')
    floor = eigen_residual_floor(matrix)
    for iteration in range(1, max_iterations + 1):
        y = solver.solve(x, warm_start=x)
        x = y / sup_norm(y)
        ax = matrix @ x
        lam = float(np.dot(x, ax) / np.dot(x, x))
        residual = sup_norm(ax - lam * x)
        if residual <= max(tol * lam, floor) * sup_norm(x):
            logger.debug("inverse power converged in %d iterations, lambda1=%r", iteration, lam)
            rho = x / (weight * np.sum(x))
            return lam, rho
    raise EigenSolverError(
        f"inverse power iteration did not converge in {max_iterations} iterations "
        f"(last lambda estimate {lam!r})",
        iterations=max_iterations,
    )


def principal_eigenpair(op: SpatialOperator, tol=None, max_iterations=None):
    """Smallest eigenvalue of A_h and its positive eigenvector with quadrature 1.

    Inverse power iteration from the all-ones vector; stops when
    ||A rho - lambda rho||_inf <= max(tol * lambda, floor) * ||rho||_inf,
    where floor = eigen_residual_floor(A_h) grows like 1/h^2.
    """
    defaults = settings.BLOWUP_SOLVER
    tol = defaults['EIGEN_TOL'] if tol is None else tol
    if tol <= 0:
        raise ValueError("tol must be positive")
    max_iterations = defaults['EIGEN_MAX_ITERATIONS'] if max_iterations is None else max_iterations
    return _inverse_power(op.spec, op.matrix, op.weight, tol, max_iterations)


def build_operator(spec: DomainSpec, eigen_tol=None) -> SpatialOperator:
    defaults = settings.BLOWUP_SOLVER
    tol = defaults['EIGEN_TOL'] if eigen_tol is None else eigen_tol
    matrix = laplacian_matrix(spec)
    lam, rho = _inverse_power(spec, matrix, spec.weight, tol, defaults['EIGEN_MAX_ITERATIONS'])
    rho.setflags(write=False)
    return SpatialOperator(spec=spec, matrix=matrix, weight=spec.weight, lambda1=lam, rho1=rho)


def quadrature(op: SpatialOperator, f) -> float:
    """Mass-lumped integral sum_i w_i f_i."""
    return op.weight * float(np.sum(check_field(op, f)))


def dirichlet_energy(op: SpatialOperator, f) -> float:
    """Discrete integral of |grad f|^2, i.e. <A_h f, f> under the quadrature."""
    f = check_field(op, f)
    return op.weight * float(np.dot(f, op.matrix @ f))
