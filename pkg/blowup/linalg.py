"""
Solves with A_h + diag(shift).

1D systems are tridiagonal SPD and go through a banded Cholesky factorization
computed once per ShiftedOperator; 2D systems use Jacobi-preconditioned
conjugate gradients.
"""
import logging

import numpy as np
from django.conf import settings
from scipy import sparse
from scipy.linalg import cho_solve_banded, cholesky_banded
from scipy.sparse.linalg import cg

from blowup.exceptions import LinearSolveError, NegativeFieldError

logger = logging.getLogger(__name__)


class ShiftedOperator:
    """A_h + diag(shift) with a nonnegative shift, ready for repeated solves."""

    def __init__(self, spec, matrix, shift, tol=None):
        shift = np.asarray(shift, dtype=np.float64)
        if shift.shape != (spec.n_nodes,):
            shift = np.broadcast_to(shift, (spec.n_nodes,)).astype(np.float64)
        if np.any(shift < 0) or not np.all(np.isfinite(shift)):
            raise NegativeFieldError("shift diagonal must be finite and nonnegative")
        self.spec = spec
        self.shift = shift
        self.tol = settings.BLOWUP_SOLVER['LINEAR_TOL'] if tol is None else tol
        self.matrix = (matrix + sparse.diags(shift)).tocsr()
        self._factor = None
        self._preconditioner = None
        if spec.dimension == 1:
            bands = np.zeros((2, spec.n_nodes))
            bands[0, 1:] = self.matrix.diagonal(1)
            bands[1, :] = self.matrix.diagonal()
            self._factor = cholesky_banded(bands, lower=False)
        else:
            self._preconditioner = sparse.diags(1.0 / self.matrix.diagonal())

    @classmethod
    def from_operator(cls, op, shift, tol=None):
        return cls(op.spec, op.matrix, shift, tol=tol)

    def apply(self, x):
        return self.matrix @ x

    def residual(self, x, rhs):
        return float(np.max(np.abs(self.matrix @ x - rhs)))

    def solve(self, rhs, tol=None, warm_start=None):
        rhs = np.asarray(rhs, dtype=np.float64)
        if self._factor is not None:
            return cho_solve_banded((self._factor, False), rhs)

        tol = self.tol if tol is None else tol
        target = tol * max(1.0, float(np.max(np.abs(rhs))))
        x, info = cg(
            self.matrix,
            rhs,
            x0=warm_start,
            rtol=0.0,
            atol=target,
            maxiter=10 * self.spec.n_nodes,
            M=self._preconditioner,
        )
        if info != 0:
            residual = self.residual(x, rhs)
            if residual > target:
                raise LinearSolveError(
                    f"conjugate gradients stopped after {info} iterations "
                    f"with residual {residual!r} > {target!r}"
                )
            logger.debug("cg hit its iteration cap but residual %r is within target", residual)
        return x


def linear_solve(shifted: ShiftedOperator, rhs, tol=None):
    """Solve (A_h + D) x = rhs; exact up to roundoff in 1D, to residual tol in 2D."""
    return shifted.solve(rhs, tol=tol)
