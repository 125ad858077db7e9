"""Small dense linear-algebra kernel.

Every routine works on real 2-D float arrays of modest size (the state
dimension is at most ten here, Kronecker-vectorised Lyapunov systems at
most 100x100).  Singularity decisions are made from the pivots of a
partially pivoted LU factorisation, scaled by the infinity norm of the
input so the thresholds do not depend on units.
"""

import warnings

import numpy as np
import scipy.linalg

from .exceptions import NotSymmetric, SingularMatrix

__all__ = [
    "as_mat",
    "norm_inf",
    "lu_pivots",
    "lu_solve",
    "inverse",
    "rank_deficient",
    "lyapunov_solve",
    "is_positive_definite",
]

SOLVE_PIVOT_TOL = 1e-12
RANK_PIVOT_TOL = 1e-10


def as_mat(a, name="matrix"):
    """Return ``a`` as a finite 2-D float array (scalars become 1x1)."""
    m = np.array(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


def _square(a, name="matrix"):
    m = as_mat(a, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def norm_inf(a):
    """Maximum absolute row sum."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(a), axis=1)))


def _factor(a):
    with warnings.catch_warnings():
        # exactly singular inputs are expected and handled by the pivot test
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        warnings.simplefilter("ignore", RuntimeWarning)
        return scipy.linalg.lu_factor(a, check_finite=False)


def lu_pivots(a):
    """Diagonal of U from ``P A = L U`` with partial pivoting."""
    a = _square(a)
    lu, _ = _factor(a)
    return np.diag(lu).copy()


def _is_singular(a, tol):
    scale = norm_inf(a)
    if a.shape[0] == 0:
        return False, None
    if scale == 0.0:
        return True, None
    factor = _factor(a)
    pivots = np.abs(np.diag(factor[0]))
    return bool(np.min(pivots) < tol * scale), factor


def lu_solve(a, rhs):
    """Solve ``a @ X = rhs`` by partially pivoted LU.

    Raises
    ------
    SingularMatrix
        If some pivot is smaller than ``1e-12 * norm_inf(a)``.
    """
    a = _square(a, "a")
    b = np.array(rhs, dtype=float)
    vector = b.ndim == 1
    b = as_mat(b, "rhs")
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"rhs has {b.shape[0]} rows, expected {a.shape[0]}")
    singular, factor = _is_singular(a, SOLVE_PIVOT_TOL)
    if singular:
        raise SingularMatrix(f"{a.shape[0]}x{a.shape[0]} matrix is singular to working precision")
    x = scipy.linalg.lu_solve(factor, b, check_finite=False)
    return x.ravel() if vector else x


def inverse(a):
    a = _square(a, "a")
    return lu_solve(a, np.eye(a.shape[0]))


def rank_deficient(a, tol=RANK_PIVOT_TOL):
    """True iff partial-pivot LU meets a pivot below ``tol * norm_inf(a)``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = _square(a, "a")
    return _is_singular(a, tol)[0]


def lyapunov_solve(f, q):
    """Solve ``f.T @ P + P @ f = -q`` for symmetric ``P``.

    The equation is vectorised (row-major) into an ``n**2`` square system
    and handed to :func:`lu_solve`, so a resonant spectrum of ``f`` (two
    eigenvalues summing to zero) shows up as :class:`SingularMatrix`.
    """
    f = _square(f, "f")
    q = _square(q, "q")
    n = f.shape[0]
    if q.shape != f.shape:
        raise ValueError("f and q must have the same shape")
    eye = np.eye(n)
    op = np.kron(f.T, eye) + np.kron(eye, f.T)
    p = lu_solve(op, -q.reshape(-1)).reshape(n, n)
    return 0.5 * (p + p.T)


def is_positive_definite(p, sym_tol=1e-9, pivot_tol=1e-12):
    """Unpivoted Cholesky test; every pivot must exceed ``pivot_tol``."""
    p = _square(p, "p")
    if np.max(np.abs(p - p.T), initial=0.0) > sym_tol:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    n = p.shape[0]
    low = np.zeros_like(p)
    for j in range(n):
        d = p[j, j] - low[j, :j] @ low[j, :j]
        if not d > pivot_tol:
            return False
        low[j, j] = np.sqrt(d)
        low[j + 1:, j] = (p[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return True
