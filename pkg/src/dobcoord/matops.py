"""Dense kernels for the small real matrices that appear in synthesis.

Everything here works on plain ``numpy`` arrays. Inputs are validated
(shape, finiteness) and never mutated.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NoSolutionError, NumericalError

ATOL = 1e-9
RTOL = 1e-9


def as_matrix(m, name="matrix"):
    """Return ``m`` as a finite 2-D float array (scalars become 1x1)."""
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got {a.ndim}-D")
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"{name} has non-finite entries")
    return a


def _square(m, name):
    a = as_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got {a.shape[0]}x{a.shape[1]}")
    return a


def close(a, b, atol=ATOL, rtol=RTOL):
    return np.allclose(a, b, atol=atol, rtol=rtol)


def eigenvalues(m):
    """All eigenvalues of a square real matrix, with multiplicity."""
    a = _square(m, "m")
    if a.size == 0:
        return np.zeros(0, dtype=complex)
    try:
        return np.linalg.eigvals(a).astype(complex)
    except np.linalg.LinAlgError as exc:
        # LAPACK reports the failing index in the message; keep it
        raise NumericalError(f"eigenvalue iteration did not converge: {exc}") from exc


def spectral_abscissa(m):
    ev = eigenvalues(m)
    return float(np.max(ev.real)) if ev.size else -np.inf


def is_hurwitz(m, margin=0.0):
    """True iff every eigenvalue of ``m`` has real part below ``-margin``."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    return spectral_abscissa(m) < -margin


def kron(a, b):
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def numerical_rank(m):
    """Rank from singular values, threshold ``max(shape) * eps * s_max``."""
    a = np.asarray(m)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    tol = max(a.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    return int(np.sum(s > tol))


@dataclass(frozen=True)
class Term:
    """``left @ X[unknown] @ right`` inside one matrix equation."""

    unknown: int
    left: np.ndarray
    right: np.ndarray


@dataclass(frozen=True)
class MatrixEquation:
    """``sum(terms) == rhs``."""

    terms: tuple
    rhs: np.ndarray


@dataclass(frozen=True)
class MatrixSolution:
    blocks: tuple
    unique: bool
    residual: float
    rank: int


def term(unknown, left, right):
    return Term(unknown, as_matrix(left, "left"), as_matrix(right, "right"))


def equation(terms, rhs):
    return MatrixEquation(tuple(terms), as_matrix(rhs, "rhs"))


def _vectorized(equations, shapes):
    offsets = np.cumsum([0] + [r * c for r, c in shapes])
    rows = []
    rhs = []
    for k, eq in enumerate(equations):
        er, ec = eq.rhs.shape
        block = np.zeros((er * ec, offsets[-1]))
        for t in eq.terms:
            r, c = shapes[t.unknown]
            if t.left.shape != (er, r) or t.right.shape != (c, ec):
                raise DimensionError(
                    f"equation {k}: term on unknown {t.unknown} has shape "
                    f"{t.left.shape} @ ({r}x{c}) @ {t.right.shape}, rhs is {er}x{ec}"
                )
            # vec(L X R) = (R^T kron L) vec(X) with column-major vec
            block[:, offsets[t.unknown]:offsets[t.unknown + 1]] += np.kron(t.right.T, t.left)
        rows.append(block)
        rhs.append(eq.rhs.reshape(-1, order="F"))
    return np.vstack(rows), np.concatenate(rhs), offsets


def solve_linear_matrix_system(equations, shapes, tol=1e-10):
    """Solve a set of linear matrix equations for unknown blocks.

    Parameters
    ----------
    equations : sequence of MatrixEquation
        Each equation is ``sum_k L_k X_{j_k} R_k = rhs``.
    shapes : sequence of (rows, cols)
        Shapes of the unknown blocks ``X_0, X_1, ...``.
    tol : float
        Relative residual bound; a solution is accepted when
        ``||residual||_F <= tol * (1 + ||rhs||_F)``.

    Returns
    -------
    MatrixSolution
        Minimum-norm solution blocks. ``unique`` is False when the
        vectorized system is rank deficient.

    Raises
    ------
    NoSolutionError
        If the system is inconsistent.
    """
    shapes = [tuple(int(v) for v in s) for s in shapes]
    M, b, offsets = _vectorized(equations, shapes)
    n = M.shape[1]
    if n == 0:
        res = float(np.linalg.norm(b))
        if res > tol * (1 + res):
            raise NoSolutionError("system has no unknowns but nonzero rhs", res)
        return MatrixSolution(tuple(np.zeros(s) for s in shapes), True, res, 0)
    rank = numerical_rank(M)
    x, *_ = np.linalg.lstsq(M, b, rcond=None)
    residual = float(np.linalg.norm(M @ x - b))
    if residual > tol * (1.0 + float(np.linalg.norm(b))):
        raise NoSolutionError("linear matrix system is inconsistent", residual)
    blocks = tuple(
        x[offsets[k]:offsets[k + 1]].reshape(shapes[k], order="F") for k in range(len(shapes))
    )
    return MatrixSolution(blocks, rank == n, residual, rank)


def symmetric_part(m):
    a = as_matrix(m)
    return 0.5 * (a + a.T)


def block_diag(*blocks):
    blocks = [as_matrix(b) for b in blocks]
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out
