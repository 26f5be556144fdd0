"""Eigendecomposition of small complex symmetric matrices.

Right eigenvectors of a complex symmetric matrix are orthogonal under the
bilinear c-product ``(x, y) = sum_k x_k y_k`` (no conjugation). Every
non-defective eigenvector returned here is scaled so that ``(x, x) = 1``.
Its ordinary Hermitian norm ``<x|x>`` is then >= 1, with equality only in
the Hermitian limit, and it diverges where two states coalesce.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import EigenSolverError

__all__ = [
    "DEFECT_TOL",
    "EigenPair",
    "EigenSystem",
    "BiorthMetrics",
    "MixingMatrix",
    "closed_form_2x2",
    "eigendecompose",
    "biorthogonality_metrics",
    "coalescence_residual",
    "mixing_coefficients",
    "fix_phase",
]

# |(x, x)| / <x|x> below this marks a state defective. An exceptional point
# rounded to double precision leaves a ratio near sqrt(machine eps), so the
# threshold has to sit well above 1e-8.
DEFECT_TOL = 1e-6
SYMMETRY_TOL = 1e-12
CLUSTER_TOL = 1e-10
RESIDUAL_TOL = 1e-9
MAX_DIM = 64


@dataclass(frozen=True)
class EigenPair:
    value: complex
    vector: np.ndarray
    c_norm_sq: complex
    defective: bool = False

    @property
    def energy(self) -> float:
        return self.value.real

    @property
    def width(self) -> float:
        """C in E - (i/2) C."""
        return -2.0 * self.value.imag


@dataclass(frozen=True)
class EigenSystem:
    """Eigenpairs of ``matrix`` ordered by descending real part of the value
    (ties: descending imaginary part)."""

    matrix: np.ndarray
    pairs: tuple[EigenPair, ...]
    parameter: complex | None = None

    @property
    def n(self) -> int:
        return len(self.pairs)

    @cached_property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.pairs])

    @cached_property
    def vectors(self) -> np.ndarray:
        """Eigenvectors as rows."""
        return np.array([p.vector for p in self.pairs])

    @property
    def defective(self) -> bool:
        return any(p.defective for p in self.pairs)

    @property
    def defective_mask(self) -> np.ndarray:
        return np.array([p.defective for p in self.pairs])


@dataclass(frozen=True)
class BiorthMetrics:
    """Hermitian self-overlaps |x_R|^2 and the overlap matrix <x_R'|x_R>.

    Defective states get ``inf`` norms and ``nan`` overlaps.
    ``offdiag_real_max`` is the largest |Re <x_R'|x_R>| over R' != R; for
    2x2 inputs it vanishes identically.
    """

    norms: np.ndarray
    overlaps: np.ndarray
    max_norm: float
    offdiag_real_max: float


@dataclass(frozen=True)
class MixingMatrix:
    """Expansion coefficients b[R, i] of state R on basis state i."""

    b: np.ndarray
    b_sq: np.ndarray

    @property
    def dominant(self) -> np.ndarray:
        return np.argmax(np.abs(self.b_sq), axis=1)

    def row_sums(self) -> np.ndarray:
        return self.b_sq.sum(axis=1)


def _sqrt_right_half(z: complex) -> complex:
    r = cmath.sqrt(z)
    # cmath gives arg -pi/2 for a negative real with a -0.0 imaginary part
    if r.real == 0 and r.imag < 0:
        r = -r
    return r


def closed_form_2x2(eps1: complex, eps2: complex, v: complex) -> tuple[complex, complex]:
    """Eigenvalues of [[eps1, v], [v, eps2]].

    Returns ``(mean + root, mean - root)`` with
    ``root = sqrt((eps1 - eps2)^2 + 4 v^2) / 2`` taken on the branch with
    argument in (-pi/2, pi/2].
    """
    eps1, eps2, v = complex(eps1), complex(eps2), complex(v)
    if v == 0:
        # exact values, in the order the branch rule would give
        d = eps1 - eps2
        return (eps1, eps2) if d.real > 0 or (d.real == 0 and d.imag >= 0) else (eps2, eps1)
    mean = 0.5 * (eps1 + eps2)
    root = 0.5 * _sqrt_right_half((eps1 - eps2) ** 2 + 4.0 * v * v)
    return mean + root, mean - root


def fix_phase(x: np.ndarray) -> np.ndarray:
    """Resolve the +/-1 ambiguity: the largest component gets Re > 0.

    Components within a relative 1e-9 of the largest modulus count as tied
    and the lowest index wins; a purely imaginary pivot gets Im > 0.
    """
    mags = np.abs(x)
    top = mags.max()
    if top == 0:
        return x
    k = int(np.flatnonzero(mags >= top * (1.0 - 1e-9))[0])
    pivot = x[k]
    if abs(pivot.real) <= 1e-14 * top:
        flip = pivot.imag < 0
    else:
        flip = pivot.real < 0
    return -x if flip else x


def _fix_phase_rows(V: np.ndarray) -> np.ndarray:
    """:func:`fix_phase` applied to every row of ``V``."""
    mags = np.abs(V)
    top = mags.max(axis=1, keepdims=True)
    k = np.argmax(mags >= top * (1.0 - 1e-9), axis=1)
    pivot = V[np.arange(len(V)), k]
    flip = np.where(np.abs(pivot.real) <= 1e-14 * top[:, 0], pivot.imag < 0, pivot.real < 0)
    return np.where(flip[:, None], -V, V)


def _eig2(M: np.ndarray):
    e1, e2, v = M[0, 0], M[1, 1], M[0, 1]
    if v == 0:
        return np.array([e1, e2]), np.eye(2, dtype=complex)
    half = 0.5 * (e1 - e2)
    root = 0.5 * _sqrt_right_half((e1 - e2) ** 2 + 4.0 * v * v)
    mean = 0.5 * (e1 + e2)
    values = np.array([mean + root, mean - root])
    cols = []
    for s in (root, -root):
        # lambda - e1 = -half + s, lambda - e2 = half + s
        xa = np.array([v, -half + s])
        xb = np.array([half + s, v])
        cols.append(xa if np.vdot(xa, xa).real >= np.vdot(xb, xb).real else xb)
    return values, np.array(cols).T


def _c_orthogonalize(X: np.ndarray, values: np.ndarray, scale: float, tol: float) -> np.ndarray:
    """Bilinear Gram-Schmidt inside clusters of (numerically) equal eigenvalues."""
    n = len(values)
    seen = np.zeros(n, dtype=bool)
    X = X.copy()
    for i in range(n):
        if seen[i]:
            continue
        cluster = np.flatnonzero(np.abs(values - values[i]) <= tol * scale)
        seen[cluster] = True
        if len(cluster) < 2:
            continue
        done = []
        for j in cluster:
            x = X[:, j]
            for y in done:
                x = x - y * np.sum(y * x)
            c = np.sum(x * x)
            h = np.vdot(x, x).real
            if abs(c) > 1e-12 * h:
                x = x / np.sqrt(c)
                done.append(x)
            X[:, j] = x
    return X


def eigendecompose(
    M,
    *,
    parameter: complex | None = None,
    defect_tol: float = DEFECT_TOL,
    cluster_tol: float = CLUSTER_TOL,
    residual_tol: float = RESIDUAL_TOL,
) -> EigenSystem:
    """Eigenvalues and c-normalized right eigenvectors of a complex symmetric matrix.

    2x2 matrices use the closed form, real symmetric matrices a symmetric
    solver, everything else LAPACK's general eigensolver followed by
    c-orthogonalization of numerically degenerate clusters.

    Parameters
    ----------
    M : array_like, shape (n, n)
        Complex symmetric, 2 <= n <= 64.
    parameter : complex, optional
        Family parameter recorded on the result.
    defect_tol : float
        States with ``|(x, x)| < defect_tol * <x|x>`` are flagged defective
        and returned Hermitian-unit-normalized instead of c-normalized.

    Raises
    ------
    ValueError
        Non-square, non-symmetric or out-of-range input.
    EigenSolverError
        The solver failed or returned pairs violating the residual bound.
    """
    M = np.array(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    n = M.shape[0]
    if not 2 <= n <= MAX_DIM:
        raise ValueError(f"matrix dimension {n} outside [2, {MAX_DIM}]")
    if not np.all(np.isfinite(M)):
        raise EigenSolverError("matrix has non-finite entries", matrix=M)
    norm = float(np.abs(M).sum(axis=1).max())
    if np.abs(M - M.T).max() > SYMMETRY_TOL * max(norm, 1.0):
        raise ValueError("matrix is not complex symmetric")

    try:
        if n == 2:
            values, X = _eig2(M)
        elif not np.any(M.imag):
            w, U = np.linalg.eigh(M.real)
            values, X = w.astype(complex), U.astype(complex)
        else:
            values, X = np.linalg.eig(M)
            X = _c_orthogonalize(X, values, 1.0 + norm, cluster_tol)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigensolver did not converge: {exc}", matrix=M) from exc

    order = np.lexsort((-values.imag, -values.real))
    values, X = values[order].astype(complex), X[:, order]
    h = np.einsum("ij,ij->j", X.conj(), X).real
    if np.any(h == 0):
        raise EigenSolverError("solver returned a zero eigenvector", matrix=M)
    U = X / np.sqrt(h)
    c = np.einsum("ij,ij->j", U, U)
    resid = float(np.abs(M @ U - U * values).max())
    if resid > residual_tol * max(norm, 1e-300):
        raise EigenSolverError(f"eigenpair residual {resid:.3e} exceeds bound", matrix=M)
    defective = np.abs(c) < defect_tol
    rows = _fix_phase_rows((U / np.where(defective, 1.0, np.sqrt(c))).T)
    pairs = [
        EigenPair(complex(values[k]), rows[k], complex(c[k]), bool(defective[k]))
        for k in range(n)
    ]
    return EigenSystem(matrix=M, pairs=tuple(pairs), parameter=parameter)


def biorthogonality_metrics(sys: EigenSystem) -> BiorthMetrics:
    B = sys.vectors
    overlaps = B.conj() @ B.T
    norms = np.real(np.diag(overlaps)).copy()
    bad = sys.defective_mask
    norms[bad] = np.inf
    overlaps[bad, :] = np.nan
    overlaps[:, bad] = np.nan
    off = ~np.eye(sys.n, dtype=bool) & ~bad[:, None] & ~bad[None, :]
    offdiag_real = float(np.abs(overlaps[off].real).max()) if off.any() else 0.0
    return BiorthMetrics(norms=norms, overlaps=overlaps, max_norm=float(norms.max()), offdiag_real_max=offdiag_real)


def _unit(p) -> np.ndarray:
    x = np.asarray(p.vector if isinstance(p, EigenPair) else p, dtype=complex)
    h = np.sqrt(np.vdot(x, x).real)
    if h == 0:
        raise ValueError("zero vector has no direction")
    return x / h


def coalescence_residual(p1, p2) -> float:
    """min over s = +/-1 of ||u1 - s i u2|| for Hermitian-unit copies u1, u2.

    Zero when the two states have coalesced as u1 = +/- i u2; sqrt(2) for
    orthogonal real states. Accepts EigenPairs or raw vectors.
    """
    u1, u2 = _unit(p1), _unit(p2)
    return float(min(np.linalg.norm(u1 - s * 1j * u2) for s in (1.0, -1.0)))


def mixing_coefficients(sys: EigenSystem, basis=None, *, tol: float = 1e-10) -> MixingMatrix:
    """Expand each eigenvector on the columns of a real orthonormal ``basis``.

    ``b[R, i] = sum_k basis[k, i] x_R[k]``. The default basis is the
    identity, i.e. the uncoupled levels of a family with diagonal H0.
    """
    if basis is None:
        basis = np.eye(sys.n)
    basis = np.asarray(basis)
    if basis.shape != (sys.n, sys.n):
        raise ValueError(f"basis shape {basis.shape} does not match n = {sys.n}")
    if np.iscomplexobj(basis):
        if np.any(basis.imag):
            raise ValueError("basis must be real")
        basis = basis.real
    gram_err = np.abs(basis.T @ basis - np.eye(sys.n)).max()
    if gram_err > tol:
        raise ValueError(f"basis columns are not orthonormal (error {gram_err:.2e})")
    b = sys.vectors @ basis
    return MixingMatrix(b=b, b_sq=b * b)
