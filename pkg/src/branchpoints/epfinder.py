"""Branch points of H(a) in the complex parameter plane.

Two eigenvalues coalesce where the discriminant

    D(a) = prod_{R < R'} (E_R(a) - E_R'(a))^2

vanishes. D is analytic in a (a symmetric function of the spectrum), so its
zeros are found with Muller's method and counted with the argument
principle. A zero is certified as a square-root branch point when carrying
the states once around a small circle exchanges exactly two of them.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .eigen import coalescence_residual, eigendecompose
from .errors import (
    ConvergenceError,
    EigenSolverError,
    HigherOrderDegeneracyError,
    TrackingError,
)
from .family import FamilySpec, build_matrix
from .sweep import match_states

__all__ = [
    "BranchPoint",
    "BranchPointList",
    "MonodromyResult",
    "discriminant",
    "find_branch_point",
    "encircle",
    "list_branch_points",
    "count_zeros",
    "is_transposition",
]

log = logging.getLogger(__name__)

MAX_ITER = 200
HIGHER_ORDER_TOL = 1e-4
DEDUP_RADIUS = 1e-6
CERTIFY_RADIUS_CAP = 0.05


@dataclass(frozen=True)
class BranchPoint:
    """A located coalescence of states ``pair`` (zero-based, eigenvalue order at a_bp).

    ``gap_sq`` is |E_R - E_R'|^2 at ``a_bp``; ``coalescence`` is the
    coalescence residual at ``coalescence_at``, the nearest sample where
    both states are still non-defective.
    """

    a_bp: complex
    value_bp: complex
    pair: tuple[int, int]
    disc_residual: float
    gap_sq: float
    coalescence: float
    coalescence_at: complex
    history: tuple[tuple[complex, float], ...] = field(default=(), repr=False)
    certified: bool | None = None
    permutation: tuple[int, ...] | None = None
    certify_radius: float | None = None


@dataclass(frozen=True)
class MonodromyResult:
    loop_center: complex
    loop_radius: float
    steps: int
    permutation: tuple[int, ...]
    max_tracking_gap: float

    @property
    def is_identity(self) -> bool:
        return all(p == k for k, p in enumerate(self.permutation))


class BranchPointList(list):
    """List of branch points; ``note`` explains an empty or partial search
    and ``failures`` lists (seed, message) pairs that did not converge."""

    def __init__(self, items=(), note: str | None = None, failures=()):
        super().__init__(items)
        self.note = note
        self.failures = list(failures)


def _disc_from_values(values: np.ndarray) -> complex:
    d = values[:, None] - values[None, :]
    iu = np.triu_indices(len(values), 1)
    return complex(np.prod(d[iu] ** 2))


def discriminant(spec: FamilySpec, a: complex) -> complex:
    """prod over state pairs of the squared eigenvalue difference at ``a``.

    For two levels this is evaluated in closed form as
    (eps1 - eps2)^2 + 4 v^2.
    """
    M = build_matrix(spec, a)
    if spec.n == 2:
        return complex((M[0, 0] - M[1, 1]) ** 2 + 4.0 * M[0, 1] ** 2)
    return _disc_from_values(np.linalg.eigvals(M))


def _muller(f, x0, x1, x2, tol, max_iter):
    f0, f1, f2 = f(x0), f(x1), f(x2)
    history = [(x2, abs(f2))]
    for _ in range(max_iter):
        if f2 == 0:
            return x2, f2, history
        h1, h2 = x1 - x0, x2 - x1
        d1, d2 = (f1 - f0) / h1, (f2 - f1) / h2
        A = (d2 - d1) / (h2 + h1)
        B = A * h2 + d2
        disc = cmath.sqrt(B * B - 4.0 * f2 * A)
        den = B + disc if abs(B + disc) >= abs(B - disc) else B - disc
        step = -2.0 * f2 / den if den != 0 else h2
        x3 = x2 + step
        if not cmath.isfinite(x3):
            break
        x0, x1, x2 = x1, x2, x3
        f0, f1, f2 = f1, f2, f(x3)
        history.append((x3, abs(f2)))
        if abs(step) <= tol * (1.0 + abs(x3)):
            return x2, f2, history
    raise ConvergenceError(f"Muller iteration did not converge in {max_iter} steps", history)


def _secant_polish(f, xa, fa, xb, fb, steps=3):
    for _ in range(steps):
        if fb == fa:
            break
        xc = xb - fb * (xb - xa) / (fb - fa)
        fc = f(xc)
        if not abs(fc) < abs(fb):
            break
        xa, fa, xb, fb = xb, fb, xc, fc
    return xb, fb


def find_branch_point(
    spec: FamilySpec,
    seed: complex,
    tol: float = 1e-12,
    *,
    spread: float = 1e-2,
    max_iter: int = MAX_ITER,
    higher_order_tol: float = HIGHER_ORDER_TOL,
) -> BranchPoint:
    """Converge from ``seed`` to a zero of the discriminant.

    Muller's method is started from ``seed`` and ``seed +/- spread`` and
    stops when the step falls below ``tol * (1 + |a|)``; a few secant steps
    then polish the root. The coalescing pair is the closest pair of
    eigenvalues at the root.

    Raises
    ------
    ConvergenceError
        No convergence within ``max_iter`` iterations (history attached).
    HigherOrderDegeneracyError
        A third eigenvalue sits on the degenerate value.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    seed = complex(seed)
    h = spread * max(1.0, abs(seed))

    def f(a):
        return discriminant(spec, a)

    a, fa, history = _muller(f, seed - h, seed + h, seed, tol, max_iter)
    if len(history) >= 2 and fa != 0:
        prev = history[-2][0]
        a, fa = _secant_polish(f, prev, f(prev), a, fa)
        if history[-1][0] != a:
            history.append((a, abs(fa)))

    sys = eigendecompose(build_matrix(spec, a), parameter=a)
    vals = sys.values
    n = sys.n
    d = np.abs(vals[:, None] - vals[None, :]) + np.diag(np.full(n, np.inf))
    R, Rp = sorted(int(k) for k in np.unravel_index(np.argmin(d), d.shape))
    value_bp = 0.5 * (vals[R] + vals[Rp])
    scale = 1.0 + float(np.abs(sys.matrix).sum(axis=1).max())
    others = [k for k in range(n) if k not in (R, Rp)]
    if others and np.min(np.abs(vals[others] - value_bp)) <= higher_order_tol * scale:
        raise HigherOrderDegeneracyError(
            f"more than two eigenvalues coalesce near a = {a}", a=a, values=vals
        )
    coal, at = _coalescence_near(spec, a, value_bp)
    return BranchPoint(
        a_bp=a,
        value_bp=complex(value_bp),
        pair=(R, Rp),
        disc_residual=abs(fa),
        gap_sq=float(abs(vals[R] - vals[Rp]) ** 2),
        coalescence=coal,
        coalescence_at=at,
        history=tuple(history),
    )


def _coalescence_near(spec, a_bp, value_bp):
    """Coalescence residual at the closest non-defective sample to a_bp."""
    for off in (0.0,) + tuple(10.0 ** -k for k in range(10, 1, -1)):
        a = a_bp + off * (1.0 + abs(a_bp))
        sys = eigendecompose(build_matrix(spec, a), parameter=a)
        k1, k2 = np.argsort(np.abs(sys.values - value_bp), kind="stable")[:2]
        p1, p2 = sys.pairs[k1], sys.pairs[k2]
        if not (p1.defective or p2.defective):
            return coalescence_residual(p1, p2), a
    return math.nan, a_bp


def _loop_points(center, radius, steps):
    t = np.arange(steps) * (2.0 * np.pi / steps)
    return center + radius * np.exp(1j * t)


def _check_clearance(spec, center, radius, pts, D, clearance):
    step = 2.0 * math.pi * radius / len(pts)
    dD = (np.roll(D, -1) - np.roll(D, 1)) / (np.roll(pts, -1) - np.roll(pts, 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        est = np.abs(D) / np.abs(dD)
    for k in np.flatnonzero(~(est > 3.0 * step)):
        if D[k] == 0:
            raise ValueError(f"loop passes through a discriminant zero at a = {pts[k]}")
        try:
            root = find_branch_point(spec, pts[k], spread=step / max(1.0, abs(pts[k]))).a_bp
        except (ConvergenceError, HigherOrderDegeneracyError, EigenSolverError):
            continue
        if abs(abs(root - center) - radius) < clearance:
            raise ValueError(
                f"loop passes within {clearance:g} of the discriminant zero at a = {root}"
            )


def encircle(
    spec: FamilySpec,
    center: complex,
    radius: float,
    steps: int = 256,
    *,
    clearance: float = 1e-6,
    tie_tol: float = 1e-9,
) -> MonodromyResult:
    """Carry the states once counter-clockwise around a circle.

    The states are labelled by eigenvalue order at ``center + radius`` and
    matched step by step through eigenvector overlaps. ``permutation[R]``
    is the starting index that label R occupies after the full loop.

    Raises
    ------
    ValueError
        ``steps < 64``, non-positive radius, or the circle passes within
        ``clearance`` of a discriminant zero.
    TrackingError
        An ambiguous assignment along the loop; retry with more steps.
    """
    if steps < 64:
        raise ValueError("steps must be >= 64")
    if not radius > 0:
        raise ValueError("radius must be positive")
    center = complex(center)
    pts = _loop_points(center, radius, steps)
    systems = [eigendecompose(build_matrix(spec, a), parameter=a) for a in pts]
    D = np.array([_disc_from_values(s.values) for s in systems])
    _check_clearance(spec, center, radius, pts, D, clearance)

    order = np.arange(systems[0].n)
    worst = 0.0
    for k in range(steps):
        prev, cur = systems[k], systems[(k + 1) % steps]
        try:
            m = match_states(prev, cur, tie_tol=tie_tol)
        except TrackingError as exc:
            raise TrackingError(
                f"ambiguous tracking near a = {pts[k]}; increase steps", (pts[k], pts[(k + 1) % steps])
            ) from exc
        order = np.array(m.perm)[order]
        worst = max(worst, 1.0 - m.confidence)
    return MonodromyResult(center, float(radius), steps, tuple(int(x) for x in order), worst)


def is_transposition(perm: Sequence[int]) -> bool:
    moved = [k for k, p in enumerate(perm) if p != k]
    return len(moved) == 2 and perm[moved[0]] == moved[1] and perm[moved[1]] == moved[0]


def _certify(spec, bp: BranchPoint, radius: float, steps: int) -> BranchPoint:
    perm = None
    for s in (steps, 4 * steps):
        try:
            perm = encircle(spec, bp.a_bp, radius, s).permutation
            break
        except TrackingError:
            continue
        except ValueError as exc:
            log.info("certification of %s skipped: %s", bp.a_bp, exc)
            break
    ok = perm is not None and is_transposition(perm)
    return BranchPoint(**{**bp.__dict__, "certified": ok, "permutation": perm, "certify_radius": radius})


def list_branch_points(
    spec: FamilySpec,
    region: tuple[float, float, float, float],
    grid: int = 8,
    *,
    tol: float = 1e-12,
    dedup: float = DEDUP_RADIUS,
    certify: bool = True,
    steps: int = 256,
) -> BranchPointList:
    """All discriminant zeros reachable from a ``grid`` x ``grid`` seed lattice.

    ``region`` is ``(re_min, re_max, im_min, im_max)``. Roots outside the
    region are discarded, roots closer than ``dedup`` merged, and each
    survivor is checked by :func:`encircle` on a circle of radius
    min(0.05, half the distance to the nearest other root). Points whose
    loop is not a transposition are kept with ``certified=False``.
    """
    if grid < 4:
        raise ValueError("grid must be >= 4")
    re0, re1, im0, im1 = map(float, region)
    if not (re0 < re1 and im0 < im1):
        raise ValueError("region must have positive extent")
    if spec.coupling.is_zero():
        return BranchPointList(
            note="discriminant identically factorizable: with zero coupling the "
            "levels cross on the real axis only (see unperturbed_crossings)"
        )

    cell_re, cell_im = (re1 - re0) / grid, (im1 - im0) / grid
    spread = 0.25 * min(cell_re, cell_im)
    found: list[BranchPoint] = []
    failures = []
    pad = 1e-9 * (1.0 + max(abs(re0), abs(re1), abs(im0), abs(im1)))
    for p in range(grid):
        for q in range(grid):
            seed = complex(re0 + (p + 0.5) * cell_re, im0 + (q + 0.5) * cell_im)
            try:
                bp = find_branch_point(spec, seed, tol, spread=spread / max(1.0, abs(seed)))
            except (ConvergenceError, HigherOrderDegeneracyError, EigenSolverError) as exc:
                failures.append((seed, str(exc)))
                continue
            a = bp.a_bp
            if not (re0 - pad <= a.real <= re1 + pad and im0 - pad <= a.imag <= im1 + pad):
                continue
            dup = next((k for k, other in enumerate(found) if abs(other.a_bp - a) < dedup), None)
            if dup is None:
                found.append(bp)
            elif bp.disc_residual < found[dup].disc_residual:
                found[dup] = bp
    found.sort(key=lambda b: (b.a_bp.real, b.a_bp.imag))

    if certify:
        roots = [b.a_bp for b in found]
        if spec.is_real():
            roots += [r.conjugate() for r in roots]
        certified = []
        for bp in found:
            dists = [abs(r - bp.a_bp) for r in roots if abs(r - bp.a_bp) >= dedup]
            radius = min([CERTIFY_RADIUS_CAP] + [0.5 * d for d in dists])
            certified.append(_certify(spec, bp, radius, steps))
        found = certified
    return BranchPointList(found, failures=failures)


def count_zeros(
    spec: FamilySpec,
    region: tuple[float, float, float, float],
    *,
    samples_per_side: int = 64,
    max_depth: int = 20,
) -> int:
    """Number of discriminant zeros inside ``region`` (argument principle).

    The winding of D(a) along the rectangle boundary is accumulated from
    phase increments; segments whose increment exceeds pi/4 are bisected.
    """
    re0, re1, im0, im1 = map(float, region)
    corners = [complex(re0, im0), complex(re1, im0), complex(re1, im1), complex(re0, im1)]

    def f(a):
        val = discriminant(spec, a)
        if val == 0:
            raise ValueError(f"discriminant vanishes on the contour at a = {a}")
        return val

    def dphase(za, fa, zb, fb, depth):
        step = cmath.phase(fb / fa)
        if abs(step) <= math.pi / 4 or depth >= max_depth:
            return step
        zm = 0.5 * (za + zb)
        fm = f(zm)
        return dphase(za, fa, zm, fm, depth + 1) + dphase(zm, fm, zb, fb, depth + 1)

    total = 0.0
    for c0, c1 in zip(corners, corners[1:] + corners[:1]):
        zs = c0 + (c1 - c0) * np.linspace(0.0, 1.0, samples_per_side + 1)
        fs = [f(z) for z in zs]
        for k in range(samples_per_side):
            total += dphase(zs[k], fs[k], zs[k + 1], fs[k + 1], 0)
    winding = total / (2.0 * math.pi)
    count = round(winding)
    if abs(winding - count) > 1e-3:
        raise ValueError(f"winding number {winding:.6f} is not close to an integer")
    return int(count)
