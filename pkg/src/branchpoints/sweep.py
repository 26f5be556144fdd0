"""Real-parameter sweeps with state tracking and mixing analysis.

States are carried from one grid point to the next by maximizing the
Hermitian overlap of their eigenvectors. Eigenvalues nearly touch at an
avoided crossing, but on a fine enough grid the eigenvectors rotate
continuously, so overlaps keep the adiabatic identity of every state.

Tracked labels coincide with level indices at the start of the sweep: the
state ranked r-th by energy at ``a_from`` gets the label of the level ranked
r-th by unperturbed energy ``e_k(a_from)``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .eigen import EigenSystem, biorthogonality_metrics, eigendecompose
from .errors import TrackingError
from .family import FamilySpec, build_matrix, unperturbed_crossings, with_coupling

__all__ = [
    "Match",
    "SweepRecord",
    "CrossingEvent",
    "MixingRegion",
    "OnsetResult",
    "match_states",
    "sweep",
    "sweep_arrays",
    "detect_avoided_crossings",
    "mixing_region_width",
    "pair_mixing",
    "overlap_onset",
    "total_variation",
]

log = logging.getLogger(__name__)

MAX_ENUMERATION = 8
DEFAULT_THRESHOLD = 0.25


class Match(NamedTuple):
    """``perm[i]`` is the index in the current system of previous state ``i``."""

    perm: tuple[int, ...]
    confidence: float


@lru_cache(maxsize=None)
def _permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp)


def _unit_rows(sys: EigenSystem) -> np.ndarray:
    B = sys.vectors
    return B / np.linalg.norm(B, axis=1)[:, None]


def match_states(prev: EigenSystem, cur: EigenSystem, *, tie_tol: float = 1e-9) -> Match:
    """Assignment of previous states to current states by eigenvector overlap.

    Maximizes ``sum_R |<prev_R|cur_perm(R)>|`` (exhaustively for n <= 8,
    Hungarian algorithm above). Score ties are broken by the smaller total
    eigenvalue displacement. ``confidence = (best - second) / best``.

    Raises
    ------
    TrackingError
        When the two best assignments are tied within ``tie_tol`` and the
        eigenvalues cannot separate them either.
    """
    if prev.n != cur.n:
        raise ValueError("systems differ in dimension")
    n = prev.n
    O = np.abs(_unit_rows(prev).conj() @ _unit_rows(cur).T)
    dE = np.abs(prev.values[:, None] - cur.values[None, :])
    rows = np.arange(n)

    if n <= MAX_ENUMERATION:
        perms = _permutations(n)
        scores = O[rows, perms].sum(axis=1)
        best_score = scores.max()
        near = np.flatnonzero(scores >= best_score * (1.0 - tie_tol))
        costs = dE[rows, perms[near]].sum(axis=1)
        pick = near[np.argmin(costs)]
        if len(near) > 1:
            e_scale = 1.0 + np.abs(cur.values).max()
            runner_up = np.sort(costs)[1]
            if runner_up - costs.min() <= 1e-12 * e_scale:
                raise TrackingError("degenerate assignment tie; refine the parameter step")
        others = np.delete(scores, pick)
        second = others.max() if len(others) else 0.0
        best = scores[pick]
        perm = perms[pick]
    else:
        r, c = linear_sum_assignment(-O)
        perm = np.empty(n, dtype=np.intp)
        perm[r] = c
        best = O[rows, perm].sum()
        # runner-up estimated over single transpositions of the optimum
        second = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                s = best - O[i, perm[i]] - O[j, perm[j]] + O[i, perm[j]] + O[j, perm[i]]
                second = max(second, s)
        if best - second < tie_tol * best:
            raise TrackingError("degenerate assignment tie; refine the parameter step")
    confidence = float((best - second) / best) if best > 0 else 0.0
    return Match(tuple(int(p) for p in perm), confidence)


@dataclass(frozen=True)
class SweepRecord:
    """One grid point of a sweep, with every array indexed by tracked label."""

    a: float
    values: np.ndarray
    norms: np.ndarray
    b_sq: np.ndarray
    match_confidence: float = 1.0
    order_changed: bool = False
    vectors: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def energies(self) -> np.ndarray:
        return self.values.real

    @property
    def widths(self) -> np.ndarray:
        return -2.0 * self.values.imag


def _system(spec: FamilySpec, a: float, defect_tol: float | None) -> EigenSystem:
    kw = {} if defect_tol is None else {"defect_tol": defect_tol}
    return eigendecompose(build_matrix(spec, a), parameter=a, **kw)


def _lipschitz(spec: FamilySpec) -> float:
    slopes = max(abs(lv.e_slope) + 0.5 * abs(lv.c_slope) for lv in spec.levels)
    return slopes + 2.0 * float(np.abs(spec.coupling_matrix()).sum(axis=1).max())


def _step_report(spec, s0: EigenSystem, s1: EigenSystem, da: float, L: float, tie_tol: float):
    """(match, max |delta b^2|, reordered, continuity_ok) for one interval."""
    m = match_states(s0, s1, tie_tol=tie_tol)
    perm = np.array(m.perm)
    # mixing on the identity basis is the elementwise square of the vectors
    b0 = s0.vectors ** 2
    b1 = s1.vectors[perm] ** 2
    db = float(np.abs(b1 - b0).max())
    reordered = bool(np.any(perm != np.arange(len(perm))))
    jump = float(np.abs(s1.values[perm] - s0.values).max())
    tol = 1e-9 * (1.0 + np.abs(s0.values).max())
    return m, db, reordered, jump <= L * abs(da) + tol


def _refine(spec, p0, p1, depth, opts, out):
    """Append the points after ``p0`` up to ``p1`` as (a, system, report)."""
    (a0, s0), (a1, s1) = p0[:2], p1[:2]
    report = None
    try:
        report = _step_report(spec, s0, s1, a1 - a0, opts["L"], opts["tie_tol"])
        _, db, reordered, ok = report
        split = db > opts["refine_db"] or reordered or not ok
    except TrackingError:
        split = True
    if split and depth < opts["max_depth"]:
        am = 0.5 * (a0 + a1)
        pm = (am, _system(spec, am, opts["defect_tol"]))
        _refine(spec, p0, pm, depth + 1, opts, out)
        _refine(spec, pm, p1, depth + 1, opts, out)
        return
    # fail fast instead of refining the rest of the sweep first
    if report is None:
        raise TrackingError(f"ambiguous state assignment on [{a0!r}, {a1!r}]", (a0, a1))
    if not report[3]:
        raise TrackingError(f"eigenvalue jump exceeds the Lipschitz bound on [{a0!r}, {a1!r}]", (a0, a1))
    out.append((a1, s1, report))


def sweep(
    spec: FamilySpec,
    a_from: float,
    a_to: float,
    steps: int,
    adaptive: bool = False,
    *,
    refine_db: float = 0.05,
    max_depth: int = 12,
    tie_tol: float = 1e-9,
    defect_tol: float | None = None,
) -> list[SweepRecord]:
    """Track every state of ``spec`` over ``steps`` equal intervals of [a_from, a_to].

    With ``adaptive`` set, an interval is bisected (up to ``max_depth``
    times) while the tracked mixing squares change by more than
    ``refine_db``, the states change energy order, or an eigenvalue moves
    faster than the family's Lipschitz bound allows.

    Raises
    ------
    TrackingError
        An eigenvalue jump still violates the Lipschitz bound after all
        refinement, or an assignment is ambiguous.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if not a_from < a_to:
        raise ValueError("a_from must be smaller than a_to")
    L = _lipschitz(spec)
    grid = np.linspace(a_from, a_to, steps + 1)
    points = [(float(grid[0]), _system(spec, grid[0], defect_tol), None)]
    opts = dict(max_depth=max_depth, refine_db=refine_db, L=L, tie_tol=tie_tol, defect_tol=defect_tol)
    for a in grid[1:]:
        nxt = (float(a), _system(spec, a, defect_tol))
        if adaptive:
            _refine(spec, points[-1], nxt, 0, opts, points)
        else:
            points.append(nxt + (None,))

    e_start = np.array([lv.energy(a_from) for lv in spec.levels])
    level_rank = sorted(range(spec.n), key=lambda k: (-e_start[k], k))
    order = np.empty(spec.n, dtype=np.intp)
    order[level_rank] = np.arange(spec.n)

    records = []
    prev_rank = None
    conf = 1.0
    for k, (a, sys, report) in enumerate(points):
        if k:
            a0, s0, _ = points[k - 1]
            try:
                m, _, _, ok = report or _step_report(spec, s0, sys, a - a0, L, tie_tol)
            except TrackingError as exc:
                raise TrackingError(f"ambiguous state assignment on [{a0!r}, {a!r}]", (a0, a)) from exc
            if not ok:
                raise TrackingError(
                    f"eigenvalue jump exceeds the Lipschitz bound on [{a0!r}, {a!r}]", (a0, a)
                )
            order = np.array(m.perm)[order]
            conf = m.confidence
        values = sys.values[order]
        rank = tuple(np.lexsort((-values.imag, -values.real)))
        records.append(
            SweepRecord(
                a=a,
                values=values,
                norms=biorthogonality_metrics(sys).norms[order],
                b_sq=(sys.vectors ** 2)[order],
                match_confidence=conf,
                order_changed=prev_rank is not None and rank != prev_rank,
                vectors=sys.vectors[order],
            )
        )
        prev_rank = rank
    return records


def sweep_arrays(records: Sequence[SweepRecord]) -> dict[str, np.ndarray]:
    return {
        "a": np.array([r.a for r in records]),
        "values": np.array([r.values for r in records]),
        "norms": np.array([r.norms for r in records]),
        "b_sq": np.array([r.b_sq for r in records]),
        "confidence": np.array([r.match_confidence for r in records]),
    }


def total_variation(records: Sequence[SweepRecord]) -> np.ndarray:
    """Total variation of each tracked energy E_R over the sweep."""
    E = sweep_arrays(records)["values"].real
    return np.abs(np.diff(E, axis=0)).sum(axis=0)


# -- crossings and mixing regions --------------------------------------------


@dataclass(frozen=True)
class CrossingEvent:
    a_min: float
    pair: tuple[int, int]
    gap_min: float
    exchanged: bool
    mixing_halfwidth: float
    levels: tuple[int, int] = (0, 1)


@dataclass(frozen=True)
class MixingRegion:
    left: float
    right: float
    truncated: bool = False

    @property
    def halfwidth(self) -> float:
        return 0.5 * (self.right - self.left)


def pair_mixing(b_sq: np.ndarray, levels: tuple[int, int]) -> np.ndarray:
    """max over states R of min(|b2[R, i]|, |b2[R, j]|) at each record.

    Reaches 0.5 where some state is an equal mixture of levels i and j and
    vanishes where every state is pure. Independent of the labelling.
    """
    i, j = levels
    B = np.abs(b_sq)
    return np.minimum(B[..., i], B[..., j]).max(axis=-1)


def _climb(m: np.ndarray, k: int) -> int:
    while True:
        if k > 0 and m[k - 1] > m[k]:
            k -= 1
        elif k < len(m) - 1 and m[k + 1] > m[k]:
            k += 1
        else:
            return k


def _crossing_point(a, m, k0, k1, threshold):
    """Linear interpolation of m = threshold between indices k0 and k1."""
    if m[k0] == m[k1]:
        return a[k0]
    t = (threshold - m[k0]) / (m[k1] - m[k0])
    return a[k0] + t * (a[k1] - a[k0])


def _interval(a: np.ndarray, m: np.ndarray, peak: int, threshold: float) -> MixingRegion | None:
    if m[peak] < threshold:
        return None
    lo = peak
    while lo > 0 and m[lo - 1] >= threshold:
        lo -= 1
    hi = peak
    while hi < len(m) - 1 and m[hi + 1] >= threshold:
        hi += 1
    truncated = lo == 0 or hi == len(m) - 1
    left = a[lo] if lo == 0 else _crossing_point(a, m, lo - 1, lo, threshold)
    right = a[hi] if hi == len(m) - 1 else _crossing_point(a, m, hi, hi + 1, threshold)
    return MixingRegion(float(left), float(right), truncated)


def mixing_region_width(
    records: Sequence[SweepRecord], event: CrossingEvent, threshold: float = DEFAULT_THRESHOLD
) -> MixingRegion:
    """Interval around ``event.a_min`` where the event's two levels stay mixed.

    The mixing measure is :func:`pair_mixing` on ``event.levels``; the
    interval is where it stays >= ``threshold``. A zero-width region is
    returned when the measure never reaches the threshold.
    """
    if not 0 < threshold < 0.5:
        raise ValueError("threshold must lie in (0, 0.5)")
    arr = sweep_arrays(records)
    a = arr["a"]
    m = pair_mixing(arr["b_sq"], event.levels)
    start = int(np.argmin(np.abs(a - event.a_min)))
    region = _interval(a, m, _climb(m, start), threshold)
    if region is None:
        return MixingRegion(event.a_min, event.a_min)
    return region


def _vertex(x, y):
    """Vertex of the parabola through three points, or None if not convex."""
    (x0, x1, x2), (y0, y1, y2) = x, y
    d01 = (y1 - y0) / (x1 - x0)
    d12 = (y2 - y1) / (x2 - x1)
    curv = (d12 - d01) / (x2 - x0)
    if curv <= 0:
        return None
    xv = 0.5 * (x0 + x1) - d01 / (2.0 * curv)
    if not x0 <= xv <= x2:
        return None
    return xv, y0 + d01 * (xv - x0) + curv * (xv - x0) * (xv - x1)


def detect_avoided_crossings(
    records: Sequence[SweepRecord],
    *,
    threshold: float = DEFAULT_THRESHOLD,
    purity: float = 0.1,
) -> list[CrossingEvent]:
    """One event per interior local minimum of every pairwise gap |E_R - E_R'|.

    The minimum location is refined by a parabola through the three grid
    points around it. ``exchanged`` is set when both states change their
    dominant level between the nearest points on either side where the
    pair is no longer mixed (pair mixing below ``purity``), or the edges of
    the gap's basin if it stays mixed.
    """
    if len(records) < 3:
        raise ValueError("need at least 3 records")
    arr = sweep_arrays(records)
    a, E, B = arr["a"], arr["values"], np.abs(arr["b_sq"])
    n = E.shape[1]
    events = []
    for R in range(n):
        for Rp in range(R + 1, n):
            g = np.abs(E[:, R] - E[:, Rp])
            floor = 1e-8 * (1.0 + g.max())
            for k in range(1, len(g) - 1):
                if not (g[k] < g[k - 1] and g[k] <= g[k + 1]):
                    continue
                lo = k
                while lo > 0 and g[lo - 1] >= g[lo]:
                    lo -= 1
                hi = k
                while hi < len(g) - 1 and g[hi + 1] >= g[hi]:
                    hi += 1
                if min(g[lo], g[hi]) - g[k] <= floor:
                    continue
                vx = _vertex(a[k - 1 : k + 2], g[k - 1 : k + 2])
                a_min, gap_min = (a[k], g[k]) if vx is None else vx
                weight = B[k, R] + B[k, Rp]
                i, j = sorted(int(x) for x in np.argsort(-weight, kind="stable")[:2])
                mix = np.maximum(
                    np.minimum(B[:, R, i], B[:, R, j]), np.minimum(B[:, Rp, i], B[:, Rp, j])
                )
                left = k - 1
                while left > lo and mix[left] >= purity:
                    left -= 1
                right = k + 1
                while right < hi and mix[right] >= purity:
                    right += 1
                dom = B.argmax(axis=2)
                exchanged = bool(dom[left, R] != dom[right, R] and dom[left, Rp] != dom[right, Rp])
                ev = CrossingEvent(
                    a_min=float(a_min),
                    pair=(R, Rp),
                    gap_min=float(max(gap_min, 0.0)),
                    exchanged=exchanged,
                    mixing_halfwidth=0.0,
                    levels=(i, j),
                )
                width = mixing_region_width(records, ev, threshold).halfwidth
                events.append(
                    CrossingEvent(ev.a_min, ev.pair, ev.gap_min, exchanged, width, ev.levels)
                )
    events.sort(key=lambda e: (e.a_min, e.pair))
    return events


# -- overlap onset -----------------------------------------------------------


@dataclass(frozen=True)
class OnsetResult:
    """``onset`` is None when no pair of adjacent mixing regions overlapped.

    ``separations[k]`` is the smallest gap between adjacent mixing regions at
    ``v_values[k]``; negative once two regions overlap.
    """

    onset: float | None
    v_values: tuple[float, ...]
    separations: tuple[float, ...]
    anchors: tuple[tuple[int, int, float], ...] = ()

    @property
    def reached(self) -> bool:
        return self.onset is not None


def _isolated_real_crossings(spec: FamilySpec, a_from=None, a_to=None):
    crossings = [c for c in unperturbed_crossings(spec) if abs(c.a_cr.imag) <= 1e-12]
    keep = []
    for c in crossings:
        shared = [
            d for d in crossings
            if d is not c and abs(d.a_cr - c.a_cr) <= 1e-9 and {d.i, d.j} & {c.i, c.j}
        ]
        if shared:
            continue
        if a_from is not None and not a_from <= c.a_cr.real <= a_to:
            continue
        keep.append((c.i, c.j, c.a_cr.real))
    return keep


def overlap_onset(
    spec4: FamilySpec,
    v_values: Sequence[float],
    threshold: float = DEFAULT_THRESHOLD,
    *,
    a_from: float | None = None,
    a_to: float | None = None,
    steps: int = 600,
    adaptive: bool = True,
    margin: float = 0.1,
) -> OnsetResult:
    """Smallest coupling at which mixing regions of adjacent crossings touch.

    Anchors are the isolated real crossings of the uncoupled levels inside
    the sweep window (by default the crossings' span widened by ``margin``
    on each side). For every coupling in ``v_values`` (uniform, ascending)
    each anchor's region is the interval where :func:`pair_mixing` of its
    two levels stays >= ``threshold`` around the nearest mixing peak.
    The onset is linearly interpolated between the last separated and the
    first overlapping coupling.
    """
    if not 0 < threshold < 0.5:
        raise ValueError("threshold must lie in (0, 0.5)")
    v_values = [float(v) for v in v_values]
    if any(b <= a for a, b in zip(v_values, v_values[1:])):
        raise ValueError("v_values must be strictly ascending")
    if (a_from is None) != (a_to is None):
        raise ValueError("give both a_from and a_to or neither")
    anchors = _isolated_real_crossings(spec4, a_from, a_to)
    if len({round(x[2], 12) for x in anchors}) < 2:
        raise ValueError("family needs at least two distinct crossings in the sweep window")
    if a_from is None:
        a_from = min(x[2] for x in anchors) - margin
        a_to = max(x[2] for x in anchors) + margin
    anchors.sort(key=lambda x: x[2])
    centers = np.array([x[2] for x in anchors])
    bounds = np.concatenate(([a_from], 0.5 * (centers[1:] + centers[:-1]), [a_to]))

    separations = []
    for v in v_values:
        records = sweep(with_coupling(spec4, v), a_from, a_to, steps, adaptive)
        arr = sweep_arrays(records)
        a = arr["a"]
        regions = []
        for k, (i, j, _) in enumerate(anchors):
            m = pair_mixing(arr["b_sq"], (i, j))
            inside = np.flatnonzero((a >= bounds[k]) & (a <= bounds[k + 1]))
            peak = int(inside[np.argmax(m[inside])])
            regions.append(_interval(a, m, peak, threshold))
        gaps = [
            r2.left - r1.right
            for r1, r2 in zip(regions, regions[1:])
            if r1 is not None and r2 is not None
        ]
        sep = min(gaps) if gaps else np.inf
        separations.append(float(sep))
        log.debug("v=%g separation=%g", v, sep)

    onset = None
    for k, s in enumerate(separations):
        if s <= 0:
            if k == 0:
                onset = v_values[0]
            else:
                s0 = separations[k - 1]
                v0, v1 = v_values[k - 1], v_values[k]
                onset = v0 + (v1 - v0) * s0 / (s0 - s)
            break
    return OnsetResult(onset, tuple(v_values), tuple(separations), tuple(anchors))
