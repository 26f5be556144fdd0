"""Parametrized complex symmetric matrix families.

A family is a set of ``n`` unperturbed levels whose complex energies

    eps_k(a) = e_k(a) - (i/2) c_k(a),   e_k(a) = e0 + e_slope * a,
                                        c_k(a) = c0 + c_slope * a

sit on the diagonal of ``H(a)``, plus a constant symmetric coupling on the
off-diagonal. The parameter ``a`` may be complex; the linear formulas are
continued analytically.

Configurations are YAML documents::

    n: 2
    levels:
      - {e0: 1.0, e_slope: -0.5, c0: 0.0, c_slope: 0.0}
      - {e0: 0.0, e_slope: 1.0}
    coupling: {mode: uniform, v: 0.05}

Complex numbers are written as ``[re, im]``.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError

__all__ = [
    "LevelSpec",
    "CouplingSpec",
    "FamilySpec",
    "Crossing",
    "parse_family",
    "load_family",
    "build_matrix",
    "unperturbed_crossings",
    "family_to_config",
    "dump_family",
    "with_coupling",
    "two_level_family",
    "four_level_family",
]

_TOP_KEYS = {"n", "levels", "coupling"}
_LEVEL_KEYS = {"e0", "e_slope", "c0", "c_slope"}


@dataclass(frozen=True)
class LevelSpec:
    e0: float
    e_slope: float = 0.0
    c0: float = 0.0
    c_slope: float = 0.0

    def energy(self, a):
        return self.e0 + self.e_slope * a

    def width(self, a):
        return self.c0 + self.c_slope * a

    def eps(self, a) -> complex:
        """Complex energy e(a) - (i/2) c(a)."""
        return self.energy(a) - 0.5j * self.width(a)

    @property
    def eps_slope(self) -> complex:
        return complex(self.e_slope, -0.5 * self.c_slope)

    @property
    def eps_offset(self) -> complex:
        return complex(self.e0, -0.5 * self.c0)


@dataclass(frozen=True)
class CouplingSpec:
    mode: str = "uniform"
    uniform_value: complex = 0j
    full_matrix: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.mode not in ("uniform", "full"):
            raise ConfigError(f"unknown coupling mode {self.mode!r}", field="coupling.mode")
        if self.mode == "full":
            if self.full_matrix is None:
                raise ConfigError("full coupling needs a matrix", field="coupling.matrix")
            V = np.array(self.full_matrix, dtype=complex)
            if V.ndim != 2 or V.shape[0] != V.shape[1]:
                raise ConfigError("coupling matrix must be square", field="coupling.matrix")
            if not np.array_equal(V, V.T):
                raise ConfigError("coupling matrix must be symmetric", field="coupling.matrix")
            if np.any(np.diag(V) != 0):
                raise ConfigError("coupling matrix must have a zero diagonal", field="coupling.matrix")
            V.setflags(write=False)
            object.__setattr__(self, "full_matrix", V)
        object.__setattr__(self, "uniform_value", complex(self.uniform_value))

    def materialize(self, n: int) -> np.ndarray:
        if self.mode == "uniform":
            V = np.full((n, n), self.uniform_value, dtype=complex)
            np.fill_diagonal(V, 0)
            return V
        if self.full_matrix.shape != (n, n):
            raise ConfigError(
                f"coupling matrix is {self.full_matrix.shape[0]}x{self.full_matrix.shape[1]}, expected {n}x{n}",
                field="coupling.matrix",
            )
        return self.full_matrix.copy()

    def is_zero(self) -> bool:
        if self.mode == "uniform":
            return self.uniform_value == 0
        return not np.any(self.full_matrix)

    def is_real(self) -> bool:
        if self.mode == "uniform":
            return self.uniform_value.imag == 0
        return not np.any(self.full_matrix.imag)

    def __eq__(self, other):
        if not isinstance(other, CouplingSpec):
            return NotImplemented
        if self.mode != other.mode:
            return False
        if self.mode == "uniform":
            return self.uniform_value == other.uniform_value
        return np.array_equal(self.full_matrix, other.full_matrix)

    def __hash__(self):
        if self.mode == "uniform":
            return hash((self.mode, self.uniform_value))
        return hash((self.mode, self.full_matrix.tobytes()))


@dataclass(frozen=True)
class FamilySpec:
    n: int
    levels: tuple[LevelSpec, ...]
    coupling: CouplingSpec

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not isinstance(self.n, numbers.Integral) or self.n < 2:
            raise ConfigError("n must be an integer >= 2", field="n")
        if len(self.levels) != self.n:
            raise ConfigError(f"n = {self.n} but {len(self.levels)} levels given", field="levels")
        if self.coupling.mode == "full":
            self.coupling.materialize(self.n)

    @property
    def eps_slopes(self) -> np.ndarray:
        return np.array([lv.eps_slope for lv in self.levels])

    @property
    def eps_offsets(self) -> np.ndarray:
        return np.array([lv.eps_offset for lv in self.levels])

    def eps(self, a) -> np.ndarray:
        return self.eps_offsets + self.eps_slopes * a

    def coupling_matrix(self) -> np.ndarray:
        return self.coupling.materialize(self.n)

    def is_real(self) -> bool:
        """True when every level field and the coupling are real."""
        return self.coupling.is_real()

    def is_hermitian_on_real_axis(self) -> bool:
        """Real a gives a real symmetric (Hermitian) matrix."""
        no_widths = all(lv.c0 == 0 and lv.c_slope == 0 for lv in self.levels)
        return no_widths and self.coupling.is_real()


def build_matrix(spec: FamilySpec, a: complex) -> np.ndarray:
    """Materialize H(a) as a dense complex symmetric array."""
    M = spec.coupling_matrix()
    M[np.diag_indices(spec.n)] = spec.eps(a)
    return M


def with_coupling(spec: FamilySpec, v: complex) -> FamilySpec:
    """Same levels, uniform coupling ``v``."""
    return replace(spec, coupling=CouplingSpec("uniform", v))


@dataclass(frozen=True)
class Crossing:
    """A zero of eps_i(a) - eps_j(a) at vanishing coupling.

    ``kind`` is ``"simple"`` for an isolated crossing, ``"parallel"`` when
    the two levels never meet, ``"identical"`` when they coincide for all a.
    ``a_cr`` is ``None`` unless the kind is simple.
    """

    i: int
    j: int
    a_cr: complex | None
    kind: str = "simple"


def unperturbed_crossings(spec: FamilySpec, *, include_degenerate: bool = False) -> list[Crossing]:
    """Pairwise crossings of the uncoupled levels, sorted by Re a_cr.

    Level indices are zero-based. Pairs that never cross (or always
    coincide) are appended after the finite crossings when
    ``include_degenerate`` is set.
    """
    finite, degenerate = [], []
    slopes, offsets = spec.eps_slopes, spec.eps_offsets
    for i in range(spec.n):
        for j in range(i + 1, spec.n):
            ds = slopes[i] - slopes[j]
            do = offsets[i] - offsets[j]
            if ds == 0:
                kind = "identical" if do == 0 else "parallel"
                degenerate.append(Crossing(i, j, None, kind))
                continue
            a_cr = -do / ds
            finite.append(Crossing(i, j, complex(a_cr)))
    finite.sort(key=lambda c: (c.a_cr.real, c.a_cr.imag, c.i, c.j))
    return finite + degenerate if include_degenerate else finite


# -- configuration text ------------------------------------------------------


def _is_number(x) -> bool:
    return isinstance(x, numbers.Real) and not isinstance(x, bool) and math.isfinite(x)


def _locate(node, path: tuple) -> int | None:
    """Source line (1-based) of the YAML node at ``path``, best effort."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt = v
                    line = k.start_mark.line + 1
                    break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
        if node is None:
            break
    return line


def _path_str(path: tuple) -> str:
    out = ""
    for key in path:
        out += f"[{key}]" if isinstance(key, int) else (f".{key}" if out else str(key))
    return out


class _Checker:
    def __init__(self, root_node):
        self.root = root_node

    def fail(self, message: str, path: tuple):
        raise ConfigError(message, field=_path_str(path) or None, line=_locate(self.root, path))

    def real(self, value, path) -> float:
        if not _is_number(value):
            self.fail(f"expected a finite number, got {value!r}", path)
        return float(value)

    def complex(self, value, path) -> complex:
        if isinstance(value, list):
            if len(value) != 2 or not all(_is_number(x) for x in value):
                self.fail("complex values are written as [re, im]", path)
            return complex(float(value[0]), float(value[1]))
        return complex(self.real(value, path))

    def mapping(self, value, path, allowed: set, required: set) -> dict:
        if not isinstance(value, dict):
            self.fail("expected a mapping", path)
        for key in value:
            if key not in allowed:
                self.fail(f"unknown field {key!r}", path + (key,))
        for key in sorted(required):
            if key not in value:
                self.fail(f"missing field {key!r}", path)
        return value


def parse_family(config_text: str) -> FamilySpec:
    """Parse and validate a YAML family description.

    Raises
    ------
    ConfigError
        On YAML syntax errors, unknown or missing fields, a level count
        that disagrees with ``n``, or an invalid coupling matrix. The
        error carries the offending field path and source line.
    """
    try:
        root = yaml.compose(config_text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(config_text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"syntax error: {exc.problem}", line=line) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"syntax error: {exc}") from exc

    chk = _Checker(root)
    data = chk.mapping(data, (), _TOP_KEYS, _TOP_KEYS)

    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool):
        chk.fail("n must be an integer", ("n",))
    if n < 2:
        chk.fail("n must be >= 2", ("n",))

    raw_levels = data["levels"]
    if not isinstance(raw_levels, list):
        chk.fail("levels must be a list", ("levels",))
    if len(raw_levels) != n:
        chk.fail(f"n = {n} but {len(raw_levels)} levels given", ("levels",))
    levels = []
    for k, item in enumerate(raw_levels):
        path = ("levels", k)
        item = chk.mapping(item, path, _LEVEL_KEYS, {"e0", "e_slope"})
        fields = {key: chk.real(item[key], path + (key,)) for key in item}
        if fields.get("c0", 0.0) < 0:
            chk.fail("width offset c0 must be >= 0", path + ("c0",))
        levels.append(LevelSpec(**fields))

    raw = data["coupling"]
    path = ("coupling",)
    if not isinstance(raw, dict):
        chk.fail("expected a mapping", path)
    mode = raw.get("mode")
    if mode == "uniform":
        raw = chk.mapping(raw, path, {"mode", "v"}, {"mode", "v"})
        coupling = CouplingSpec("uniform", chk.complex(raw["v"], path + ("v",)))
    elif mode == "full":
        raw = chk.mapping(raw, path, {"mode", "matrix"}, {"mode", "matrix"})
        rows = raw["matrix"]
        mpath = path + ("matrix",)
        if not isinstance(rows, list) or len(rows) != n:
            chk.fail(f"matrix must have {n} rows", mpath)
        V = np.zeros((n, n), dtype=complex)
        for r, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != n:
                chk.fail(f"row must have {n} entries", mpath + (r,))
            for c, entry in enumerate(row):
                V[r, c] = chk.complex(entry, mpath + (r, c))
        for r in range(n):
            if V[r, r] != 0:
                chk.fail("diagonal coupling entries must be zero", mpath + (r, r))
            for c in range(r + 1, n):
                if V[r, c] != V[c, r]:
                    chk.fail(f"matrix not symmetric: [{r}][{c}] != [{c}][{r}]", mpath + (r, c))
        coupling = CouplingSpec("full", full_matrix=V)
    else:
        chk.fail(f"mode must be 'uniform' or 'full', got {mode!r}", path + ("mode",))

    return FamilySpec(n=n, levels=tuple(levels), coupling=coupling)


def load_family(path) -> FamilySpec:
    with open(path, encoding="utf-8") as fh:
        return parse_family(fh.read())


def _complex_out(z: complex):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def family_to_config(spec: FamilySpec) -> dict[str, Any]:
    """Plain-data form of ``spec``; ``parse_family`` inverts it exactly."""
    levels = [
        {"e0": lv.e0, "e_slope": lv.e_slope, "c0": lv.c0, "c_slope": lv.c_slope}
        for lv in spec.levels
    ]
    if spec.coupling.mode == "uniform":
        coupling = {"mode": "uniform", "v": _complex_out(spec.coupling.uniform_value)}
    else:
        coupling = {
            "mode": "full",
            "matrix": [[_complex_out(z) for z in row] for row in spec.coupling.full_matrix],
        }
    return {"n": spec.n, "levels": levels, "coupling": coupling}


def dump_family(spec: FamilySpec) -> str:
    return yaml.safe_dump(family_to_config(spec), sort_keys=False)


# -- reference families ------------------------------------------------------


def two_level_family(v: complex = 0.05) -> FamilySpec:
    """e1 = 1 - a/2, e2 = a, no widths, coupling v."""
    return FamilySpec(
        2,
        (LevelSpec(1.0, -0.5), LevelSpec(0.0, 1.0)),
        CouplingSpec("uniform", v),
    )


def four_level_family(v: complex = 0.005) -> FamilySpec:
    """e1 = 1 - a/3, e2 = 1 - 5a/12, e3 = 1 - a/2, e4 = a; all couplings v."""
    return FamilySpec(
        4,
        (
            LevelSpec(1.0, -1.0 / 3.0),
            LevelSpec(1.0, -5.0 / 12.0),
            LevelSpec(1.0, -0.5),
            LevelSpec(0.0, 1.0),
        ),
        CouplingSpec("uniform", v),
    )
