"""CSV, SVG and manifest emission.

Numbers are written with 17 significant digits so a CSV file reproduces the
underlying doubles exactly; column and row order are fixed.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .epfinder import BranchPoint, MonodromyResult
from .family import FamilySpec, dump_family, family_to_config
from .svgplot import Series, line_chart
from .sweep import CrossingEvent, OnsetResult, SweepRecord, sweep_arrays


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return format(float(x), ".17g")


def csv_text(header: Sequence[str], rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(cell if isinstance(cell, str) else fmt(cell) for cell in row) for row in rows]
    return "\n".join(lines) + "\n"


def sweep_header(n: int, real_mixing: bool) -> list[str]:
    head = ["a"]
    for R in range(1, n + 1):
        head += [f"E_{R}_re", f"E_{R}_im"]
    head += [f"norm_{R}" for R in range(1, n + 1)]
    for R in range(1, n + 1):
        for i in range(1, n + 1):
            head.append(f"b2_{R}_{i}")
            if not real_mixing:
                head.append(f"b2_{R}_{i}_im")
    head.append("confidence")
    return head


def sweep_csv(records: Sequence[SweepRecord], real_mixing: bool) -> str:
    n = len(records[0].values)
    rows = []
    for r in records:
        row = [r.a]
        for z in r.values:
            row += [z.real, z.imag]
        row += list(r.norms)
        for z in r.b_sq.ravel():
            row += [z.real] if real_mixing else [z.real, z.imag]
        row.append(r.match_confidence)
        rows.append(row)
    return csv_text(sweep_header(n, real_mixing), rows)


def sweep_svgs(records: Sequence[SweepRecord], title: str = "") -> tuple[str, str]:
    arr = sweep_arrays(records)
    a, E, B = arr["a"], arr["values"], arr["b_sq"]
    n = E.shape[1]
    energies = [Series(f"E_{R + 1}", a, E[:, R].real, color=R) for R in range(n)]
    mixing = [
        Series(f"b2_{R + 1}_{i + 1}", a, B[:, R, i].real, color=R, dashed=(i != R))
        for R in range(n)
        for i in range(n)
    ]
    return (
        line_chart(energies, title=title, xlabel="a", ylabel="E"),
        line_chart(mixing, title=title, xlabel="a", ylabel="b^2"),
    )


def branch_point_header() -> list[str]:
    return [
        "a_re", "a_im", "value_re", "value_im", "pair_1", "pair_2",
        "disc_residual", "gap_sq", "coalescence", "certified", "permutation",
    ]


def branch_point_row(bp: BranchPoint) -> list:
    perm = "" if bp.permutation is None else " ".join(str(p + 1) for p in bp.permutation)
    cert = "" if bp.certified is None else bp.certified
    return [
        bp.a_bp.real, bp.a_bp.imag, bp.value_bp.real, bp.value_bp.imag,
        bp.pair[0] + 1, bp.pair[1] + 1, bp.disc_residual, bp.gap_sq, bp.coalescence,
        cert if isinstance(cert, str) else fmt(cert), perm,
    ]


def monodromy_csv(res: MonodromyResult) -> str:
    perm = " ".join(str(p + 1) for p in res.permutation)
    rows = [
        ["permutation", perm],
        ["center_re", fmt(res.loop_center.real)],
        ["center_im", fmt(res.loop_center.imag)],
        ["radius", fmt(res.loop_radius)],
        ["steps", fmt(res.steps)],
        ["max_tracking_gap", fmt(res.max_tracking_gap)],
    ]
    return "\n".join(",".join(r) for r in rows) + "\n"


def onset_csv(res: OnsetResult) -> str:
    rows = [[v, s] for v, s in zip(res.v_values, res.separations)]
    text = csv_text(["v", "separation"], rows)
    onset = "not reached" if res.onset is None else fmt(res.onset)
    return text + f"onset,{onset}\n"


def event_dict(ev: CrossingEvent) -> dict:
    return {
        "a_min": ev.a_min,
        "pair": [ev.pair[0] + 1, ev.pair[1] + 1],
        "levels": [ev.levels[0] + 1, ev.levels[1] + 1],
        "gap_min": ev.gap_min,
        "exchanged": ev.exchanged,
        "mixing_halfwidth": ev.mixing_halfwidth,
    }


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, (list, tuple)):
        return [_jsonable(y) for y in x]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    return x


def manifest(
    command: str,
    config_path: str,
    spec: FamilySpec,
    args: dict,
    tolerances: dict,
    outputs: Sequence[str],
    extra: dict | None = None,
) -> dict:
    data = {
        "tool": "branchpoints",
        "version": __version__,
        "command": command,
        "config_path": config_path,
        "config": family_to_config(spec),
        "config_text": dump_family(spec),
        "args": args,
        "tolerances": tolerances,
        "output_paths": list(outputs),
    }
    if extra:
        data.update(extra)
    return _jsonable(data)


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_manifest(path: Path, data: dict) -> None:
    write_text(path, json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n")
