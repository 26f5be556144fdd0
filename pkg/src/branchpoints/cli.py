"""Command-line interface.

Every command writes its CSV (and, for sweeps, optional SVG) files to
``--out`` together with ``manifest.json``, which records the exact inputs
so that ``branchpoints rerun manifest.json`` reproduces the outputs byte for
byte. CSV content is echoed to stdout.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 certification failure, 1 anything else (e.g. unwritable output).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import output
from .eigen import biorthogonality_metrics, eigendecompose, mixing_coefficients
from .epfinder import count_zeros, encircle, find_branch_point, is_transposition, list_branch_points
from .errors import CertificationError, ConfigError, NumericalError
from .family import FamilySpec, build_matrix, parse_family, with_coupling
from .sweep import detect_avoided_crossings, overlap_onset, sweep
from .tolerances import Tolerances, from_environment

log = logging.getLogger("branchpoints")

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CERT = 0, 1, 2, 3, 4


# -- argument helpers ---------------------------------------------------------


def parse_complex(text: str) -> complex:
    """``"re,im"`` or a single real number."""
    parts = [p.strip() for p in str(text).split(",")]
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise ConfigError(f"expected 're,im', got {text!r}")


def parse_region(text: str) -> tuple[float, float, float, float]:
    parts = str(text).split(",")
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        vals = ()
    if len(vals) != 4:
        raise ConfigError(f"expected 're_min,re_max,im_min,im_max', got {text!r}")
    return vals


def parse_overrides(items) -> dict[str, float]:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            sep = ""
        if not sep:
            raise ConfigError(f"expected NAME=VALUE for --tolerance, got {item!r}")
    return out


def preset_names() -> list[str]:
    root = resources.files("branchpoints") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def read_config(ref: str) -> str:
    """Text of the config file ``ref``, or of the bundled preset of that name."""
    path = Path(ref)
    if path.is_file():
        return path.read_text(encoding="utf-8")
    preset = resources.files("branchpoints") / "presets" / f"{ref}.yaml"
    if preset.is_file():
        return preset.read_text(encoding="utf-8")
    raise ConfigError(f"no config file or preset named {ref!r} (presets: {', '.join(preset_names())})")


# -- commands -----------------------------------------------------------------
# Each returns (files, extra manifest fields); files maps name -> text.


def _events(records) -> list[dict]:
    try:
        return [output.event_dict(ev) for ev in detect_avoided_crossings(records)]
    except ValueError:
        return []


def cmd_sweep(spec: FamilySpec, args, tol: Tolerances):
    records = sweep(
        spec, args.a_from, args.a_to, args.steps, adaptive=args.adaptive,
        tie_tol=tol.tie, defect_tol=tol.defect,
    )
    real_mixing = spec.is_hermitian_on_real_axis() and not any(np.any(r.b_sq.imag) for r in records)
    files = {"sweep.csv": output.sweep_csv(records, real_mixing)}
    if args.svg:
        energies, mixing = output.sweep_svgs(records, title=f"v = {spec.coupling.uniform_value}")
        files["energies.svg"] = energies
        files["mixing.svg"] = mixing
    swaps = [r.a for r in records if r.order_changed]
    extra = {"rows": len(records), "label_swaps": swaps, "crossing_events": _events(records)}
    return files, extra


def cmd_find_ep(spec: FamilySpec, args, tol: Tolerances):
    bp = find_branch_point(spec, parse_complex(args.seed), tol.root)
    extra = {"history_length": len(bp.history)}
    if args.certify:
        res = encircle(spec, bp.a_bp, args.radius, args.steps, clearance=tol.clearance, tie_tol=tol.tie)
        bp = type(bp)(**{**bp.__dict__, "certified": is_transposition(res.permutation),
                         "permutation": res.permutation, "certify_radius": args.radius})
    text = output.csv_text(output.branch_point_header(), [output.branch_point_row(bp)])
    return {"branch_point.csv": text}, extra | {"certified": bp.certified}


def cmd_list_eps(spec: FamilySpec, args, tol: Tolerances):
    region = parse_region(args.region)
    found = list_branch_points(
        spec, region, args.grid, tol=tol.root, dedup=tol.dedup, certify=not args.no_certify, steps=args.steps
    )
    rows = [output.branch_point_row(bp) for bp in found]
    files = {"branch_points.csv": output.csv_text(output.branch_point_header(), rows)}
    extra = {"note": found.note, "failed_seeds": len(found.failures)}
    if args.count:
        extra["zero_count"] = count_zeros(spec, region)
    return files, extra


def cmd_encircle(spec: FamilySpec, args, tol: Tolerances):
    res = encircle(spec, parse_complex(args.center), args.radius, args.steps,
                   clearance=tol.clearance, tie_tol=tol.tie)
    return {"monodromy.csv": output.monodromy_csv(res)}, {"identity": res.is_identity}


def cmd_overlap_onset(spec: FamilySpec, args, tol: Tolerances):
    if args.v_steps < 2 or not args.v_min < args.v_max:
        raise ConfigError("need --v-steps >= 2 and --v-min < --v-max")
    v_values = np.linspace(args.v_min, args.v_max, args.v_steps)
    res = overlap_onset(spec, v_values, args.threshold, a_from=args.a_from, a_to=args.a_to, steps=args.steps)
    extra = {"onset": res.onset, "anchors": [[i + 1, j + 1, a] for i, j, a in res.anchors]}
    return {"overlap_onset.csv": output.onset_csv(res)}, extra


def cmd_mixing(spec: FamilySpec, args, tol: Tolerances):
    a = parse_complex(args.a)
    sys_ = eigendecompose(build_matrix(spec, a), parameter=a, defect_tol=tol.defect)
    mix = mixing_coefficients(sys_)
    norms = biorthogonality_metrics(sys_).norms
    n = sys_.n
    real = a.imag == 0 and spec.is_hermitian_on_real_axis()
    head = ["state", "E_re", "E_im", "norm"]
    for i in range(1, n + 1):
        head += [f"b2_{i}"] if real else [f"b2_{i}", f"b2_{i}_im"]
    rows = []
    for R in range(n):
        row = [R + 1, sys_.values[R].real, sys_.values[R].imag, norms[R]]
        for z in mix.b_sq[R]:
            row += [z.real] if real else [z.real, z.imag]
        rows.append(row)
    return {"mixing.csv": output.csv_text(head, rows)}, {"defective": bool(sys_.defective)}


COMMANDS = {
    "sweep": cmd_sweep,
    "find-ep": cmd_find_ep,
    "list-eps": cmd_list_eps,
    "encircle": cmd_encircle,
    "overlap-onset": cmd_overlap_onset,
    "mixing": cmd_mixing,
}


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchpoints",
        description="Branch points and avoided crossings of complex symmetric matrix families.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML config file or preset name")
        p.add_argument("--v", dest="coupling", default=None,
                       help="replace the coupling by a uniform value ('re' or 're,im')")
        p.add_argument("--out", default="out", help="output directory (default: %(default)s)")
        p.add_argument("--tolerance", action="append", default=[], metavar="NAME=VALUE",
                       help="override a tolerance (defect, root, dedup, clearance, tie)")
        p.add_argument("--quiet", action="store_true", help="do not echo CSV output")

    p = sub.add_parser("sweep", help="track all states along a real parameter interval")
    common(p)
    p.add_argument("--from", dest="a_from", type=float, required=True)
    p.add_argument("--to", dest="a_to", type=float, required=True)
    p.add_argument("--steps", type=int, default=400)
    p.add_argument("--adaptive", action="store_true", help="bisect intervals with fast mixing changes")
    p.add_argument("--svg", action="store_true", help="also write energies.svg and mixing.svg")

    p = sub.add_parser("find-ep", help="locate one branch point from a complex seed")
    common(p)
    p.add_argument("--seed", required=True, help="'re,im'")
    p.add_argument("--certify", action="store_true", help="confirm by monodromy; exit 4 if it fails")
    p.add_argument("--radius", type=float, default=0.02)
    p.add_argument("--steps", type=int, default=256)

    p = sub.add_parser("list-eps", help="all branch points in a rectangle")
    common(p)
    p.add_argument("--region", required=True, help="'re_min,re_max,im_min,im_max'")
    p.add_argument("--grid", type=int, default=8)
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--no-certify", action="store_true")
    p.add_argument("--count", action="store_true", help="also count zeros by the argument principle")

    p = sub.add_parser("encircle", help="monodromy of the states around a circle")
    common(p)
    p.add_argument("--center", required=True, help="'re,im'")
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--steps", type=int, default=256)

    p = sub.add_parser("overlap-onset", help="coupling where adjacent mixing regions start to overlap")
    common(p)
    p.add_argument("--v-min", type=float, required=True)
    p.add_argument("--v-max", type=float, required=True)
    p.add_argument("--v-steps", type=int, required=True)
    p.add_argument("--threshold", type=float, default=0.25)
    p.add_argument("--from", dest="a_from", type=float, default=None)
    p.add_argument("--to", dest="a_to", type=float, default=None)
    p.add_argument("--steps", type=int, default=600)

    p = sub.add_parser("mixing", help="eigenvalues, norms and mixing squares at one parameter")
    common(p)
    p.add_argument("--a", required=True, help="'re' or 're,im'")

    p = sub.add_parser("rerun", help="repeat the run recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="output directory (default: the recorded one)")
    p.add_argument("--quiet", action="store_true")
    return parser


# -- driver -------------------------------------------------------------------


_RUN_KEYS = ("command", "config", "verbose", "quiet", "out")


def run(command: str, config_ref: str, config_text: str, args) -> int:
    spec = parse_family(config_text)
    if args.coupling is not None:
        spec = with_coupling(spec, parse_complex(args.coupling))
    tol, scale = from_environment()
    overrides = parse_overrides(args.tolerance)
    tol = tol.with_overrides(overrides)

    files, extra = COMMANDS[command](spec, args, tol)

    out = Path(args.out)
    for name, text in files.items():
        output.write_text(out / name, text)
        if not args.quiet and name.endswith(".csv"):
            sys.stdout.write(text)
    recorded = {k: v for k, v in sorted(vars(args).items()) if k not in _RUN_KEYS}
    data = output.manifest(
        command, config_ref, spec, recorded,
        {"effective": tol.as_dict(), "overrides": overrides, "scale": scale},
        [str(out / name) for name in files],
        extra,
    )
    output.write_manifest(out / "manifest.json", data)

    if command == "find-ep" and extra.get("certified") is False:
        raise CertificationError("monodromy around the located point is not a transposition")
    return EXIT_OK


def rerun(path: str, out: str | None, quiet: bool) -> int:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        command, recorded = data["command"], dict(data["args"])
        config_text = data["config_text"]
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"unreadable manifest {path}: {exc}") from exc
    if command not in COMMANDS:
        raise ConfigError(f"manifest names unknown command {command!r}")
    ns = argparse.Namespace(**recorded, quiet=quiet, out=out or str(Path(data["output_paths"][0]).parent))
    return run(command, data["config_path"], config_text, ns)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "rerun":
            return rerun(args.manifest, args.out, args.quiet)
        return run(args.command, args.config, read_config(args.config), args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except CertificationError as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_OTHER
