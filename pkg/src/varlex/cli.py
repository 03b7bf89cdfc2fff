"""Command-line interface: ``varlex <command> --config spec.json [--out report.json]``.

Exit codes: 0 bounded / consistent / converged, 1 invalid input or violated
hypotheses, 2 divergent / suspect / not converged, 3 inconclusive.
Reports are written with sorted keys so identical inputs give identical
bytes; infinities are encoded as the string ``"inf"``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from ._parallel import thread_count
from .exponents import ExponentField
from .grid import Box, load_grid_function, save_grid_function
from .inequalities import (
    KINDS,
    HypothesisError,
    InequalityKind,
    TestFamily,
    default_family,
    default_kind,
    estimate_constant,
    verify_theorem,
    with_params,
)
from .norms import luxemburg_norm
from .pde_demo import check_neumann_hypotheses, problem_from_spec, solve_neumann
from .weights import CubeFamily, SteinWeissParams, check_admissible, scan_condition

EXIT_OK, EXIT_INVALID, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3

_CONDITION_EXIT = {"bounded": EXIT_OK, "divergent": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}


class InputError(ValueError):
    """Malformed or incomplete configuration."""


# ------------------------------------------------------------ serialization


def _clean(obj):
    """Recursively convert to JSON-safe builtins; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _flatten(obj, prefix: str = "") -> list[tuple[str, object]]:
    if isinstance(obj, dict):
        out = []
        for k in sorted(obj):
            out += _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
        return out
    if isinstance(obj, list):
        out = []
        for i, v in enumerate(obj):
            out += _flatten(v, f"{prefix}[{i}]")
        return out or [(prefix, "")]
    return [(prefix, obj)]


def render(report: dict, fmt: str) -> str:
    data = _clean(report)
    if fmt == "json":
        return json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n"
    rows = ["key,value"]
    for key, value in _flatten(data):
        text = json.dumps(value, allow_nan=False) if not isinstance(value, str) else value
        if any(c in text for c in ',"\n'):
            text = '"' + text.replace('"', '""') + '"'
        rows.append(f"{key},{text}")
    return "\n".join(rows) + "\n"


def _emit(report: dict, args) -> None:
    text = render(report, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------------ config


def _load_config(path: str | None) -> tuple[dict, Path]:
    if path is None:
        raise InputError("--config is required")
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    return cfg, Path(path).resolve().parent


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise InputError(f"missing field(s): {', '.join(missing)}")


def _parse_resolution(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    try:
        counts = tuple(int(t) for t in text.split(","))
    except ValueError as exc:
        raise InputError(f"bad --resolution {text!r}") from exc
    if not 1 <= len(counts) <= 3 or min(counts) < 2:
        raise InputError("--resolution takes 1 to 3 comma-separated counts, each >= 2")
    return counts


def _cubic_resolution(counts: tuple[int, ...] | None) -> int | None:
    if counts is None:
        return None
    if len(set(counts)) != 1:
        raise InputError("inequality grids are cubic: all --resolution counts must agree")
    return counts[0]


def _exponent(spec, base: Path) -> ExponentField:
    if isinstance(spec, (int, float)):
        return ExponentField.constant(float(spec))
    if not isinstance(spec, dict):
        raise InputError(f"bad exponent spec {spec!r}")
    return ExponentField.from_spec(spec, base_dir=base)


def _box(spec) -> Box:
    return Box(tuple(spec["lower"]), tuple(spec["upper"]))


def _kind_from_config(cfg: dict, base: Path) -> InequalityKind:
    _require(cfg, "kind")
    tag = cfg["kind"]
    if tag not in KINDS:
        raise InputError(f"unknown kind {tag!r}; choose from {', '.join(KINDS)}")
    kind = default_kind(tag)
    changes = {}
    for key in ("n", "a", "b", "s", "theta"):
        if key in cfg:
            changes[key] = type(getattr(kind, key))(cfg[key])
    for key in ("p", "q"):
        if key in cfg:
            changes[key] = _exponent(cfg[key], base)
    if "omega" in cfg:
        changes["omega"] = _box(cfg["omega"])
    return with_params(kind, **changes) if changes else kind


def _family_from_config(cfg: dict, kind: InequalityKind) -> TestFamily:
    if "family" not in cfg:
        return default_family(kind)
    spec = dict(cfg["family"])
    for key in ("shape_range",):
        if key in spec:
            spec[key] = tuple(spec[key])
    return TestFamily(**spec)


# ---------------------------------------------------------------- commands


def cmd_check_condition(args) -> int:
    cfg, base = _load_config(args.config)
    _require(cfg, "n", "alpha", "a", "b", "p", "q")
    if args.resolution is not None:
        raise InputError("check-condition scans cubes and takes no --resolution")
    n = int(cfg["n"])
    p, q = _exponent(cfg["p"], base), _exponent(cfg["q"], base)
    alpha, a, b = float(cfg["alpha"]), float(cfg["a"]), float(cfg["b"])
    if "mp_r" in cfg or "mp_s" in cfg:
        params = SteinWeissParams(alpha, a, b, p, q, float(cfg.get("mp_r", 2.0)),
                                  float(cfg.get("mp_s", 2.0)))
    else:
        params = SteinWeissParams.with_chosen_mp(alpha, a, b, p, q, n)
    fam = cfg.get("family", {})
    family = CubeFamily(n, int(fam.get("k_min", -10)), int(fam.get("k_max", 10)),
                        tuple(float(d) for d in fam.get("distances", (0, 1, 4, 32, 1024))))
    report = scan_condition(family, params, n)
    admissible = check_admissible(params, n, seed=args.seed)
    _emit({"command": "check-condition", "seed": args.seed, "params": params.to_dict(),
           "family": family.to_dict(), "condition": report.to_dict(),
           "admissibility": admissible.to_dict()}, args)
    return _CONDITION_EXIT[report.verdict]


def cmd_verify(args) -> int:
    cfg, base = _load_config(args.config)
    kind = _kind_from_config(cfg, base)
    # "validate": false runs the harness on parameters outside the theorem,
    # which is how a scaling defect is demonstrated
    bad = kind.violations(seed=args.seed) if cfg.get("validate", True) else []
    if bad:
        sys.stderr.write("hypothesis violations:\n" + "".join(f"  {b}\n" for b in bad))
        return EXIT_INVALID
    family = _family_from_config(cfg, kind)
    coarse = _cubic_resolution(args.resolution)
    if coarse is not None:
        resolutions = (coarse, 2 * coarse, 4 * coarse)
    else:
        resolutions = tuple(cfg["resolutions"]) if "resolutions" in cfg else None
    result = verify_theorem(kind, family, resolutions, int(cfg.get("refine_steps", 2)),
                            validate=False)
    _emit({"command": "verify", "seed": args.seed, **result.to_dict()}, args)
    return EXIT_OK if result.verdict == "consistent" else EXIT_FAIL


def cmd_estimate_constant(args) -> int:
    cfg, base = _load_config(args.config)
    kind = _kind_from_config(cfg, base)
    bad = kind.violations(seed=args.seed)
    if bad:
        sys.stderr.write("hypothesis violations:\n" + "".join(f"  {b}\n" for b in bad))
        return EXIT_INVALID
    family = _family_from_config(cfg, kind)
    N = _cubic_resolution(args.resolution) or int(cfg.get("resolution", 32))
    report = estimate_constant(kind, family, int(cfg.get("refine_steps", 2)), N)
    _emit({"command": "estimate-constant", "seed": args.seed, **report.to_dict()}, args)
    return EXIT_OK


def cmd_solve_pde(args) -> int:
    cfg, base = _load_config(args.config)
    _require(cfg, "omega", "exponent")
    try:
        _require(cfg["omega"], "box")
        _require(cfg["omega"]["box"], "lower", "upper")
    except TypeError as exc:
        raise InputError("omega must be an object with a box") from exc
    prob, options = problem_from_spec(cfg, args.resolution, base)
    hyp = check_neumann_hypotheses(prob, prob.v.gamma, options["b"], seed=args.seed)
    if not hyp.ok:
        sys.stderr.write("hypothesis violations:\n"
                         + "".join(f"  {v['check']}: {v['detail']}\n" for v in hyp.violations))
        return EXIT_INVALID
    result = solve_neumann(prob, tol=options["tol"], max_iters=options["max_iters"])
    solution_path, reported = cfg.get("solution"), cfg.get("solution")
    if solution_path is None and args.out:
        # default dump sits next to the report; record only its name so the
        # report does not depend on where it was written
        solution_path = str(Path(args.out).with_suffix("")) + ".solution.csv"
        reported = Path(solution_path).name
    if solution_path is not None:
        save_grid_function(result.solution, solution_path)
    _emit({"command": "solve-pde", "seed": args.seed, "problem": prob.to_dict(),
           "options": options, "hypotheses": hyp.to_dict(), "result": result.to_dict(),
           "solution_file": reported}, args)
    return EXIT_OK if result.converged else EXIT_FAIL


def cmd_norm(args) -> int:
    cfg, base = _load_config(args.config)
    _require(cfg, "function", "exponent")
    path = Path(cfg["function"])
    if not path.is_absolute():
        path = base / path
    try:
        f = load_grid_function(path)
    except OSError as exc:
        raise InputError(f"cannot read grid function: {exc}") from exc
    if args.resolution is not None and tuple(args.resolution) != f.grid.shape:
        raise InputError(f"--resolution {args.resolution} does not match the stored grid "
                         f"{f.grid.shape}")
    p = _exponent(cfg["exponent"], base)
    omega = _box(cfg["omega"]) if "omega" in cfg else None
    res = luxemburg_norm(f, p, omega)
    _emit({"command": "norm", "seed": args.seed, "norm": res.to_dict(),
           "grid": f.grid.to_dict(), "exponent": p.to_dict()}, args)
    return EXIT_OK


COMMANDS = {
    "check-condition": cmd_check_condition,
    "verify": cmd_verify,
    "estimate-constant": cmd_estimate_constant,
    "solve-pde": cmd_solve_pde,
    "norm": cmd_norm,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varlex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON input spec")
        sp.add_argument("--out", help="report path (default: stdout)")
        sp.add_argument("--resolution", help="grid points per axis, N[,N[,N]]")
        sp.add_argument("--seed", type=int, default=0, help="seed for sampled checks")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        thread_count()
        args.resolution = _parse_resolution(args.resolution)
        return COMMANDS[args.command](args)
    except (InputError, HypothesisError, KeyError, TypeError, ValueError) as exc:
        msg = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
        sys.stderr.write(f"varlex {args.command}: {msg}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
