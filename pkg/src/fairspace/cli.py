"""``fairspace`` command line.

Exit codes: 0 success, 1 an experiment assertion failed, 2 bad usage or input.
Input errors are written to stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import worldgen
from .distortion import map_distortion
from .errors import FairspaceError
from .group_geometry import group_skew
from .io import dump_json, map_to_dict, parse_map_file, parse_space_file, space_to_dict
from .mechanisms import build_gfm, build_ifm, verify_gfm, verify_ifm
from .spaces import SpaceMap, induce_group_space, pushforward
from .transport import gromov_wasserstein
from .worldviews import (
    check_direct_discrimination, check_fairness, check_non_discrimination, check_structural_bias,
    check_wae, check_wysiwyg,
)

EXPERIMENTS = {
    "theorem1": worldgen.run_theorem1_experiment,
    "theorem2": worldgen.run_theorem2_experiment,
    "gfm_theorem": worldgen.run_gfm_theorem_experiment,
    "conflict": worldgen.run_conflict_experiment,
}


class UsageError(FairspaceError):
    def __init__(self, message: str):
        super().__init__("USAGE_ERROR", message)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise UsageError("missing required tolerance(s): " + ", ".join(f"--{n}" for n in missing)
                         + " (no defaults; declare them explicitly)")


def _skew_kwargs(args) -> dict:
    return {"delta": args.delta, "mode": args.smoothing, "seed": args.seed}


def _same_ids(a, b) -> bool:
    return tuple(a.ids) == tuple(b.ids)


def cmd_analyze(args) -> tuple[dict, int]:
    _require(args, "eps", "threshold")
    if args.worldview is not None:
        _require(args, "eps-prime")
    if not 2 <= len(args.spaces) <= 3:
        raise UsageError("analyze takes two or three space files")
    spaces = [parse_space_file(p) for p in args.spaces]
    names = ["CS", "OS", "DS"][: len(spaces)]
    spaces = [s.renamed(n) for s, n in zip(spaces, names)]

    maps = {}
    if not _same_ids(spaces[0], spaces[1]) or sorted(spaces[0].group_names) != sorted(spaces[1].group_names):
        raise FairspaceError("ID_MISMATCH", "CS and OS must describe the same individuals and groups")
    maps["g"] = SpaceMap.identity(spaces[0], spaces[1])
    levels = {"CS": spaces[0], "OS": spaces[1]}
    if len(spaces) == 3:
        DS = spaces[2]
        if args.decision_map:
            f = parse_map_file(args.decision_map, spaces[1], DS)
        elif _same_ids(spaces[1], DS):
            f = SpaceMap.identity(spaces[1], DS)
        else:
            raise FairspaceError("ID_MISMATCH", "DS shares no ids with OS; pass --decision-map")
        maps["f"] = f
        levels["DS"] = pushforward(f, spaces[1], DS, name="DS")
    elif args.decision_map:
        raise UsageError("--decision-map needs a third (decision) space file")

    report = {"command": "analyze", "inputs": [str(p) for p in args.spaces], "spaces": {}, "pairs": [],
              "checks": []}
    for name, space in levels.items():
        entry = {"n": space.n, "k": space.k, "diameter": space.diameter, "groups": list(space.group_names)}
        if space.k >= 2:
            entry["group_wasserstein"] = induce_group_space(space).dist.tolist()
        report["spaces"][name] = entry

    order = list(levels)
    for a, b in zip(order, order[1:]):
        X, Y = levels[a], levels[b]
        pair = {"from": a, "to": b}
        if a == "CS":
            pair["distortion"] = map_distortion(maps["g"], spaces[0], spaces[1]).to_dict()
        else:
            pair["distortion"] = map_distortion(maps["f"], spaces[1], spaces[2]).to_dict()
        try:
            pair["gromov_wasserstein"] = gromov_wasserstein(X, Y).value
        except FairspaceError as exc:
            pair["gromov_wasserstein"] = exc.to_dict()
        if X.k >= 2:
            pair["skew"] = group_skew(X, Y, **_skew_kwargs(args)).to_dict()
        report["pairs"].append(pair)

    CS, OS = levels["CS"], levels["OS"]
    report["checks"].append(check_wysiwyg(spaces[0], spaces[1], args.eps, maps["g"]).to_report())
    if CS.k >= 2:
        report["checks"].append(check_wae(CS, args.eps).to_report())
        report["checks"].append(check_structural_bias(CS, OS, args.threshold, **_skew_kwargs(args)).to_report())
    if "DS" in levels and CS.k >= 2:
        DSi = levels["DS"]
        report["checks"].append(check_direct_discrimination(OS, DSi, args.threshold, **_skew_kwargs(args)).to_report())
        report["checks"].append(check_non_discrimination(CS, DSi, args.threshold, **_skew_kwargs(args)).to_report())
    if "DS" in levels:
        if args.worldview is None:
            report["fairness"] = "skipped: declare --worldview to check fairness against the construct space"
        else:
            composed = maps["g"].then(maps["f"])
            report["worldview"] = args.worldview
            report["checks"].append(check_fairness(composed, spaces[0], spaces[2], args.eps, args.eps_prime).to_report())
    return report, 0


def cmd_skew(args) -> tuple[dict, int]:
    X, Y = parse_space_file(args.x), parse_space_file(args.y)
    if not _same_ids(X, Y):
        raise FairspaceError("ID_MISMATCH", "both spaces must describe the same individuals")
    return {"command": "skew", "skew": group_skew(X, Y, **_skew_kwargs(args)).to_dict()}, 0


def cmd_axioms(args) -> tuple[dict, int]:
    _require(args, "eps")
    CS = parse_space_file(args.cs)
    checks = []
    if CS.k >= 2:
        checks.append(check_wae(CS, args.eps).to_report())
    if args.os:
        OS = parse_space_file(args.os)
        g = None
        if args.map:
            g = parse_map_file(args.map, CS, OS)
        elif _same_ids(CS, OS):
            g = SpaceMap.identity(CS, OS)
        checks.append(check_wysiwyg(CS, OS, args.eps, g).to_report())
    return {"command": "axioms", "checks": checks}, 0


def cmd_mechanism(args) -> tuple[dict, int]:
    _require(args, "eps")
    OS = parse_space_file(args.os).renamed("OS")
    if args.kind == "ifm":
        f, DS = build_ifm(OS)
        verdict = verify_ifm(f, OS, DS, args.eps)
    else:
        f, DS = build_gfm(OS)
        verdict = verify_gfm(f, OS, DS, args.eps)
    return {"command": "mechanism", "kind": args.kind, "map": map_to_dict(f),
            "decision_space": space_to_dict(DS), "verdict": verdict.to_report()}, 0


def _experiment_kwargs(fn, config: dict, args) -> dict:
    params = inspect.signature(fn).parameters
    unknown = set(config) - set(params)
    if unknown:
        raise FairspaceError("BAD_GRID", f"unknown parameters {sorted(unknown)}")
    kwargs = dict(config)
    if "world" in kwargs:
        world = kwargs["world"]
        if not isinstance(world, dict):
            raise FairspaceError("BAD_GRID", "'world' must be an object")
        fields = set(worldgen.WorldSpec.__dataclass_fields__)
        if set(world) - fields:
            raise FairspaceError("BAD_GRID", f"unknown world fields {sorted(set(world) - fields)}")
        world = {k: tuple(v) if isinstance(v, list) else v for k, v in world.items()}
        kwargs["world"] = worldgen.WorldSpec(**world).validate()
    if args.seed is not None:
        kwargs["seed"] = args.seed
    if args.trials is not None:
        if "trials" not in params:
            raise FairspaceError("BAD_GRID", f"{args.experiment} has no trials parameter")
        if args.trials < 1:
            raise FairspaceError("BAD_GRID", "--trials must be positive")
        kwargs["trials"] = args.trials
    for key in ("eps", "delta"):
        value = getattr(args, key, None)
        if value is not None and key in params:
            kwargs[key] = value
    if args.eps_prime is not None and "eps_prime" in params:
        kwargs["eps_prime"] = args.eps_prime
    return kwargs


def cmd_simulate(args) -> tuple[dict, int]:
    fn = EXPERIMENTS.get(args.experiment)
    if fn is None:
        raise FairspaceError("BAD_EXPERIMENT", f"unknown experiment {args.experiment!r}; "
                             f"choose from {sorted(EXPERIMENTS)}")
    config = {}
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise FairspaceError("IO_ERROR", str(exc))
        except json.JSONDecodeError as exc:
            raise FairspaceError("SCHEMA_ERROR", f"invalid JSON: {exc}")
        if not isinstance(config, dict):
            raise FairspaceError("SCHEMA_ERROR", "config must be a JSON object")
    try:
        report = fn(**_experiment_kwargs(fn, config, args))
    except TypeError as exc:
        raise FairspaceError("BAD_GRID", str(exc))
    return report, 0 if report["passed"] else 1


def trials_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=worldgen.CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in report.get("trials", []):
        writer.writerow({k: "" if row.get(k) is None else row[k] for k in worldgen.CSV_COLUMNS})
    return buf.getvalue()


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float, help="construct/observed tolerance (no default)")
    p.add_argument("--eps-prime", dest="eps_prime", type=float, help="decision tolerance (no default)")
    p.add_argument("--threshold", type=float, help="skew threshold t (no default)")
    p.add_argument("--delta", type=float, help="smoothing radius (default 1e-3 of the larger diameter)")
    p.add_argument("--smoothing", choices=("additive", "perturb"), default="additive")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairspace", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="metrics and checks between two or three spaces")
    p.add_argument("spaces", nargs="+")
    p.add_argument("--decision-map", dest="decision_map", help="map file OS -> DS")
    p.add_argument("--worldview", choices=("wysiwyg", "wae"))
    _add_common(p)

    p = sub.add_parser("skew", help="group skew between two spaces")
    p.add_argument("x")
    p.add_argument("y")
    _add_common(p)

    p = sub.add_parser("axioms", help="WAE on CS and WYSIWYG between CS and OS")
    p.add_argument("cs")
    p.add_argument("os", nargs="?")
    p.add_argument("--map", help="map file CS -> OS")
    _add_common(p)

    p = sub.add_parser("mechanism", help="build and verify an IFM or GFM")
    p.add_argument("os")
    p.add_argument("--kind", choices=("ifm", "gfm"), required=True)
    _add_common(p)

    p = sub.add_parser("simulate", help="run a theorem experiment")
    p.add_argument("experiment")
    p.add_argument("--trials", type=int)
    p.add_argument("--config", help="JSON file of experiment parameters")
    _add_common(p)
    return parser


COMMANDS = {"analyze": cmd_analyze, "skew": cmd_skew, "axioms": cmd_axioms,
            "mechanism": cmd_mechanism, "simulate": cmd_simulate}


def _emit(report: dict, args) -> None:
    text = trials_csv(report) if args.format == "csv" else dump_json(report)
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.write_text(dump_json(report) if args.format == "json" else text, encoding="utf-8")
    if args.command == "simulate" and args.format == "json":
        out.with_suffix(".csv").write_text(trials_csv(report), encoding="utf-8")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with np.errstate(all="raise"):
            report, code = COMMANDS[args.command](args)
        _emit(report, args)
    except FairspaceError as exc:
        sys.stderr.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")
        return 2
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "IO_ERROR", "message": str(exc)}, sort_keys=True) + "\n")
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
