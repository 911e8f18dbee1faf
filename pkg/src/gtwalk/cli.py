"""Command-line interface.

Subcommands: run (config file), walk, couple, verify (flag-built configs),
list-models, dump-paths. Flags mirror config keys and win over file values.
Exit codes: 0 all checks passed, 2 a verification failed, 1 error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import parse_suite
from .errors import GtwalkError
from .manifolds import list_model_kinds
from .runner import dump_paths, run_document


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, int(args.threads))
    env = os.environ.get("GTWALK_THREADS")
    return max(1, int(env)) if env else 1


def parse_manifold_spec(spec: str) -> dict:
    """'kind:dim[:opt...]' with opts flow, c0=..., k=... (e.g. sphere:2:flow)."""
    parts = spec.split(":")
    kind = parts[0]
    desc: dict = {"kind": kind}
    if len(parts) > 1:
        desc["dim"] = int(parts[1])
    for opt in parts[2:]:
        if opt == "flow":
            desc["flow"] = True
        elif opt.startswith("c0="):
            desc["radius_c0"] = float(opt[3:])
        elif opt.startswith("k="):
            desc["k"] = float(opt[2:])
        else:
            raise GtwalkError(f"unknown manifold option {opt!r}")
    return desc


def _common_flags(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="worker count (GTWALK_THREADS as fallback)")
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--samples", type=int, default=None,
                   help="number of Monte Carlo paths")
    p.add_argument("--manifold", type=str, default=None)


def _experiment_flags(p: argparse.ArgumentParser):
    _common_flags(p)
    p.add_argument("--t1", type=float, default=0.0)
    p.add_argument("--t2", type=float, default=1.0)
    p.add_argument("--d0", type=float, default=None)
    p.add_argument("--delta-couple", type=float, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--coupling", choices=["reflection", "parallel"],
                   default=None)
    p.add_argument("--dump", type=int, default=None,
                   help="number of path CSVs to write")


def _overrides_from(args, keys) -> dict:
    mapping = {"alpha": args.alpha, "n_paths": args.samples,
               "out": args.out}
    if getattr(args, "manifold", None):
        mapping["manifold"] = parse_manifold_spec(args.manifold)
    for name in ("t1", "t2", "d0", "k", "coupling"):
        if name in keys and getattr(args, name, None) is not None:
            mapping[name] = getattr(args, name)
    if "delta_couple" in keys and getattr(args, "delta_couple", None) is not None:
        mapping["delta_couple"] = args.delta_couple
    if "n_dump" in keys and getattr(args, "dump", None) is not None:
        mapping["n_dump"] = args.dump
    return {k: v for k, v in mapping.items() if v is not None}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="gtwalk",
        description="Geodesic random walks and couplings on time-dependent "
                    "metrics: simulation and bound verification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a JSON experiment config")
    p_run.add_argument("config", type=str)
    _common_flags(p_run)

    p_walk = sub.add_parser("walk", help="single-walk experiment from flags")
    _experiment_flags(p_walk)

    p_couple = sub.add_parser("couple", help="coupled-walk experiment from flags")
    _experiment_flags(p_couple)

    p_verify = sub.add_parser("verify", help="bound verification from flags")
    p_verify.add_argument("check", choices=["coupling-bound", "contraction",
                                            "gradient"])
    _experiment_flags(p_verify)

    sub.add_parser("list-models", help="list manifold kinds")

    p_dump = sub.add_parser("dump-paths", help="write per-path CSV dumps")
    p_dump.add_argument("config", type=str)
    p_dump.add_argument("--count", type=int, default=4)
    _common_flags(p_dump)

    args = parser.parse_args(argv)

    try:
        if args.command == "list-models":
            for kind in list_model_kinds():
                print(kind)
            return 0

        if args.command == "run":
            document = Path(args.config).read_text()
            overrides = _overrides_from(args, {"alpha", "n_paths"})
            overrides.pop("out", None)
            manifest, reports = run_document(
                document, workers=_threads(args), out_dir=args.out,
                seed_override=args.seed, overrides=overrides or None)
            return _report_outcome(reports)

        if args.command == "dump-paths":
            document = Path(args.config).read_text()
            configs = parse_suite(document)
            out = Path(args.out or "paths")
            for cfg in configs:
                if args.seed is not None:
                    cfg = parse_suite({**cfg.data, "seed": args.seed})[0]
                model = cfg.build_model()
                files = dump_paths(cfg, model, args.count, out)
                for f in files:
                    print(f)
            return 0

        # flag-built experiments
        document = _document_from_flags(args)
        manifest, reports = run_document(document, workers=_threads(args),
                                         out_dir=args.out,
                                         seed_override=None)
        return _report_outcome(reports)
    except (GtwalkError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def _document_from_flags(args) -> dict:
    if not args.manifold:
        raise GtwalkError("--manifold is required for flag-built experiments")
    doc: dict = {
        "manifold": parse_manifold_spec(args.manifold),
        "t1": args.t1, "t2": args.t2,
        "alpha": args.alpha if args.alpha is not None else 0.05,
        "seed": args.seed if args.seed is not None else 0,
    }
    if args.samples is not None:
        doc["n_paths"] = args.samples
    if args.dump is not None:
        doc["n_dump"] = args.dump
    if args.command == "walk":
        doc["kind"] = "walk"
        return doc
    if args.d0 is not None:
        doc["d0"] = args.d0
    else:
        doc["d0"] = 1.0
    if args.delta_couple is not None:
        doc["delta_couple"] = args.delta_couple
    if args.k is not None:
        doc["k"] = args.k
    if args.command == "couple":
        doc["kind"] = "couple"
        if args.coupling:
            doc["coupling"] = args.coupling
        return doc
    doc["kind"] = {"coupling-bound": "verify-coupling-bound",
                   "contraction": "verify-contraction",
                   "gradient": "verify-gradient"}[args.check]
    if doc["kind"] == "verify-gradient":
        dim = doc["manifold"].get("dim", 2)
        normal = [0.0] * dim
        normal[0] = 1.0
        doc["f"] = {"type": "halfspace", "normal": normal, "offset": -0.5}
    return doc


def _report_outcome(reports) -> int:
    all_pass = True
    for report in reports:
        est = report.estimate
        status = "PASS" if report.passed else "FAIL"
        print(f"[{status}] {report.experiment_id}: estimate={est.mean:.6g} "
              f"stderr={est.stderr:.3g} bound={report.bound:.6g}")
        all_pass &= report.passed
    return 0 if all_pass else 2


if __name__ == "__main__":
    sys.exit(main())
