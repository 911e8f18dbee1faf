"""Experiment dispatch: execute a parsed config, write reports and dumps."""

from __future__ import annotations

import csv
import json
import math
import time
from pathlib import Path

import numpy as np

from . import __version__, engine
from .comparison import (OUParams, RadialComparisonSpec, builtin_b,
                         feller_explosion_test, ou_survival_probability)
from .config import (ExperimentConfig, RunManifest, resolve_start,
                     resolve_start_points)
from .coupling import CouplingConfig, CouplingKind, run_coupled
from .errors import ConfigError
from .manifolds import ManifoldModel
from .stats import (McEstimate, VerificationReport, check_contraction,
                    check_gradient_estimate, circle_angles,
                    convergence_diagnostic, estimate_coupling_survival,
                    gaussian_cdf, map_path_chunks, wrapped_gaussian_cdf)
from .walk import Schedule, WalkConfig, run_walk


def _coupling_config(config: ExperimentConfig, model: ManifoldModel,
                     kind: CouplingKind) -> CouplingConfig:
    x1, x2 = resolve_start_points(config, model)
    return CouplingConfig(
        alpha=config["alpha"], t1=config["t1"], t2=config["t2"],
        seed=config["seed"], start1=x1, start2=x2, kind=kind,
        delta_couple=config["delta_couple"], k=config["k"],
        use_drift=config["use_drift"])


def _halfspace(f_spec: dict):
    normal = np.asarray(f_spec["normal"], dtype=float)
    offset = float(f_spec["offset"])

    def f(points: np.ndarray) -> np.ndarray:
        return (points @ normal <= offset).astype(float)

    return f


def _summary_report(experiment_id: str, estimate: McEstimate, seed: int,
                    params: dict) -> VerificationReport:
    return VerificationReport(experiment_id, estimate, math.inf, 0.0,
                              {"params": params, "seed": seed})


def execute(config: ExperimentConfig, workers: int = 1,
            out_dir: str | Path | None = None) -> VerificationReport:
    """Run one experiment and return its report (artifacts to out_dir)."""
    model = config.build_model()
    kind = config.kind
    seed = int(config["seed"])
    start_time = time.perf_counter()

    if kind == "walk":
        report = _run_walk_kind(config, model, workers)
    elif kind == "couple":
        report = _run_couple_kind(config, model, workers)
    elif kind == "verify-coupling-bound":
        cc = _coupling_config(config, model, CouplingKind.REFLECTION)
        report = estimate_coupling_survival(
            model, cc, int(config["n_paths"]), workers=workers,
            bias=float(config["bias"]), experiment_id=kind)
    elif kind == "verify-contraction":
        cc = _coupling_config(config, model, CouplingKind.PARALLEL_TRANSPORT)
        report = check_contraction(
            model, cc, int(config["n_paths"]),
            coefficient=float(config["contraction_coefficient"]),
            workers=workers, experiment_id=kind)
    elif kind == "verify-gradient":
        cc = _coupling_config(config, model, CouplingKind.REFLECTION)
        report = check_gradient_estimate(
            model, cc, _halfspace(config["f"]), float(config["osc"]),
            int(config["n_paths"]), workers=workers, experiment_id=kind)
    elif kind == "convergence":
        report = _run_convergence(config, model, workers)
    elif kind == "feller-test":
        report = _run_feller(config)
    elif kind == "ou-survival":
        report = _run_ou(config)
    elif kind == "radial-domination":
        report = _run_radial(config, model, workers)
    else:  # pragma: no cover - parse_config guards this
        raise ConfigError(f"kind: unhandled experiment kind {kind!r}")

    report.metadata["runtime_ms"] = int(
        (time.perf_counter() - start_time) * 1000)
    report.metadata.setdefault("params", {})["config_hash"] = \
        config.config_hash()
    if out_dir is not None:
        _write_artifacts(config, model, report, Path(out_dir))
    return report


def _run_walk_kind(config, model, workers):
    sched = Schedule(config["t1"], config["t2"], config["alpha"])
    start = resolve_start(config, model)
    origin = np.asarray(config["origin"], dtype=float) \
        if config.get("origin") is not None else model.origin()

    def fn(paths: range) -> dict:
        res = engine.walk_chunk(model, sched, start, config["seed"], paths,
                                use_drift=config["use_drift"], origin=origin,
                                exit_radius=config["exit_radius"])
        disp = model.distance(config["t2"], start, res["end"])
        return {"disp": disp, "exited": res["exit_step"] >= 0}

    chunks = map_path_chunks(int(config["n_paths"]), fn, workers)
    disp = np.concatenate([c["disp"] for c in chunks])
    exited = np.concatenate([c["exited"] for c in chunks])
    est = McEstimate.from_samples(disp)
    params = {"alpha": config["alpha"], "n_paths": int(config["n_paths"]),
              "exit_fraction": float(np.mean(exited)),
              "observable": "displacement-distance",
              "manifold": model.describe()}
    return _summary_report("walk", est, config["seed"], params)


def _run_couple_kind(config, model, workers):
    kind = CouplingKind.REFLECTION if config["coupling"] == "reflection" \
        else CouplingKind.PARALLEL_TRANSPORT
    cc = _coupling_config(config, model, kind)
    sched = cc.schedule()

    def fn(paths: range) -> dict:
        res = engine.coupled_chunk(
            model, sched, cc.start1, cc.start2, cc.seed, paths,
            kind=cc.kind.value, delta_couple=cc.delta_couple,
            stick=cc.stick_after_coupling, k=cc.k, use_drift=cc.use_drift)
        return {"coupled": ~res["survival"],
                "final_distance": res["final_distance"]}

    chunks = map_path_chunks(int(config["n_paths"]), fn, workers)
    coupled = np.concatenate([c["coupled"] for c in chunks])
    fd = np.concatenate([c["final_distance"] for c in chunks])
    est = McEstimate.from_bernoulli(int(np.count_nonzero(coupled)),
                                    len(coupled))
    params = {"alpha": config["alpha"], "delta_couple": cc.delta_couple,
              "coupling": config["coupling"],
              "mean_final_distance": float(np.mean(fd)),
              "n_paths": int(config["n_paths"]),
              "manifold": model.describe()}
    return _summary_report("couple", est, config["seed"], params)


def _run_convergence(config, model, workers):
    alphas = list(config["alphas"])
    t1, t2 = config["t1"], config["t2"]
    start = resolve_start(config, model)
    horizon = t2 - t1
    reference = config.get("reference")
    desc = model.describe()
    if reference is None:
        if desc["kind"] == "euclidean" and desc["dim"] == 1:
            reference = "gauss"
        elif desc["kind"] == "sphere" and desc["dim"] == 1:
            reference = "wrapped-gauss"
    if reference == "gauss":
        cdf = gaussian_cdf(float(start[0]), horizon)
        support = (float(start[0]) - 8 * math.sqrt(horizon),
                   float(start[0]) + 8 * math.sqrt(horizon))
        observable = lambda ends: ends[:, 0]
    elif reference == "wrapped-gauss":
        mu = float(np.arctan2(start[1], start[0]))
        cdf = wrapped_gaussian_cdf(mu, horizon)
        support = (-math.pi, math.pi)
        observable = circle_angles
    else:
        raise ConfigError("reference: required for this manifold "
                          "(gauss or wrapped-gauss)")

    rows = convergence_diagnostic(
        lambda a: model, t1, t2, start, alphas, int(config["n_paths"]),
        config["seed"], observable, cdf, support, workers)
    w1 = [row["w1"] for row in rows]
    trend_ok = all(w1[i + 1] <= w1[i] * 1.25 + 1e-12
                   for i in range(len(w1) - 1)) and w1[-1] <= w1[0] + 1e-12
    ks_ok = bool(rows[-1].get("ks_pass", True))
    est = McEstimate(n=int(config["n_paths"]), mean=w1[-1], stderr=0.0,
                     ci95=(w1[-1], w1[-1]), sum1=w1[-1], sum2=w1[-1] ** 2)
    bound = w1[0] if (trend_ok and ks_ok) else -math.inf
    report = VerificationReport("convergence", est, bound, 0.0, {
        "params": {"alphas": alphas, "reference": reference, "rows": rows,
                   "n_paths": int(config["n_paths"]),
                   "manifold": model.describe()},
        "seed": config["seed"]})
    return report


def _run_feller(config):
    spec = RadialComparisonSpec(builtin_b(config["b"]),
                                c0=float(config["c0"])
                                if "c0" in config.data else 1.0,
                                r0=0.5)
    result = feller_explosion_test(spec, float(config["C"]),
                                   float(config["y_max"]))
    expect = config.get("expect")
    ok = (result.verdict == expect) if expect \
        else (result.verdict != "inconclusive")
    est = McEstimate(n=1, mean=result.integral, stderr=0.0,
                     ci95=(result.integral, result.integral),
                     sum1=result.integral, sum2=result.integral ** 2)
    bound = math.inf if ok else -math.inf
    return VerificationReport("feller-test", est, bound, 0.0, {
        "params": {"b": config["b"], "C": config["C"],
                   "y_max": config["y_max"], "verdict": result.verdict,
                   "decay_exponent": result.decay_exponent,
                   "expect": expect},
        "seed": config["seed"]})


def _run_ou(config):
    horizon = config["t2"] - config["t1"]
    h = float(config["ou_h"])
    params = OUParams(a=float(config["a"]), k=float(config["k"]),
                      t1=config["t1"])
    res = ou_survival_probability(params, horizon, int(config["n_paths"]), h,
                                  seed=int(config["seed"]))
    deviation = abs(res.estimate - res.analytic)
    est = McEstimate(n=res.n_paths, mean=deviation, stderr=res.stderr,
                     ci95=(deviation - 1.96 * res.stderr,
                           deviation + 1.96 * res.stderr),
                     sum1=deviation * res.n_paths,
                     sum2=deviation ** 2 * res.n_paths)
    report = VerificationReport("ou-survival", est, 0.0,
                                2.0 * math.sqrt(h), {
        "params": {"a": params.a, "k": params.k, "h": h, "horizon": horizon,
                   "estimate": res.estimate, "analytic": res.analytic,
                   "n_paths": res.n_paths},
        "seed": config["seed"]})
    return report


def _run_radial(config, model, workers):
    sched = Schedule(config["t1"], config["t2"], config["alpha"])
    start = resolve_start(config, model)
    origin = np.asarray(config["origin"], dtype=float) \
        if config.get("origin") is not None else model.origin()
    spec = RadialComparisonSpec(builtin_b(config["b"]),
                                c0=float(config["c0"]),
                                r0=float(config["r0"]))
    rho0 = float(model.distance(config["t1"], origin, start)) + 3.0 * spec.r0
    radial = {"phi": spec.phi, "psi": spec.psi, "r0": spec.r0,
              "rho0": rho0, "margin": float(config["margin"])}

    def fn(paths: range) -> dict:
        res = engine.walk_chunk(model, sched, start, config["seed"], paths,
                                origin=origin,
                                exit_radius=float(config["exit_radius"]),
                                radial=radial)
        return {"violation": res["radial_violation"]}

    chunks = map_path_chunks(int(config["n_paths"]), fn, workers)
    violation = np.concatenate([c["violation"] for c in chunks])
    est = McEstimate.from_bernoulli(int(np.count_nonzero(violation)),
                                    len(violation))
    return VerificationReport("radial-domination", est, 0.05, 0.0, {
        "params": {"alpha": config["alpha"], "margin": config["margin"],
                   "c0": spec.c0, "r0": spec.r0, "rho0": rho0,
                   "b": config["b"], "n_paths": int(config["n_paths"]),
                   "manifold": model.describe()},
        "seed": config["seed"]})


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------

def _write_artifacts(config: ExperimentConfig, model: ManifoldModel,
                     report: VerificationReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    stem = report.experiment_id
    (out / f"{stem}.json").write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    with (out / f"{stem}.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "n", "mean", "stderr", "ci_lo", "ci_hi",
                         "bound", "pass", "bias", "seed", "runtime_ms"])
        est = report.estimate
        writer.writerow([report.experiment_id, est.n, repr(est.mean),
                         repr(est.stderr), repr(est.ci95[0]),
                         repr(est.ci95[1]), repr(report.bound),
                         report.passed, repr(report.bias),
                         report.metadata.get("seed"),
                         report.metadata.get("runtime_ms")])
    n_dump = int(config.get("n_dump", 0) or 0)
    if n_dump > 0:
        dump_paths(config, model, n_dump, out / "paths")


def dump_paths(config: ExperimentConfig, model: ManifoldModel, count: int,
               out: Path) -> list[Path]:
    """Write per-path CSV dumps for the config's walk or coupling setup."""
    out.mkdir(parents=True, exist_ok=True)
    written = []
    kind = config.kind
    coupled_kinds = ("couple", "verify-coupling-bound", "verify-contraction",
                     "verify-gradient")
    for idx in range(count):
        if kind in coupled_kinds:
            ck = CouplingKind.REFLECTION
            if config.get("coupling") == "parallel" \
                    or kind == "verify-contraction":
                ck = CouplingKind.PARALLEL_TRANSPORT
            cc = _coupling_config(config, model, ck)
            cc = CouplingConfig(**{**cc.__dict__, "path_index": idx})
            path = run_coupled(model, cc)
            fname = out / f"coupled_{idx:04d}.csv"
            with fname.open("w", newline="") as fh:
                writer = csv.writer(fh)
                d = model.ambient_dim
                writer.writerow(
                    ["n", "t"] + [f"x1_{j}" for j in range(d)]
                    + [f"x2_{j}" for j in range(d)]
                    + ["dist", "lambda_star", "coupled"])
                times = path.schedule.times
                for n in range(len(times)):
                    lam = path.lambda_star_record[n - 1] if n > 0 else 0.0
                    writer.writerow(
                        [n, repr(float(times[n]))]
                        + [repr(float(v)) for v in path.skeleton1[n]]
                        + [repr(float(v)) for v in path.skeleton2[n]]
                        + [repr(float(path.distance_process[n])),
                           repr(float(lam)), int(path.coupled_flags[n])])
        else:
            wc = WalkConfig(alpha=config["alpha"], t1=config["t1"],
                            t2=config["t2"], seed=config["seed"],
                            start=resolve_start(config, model),
                            use_drift=config.get("use_drift", False),
                            path_index=idx)
            path = run_walk(model, wc)
            fname = out / f"path_{idx:04d}.csv"
            with fname.open("w", newline="") as fh:
                writer = csv.writer(fh)
                d = model.ambient_dim
                writer.writerow(["n", "t"]
                                + [f"coord_{j}" for j in range(d)])
                for n, t in enumerate(path.schedule.times):
                    writer.writerow([n, repr(float(t))]
                                    + [repr(float(v)) for v in path.skeleton[n]])
        written.append(fname)
    return written


def run_document(document: str | dict, workers: int = 1,
                 out_dir: str | Path | None = None,
                 seed_override: int | None = None,
                 overrides: dict | None = None) -> tuple[RunManifest, list[VerificationReport]]:
    """Run a single-experiment or suite document; returns manifest+reports."""
    from .config import parse_suite

    t0 = time.perf_counter()
    configs = parse_suite(document)
    reports = []
    names = []
    for i, cfg in enumerate(configs):
        if overrides:
            merged = dict(cfg.data)
            merged.update(overrides)
            cfg = parse_suite(merged)[0]
        if seed_override is not None:
            merged = dict(cfg.data)
            merged["seed"] = int(seed_override)
            cfg = parse_suite(merged)[0]
        target = Path(out_dir) if out_dir is not None \
            else (Path(cfg.get("out")) if cfg.get("out") else None)
        report = execute(cfg, workers=workers, out_dir=target)
        reports.append(report)
        names.append(f"{report.experiment_id}.json" if target else "")
    manifest = RunManifest(__version__,
                           configs[0].config_hash() if len(configs) == 1
                           else "suite",
                           time.perf_counter() - t0,
                           [n for n in names if n])
    if out_dir is not None:
        p = Path(out_dir)
        p.mkdir(parents=True, exist_ok=True)
        (p / "manifest.json").write_text(
            json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n")
    return manifest, reports
