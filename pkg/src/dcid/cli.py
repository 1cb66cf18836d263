"""Command-line entry point: ``python3 -m dcid <command>``.

Exit codes: 0 success, 1 invalid input or configuration, 2 failure while
running.
"""
import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from dcid.errors import ConfigError
from dcid.harness import SweepSpec, StudyConfig, emit_plotdata, run_benchmark, run_sweep
from dcid.icm import score_icm
from dcid.mtl import mtl_shared_estimate, train_mtl
from dcid.pipeline import SharedEstimate, fit_dcid, predict_shared, surrogate_psi1
from dcid.scenario import export_csv, generate, load_dataset, save_dataset

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def load_config(path):
    """Study configuration from a JSON file (missing path gives defaults)."""
    if path is None:
        return StudyConfig(), {}
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    return StudyConfig.from_dict(raw), raw.get("sweep", {})


def _study(args):
    study, sweep = load_config(args.config)
    if args.seed is not None:
        study = replace(study, scenario=replace(study.scenario, seed=args.seed))
    if getattr(args, "threshold", None) is not None:
        study = replace(study, dcid=replace(study.dcid, threshold=args.threshold))
    return study, sweep


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def cmd_generate(args):
    study, _ = _study(args)
    ds = generate(study.scenario)
    out = Path(args.out_dir)
    save_dataset(ds, out)
    if args.csv:
        export_csv(ds, out / "dataset.csv")
    print(f"wrote dataset ({ds.n_rows} rows, splits {ds.split_counts()}) to {out}")


def _dataset(args, study):
    return load_dataset(args.data) if args.data else generate(study.scenario)


def cmd_fit(args):
    study, _ = _study(args)
    ds = _dataset(args, study)
    out = Path(args.out_dir)
    test_x = ds.part("test")["x"]
    dcfg = replace(study.dcid, seed=args.seed or 0)
    if args.method == "dcid":
        est = fit_dcid(ds, replace(dcfg, representation=args.representation or dcfg.representation))
        (out / "estimate.json").parent.mkdir(parents=True, exist_ok=True)
        (out / "estimate.json").write_text(est.to_json())
        z_hat = predict_shared(est, test_x) if est.n_selected else np.zeros((test_x.shape[0], 0))
        extra = {"n_selected": est.n_selected, "correlations": est.cca.correlations.tolist()}
    else:
        model = train_mtl(ds, dcfg.net, dcfg.train)
        z_hat = mtl_shared_estimate(model, test_x, study.t_mtl)
        (out / "mtl_model.json").parent.mkdir(parents=True, exist_ok=True)
        (out / "mtl_model.json").write_text(json.dumps(model.to_dict()))
        extra = {"n_selected": int(z_hat.shape[1])}
    np.save(out / "z_hat_test.npy", z_hat)
    score = score_icm(z_hat, ds)
    _write_json(out / "score.json", {"method": args.method, **score.as_dict(), **extra})
    print(json.dumps({"method": args.method, **score.as_dict()}))


def cmd_icm(args):
    ds = load_dataset(args.data)
    z_hat = np.load(args.z_hat)
    score = score_icm(z_hat, ds)
    print(json.dumps(score.as_dict()))
    if args.out_dir:
        _write_json(Path(args.out_dir) / "score.json", score.as_dict())


def _workers(args):
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    return args.workers


def cmd_benchmark(args):
    study, _ = _study(args)
    workers = _workers(args)
    records = run_benchmark(study, master_seed=args.seed or 0, workers=workers)
    meta = {"command": "benchmark", "master_seed": args.seed or 0, "config": study.to_dict()}
    runs, summary = emit_plotdata(records, args.out_dir, "benchmark", meta)
    print(f"wrote {runs} and {summary}")
    return records


def cmd_sweep(args):
    study, sweep = _study(args)
    workers = _workers(args)
    sweep = dict(sweep)
    if args.variable:
        sweep["variable"] = args.variable
    if args.grid:
        sweep["grid"] = [float(v) for v in args.grid.split(",")]
    if args.scenarios:
        sweep["n_scenarios"] = args.scenarios
    spec = SweepSpec(**sweep)
    records = run_sweep(spec, study, master_seed=args.seed or 0, workers=workers)
    name = f"sweep_{spec.variable}"
    meta = {"command": "sweep", "master_seed": args.seed or 0, "config": study.to_dict(), "sweep": spec.to_dict()}
    runs, summary = emit_plotdata(records, args.out_dir, name, meta)
    print(f"wrote {runs} and {summary}")


def cmd_surrogate(args):
    study, _ = _study(args)
    ds = _dataset(args, study)
    if args.estimate:
        est = SharedEstimate.from_json(Path(args.estimate).read_text())
    else:
        est = fit_dcid(ds, replace(study.dcid, seed=args.seed or 0))
    res = surrogate_psi1(est, ds)
    te = ds.part("test")
    corr_psi = float(np.corrcoef(res.psi1_hat, te["y2"])[0, 1])
    corr_y = float(np.corrcoef(te["y1"], te["y2"])[0, 1])
    report = {
        "n_selected": est.n_selected,
        "r2_y1": res.r2_y1,
        "r2_y2": res.r2_y2,
        "r2_ratio": res.r2_y1 / res.r2_y2 if res.r2_y2 > 0 else None,
        "corr_psi1_y2": corr_psi,
        "corr_y1_y2": corr_y,
    }
    print(json.dumps(report))
    if args.out_dir:
        _write_json(Path(args.out_dir) / "surrogate.json", report)
        np.save(Path(args.out_dir) / "psi1_hat_test.npy", res.psi1_hat)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON study configuration")
    common.add_argument("--seed", type=int, help="scenario seed (generate/fit/surrogate) or master seed (benchmark/sweep)")
    common.add_argument("--out-dir", default="results", help="output directory")
    common.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    common.add_argument("--threshold", type=float, help="canonical correlation threshold")

    p = argparse.ArgumentParser(prog="dcid", description="Shared latent recovery experiments")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a synthetic dataset")
    g.add_argument("--csv", action="store_true", help="also export dataset.csv")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", parents=[common], help="fit one method on one dataset and score it")
    f.add_argument("--method", choices=("dcid", "mtl"), default="dcid")
    f.add_argument("--representation", choices=("mlp", "linear"))
    f.add_argument("--data", help="dataset directory (default: generate from config)")
    f.set_defaults(func=cmd_fit)

    i = sub.add_parser("icm", parents=[common], help="score a saved estimate against a dataset")
    i.add_argument("--data", required=True, help="dataset directory")
    i.add_argument("--z-hat", required=True, help=".npy file with the estimate on test rows (or all rows)")
    i.set_defaults(func=cmd_icm, out_dir=None)

    b = sub.add_parser("benchmark", parents=[common], help="all methods over scenarios x seeds")
    b.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("sweep", parents=[common], help="sweep tau or kappa")
    s.add_argument("--variable", choices=("tau", "kappa"))
    s.add_argument("--grid", help="comma-separated grid values")
    s.add_argument("--scenarios", type=int, help="scenarios per grid value")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("surrogate", parents=[common], help="surrogate of y1's shared part")
    r.add_argument("--data", help="dataset directory (default: generate from config)")
    r.add_argument("--estimate", help="saved estimate.json from `fit`")
    r.set_defaults(func=cmd_surrogate)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
