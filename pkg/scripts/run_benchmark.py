"""Benchmark every method over random scenarios and write the run/summary CSVs."""
import argparse

from dcid.harness import StudyConfig, emit_plotdata, run_benchmark
from dcid.scenario import ScenarioConfig


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scenarios", type=int, default=10)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default="results")
    args = p.parse_args()

    study = StudyConfig(scenario=ScenarioConfig(tau=args.tau, kappa=args.kappa), n_scenarios=args.scenarios, seeds=args.seeds)
    records = run_benchmark(study, master_seed=args.master_seed, workers=args.workers)
    meta = {"command": "run_benchmark", "master_seed": args.master_seed, "config": study.to_dict()}
    _, summary = emit_plotdata(records, args.out_dir, "benchmark", meta)
    print(summary.read_text())


if __name__ == "__main__":
    main()
