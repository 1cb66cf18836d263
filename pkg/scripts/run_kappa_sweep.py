"""Sweep the between-target shared variance ratio kappa at tau = 1."""
import argparse

import numpy as np

from dcid.harness import StudyConfig, SweepSpec, emit_plotdata, run_sweep
from dcid.scenario import ScenarioConfig


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--points", type=int, default=10, help="evenly spaced grid points from 0.1 to 1")
    p.add_argument("--scenarios", type=int, default=3)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--methods", default="dcid,mtl,oracle-z,raw-features")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default="results")
    args = p.parse_args()

    grid = [round(float(v), 6) for v in np.linspace(0.1, 1.0, args.points)]
    spec = SweepSpec("kappa", grid=grid, n_scenarios=args.scenarios, seeds=args.seeds)
    study = StudyConfig(scenario=ScenarioConfig(tau=1.0), methods=tuple(args.methods.split(",")))
    records = run_sweep(spec, study, master_seed=args.master_seed, workers=args.workers)
    meta = {"command": "run_kappa_sweep", "master_seed": args.master_seed, "config": study.to_dict(), "sweep": spec.to_dict()}
    _, summary = emit_plotdata(records, args.out_dir, "sweep_kappa", meta)
    print(summary.read_text())


if __name__ == "__main__":
    main()
