"""Benchmarks and ratio sweeps over generated scenarios, with CSV output.

Seeding: scenario ``j`` of a study with master seed ``m`` draws its data
from ``SeedSequence([m, j])``; the model seed of repetition ``s`` is
``SeedSequence([m, j, s])``. Both are reduced to a 64-bit integer with
``generate_state(1, uint64)``. Run results therefore depend only on
``(config, master seed)``, never on run order or worker count.
"""
import csv
import io
import json
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from dcid.errors import ConfigError
from dcid.icm import IcmScore, score_icm
from dcid.mtl import mtl_shared_estimate, train_mtl
from dcid.pipeline import DcidConfig, fit_dcid, predict_shared, train_representations
from dcid.scenario import ScenarioConfig, generate

METHODS = ("dcid", "mtl", "oracle-z", "raw-features")
# methods from related work that are not implemented; kept as empty summary rows
EXTERNAL_METHODS = ("mtfl", "adv-mtl")
CSV_SCHEMA_VERSION = 1
METRICS = ("informativeness", "compactness", "minimality", "icm")

RUN_COLUMNS = (
    "grid_variable",
    "grid_value",
    "scenario_id",
    "seed",
    "method",
    "scenario_seed",
    "run_seed",
    "informativeness",
    "compactness",
    "minimality",
    "icm",
    "n_selected",
    "error",
)
SUMMARY_COLUMNS = ("grid_variable", "grid_value", "method", "n_runs", "n_failed") + tuple(
    f"{m}_{stat}" for m in METRICS for stat in ("mean", "std")
)


def software_version():
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        from dcid import __version__

        return __version__


def derive_seed(*entropy):
    return int(np.random.SeedSequence([int(e) for e in entropy]).generate_state(1, dtype=np.uint64)[0])


@dataclass
class RunRecord:
    scenario: dict
    method: str
    scenario_id: int
    seed: int
    scenario_seed: int
    run_seed: int
    score: IcmScore = None
    n_selected: int = 0
    duration_s: float = 0.0
    version: str = ""
    grid_variable: str = ""
    grid_value: float = None
    error: str = ""

    @property
    def failed(self):
        return bool(self.error)

    def row(self):
        """Values for :data:`RUN_COLUMNS` (durations deliberately excluded)."""
        s = self.score
        return {
            "grid_variable": self.grid_variable,
            "grid_value": _fmt(self.grid_value),
            "scenario_id": str(self.scenario_id),
            "seed": str(self.seed),
            "method": self.method,
            "scenario_seed": str(self.scenario_seed),
            "run_seed": str(self.run_seed),
            "informativeness": _fmt(s.informativeness if s else None),
            "compactness": _fmt(s.compactness if s else None),
            "minimality": _fmt(s.minimality if s else None),
            "icm": _fmt(s.icm if s else None),
            "n_selected": "" if self.failed else str(self.n_selected),
            "error": self.error,
        }

    def to_dict(self):
        d = asdict(self)
        d["score"] = self.score.as_dict() if self.score else None
        return d


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


@dataclass(frozen=True)
class StudyConfig:
    """Everything a benchmark or sweep needs besides the master seed."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    dcid: DcidConfig = field(default_factory=DcidConfig)
    t_mtl: float = 0.5
    methods: tuple = ("dcid", "mtl", "oracle-z", "raw-features")
    n_scenarios: int = 10
    seeds: int = 3

    def __post_init__(self):
        methods = tuple(self.methods)
        object.__setattr__(self, "methods", methods)
        if not methods:
            raise ConfigError("at least one method is required")
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {METHODS}")
        if self.n_scenarios < 1 or self.seeds < 1:
            raise ConfigError("n_scenarios and seeds must be positive")
        if not 0 <= self.t_mtl <= 1:
            raise ConfigError("t_mtl must lie in [0, 1]")

    def to_dict(self):
        return {
            "scenario": self.scenario.to_dict(),
            "dcid": self.dcid.to_dict(),
            "t_mtl": self.t_mtl,
            "methods": list(self.methods),
            "n_scenarios": self.n_scenarios,
            "seeds": self.seeds,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        allowed = {"scenario", "dcid", "t_mtl", "methods", "n_scenarios", "seeds", "sweep"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d.pop("sweep", None)
        if "scenario" in d:
            d["scenario"] = ScenarioConfig.from_dict(d["scenario"])
        if "dcid" in d:
            d["dcid"] = DcidConfig.from_dict(d["dcid"])
        return cls(**d)


def log_grid(lo, hi, n):
    """``n`` log-evenly spaced values from ``lo`` to ``hi``, rounded to 6 significant digits."""
    return [float(f"{v:.6g}") for v in np.logspace(math.log10(lo), math.log10(hi), n)]


@dataclass(frozen=True)
class SweepSpec:
    variable: str = "tau"
    grid: tuple = None
    n_scenarios: int = 3
    seeds: int = 3

    def __post_init__(self):
        if self.variable not in ("tau", "kappa"):
            raise ConfigError("sweep variable must be tau or kappa")
        grid = self.grid
        if grid is None:
            grid = log_grid(0.1, 10.0, 17) if self.variable == "tau" else list(np.round(np.linspace(0.1, 1.0, 10), 6))
        grid = tuple(float(v) for v in grid)
        object.__setattr__(self, "grid", grid)
        if not grid:
            raise ConfigError("sweep grid must not be empty")
        if self.variable == "tau" and min(grid) <= 0:
            raise ConfigError("tau grid values must be positive")
        if self.variable == "kappa" and not all(0 < v <= 1 for v in grid):
            raise ConfigError("kappa grid values must lie in (0, 1]")
        if self.n_scenarios < 1 or self.seeds < 1:
            raise ConfigError("n_scenarios and seeds must be positive")

    def to_dict(self):
        return {"variable": self.variable, "grid": list(self.grid), "n_scenarios": self.n_scenarios, "seeds": self.seeds}


@dataclass(frozen=True)
class RunTask:
    scenario: ScenarioConfig
    dcid: DcidConfig
    t_mtl: float
    method: str
    scenario_id: int
    seed: int
    run_seed: int
    grid_variable: str = ""
    grid_value: float = None


def _estimate(task, dataset):
    """The method's shared estimate on the test rows, and its component count."""
    test_x = dataset.part("test")["x"]
    cfg = replace(task.dcid, seed=task.run_seed)
    if task.method == "oracle-z":
        z = dataset.part("test")["z"]
        return z, z.shape[1]
    if task.method == "dcid":
        est = fit_dcid(dataset, cfg)
        if est.n_selected == 0:
            return np.zeros((test_x.shape[0], 0)), 0
        return predict_shared(est, test_x), est.n_selected
    if task.method == "raw-features":
        pred_1, _, _ = train_representations(dataset, cfg)
        b1 = pred_1.features(test_x)
        return b1, b1.shape[1]
    if task.method == "mtl":
        init_seed, shuffle_seed = np.random.SeedSequence(task.run_seed).generate_state(2, dtype=np.uint64)
        spec = replace(cfg.net, seed=int(init_seed))
        tc = replace(cfg.train, shuffle_seed=int(shuffle_seed))
        model = train_mtl(dataset, spec, tc)
        z_hat = mtl_shared_estimate(model, test_x, task.t_mtl)
        return z_hat, z_hat.shape[1]
    raise ConfigError(f"unknown method {task.method!r}")


def run_one(task):
    """Execute one (scenario, seed, method) run; failures come back as records."""
    start = time.perf_counter()
    rec = RunRecord(
        scenario=task.scenario.to_dict(),
        method=task.method,
        scenario_id=task.scenario_id,
        seed=task.seed,
        scenario_seed=task.scenario.seed,
        run_seed=task.run_seed,
        version=software_version(),
        grid_variable=task.grid_variable,
        grid_value=task.grid_value,
    )
    try:
        dataset = generate(task.scenario)
        z_hat, n = _estimate(task, dataset)
        rec.score = score_icm(z_hat, dataset)
        rec.n_selected = int(n)
    except Exception as exc:  # quarantined: one bad run must not sink the study
        last = traceback.extract_tb(exc.__traceback__)[-1] if exc.__traceback__ else None
        where = f" at {Path(last.filename).name}:{last.lineno}" if last else ""
        rec.error = f"{type(exc).__name__}: {exc}{where}".replace("\n", " ")
    rec.duration_s = time.perf_counter() - start
    return rec


def _execute(tasks, workers=1):
    if workers <= 1 or len(tasks) <= 1:
        records = [run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_one, tasks))
    return sort_records(records)


def sort_records(records):
    method_rank = {m: i for i, m in enumerate(METHODS)}
    return sorted(
        records,
        key=lambda r: (
            -math.inf if r.grid_value is None else r.grid_value,
            r.scenario_id,
            r.seed,
            method_rank.get(r.method, len(METHODS)),
        ),
    )


def _tasks(study, master_seed, n_scenarios, seeds, grid_variable="", grid=(None,)):
    tasks = []
    for j in range(n_scenarios):
        scen_seed = derive_seed(master_seed, j)
        for s in range(seeds):
            run_seed = derive_seed(master_seed, j, s)
            for value in grid:
                scen = replace(study.scenario, seed=scen_seed)
                if grid_variable:
                    scen = replace(scen, **{grid_variable: value})
                for method in study.methods:
                    tasks.append(
                        RunTask(scen, study.dcid, study.t_mtl, method, j, s, run_seed, grid_variable, value)
                    )
    return tasks


def run_benchmark(study=None, master_seed=0, workers=1, methods=None, n_scenarios=None, seeds=None):
    """Every method on ``n_scenarios`` random scenarios times ``seeds`` model seeds."""
    study = study or StudyConfig()
    overrides = {k: v for k, v in (("methods", methods), ("n_scenarios", n_scenarios), ("seeds", seeds)) if v is not None}
    study = replace(study, **overrides)
    return _execute(_tasks(study, master_seed, study.n_scenarios, study.seeds), workers)


def run_sweep(spec, study=None, master_seed=0, workers=1, methods=None):
    """Every method at every grid value of ``tau`` or ``kappa``.

    Latents and maps stay fixed per scenario; only the target weights
    change along the grid.
    """
    study = study or StudyConfig()
    if methods is not None:
        study = replace(study, methods=methods)
    for v in spec.grid:  # fail fast on infeasible ratio combinations
        replace(study.scenario, **{spec.variable: v})
    return _execute(_tasks(study, master_seed, spec.n_scenarios, spec.seeds, spec.variable, spec.grid), workers)


def summarize(records):
    """Mean and population std of each metric per (grid value, method); failures excluded."""
    groups = {}
    for r in records:
        groups.setdefault((r.grid_variable, r.grid_value, r.method), []).append(r)
    rows = []
    for (var, value, method), recs in groups.items():
        ok = [r for r in recs if not r.failed]
        row = {
            "grid_variable": var,
            "grid_value": _fmt(value),
            "method": method,
            "n_runs": str(len(recs)),
            "n_failed": str(len(recs) - len(ok)),
        }
        for m in METRICS:
            vals = np.array([getattr(r.score, m) for r in ok])
            row[f"{m}_mean"] = _fmt(vals.mean()) if vals.size else ""
            row[f"{m}_std"] = _fmt(vals.std()) if vals.size else ""
        rows.append((value, method, row))
    keys = sorted({(v, var) for var, v, _ in groups}, key=lambda t: -math.inf if t[0] is None else t[0])
    for value, var in keys:
        for method in EXTERNAL_METHODS:
            row = {c: "" for c in SUMMARY_COLUMNS}
            row.update(grid_variable=var, grid_value=_fmt(value), method=method, n_runs="0", n_failed="0")
            rows.append((value, method, row))
    rank = {m: i for i, m in enumerate(METHODS + EXTERNAL_METHODS)}
    rows.sort(key=lambda t: (-math.inf if t[0] is None else t[0], rank.get(t[1], 99)))
    return [r for _, _, r in rows]


def mean_metric(records, method, metric="icm", grid_value=None):
    vals = [
        getattr(r.score, metric)
        for r in records
        if r.method == method and not r.failed and (grid_value is None or r.grid_value == grid_value)
    ]
    return float(np.mean(vals)) if vals else float("nan")


def _csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def emit_plotdata(records, out_dir, name="benchmark", metadata=None):
    """Write ``<name>_runs.csv``, ``<name>_summary.csv`` and ``<name>_metadata.json``.

    The CSVs hold only values that are pure functions of the inputs, in a
    canonical row order; timings and version info go to the metadata file.
    """
    if not records:
        raise ValueError("no records to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = sort_records(records)
    runs = out / f"{name}_runs.csv"
    summary = out / f"{name}_summary.csv"
    runs.write_text(_csv_text(RUN_COLUMNS, (r.row() for r in records)))
    summary.write_text(_csv_text(SUMMARY_COLUMNS, summarize(records)))
    meta = {
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "software_version": software_version(),
        "run_columns": list(RUN_COLUMNS),
        "summary_columns": list(SUMMARY_COLUMNS),
        "durations_s": [
            {"scenario_id": r.scenario_id, "seed": r.seed, "method": r.method, "grid_value": r.grid_value, "duration_s": r.duration_s}
            for r in records
        ],
        "failures": [r.to_dict() for r in records if r.failed],
    }
    meta.update(metadata or {})
    (out / f"{name}_metadata.json").write_text(json.dumps(meta, indent=2, default=str) + "\n")
    return runs, summary
