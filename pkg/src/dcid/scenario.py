"""Synthetic two-target datasets with a known shared latent.

Three independent standard-normal latent blocks are drawn: ``z`` (shared),
``z1`` and ``z2`` (individual). Each target is a weighted sum of a
shared-signal map of ``z`` and an individual map of its own ``z_i``; the
weights are solved so that the share of target variance explained by ``z``
hits the configured ``tau`` and ``kappa`` ratios. The observations ``x`` are
a random injective image of all three latents plus Gaussian noise.
"""
import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from dcid.errors import ConfigError
from dcid.regression import r_squared

SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test")
TARGET_MAP_KINDS = ("linear", "quadratic")
OBS_MAP_KINDS = ("linear", "mlp-random")
OBS_LAYOUTS = ("block", "dense")

# independent RNG streams spawned from the scenario seed
_STREAMS = ("z", "z1", "z2", "target_maps", "obs_map", "obs_noise", "split")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to regenerate a dataset bit for bit.

    ``obs_layout="block"`` gives each latent block its own group of
    observation columns; ``"dense"`` lets every column mix all latents.
    """

    n_samples: int = 10_000
    dim_shared: int = 1
    dim_indiv: int = 1
    dim_obs: int = 32
    target_map_kind: str = "linear"
    obs_map_kind: str = "mlp-random"
    tau: float = 1.0
    kappa: float = 1.0
    noise_obs: float = 0.05
    seed: int = 0
    obs_layout: str = "block"
    leaky_slope: float = 0.5
    split_fractions: tuple = (0.7, 0.15, 0.15)

    def __post_init__(self):
        for name in ("n_samples", "dim_shared", "dim_indiv", "dim_obs"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        n_latent = self.dim_shared + 2 * self.dim_indiv
        if self.n_samples < 10 * n_latent:
            raise ConfigError(f"n_samples must be at least {10 * n_latent} for {n_latent} latent dimensions")
        if self.dim_obs < n_latent:
            raise ConfigError(f"dim_obs={self.dim_obs} cannot hold {n_latent} latent dimensions injectively")
        if self.target_map_kind not in TARGET_MAP_KINDS:
            raise ConfigError(f"target_map_kind must be one of {TARGET_MAP_KINDS}")
        if self.obs_map_kind not in OBS_MAP_KINDS:
            raise ConfigError(f"obs_map_kind must be one of {OBS_MAP_KINDS}")
        if self.obs_layout not in OBS_LAYOUTS:
            raise ConfigError(f"obs_layout must be one of {OBS_LAYOUTS}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ConfigError(f"tau must be positive, got {self.tau!r}")
        if not (0 < self.kappa <= 1):
            raise ConfigError(f"kappa must lie in (0, 1], got {self.kappa!r}")
        solve_weights(self.tau, self.kappa)  # rejects infeasible ratio pairs
        if not (self.noise_obs >= 0 and math.isfinite(self.noise_obs)):
            raise ConfigError("noise_obs must be a finite non-negative number")
        if not (0 < self.leaky_slope <= 1):
            raise ConfigError("leaky_slope must lie in (0, 1]")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        fr = tuple(float(f) for f in self.split_fractions)
        if len(fr) != 3 or min(fr) <= 0 or abs(sum(fr) - 1) > 1e-9:
            raise ConfigError("split_fractions must be three positive numbers summing to 1")
        object.__setattr__(self, "split_fractions", fr)
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self):
        d = asdict(self)
        d["split_fractions"] = list(self.split_fractions)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        d = dict(d)
        if "split_fractions" in d:
            d["split_fractions"] = tuple(d["split_fractions"])
        return cls(**d)


def streams(seed):
    """Named, independent generators derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.default_rng(s) for name, s in zip(_STREAMS, children)}


@dataclass(frozen=True)
class SignalMap:
    """Scalar map of a latent block, standardised on the sample it was built from."""

    kind: str
    coef: np.ndarray
    offset: float = 0.0
    scale: float = 1.0

    def raw(self, u):
        u = np.asarray(u, dtype=float)
        return (u**2 if self.kind == "quadratic" else u) @ self.coef

    def __call__(self, u):
        return (self.raw(u) - self.offset) / self.scale

    def to_dict(self):
        return {"kind": self.kind, "coef": self.coef.tolist(), "offset": self.offset, "scale": self.scale}


def _build_map(kind, u, rng):
    coef = rng.standard_normal(u.shape[1])
    m = SignalMap(kind, coef)
    s = m.raw(u)
    scale = float(s.std())
    if scale == 0.0:
        raise ConfigError("target map has zero variance on the sample")
    return replace(m, offset=float(s.mean()), scale=scale)


@dataclass(frozen=True)
class TargetMaps:
    psi1: SignalMap
    psi2: SignalMap
    phi1: SignalMap
    phi2: SignalMap
    a1: float
    a2: float
    b1: float
    b2: float

    def to_dict(self):
        d = {k: getattr(self, k).to_dict() for k in ("psi1", "psi2", "phi1", "phi2")}
        d.update(a1=self.a1, a2=self.a2, b1=self.b1, b2=self.b2)
        return d


def solve_weights(tau, kappa):
    """Weights ``(a1, a2, b1, b2)`` giving unit-variance targets with the requested ratios.

    With standardised signals the share of var(y_i) explained by ``z`` is
    ``s_i = a_i**2`` and ``b_i**2 = 1 - s_i``. The ratio definitions give
    ``s1 + s2 = 2 tau / (1 + tau)`` and ``s1 = kappa * s2``.
    """
    if not (tau > 0 and 0 < kappa <= 1):
        raise ConfigError(f"need tau > 0 and 0 < kappa <= 1, got tau={tau}, kappa={kappa}")
    total = 2 * tau / (1 + tau)
    s2 = total / (1 + kappa)
    s1 = kappa * s2
    if s2 > 1 + 1e-12:
        raise ConfigError(
            f"tau={tau}, kappa={kappa} is infeasible: y2 would need {s2:.3f} > 1 of its variance from z"
        )
    s2 = min(s2, 1.0)
    return math.sqrt(s1), math.sqrt(s2), math.sqrt(1 - s1), math.sqrt(max(1 - s2, 0.0))


def sample_latents(cfg, rngs=None):
    """i.i.d. standard-normal ``(z, z1, z2)`` from separate streams."""
    rngs = rngs or streams(cfg.seed)
    n = cfg.n_samples
    z = rngs["z"].standard_normal((n, cfg.dim_shared))
    z1 = rngs["z1"].standard_normal((n, cfg.dim_indiv))
    z2 = rngs["z2"].standard_normal((n, cfg.dim_indiv))
    return z, z1, z2


def compose_targets(z, z1, z2, cfg, rng=None):
    """Targets ``y_i = a_i psi_i(z) + b_i phi_i(z_i)`` and the maps that built them."""
    rng = rng or streams(cfg.seed)["target_maps"]
    kind = cfg.target_map_kind
    psi1 = _build_map(kind, z, rng)
    psi2 = _build_map(kind, z, rng)
    phi1 = _build_map(kind, z1, rng)
    phi2 = _build_map(kind, z2, rng)
    a1, a2, b1, b2 = solve_weights(cfg.tau, cfg.kappa)
    y1 = a1 * psi1(z) + b1 * phi1(z1)
    y2 = a2 * psi2(z) + b2 * phi2(z2)
    return y1, y2, TargetMaps(psi1, psi2, phi1, phi2, a1, a2, b1, b2)


def _leaky(h, slope):
    return np.where(h > 0, h, slope * h)


def _block_map(u, width, kind, slope, rng):
    d = u.shape[1]
    if kind == "linear":
        return u @ (rng.standard_normal((d, width)) / math.sqrt(d))
    w_in = rng.standard_normal((d, width)) / math.sqrt(d)
    bias = 0.5 * rng.standard_normal(width)
    w_out = rng.standard_normal((width, width)) / math.sqrt(width)
    return _leaky(u @ w_in + bias, slope) @ w_out


def obs_block_widths(cfg):
    """Observation columns assigned to the (z, z1, z2) blocks."""
    dims = np.array([cfg.dim_shared, cfg.dim_indiv, cfg.dim_indiv])
    widths = np.maximum(np.floor(cfg.dim_obs * dims / dims.sum()).astype(int), dims)
    widths[0] += cfg.dim_obs - widths.sum()
    return widths


def mix_observations(z, z1, z2, cfg, rng=None, noise_rng=None):
    """Noisy injective image ``x`` of the latents, ``cfg.dim_obs`` columns wide."""
    if rng is None or noise_rng is None:
        s = streams(cfg.seed)
        rng = rng or s["obs_map"]
        noise_rng = noise_rng or s["obs_noise"]
    if cfg.obs_layout == "dense":
        x = _block_map(np.hstack([z, z1, z2]), cfg.dim_obs, cfg.obs_map_kind, cfg.leaky_slope, rng)
    else:
        parts = [
            _block_map(u, int(w), cfg.obs_map_kind, cfg.leaky_slope, rng)
            for u, w in zip((z, z1, z2), obs_block_widths(cfg))
        ]
        x = np.hstack(parts)
    return x + cfg.noise_obs * noise_rng.standard_normal(x.shape)


def assign_splits(n, fractions, rng):
    """Per-row split labels (0 train, 1 val, 2 test) with exact rounded counts."""
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    labels = np.full(n, 2, dtype=np.int8)
    perm = rng.permutation(n)
    labels[perm[:n_train]] = 0
    labels[perm[n_train : n_train + n_val]] = 1
    return labels


@dataclass
class GroundTruthDataset:
    x: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    z: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    split_assignment: np.ndarray
    config: ScenarioConfig
    maps: TargetMaps = None
    _index_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = self.x.shape[0]
        for name in ("y1", "y2", "z", "z1", "z2", "split_assignment"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} has {getattr(self, name).shape[0]} rows, x has {n}")

    @property
    def n_rows(self):
        return self.x.shape[0]

    def indices(self, split):
        if split not in self._index_cache:
            self._index_cache[split] = np.flatnonzero(self.split_assignment == SPLITS.index(split))
        return self._index_cache[split]

    def split_counts(self):
        return {s: int(self.indices(s).size) for s in SPLITS}

    def part(self, split):
        """Dict of all arrays restricted to one split."""
        idx = self.indices(split)
        return {k: getattr(self, k)[idx] for k in ("x", "y1", "y2", "z", "z1", "z2")}


def generate(cfg):
    """Sample a full dataset; a pure function of ``cfg``."""
    s = streams(cfg.seed)
    z, z1, z2 = sample_latents(cfg, s)
    y1, y2, maps = compose_targets(z, z1, z2, cfg, s["target_maps"])
    x = mix_observations(z, z1, z2, cfg, s["obs_map"], s["obs_noise"])
    split = assign_splits(cfg.n_samples, cfg.split_fractions, s["split"])
    return GroundTruthDataset(x, y1, y2, z, z1, z2, split, cfg, maps)


def _latent_basis(u, kind):
    return np.hstack([u, u**2]) if kind == "quadratic" else u


def verify_ratios(dataset, null_r2=None, **probe):
    """Empirical ``(tau_hat, kappa_hat)`` of a dataset from R^2 regressions.

    For quadratic target maps the latents are expanded with their squares
    so the regression can represent the signal. A denominator at or below
    the chance level of R^2 (about ten times regressors over probe rows)
    is treated as zero and the ratio is reported as ``inf``.
    """
    kind = dataset.config.target_map_kind
    z = _latent_basis(dataset.z, kind)
    zi = _latent_basis(np.hstack([dataset.z1, dataset.z2]), kind)
    y = np.column_stack([dataset.y1, dataset.y2])
    if null_r2 is None:
        null_r2 = 10.0 * zi.shape[1] / (0.5 * dataset.n_rows)

    def ratio(num, den):
        return math.inf if den <= null_r2 else num / den

    tau_hat = ratio(r_squared(z, y, **probe), r_squared(zi, y, **probe))
    kappa_hat = ratio(r_squared(z, dataset.y1, **probe), r_squared(z, dataset.y2, **probe))
    return tau_hat, kappa_hat


_ARRAYS = ("x", "y1", "y2", "z", "z1", "z2", "split_assignment")


def save_dataset(dataset, directory):
    """Write a JSON manifest plus one little-endian float64 file per array."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name in _ARRAYS:
        arr = np.ascontiguousarray(getattr(dataset, name), dtype="<f8")
        fname = f"{name}.bin"
        (directory / fname).write_bytes(arr.tobytes(order="C"))
        entries[name] = {"file": fname, "shape": list(arr.shape), "dtype": "<f8"}
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": dataset.config.to_dict(),
        "split_counts": dataset.split_counts(),
        "split_codes": list(SPLITS),
        "arrays": entries,
    }
    if dataset.maps is not None:
        manifest["target_maps"] = dataset.maps.to_dict()
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory / "manifest.json"


def load_dataset(directory):
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported dataset schema version {manifest.get('schema_version')!r}")
    arrays = {}
    for name in _ARRAYS:
        entry = manifest["arrays"][name]
        raw = np.frombuffer((directory / entry["file"]).read_bytes(), dtype=entry["dtype"])
        arrays[name] = raw.reshape(entry["shape"]).astype(float)
    arrays["split_assignment"] = arrays["split_assignment"].astype(np.int8)
    cfg = ScenarioConfig.from_dict(manifest["config"])
    return GroundTruthDataset(config=cfg, **arrays)


def export_csv(dataset, path):
    """One row per sample: observations, targets, latents and split name."""
    cols = [f"x{j}" for j in range(dataset.x.shape[1])] + ["y1", "y2"]
    cols += [f"z_{j}" for j in range(dataset.z.shape[1])]
    cols += [f"z1_{j}" for j in range(dataset.z1.shape[1])]
    cols += [f"z2_{j}" for j in range(dataset.z2.shape[1])]
    body = np.column_stack([dataset.x, dataset.y1, dataset.y2, dataset.z, dataset.z1, dataset.z2])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols + ["split"])
        for row, lab in zip(body, dataset.split_assignment):
            w.writerow([repr(float(v)) for v in row] + [SPLITS[lab]])
