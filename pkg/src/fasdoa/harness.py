"""Seeded Monte-Carlo campaigns over SNR, snapshot and movement-count sweeps."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import __version__
from .covariance import StackMode, rearrange_to_lags, sample_covariance
from .crb import CrbInput, CrbUndefinedError, crb_rmse_deg
from .estimator import DEFAULT_MIN_RATIO, EstimationError, estimate
from .geometry import DesignKind, GeometryDesign, design_aligned, design_misaligned
from .signal import ROLE_SCENARIO, Alignment, Scenario, Target, noise_variance, rng_for, synthesize

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    pass


SWEEP_AXES = ("snr_db", "snapshots", "G")
DEFAULT_SWEEPS = {
    "snr_db": [float(s) for s in range(-12, 16, 3)],
    "snapshots": list(range(100, 1001, 100)),
    "G": [0, 1],
}
CSV_COLUMNS = ("sweep_value", "rmse_deg", "crb_sqrt_deg", "detect_rate", "trials")
SNR_CONVENTION = "per-LoS-path SNR; unit LoS gain and symbol power; noise_var = 10^(-snr_db/10)"


@dataclass
class DesignSpec:
    kind: str = "aligned"
    M: int = 3
    G: int = 1
    d: float = 0.5

    def build(self, G: int | None = None) -> GeometryDesign:
        G = self.G if G is None else int(G)
        if self.kind == "aligned":
            return design_aligned(self.M, G, self.d)
        if self.kind == "misaligned":
            return design_misaligned(self.M, G, self.d)
        raise ConfigError(f"unknown design kind {self.kind!r}")


@dataclass
class ScenarioSpec:
    """LoS targets plus either explicit or randomly spread NLoS paths.

    ``los_range`` with ``n_targets`` places targets evenly over the range.
    With ``nlos_per_target > 0`` each trial draws that many NLoS angles per
    target, uniform within ``+-nlos_spread_deg`` of the LoS angle.
    """

    los_angles: list[float] = field(default_factory=list)
    los_range: list[float] | None = None
    n_targets: int | None = None
    nlos_angles: list[list[float]] | None = None
    nlos_per_target: int = 0
    nlos_spread_deg: float = 5.0
    snr_db: float = 10.0
    snapshots: int = 500
    alignment: str | None = None
    nlos_attenuation_db: float = 10.0

    def resolved_los(self) -> list[float]:
        if self.los_angles:
            return [float(a) for a in self.los_angles]
        if self.los_range is not None and self.n_targets:
            lo, hi = self.los_range
            return [float(a) for a in np.linspace(lo, hi, self.n_targets)]
        return []


@dataclass
class SweepSpec:
    axis: str = "snr_db"
    values: list = field(default_factory=list)

    def resolved_values(self) -> list:
        vals = self.values if self.values else DEFAULT_SWEEPS[self.axis]
        if self.axis in ("snapshots", "G"):
            return [int(v) for v in vals]
        return [float(v) for v in vals]


@dataclass
class EstimatorSpec:
    method: str = "ratio"
    min_ratio: float = DEFAULT_MIN_RATIO
    k: int | None = None
    refine: bool = True


@dataclass
class CampaignConfig:
    design: DesignSpec = field(default_factory=DesignSpec)
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    estimator: EstimatorSpec = field(default_factory=EstimatorSpec)
    trials: int = 500
    seed: int | None = None
    output: str = "results/campaign"
    workers: int = 1
    crb_manifold: str = "stacked"

    @classmethod
    def from_dict(cls, data: dict) -> "CampaignConfig":
        sections = {"design": DesignSpec, "scenario": ScenarioSpec,
                    "sweep": SweepSpec, "estimator": EstimatorSpec}
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key in sections:
                sub = sections[key]
                sub_known = {f.name for f in fields(sub)}
                bad = set(value) - sub_known
                if bad:
                    raise ConfigError(f"unknown keys in [{key}]: {sorted(bad)}")
                kwargs[key] = sub(**value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.sweep.axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}")
        vals = self.sweep.resolved_values()
        if any(not math.isfinite(v) for v in vals) or list(vals) != sorted(vals):
            raise ConfigError("sweep values must be finite and sorted")
        if self.design.kind not in ("aligned", "misaligned"):
            raise ConfigError(f"unknown design kind {self.design.kind!r}")
        if self.alignment() is Alignment.MISALIGNED and self.design.kind == "aligned":
            raise ConfigError("the aligned design cannot process misaligned signals")
        if self.estimator.method not in ("ratio", "mdl", "fixed"):
            raise ConfigError(f"unknown estimator {self.estimator.method!r}")
        if self.crb_manifold not in ("stacked", "per_movement"):
            raise ConfigError("crb_manifold must be 'stacked' or 'per_movement'")
        los = self.scenario.resolved_los()
        if not los:
            raise ConfigError("scenario needs at least one LoS angle")
        if self.scenario.nlos_angles is not None and len(self.scenario.nlos_angles) != len(los):
            raise ConfigError("nlos_angles needs one list per LoS target")
        if self.estimator.method == "fixed" and self.estimator.k is None:
            self.estimator.k = len(los)
        for v in vals:
            design = self.design_at(v)
            if len(los) > design.max_lag:
                raise ConfigError(
                    f"K={len(los)} exceeds the capacity Delta={design.max_lag} at {self.sweep.axis}={v}")
            try:
                self.scenario_at(v, 0)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc

    def alignment(self) -> Alignment:
        if self.scenario.alignment is not None:
            return Alignment(self.scenario.alignment)
        return Alignment.MISALIGNED if self.design.kind == "misaligned" else Alignment.ALIGNED

    def design_at(self, value) -> GeometryDesign:
        return self.design.build(value if self.sweep.axis == "G" else None)

    def scenario_at(self, value, trial: int) -> Scenario:
        sc = self.scenario
        snr = float(value) if self.sweep.axis == "snr_db" else sc.snr_db
        T = int(value) if self.sweep.axis == "snapshots" else sc.snapshots
        los = sc.resolved_los()
        if sc.nlos_angles is not None:
            nlos = [tuple(float(a) for a in lst) for lst in sc.nlos_angles]
        elif sc.nlos_per_target > 0:
            rng = rng_for(self.seed or 0, trial, ROLE_SCENARIO)
            off = rng.uniform(-sc.nlos_spread_deg, sc.nlos_spread_deg, (len(los), sc.nlos_per_target))
            nlos = [tuple(np.clip(a + off[i], -89.9, 89.9).tolist()) for i, a in enumerate(los)]
        else:
            nlos = [()] * len(los)
        targets = tuple(Target(a, n) for a, n in zip(los, nlos))
        return Scenario(targets, snr, T, self.alignment(), sc.nlos_attenuation_db, self.seed or 0)


def load_config(path) -> CampaignConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return CampaignConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class PointResult:
    sweep_value: float
    rmse_deg: float
    bias_deg: list[float]
    k_hist: dict[str, int]
    crb_sqrt_deg: float
    detect_rate: float
    trials: int
    rmse_se_deg: float = float("nan")
    wall_time: float = 0.0


@dataclass
class CampaignResult:
    points: list[PointResult]
    metadata: dict

    def to_dict(self) -> dict:
        return {"metadata": self.metadata, "points": [asdict(p) for p in self.points]}

    @classmethod
    def from_dict(cls, data: dict) -> "CampaignResult":
        return cls([PointResult(**p) for p in data["points"]], data["metadata"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CampaignResult":
        return cls.from_dict(json.loads(text))


def default_estimator(r, truth, T, spec: EstimatorSpec, d: float):
    res = estimate(r, spec.method, k=spec.k, T=T, d=d, min_ratio=spec.min_ratio,
                   refine=spec.refine)
    return res.k_hat, res.angles_deg


def truth_passthrough(r, truth, T, spec: EstimatorSpec, d: float):
    """Stub estimator returning the true angles (harness wiring check)."""
    return len(truth), np.sort(np.asarray(truth, dtype=float))


def pair_errors(estimates, truth) -> np.ndarray:
    """Signed errors estimate - truth after optimal assignment, in truth order."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    rows, cols = linear_sum_assignment(np.abs(tru[:, None] - est[None, :]))
    err = np.empty(tru.size)
    err[rows] = est[cols] - tru[rows]
    return err


def trial_lags(config: CampaignConfig, value, trial: int):
    """Synthesizes one trial and returns ``(lag vector, scenario, design)``."""
    design = config.design_at(value)
    scenario = config.scenario_at(value, trial)
    blocks = synthesize(scenario, design, trial)
    mode = StackMode.STACKED if design.stacked else StackMode.PER_MOVEMENT
    return rearrange_to_lags(sample_covariance(blocks, mode), design), scenario, design


def run_trial(task):
    """One synthesize -> covariance -> estimate pass. Module level for pickling."""
    config, value, trial, estimator = task
    r, scenario, design = trial_lags(config, value, trial)
    truth = scenario.los_angles
    try:
        k_hat, angles = estimator(r, truth, scenario.snapshots, config.estimator, design.d)
    except EstimationError:
        return None, None
    if k_hat != truth.size:
        return int(k_hat), None
    return int(k_hat), pair_errors(angles, truth)


def crb_at(config: CampaignConfig, value) -> float:
    design = config.design_at(value)
    sc = config.scenario_at(value, 0)
    K = len(sc.targets)
    try:
        inp = CrbInput(design, tuple(sc.los_angles), (1.0,) * K, noise_variance(sc.snr_db),
                       sc.snapshots, manifold=config.crb_manifold)
        return crb_rmse_deg(inp)
    except CrbUndefinedError:
        return float("nan")


def _summarize(value, outcomes, crb, wall) -> PointResult:
    hist = Counter("fail" if k is None else str(k) for k, _ in outcomes)
    errs = [e for _, e in outcomes if e is not None]
    n = len(outcomes)
    if errs:
        E = np.vstack(errs)
        per_trial = np.mean(E ** 2, axis=1)
        rmse = float(np.sqrt(per_trial.mean()))
        bias = [float(b) for b in E.mean(axis=0)]
        # Delta-method standard error of the RMSE over trials.
        se = float(per_trial.std(ddof=1) / np.sqrt(len(errs)) / (2 * rmse)) \
            if len(errs) > 1 and rmse > 0 else float("nan")
    else:
        rmse, bias, se = float("nan"), [], float("nan")
    return PointResult(value, rmse, bias, dict(sorted(hist.items())), crb,
                       len(errs) / n, n, se, wall)


def run_campaign(config: CampaignConfig, estimator=None, workers: int | None = None) -> CampaignResult:
    """Runs ``config.trials`` seeded trials at every sweep point.

    Trial ``t`` uses RNG streams keyed by ``(seed, t, role)`` at every sweep
    point, so results do not depend on scheduling or worker count. RMSE is
    taken over trials whose detected count equals the true count; the
    detection rate is reported separately.
    """
    config.validate()
    if config.seed is None:
        raise ConfigError("campaign runs need an explicit seed")
    estimator = estimator or default_estimator
    workers = config.workers if workers is None else workers
    values = config.sweep.resolved_values()
    points = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for value in values:
            t0 = time.perf_counter()
            tasks = [(config, value, t, estimator) for t in range(config.trials)]
            if pool is None:
                outcomes = [run_trial(t) for t in tasks]
            else:
                chunk = max(1, config.trials // (4 * workers))
                outcomes = list(pool.map(run_trial, tasks, chunksize=chunk))
            points.append(_summarize(value, outcomes, crb_at(config, value),
                                     time.perf_counter() - t0))
    finally:
        if pool is not None:
            pool.shutdown()
    meta = {
        "config": config.to_dict(),
        "version": __version__,
        "seed": config.seed,
        "sweep_axis": config.sweep.axis,
        "snr_convention": SNR_CONVENTION,
        "crb_label": f"{'aligned' if config.crb_manifold == 'stacked' else 'per-movement'}-manifold CRB",
    }
    return CampaignResult(points, meta)


def crb_curve(config: CampaignConfig) -> CampaignResult:
    """Bound-only sweep (no Monte-Carlo trials)."""
    config.validate()
    points = [PointResult(v, float("nan"), [], {}, crb_at(config, v), float("nan"), 0)
              for v in config.sweep.resolved_values()]
    meta = {"config": config.to_dict(), "version": __version__, "seed": config.seed,
            "sweep_axis": config.sweep.axis, "snr_convention": SNR_CONVENTION,
            "crb_label": f"{'aligned' if config.crb_manifold == 'stacked' else 'per-movement'}-manifold CRB"}
    return CampaignResult(points, meta)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "nan" if math.isnan(x) else f"{x:.12g}"


def to_csv(result: CampaignResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in result.points:
        w.writerow([_fmt(p.sweep_value), _fmt(p.rmse_deg), _fmt(p.crb_sqrt_deg),
                    _fmt(p.detect_rate), _fmt(p.trials)])
    return buf.getvalue()


def to_dat(result: CampaignResult) -> str:
    lines = ["# " + " ".join(CSV_COLUMNS)]
    for p in result.points:
        lines.append(" ".join(_fmt(x) for x in (p.sweep_value, p.rmse_deg, p.crb_sqrt_deg,
                                                  p.detect_rate, p.trials)))
    return "\n".join(lines) + "\n"


def emit_results(result: CampaignResult, prefix, formats=("csv", "json")) -> list[Path]:
    """Writes ``<prefix>.csv`` / ``.json`` / ``.dat``; returns the paths written."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    writers = {"csv": to_csv, "json": CampaignResult.to_json, "dat": to_dat}
    out = []
    for fmt in formats:
        if fmt not in writers:
            raise ConfigError(f"unknown output format {fmt!r}")
        path = prefix.with_suffix("." + fmt)
        path.write_text(writers[fmt](result))
        out.append(path)
    return out
