"""
Randomized-rotation evaluation.

A dataset in its ground-truth pose is rotated by random ground-truth
rotations, re-aligned, and scored by how far the recovered vertical axis
(``delta_v``) and horizontal axis modulo quarter turns (``delta_h``) end up
from the frame axes.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import IoError, MWAlignError
from .geometry import FrameConfig, angle_between, rotation_about_axis
from .geometry_io import GeometrySet
from .pipeline import AlignmentConfig, apply_rotation, normalize_pose

log = logging.getLogger(__name__)

DEFAULT_TRIALS = 50
MAX_TILT_DEG = 30.0
OUTLIER_DEG = 5.0
RNG_NAME = "numpy.Philox(SeedSequence([seed, trial]))"
CSV_COLUMNS = ("alpha_deg", "beta_deg", "gamma_deg", "delta_v_deg", "delta_h_deg", "runtime_s")


@dataclass(frozen=True)
class EvalConfig:
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    tilt_bound: float = MAX_TILT_DEG
    alignment: AlignmentConfig = field(default_factory=AlignmentConfig)
    threads: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 0.0 <= self.tilt_bound <= MAX_TILT_DEG:
            raise ValueError(f"tilt bound must lie in [0, {MAX_TILT_DEG}]")


@dataclass
class EvalSample:
    alpha: float
    beta: float
    gamma: float
    delta_v: float = math.nan
    delta_h: float = math.nan
    runtime: float = math.nan
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class EvalReport:
    name: str
    n_samples: int
    rows: list

    def _values(self, attr):
        return np.array([getattr(r, attr) for r in self.rows if not r.failed], dtype=np.float64)

    @property
    def n_failed(self) -> int:
        return sum(r.failed for r in self.rows)

    def stats(self) -> dict:
        out = {}
        for attr in ("delta_v", "delta_h", "runtime"):
            v = self._values(attr)
            out[f"mean_{attr}"] = float(v.mean()) if v.size else math.nan
            out[f"std_{attr}"] = float(v.std()) if v.size else math.nan
            out[f"median_{attr}"] = float(np.median(v)) if v.size else math.nan
        for attr in ("delta_v", "delta_h"):
            out[f"outliers_{attr}"] = int((self._values(attr) > OUTLIER_DEG).sum())
        out["failed"] = self.n_failed
        out["trials"] = len(self.rows)
        return out


def gt_rotation(alpha: float, beta: float, gamma: float, frame: FrameConfig | None = None) -> np.ndarray:
    """``R_x(alpha) R_y(beta) R_z(gamma)``: gamma is applied first, alpha last."""
    frame = frame or FrameConfig()
    return (rotation_about_axis(frame.x, alpha)
            @ rotation_about_axis(frame.y, beta)
            @ rotation_about_axis(frame.z, gamma))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))


def random_gt_rotation(rng: np.random.Generator, tilt_bound: float = MAX_TILT_DEG,
                       frame: FrameConfig | None = None):
    """Draw gamma in [-180, 180) and alpha, beta in [-bound, bound] uniformly.

    Returns ``(R, alpha, beta, gamma)``.
    """
    gamma = float(rng.uniform(-180.0, 180.0))
    alpha = float(rng.uniform(-tilt_bound, tilt_bound))
    beta = float(rng.uniform(-tilt_bound, tilt_bound))
    return gt_rotation(alpha, beta, gamma, frame), alpha, beta, gamma


def delta_v(R_test, R_gt, frame: FrameConfig | None = None) -> float:
    frame = frame or FrameConfig()
    return float(angle_between(np.asarray(R_test) @ np.asarray(R_gt) @ frame.z, frame.z))


def reduce_delta_h(raw: float) -> float:
    """Subtract 90 while the value is at least 45, then take the magnitude."""
    d = float(raw)
    while d >= 45.0:
        d -= 90.0
    return abs(d)


def delta_h(R_test, R_gt, frame: FrameConfig | None = None) -> float:
    frame = frame or FrameConfig()
    raw = angle_between(np.asarray(R_test) @ np.asarray(R_gt) @ frame.x, frame.x)
    return reduce_delta_h(raw)


def run_trial(samples: GeometrySet, cfg: EvalConfig, trial: int) -> EvalSample:
    frame = cfg.alignment.frame
    R_gt, a, b, g = random_gt_rotation(trial_rng(cfg.seed, trial), cfg.tilt_bound, frame)
    row = EvalSample(a, b, g)
    rotated = apply_rotation(samples, R_gt)
    align_cfg = replace(cfg.alignment, canonicalize=False)
    t0 = time.perf_counter()
    try:
        res = normalize_pose(rotated, align_cfg)
    except MWAlignError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        log.warning("trial %d failed: %s", trial, row.error)
        return row
    elapsed = time.perf_counter() - t0
    row.runtime = 0.0 if cfg.alignment.deterministic else elapsed
    row.delta_v = delta_v(res.R_total, R_gt, frame)
    row.delta_h = delta_h(res.R_total, R_gt, frame)
    return row


def run_evaluation(samples: GeometrySet, cfg: EvalConfig | None = None, name: str = "dataset") -> EvalReport:
    """Run ``cfg.trials`` randomized trials on a dataset in ground-truth pose.

    Failed trials are kept as rows with an ``error`` message. Trial ``i``
    always uses the RNG stream derived from ``(seed, i)``, so threaded and
    serial runs give the same angles and metrics.
    """
    cfg = cfg or EvalConfig()
    threads = 1 if cfg.alignment.deterministic else max(1, cfg.threads)
    if threads == 1:
        rows = [run_trial(samples, cfg, i) for i in range(cfg.trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda i: run_trial(samples, cfg, i), range(cfg.trials)))
    return EvalReport(name, len(samples), rows)


def _fmt(v) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def export_csv(report: EvalReport, path) -> None:
    """One row per trial; summary statistics appended as ``#`` comment lines."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for r in report.rows:
                fh.write(",".join(_fmt(v) for v in (r.alpha, r.beta, r.gamma, r.delta_v, r.delta_h, r.runtime)) + "\n")
            if report.rows:
                fh.write(f"# dataset={report.name} samples={report.n_samples} rng={RNG_NAME}\n")
                for key, val in report.stats().items():
                    fh.write(f"# {key}={_fmt(val) if isinstance(val, float) else val}\n")
                for i, r in enumerate(report.rows):
                    if r.failed:
                        fh.write(f"# failed trial {i}: {r.error}\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_csv(path) -> np.ndarray:
    """Trial rows of a CSV written by :func:`export_csv` as an ``(n, 6)`` array."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            rows.append([float(t) for t in line.strip().split(",")])
    return np.asarray(rows, dtype=np.float64).reshape(-1, len(CSV_COLUMNS))


TABLE_HEADER = ("Dataset", "N", "Mean δv [°]", "Std.Dev. δv [°]", "Mean δh [°]",
                "Std.Dev. δh [°]", "Mean Time [s]", "Std.Dev. Time [s]")


def summary_table(report: EvalReport) -> str:
    s = report.stats()
    vals = [report.name, str(report.n_samples)] + [
        f"{s[k]:.2f}" for k in ("mean_delta_v", "std_delta_v", "mean_delta_h", "std_delta_h",
                                "mean_runtime", "std_runtime")
    ]
    widths = [max(len(h), len(v)) for h, v in zip(TABLE_HEADER, vals)]
    line = lambda cells: " | ".join(c.rjust(w) for c, w in zip(cells, widths))
    return "\n".join([line(TABLE_HEADER), "-+-".join("-" * w for w in widths), line(vals)])
