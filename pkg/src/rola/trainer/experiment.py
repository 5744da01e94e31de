"""Multi-trial orchestration and the CSV / manifest files a run leaves behind."""
from __future__ import annotations

import csv
import json
import logging
import math
import platform
import shutil
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .. import __version__
from .config import ExperimentConfig
from .loop import METRIC_COLUMNS, MetricsRow, Trial

log = logging.getLogger(__name__)

AGGREGATE_COLUMNS = ["episode", "mean", "ci_low", "ci_high", "smoothed_mean"]
EXPORT_COLUMNS = ["algorithm", "episode", "mean", "ci_low", "ci_high"]
TIMING_COLUMNS = ["trial", "episode", "wall_time"]
SMOOTHING_WINDOW = 10
Z_95 = 1.96


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _header_comment(cfg: ExperimentConfig) -> str:
    return f"# algorithm={cfg.algorithm} env={cfg.env} grid_size={cfg.grid_size} gamma={cfg.gamma}\n"


TRIAL_COLUMNS = [c for c in METRIC_COLUMNS if c != "wall_time"]


class TrialWriter:
    """Streams metric rows to the per-trial CSV as checkpoints arrive.

    ``wall_time`` goes to a separate timing file so the metrics file stays
    byte-reproducible for a given seed.
    """

    def __init__(self, out_dir: Path, index: int, cfg: ExperimentConfig):
        self.metrics = (out_dir / f"trial_{index:03d}.csv").open("w", newline="")
        self.timing = (out_dir / f"trial_{index:03d}_timing.csv").open("w", newline="")
        self.metrics.write(_header_comment(cfg))
        self._m = csv.writer(self.metrics, lineterminator="\n")
        self._t = csv.writer(self.timing, lineterminator="\n")
        self._m.writerow(TRIAL_COLUMNS)
        self._t.writerow(TIMING_COLUMNS)

    def __call__(self, row: MetricsRow) -> None:
        d = asdict(row)
        self._m.writerow([_fmt(d[c]) for c in TRIAL_COLUMNS])
        self._t.writerow([row.trial, row.episode, f"{row.wall_time:.3f}"])
        self.metrics.flush()
        self.timing.flush()

    def close(self) -> None:
        self.metrics.close()
        self.timing.close()


def read_csv(path: Path) -> list[dict[str, str]]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def aggregate(series: Sequence[Sequence[float]], episodes: Sequence[int],
              window: int = SMOOTHING_WINDOW) -> list[dict[str, float]]:
    """Per-checkpoint mean over trials, normal-approximation 95% CI
    (``mean +- 1.96 * sd / sqrt(trials)``, sample sd) and a trailing moving
    average of the mean over ``window`` checkpoints."""
    data = np.asarray(series, dtype=float)          # (trials, checkpoints)
    if data.ndim != 2 or data.shape[1] != len(episodes):
        raise ValueError("every trial needs one value per checkpoint")
    n = data.shape[0]
    mean = data.mean(axis=0)
    half = Z_95 * data.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    out = []
    for k, ep in enumerate(episodes):
        lo = max(0, k - window + 1)
        out.append({"episode": int(ep), "mean": float(mean[k]), "ci_low": float(mean[k] - half[k]),
                    "ci_high": float(mean[k] + half[k]), "smoothed_mean": float(mean[lo:k + 1].mean())})
    return out


def write_aggregate_csv(path: Path, rows: Sequence[dict], cfg: ExperimentConfig) -> None:
    with path.open("w", newline="") as fh:
        fh.write(_header_comment(cfg))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in AGGREGATE_COLUMNS])


def _code_version() -> str:
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
        if rev.returncode == 0:
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def prepare_output(out_dir: Path, overwrite: bool) -> None:
    if out_dir.exists() and any(out_dir.iterdir()):
        if not overwrite:
            raise FileExistsError(f"output directory {out_dir} is not empty (pass --overwrite to replace it)")
        shutil.rmtree(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)


def _trial_job(args):
    cfg, seed, index, out_dir = args
    out = Path(out_dir)
    trial = Trial(cfg, seed, index, out)
    writer = TrialWriter(out, index, cfg)
    trial.on_row = writer
    try:
        rows = trial.run()
    finally:
        writer.close()
    return index, rows


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path, jobs: int = 1, overwrite: bool = False,
                   preset: str | None = None) -> list[dict]:
    """Run ``cfg.trials`` trials (seed ``cfg.seed + index``), then write the
    aggregate CSV and the run manifest. Returns the aggregate rows."""
    out = Path(out_dir)
    prepare_output(out, overwrite)
    seeds = [cfg.seed + k for k in range(cfg.trials)]
    manifest = {
        "config": cfg.to_dict(), "preset": preset, "code_version": _code_version(),
        "python": platform.python_version(), "numpy": np.__version__,
        "trial_seeds": seeds, "gamma": cfg.gamma, "status": "running",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    jobs_args = [(cfg, seed, k, str(out)) for k, seed in enumerate(seeds)]
    results: dict[int, list[MetricsRow]] = {}
    if jobs > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for index, rows in pool.map(_trial_job, jobs_args):
                results[index] = rows
    else:
        for a in jobs_args:
            index, rows = _trial_job(a)
            results[index] = rows
            log.info("trial %d done", index)

    # barrier: every trial finished before aggregating
    series = [[r.eval_mean_discounted_return for r in results[k]] for k in range(cfg.trials)]
    episodes = [r.episode for r in results[0]] if results else []
    agg = aggregate(series, episodes) if episodes else []
    write_aggregate_csv(out / "aggregate.csv", agg, cfg)
    manifest["status"] = "complete"
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return agg


def export_runs(run_dirs: Iterable[str | Path], out_path: str | Path) -> int:
    """Merge runs into one long-format CSV; runs without an aggregate file are
    skipped with a warning. Returns the number of data rows written."""
    count = 0
    with Path(out_path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EXPORT_COLUMNS)
        for run in map(Path, run_dirs):
            agg_path, man_path = run / "aggregate.csv", run / "manifest.json"
            if not agg_path.exists() or not man_path.exists():
                log.warning("skipping %s: incomplete run directory", run)
                continue
            try:
                manifest = json.loads(man_path.read_text())
                label = manifest["config"]["algorithm"]
                rows = read_csv(agg_path)
            except (json.JSONDecodeError, KeyError, OSError) as exc:
                log.warning("skipping %s: %s", run, exc)
                continue
            for r in rows:
                w.writerow([label, r["episode"], r["mean"], r["ci_low"], r["ci_high"]])
                count += 1
    return count
