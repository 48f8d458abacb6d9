"""Experiment configuration, Monte-Carlo orchestration, and CSV emission.

A config file is a flat ``key = value`` text document, one experiment per file
('#' starts a comment). CLI flags override file keys. Every run is a pure
function of (config, flags): re-running produces byte-identical CSVs.
"""

from __future__ import annotations

import dataclasses
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .datamodel import (
    SpectrumSpec,
    center,
    combine_covariances,
    covariance,
    generate_gaussian,
    load_binary,
    load_csv,
    partition,
)
from .distributed import dpgd_run, dsa_run, gha_local_run, seqdistpm_run
from .errors import ConfigError, SangerNetError
from .hebbian import (
    EigenBasis,
    gha_run,
    modified_gha_run,
    oi_run,
    orthogonal_iteration,
    step_size_bound,
)
from .metrics import Trajectory, avg_angle_error
from .topology import complete, cycle, erdos_renyi, metropolis_weights, star

ALGORITHMS = ("dsa", "gha_central", "gha_local_only", "oi", "dpgd", "seqdistpm", "modified_gha")
TOPOLOGIES = ("erdos_renyi", "cycle", "star", "complete")
_CENTRALIZED = ("gha_central", "oi", "modified_gha")


@dataclass
class ExperimentConfig:
    algorithm: str = "dsa"
    topology: str = "erdos_renyi"
    p: float = 0.5
    M: int = 10
    d: int = 10
    K: int = 1
    N: int = 10000
    eigengap: float = 0.8
    data_file: str | None = None
    alpha: float = 0.1
    T: int = 5000
    Tc: int = 50
    outer_iters: int = 100
    trials: int = 10
    seed: int = 0
    out: str = "results"
    snapshot_stride: int = 10
    fixed_graph: bool = False
    name: str = "experiment"

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        for key in ("M", "d", "K", "N", "T", "Tc", "outer_iters", "trials", "snapshot_stride"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be a positive integer")
        if self.K > self.d:
            raise ConfigError(f"K={self.K} exceeds d={self.d}")
        if self.data_file is None and not 0.0 < self.eigengap < 1.0:
            raise ConfigError(
                f"eigengap must lie strictly in (0, 1) — tied eigenvalues make the "
                f"target eigenvectors non-identifiable (got {self.eigengap})"
            )
        if self.topology == "erdos_renyi" and not 0.0 < self.p <= 1.0:
            raise ConfigError(f"p must lie in (0, 1], got {self.p}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def parse_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse a flat key=value config file, applying CLI overrides last."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values: dict = {"name": Path(path).stem}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in fields:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(fields[key].type, key, val, f"{path}:{lineno}")
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def _coerce(ftype: str, key: str, val: str, where: str):
    try:
        if ftype == "int":
            return int(val)
        if ftype == "float":
            return float(val)
        if ftype == "bool":
            return _BOOL[val.lower()]
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{where}: cannot parse {key}={val!r} as {ftype}") from exc
    return val


# ---------------------------------------------------------------------------


def _make_graph(cfg: ExperimentConfig, trial_seed: int):
    if cfg.topology == "cycle":
        return cycle(cfg.M)
    if cfg.topology == "star":
        return star(cfg.M)
    if cfg.topology == "complete":
        return complete(cfg.M)
    graph_seed = cfg.seed if cfg.fixed_graph else trial_seed
    return erdos_renyi(cfg.M, cfg.p, graph_seed)


def _load_data(cfg: ExperimentConfig, trial_seed: int) -> np.ndarray:
    if cfg.data_file is not None:
        path = Path(cfg.data_file)
        data = load_binary(path) if path.suffix == ".bin" else load_csv(path)
        return center(data)
    spectrum = SpectrumSpec.geometric(cfg.d, cfg.eigengap)
    return generate_gaussian(cfg.d, cfg.N, spectrum, trial_seed)


def _hebbian_to_trajectory(run, truth: EigenBasis, stride: int) -> Trajectory:
    errors = np.array([avg_angle_error(x, truth) for x in run.iterates])
    T = len(run.iterates) - 1
    snaps = {
        t: run.iterates[t][None, :, :].copy()
        for t in range(T + 1)
        if t % stride == 0 or t == T
    }
    return Trajectory(
        iteration=np.arange(T + 1),
        comm_units=np.zeros(T + 1),
        error=errors,
        consensus_dev=np.zeros(T + 1),
        flags=run.flags if hasattr(run, "flags") else frozenset(),
        snapshots=snaps,
    )


def run_trial(cfg: ExperimentConfig, trial: int) -> Trajectory:
    """Run one Monte-Carlo trial; fully determined by (cfg, trial)."""
    trial_seed = cfg.seed + trial
    data = _load_data(cfg, trial_seed)
    if cfg.algorithm in _CENTRALIZED:
        C = covariance(data)
        truth = orthogonal_iteration(C, cfg.K)
        if cfg.algorithm == "gha_central":
            run = gha_run(C, cfg.K, cfg.alpha, cfg.T, seed=trial_seed)
        elif cfg.algorithm == "modified_gha":
            run = modified_gha_run(C, cfg.K, cfg.alpha, cfg.T, truth, seed=trial_seed)
        else:
            run = oi_run(C, cfg.K, cfg.T, seed=trial_seed)
        return _hebbian_to_trajectory(run, truth, cfg.snapshot_stride)
    parts = partition(data, M=cfg.M)
    if cfg.algorithm == "gha_local_only":
        return gha_local_run(parts, cfg.K, cfg.alpha, cfg.T, trial_seed, cfg.snapshot_stride)
    graph = _make_graph(cfg, trial_seed)
    if cfg.algorithm == "dsa":
        return dsa_run(parts, graph, cfg.K, cfg.alpha, cfg.T, trial_seed, cfg.snapshot_stride)
    if cfg.algorithm == "dpgd":
        return dpgd_run(parts, graph, cfg.K, cfg.alpha, cfg.T, trial_seed, cfg.snapshot_stride)
    return seqdistpm_run(parts, graph, cfg.K, cfg.Tc, cfg.outer_iters, trial_seed)


def _atomic_write(path: Path, write_fn) -> None:
    """Write via temp file + rename so readers never see a partial file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def aggregate(trajectories: Sequence[Trajectory]) -> np.ndarray:
    """Mean/std error per comm-unit grid point, rows ``(comm, mean, std, n)``.

    The grid is the union of every trial's observed comm_units; each trial
    contributes its last value at or before the grid point (no interpolation
    fabricates errors that were never measured).
    """
    grid = np.unique(np.concatenate([t.comm_units for t in trajectories]))
    table = np.empty((grid.size, len(trajectories)))
    for j, traj in enumerate(trajectories):
        # searchsorted('right')-1: index of the last row with comm_units <= g;
        # ties within a trial resolve to the latest iteration
        idx = np.searchsorted(traj.comm_units, grid, side="right") - 1
        table[:, j] = traj.error[np.clip(idx, 0, None)]
    mean = table.mean(axis=1)
    std = table.std(axis=1, ddof=0)
    return np.column_stack([grid, mean, std, np.full(grid.size, len(trajectories))])


def _write_aggregate(path: str, rows: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("comm_units,mean_error,std_error,n_trials\n")
        for comm, mean, std, n in rows:
            fh.write(f"{comm:.10g},{mean:.17g},{std:.17g},{int(n)}\n")


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> dict[str, Path]:
    """Run all trials, write per-trial trajectory CSVs plus the aggregate CSV.

    Returns the mapping of logical names to written paths. Trials are
    independent and run in parallel when ``jobs > 1``; aggregation is a final
    serial reduce, so the output does not depend on ``jobs``.
    """
    cfg.validate()
    out_dir = Path(cfg.out)
    if jobs > 1:
        trajectories = Parallel(n_jobs=jobs)(
            delayed(run_trial)(cfg, t) for t in range(cfg.trials)
        )
    else:
        trajectories = [run_trial(cfg, t) for t in range(cfg.trials)]
    written: dict[str, Path] = {}
    for t, traj in enumerate(trajectories):
        path = out_dir / f"{cfg.name}_trial{t}.csv"
        _atomic_write(path, lambda tmp, traj=traj, t=t: traj.to_csv(tmp, trial=t))
        written[f"trial{t}"] = path
    agg_path = out_dir / f"{cfg.name}_aggregate.csv"
    rows = aggregate(trajectories)
    _atomic_write(agg_path, lambda tmp: _write_aggregate(tmp, rows))
    written["aggregate"] = agg_path
    return written


def compare(cfgs: Sequence[ExperimentConfig], out_path: str | Path, jobs: int = 1) -> Path:
    """Merge several experiments into one CSV keyed by comm_units.

    All configs must target the same estimation problem (d, K, and data source);
    columns are named by config, values are last-value-carried-forward mean
    errors on the union comm-unit grid.
    """
    if not cfgs:
        raise ConfigError("compare needs at least one config")
    ref = cfgs[0]
    for cfg in cfgs[1:]:
        same = (
            cfg.d == ref.d
            and cfg.K == ref.K
            and cfg.data_file == ref.data_file
            and (cfg.data_file is not None or (cfg.eigengap == ref.eigengap and cfg.N == ref.N))
        )
        if not same:
            raise ConfigError(
                f"configs {ref.name!r} and {cfg.name!r} target different problems "
                "(d, K, and the data source must match)"
            )
    aggregates = []
    for cfg in cfgs:
        trajs = (
            Parallel(n_jobs=jobs)(delayed(run_trial)(cfg, t) for t in range(cfg.trials))
            if jobs > 1
            else [run_trial(cfg, t) for t in range(cfg.trials)]
        )
        aggregates.append(aggregate(trajs))
    grid = np.unique(np.concatenate([a[:, 0] for a in aggregates]))
    columns = []
    for a in aggregates:
        idx = np.clip(np.searchsorted(a[:, 0], grid, side="right") - 1, 0, None)
        columns.append(a[idx, 1])
    out_path = Path(out_path)

    def write(tmp):
        with open(tmp, "w", newline="") as fh:
            fh.write("comm_units," + ",".join(c.name for c in cfgs) + "\n")
            for i, g in enumerate(grid):
                fh.write(f"{g:.10g}," + ",".join(f"{col[i]:.17g}" for col in columns) + "\n")

    _atomic_write(out_path, write)
    return out_path


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Structural checks plus a step-size advisory. Returns report lines.

    Structural problems raise :class:`ConfigError`; a step size above the
    norm-boundedness ceiling only warns, because that ceiling is sufficient for
    the sqrt(3) norm guarantee, not necessary for convergence.
    """
    cfg.validate()
    report = [f"config '{cfg.name}': structurally valid"]
    if cfg.data_file is not None:
        report.append("data from file; step-size advisory skipped (spectrum unknown)")
        return report
    lambda1 = SpectrumSpec.geometric(cfg.d, cfg.eigengap).eigenvalues[0]
    bound = step_size_bound(lambda1, cfg.K)
    if cfg.algorithm in ("dsa", "dpgd", "seqdistpm"):
        graph = _make_graph(cfg, cfg.seed)
        bound *= metropolis_weights(graph).min_self_weight()
        label = "distributed step-size ceiling min_i w_ii / (3 lambda_1 (2K-1))"
    else:
        label = "step-size ceiling 1 / (3 lambda_1 (2K-1))"
    if cfg.alpha > bound:
        report.append(
            f"warning: alpha={cfg.alpha} exceeds the {label} = {bound:.6g}; "
            "iterate norms are no longer guaranteed below sqrt(3)"
        )
    else:
        report.append(f"alpha={cfg.alpha} respects the {label} = {bound:.6g}")
    return report
