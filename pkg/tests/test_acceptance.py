"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (with the measured quantities) that
is printed in the terminal summary. The desk-scale benchmark runs are shared
between criteria through module-scoped fixtures; the whole module takes
roughly ten minutes.
"""

import numpy as np
import pytest

from cohdesign import bench
from cohdesign.baselines import ELAD_GRID, EladParams
from cohdesign.cli import main
from cohdesign.dmcm import random_unit_matrix
from cohdesign.dmcmp import (AmConfig, AmSchedule, Dictionary, am_solve, dmcmp_continuation,
                             initial_pair)
from cohdesign.matcore import coherence_of, mutual_coherence, normalize_columns, welch_bound
from cohdesign.recovery import gen_sparse_signal, omp, recovery_guarantee_holds
from cohdesign.smoothing import SmoothingState, f_exact, f_rho, grad_f_rho, project_l1_ball
from oracles import best_support_error, central_difference, l1_projection_faces, l1_projection_grid

pytestmark = pytest.mark.slow

RESULTS = []
REPEATS = 10
SCHEME_1 = [6, 8, 10, 12, 14, 16]
MASTER_SEED = 2024


def report(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _means(records, key="coherence"):
    out = {}
    for row in bench.aggregate(records):
        out[(row["method"], row["params"], row["m"], row["T"])] = row[
            "coherence_mean" if key == "coherence" else "error_mean"]
    return out


# -- shared benchmark runs ----------------------------------------------------

@pytest.fixture(scope="module")
def fig1_records():
    cfg = bench.ExperimentConfig(
        scheme=[(m, 60, 60) for m in (6, 10, 16)], methods=["dmcm", "random", "elad", "xu", "duarte"],
        repeats=REPEATS, dictionary="identity", master_seed=MASTER_SEED,
        elad=[EladParams(t, g) for t, g in ELAD_GRID])
    return bench.run_coherence_experiment(cfg)


@pytest.fixture(scope="module")
def fig2_runs():
    """DMCM-P on scheme (1) with d = 30, reproducing the harness's seeds, plus random."""
    cfg = bench.ExperimentConfig(scheme=[(m, 60, 30) for m in SCHEME_1], methods=["dmcm-p", "random"],
                                 repeats=REPEATS, master_seed=MASTER_SEED)
    tag = bench._tag("dmcm-p", cfg)
    runs = []
    for point in cfg.scheme:
        for repeat in range(REPEATS):
            D = bench._dictionary(cfg, point, repeat)
            seed = bench.derive_seed(cfg.master_seed, "dmcm-p", tag, *point, repeat)
            M, P, _ = dmcmp_continuation(D, point[0], cfg.dmcmp, seed=seed)
            runs.append((point, repeat, mutual_coherence(M), coherence_of(P @ D.matrix)))
    random = bench.run_coherence_experiment(bench.with_overrides(cfg, methods=["random"]))
    return runs, random


@pytest.fixture(scope="module")
def cs_records():
    exp1 = bench.ExperimentConfig(scheme=[(m, 60, 30) for m in (6, 10, 16)], methods=["dmcm-p", "random"],
                                  repeats=REPEATS, trials_per_point=200, sparsity=[2],
                                  master_seed=MASTER_SEED)
    exp2 = bench.with_overrides(exp1, scheme=[(18, 180, 90)], sparsity=[1, 2, 3, 4])
    return bench.run_cs_experiment(exp1), bench.run_cs_experiment(exp2)


# -- criteria -----------------------------------------------------------------

def test_sandwich_inequality():
    rng = np.random.default_rng(1)
    worst = -np.inf
    for _ in range(100):
        M = random_unit_matrix(6, 60, rng)
        fe = f_exact(M)
        for rho in (0.5, 0.05):
            fr = f_rho(M, rho)
            worst = max(worst, fr - fe, fe - fr - rho / 2)
    report("sandwich f_rho <= f <= f_rho + rho/2", worst <= 1e-9,
           f"200 cases, worst violation {worst:.2e} (slack 1e-9)")


def test_gradient_finite_differences():
    rng = np.random.default_rng(2)
    worst = 0.0
    for i in range(20):
        rho = 0.5 if i % 2 else 0.05
        M = random_unit_matrix(6, 60, rng)
        g = grad_f_rho(M, rho)
        fd = central_difference(lambda X: f_rho(X, rho), M, h=1e-6)
        worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(g))
    report("gradient vs central differences", worst <= 1e-4,
           f"20 instances 6x60, max relative error {worst:.2e} (limit 1e-4)")


def test_l1_projection_oracle():
    rng = np.random.default_rng(3)
    worst = 0.0
    for k in (2, 3):
        for _ in range(25):
            x = rng.uniform(-2.5, 2.5, size=k)
            r = float(rng.uniform(0.2, 2.0))
            y = project_l1_ball(x, r)
            worst = max(worst, np.abs(y - l1_projection_grid(x, r)).max(),
                        np.abs(y - l1_projection_faces(x, r)).max())
    excess = -np.inf
    for _ in range(1000):
        shape = tuple(rng.integers(1, 12, size=2))
        X = rng.standard_normal(shape) * 10.0 ** rng.uniform(-2, 2)
        r = float(10.0 ** rng.uniform(-2, 1))
        excess = max(excess, np.abs(project_l1_ball(X, r)).sum() - r)
    report("l1-ball projection oracle", worst <= 1e-8 and excess <= 1e-10,
           f"50 grid/face checks max deviation {worst:.1e}; 1000 feasibility checks max excess {excess:.1e}")


def _am_instance(s):
    D = Dictionary.gaussian(30, 60, 1000 + s)
    return D, initial_pair(D, 6, s)


def test_am_monotone_descent():
    worst_rise, worst_bound, steps = -np.inf, -np.inf, 0
    for s in range(10):
        D, (M0, P0) = _am_instance(s)
        _, _, trace = am_solve(M0, P0, D, AmConfig(2.0, SmoothingState(0.5), 15))
        before, after = trace.column("objective_before"), trace.column("objective")
        worst_rise = max(worst_rise, (after - before).max())
        worst_bound = max(worst_bound, (trace.column("descent_bound") - (before - after)).max())
        steps += len(trace)
    report("AM descent: F nonincreasing, descent inequality per step",
           worst_rise <= 1e-9 and worst_bound <= 1e-9 and steps == 150,
           f"10 instances x K=15 at (rho, beta) = (0.5, 2): max rise {worst_rise:.1e}, "
           f"max descent-inequality shortfall {worst_bound:.1e}")


def test_am_step_decay():
    ratios, rises, hit, top = [], 0, 0, -np.inf
    for s in range(10):
        D, _ = _am_instance(s)
        _, _, trace = dmcmp_continuation(D, 6, AmSchedule(), seed=s)
        first = trace.round_records(0)
        last = trace.round_records(trace.n_rounds - 1)
        ratios.append(max(r.step_M for r in last) / max(r.step_M for r in first))
        rise = trace.column("objective") - trace.column("objective_before")
        rises += int(np.sum(rise > 1e-9))
        hit += bool(np.any(rise > 1e-9))
        top = max(top, rise.max())
    worst = max(ratios)
    # Diagnostic only: F can rise slightly late in the continuation because
    # 1/rho is not a global Lipschitz constant of the smoothed gradient.
    report("AM step decay over the continuation", worst <= 0.1,
           f"final/first round max ||M_k+1 - M_k||_F ratio {worst:.2e} (limit 0.1); "
           f"diagnostic over the full continuation: {rises} steps in {hit}/10 instances "
           f"raise F by > 1e-9, largest rise {top:.1e}")


def test_welch_floor(fig1_records, fig2_runs, cs_records):
    runs, random = fig2_runs
    records = fig1_records + random + cs_records[0] + cs_records[1]
    bad = bench.check_welch(records)
    wb = {m: welch_bound(m, 60) for m in SCHEME_1}
    bad_runs = [r for r in runs if min(r[2], r[3]) < wb[r[0][0]] - 1e-12]
    report("Welch-bound floor", not bad and not bad_runs,
           f"{len(records)} benchmark records + {2 * len(runs)} DMCM-P coherences, "
           f"{len(bad) + len(bad_runs)} below the bound")


def test_dmcm_coherence_ordering(fig1_records):
    means = {}
    for (method, params, m, _), mu in _means(fig1_records).items():
        means.setdefault(m, {})[method if method != "elad" else f"elad[{params}]"] = mu
    ok, parts = True, []
    for m in sorted(means):
        ours = means[m].pop("dmcm")
        rival, best = min(means[m].items(), key=lambda kv: kv[1])
        ok &= ours < best
        parts.append(f"m={m}: dmcm {ours:.3f} vs best other {best:.3f} ({rival.split('[')[0]})")
    report("coherence ordering, n = 60, D = I (dmcm below every baseline)", ok, "; ".join(parts))


def test_dmcmp_ordering_and_gap(fig2_runs):
    runs, random = fig2_runs
    rand = {m: mu for (_, _, m, _), mu in _means(random).items()}
    ok, parts = True, []
    gap = max(abs(mu_m - mu_pd) for _, _, mu_m, mu_pd in runs)
    for m in SCHEME_1:
        ours = float(np.mean([r[3] for r in runs if r[0][0] == m]))
        ok &= ours < rand[m]
        parts.append(f"m={m}: {ours:.3f} < {rand[m]:.3f}")
    report("projection ordering (dmcm-p below random) and coupling gap", ok and gap <= 0.02,
           "mean mu(PD) dmcm-p vs random " + ", ".join(parts) + f"; max |mu(PD) - mu(M)| {gap:.1e}")


def _near_orthonormal(m, n, eps, rng):
    Q = np.linalg.qr(rng.standard_normal((m, n)))[0]
    return normalize_columns(Q + eps / np.sqrt(m) * rng.standard_normal((m, n)))


def test_omp_recovery_guarantee():
    rng = np.random.default_rng(4)
    exact = total = 0
    while total < 500:
        n = int(rng.integers(2, 61))
        m = int(rng.integers(max(2, n // 3), n + 1))
        M = _near_orthonormal(m, n, 0.5, rng) if m == n else normalize_columns(rng.standard_normal((m, n)))
        T = int(rng.integers(1, min(m, n, 6) + 1))
        if not recovery_guarantee_holds(M, T):
            continue
        s = gen_sparse_signal(n, T, rng)
        res = omp(M, M @ s.dense(), T)
        exact += sorted(res.support) == s.support.tolist()
        total += 1
    worst, checked = -np.inf, 0
    while checked < 100:
        n = int(rng.integers(3, 13))
        m = int(rng.integers(n // 2 + 1, n + 1))
        M = _near_orthonormal(m, n, 0.3, rng) if m == n else normalize_columns(rng.standard_normal((m, n)))
        T = int(rng.integers(1, 3))
        if not recovery_guarantee_holds(M, T):
            continue
        y = M @ gen_sparse_signal(n, T, rng).dense()
        worst = max(worst, omp(M, y, T).residual_norm - best_support_error(M, y, T))
        checked += 1
    report("OMP exact recovery under the coherence condition", exact == total and worst <= 1e-8,
           f"exact support in {exact}/{total} guaranteed instances; "
           f"exhaustive search gap {worst:.1e} over {checked} instances (n <= 12, T <= 2)")


def test_recovery_error_ordering(cs_records):
    ok, parts = True, []
    for label, recs in zip(("exp1", "exp2"), cs_records):
        errs = {}
        for (method, _, m, T), e in _means(recs, "error").items():
            errs.setdefault((m, T), {})[method] = e
        for (m, T), e in sorted(errs.items()):
            ok &= e["dmcm-p"] <= e["random"]
            # signals are paired across methods by trial index
            pair = {}
            for r in recs:
                if (r.m, r.T) == (m, T):
                    pair.setdefault(r.trial, {})[r.method] = r.recon_error
            diff = np.array([v["dmcm-p"] - v["random"] for v in pair.values()])
            se = diff.std(ddof=1) / np.sqrt(diff.size)
            parts.append(f"{label} m={m} T={T}: {e['dmcm-p']:.2e} vs {e['random']:.2e} "
                         f"(paired diff {diff.mean():+.2e} +/- {se:.1e} SE)")
    report("recovery-error ordering (dmcm-p <= random)", ok, "; ".join(parts))


CLI_CONFIG = """\
scheme: [[6, 30, 15], [8, 30, 15]]
methods: [dmcm-p, elad, xu, duarte, random]
repeats: 2
trials_per_point: 20
sparsity: [1, 2]
master_seed: 11
dmcmp: {outer_iters: 20}
elad: [{t: 0.2, down_scale: 0.95, iters: 20}]
xu: {iters: 20}
histogram: {point: [6, 30, 15], bins: 10}
"""


def test_cli_determinism(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(CLI_CONFIG)
    diffs, compared = [], 0
    for cmd in ("coherence-bench", "cs-bench"):
        for fmt in ("csv", "json", "dat"):
            dirs = [tmp_path / f"{cmd}-{fmt}-{i}" for i in range(2)]
            codes = [main([cmd, "--config", str(cfg), "--out-dir", str(d), "--format", fmt])
                     for d in dirs]
            if codes != [0, 0]:
                diffs.append(f"{cmd} exit codes {codes}")
                continue
            for f in sorted(dirs[0].iterdir()):
                if f.name == "timings.csv":
                    continue
                compared += 1
                if f.read_bytes() != (dirs[1] / f.name).read_bytes():
                    diffs.append(f"{cmd}/{f.name}")
    report("CLI determinism", not diffs and compared > 0,
           f"{compared} output tables compared byte-for-byte, {len(diffs)} differ {diffs or ''}")
