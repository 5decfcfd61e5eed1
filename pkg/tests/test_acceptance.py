"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line through ``acceptance_report``;
the lines are printed in the "acceptance criteria" section of the pytest
summary. Criterion 7 reruns the seeded criteria and compares their
serialized outputs byte for byte against the first run.
"""

import json

import numpy as np
import pytest

from greedy_rls.baselines import iter_lowrank, select_lowrank, select_wrapper
from greedy_rls.dataset import Dataset, stratified_folds, synth_two_gaussians
from greedy_rls.evaluation import cv_feature_curve, random_baseline, scaling_benchmark
from greedy_rls.greedy import commit_feature, evaluate_candidate, init_state, select_greedy
from greedy_rls.rls import loo_bruteforce, loo_dual, loo_primal, train_dual

from helpers import direct_g, random_dataset

TOL = 1e-8
SERIALIZED = {}


def dumps(obj):
    return json.dumps(obj, sort_keys=True)


# -- criterion 1 ------------------------------------------------------------


def run_equivalence(seed=1):
    rng = np.random.default_rng(seed)
    out, worst, mismatches = [], 0.0, 0
    for _ in range(50):
        m = int(rng.integers(5, 21))
        n = int(rng.integers(3, 16))
        k = int(rng.integers(1, min(8, n) + 1))
        lam = float(rng.choice([0.1, 1.0, 10.0]))
        loss = str(rng.choice(["squared", "zero_one"]))
        ds = random_dataset(rng, n, m)
        traces = [f(ds, lam, k, loss) for f in (select_greedy, select_lowrank, select_wrapper)]
        g, lr, w = traces
        if not g.features == lr.features == w.features:
            mismatches += 1
        else:
            worst = max(worst, float(np.max(np.abs(np.subtract(g.loo_errors, w.loo_errors)))),
                        float(np.max(np.abs(np.subtract(lr.loo_errors, w.loo_errors)))))
        out.append([t.to_dict() for t in traces])
    return {"traces": out, "mismatches": mismatches, "worst": worst}


def test_c1_triple_oracle_equivalence(acceptance_report):
    res = run_equivalence()
    SERIALIZED["c1"] = dumps(res["traces"])
    ok = res["mismatches"] == 0 and res["worst"] <= TOL
    acceptance_report("C1 triple-oracle equivalence", ok,
                      f"50 instances, {res['mismatches']} sequence mismatches, "
                      f"max LOO error diff {res['worst']:.2e} (tol {TOL:g})")
    assert ok


# -- criterion 2 ------------------------------------------------------------


def run_loo_exactness(seed=2):
    rng = np.random.default_rng(seed)
    worst, out = 0.0, []
    for _ in range(100):
        n = int(rng.integers(1, 11))
        m = int(rng.integers(2, 26))
        lam = float(rng.choice([0.01, 0.1, 1.0, 10.0, 100.0]))
        ds = random_dataset(rng, n, m, binary=bool(rng.integers(2)))
        sel = rng.permutation(n)[: int(rng.integers(1, n + 1))].tolist()
        brute = loo_bruteforce(ds, sel, lam)
        primal = loo_primal(ds, sel, lam)
        dual = loo_dual(train_dual(ds, sel, lam)[1], ds.labels)
        worst = max(worst, float(np.max(np.abs(primal - brute))),
                    float(np.max(np.abs(dual - brute))))
        out.append([primal.tolist(), dual.tolist(), brute.tolist()])
    return {"loo": out, "worst": worst}


def test_c2_loo_shortcut_exactness(acceptance_report):
    res = run_loo_exactness()
    SERIALIZED["c2"] = dumps(res["loo"])
    ok = res["worst"] <= TOL
    acceptance_report("C2 LOO shortcut exactness", ok,
                      f"100 instances, max |primal|dual - bruteforce| {res['worst']:.2e}")
    assert ok


# -- criterion 3 ------------------------------------------------------------


def run_state_consistency(seed=3):
    rng = np.random.default_rng(seed)
    lam = 0.5
    ds = random_dataset(rng, 25, 15)  # 15 examples, 25 features
    X, y = ds.features, ds.labels
    state = init_state(ds, lam)
    greedy_worst = 0.0
    for _ in range(10):
        errs = []
        for i in range(ds.n_features):
            errs.append(np.inf if i in state.selected else evaluate_candidate(state, ds, i)[0])
        commit_feature(state, ds, int(np.argmin(errs)))
        G = direct_g(X[state.selected], lam)
        greedy_worst = max(
            greedy_worst,
            float(np.max(np.abs(state.dual - G @ y))),
            float(np.max(np.abs(state.diag - np.diag(G)))),
            float(np.max(np.abs(state.cache_matrix - G @ X.T))),
        )

    lowrank_worst = [0.0]
    order = select_greedy(ds, lam, 10).features
    seen = []

    def check(dual_state):
        seen.append(1)
        G = direct_g(X[order[: len(seen)]], lam)
        lowrank_worst[0] = max(lowrank_worst[0], float(np.max(np.abs(dual_state.g - G))))

    list(iter_lowrank(ds, lam, 10, on_commit=check))
    return {
        "selected": list(state.selected),
        "dual": state.dual.tolist(),
        "greedy_worst": greedy_worst,
        "lowrank_worst": lowrank_worst[0],
    }


def test_c3_state_consistency(acceptance_report):
    res = run_state_consistency()
    SERIALIZED["c3"] = dumps([res["selected"], res["dual"]])
    ok = res["greedy_worst"] <= TOL and res["lowrank_worst"] <= TOL
    acceptance_report("C3 state consistency", ok,
                      f"greedy a/d/C max diff {res['greedy_worst']:.2e}, "
                      f"lowrank G max diff {res['lowrank_worst']:.2e} over 10 commits")
    assert ok


# -- criterion 4 ------------------------------------------------------------


@pytest.mark.slow
def test_c4_scaling(acceptance_report):
    fast = scaling_benchmark([1000, 2000, 4000, 8000, 16000], n=1000, k=10,
                             algorithms=("greedy",), seed=0)
    # The O(m^2)-per-candidate baseline needs ~50 min at n=1000, k=10; its
    # m-exponent does not depend on n or k, so it runs on a narrower problem.
    slow = scaling_benchmark([500, 1000, 2000, 4000], n=100, k=5,
                             algorithms=("greedy", "lowrank"), seed=0)
    g_slope = fast.slopes["greedy"]
    lr_slope = slow.slopes["lowrank"]
    faster = all(slow.wall("greedy", m) < slow.wall("lowrank", m) for m in (500, 1000, 2000, 4000))
    ok_g = abs(g_slope - 1.0) <= 0.15
    ok_lr = abs(lr_slope - 2.0) <= 0.3
    times = ", ".join(f"{m}:{slow.wall('lowrank', m):.2f}s" for m in (500, 1000, 2000, 4000))
    acceptance_report("C4a greedy scaling slope", ok_g,
                      f"{g_slope:.3f} (target 1.0 +- 0.15), n=1000 k=10")
    acceptance_report("C4b lowrank scaling slope", ok_lr,
                      f"{lr_slope:.3f} (target 2.0 +- 0.3), n=100 k=5, {times}")
    acceptance_report("C4c greedy faster at every m", faster,
                      ", ".join(f"{m}: {slow.wall('greedy', m):.4f}s vs "
                                f"{slow.wall('lowrank', m):.2f}s" for m in (500, 1000, 2000, 4000)))
    assert ok_g and ok_lr and faster


# -- criterion 5 ------------------------------------------------------------


def run_feature_quality():
    greedy_acc, random_acc, reports = [], [], []
    for seed in range(10):
        ds = synth_two_gaussians(400, 100, 5, 1.0, seed)
        folds = stratified_folds(ds.labels, 10, seed)
        g = cv_feature_curve(ds, 5, folds, algorithm="greedy")
        r = random_baseline(ds, 5, seed, folds)
        greedy_acc.append(g.mean_test_accuracy[4])
        random_acc.append(r.mean_test_accuracy[4])
        reports.append([g.to_dict(), r.to_dict()])
    return {"greedy": float(np.mean(greedy_acc)), "random": float(np.mean(random_acc)),
            "reports": reports}


@pytest.mark.slow
def test_c5_greedy_beats_random(acceptance_report):
    res = run_feature_quality()
    SERIALIZED["c5"] = dumps(res["reports"])
    margin = res["greedy"] - res["random"]
    ok = margin >= 0.05
    acceptance_report("C5 greedy vs random at k=5", ok,
                      f"greedy {res['greedy']:.3f}, random {res['random']:.3f}, "
                      f"margin {margin:.3f} (need >= 0.05), 10 seeds")
    assert ok


# -- criterion 6 ------------------------------------------------------------


def colon_like_noise(seed):
    # 60 examples, 2000 features, labels drawn independently of the features
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((2000, 60))
    y = np.repeat([1.0, -1.0], 30)[rng.permutation(60)]
    return Dataset(X, y)


def loo_test_gap(make, seeds=range(10)):
    gaps, reports = [], []
    for seed in seeds:
        ds = make(seed)
        rep = cv_feature_curve(ds, 10, stratified_folds(ds.labels, 10, seed))
        gaps.append(rep.mean_loo_accuracy[9] - rep.mean_test_accuracy[9])
        reports.append(rep.to_dict())
    return float(np.mean(gaps)), reports


def run_overfitting():
    small_gap, small = loo_test_gap(colon_like_noise)
    # adult-sized subsample: 4000 examples, 123 features, 10 of them informative
    large_gap, large = loo_test_gap(lambda s: synth_two_gaussians(4000, 123, 10, 1.0, s))
    return {"small_gap": small_gap, "large_gap": large_gap, "reports": [small, large]}


@pytest.mark.slow
def test_c6_loo_optimism(acceptance_report):
    res = run_overfitting()
    SERIALIZED["c6"] = dumps(res["reports"])
    ok_small = res["small_gap"] >= 0.15
    ok_large = res["large_gap"] <= 0.05
    acceptance_report("C6a LOO optimism on small noisy data", ok_small,
                      f"LOO - test accuracy at k=10: {res['small_gap']:.3f} (need >= 0.15)")
    acceptance_report("C6b LOO reliable on large data", ok_large,
                      f"LOO - test accuracy at k=10: {res['large_gap']:.4f} (need <= 0.05)")
    assert ok_small and ok_large


# -- criterion 7 ------------------------------------------------------------

RERUNS = {
    "c1": lambda: dumps(run_equivalence()["traces"]),
    "c2": lambda: dumps(run_loo_exactness()["loo"]),
    "c3": lambda: (lambda r: dumps([r["selected"], r["dual"]]))(run_state_consistency()),
    "c5": lambda: dumps(run_feature_quality()["reports"]),
    "c6": lambda: dumps(run_overfitting()["reports"]),
}


@pytest.mark.slow
def test_c7_determinism(acceptance_report):
    differing = []
    for key, rerun in RERUNS.items():
        first = SERIALIZED.get(key)
        if first is None:  # criterion test was deselected; produce a first run here
            first = rerun()
        if rerun() != first:
            differing.append(key)
    ok = not differing
    acceptance_report("C7 determinism", ok,
                      f"reruns of {', '.join(RERUNS)} byte-identical"
                      if ok else f"outputs differ for {differing}")
    assert ok
