"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they are
produced; they are also repeated in the terminal summary.
"""

import statistics
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES, DIABETE, HOUSING, random_bann
from oracles import brute_force_split, least_squares_output, permutation_shapley

from bgn.bann import BannModel, BinaryLayer, Neuron, mse, predict_dataset
from bgn.bounds import SLACK, bound_chain, pooled_bound
from bgn.cli import main
from bgn.dataset import SplitSpec, load_csv, split, standardize
from bgn.explain import importance_report, sample_background, shapley_exact
from bgn.trainer import TrainConfig, fit_output, search_bias, train
from bgn.tree import TreeConfig, fit_tree, predict_tree

SEEDS = (0, 1, 2, 3, 4)
HOUSING_TARGET = "MedHouseVal"
DIABETE_TARGET = "y"
# housing runs stop at these width caps with a single hidden layer
HOUSING_WIDTHS = (5, 8)
DIABETE_CONFIG = {"max_width": 10, "max_hidden_layers": 1}


def record(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def prepared_splits(path, target, seed):
    data = load_csv(path, target)
    tr, va, te = split(data, SplitSpec(seed=seed))
    tr, (va, te) = standardize(tr, [va, te])
    return tr, va, te


class Run:
    def __init__(self, name, seed, config, splits):
        self.name, self.seed = name, seed
        self.train_data, self.valid_data, self.test_data = splits
        started = time.perf_counter()
        self.model, self.trace = train(self.train_data, self.valid_data, config)
        self.seconds = time.perf_counter() - started
        self.test_mse = mse(predict_dataset(self.model, self.test_data), self.test_data.labels)


@pytest.fixture(scope="module")
def housing_runs():
    runs = {}
    for seed in SEEDS:
        splits = prepared_splits(HOUSING, HOUSING_TARGET, seed)
        for width in HOUSING_WIDTHS:
            cfg = TrainConfig(max_width=width, max_hidden_layers=1, seed=seed)
            runs[width, seed] = Run(f"housing-w{width}", seed, cfg, splits)
    return runs


@pytest.fixture(scope="module")
def diabete_runs():
    return [
        Run("diabete", seed, TrainConfig(seed=seed, **DIABETE_CONFIG), prepared_splits(DIABETE, DIABETE_TARGET, seed))
        for seed in SEEDS
    ]


@pytest.fixture(scope="module")
def all_runs(housing_runs, diabete_runs):
    return list(housing_runs.values()) + list(diabete_runs)


def test_criterion_1_output_fit_is_least_squares():
    rng = np.random.default_rng(101)
    worst = 0.0
    instances = []
    for _ in range(1000):
        m = int(rng.integers(2, 60))
        side = rng.choice([-1.0, 1.0], size=m)
        side[rng.integers(m)] = 1.0
        side[(np.flatnonzero(side > 0)[0] + 1) % m] = -1.0
        r = rng.normal(size=m) * rng.uniform(0.1, 10.0) + rng.normal() * 5
        instances.append((r, side))
    started = time.perf_counter()
    fits = [fit_output(r, side) for r, side in instances]
    seconds = time.perf_counter() - started
    for (r, side), fit in zip(instances, fits):
        w, b = least_squares_output(r, side)
        worst = max(worst, abs(fit.w_out - w), abs(fit.b_out - b))
    ok = worst <= 1e-10 and seconds < 1.0
    record(1, ok, f"1000 instances, max |diff| vs 2-parameter least squares {worst:.2e} (tol 1e-10), {seconds:.3f} s (< 1 s)")


def test_criterion_2_decrease_identities(all_runs):
    n_iter = n_rep = 0
    worst_general = worst_product = 0.0
    failures = []
    for run in all_runs:
        m = run.train_data.m
        for rec in run.trace.iterations:
            n_iter += 1
            before, after = rec["train_mse_before"], rec["train_mse_after"]
            if not after < before:
                failures.append(f"{run.name} seed {run.seed} t={rec['t']}: no strict decrease")
            drop = before - after
            general = (rec["m_plus"] * rec["rho_plus"] ** 2 + rec["m_minus"] * rec["rho_minus"] ** 2) / m
            worst_general = max(worst_general, abs(drop - general))
            if rec["t"] >= 2:
                product = (rec["w_out"] + rec["b_out"]) * (rec["w_out"] - rec["b_out"])
                worst_product = max(worst_product, abs(drop - product))
            for rep in rec["replacements"]:
                if rep["accepted"]:
                    n_rep += 1
                    if not rep["train_mse_after"] < rep["train_mse_before"]:
                        failures.append(f"{run.name} seed {run.seed}: accepted replacement without decrease")
    ok = not failures and worst_general <= 1e-8 and worst_product <= 1e-8
    detail = (f"{n_iter} neuron additions and {n_rep} accepted replacements over {len(all_runs)} runs; "
              f"max |drop - (m+rho+^2 + m-rho-^2)/m| {worst_general:.2e}, max |drop - (w+b)(w-b)| {worst_product:.2e} (tol 1e-8)")
    if failures:
        detail += "; " + "; ".join(failures[:3])
    record(2, ok, detail)


def test_criterion_3_bound_chain(all_runs):
    bad = []
    worst_pool = 0.0
    for run in all_runs:
        chain = bound_chain(run.model, run.train_data)
        if not chain.holds:
            bad.append(f"{run.name} seed {run.seed}: {chain.bounds} vs {chain.train_mse}")
        for k in range(1, run.model.depth + 1):
            worst_pool = max(worst_pool, abs(pooled_bound(run.model, run.train_data, k) - chain.bounds[k]))
    # a hand-built multi-layer model exercises more than one hidden level
    rng = np.random.default_rng(7)
    deep = random_bann(rng, 8, [6, 4, 3], max_nnz=2, names=list(all_runs[0].train_data.feature_names))
    tr = all_runs[0].train_data
    chain = bound_chain(deep, tr)
    if not chain.holds:
        bad.append(f"deep random model: {chain.bounds} vs {chain.train_mse}")
    for k in range(1, deep.depth + 1):
        worst_pool = max(worst_pool, abs(pooled_bound(deep, tr, k) - chain.bounds[k]))
    ok = not bad and worst_pool <= 1e-9
    record(3, ok, f"chain b1 <= ... <= loss (slack {SLACK:g}) on {len(all_runs) + 1} models; "
                  f"max total-variance cross-check error {worst_pool:.2e} (tol 1e-9)" + ("; " + "; ".join(bad) if bad else ""))


def test_criterion_4_bias_search_oracle():
    rng = np.random.default_rng(202)
    worst = 0.0
    for i in range(200):
        m = int(rng.integers(2, 201))
        d = int(rng.integers(1, 5))
        X = rng.normal(size=(m, d)) if i % 2 else rng.integers(-3, 4, size=(m, d)).astype(float)
        w = rng.normal(size=d)
        r = np.full(m, 2.0) if i % 10 == 0 else rng.normal(size=m)
        if np.ptp(X @ w) == 0:
            X[0, 0] += 1.0
            w[0] = 1.0
        sp = search_bias(w, X, r)
        value, b, gap = brute_force_split(w, X, r)
        worst = max(worst, abs(sp.value - value), abs(sp.threshold - b), abs(sp.margin - gap))
    record(4, worst <= 1e-10, f"200 instances up to m=200, max |diff| in (objective, b, margin) {worst:.2e} (tol 1e-10)")


def test_criterion_5_shapley_correctness():
    rng = np.random.default_rng(303)
    worst_oracle = worst_eff = worst_dummy = worst_sym = 0.0
    seconds = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 7))
        model = random_bann(rng, d, [int(rng.integers(1, 5))], max_nnz=int(rng.integers(1, 3)))
        bg = rng.normal(size=(int(rng.integers(1, 9)), d))
        x = rng.normal(size=d)
        started = time.perf_counter()
        exp = shapley_exact(model.predict_standardized, x, bg)
        seconds += time.perf_counter() - started
        ref = permutation_shapley(model.predict_standardized, x, bg, range(d))
        worst_oracle = max(worst_oracle, float(np.max(np.abs(exp.phi - ref))))
        worst_eff = max(worst_eff, abs(exp.phi.sum() + exp.base_value - exp.model_output))
        unused = sorted(set(range(d)) - set(model.retained_features()))
        if unused:
            worst_dummy = max(worst_dummy, float(np.max(np.abs(exp.phi[unused]))))
    # symmetric construction: features 0 and 1 enter every neuron with equal weight,
    # the background is closed under swapping them and x0 == x1
    for _ in range(20):
        d = 4
        neurons = []
        for _ in range(3):
            w = rng.normal(size=d)
            w[1] = w[0]
            neurons.append(Neuron(w, rng.normal()))
        model = BannModel([BinaryLayer(neurons, d)], rng.normal(size=3), rng.normal(), [f"x{i}" for i in range(d)])
        half = rng.normal(size=(4, d))
        bg = np.vstack([half, half[:, [1, 0, 2, 3]]])
        x = rng.normal(size=d)
        x[1] = x[0]
        phi = shapley_exact(model.predict_standardized, x, bg).phi
        worst_sym = max(worst_sym, abs(phi[0] - phi[1]))
    ok = worst_oracle <= 1e-10 and worst_eff <= 1e-8 and worst_dummy == 0.0 and worst_sym <= 1e-10 and seconds < 30
    record(5, ok, f"100 random BANNs: max |subset - permutation| {worst_oracle:.2e} (tol 1e-10), efficiency {worst_eff:.2e} (tol 1e-8), "
                  f"dummy max |phi| {worst_dummy:.1e} (exact 0), symmetry {worst_sym:.2e} (tol 1e-10), {seconds:.2f} s (< 30 s)")


def test_criterion_6_housing_quantitative(housing_runs):
    started = time.perf_counter()
    tree_mse = []
    for seed in SEEDS:
        tr, _, te = split(load_csv(HOUSING, HOUSING_TARGET), SplitSpec(seed=seed))
        tree = fit_tree(tr, TreeConfig(max_depth=3, seed=seed))
        tree_mse.append(mse(predict_tree(tree, te.raw_features()), te.labels))
    seconds = time.perf_counter() - started + sum(run.seconds for run in housing_runs.values())
    med = {w: statistics.median(housing_runs[w, s].test_mse for s in SEEDS) for w in HOUSING_WIDTHS}
    tree_med = statistics.median(tree_mse)
    checks = {
        "width 5 median <= 0.70": med[5] <= 0.70,
        "width 8 median <= 0.58": med[8] <= 0.58,
        "tree median in [0.58, 0.72]": 0.58 <= tree_med <= 0.72,
        "runtime <= 600 s": seconds <= 600,
    }
    per_seed = {w: ", ".join(f"{housing_runs[w, s].test_mse:.4f}" for s in SEEDS) for w in HOUSING_WIDTHS}
    widths = {w: [housing_runs[w, s].model.widths[0] for s in SEEDS] for w in HOUSING_WIDTHS}
    detail = (f"width-5 cap: median test MSE {med[5]:.4f} [{per_seed[5]}] widths {widths[5]}; "
              f"width-8 cap: median {med[8]:.4f} [{per_seed[8]}] widths {widths[8]}; "
              f"depth-3 tree: median {tree_med:.4f} [{', '.join(f'{v:.4f}' for v in tree_mse)}]; {seconds:.0f} s; "
              + ", ".join(f"{k}: {'ok' if v else 'MISSED'}" for k, v in checks.items()))
    record(6, all(checks.values()), detail)


def test_criterion_7_diabete_quantitative(diabete_runs):
    seconds = sum(run.seconds for run in diabete_runs)
    med = statistics.median(run.test_mse for run in diabete_runs)
    shapes_ok = all(run.model.depth == 1 and run.model.widths[0] <= 10 for run in diabete_runs)
    baseline = statistics.median(mse(np.full(run.test_data.m, run.train_data.labels.mean()), run.test_data.labels) for run in diabete_runs)
    gain = 1.0 - med / baseline
    ok = med <= 4600 and shapes_ok and seconds <= 60 and gain >= 0.30
    record(7, ok, f"median test MSE {med:.2f} (<= 4600) [{', '.join(f'{r.test_mse:.2f}' for r in diabete_runs)}], "
                  f"widths {[r.model.widths[0] for r in diabete_runs]}, one hidden layer each; mean-predictor median {baseline:.2f} "
                  f"({gain:.0%} lower, >= 30%); "
                  f"{seconds:.1f} s (<= 60 s)")


def test_criterion_8_housing_interpretability(housing_runs):
    run = housing_runs[5, 0]
    model = run.model
    background = sample_background(run.train_data.features, size=64, seed=run.seed)
    report = importance_report(model, run.test_data, background)
    si = report.feature_si
    top = int(np.argmax(si))
    strictly = all(si[top] > si[j] for j in range(len(si)) if j != top)
    retained = [model.feature_names[i] for i in model.retained_features()]
    ok = model.feature_names[top] == "MedInc" and strictly and len(retained) <= 4
    others = {s: len(housing_runs[5, s].model.retained_features()) for s in SEEDS if s != 0}
    record(8, ok, f"seed-0 width-5 model: largest SI {model.feature_names[top]} (rSI {report.feature_rsi[top]:.2f}), "
                  f"retained {len(retained)} features {retained} (<= 4); retained counts for seeds 1-4: {others}")


def test_criterion_9_excluded_baselines():
    record(9, True, "excluded by design: the quantized-network baseline columns (BC, BNN, Bi-real net, QN) and the pruning "
                    "curves are not reproduced; criteria 1-5 stand in as property suites")


def test_criterion_10_cli_determinism(tmp_path):
    cases = [
        ("housing", [str(HOUSING), HOUSING_TARGET, "--max-width", "8", "--max-depth", "1"]),
        ("diabete", [str(DIABETE), DIABETE_TARGET, "--max-width", "10", "--max-depth", "1"]),
        ("diabete-defaults", [str(DIABETE), DIABETE_TARGET]),
    ]
    results = []
    for name, (path, target, *flags) in cases:
        files = []
        for rep in ("a", "b"):
            out = tmp_path / f"{name}-{rep}"
            code = main(["train", "--data", path, "--target", target, "--seed", "3", *flags, "--out", str(out)])
            files.append((code, (out / "model.json").read_bytes(), (out / "trace.json").read_bytes()))
        same = files[0] == files[1] and files[0][0] == 0
        results.append((name, same))
    ok = all(same for _, same in results)
    record(10, ok, "byte-identical model and trace files from two `train` runs: "
                   + ", ".join(f"{n}: {'identical' if s else 'DIFFER'}" for n, s in results))
