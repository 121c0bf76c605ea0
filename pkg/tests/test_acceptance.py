"""Acceptance criteria at their stated tolerances.

Each test records one ``criterion N: PASS|FAIL ...`` line, printed as it
runs and again in the pytest terminal summary. Two clauses cannot be met
by a faithful implementation; they are marked ``xfail(strict=True)`` so
the suite stays green while the FAIL line is still reported, and an
unexpected pass breaks the suite.

Run on its own with ``pytest tests/test_acceptance.py -s`` or
``python3 tests/test_acceptance.py``.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from lopgpn import cli
from lopgpn import datasets as D
from lopgpn import evaluation as E
from lopgpn import secondorder as so
from lopgpn import selfcheck
from lopgpn.models import MODEL_KINDS, checkpoint
from lopgpn.models import graph as G
from lopgpn.models.train import accuracy, predict_report
from lopgpn.propagation import PprConfig, ppr_matrix

LN2 = math.log(2.0)
MC_SAMPLES = 1_000_000

# end-to-end configuration: sbm-small preset, every other option at its default
E2E_SEEDS = (0, 1, 2)
E2E_EPSILON = 0.9
E2E_SCENARIO = "gaussian_features"
E2E_BUDGET_S = 15 * 60


def record(number, ok, text, elapsed=None):
    timing = f" [{elapsed:.1f}s]" if elapsed is not None else ""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {text}{timing}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def within_mc(value, est, se, k=3.0):
    return abs(value - est) <= k * se


# 1 ---------------------------------------------------------------------------


def test_criterion_1_figure1_measures():
    start = time.perf_counter()
    q1, q2, q3 = selfcheck.figure1_distributions()
    h10_h5 = math.fsum(1.0 / k for k in range(6, 11))
    est2, se2 = so.mc_expected_entropy(q2, MC_SAMPLES, rng_seed=11)
    est1, se1 = so.mc_expected_entropy(q1, MC_SAMPLES, rng_seed=12)
    checks = {
        "tu(Q2)=ln2": abs(so.tu(q2) - LN2) <= 1e-9,
        "tu(Q3)=ln2": abs(so.tu(q3) - LN2) <= 1e-9,
        "au(Q2)=0.5": abs(so.au(q2) - 0.5) <= 1e-12 and within_mc(so.au(q2), est2, se2),
        "au(Q1)=H10-H5": abs(so.au(q1) - h10_h5) <= 1e-12 and within_mc(so.au(q1), est1, se1),
    }
    elapsed = time.perf_counter() - start
    ok = all(checks.values()) and elapsed < 10
    detail = (f"tu(Q2)={so.tu(q2):.12f} tu(Q3)={so.tu(q3):.12f} au(Q1)={so.au(q1):.6f} "
              f"(mc {est1:.6f}+-{se1:.1e}) au(Q2)={so.au(q2):.6f} (mc {est2:.6f}+-{se2:.1e})")
    record(1, ok, f"figure-1 measures: {detail}", elapsed)
    assert ok, checks


# 2 ---------------------------------------------------------------------------


def test_criterion_2_mixture_au_linearity():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_lin, worst_z = 0.0, 0.0
    for t in range(100):
        m = selfcheck.random_mixture(rng, max_classes=5, max_components=5)
        linear = math.fsum(w * so.au(c) for w, c in zip(m.weights, m.components))
        worst_lin = max(worst_lin, abs(so.au(m) - linear))
        est, se = so.mc_expected_entropy(m, MC_SAMPLES, rng_seed=1000 + t)
        worst_z = max(worst_z, abs(so.au(m) - est) / se)
    elapsed = time.perf_counter() - start
    ok = worst_lin <= 1e-12 and worst_z <= 3.0 and elapsed < 60
    record(2, ok, f"mixture au linear to {worst_lin:.1e}, worst |z| vs Monte-Carlo {worst_z:.2f} over 100", elapsed)
    assert ok


# 3 ---------------------------------------------------------------------------


def test_criterion_3_entropy_sandwich():
    start = time.perf_counter()
    rng = np.random.default_rng(2025)
    outside = 0
    for t in range(50):
        m = selfcheck.random_mixture(rng, max_classes=5, max_components=5)
        lower, upper = so.eu_so_bounds(m)
        est, se = so.mc_differential_entropy(m, 200_000, rng_seed=2000 + t)
        outside += not (lower - 3 * se <= est <= upper + 3 * se)
    elapsed = time.perf_counter() - start
    ok = outside == 0 and elapsed < 120
    record(3, ok, f"differential entropy inside bounds for {50 - outside}/50 mixtures", elapsed)
    assert ok


# 4 ---------------------------------------------------------------------------


def _conflict():
    adj, alphas, cfg = selfcheck.conflict_fixture()
    return G.forward_gpn(alphas, adj, cfg), G.forward_lop(alphas, adj, cfg)


def test_criterion_4_conflict_fixture():
    start = time.perf_counter()
    gpn, lop = _conflict()
    closed_lop = so.au(so.Dirichlet([100.0, 1.0]))
    checks = {
        "gpn eu_pc=-101": all(abs(so.eu_pc(q) + 101.0) <= 1e-9 for q in gpn),
        "gpn au closed form": all(abs(so.au(q) - selfcheck.gpn_conflict_au_closed_form()) <= 1e-12 for q in gpn),
        "lop au": all(abs(so.au(q) - closed_lop) <= 1e-4 and abs(so.au(q) - 0.0514) <= 1e-4 for q in lop),
        "lop tu-au": all(abs(so.tu(q) - so.au(q) - 0.642) <= 1e-3 for q in lop),
    }
    elapsed = time.perf_counter() - start
    ok = all(checks.values()) and elapsed < 1
    detail = (f"gpn eu_pc={[so.eu_pc(q) for q in gpn]}, lop au={[round(so.au(q), 6) for q in lop]} "
              f"(closed {closed_lop:.6f}), lop tu-au={[round(so.tu(q) - so.au(q), 4) for q in lop]}")
    record(4, ok, f"conflict fixture: {detail}", elapsed)
    assert ok, checks


@pytest.mark.xfail(strict=True, reason="au(Dir(50.5, 50.5)) = 0.688221 is 4.9e-3 below ln 2, outside 1e-3")
def test_criterion_4_gpn_au_near_ln2():
    gpn, _ = _conflict()
    gaps = [abs(so.au(q) - LN2) for q in gpn]
    ok = max(gaps) <= 1e-3
    record(4, ok, f"gpn au within 1e-3 of ln 2: au={so.au(gpn[0]):.6f}, |au-ln2|={max(gaps):.2e} "
                  "(exact value; clause not attainable)")
    assert ok


# 5 ---------------------------------------------------------------------------


def test_criterion_5_gradient_fidelity():
    start = time.perf_counter()
    results = selfcheck.check_primitive_gradients() + selfcheck.check_lop_loss_gradient()
    failed = [r.name for r in results if not r.passed]
    elapsed = time.perf_counter() - start
    ok = not failed and elapsed < 30
    worst = max(float(r.detail.split()[-1]) for r in results)
    record(5, ok, f"{len(results) - len(failed)}/{len(results)} gradient checks within 1e-4 "
                  f"(worst rel err {worst:.1e})", elapsed)
    assert ok, failed


# 6 ---------------------------------------------------------------------------


def test_criterion_6_sparse_vs_dense():
    start = time.perf_counter()
    rng = np.random.default_rng(66)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 13))
        adj = selfcheck.random_graph(n, float(rng.uniform(0.05, 0.9)), rng)
        cfg = PprConfig(teleport_epsilon=float(rng.uniform(0, 1)), power_iterations=int(rng.integers(0, 11)))
        worst = max(worst, float(np.max(np.abs(ppr_matrix(adj, cfg).to_dense() - selfcheck.dense_ppr(adj, cfg)))))
    worst_sum, nnz_ok = 0.0, True
    for _ in range(100):
        n = int(rng.integers(2, 60))
        adj = selfcheck.random_graph(n, float(rng.uniform(0.05, 0.5)), rng)
        delta = float(rng.choice([0.001, 0.01, 0.05, 0.1, 0.3]))
        cfg = PprConfig(teleport_epsilon=float(rng.uniform(0.01, 0.99)), power_iterations=int(rng.integers(1, 11)),
                        sparsify_delta=delta)
        pi = ppr_matrix(adj, cfg)
        worst_sum = max(worst_sum, float(np.max(np.abs(pi.row_sums() - 1.0))))
        nnz_ok &= bool(np.all(pi.row_nnz() <= 1 + 1 / delta))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and worst_sum <= 1e-9 and nnz_ok and elapsed < 30
    record(6, ok, f"dense oracle max dev {worst:.1e} (100 graphs); sparsified row-sum dev {worst_sum:.1e}, "
                  f"nnz bound {'held' if nnz_ok else 'violated'} (100 graphs)", elapsed)
    assert ok


# 7 and 8 -----------------------------------------------------------------------


def run_pipeline(out: Path) -> float:
    start = time.perf_counter()
    common = ["--preset", "sbm-small", "--seeds", ",".join(map(str, E2E_SEEDS)),
              "--scenarios", f"none,{E2E_SCENARIO}", "--teleport-epsilon", str(E2E_EPSILON)]
    assert cli.main(["train", "--out", str(out), *common]) == 0
    assert cli.main(["arc", "--out", str(out)]) == 0
    assert cli.main(["ood", "--out", str(out)]) == 0
    return time.perf_counter() - start


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("e2e") / "run"
    return out, run_pipeline(out)


def _seed_accuracies(out: Path, model: str):
    cfg = cli.resolve(cli._train_table(), [cli.read_config(out / cli.CONFIG_NAME)], None)
    base = cli.load_base(cfg)
    accs = []
    for seed in E2E_SEEDS:
        trained, _ = checkpoint.load(cli.checkpoint_path(out, cli.NO_SCENARIO, model, seed))
        ds = cli.prepare(base, cfg, cli.NO_SCENARIO, seed)
        accs.append(accuracy(predict_report(trained, ds), ds, ds.test_mask))
    return accs


def _ood_auc(out: Path, model: str, measure: str):
    for row in E.read_csv(out / "ood.csv"):
        if (row["model"], row["scenario"], row["measure"]) == (model, E2E_SCENARIO, measure):
            return float(row["auc_mean"]), float(row["auc_se"])
    raise KeyError((model, measure))


@pytest.mark.slow
def test_criterion_7_accuracy_and_arc(pipeline):
    out, elapsed = pipeline
    arc = E.read_csv(out / "arc.csv")
    parts, ok = [], elapsed < E2E_BUDGET_S
    for model in MODEL_KINDS:
        accs = _seed_accuracies(out, model)
        tu = {float(r["rejection_rate"]): float(r["acc_mean"]) for r in arc
              if r["model"] == model and r["measure"] == "tu"}
        ok &= min(accs) >= 0.85 and tu[0.5] >= tu[0.0] - 0.01
        parts.append(f"{model} acc {min(accs):.3f}..{max(accs):.3f}, tu-arc {tu[0.0]:.3f}->{tu[0.5]:.3f}")
    record(7, ok, "sbm-small x3 seeds: " + "; ".join(parts), elapsed)
    assert ok


@pytest.mark.slow
def test_criterion_7_lop_gpn_ood(pipeline):
    out, elapsed = pipeline
    auc, se = _ood_auc(out, G.LOP_GPN, "eu_so")
    ok = auc >= 0.8 and elapsed < E2E_BUDGET_S
    record(7, ok, f"{E2E_SCENARIO} eu_so auc lop_gpn {auc:.3f}+-{se:.3f}")
    assert ok


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="sum-aggregated pseudo-counts hide a perturbed node's low evidence")
def test_criterion_7_gpn_ood(pipeline):
    out, _ = pipeline
    auc, se = _ood_auc(out, G.GPN_RW, "eu_so")
    sym, sym_se = _ood_auc(out, G.GPN_SYM, "eu_so")
    ok = auc >= 0.8
    record(7, ok, f"{E2E_SCENARIO} eu_so auc gpn_rw {auc:.3f}+-{se:.3f} (gpn_sym {sym:.3f}+-{sym_se:.3f})")
    assert ok


@pytest.mark.slow
def test_criterion_8_determinism(pipeline, tmp_path):
    first, _ = pipeline
    second = tmp_path / "run"
    elapsed = run_pipeline(second)
    files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
    differing = [str(f) for f in files if (first / f).read_bytes() != (second / f).read_bytes()]
    extra = {p.relative_to(second) for p in second.rglob("*") if p.is_file()} - set(files)
    csvs = [f for f in files if f.suffix == ".csv"]
    ok = not differing and not extra
    record(8, ok, f"repeat run: {len(csvs)} CSVs and {len(files) - len(csvs)} other files byte-identical"
           if ok else f"repeat run differs in {differing[:5]}", elapsed)
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
