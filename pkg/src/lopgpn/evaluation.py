"""Accuracy-rejection curves, OOD AUC-ROC and multi-seed aggregation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence

import numpy as np

from .secondorder import MEASURES

DEFAULT_GRID = tuple(i / 100 for i in range(100))

ARC_COLUMNS = ("dataset", "model", "measure", "seed_count", "rejection_rate", "acc_mean", "acc_se")
OOD_COLUMNS = ("dataset", "model", "scenario", "measure", "auc_mean", "auc_se", "id_acc_mean", "id_acc_se")


@dataclass(frozen=True)
class ArcCurve:
    rejection_rates: tuple
    accuracies: tuple
    measure: str = ""
    model: str = ""


@dataclass(frozen=True)
class OodResult:
    scenario: str
    auc: Dict[str, float]
    id_accuracy: float


def rejection_count(rate: float, n: int) -> int:
    """``ceil(rate * n)`` robust to float noise such as 0.07 * 100.

    Capped at ``n - 1`` so at least one instance is retained; the cap only
    binds when ``n < 1 / (1 - rate)``.
    """
    return min(n - 1, math.ceil(round(rate * n, 9)))


def arc(uncertainties, correct, grid: Sequence[float] = DEFAULT_GRID, measure="", model="") -> ArcCurve:
    """Accuracy on the retained set after rejecting the most uncertain instances.

    For each rate ``p`` the ``ceil(p * n)`` most uncertain instances are
    rejected (see :func:`rejection_count`); equal uncertainties are rejected
    in ascending index order.
    """
    u = np.asarray(uncertainties, dtype=np.float64)
    ok = np.asarray(correct, dtype=bool)
    if u.shape != ok.shape or u.ndim != 1:
        raise ValueError("uncertainties and correct must be equal-length vectors")
    n = len(u)
    if n == 0:
        raise ValueError("arc needs at least one instance")
    rates = np.asarray(grid, dtype=np.float64)
    if np.any(rates < 0) or np.any(rates >= 1):
        raise ValueError("rejection rates must lie in [0, 1)")
    if np.any(np.diff(rates) <= 0):
        raise ValueError("rejection rates must be strictly increasing")
    # stable sort on -u: most uncertain first, ties by index ascending
    order = np.argsort(-u, kind="stable")
    # correct counts among the retained suffix of ``order``
    kept_correct = np.concatenate([np.cumsum(ok[order][::-1])[::-1], [0]])
    accs = []
    for p in rates:
        r = rejection_count(p, n)
        accs.append(float(kept_correct[r] / (n - r)))
    return ArcCurve(tuple(float(p) for p in rates), tuple(accs), measure, model)


def auc_roc(scores_ood, scores_id) -> float:
    """``P(ood > id) + 0.5 P(ood == id)`` via midranks (Mann-Whitney U)."""
    ood = np.asarray(scores_ood, dtype=np.float64).ravel()
    iid = np.asarray(scores_id, dtype=np.float64).ravel()
    if len(ood) == 0 or len(iid) == 0:
        raise ValueError("auc_roc needs scores on both sides")
    both = np.concatenate([ood, iid])
    order = np.argsort(both, kind="stable")
    sorted_vals = both[order]
    ranks = np.empty(len(both))
    # midranks over tie groups
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], len(both)]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + e - 1) + 1.0
    u_stat = ranks[: len(ood)].sum() - len(ood) * (len(ood) + 1) / 2.0
    return float(u_stat / (len(ood) * len(iid)))


def aggregate(values: Iterable[float]):
    """``(mean, standard error)`` with SE = sample std / sqrt(n), 0 for one run."""
    vals = np.asarray(list(values), dtype=np.float64)
    if len(vals) == 0:
        raise ValueError("aggregate needs at least one value")
    if np.all(vals == vals[0]):
        return float(vals[0]), 0.0
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def ood_scores(report, measure: str) -> np.ndarray:
    return np.asarray(report.get(measure), dtype=np.float64)


def ood_evaluate(report, predicted, labels, test_mask, ood_flags, measures=MEASURES, scenario="") -> OodResult:
    """AUC of flagged vs unflagged test nodes per measure, and in-distribution accuracy.

    Higher uncertainty is read as more OOD. Measures that are NaN for every
    node (not provided by the model) are skipped.
    """
    test_mask = np.asarray(test_mask, bool)
    flags = np.asarray(ood_flags, bool)
    ood_idx = np.flatnonzero(test_mask & flags)
    id_idx = np.flatnonzero(test_mask & ~flags)
    if len(ood_idx) == 0:
        raise ValueError("no OOD-flagged test nodes")
    if len(id_idx) == 0:
        raise ValueError("no in-distribution test nodes")
    aucs = {}
    for m in measures:
        s = ood_scores(report, m)
        if np.all(np.isnan(s)):
            continue
        aucs[m] = auc_roc(s[ood_idx], s[id_idx])
    labels = np.asarray(labels)
    acc = float(np.mean(np.asarray(predicted)[id_idx] == labels[id_idx]))
    return OodResult(scenario, aucs, acc)


# CSV ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def arc_rows(dataset: str, model: str, measure: str, curves: List[ArcCurve]) -> List[dict]:
    """Aggregate per-seed curves over a shared grid into arc.csv rows."""
    if not curves:
        return []
    grid = curves[0].rejection_rates
    rows = []
    for k, p in enumerate(grid):
        mean_acc, se = aggregate(c.accuracies[k] for c in curves)
        rows.append(
            dict(dataset=dataset, model=model, measure=measure, seed_count=len(curves),
                 rejection_rate=_fmt(p), acc_mean=_fmt(mean_acc), acc_se=_fmt(se))
        )
    return rows


def ood_rows(dataset: str, model: str, results: List[OodResult]) -> List[dict]:
    """Aggregate per-seed results of one scenario into ood.csv rows."""
    if not results:
        return []
    id_mean, id_se = aggregate(r.id_accuracy for r in results)
    rows = []
    for m in MEASURES:
        if m not in results[0].auc:
            continue
        auc_mean, auc_se = aggregate(r.auc[m] for r in results)
        rows.append(
            dict(dataset=dataset, model=model, scenario=results[0].scenario, measure=m,
                 auc_mean=_fmt(auc_mean), auc_se=_fmt(auc_se), id_acc_mean=_fmt(id_mean), id_acc_se=_fmt(id_se))
        )
    return rows


def write_csv(path, columns, rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path) -> List[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
