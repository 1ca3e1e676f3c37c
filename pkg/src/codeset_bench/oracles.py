"""Brute-force reference implementations of every evaluation metric.

Deliberately naive: explicit Python sets, O(n^2) pairwise AUC, full
prefix scans for AP. These share no code with the metrics module so that
agreement between the two is evidence, not tautology. Used by the test
suite and the `oracle` CLI subcommand.
"""

from __future__ import annotations

import numpy as np


def _row_sets(matrix) -> list[set[int]]:
    out = []
    for row in np.asarray(matrix):
        out.append({j for j, v in enumerate(row) if v})
    return out


def oracle_example_metrics(predicted, truth) -> tuple[float, float, float, float, int]:
    """(precision, recall, f1, accuracy, nan_replacements) by direct set
    arithmetic per example."""
    ps, ts = _row_sets(predicted), _row_sets(truth)
    n = len(ps)
    prec = rec = f1 = acc = 0.0
    nans = 0
    for p, t in zip(ps, ts):
        inter = len(p & t)
        if len(p) == 0:
            nans += 1
        else:
            prec += inter / len(p)
        if len(t) == 0:
            nans += 1
        else:
            rec += inter / len(t)
        if len(p) + len(t) == 0:
            nans += 1
        else:
            f1 += 2 * inter / (len(p) + len(t))
        union = len(p | t)
        if union == 0:
            nans += 1
        else:
            acc += inter / union
    return prec / n, rec / n, f1 / n, acc / n, nans


def oracle_hamming(predicted, truth) -> float:
    p = np.asarray(predicted)
    t = np.asarray(truth)
    wrong = 0
    n, q = p.shape
    for i in range(n):
        for j in range(q):
            if bool(p[i, j]) != bool(t[i, j]):
                wrong += 1
    return wrong / (n * q)


def oracle_label_auc(scores, truth) -> float | None:
    """Pairwise comparison count: each (positive, negative) pair scores
    1 when the positive outranks the negative, 0.5 on a tie."""
    s = np.asarray(scores, dtype=float)
    t = np.asarray(truth).astype(bool)
    pos = [s[i] for i in range(len(s)) if t[i]]
    neg = [s[i] for i in range(len(s)) if not t[i]]
    if not pos or not neg:
        return None
    total = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                total += 1.0
            elif a == b:
                total += 0.5
    return total / (len(pos) * len(neg))


def oracle_macro_auc(probs, truth) -> tuple[float, int]:
    probs = np.asarray(probs, dtype=float)
    t = np.asarray(truth)
    aucs = []
    excluded = 0
    for j in range(probs.shape[1]):
        a = oracle_label_auc(probs[:, j], t[:, j])
        if a is None:
            excluded += 1
        else:
            aucs.append(a)
    return (sum(aucs) / len(aucs) if aucs else 0.0), excluded


def oracle_average_precision(scores, truth) -> float | None:
    """AP by scanning every prefix of the descending-score ranking and
    accumulating (R_n - R_{n-1}) * P_n at every rank (the increment is
    zero at non-positive ranks, so this equals the positive-only sum)."""
    s = np.asarray(scores, dtype=float)
    t = np.asarray(truth).astype(bool)
    n_pos = int(t.sum())
    if n_pos == 0:
        return None
    order = sorted(range(len(s)), key=lambda i: (-s[i], i))
    ap = 0.0
    prev_r = 0.0
    for rank in range(1, len(order) + 1):
        prefix = order[:rank]
        tp = sum(1 for i in prefix if t[i])
        r = tp / n_pos
        p = tp / rank
        ap += (r - prev_r) * p
        prev_r = r
    return ap


def oracle_precision_at_k(probs, truth, k: int = 5) -> float:
    probs = np.asarray(probs, dtype=float)
    t = np.asarray(truth).astype(bool)
    vals = []
    for i in range(probs.shape[0]):
        if not t[i].any():
            continue
        ranked = sorted(range(probs.shape[1]), key=lambda j: (-probs[i, j], j))
        hits = sum(1 for j in ranked[:k] if t[i, j])
        vals.append(hits / k)
    return sum(vals) / len(vals) if vals else 0.0


def random_run(rng: np.random.Generator, n: int, q: int):
    """One random (probs, predicted, truth) triple; some probability
    mass is quantized so tie handling gets exercised."""
    probs = rng.random((n, q))
    if rng.random() < 0.5:
        probs = np.round(probs, 1)  # force ties
    predicted = (rng.random((n, q)) < 0.4).astype(np.uint8)
    truth = (rng.random((n, q)) < 0.35).astype(np.uint8)
    # dataset invariant: at least one truth bit per row
    for i in range(n):
        if not truth[i].any():
            truth[i, int(rng.integers(q))] = 1
    return probs, predicted, truth


def run_oracle_suite(n_pairs: int = 1000, n: int = 64, q: int = 10, seed: int = 0,
                     tol: float = 1e-12) -> dict[str, float]:
    """Compare the metrics module against every oracle on seeded random
    runs; returns max absolute deviations per metric, raising AssertionError
    past tolerance."""
    from . import metrics

    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {
        "precision": 0.0, "recall": 0.0, "f1": 0.0, "accuracy": 0.0,
        "hamming": 0.0, "auc": 0.0, "ap": 0.0, "p_at_5": 0.0,
    }
    for _ in range(n_pairs):
        probs, predicted, truth = random_run(rng, n, q)
        ex = metrics.example_based_metrics(predicted, truth)
        op, orc, of1, oac, onan = oracle_example_metrics(predicted, truth)
        worst["precision"] = max(worst["precision"], abs(ex.precision - op))
        worst["recall"] = max(worst["recall"], abs(ex.recall - orc))
        worst["f1"] = max(worst["f1"], abs(ex.f1 - of1))
        worst["accuracy"] = max(worst["accuracy"], abs(ex.accuracy - oac))
        assert ex.nan_replacements == onan, "nan audit mismatch"

        worst["hamming"] = max(
            worst["hamming"],
            abs(metrics.hamming_loss(predicted, truth) - oracle_hamming(predicted, truth)),
        )
        auc, exc = metrics.macro_auc(probs, truth)
        oauc, oexc = oracle_macro_auc(probs, truth)
        assert exc == oexc, "auc exclusion count mismatch"
        worst["auc"] = max(worst["auc"], abs(auc - oauc))

        for j in range(q):
            ap, _ = metrics.average_precision(probs[:, j], truth[:, j])
            oap = oracle_average_precision(probs[:, j], truth[:, j])
            if ap is None or oap is None:
                assert ap is None and oap is None, "ap definedness mismatch"
            else:
                worst["ap"] = max(worst["ap"], abs(ap - oap))

        worst["p_at_5"] = max(
            worst["p_at_5"],
            abs(
                metrics.precision_at_k(probs, truth, k=5)
                - oracle_precision_at_k(probs, truth, k=5)
            ),
        )
    for name, dev in worst.items():
        if dev > tol:
            raise AssertionError(f"{name} deviates from oracle by {dev} > {tol}")
    return worst
