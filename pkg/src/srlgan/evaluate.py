"""Top-n ranking metrics (P@n, NDCG@n, MRR@n), the ItemPop baseline, and
the S1/S2/S3 ablation harness.

An item is relevant for a cold user iff its held-out normalized rating is
nonzero.  NDCG uses binary gains by default (graded 2^(C*r)-1 gains behind
a flag); users with no held-out purchases are excluded from the means.
Ranking covers all m items, tie-broken by ascending item id, so metrics
depend only on the argsort of the scores.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_NS = (5, 20)


def rank_items(prediction) -> np.ndarray:
    """1-based item ids sorted by descending score, ascending id on ties."""
    scores = np.asarray(prediction, dtype=np.float64).ravel()
    order = np.lexsort((np.arange(scores.size), -scores))
    return order + 1


def precision_at(ranked, relevant, n: int) -> float:
    """Fraction of the top n that is relevant."""
    if n < 1:
        raise ValueError("n must be >= 1")
    relevant = set(relevant)
    hits = sum(1 for item in ranked[:n] if item in relevant)
    return hits / n


def ndcg_at(ranked, relevant, n: int, gains=None) -> float:
    """Binary-gain NDCG@n; `gains` maps item id -> gain for graded mode."""
    if n < 1:
        raise ValueError("n must be >= 1")
    relevant = set(relevant)
    if not relevant:
        raise ValueError("NDCG undefined with no relevant items")
    gain_of = (lambda item: 1.0) if gains is None else (lambda item: gains[item])
    dcg = sum(gain_of(item) / np.log2(rank + 1)
              for rank, item in enumerate(ranked[:n], start=1)
              if item in relevant)
    ideal_gains = sorted((gain_of(i) for i in relevant), reverse=True)[:n]
    idcg = sum(g / np.log2(rank + 1)
               for rank, g in enumerate(ideal_gains, start=1))
    return dcg / idcg


def mrr_at(ranked, relevant, n: int) -> float:
    """Reciprocal rank of the first relevant item within the top n, else 0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    relevant = set(relevant)
    for rank, item in enumerate(ranked[:n], start=1):
        if item in relevant:
            return 1.0 / rank
    return 0.0


def relevant_items(held_out_row) -> list[int]:
    """1-based ids of items with a nonzero held-out purchase."""
    row = np.asarray(held_out_row, dtype=np.float64).ravel()
    return [int(i) + 1 for i in np.flatnonzero(row)]


@dataclass
class MetricReport:
    ns: tuple
    per_user: dict = field(default_factory=dict)  # user key -> {metric: value}
    n_users: int = 0
    n_skipped: int = 0                            # users with no relevant items

    def aggregate(self) -> dict:
        agg = {}
        for n in self.ns:
            for prefix in ("P", "N", "M"):
                key = f"{prefix}@{n}"
                vals = [u[key] for u in self.per_user.values()]
                agg[key] = float(np.mean(vals)) if vals else float("nan")
        return agg

    def write_csv(self, path):
        keys = [f"{p}@{n}" for n in self.ns for p in ("P", "N", "M")]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["user", *keys])
            for user in sorted(self.per_user):
                w.writerow([user] + [f"{self.per_user[user][k]:.10g}" for k in keys])
            agg = self.aggregate()
            w.writerow(["mean"] + [f"{agg[k]:.10g}" for k in keys])

    def format_table(self) -> str:
        agg = self.aggregate()
        lines = [f"users evaluated: {self.n_users}  (skipped, no relevant: {self.n_skipped})"]
        header = "      " + "".join(f"{'@' + str(n):>10}" for n in self.ns)
        lines.append(header)
        for prefix, label in (("P", "Precision"), ("N", "NDCG"), ("M", "MRR")):
            row = f"{label:<10}" + "".join(
                f"{agg[f'{prefix}@{n}']:>10.4f}" for n in self.ns)
            lines.append(row)
        return "\n".join(lines)


def _score_user(ranked, relevant, ns, gains=None) -> dict:
    out = {}
    for n in ns:
        out[f"P@{n}"] = precision_at(ranked, relevant, n)
        out[f"N@{n}"] = ndcg_at(ranked, relevant, n, gains=gains)
        out[f"M@{n}"] = mrr_at(ranked, relevant, n)
    return out


def evaluate_predictions(predictions, held_out, ns=DEFAULT_NS,
                         user_keys=None, graded: bool = False) -> dict:
    """Aggregate metrics for a batch of per-user prediction rows.

    Convenience wrapper over `evaluate_report` returning just the means.
    """
    return evaluate_report(predictions, held_out, ns=ns, user_keys=user_keys,
                           graded=graded).aggregate()


def evaluate_report(predictions, held_out, ns=DEFAULT_NS, user_keys=None,
                    graded: bool = False) -> MetricReport:
    predictions = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    held_out = np.atleast_2d(np.asarray(held_out, dtype=np.float64))
    if predictions.shape != held_out.shape:
        raise ValueError(
            f"shape mismatch: {predictions.shape} vs {held_out.shape}")
    if user_keys is None:
        user_keys = list(range(predictions.shape[0]))
    report = MetricReport(ns=tuple(ns))
    for key, pred, truth in zip(user_keys, predictions, held_out):
        rel = relevant_items(truth)
        if not rel:
            report.n_skipped += 1
            continue
        gains = None
        if graded:
            gains = {i: 2.0 ** float(truth[i - 1] * 5.0) - 1.0 for i in rel}
        ranked = rank_items(pred)
        report.per_user[key] = _score_user(ranked, rel, ns, gains=gains)
        report.n_users += 1
    return report


def item_pop_ranking(warm_purchase_matrix) -> np.ndarray:
    """Global 1-based item ranking by descending purchase count (nonzero
    entries), lower id first on ties."""
    matrix = np.atleast_2d(np.asarray(warm_purchase_matrix))
    if matrix.shape[0] < 1 or matrix.size == 0:
        raise ValueError("empty warm purchase matrix")
    counts = np.count_nonzero(matrix, axis=0)
    return rank_items(counts)


def evaluate_itempop(warm_purchase_matrix, held_out, ns=DEFAULT_NS,
                     user_keys=None) -> MetricReport:
    """Score the non-personalized popularity ranking against held-out rows."""
    ranked = item_pop_ranking(warm_purchase_matrix)
    held_out = np.atleast_2d(np.asarray(held_out, dtype=np.float64))
    if user_keys is None:
        user_keys = list(range(held_out.shape[0]))
    report = MetricReport(ns=tuple(ns))
    for key, truth in zip(user_keys, held_out):
        rel = relevant_items(truth)
        if not rel:
            report.n_skipped += 1
            continue
        report.per_user[key] = _score_user(ranked, rel, ns)
        report.n_users += 1
    return report


ABLATION_MODES = {
    # mode -> (gan_loss, sparsity on)
    "S1": ("bce", False),
    "S2": ("lsq", False),
    "S3": ("lsq", True),
}


def ablation_config(base_config, mode: str):
    """Derive the S1/S2/S3 trainer config from a base (S3) config."""
    gan_loss, sparsity = ABLATION_MODES[mode]
    return replace(base_config, gan_loss=gan_loss, sparsity=sparsity,
                   beta=base_config.beta if sparsity else 0.0).validate()


def run_ablation(x_warm, y_warm, x_cold, y_cold, base_config,
                 ns=DEFAULT_NS) -> dict[str, MetricReport]:
    """Train S1, S2, S3 under identical seeds/configs and score cold users."""
    from . import train as T
    from . import model as M

    reports = {}
    for mode in ("S1", "S2", "S3"):
        cfg = ablation_config(base_config, mode)
        trainer = T.fit(x_warm, y_warm, cfg)
        preds = M.generator_forward(trainer.generator, x_cold)
        reports[mode] = evaluate_report(preds, y_cold, ns=ns)
    return reports
