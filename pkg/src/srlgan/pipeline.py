"""Glue between raw MovieLens directories and the training/eval stages."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import numpy as np

from . import data as D
from . import features as F

RAW_FILES = {
    "ml100k": {"ratings": "u.data", "users": "u.user", "items": "u.item",
               "occupations": "u.occupation"},
    "ml1m": {"ratings": "ratings.dat", "users": "users.dat",
             "items": "movies.dat"},
}


def prepare_dataset(raw_dir, dataset: str,
                    items: int | None = None) -> tuple[D.DatasetCache, dict]:
    """Parse a raw MovieLens directory into a DatasetCache plus stats.

    `items` overrides the declared dataset item count (the default keeps
    never-rated items so m matches the published dimensionality).
    """
    if dataset not in RAW_FILES:
        raise ValueError(f"unknown dataset {dataset!r}")
    raw_dir = Path(raw_dir)
    names = RAW_FILES[dataset]
    info = dict(D.DATASET_INFO[dataset])
    if items is not None:
        info["items"] = items

    triples = D.parse_ratings(raw_dir / names["ratings"], dataset,
                              max_rating=info["max_rating"])
    users = D.parse_users(raw_dir / names["users"], dataset)
    item_genres = D.parse_item_genres(raw_dir / names["items"], dataset)

    if dataset == "ml100k":
        occ_path = raw_dir / names["occupations"]
        if occ_path.exists():
            occupations = [ln.strip() for ln in occ_path.read_text().splitlines()
                           if ln.strip()]
        else:
            occupations = sorted({u.occupation for u in users.values()})
        schema = F.ml100k_schema(users, occupations)
    else:
        schema = F.ml1m_schema()

    user_ids, purchase = D.build_purchase_matrix(
        triples, m=info["items"], max_rating=info["max_rating"])

    rated_by_user = defaultdict(list)
    for t in triples:
        rated_by_user[t.user_id].append(t.item_id)

    counts = np.stack([
        F.term_frequency(users[uid], rated_by_user.get(uid, ()),
                         item_genres, schema)
        for uid in user_ids
    ])
    idf = F.inverse_document_frequency(counts)
    tfidf = counts * idf

    cache = D.DatasetCache(
        dataset=dataset,
        max_rating=info["max_rating"],
        user_ids=user_ids,
        purchase=purchase,
        tfidf=tfidf,
        schema_json=schema.to_json(),
        counts=counts,
        idf=idf,
    )
    stats = {
        "dataset": dataset,
        "users": len(user_ids),
        "items": info["items"],
        "ratings": len(triples),
        "d": schema.d,
        "sparsity_percent": round(D.sparsity_percent(purchase), 2),
    }
    return cache, stats


def genre_slot_mask(schema: F.AttributeSchema) -> np.ndarray:
    """Boolean mask over schema slots, True on the genre slots."""
    mask = np.zeros(schema.d, dtype=bool)
    mask[schema.d - len(schema.genre_values):] = True
    return mask


def leakage_free_features(cache: D.DatasetCache, rows) -> np.ndarray:
    """Attribute vectors for the given cache rows with genre counts zeroed,
    mimicking cold users whose viewing history is truly unknown."""
    if cache.counts is None or cache.idf is None:
        raise ValueError("cache lacks raw counts; re-run prepare")
    schema = F.AttributeSchema.from_json(cache.schema_json)
    counts = cache.counts[rows].copy()
    counts[:, genre_slot_mask(schema)] = 0.0
    return counts * cache.idf


def split_matrices(cache: D.DatasetCache, cold_fraction: float, seed: int,
                   leakage_free_cold: bool = False):
    """Warm/cold matrices aligned with a seeded user split.

    Returns (split, x_warm, y_warm, x_cold, y_cold); cold behaviors are the
    held-out ground truth for evaluation.
    """
    split = D.split_users(cache.user_ids, cold_fraction, seed)
    row_of = {u: k for k, u in enumerate(cache.user_ids)}
    warm_rows = np.asarray([row_of[u] for u in split.warm_ids], dtype=int)
    cold_rows = np.asarray([row_of[u] for u in split.cold_ids], dtype=int)
    x_warm = cache.tfidf[warm_rows]
    y_warm = cache.purchase[warm_rows]
    if leakage_free_cold and len(cold_rows):
        x_cold = leakage_free_features(cache, cold_rows)
    else:
        x_cold = cache.tfidf[cold_rows]
    y_cold = cache.purchase[cold_rows]
    return split, x_warm, y_warm, x_cold, y_cold
