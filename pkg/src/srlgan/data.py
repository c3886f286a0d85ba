"""MovieLens ingestion: rating parsers, purchase matrices, warm/cold splits.

Supports the 100K layout (``u.data`` / ``u.user`` / ``u.item``, tab- and
pipe-separated) and the 1M layout (``ratings.dat`` / ``users.dat`` /
``movies.dat``, ``::``-separated).  Ratings are normalized to [0, 1] by
dividing with the rating ceiling C, so a purchase-behavior row lives in
{0, 1/C, ..., 1} with 0 meaning "not purchased".
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CACHE_VERSION = 1

# Declared dataset-wide constants (item counts include never-rated items).
DATASET_INFO = {
    "ml100k": {"users": 943, "items": 1682, "max_rating": 5},
    "ml1m": {"users": 6040, "items": 3952, "max_rating": 5},
}

ML100K_GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]

ML1M_GENRES = [
    "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical",
    "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]

# ML1M code books (see the dataset README).
ML1M_AGE_CODES = [1, 18, 25, 35, 45, 50, 56]
ML1M_OCCUPATION_CODES = list(range(21))


class ParseError(ValueError):
    """A raw MovieLens file failed to parse; message names the line."""


@dataclass(frozen=True)
class RatingTriple:
    user_id: int
    item_id: int
    rating: int
    timestamp: int


@dataclass
class UserMeta:
    user_id: int
    age: int            # raw age (100K) or age code (1M)
    gender: str         # "M" or "F"
    occupation: str     # occupation name (100K) or stringified code (1M)


@dataclass
class DatasetSplit:
    """Warm/cold partition of user ids, reproducible from the seed."""

    warm_ids: list[int]
    cold_ids: list[int]
    seed: int

    def __post_init__(self):
        overlap = set(self.warm_ids) & set(self.cold_ids)
        if overlap:
            raise ValueError(f"warm/cold sets overlap: {sorted(overlap)[:5]}")


def _read_lines(path, encoding="utf-8"):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"raw file not found: {path}")
    with open(path, encoding=encoding, errors="strict") as fh:
        return fh.read().splitlines()


def parse_ratings(path, fmt: str, max_rating: int = 5) -> list[RatingTriple]:
    """Parse a ratings file into triples; fmt is 'ml100k' or 'ml1m'."""
    sep = {"ml100k": "\t", "ml1m": "::"}[fmt]
    triples = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        parts = line.split(sep)
        if len(parts) != 4:
            raise ParseError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        try:
            user, item, rating, ts = (int(p) for p in parts)
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: non-integer field ({exc})") from exc
        if not 1 <= rating <= max_rating:
            raise ParseError(
                f"{path}:{lineno}: rating {rating} outside 1..{max_rating}"
            )
        triples.append(RatingTriple(user, item, rating, ts))
    return triples


def parse_users(path, fmt: str) -> dict[int, UserMeta]:
    """Parse user metadata (u.user or users.dat) keyed by user id."""
    users = {}
    if fmt == "ml100k":
        for lineno, line in enumerate(_read_lines(path), start=1):
            if not line.strip():
                continue
            parts = line.split("|")
            if len(parts) != 5:
                raise ParseError(f"{path}:{lineno}: expected 5 fields")
            uid, age, gender, occupation, _zip = parts
            users[int(uid)] = UserMeta(int(uid), int(age), gender, occupation)
    elif fmt == "ml1m":
        for lineno, line in enumerate(_read_lines(path), start=1):
            if not line.strip():
                continue
            parts = line.split("::")
            if len(parts) != 5:
                raise ParseError(f"{path}:{lineno}: expected 5 fields")
            uid, gender, age, occupation, _zip = parts
            users[int(uid)] = UserMeta(int(uid), int(age), gender, occupation)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return users


def parse_item_genres(path, fmt: str) -> dict[int, list[str]]:
    """Parse item genre tags (u.item or movies.dat) keyed by item id."""
    genres = {}
    if fmt == "ml100k":
        # u.item: id|title|release|video-release|url|19 genre flags
        for lineno, line in enumerate(_read_lines(path, encoding="latin-1"), start=1):
            if not line.strip():
                continue
            parts = line.split("|")
            if len(parts) != 5 + len(ML100K_GENRES):
                raise ParseError(f"{path}:{lineno}: expected {5 + len(ML100K_GENRES)} fields")
            item_id = int(parts[0])
            flags = parts[5:]
            genres[item_id] = [g for g, f in zip(ML100K_GENRES, flags) if f == "1"]
    elif fmt == "ml1m":
        for lineno, line in enumerate(_read_lines(path, encoding="latin-1"), start=1):
            if not line.strip():
                continue
            parts = line.split("::")
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 fields")
            item_id = int(parts[0])
            genres[item_id] = [g for g in parts[2].split("|") if g]
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return genres


def build_purchase_matrix(triples, m: int, max_rating: int = 5):
    """Normalized purchase-behavior rows, one per user seen in `triples`.

    Returns (user_ids, matrix) with matrix[k, i-1] = rating/C for user
    user_ids[k] and item i, 0 where unrated.  Duplicate (user, item) pairs
    keep the latest timestamp.
    """
    latest: dict[tuple[int, int], RatingTriple] = {}
    for t in triples:
        if t.item_id > m or t.item_id < 1:
            raise IndexError(f"item id {t.item_id} outside 1..{m}")
        key = (t.user_id, t.item_id)
        prev = latest.get(key)
        if prev is None or t.timestamp >= prev.timestamp:
            latest[key] = t

    user_ids = sorted({u for u, _ in latest})
    row_of = {u: k for k, u in enumerate(user_ids)}
    matrix = np.zeros((len(user_ids), m), dtype=np.float64)
    for (u, i), t in latest.items():
        matrix[row_of[u], i - 1] = t.rating / max_rating
    return user_ids, matrix


def split_users(user_ids, cold_fraction: float, seed: int) -> DatasetSplit:
    """Seeded warm/cold partition; cold count is round-half-up of fraction*N."""
    if not 0 <= cold_fraction < 1:
        raise ValueError(f"cold_fraction {cold_fraction} outside [0, 1)")
    ids = sorted(user_ids)
    n_cold = int(math.floor(cold_fraction * len(ids) + 0.5))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ids))
    cold = sorted(ids[k] for k in perm[:n_cold])
    warm = sorted(ids[k] for k in perm[n_cold:])
    return DatasetSplit(warm_ids=warm, cold_ids=cold, seed=seed)


def sparsity_percent(matrix) -> float:
    """Percentage of zero entries in a users x items purchase matrix."""
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        raise ValueError("empty purchase matrix")
    return 100.0 * float(np.count_nonzero(matrix == 0.0)) / matrix.size


# ---------------------------------------------------------------------------
# On-disk cache.  Layout: a .npz archive with a json header entry plus dense
# arrays.  Keys:
#   header   : json string {version, dataset, m, max_rating, d, schema_hash}
#   user_ids : int64 vector (sorted)
#   purchase : float64 (users x m)
#   tfidf    : float64 (users x d)
#   counts   : float64 (users x d) raw attribute counts (pre-idf weighting)
#   idf      : float64 (d,) smoothed inverse document frequencies
#   schema   : json string (attribute slot list, see features.AttributeSchema)
# ---------------------------------------------------------------------------


@dataclass
class DatasetCache:
    dataset: str
    max_rating: int
    user_ids: list[int]
    purchase: np.ndarray
    tfidf: np.ndarray
    schema_json: str
    counts: np.ndarray | None = None
    idf: np.ndarray | None = None
    version: int = CACHE_VERSION
    extra: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.purchase.shape[1]

    @property
    def d(self) -> int:
        return self.tfidf.shape[1]

    def schema_hash(self) -> str:
        return hashlib.sha256(self.schema_json.encode()).hexdigest()[:16]

    def row_of(self, user_id: int) -> int:
        return self.user_ids.index(user_id)


def save_cache(cache: DatasetCache, path) -> None:
    """Atomic write (temp file + rename) of the dataset cache."""
    path = Path(path)
    header = {
        "version": cache.version,
        "dataset": cache.dataset,
        "m": cache.m,
        "d": cache.d,
        "max_rating": cache.max_rating,
        "schema_hash": cache.schema_hash(),
        **cache.extra,
    }
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp.npz")
    os.close(fd)
    arrays = {
        "header": json.dumps(header, sort_keys=True),
        "user_ids": np.asarray(cache.user_ids, dtype=np.int64),
        "purchase": cache.purchase,
        "tfidf": cache.tfidf,
        "schema": cache.schema_json,
    }
    if cache.counts is not None:
        arrays["counts"] = cache.counts
    if cache.idf is not None:
        arrays["idf"] = cache.idf
    try:
        np.savez_compressed(tmp, **arrays)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def load_cache(path) -> DatasetCache:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        if header["version"] != CACHE_VERSION:
            raise ValueError(
                f"cache version {header['version']} != supported {CACHE_VERSION}"
            )
        return DatasetCache(
            dataset=header["dataset"],
            max_rating=header["max_rating"],
            user_ids=[int(u) for u in z["user_ids"]],
            purchase=np.asarray(z["purchase"], dtype=np.float64),
            tfidf=np.asarray(z["tfidf"], dtype=np.float64),
            schema_json=str(z["schema"]),
            counts=np.asarray(z["counts"], dtype=np.float64) if "counts" in z.files else None,
            idf=np.asarray(z["idf"], dtype=np.float64) if "idf" in z.files else None,
        )


def cache_content_hash(cache: DatasetCache) -> str:
    """Hash of the cache payload (zip containers embed timestamps, so the
    file bytes are not rerun-stable; the content is)."""
    h = hashlib.sha256()
    h.update(cache.schema_json.encode())
    h.update(np.asarray(cache.user_ids, dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(cache.purchase).tobytes())
    h.update(np.ascontiguousarray(cache.tfidf).tobytes())
    h.update(f"{cache.dataset}|{cache.max_rating}|{cache.version}".encode())
    return h.hexdigest()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
