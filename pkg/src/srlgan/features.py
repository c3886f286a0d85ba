"""TF-IDF user attribute vectors from demographics and genre preferences.

Each user gets a d-dimensional nonnegative vector: one-hot demographic
slots (age, gender, occupation) followed by one genre slot per dataset
genre, counting how many of the user's rated movies carry that genre.
Counts are weighted by a smoothed inverse document frequency computed
across all users, then multiplied elementwise (no further normalization).

Target dimensionalities: 103 for ML100K (61 observed ages + 2 genders +
21 occupations + 19 genres) and 48 for ML1M (7 age codes + 2 genders +
21 occupation codes + 18 genres).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import (
    ML100K_GENRES,
    ML1M_AGE_CODES,
    ML1M_GENRES,
    ML1M_OCCUPATION_CODES,
    UserMeta,
)


class SchemaError(ValueError):
    """User metadata does not fit the attribute schema."""


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attribute slots; slot order defines the vector layout."""

    dataset: str
    age_values: tuple          # observed ages (100K) or age codes (1M)
    gender_values: tuple       # ("M", "F")
    occupation_values: tuple   # names (100K) or stringified codes (1M)
    genre_values: tuple

    @property
    def d(self) -> int:
        return (len(self.age_values) + len(self.gender_values)
                + len(self.occupation_values) + len(self.genre_values))

    def slot_names(self) -> list[str]:
        return ([f"age={a}" for a in self.age_values]
                + [f"gender={g}" for g in self.gender_values]
                + [f"occupation={o}" for o in self.occupation_values]
                + [f"genre={g}" for g in self.genre_values])

    def slot_index(self) -> dict[str, int]:
        return {name: k for k, name in enumerate(self.slot_names())}

    def to_json(self) -> str:
        return json.dumps(
            {
                "dataset": self.dataset,
                "age_values": list(self.age_values),
                "gender_values": list(self.gender_values),
                "occupation_values": list(self.occupation_values),
                "genre_values": list(self.genre_values),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "AttributeSchema":
        obj = json.loads(text)
        return cls(
            dataset=obj["dataset"],
            age_values=tuple(obj["age_values"]),
            gender_values=tuple(obj["gender_values"]),
            occupation_values=tuple(obj["occupation_values"]),
            genre_values=tuple(obj["genre_values"]),
        )


def ml100k_schema(users: dict[int, UserMeta],
                  occupations: list[str]) -> AttributeSchema:
    """ML100K schema; age slots are the distinct ages observed in u.user
    (61 on the real data, giving d = 61 + 2 + 21 + 19 = 103)."""
    ages = tuple(sorted({u.age for u in users.values()}))
    return AttributeSchema(
        dataset="ml100k",
        age_values=ages,
        gender_values=("M", "F"),
        occupation_values=tuple(occupations),
        genre_values=tuple(ML100K_GENRES),
    )


def ml1m_schema() -> AttributeSchema:
    """ML1M schema from the dataset code books; d = 7 + 2 + 21 + 18 = 48."""
    return AttributeSchema(
        dataset="ml1m",
        age_values=tuple(ML1M_AGE_CODES),
        gender_values=("M", "F"),
        occupation_values=tuple(str(c) for c in ML1M_OCCUPATION_CODES),
        genre_values=tuple(ML1M_GENRES),
    )


def term_frequency(user: UserMeta, rated_item_ids, item_genres,
                   schema: AttributeSchema) -> np.ndarray:
    """Per-user attribute counts: one-hot demographics plus genre counts
    over the user's rated movies (every rating counts, multi-genre movies
    count once per carried genre)."""
    index = schema.slot_index()
    counts = np.zeros(schema.d, dtype=np.float64)

    for slot in (f"age={user.age}", f"gender={user.gender}",
                 f"occupation={user.occupation}"):
        if slot not in index:
            raise SchemaError(f"user {user.user_id}: no schema slot {slot!r}")
        counts[index[slot]] = 1.0

    for item_id in rated_item_ids:
        for genre in item_genres.get(item_id, ()):
            slot = f"genre={genre}"
            if slot not in index:
                raise SchemaError(f"item {item_id}: unknown genre {genre!r}")
            counts[index[slot]] += 1.0
    return counts


def inverse_document_frequency(count_matrix) -> np.ndarray:
    """Smoothed idf per slot: ln((1+N)/(1+df)) + 1, df = users with a
    nonzero count in that slot."""
    counts = np.asarray(count_matrix, dtype=np.float64)
    if counts.ndim != 2 or counts.shape[0] < 1:
        raise ValueError("need a nonempty users x slots count matrix")
    n_users = counts.shape[0]
    df = np.count_nonzero(counts > 0, axis=0)
    return np.log((1.0 + n_users) / (1.0 + df)) + 1.0


def tfidf_vector(counts, idf) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    idf = np.asarray(idf, dtype=np.float64)
    if counts.shape != idf.shape:
        raise ValueError(f"shape mismatch: {counts.shape} vs {idf.shape}")
    return counts * idf


def build_feature_matrix(users: dict[int, UserMeta], user_ids,
                         rated_items_by_user, item_genres,
                         schema: AttributeSchema) -> np.ndarray:
    """TF-IDF matrix with one row per id in `user_ids` (row order given by
    the caller so it can line up with the purchase matrix)."""
    counts = np.stack([
        term_frequency(users[uid], rated_items_by_user.get(uid, ()),
                       item_genres, schema)
        for uid in user_ids
    ])
    idf = inverse_document_frequency(counts)
    return counts * idf
