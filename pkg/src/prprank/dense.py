"""Exact cosine nearest-neighbor search over dense embedding stores.

Vectors are L2-normalized once at load time, so cosine similarity reduces
to a single matrix-vector product. Search is exact (full scan); stores here
are small enough (training query collections) that approximate indexes
would only add nondeterminism.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import httpx
import numpy as np

from .errors import BackendError, ParseError, ValidationError
from .types import ScoredHit


@dataclass(frozen=True)
class EmbeddingStore:
    """Immutable id-aligned matrix of unit-normalized embedding rows."""

    ids: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2:
            raise ValidationError(
                f"embedding matrix must be 2-D, got shape {self.matrix.shape}"
            )
        if len(self.ids) != self.matrix.shape[0]:
            raise ValidationError(
                f"{len(self.ids)} ids but {self.matrix.shape[0]} matrix rows"
            )
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("duplicate ids in embedding store")
        object.__setattr__(self, "_row", {i: r for r, i in enumerate(self.ids)})

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._row

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def vector(self, item_id: str) -> np.ndarray:
        try:
            return self.matrix[self._row[item_id]]
        except KeyError:
            raise KeyError(f"no embedding for id {item_id!r}") from None

    @classmethod
    def from_vectors(
        cls, pairs: Iterable[tuple[str, Sequence[float]]]
    ) -> "EmbeddingStore":
        ids: list[str] = []
        rows: list[np.ndarray] = []
        dim: int | None = None
        for item_id, vec in pairs:
            v = np.asarray(vec, dtype=np.float64)
            if v.ndim != 1:
                raise ValidationError(f"vector for {item_id!r} is not 1-D")
            if dim is None:
                dim = v.shape[0]
                if dim == 0:
                    raise ValidationError(f"vector for {item_id!r} is empty")
            elif v.shape[0] != dim:
                raise ValidationError(
                    f"vector for {item_id!r} has dimension {v.shape[0]}, expected {dim}"
                )
            ids.append(item_id)
            rows.append(v)
        if not ids:
            raise ValidationError("embedding store requires at least one vector")
        matrix = np.vstack(rows)
        return cls(ids=tuple(ids), matrix=_normalize_rows(matrix, ids))


def _normalize_rows(matrix: np.ndarray, ids: Sequence[str]) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValidationError(f"zero vector for id {ids[int(zero[0])]!r}")
    return matrix / norms[:, None]


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Read a JSONL file of ``{"id": ..., "vector": [...]}`` rows."""
    pairs: list[tuple[str, Sequence[float]]] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(path, line_no, f"invalid JSON: {e.msg}") from None
            if not isinstance(obj, dict) or "id" not in obj or "vector" not in obj:
                raise ParseError(path, line_no, 'expected {"id": ..., "vector": [...]}')
            item_id = str(obj["id"])
            if item_id in seen:
                raise ValidationError(f"{path}:{line_no}: duplicate id {item_id!r}")
            seen.add(item_id)
            vec = obj["vector"]
            if not isinstance(vec, list) or not all(
                isinstance(x, (int, float)) for x in vec
            ):
                raise ParseError(path, line_no, '"vector" must be a number array')
            pairs.append((item_id, vec))
    if not pairs:
        raise ValidationError(f"{path}: no embeddings found")
    return EmbeddingStore.from_vectors(pairs)


def top_k_cosine(
    store: EmbeddingStore,
    probe: Sequence[float] | np.ndarray,
    k: int,
    *,
    exclude: frozenset[str] | set[str] | None = None,
) -> list[ScoredHit]:
    """Exact top-k by cosine similarity, ties broken by id ascending."""
    if k < 0:
        raise ValidationError(f"k must be non-negative, got {k}")
    v = np.asarray(probe, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != store.dim:
        raise ValidationError(
            f"probe has shape {v.shape}, store dimension is {store.dim}"
        )
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValidationError("probe vector is all zeros")
    v = v / norm
    scores = store.matrix @ v
    ids_array = np.array(store.ids)
    # lexsort's last key is primary: descending score, then id ascending.
    order = np.lexsort((ids_array, -scores))
    hits: list[ScoredHit] = []
    excluded = exclude or frozenset()
    for row in order:
        item_id = str(ids_array[row])
        if item_id in excluded:
            continue
        hits.append(ScoredHit(item_id=item_id, score=float(scores[row]), rank=len(hits) + 1))
        if len(hits) == k:
            break
    return hits


def fetch_embedding(
    endpoint: str,
    text: str,
    *,
    expected_dim: int | None = None,
    timeout: float = 30.0,
    max_retries: int = 3,
    backoff_base: float = 0.1,
    client: httpx.Client | None = None,
) -> np.ndarray:
    """POST a text to an embedding endpoint and return the unit vector.

    The endpoint contract is ``{"input": text} -> {"embedding": [...]}``.
    Transport errors and 5xx responses are retried with exponential
    backoff; 4xx responses fail immediately.
    """
    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=timeout)
    last_status: int | None = None
    try:
        for attempt in range(max_retries + 1):
            if attempt:
                time.sleep(backoff_base * (2 ** (attempt - 1)))
            try:
                resp = client.post(endpoint, json={"input": text}, timeout=timeout)
            except httpx.TransportError as e:
                if attempt == max_retries:
                    raise BackendError(
                        f"embedding request failed: {e}", attempts=attempt + 1
                    ) from e
                continue
            last_status = resp.status_code
            if resp.status_code >= 500:
                if attempt == max_retries:
                    break
                continue
            if resp.status_code != 200:
                raise BackendError(
                    f"embedding endpoint returned {resp.status_code}",
                    attempts=attempt + 1,
                    last_status=resp.status_code,
                )
            body = resp.json()
            vec = body.get("embedding")
            if not isinstance(vec, list) or not vec:
                raise BackendError(
                    "embedding response missing 'embedding' array",
                    attempts=attempt + 1,
                    last_status=resp.status_code,
                )
            v = np.asarray(vec, dtype=np.float64)
            if expected_dim is not None and v.shape[0] != expected_dim:
                raise ValidationError(
                    f"embedding has dimension {v.shape[0]}, expected {expected_dim}"
                )
            norm = np.linalg.norm(v)
            if norm == 0.0:
                raise ValidationError("embedding endpoint returned a zero vector")
            return v / norm
        raise BackendError(
            "embedding endpoint kept failing",
            attempts=max_retries + 1,
            last_status=last_status,
        )
    finally:
        if own_client:
            client.close()
