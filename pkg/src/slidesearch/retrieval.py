"""Shared retrieval result types and the ranked-results CSV format."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

from .errors import DataError

RESULTS_COLUMNS = ("query_slide", "rank", "neighbor_slide", "distance")


class Neighbor(NamedTuple):
    slide_id: str
    distance: float


@dataclass(frozen=True)
class RetrievalResult:
    """Ranked neighbors for one query slide."""

    query_slide_id: str
    model_name: str
    neighbors: tuple[Neighbor, ...]
    shortfall: bool = False

    def __post_init__(self):
        for a, b in zip(self.neighbors, self.neighbors[1:]):
            if b.distance < a.distance:
                raise ValueError(
                    f"neighbors of {self.query_slide_id} not sorted by "
                    f"distance: {a} before {b}")


def rank_candidates(candidates: Iterable[tuple[str, float]], n: int,
                    query_slide_id: str, model_name: str) -> RetrievalResult:
    """Order candidates by (distance asc, slide_id asc) and keep the first n.

    Flags a shortfall when fewer than n candidates exist.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    ordered = sorted(candidates, key=lambda c: (c[1], c[0]))
    top = tuple(Neighbor(sid, float(d)) for sid, d in ordered[:n])
    return RetrievalResult(
        query_slide_id=query_slide_id,
        model_name=model_name,
        neighbors=top,
        shortfall=len(top) < n,
    )


def write_results(path, results: Iterable[RetrievalResult],
                  include_model: bool = False) -> None:
    path = Path(path)
    header = list(RESULTS_COLUMNS) + (["model"] if include_model else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for res in results:
            for rank, nb in enumerate(res.neighbors, start=1):
                row = [res.query_slide_id, rank, nb.slide_id,
                       repr(float(nb.distance))]
                if include_model:
                    row.append(res.model_name)
                writer.writerow(row)


def read_results(path) -> list[RetrievalResult]:
    """Read a ranked-results CSV back into RetrievalResult objects.

    The optional trailing ``model`` column is honoured; rank order in the
    file is trusted but validated to be 1..k per query.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"results file not found: {path}")
    grouped: dict[tuple[str, str], list[Neighbor]] = {}
    order: list[tuple[str, str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:4]) != RESULTS_COLUMNS:
            raise DataError(f"unexpected results header in {path}: {header}")
        has_model = len(header) == 5 and header[4] == "model"
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path} line {line_no}: expected {len(header)} fields")
            query, rank_s, neighbor, dist_s = row[:4]
            model = row[4] if has_model else ""
            key = (query, model)
            if key not in grouped:
                grouped[key] = []
                order.append(key)
            bucket = grouped[key]
            if int(rank_s) != len(bucket) + 1:
                raise DataError(
                    f"{path} line {line_no}: rank {rank_s} out of sequence "
                    f"for query {query!r}")
            bucket.append(Neighbor(neighbor, float(dist_s)))
    return [RetrievalResult(query_slide_id=q, model_name=m,
                            neighbors=tuple(grouped[(q, m)]))
            for q, m in order]
