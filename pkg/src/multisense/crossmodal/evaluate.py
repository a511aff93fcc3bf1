"""Cross-sensory retrieval and contact-localization protocols.

Retrieval: one point is sampled per object (seeded); a query embedding must
rank its own object's target embedding within the top k of the N-object
pool, by cosine similarity. Localization: within one object, a query from
one point must rank the matching point first among all M points. Both
average over several samplings; ties break by lowest (object_id,
point_index) so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from .embeddings import EmbeddingTable, Modality


@dataclass
class EvalConfig:
    n_objects: int | None = None  # None: every object in the table
    m_points: int = 6
    top_k: tuple[int, ...] = (1, 5)
    n_samplings: int = 5
    temperature: float = 0.07
    seed: int = 0

    def validate(self) -> None:
        if any(k < 1 for k in self.top_k):
            raise ValidationError("top_k entries must be >= 1")
        if self.n_samplings < 1:
            raise ValidationError("n_samplings must be >= 1")


@dataclass
class RetrievalResult:
    query: Modality
    target: Modality
    accuracies: dict[int, float]  # top-k -> mean accuracy
    per_sampling: list[dict[int, float]] = field(default_factory=list)


@dataclass
class LocalizationResult:
    query: Modality
    target: Modality
    accuracy: float
    skipped_objects: list[str] = field(default_factory=list)


def _unit(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValidationError("zero embedding cannot be ranked by cosine similarity")
    return rows / norms


def _common_objects(table: EmbeddingTable, query_m: Modality, target_m: Modality) -> list[str]:
    q_ids = set(table.object_ids(query_m))
    t_ids = set(table.object_ids(target_m))
    gaps = sorted(q_ids ^ t_ids)
    if gaps:
        raise ValidationError(
            f"objects missing one of {query_m.value}/{target_m.value}: {gaps[:10]}"
        )
    objects = sorted(q_ids & t_ids)
    if not objects:
        raise ValidationError(f"no objects with both {query_m.value} and {target_m.value}")
    return objects


def retrieval_eval(
    table: EmbeddingTable,
    query_m: Modality,
    target_m: Modality,
    cfg: EvalConfig | None = None,
) -> RetrievalResult:
    """Top-k retrieval accuracy over an N-object pool, averaged over samplings."""

    cfg = cfg or EvalConfig()
    cfg.validate()
    objects = _common_objects(table, query_m, target_m)
    if cfg.n_objects is not None:
        if cfg.n_objects > len(objects):
            raise ValidationError(
                f"n_objects={cfg.n_objects} exceeds {len(objects)} objects with both modalities"
            )
        objects = objects[: cfg.n_objects]

    gaps = []
    points_per_object = {}
    for obj in objects:
        shared = sorted(
            set(table.point_indices(query_m, obj)) & set(table.point_indices(target_m, obj))
        )
        if not shared:
            gaps.append(obj)
        points_per_object[obj] = shared
    if gaps:
        raise ValidationError(f"objects missing vectors for both modalities: {gaps[:10]}")

    if max(cfg.top_k) > len(objects):
        raise ValidationError(f"top_k {max(cfg.top_k)} exceeds pool size {len(objects)}")

    per_sampling: list[dict[int, float]] = []
    for s in range(cfg.n_samplings):
        rng = np.random.default_rng(cfg.seed + s)
        chosen = {obj: points_per_object[obj][rng.integers(len(points_per_object[obj]))] for obj in objects}
        queries = _unit(np.stack([table.get(query_m, obj, chosen[obj]) for obj in objects]))
        targets = _unit(np.stack([table.get(target_m, obj, chosen[obj]) for obj in objects]))
        sims = queries @ targets.T
        hits = {k: 0 for k in cfg.top_k}
        for i, obj in enumerate(objects):
            # rank with deterministic ties: higher sim first, then table order
            order = np.lexsort((np.arange(len(objects)), -sims[i]))
            rank = int(np.nonzero(order == i)[0][0]) + 1
            for k in cfg.top_k:
                if rank <= k:
                    hits[k] += 1
        per_sampling.append({k: hits[k] / len(objects) for k in cfg.top_k})

    accuracies = {
        k: float(np.mean([s[k] for s in per_sampling])) for k in cfg.top_k
    }
    return RetrievalResult(query=query_m, target=target_m, accuracies=accuracies, per_sampling=per_sampling)


def localization_eval(
    table: EmbeddingTable,
    query_m: Modality,
    target_m: Modality,
    cfg: EvalConfig | None = None,
) -> LocalizationResult:
    """Top-1 accuracy at telling apart the M points of each object."""

    cfg = cfg or EvalConfig()
    cfg.validate()
    objects = _common_objects(table, query_m, target_m)
    if cfg.n_objects is not None:
        objects = objects[: cfg.n_objects]

    skipped: list[str] = []
    correct = 0
    total = 0
    for obj in objects:
        q_points = table.point_indices(query_m, obj)
        t_points = table.point_indices(target_m, obj)
        points = sorted(set(q_points) & set(t_points))
        if len(points) < cfg.m_points:
            skipped.append(obj)
            continue
        points = points[: cfg.m_points]
        targets = _unit(np.stack([table.get(target_m, obj, p) for p in points]))
        for i, p in enumerate(points):
            query = table.get(query_m, obj, p)
            query = query / np.linalg.norm(query)
            sims = targets @ query
            order = np.lexsort((np.arange(len(points)), -sims))
            if int(order[0]) == i:
                correct += 1
            total += 1
    if total == 0:
        raise ValidationError("no object has enough points for localization")
    return LocalizationResult(
        query=query_m, target=target_m, accuracy=correct / total, skipped_objects=skipped
    )


# --------------------------------------------------------------------------
# reporting


def ordered_pairs(modalities: list[Modality]) -> list[tuple[Modality, Modality]]:
    return [(q, t) for q in modalities for t in modalities if q is not t]


def format_grid(
    results: dict[tuple[Modality, Modality], float], title: str, percent: bool = True
) -> str:
    """Plain-text query-by-target grid with a trailing average column."""

    queries = sorted({q for q, _ in results}, key=lambda m: m.value)
    targets = sorted({t for _, t in results}, key=lambda m: m.value)
    scale = 100.0 if percent else 1.0
    width = max(12, max(len(m.value) for m in targets) + 2)
    lines = [title]
    header = "query".ljust(width) + "".join(t.value.rjust(width) for t in targets) + "avg".rjust(width)
    lines.append(header)
    all_values = []
    for q in queries:
        row = [q.value.ljust(width)]
        row_values = []
        for t in targets:
            if (q, t) in results:
                value = results[(q, t)] * scale
                row_values.append(value)
                row.append(f"{value:.1f}".rjust(width))
            else:
                row.append("-".rjust(width))
        all_values.extend(row_values)
        row.append(f"{np.mean(row_values):.1f}".rjust(width) if row_values else "-".rjust(width))
        lines.append("".join(row))
    if all_values:
        lines.append("average".ljust(width) + f"{np.mean(all_values):.1f}".rjust(width * (len(targets) + 1)))
    return "\n".join(lines)


def results_to_json(results: dict[tuple[Modality, Modality], dict[int, float]]) -> dict:
    payload = {}
    for (q, t), accs in results.items():
        payload[f"{q.value}->{t.value}"] = {f"top{k}": v for k, v in accs.items()}
    return payload
