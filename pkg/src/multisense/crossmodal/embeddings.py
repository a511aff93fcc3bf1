"""Embedding tables keyed by (modality, object, point) and their file format.

On disk a table is a flat binary of float32 vectors plus a JSON index:
``<prefix>.bin`` holds the vectors back to back; ``<prefix>.json`` records
the dimension and the (modality, object_id, point_index) of each row.
"""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from ..records import FORMAT_VERSION


class Modality(str, Enum):
    RGB = "rgb"
    DEPTH = "depth"
    TACTILE = "tactile"
    AUDIO = "audio"
    POINT_CLOUD = "pointcloud"


Key = tuple[Modality, str, int]


class EmbeddingTable:
    """Float vectors of a common dimension indexed by (modality, object, point)."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValidationError("embedding dimension must be >= 1")
        self.dim = dim
        self._vectors: dict[Key, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, key: Key) -> bool:
        return key in self._vectors

    def put(self, modality: Modality, object_id: str, point_index: int, vector) -> None:
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise ValidationError(f"vector shape {vec.shape} != ({self.dim},)")
        self._vectors[(modality, object_id, point_index)] = vec

    def get(self, modality: Modality, object_id: str, point_index: int) -> np.ndarray:
        return self._vectors[(modality, object_id, point_index)]

    def keys(self):
        return self._vectors.keys()

    def modalities(self) -> list[Modality]:
        return sorted({k[0] for k in self._vectors}, key=lambda m: m.value)

    def object_ids(self, modality: Modality | None = None) -> list[str]:
        return sorted(
            {k[1] for k in self._vectors if modality is None or k[0] == modality}
        )

    def point_indices(self, modality: Modality, object_id: str) -> list[int]:
        return sorted(k[2] for k in self._vectors if k[0] == modality and k[1] == object_id)

    def normalized(self) -> "EmbeddingTable":
        """Copy with all vectors scaled to unit L2 norm."""

        out = EmbeddingTable(self.dim)
        for key, vec in self._vectors.items():
            norm = np.linalg.norm(vec)
            if norm == 0:
                raise ValidationError(f"zero vector at {key} cannot be normalized")
            out._vectors[key] = vec / norm
        return out

    def save(self, prefix: Path | str) -> tuple[Path, Path]:
        prefix = Path(prefix)
        keys = sorted(self._vectors.keys(), key=lambda k: (k[0].value, k[1], k[2]))
        data = np.stack([self._vectors[k] for k in keys]).astype(np.float32) if keys else np.zeros((0, self.dim), np.float32)
        bin_path = prefix.with_suffix(".bin")
        idx_path = prefix.with_suffix(".json")
        data.tofile(bin_path)
        idx_path.write_text(
            json.dumps(
                {
                    "format_version": FORMAT_VERSION,
                    "dim": self.dim,
                    "dtype": "float32",
                    "entries": [
                        {"modality": k[0].value, "object_id": k[1], "point_index": k[2]}
                        for k in keys
                    ],
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        return bin_path, idx_path

    @staticmethod
    def load(prefix: Path | str) -> "EmbeddingTable":
        prefix = Path(prefix)
        index = json.loads(prefix.with_suffix(".json").read_text(encoding="utf-8"))
        dim = int(index["dim"])
        table = EmbeddingTable(dim)
        data = np.fromfile(prefix.with_suffix(".bin"), dtype=np.float32)
        entries = index["entries"]
        if data.size != len(entries) * dim:
            raise ValidationError(
                f"binary holds {data.size} floats, index expects {len(entries) * dim}"
            )
        data = data.reshape(len(entries), dim).astype(np.float64)
        for row, entry in zip(data, entries):
            table.put(Modality(entry["modality"]), entry["object_id"], int(entry["point_index"]), row)
        return table
