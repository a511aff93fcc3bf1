"""Point-cloud extraction from RGBD records.

Pipeline per point: a dense relative depth prediction is aligned to the
sparse metric depth by least-squares scale/offset, the object is selected
from three segmentation proposals queried around the image center, the mask
is eroded, and the masked aligned depth is back-projected through the
pinhole intrinsics. The heavyweight depth/segmentation models live behind
small client interfaces with deterministic in-repo stubs and an HTTP+JSON
remote client.
"""

from __future__ import annotations

import base64
import io
import json
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Protocol

import numpy as np
import requests
from PIL import Image
from scipy import ndimage

from .errors import MultisenseError, ValidationError
from .geometry import Intrinsics
from .records import RgbdFrame


class DegenerateDepthError(MultisenseError):
    """The predicted depth has no variation; scale/offset are unidentifiable."""


class NoMaskError(MultisenseError):
    """No segmentation proposal is active at the probed center pixel."""


@dataclass
class DepthAlignment:
    a: float  # scale
    b: float  # offset, meters
    residual_rms: float

    def apply(self, pred: np.ndarray) -> np.ndarray:
        return self.a * pred + self.b


@dataclass
class MaskProposal:
    mask: np.ndarray  # HxW bool
    area: int

    @staticmethod
    def from_mask(mask: np.ndarray) -> "MaskProposal":
        mask = np.asarray(mask, dtype=bool)
        return MaskProposal(mask=mask, area=int(np.count_nonzero(mask)))


class DepthPredictorClient(Protocol):
    def predict(self, rgb: np.ndarray) -> np.ndarray: ...


class SegmenterClient(Protocol):
    def segment(self, rgb: np.ndarray, points: np.ndarray) -> list[MaskProposal]: ...


# --------------------------------------------------------------------------
# core operations


def align_depth(pred: np.ndarray, sparse: np.ndarray, valid_mask: np.ndarray) -> DepthAlignment:
    """Closed-form least squares for (a, b) minimizing sum((a*pred + b - sparse)^2)."""

    pred = np.asarray(pred, dtype=np.float64)
    sparse = np.asarray(sparse, dtype=np.float64)
    valid = np.asarray(valid_mask, dtype=bool)
    x = pred[valid]
    y = sparse[valid]
    if x.size < 2:
        raise ValidationError(f"need >= 2 valid pixels, got {x.size}")
    mean_x = float(np.mean(x))
    var_x = float(np.mean((x - mean_x) ** 2))
    if var_x == 0.0:
        raise DegenerateDepthError("all predicted depths equal; regression degenerate")
    mean_y = float(np.mean(y))
    a = float(np.mean((x - mean_x) * (y - mean_y)) / var_x)
    b = mean_y - a * mean_x
    residual = a * x + b - y
    return DepthAlignment(a=a, b=b, residual_rms=float(np.sqrt(np.mean(residual**2))))


def select_mask(proposals: list[MaskProposal], center: tuple[int, int]) -> np.ndarray:
    """Largest-area proposal active at the center pixel; ties keep the lowest index."""

    if len(proposals) != 3:
        raise ValidationError(f"expected exactly 3 proposals, got {len(proposals)}")
    row, col = center
    best = None
    best_area = -1
    for proposal in proposals:
        if proposal.mask[row, col] and proposal.area > best_area:
            best = proposal
            best_area = proposal.area
    if best is None:
        raise NoMaskError("no segmentation proposal active at the center pixel")
    return best.mask


def erode(mask: np.ndarray, kernel_px: int = 5) -> np.ndarray:
    """Binary erosion with a square structuring element."""

    if kernel_px < 1 or kernel_px % 2 == 0:
        raise ValueError("kernel must be odd and >= 1")
    mask = np.asarray(mask, dtype=bool)
    if kernel_px == 1:
        return mask.copy()
    structure = np.ones((kernel_px, kernel_px), dtype=bool)
    return ndimage.binary_erosion(mask, structure=structure)


def backproject(
    depth_m: np.ndarray,
    intr: Intrinsics,
    mask: np.ndarray | None = None,
    rgb: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Pinhole back-projection of masked valid-depth pixels, row-major order.

    Returns (points Nx3, colors Nx3 uint8 or None).
    """

    depth_m = np.asarray(depth_m, dtype=np.float64)
    if depth_m.shape != (intr.height, intr.width):
        raise ValidationError("depth dimensions do not match intrinsics")
    select = depth_m > 0
    if mask is not None:
        select &= np.asarray(mask, dtype=bool)
    vv, uu = np.nonzero(select)
    z = depth_m[vv, uu]
    x = (uu - intr.cx) * z / intr.fx
    y = (vv - intr.cy) * z / intr.fy
    points = np.stack([x, y, z], axis=1)
    colors = rgb[vv, uu] if rgb is not None else None
    return points, colors


def project(points: np.ndarray, intr: Intrinsics) -> np.ndarray:
    """Forward projection (u, v) of camera-frame points; round-trip partner."""

    points = np.asarray(points, dtype=np.float64)
    z = points[:, 2]
    u = points[:, 0] * intr.fx / z + intr.cx
    v = points[:, 1] * intr.fy / z + intr.cy
    return np.stack([u, v], axis=1)


#: Query disk around the center pixel: 3x3 lattice within a 5 px radius.
QUERY_LATTICE_OFFSETS = tuple(
    (dx, dy) for dy in (-3, 0, 3) for dx in (-3, 0, 3)
)


def center_query_points(intr: Intrinsics) -> np.ndarray:
    """(x, y) query points on a small disk around the principal pixel."""

    row, col = intr.principal_pixel()
    pts = [(col + dx, row + dy) for dx, dy in QUERY_LATTICE_OFFSETS]
    return np.array(
        [(x, y) for x, y in pts if 0 <= x < intr.width and 0 <= y < intr.height],
        dtype=np.int64,
    )


@dataclass
class PointCloudResult:
    points: np.ndarray  # Nx3 meters, camera frame
    colors: np.ndarray  # Nx3 uint8
    alignment: DepthAlignment
    mask: np.ndarray  # final eroded mask


def extract_pointcloud(
    rgbd: RgbdFrame,
    intr: Intrinsics,
    depth_client: DepthPredictorClient,
    seg_client: SegmenterClient,
    kernel_px: int = 5,
) -> PointCloudResult:
    """Full pipeline: predict, align, segment, erode, back-project.

    Degenerate regressions and center-inactive segmentations propagate as
    errors so callers can flag the point and skip the cloud.
    """

    sparse_m = rgbd.depth.astype(np.float64) / 1000.0
    valid = rgbd.depth > 0
    pred = np.asarray(depth_client.predict(rgbd.rgb), dtype=np.float64)
    if pred.shape != sparse_m.shape:
        raise ValidationError("depth prediction dimensions do not match the frame")
    alignment = align_depth(pred, sparse_m, valid)
    dense_m = alignment.apply(pred)

    proposals = seg_client.segment(rgbd.rgb, center_query_points(intr))
    for proposal in proposals:
        if proposal.mask.shape != sparse_m.shape:
            raise ValidationError("mask proposal dimensions do not match the frame")
    mask = select_mask(list(proposals), intr.principal_pixel())
    mask = erode(mask, kernel_px)

    points, colors = backproject(dense_m, intr, mask, rgbd.rgb)
    return PointCloudResult(points=points, colors=colors, alignment=alignment, mask=mask)


def write_ply(path: Path | str, points: np.ndarray, colors: np.ndarray) -> Path:
    """ASCII PLY with x,y,z and r,g,b per vertex, deterministic ordering."""

    path = Path(path)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(points)}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    for (x, y, z), (r, g, b) in zip(points, colors):
        lines.append(f"{x:.6f} {y:.6f} {z:.6f} {int(r)} {int(g)} {int(b)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# deterministic stub clients


class StubDepthPredictor:
    """Returns a fixed relative depth map (e.g. an affine warp of ground truth)."""

    def __init__(self, rel_map: np.ndarray):
        self.rel_map = np.asarray(rel_map, dtype=np.float64)

    def predict(self, rgb: np.ndarray) -> np.ndarray:
        if rgb.shape[:2] != self.rel_map.shape:
            raise ValidationError("stub prediction does not match input dimensions")
        return self.rel_map.copy()


class SparseGuidedDepthStub:
    """Builds a dense relative map from the record's own sparse depth.

    Invalid pixels are filled from their nearest valid neighbor, lightly
    smoothed, then affine-warped so the aligner has real work to do.
    """

    def __init__(self, depth_mm: np.ndarray, scale: float = 0.7, offset_m: float = 0.05):
        depth_m = np.asarray(depth_mm, dtype=np.float64) / 1000.0
        invalid = depth_m <= 0
        if invalid.all():
            filled = np.full_like(depth_m, 1.0)
        elif invalid.any():
            _, (ii, jj) = ndimage.distance_transform_edt(invalid, return_indices=True)
            filled = depth_m[ii, jj]
        else:
            filled = depth_m
        smooth = ndimage.uniform_filter(filled, size=3)
        self.rel_map = (smooth - offset_m) / scale

    def predict(self, rgb: np.ndarray) -> np.ndarray:
        if rgb.shape[:2] != self.rel_map.shape:
            raise ValidationError("stub prediction does not match input dimensions")
        return self.rel_map.copy()


class StubSegmenter:
    """Returns three fixed mask proposals."""

    def __init__(self, masks: list[np.ndarray]):
        if len(masks) != 3:
            raise ValidationError("stub segmenter needs exactly 3 masks")
        self.masks = [np.asarray(m, dtype=bool) for m in masks]

    def segment(self, rgb: np.ndarray, points: np.ndarray) -> list[MaskProposal]:
        return [MaskProposal.from_mask(m) for m in self.masks]


class ColorRegionSegmenter:
    """Three proposals by thresholding color distance to the queried region."""

    def __init__(self, thresholds: tuple[float, float, float] = (30.0, 60.0, 110.0)):
        self.thresholds = thresholds

    def segment(self, rgb: np.ndarray, points: np.ndarray) -> list[MaskProposal]:
        rgb = np.asarray(rgb, dtype=np.float64)
        samples = np.stack([rgb[y, x] for x, y in points])
        reference = np.median(samples, axis=0)
        dist = np.linalg.norm(rgb - reference[None, None, :], axis=-1)
        return [MaskProposal.from_mask(dist <= t) for t in self.thresholds]


# --------------------------------------------------------------------------
# HTTP remote clients and the in-repo stub model server


def _png_b64(rgb: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _png_from_b64(data: str) -> np.ndarray:
    with Image.open(io.BytesIO(base64.b64decode(data))) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def rle_encode(mask: np.ndarray) -> list[int]:
    """Row-major run lengths, first run counting False pixels."""

    flat = np.asarray(mask, dtype=bool).ravel()
    runs: list[int] = []
    value = False
    count = 0
    for bit in flat:
        if bit == value:
            count += 1
        else:
            runs.append(count)
            value = bit
            count = 1
    runs.append(count)
    return runs


def rle_decode(runs: list[int], height: int, width: int) -> np.ndarray:
    flat = np.zeros(height * width, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    if pos != height * width:
        raise ValidationError(f"rle length {pos} does not cover {height * width} pixels")
    return flat.reshape(height, width)


class RemoteDepthPredictor:
    """POST /predict_depth {png} -> {width, height, depth (row-major floats)}."""

    def __init__(self, base_url: str, timeout_s: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s

    def predict(self, rgb: np.ndarray) -> np.ndarray:
        resp = requests.post(
            f"{self.base_url}/predict_depth",
            json={"png": _png_b64(rgb)},
            timeout=self.timeout_s,
        )
        resp.raise_for_status()
        payload = resp.json()
        return np.array(payload["depth"], dtype=np.float64).reshape(
            payload["height"], payload["width"]
        )


class RemoteSegmenter:
    """POST /segment {png, points} -> {masks: [{rle, width, height}] x3}."""

    def __init__(self, base_url: str, timeout_s: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s

    def segment(self, rgb: np.ndarray, points: np.ndarray) -> list[MaskProposal]:
        resp = requests.post(
            f"{self.base_url}/segment",
            json={"png": _png_b64(rgb), "points": np.asarray(points).tolist()},
            timeout=self.timeout_s,
        )
        resp.raise_for_status()
        masks = resp.json()["masks"]
        if len(masks) != 3:
            raise ValidationError(f"remote segmenter returned {len(masks)} masks")
        return [
            MaskProposal.from_mask(rle_decode(m["rle"], m["height"], m["width"])) for m in masks
        ]


class StubModelServer:
    """Local HTTP server speaking the remote-model contract, backed by stubs.

    Lets the postprocess pipeline exercise the real wire path without any
    model weights.
    """

    def __init__(self, depth_client: DepthPredictorClient, seg_client: SegmenterClient, port: int = 0):
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length))
                rgb = _png_from_b64(payload["png"])
                if self.path == "/predict_depth":
                    depth = outer.depth_client.predict(rgb)
                    body = {
                        "width": depth.shape[1],
                        "height": depth.shape[0],
                        "depth": depth.ravel().tolist(),
                    }
                elif self.path == "/segment":
                    points = np.array(payload["points"], dtype=np.int64)
                    proposals = outer.seg_client.segment(rgb, points)
                    body = {
                        "masks": [
                            {
                                "rle": rle_encode(p.mask),
                                "width": p.mask.shape[1],
                                "height": p.mask.shape[0],
                            }
                            for p in proposals
                        ]
                    }
                else:
                    self.send_error(404)
                    return
                data = json.dumps(body).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self.depth_client = depth_client
        self.seg_client = seg_client
        self._server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self._server.server_port}"

    def __enter__(self) -> "StubModelServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()
