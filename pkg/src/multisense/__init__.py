"""Multi-sensory capture stack: records, simulated rig, capture engines,
audio DSP, point-cloud extraction, cross-modal evaluation, and the daemon."""

__version__ = "0.1.0"

from . import audio, capture, cloud, crossmodal, geometry, records, sim, store
from .kernels import BACKEND as KERNEL_BACKEND

__all__ = [
    "KERNEL_BACKEND",
    "audio",
    "capture",
    "cloud",
    "crossmodal",
    "geometry",
    "records",
    "sim",
    "store",
]
