"""Reference segmenter adapter over Segment Anything checkpoints.

Speaks the fieldfuse job-directory protocol (manifest.json in, 16-bit label
PNGs plus done.json out) and keeps all geometry out: no georeferencing, no
vectorization, just mask generation and the protocol's smaller-wins
flattening of overlapping masks.
"""

from .config import AdapterConfig
from .flatten import flatten_masks

__version__ = "0.1.0"
