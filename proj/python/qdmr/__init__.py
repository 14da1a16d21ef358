"""Lossless diffusion-MRI compression.

Volumes are numpy uint16 arrays shaped (nvol, nz, ny, nx); bvals/bvecs follow
the FSL convention. See `compress`, `decompress`, and `stats`.
"""

from ._core import QdmrError, compress, decompress, order_volumes, stats

__all__ = ["QdmrError", "compress", "decompress", "order_volumes", "stats"]
