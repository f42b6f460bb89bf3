"""
Eigen cache - content-addressed storage of H0 eigen-decompositions.

Entries are keyed by SHA-256 of the H0 bytes (shape and dtype included),
written to a temporary file and renamed into place. Anything unreadable is
a miss; the cache never raises.
"""

import hashlib
import logging
import os
import tempfile
from typing import Optional

import numpy as np

from .linalg import SpectralDecomposition

logger = logging.getLogger(__name__)


def matrix_key(matrix: np.ndarray) -> str:
    data = np.ascontiguousarray(matrix)
    digest = hashlib.sha256()
    digest.update(f"{data.shape}|{data.dtype.str}|".encode())
    digest.update(data.tobytes())
    return digest.hexdigest()


class EigenCache:
    """Directory of <key>.npz files holding SpectralDecomposition arrays."""

    def __init__(self, directory: str):
        self.directory = directory
        self.hits = 0
        self.misses = 0

    def _path(self, key: str) -> str:
        return os.path.join(self.directory, f"{key}.npz")

    def get(self, matrix: np.ndarray) -> Optional[SpectralDecomposition]:
        key = matrix_key(matrix)
        path = self._path(key)
        if not os.path.exists(path):
            self.misses += 1
            logger.debug(f"Cache miss {key[:12]}")
            return None
        try:
            with np.load(path, allow_pickle=False) as stored:
                if str(stored['key']) != key:
                    raise ValueError("key mismatch")
                decomposition = SpectralDecomposition(
                    eigenvalues=stored['eigenvalues'],
                    eigenvectors=stored['eigenvectors'],
                    residuals=stored['residuals'],
                    matrix_norm=float(stored['matrix_norm']),
                    near_defective=stored['near_defective'],
                )
        except Exception as e:  # any unreadable entry is a miss
            self.misses += 1
            logger.warning(f"Cache entry {key[:12]} is corrupt ({e}); recomputing")
            return None
        self.hits += 1
        logger.info(f"Cache hit {key[:12]}: H0 eigensolve skipped")
        return decomposition

    def put(self, matrix: np.ndarray, decomposition: SpectralDecomposition) -> None:
        key = matrix_key(matrix)
        try:
            os.makedirs(self.directory, exist_ok=True)
            handle, temporary = tempfile.mkstemp(dir=self.directory, suffix='.tmp')
            with os.fdopen(handle, 'wb') as stream:
                np.savez(stream, key=np.array(key),
                         eigenvalues=decomposition.eigenvalues,
                         eigenvectors=decomposition.eigenvectors,
                         residuals=decomposition.residuals,
                         matrix_norm=np.array(decomposition.matrix_norm),
                         near_defective=decomposition.near_defective)
            os.replace(temporary, self._path(key))
            logger.debug(f"Cached decomposition {key[:12]}")
        except OSError as e:
            logger.warning(f"Could not write cache entry {key[:12]}: {e}")
