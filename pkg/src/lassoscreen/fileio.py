"""Matrix and vector files, plus block-streamed column access.

Two on-disk layouts: CSV with one feature per column, and a raw binary
format (magic "LSCR", u32 version, u64 n, u64 p, then column-major
little-endian float64). Vectors are the single-column special case.
StreamingColumns reads the binary layout in fixed-size column blocks so
screening passes never hold the whole dictionary in memory.
"""

from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor

import numpy as np

MAGIC = b"LSCR"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")
DEFAULT_BLOCK = 4096


def screening_threads():
    """Worker cap for block-parallel screening; set via LS_THREADS."""
    try:
        return max(1, int(os.environ.get("LS_THREADS", "1")))
    except ValueError:
        return 1


def write_matrix(path, matrix):
    """Write an (n, p) array; '.csv' suffix selects CSV, anything else binary."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if str(path).endswith(".csv"):
        np.savetxt(path, matrix, delimiter=",", fmt="%.17g")
        return
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, matrix.shape[0],
                              matrix.shape[1]))
        fh.write(np.asfortranarray(matrix).astype("<f8").tobytes(order="F"))


def read_matrix(path):
    """Read a matrix, sniffing binary vs CSV by the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        with open(path, "rb") as fh:
            magic, version, n, p = _HEADER.unpack(fh.read(_HEADER.size))
            if version != VERSION:
                raise ValueError(f"unsupported file version {version}")
            data = np.fromfile(fh, dtype="<f8", count=n * p)
        if data.size != n * p:
            raise ValueError("truncated matrix file")
        return data.reshape((n, p), order="F")
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))


def write_vector(path, vec):
    write_matrix(path, np.asarray(vec, dtype=np.float64).reshape(-1, 1))


def read_vector(path):
    m = read_matrix(path)
    if m.shape[1] != 1:
        if m.shape[0] == 1:  # tolerate a CSV row vector
            return m.ravel()
        raise ValueError(f"expected a single-column vector file, got shape "
                         f"{m.shape}")
    return m[:, 0]


def write_dual_solution(path, lam0, theta0):
    """Dual solution file: lambda0 followed by theta0, as one column."""
    write_vector(path, np.concatenate(([lam0], np.asarray(theta0).ravel())))


def read_dual_solution(path):
    v = read_vector(path)
    if v.size < 2:
        raise ValueError("dual solution file needs lambda0 plus theta0")
    return float(v[0]), v[1:]


class StreamingColumns:
    """Column access to a binary matrix file in fixed-size blocks.

    Implements the same column-source surface as Dictionary (n, p, norms,
    column, dot_columns, subdictionary), reading at most block_size
    features at a time. dot_columns fans blocks out over LS_THREADS
    workers; assembly is by block index, so results do not depend on the
    worker count.
    """

    def __init__(self, path, block_size=DEFAULT_BLOCK):
        if block_size < 1:
            raise ValueError("block_size must be positive")
        self.path = str(path)
        self.block_size = int(block_size)
        with open(self.path, "rb") as fh:
            magic, version, n, p = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != MAGIC:
            raise ValueError("streaming needs the binary matrix format")
        if version != VERSION:
            raise ValueError(f"unsupported file version {version}")
        self.n = int(n)
        self.p = int(p)
        norms = np.empty(self.p)
        for j0, block in self.iter_blocks():
            norms[j0:j0 + block.shape[1]] = np.linalg.norm(block, axis=0)
        if np.any(norms == 0.0):
            raise ValueError("dictionary file contains a zero feature")
        norms.flags.writeable = False
        self.norms = norms
        self.normalized = bool(np.all(np.abs(norms - 1.0) <= 1e-12))

    def _read_block(self, j0, width):
        offset = _HEADER.size + 8 * self.n * j0
        with open(self.path, "rb") as fh:
            fh.seek(offset)
            data = np.fromfile(fh, dtype="<f8", count=self.n * width)
        return data.reshape((self.n, width), order="F")

    def iter_blocks(self):
        for j0 in range(0, self.p, self.block_size):
            width = min(self.block_size, self.p - j0)
            yield j0, self._read_block(j0, width)

    def column(self, i):
        if not 0 <= i < self.p:
            raise IndexError("column index out of range")
        return self._read_block(i, 1)[:, 0]

    def dot_columns(self, v):
        v = np.asarray(v, dtype=np.float64).ravel()
        if v.shape[0] != self.n:
            raise ValueError("vector length mismatch")
        out = np.empty(self.p)
        starts = list(range(0, self.p, self.block_size))
        workers = screening_threads()

        def run(j0):
            width = min(self.block_size, self.p - j0)
            return j0, self._read_block(j0, width).T @ v

        if workers == 1 or len(starts) == 1:
            results = map(run, starts)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, starts))
        for j0, chunk in results:
            out[j0:j0 + chunk.shape[0]] = chunk
        return out

    def subdictionary(self, indices):
        from .core import Dictionary
        indices = np.asarray(indices, dtype=np.intp).ravel()
        cols = np.empty((self.n, indices.size), order="F")
        for k, i in enumerate(indices):
            cols[:, k] = self.column(int(i))
        return Dictionary(cols)
