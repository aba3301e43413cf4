"""Append-only binary cache of sampled information-matrix constraints.

Layout: an 8-byte magic string, a little-endian ``u32`` header length, a
canonical JSON header, then fixed-width records.  Each record stores the
sample counter (``u64``), a status byte (0 = usable, 1 = failed), the
resource split (three weights plus one squeeze and one displacement phase
per channel mode) and the row-major information matrix, all values as
binary64.  The header pins everything a counter's payload depends on —
channel point, photon budget, seed, sampler version — so resuming against a
file written under different settings is a hard error rather than a silent
mix of incompatible samples.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .channel import ChannelPoint
from .errors import CacheMismatch
from .sampler import ResourceSplit

__all__ = ["SampleCache", "cache_header"]

MAGIC = b"GMCACHE1"

#: bump when the record layout or header schema changes
FORMAT_VERSION = 1

#: bump when the sampler's counter-to-probe map changes
SAMPLER_VERSION = 1


def cache_header(channel: ChannelPoint, phi_star: float, seed: int) -> dict:
    """Header dict identifying one sampling run's cache-compatible settings."""
    return {
        "format_version": FORMAT_VERSION,
        "sampler_version": SAMPLER_VERSION,
        "seed": int(seed),
        "phi_star": float(phi_star),
        "channel": [
            [m.gamma, m.n_th, m.m_corr.real, m.m_corr.imag] for m in channel.modes
        ],
        "n_parameters": channel.n_parameters,
    }


class SampleCache:
    """Counter-keyed store of sampled constraints, persisted to one file.

    Satisfies the sampling loop's store protocol (``get``/``put``), so a
    rerun with the same header resumes from the cached records instead of
    recomputing them.  Usable as a context manager.
    """

    def __init__(self, path: str | Path, header: dict):
        self._path = Path(path)
        self._header = header
        self._n_modes = len(header["channel"])
        self._dim = int(header["n_parameters"])
        self._record = struct.Struct(
            f"<QB{3 + 2 * self._n_modes + self._dim * self._dim}d"
        )
        self._records: dict[int, tuple[int, NDArray[np.float64]]] = {}
        if self._path.exists() and self._path.stat().st_size > 0:
            self._load()
        else:
            header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
            with open(self._path, "wb") as fh:
                fh.write(MAGIC)
                fh.write(struct.pack("<I", len(header_bytes)))
                fh.write(header_bytes)
        self._fh = open(self._path, "ab")

    def _load(self) -> None:
        data = self._path.read_bytes()
        if data[: len(MAGIC)] != MAGIC:
            raise CacheMismatch(f"{self._path} is not a sample cache (bad magic)")
        offset = len(MAGIC)
        (header_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        try:
            stored = json.loads(data[offset : offset + header_len])
        except ValueError as err:
            raise CacheMismatch(f"{self._path} has a corrupt header") from err
        if stored != self._header:
            raise CacheMismatch(
                f"{self._path} was written under different settings: "
                f"stored {stored}, expected {self._header}"
            )
        offset += header_len
        size = self._record.size
        if (len(data) - offset) % size:
            raise CacheMismatch(f"{self._path} ends in a truncated record")
        for start in range(offset, len(data), size):
            values = self._record.unpack_from(data, start)
            counter, status = int(values[0]), int(values[1])
            matrix = np.array(values[2 + 3 + 2 * self._n_modes :], dtype=float)
            self._records[counter] = (status, matrix.reshape(self._dim, self._dim))

    def __len__(self) -> int:
        return len(self._records)

    def get(self, counter: int) -> tuple[int, NDArray[np.float64]] | None:
        record = self._records.get(counter)
        if record is None:
            return None
        status, matrix = record
        return status, matrix.copy()

    def put(
        self,
        counter: int,
        split: ResourceSplit,
        status: int,
        matrix: NDArray[np.float64],
    ) -> None:
        if counter in self._records:
            return
        payload = (
            list(split.weights)
            + list(split.squeeze_phases)
            + list(split.displacement_phases)
            + [float(x) for x in np.asarray(matrix, dtype=float).reshape(-1)]
        )
        self._fh.write(self._record.pack(counter, status, *payload))
        self._fh.flush()
        self._records[counter] = (int(status), np.asarray(matrix, dtype=float).copy())

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "SampleCache":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
