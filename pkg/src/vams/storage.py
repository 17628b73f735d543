"""On-disk entry storage: append-only length-prefixed file plus offset index.

The entries file is a sequence of (u32 length, bytes) records; the index
file holds one u64 offset per entry for O(1) random access. Appends go
to both files before the entry is acknowledged. A torn final record
(crash mid-write) is detected on open and truncated away.
"""

from __future__ import annotations

import os
import struct


class MemoryEntryStore:
    def __init__(self) -> None:
        self._entries: list[bytes] = []

    def __len__(self) -> int:
        return len(self._entries)

    def append(self, payload: bytes) -> int:
        self._entries.append(payload)
        return len(self._entries) - 1

    def get(self, index: int) -> bytes:
        return self._entries[index]

    def close(self) -> None:
        pass


class FileEntryStore:
    def __init__(self, path_base: str, fsync: bool = False):
        self._data_path = path_base + ".log"
        self._index_path = path_base + ".idx"
        self._fsync = fsync
        self._offsets: list[int] = []
        self._open()

    def _open(self) -> None:
        for p in (self._data_path, self._index_path):
            if not os.path.exists(p):
                open(p, "ab").close()
        with open(self._index_path, "rb") as f:
            raw = f.read()
        self._offsets = [
            struct.unpack(">Q", raw[i : i + 8])[0] for i in range(0, len(raw) - len(raw) % 8, 8)
        ]
        self._data = open(self._data_path, "r+b")
        self._index = open(self._index_path, "r+b")
        self._recover()
        self._data.seek(0, os.SEEK_END)
        self._index.seek(0, os.SEEK_END)

    def _recover(self) -> None:
        """Drop a torn trailing record so the store ends on a clean boundary."""
        data_len = os.path.getsize(self._data_path)
        good = 0
        for n, off in enumerate(self._offsets):
            if off + 4 > data_len:
                break
            self._data.seek(off)
            (length,) = struct.unpack(">I", self._data.read(4))
            if off + 4 + length > data_len:
                break
            good = n + 1
        if good < len(self._offsets):
            self._offsets = self._offsets[:good]
            self._index.truncate(good * 8)
        end = (
            self._offsets[-1] + 4 + self._record_len(self._offsets[-1]) if self._offsets else 0
        )
        self._data.truncate(end)

    def _record_len(self, offset: int) -> int:
        self._data.seek(offset)
        (length,) = struct.unpack(">I", self._data.read(4))
        return length

    def __len__(self) -> int:
        return len(self._offsets)

    def append(self, payload: bytes) -> int:
        offset = self._data.seek(0, os.SEEK_END)
        self._data.write(struct.pack(">I", len(payload)) + payload)
        self._data.flush()
        if self._fsync:
            os.fsync(self._data.fileno())
        self._index.write(struct.pack(">Q", offset))
        self._index.flush()
        if self._fsync:
            os.fsync(self._index.fileno())
        self._offsets.append(offset)
        return len(self._offsets) - 1

    def get(self, index: int) -> bytes:
        offset = self._offsets[index]
        self._data.seek(offset)
        (length,) = struct.unpack(">I", self._data.read(4))
        return self._data.read(length)

    def close(self) -> None:
        self._data.close()
        self._index.close()
