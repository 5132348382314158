"""Binary time-tag files.

Layout (little-endian): a 16-byte header ``b"PTAG"``, u16 version, u16
reserved, u64 record count; then 16 bytes per record: u64 timestamp (ps),
u32 channel, u32 flags (always zero).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError

MAGIC = b"PTAG"
VERSION = 1
HEADER = struct.Struct("<4sHHQ")
RECORD = np.dtype([("timestamp", "<u8"), ("channel", "<u4"), ("flags", "<u4")])


@dataclass(frozen=True)
class TagStream:
    """Time tags of all channels, ordered by timestamp then channel."""

    timestamps: np.ndarray
    channels: np.ndarray

    def __post_init__(self):
        if self.timestamps.shape != self.channels.shape:
            raise ValueError("timestamps and channels differ in length")

    def __len__(self):
        return self.timestamps.size

    def channel(self, ch: int) -> np.ndarray:
        return self.timestamps[self.channels == ch].astype(np.int64)

    @classmethod
    def from_channels(cls, *per_channel) -> "TagStream":
        ts = np.concatenate([np.asarray(t, dtype=np.int64) for t in per_channel]) if per_channel else np.zeros(0, np.int64)
        if np.any(ts < 0):
            raise ValueError("timestamps must be non-negative")
        ch = np.concatenate([np.full(len(t), k, dtype=np.uint32) for k, t in enumerate(per_channel)]) \
            if per_channel else np.zeros(0, np.uint32)
        order = np.lexsort((ch, ts))
        return cls(ts[order], ch[order])

    def __eq__(self, other):
        return (isinstance(other, TagStream) and np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.channels, other.channels))


def encode_tags(tags: TagStream) -> bytes:
    rec = np.zeros(len(tags), dtype=RECORD)
    rec["timestamp"] = tags.timestamps
    rec["channel"] = tags.channels
    return HEADER.pack(MAGIC, VERSION, 0, len(tags)) + rec.tobytes()


def decode_tags(data: bytes) -> TagStream:
    if len(data) < HEADER.size:
        raise FormatError(f"truncated header: {len(data)} of {HEADER.size} bytes", len(data))
    magic, version, _, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    need = HEADER.size + count * RECORD.itemsize
    if len(data) < need:
        complete = (len(data) - HEADER.size) // RECORD.itemsize
        raise FormatError(f"truncated record {complete} of {count}",
                          HEADER.size + complete * RECORD.itemsize)
    if len(data) > need:
        raise FormatError(f"{len(data) - need} trailing bytes after {count} records", need)
    rec = np.frombuffer(data, dtype=RECORD, count=count, offset=HEADER.size)
    bad = np.flatnonzero(rec["flags"] != 0)
    if bad.size:
        raise FormatError("nonzero flags field", HEADER.size + int(bad[0]) * RECORD.itemsize + 12)
    return TagStream(rec["timestamp"].astype(np.int64), rec["channel"].astype(np.uint32))


def write_tags(path, tags: TagStream) -> None:
    Path(path).write_bytes(encode_tags(tags))


def read_tags(path) -> TagStream:
    return decode_tags(Path(path).read_bytes())


def export_csv(path, tags: TagStream) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("timestamp_ps,channel\n")
        for t, ch in zip(tags.timestamps.tolist(), tags.channels.tolist()):
            fh.write(f"{t},{ch}\n")
