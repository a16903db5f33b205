"""Binary index file format.

Layout, all little-endian, CRC32 (zlib) of everything before the trailer:

    magic          4 bytes  b"NSIX"
    version        u32
    doc_count      u64
    feature_count  u64
    document table, doc_count records:
        file_name      u32 byte length + UTF-8 bytes
        norms          3 x f64 (l1, l2, l2_squared)
        n_features     u32
        features       n_features x (u32 id length + UTF-8 id, f64 s)
    posting directory, feature_count records:
        feature id     u32 byte length + UTF-8 bytes
        posting count  u64
        postings       count x (u64 doc_id, f64 s, f64 c, f64 ss)
    checksum       u32 CRC32 of all preceding bytes

Floats round-trip bit-exactly through struct, so load(save(idx)) preserves
every stored score. Loading verifies magic, version, and checksum before
parsing; any truncation or corruption raises FormatError.

Document labels are in-memory metadata only and are not persisted.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

from .errors import FormatError
from .index import DocumentRecord, InvertedIndex, Posting
from .vectors import SparseVector, VectorNorms

MAGIC = b"NSIX"
FORMAT_VERSION = 1

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_F64 = struct.Struct("<d")
_NORMS = struct.Struct("<3d")
_POSTING = struct.Struct("<Qddd")


class _ChecksumWriter:
    """File writer that maintains a running CRC32 of everything written."""

    def __init__(self, fp):
        self._fp = fp
        self.crc = 0

    def write(self, data: bytes) -> None:
        self.crc = zlib.crc32(data, self.crc)
        self._fp.write(data)

    def write_str(self, text: str) -> None:
        raw = text.encode("utf-8")
        self.write(_U32.pack(len(raw)))
        self.write(raw)


def save_index(idx: InvertedIndex, path: str | Path) -> None:
    """Write the index to ``path``, replacing any existing file."""
    features = sorted(idx.postings)
    with open(path, "wb") as fp:
        out = _ChecksumWriter(fp)
        out.write(MAGIC)
        out.write(_U32.pack(FORMAT_VERSION))
        out.write(_U64.pack(idx.doc_count))
        out.write(_U64.pack(len(features)))
        for doc in idx.documents:
            out.write_str(doc.file_name)
            out.write(_NORMS.pack(doc.norms.l1, doc.norms.l2, doc.norms.l2_squared))
            out.write(_U32.pack(len(doc.features)))
            for fid, s in doc.features:
                out.write_str(fid)
                out.write(_F64.pack(s))
        for fid in features:
            plist = idx.postings[fid]
            out.write_str(fid)
            out.write(_U64.pack(len(plist)))
            for p in plist:
                out.write(_POSTING.pack(p.doc_id, p.s, p.c, p.ss))
        fp.write(_U32.pack(out.crc))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: struct.Struct):
        end = self.pos + fmt.size
        if end > len(self.data):
            raise FormatError("truncated index file")
        values = fmt.unpack_from(self.data, self.pos)
        self.pos = end
        return values

    def take_str(self) -> str:
        (length,) = self.take(_U32)
        end = self.pos + length
        if end > len(self.data):
            raise FormatError("truncated index file")
        raw = self.data[self.pos : end]
        self.pos = end
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("invalid UTF-8 in index file") from exc


def load_index(path: str | Path) -> InvertedIndex:
    """Read an index file, verifying checksum and structure."""
    with open(path, "rb") as fp:
        blob = fp.read()
    if len(blob) < len(MAGIC) + _U32.size:
        raise FormatError("file too short to be an index")
    body, trailer = blob[:-_U32.size], blob[-_U32.size:]
    (stored_crc,) = _U32.unpack(trailer)
    if zlib.crc32(body) != stored_crc:
        raise FormatError("checksum mismatch, index file is corrupted")

    rd = _Reader(body)
    if body[:4] != MAGIC:
        raise FormatError(f"bad magic, not an index file: {body[:4]!r}")
    rd.pos = 4
    (version,) = rd.take(_U32)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}, expected {FORMAT_VERSION}")
    (doc_count,) = rd.take(_U64)
    (feature_count,) = rd.take(_U64)

    idx = InvertedIndex()
    for doc_id in range(doc_count):
        file_name = rd.take_str()
        l1, l2, l2sq = rd.take(_NORMS)
        (n_features,) = rd.take(_U32)
        pairs = []
        for _ in range(n_features):
            fid = rd.take_str()
            (s,) = rd.take(_F64)
            pairs.append((fid, s))
        try:
            features = SparseVector(tuple(pairs))
        except ValueError as exc:
            raise FormatError(f"invalid feature list for {file_name!r}: {exc}") from exc
        record = DocumentRecord(
            doc_id=doc_id,
            file_name=file_name,
            features=features,
            norms=VectorNorms(l1=l1, l2=l2, l2_squared=l2sq),
        )
        idx.documents.append(record)
        if file_name in idx._file_names:
            raise FormatError(f"duplicate file name in index file: {file_name!r}")
        idx._file_names[file_name] = doc_id

    for _ in range(feature_count):
        fid = rd.take_str()
        (count,) = rd.take(_U64)
        plist = []
        prev_doc = -1
        for _ in range(count):
            doc_id, s, c, ss = rd.take(_POSTING)
            if doc_id >= doc_count:
                raise FormatError(f"posting references unknown doc_id {doc_id}")
            if doc_id <= prev_doc:
                raise FormatError(f"posting list for {fid!r} not sorted by doc_id")
            prev_doc = doc_id
            plist.append(Posting(doc_id=doc_id, s=s, c=c, ss=ss))
        idx.postings[fid] = plist

    if rd.pos != len(body):
        raise FormatError("trailing bytes after posting directory")
    return idx
