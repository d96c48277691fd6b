"""Archive byte format and CSV ingestion.

An archive is a fixed header followed by five varint length-prefixed
sections, always in this order:

  header    magic ``SQSH``, u16 version (little endian), u8 flags
            (bit 0: shared-prefix body, bit 1: tuple index),
            u8 coder precision, f64 minimum snapped width
  schema    column names, kinds, tolerances, category labels
  structure parent sets and the topological column order
  models    one serialized model per column, in schema order
  stats     row count, clamp count, per-column bit accounting,
            total code bits, original input size
  body      the tuple codes: either raw concatenation (optionally
            with a bit-offset index) or the shared-prefix layout

Codes are self-delimiting under their models, so the raw body needs no
per-tuple framing; the index exists only to start decoding mid-body.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from io import BytesIO
from typing import Iterable, Iterator, Sequence

from . import wire
from .bayesnet import BayesNetStructure
from .codec import BitReader, Bits, BitWriter, CodecConfig, CorruptStream
from .core import Categorical, Column, Dataset, Numerical, Schema, SchemaError, Text
from .delta import delta_decode, delta_encode
from .engine import Archive, ArchiveStats, decode_one, decode_stream
from .models import ColumnModel, read_model, write_model

MAGIC = b"SQSH"
VERSION = 1
FLAG_DELTA = 1
FLAG_INDEX = 2

_KIND_CATEGORICAL = 0
_KIND_NUMERICAL = 1
_KIND_TEXT = 2


class StorageError(CorruptStream):
    """The bytes are not a readable archive."""


def _write_section(out: BytesIO, payload: bytes) -> None:
    wire.write_uvarint(out, len(payload))
    out.write(payload)


def _read_section(src: BytesIO) -> BytesIO:
    return BytesIO(wire.read_blob(src))


def _schema_bytes(schema: Schema) -> bytes:
    out = BytesIO()
    wire.write_uvarint(out, len(schema))
    for column in schema.columns:
        wire.write_text(out, column.name)
        wire.write_f64(out, column.tolerance)
        kind = column.kind
        if isinstance(kind, Categorical):
            out.write(bytes([_KIND_CATEGORICAL]))
            wire.write_uvarint(out, kind.size)
            if kind.labels is None:
                out.write(b"\x00")
            else:
                out.write(b"\x01")
                for label in kind.labels:
                    wire.write_text(out, label)
        elif isinstance(kind, Numerical):
            out.write(bytes([_KIND_NUMERICAL, 1 if kind.integer else 0]))
            for bound in (kind.lo, kind.hi):
                if bound is None:
                    out.write(b"\x00")
                else:
                    out.write(b"\x01")
                    wire.write_f64(out, float(bound))
        else:
            out.write(bytes([_KIND_TEXT]))
            if kind.max_length is None:
                out.write(b"\x00")
            else:
                out.write(b"\x01")
                wire.write_uvarint(out, kind.max_length)
    return out.getvalue()


def _read_byte(src: BytesIO) -> int:
    raw = src.read(1)
    if not raw:
        raise wire.WireError("truncated section")
    return raw[0]


def _read_schema(src: BytesIO) -> Schema:
    count = wire.read_uvarint(src)
    columns = []
    for _ in range(count):
        name = wire.read_text(src)
        tolerance = wire.read_f64(src)
        tag = _read_byte(src)
        if tag == _KIND_CATEGORICAL:
            size = wire.read_uvarint(src)
            labels = None
            if _read_byte(src):
                labels = tuple(wire.read_text(src) for _ in range(size))
            kind = Categorical(size, labels)
        elif tag == _KIND_NUMERICAL:
            integer = bool(_read_byte(src))
            lo = wire.read_f64(src) if _read_byte(src) else None
            hi = wire.read_f64(src) if _read_byte(src) else None
            kind = Numerical(integer, lo, hi)
        elif tag == _KIND_TEXT:
            max_length = wire.read_uvarint(src) if _read_byte(src) else None
            kind = Text(max_length)
        else:
            raise wire.WireError(f"unknown column kind tag {tag}")
        columns.append(Column(name, kind, tolerance))
    return Schema(tuple(columns))


def _structure_bytes(structure: BayesNetStructure) -> bytes:
    out = BytesIO()
    wire.write_uvarint(out, len(structure.parents))
    for c in structure.order:
        wire.write_uvarint(out, c)
    for ps in structure.parents:
        wire.write_uvarint(out, len(ps))
        for p in ps:
            wire.write_uvarint(out, p)
    return out.getvalue()


def _read_structure(src: BytesIO) -> BayesNetStructure:
    m = wire.read_uvarint(src)
    order = tuple(wire.read_uvarint(src) for _ in range(m))
    parents = []
    for _ in range(m):
        k = wire.read_uvarint(src)
        parents.append(tuple(wire.read_uvarint(src) for _ in range(k)))
    return BayesNetStructure(tuple(parents), order)


def _stats_bytes(stats: ArchiveStats) -> bytes:
    out = BytesIO()
    wire.write_uvarint(out, stats.rows)
    wire.write_uvarint(out, stats.clamped)
    wire.write_uvarint(out, stats.code_bits)
    wire.write_uvarint(out, stats.original_bytes)
    wire.write_uvarint(out, len(stats.column_model_bits))
    for mb, db in zip(stats.column_model_bits, stats.column_data_bits):
        wire.write_f64(out, mb)
        wire.write_f64(out, db)
    return out.getvalue()


def _read_stats(src: BytesIO) -> ArchiveStats:
    rows = wire.read_uvarint(src)
    clamped = wire.read_uvarint(src)
    code_bits = wire.read_uvarint(src)
    original_bytes = wire.read_uvarint(src)
    m = wire.read_uvarint(src)
    model_bits = []
    data_bits = []
    for _ in range(m):
        model_bits.append(wire.read_f64(src))
        data_bits.append(wire.read_f64(src))
    return ArchiveStats(
        rows, clamped, tuple(model_bits), tuple(data_bits), code_bits, original_bytes
    )


def write_archive(archive: Archive) -> bytes:
    """Serialize a compressed archive to its byte form."""
    out = BytesIO()
    out.write(MAGIC)
    out.write(VERSION.to_bytes(2, "little"))
    flags = (FLAG_DELTA if archive.delta else 0) | (FLAG_INDEX if archive.index else 0)
    cfg = archive.codec
    out.write(bytes([flags, cfg.precision]))
    wire.write_f64(out, cfg.eps_min)
    _write_section(out, _schema_bytes(archive.schema))
    _write_section(out, _structure_bytes(archive.structure))
    models_out = BytesIO()
    for model in archive.models:
        write_model(models_out, model)
    _write_section(out, models_out.getvalue())
    _write_section(out, _stats_bytes(archive.stats))

    body = BytesIO()
    if archive.delta:
        payload, lengths = delta_encode(archive.codes)
        wire.write_uvarint(body, len(archive.codes))
        for length in lengths:
            wire.write_uvarint(body, length)
        wire.write_uvarint(body, payload.length)
        writer = BitWriter()
        writer.write(payload)
        wire.write_blob(body, writer.getvalue())
    else:
        wire.write_uvarint(body, len(archive.codes))
        if archive.index:
            prev = 0
            offset = 0
            for code in archive.codes:
                wire.write_uvarint(body, offset - prev)
                prev = offset
                offset += code.length
        writer = BitWriter()
        for code in archive.codes:
            writer.write(code)
        wire.write_uvarint(body, writer.bit_length)
        wire.write_blob(body, writer.getvalue())
    _write_section(out, body.getvalue())
    return out.getvalue()


@dataclass
class StoredArchive:
    """A parsed archive: metadata in memory, codes still packed."""

    schema: Schema
    structure: BayesNetStructure
    models: tuple[ColumnModel | None, ...]
    stats: ArchiveStats
    codec: CodecConfig
    delta: bool
    index: bool
    count: int
    body: bytes
    body_bits: int
    offsets: tuple[int, ...] | None
    lengths: tuple[int, ...] | None

    def rows(self) -> Iterator[tuple]:
        """Decode every tuple; shared-prefix archives come out sorted."""
        if self.count == 0:
            return
        if self.delta:
            payload = Bits(
                int.from_bytes(self.body, "big") >> (8 * len(self.body) - self.body_bits)
                if self.body
                else 0,
                self.body_bits,
            )
            codes = delta_decode(payload, list(self.lengths))
            coder_reader = _codes_reader(codes)
            yield from decode_stream(
                self.schema, self.structure, self.models, coder_reader,
                self.count, self.codec,
            )
        else:
            reader = BitReader(self.body)
            yield from decode_stream(
                self.schema, self.structure, self.models, reader, self.count, self.codec
            )

    def row_at(self, i: int) -> tuple:
        """Random access; needs the index flag."""
        if not self.index or self.offsets is None:
            raise SchemaError("archive was written without a tuple index")
        if not 0 <= i < self.count:
            raise IndexError(i)
        return decode_one(
            self.schema, self.structure, self.models,
            self.body, self.offsets[i], self.codec,
        )


def _codes_reader(codes: list[Bits]) -> BitReader:
    writer = BitWriter()
    for code in codes:
        writer.write(code)
    return BitReader(writer.getvalue())


def read_archive(data: bytes) -> StoredArchive:
    if data[: len(MAGIC)] != MAGIC:
        raise StorageError("not an archive: bad magic")
    src = BytesIO(data[len(MAGIC):])
    try:
        version = int.from_bytes(src.read(2), "little")
        if version != VERSION:
            raise StorageError(f"unsupported archive version {version}")
        flags = _read_byte(src)
        precision = _read_byte(src)
        eps_min = wire.read_f64(src)
        codec = CodecConfig(precision, eps_min)
        schema = _read_schema(_read_section(src))
        structure = _read_structure(_read_section(src))
        models_src = _read_section(src)
        models = tuple(read_model(models_src) for _ in range(len(schema)))
        stats = _read_stats(_read_section(src))
        body_src = _read_section(src)
        delta = bool(flags & FLAG_DELTA)
        index = bool(flags & FLAG_INDEX)
        count = wire.read_uvarint(body_src)
        offsets = None
        lengths = None
        if delta:
            lengths = tuple(wire.read_uvarint(body_src) for _ in range(count))
        elif index:
            acc = []
            prev = 0
            for _ in range(count):
                prev += wire.read_uvarint(body_src)
                acc.append(prev)
            offsets = tuple(acc)
        body_bits = wire.read_uvarint(body_src)
        body = wire.read_blob(body_src)
        if len(body) * 8 < body_bits:
            raise wire.WireError("body shorter than its declared bit count")
        if len(structure.parents) != len(schema):
            raise wire.WireError("structure does not match the schema")
    except wire.WireError as e:
        raise StorageError(f"malformed archive: {e}") from None
    return StoredArchive(
        schema, structure, models, stats, codec,
        delta, index, count, body, body_bits, offsets, lengths,
    )


class IngestError(Exception):
    """The input rows cannot be parsed into a dataset."""


@dataclass(frozen=True)
class ColumnSpec:
    """User-declared shape of one ingested column; unset fields are inferred."""

    kind: str | None = None  # "categorical" | "int" | "float" | "text"
    tolerance: float | None = None  # absolute
    lo: float | None = None
    hi: float | None = None
    max_length: int | None = None


@dataclass(frozen=True)
class IngestionConfig:
    """How raw string cells become a typed dataset.

    ``tolerance_percent`` applies to every numeric column without an
    explicit override, as a percentage of that column's observed value
    range.
    """

    tolerance_percent: float | None = None
    overrides: dict[str, ColumnSpec] = field(default_factory=dict)


def _is_int(cell: str) -> bool:
    try:
        int(cell)
        return True
    except ValueError:
        return False


def _is_float(cell: str) -> bool:
    try:
        return math.isfinite(float(cell))
    except ValueError:
        return False


def _infer_kind(cells: Sequence[str]) -> str:
    if all(_is_int(c) for c in cells):
        return "int"
    if all(_is_float(c) for c in cells):
        return "float"
    if len(set(cells)) <= 256:
        return "categorical"
    return "text"


def ingest_csv(
    records: Iterable[Sequence[str]], config: IngestionConfig | None = None
) -> Dataset:
    """Typed dataset from already-split CSV records (header row first).

    Column kinds are inferred per column, trying integers, then reals,
    then a category dictionary of at most 256 distinct values, then
    raw text; per-column overrides take precedence.
    """
    config = config or IngestionConfig()
    it = iter(records)
    try:
        header = [str(h) for h in next(it)]
    except StopIteration:
        raise IngestError("input has no header row") from None
    if len(set(header)) != len(header) or not header:
        raise IngestError("header must hold unique, non-empty column names")
    raw_rows = []
    for r, record in enumerate(it):
        cells = [str(c) for c in record]
        if len(cells) != len(header):
            raise IngestError(
                f"row {r + 1} has {len(cells)} cells, expected {len(header)}"
            )
        raw_rows.append(cells)
    for name in config.overrides:
        if name not in header:
            raise IngestError(f"override for unknown column {name!r}")

    columns = []
    converted: list[list] = []
    for j, name in enumerate(header):
        cells = [row[j] for row in raw_rows]
        spec = config.overrides.get(name, ColumnSpec())
        kind_name = spec.kind or (_infer_kind(cells) if cells else "text")
        if kind_name == "int":
            try:
                values = [int(c) for c in cells]
            except ValueError as e:
                raise IngestError(f"column {name!r}: {e}") from None
            kind = Numerical(True, spec.lo, spec.hi)
        elif kind_name == "float":
            try:
                values = [float(c) for c in cells]
            except ValueError as e:
                raise IngestError(f"column {name!r}: {e}") from None
            if not all(math.isfinite(v) for v in values):
                raise IngestError(f"column {name!r} holds non-finite values")
            kind = Numerical(False, spec.lo, spec.hi)
        elif kind_name == "categorical":
            labels = tuple(sorted(set(cells)))
            if len(labels) > 256:
                raise IngestError(
                    f"column {name!r} has {len(labels)} distinct values; "
                    "too many for a category dictionary"
                )
            lookup = {label: i for i, label in enumerate(labels)}
            values = [lookup[c] for c in cells]
            kind = Categorical(max(len(labels), 1), labels or ("",))
            if not labels:
                values = []
        elif kind_name == "text":
            values = [c.encode("utf-8") for c in cells]
            max_length = spec.max_length
            if max_length is None:
                max_length = max((len(v) for v in values), default=0)
            kind = Text(max_length)
        else:
            raise IngestError(f"column {name!r}: unknown kind {kind_name!r}")

        tolerance = 0.0
        if isinstance(kind, Numerical):
            if spec.tolerance is not None:
                tolerance = float(spec.tolerance)
            elif config.tolerance_percent is not None and values:
                span = float(max(values)) - float(min(values))
                tolerance = config.tolerance_percent / 100.0 * span
                if tolerance == 0.0 and not kind.integer:
                    # A constant real column still needs a positive width.
                    tolerance = 1e-9
        try:
            columns.append(Column(name, kind, tolerance))
        except SchemaError as e:
            raise IngestError(str(e)) from None
        converted.append(values)

    rows = [tuple(col[i] for col in converted) for i in range(len(raw_rows))]
    dataset = Dataset(Schema(tuple(columns)), rows)
    violation = dataset.validate()
    if violation is not None:
        raise IngestError(f"column {violation.column!r}: {violation.reason}")
    return dataset
