"""Compression engine: model fitting plus row coding.

Compression runs in two phases over buffered rows.  First the column
dependency structure is chosen (learned, or supplied by the caller)
and a model is fitted per column in topological order, so that every
model's parent contexts are computed from the *reconstructed* parent
values, the exact values the decoder will have.  Second, each row is
encoded into one self-delimiting code by walking the columns in the
same topological order and folding every tree decision into the
interval coder.

The decoder mirrors phase two: it replays the identical tree walks,
asking the interval decoder for each branch, and rebuilds rows whose
values are the leaf representatives.  Symmetry of the two walks, same
models, same contexts, same snapped distributions, is the whole
correctness story.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .bayesnet import BayesNetStructure, SearchReport, StructureSearchConfig, learn_structure
from .codec import (
    DEFAULT_CONFIG,
    BitReader,
    Bits,
    BitWriter,
    CodecConfig,
    CorruptStream,
    Decoder,
    Encoder,
    snap_distribution,
)
from .core import Categorical, Dataset, Numerical, Schema, SchemaError, validate_row
from .models import (
    CategoricalModel,
    ColumnModel,
    ConfigError,
    ModelError,
    NumericModel,
    StringModel,
    fit_categorical,
    fit_numeric,
    fit_string,
    parent_interpreter,
    root_range,
)
from .probtree import route


@dataclass(frozen=True)
class EngineOptions:
    """Everything configurable about a compression run."""

    structure: BayesNetStructure | None = None
    search: StructureSearchConfig = field(default_factory=StructureSearchConfig)
    codec: CodecConfig = DEFAULT_CONFIG
    delta: bool = False
    index: bool = False

    def __post_init__(self) -> None:
        if self.delta and self.index:
            raise ConfigError(
                "shared-prefix coding reorders tuples, so it cannot carry an index"
            )


@dataclass(frozen=True)
class ArchiveStats:
    """Accounting captured at compression time."""

    rows: int
    clamped: int
    column_model_bits: tuple[float, ...]
    column_data_bits: tuple[float, ...]
    code_bits: int
    original_bytes: int

    @property
    def model_bits(self) -> float:
        return sum(self.column_model_bits)

    @property
    def data_bits(self) -> float:
        return sum(self.column_data_bits)


@dataclass
class Archive:
    """An archive held in memory; the storage layer maps it to bytes."""

    schema: Schema
    structure: BayesNetStructure
    models: tuple[ColumnModel | None, ...]
    stats: ArchiveStats
    delta: bool
    index: bool
    codes: list[Bits]
    codec: CodecConfig = DEFAULT_CONFIG
    report: SearchReport | None = None


class _SnapCache:
    """Memoized snapped tilings keyed by the probability tuple."""

    def __init__(self, cfg: CodecConfig, cap: int = 1 << 17):
        self._cfg = cfg
        self._cap = cap
        self._map: dict[tuple[float, ...], tuple[list[int], int]] = {}

    def get(self, probs: tuple[float, ...]) -> tuple[list[int], int]:
        hit = self._map.get(probs)
        if hit is None:
            cum = snap_distribution(probs, self._cfg)
            maxw = max(b - a for a, b in zip(cum, cum[1:]))
            if len(self._map) >= self._cap:
                self._map.clear()
            self._map[probs] = hit = (cum, maxw)
        return hit


class _Coder:
    """Shared encode/decode machinery for one fitted archive."""

    def __init__(
        self,
        schema: Schema,
        structure: BayesNetStructure,
        models: Sequence[ColumnModel | None],
        cfg: CodecConfig,
    ):
        self.schema = schema
        self.order = structure.order
        self.parents = structure.parents
        self.models = list(models)
        self.cfg = cfg
        self.snap = _SnapCache(cfg)
        self.interp: list = [None] * len(schema)
        for ps in structure.parents:
            for p in ps:
                if self.interp[p] is None:
                    self.interp[p] = parent_interpreter(schema.columns[p], self.models[p])

    def _context(self, c: int, recovered: list) -> tuple:
        ps = self.parents[c]
        if not ps:
            return ()
        interp = self.interp
        return tuple(interp[p].apply(recovered[p]) for p in ps)

    def encode_row(self, row: Sequence) -> tuple[Bits, list]:
        enc = Encoder(self.cfg)
        recovered: list = [None] * len(self.schema)
        snap = self.snap
        for c in self.order:
            model = self.models[c]
            value = row[c]
            ctx = self._context(c, recovered)
            if isinstance(model, CategoricalModel):
                if model.size > 1:
                    cum, _ = snap.get(model.row(ctx))
                    enc.push_units(cum[value], cum[value + 1])
                recovered[c] = value
            elif isinstance(model, NumericModel):
                tree = model.tree(ctx)
                v = tree.clamp(value)
                cur = tree.cursor()
                while not cur.is_end():
                    dist = cur.generate_branch()
                    cum, _ = snap.get(dist.probabilities)
                    b = cur.get_branch(v)
                    enc.push_units(cum[b], cum[b + 1])
                    cur.choose_branch(b)
                recovered[c] = cur.get_result().representative
            else:
                cur = model.tree(ctx).cursor()
                while not cur.is_end():
                    dist = cur.generate_branch()
                    cum, _ = snap.get(dist.probabilities)
                    b = cur.get_branch(value)
                    enc.push_units(cum[b], cum[b + 1])
                    cur.choose_branch(b)
                recovered[c] = value
        return enc.finish(), recovered

    def decode_row(self, reader) -> tuple:
        dec = Decoder(reader, self.cfg)
        recovered: list = [None] * len(self.schema)
        snap = self.snap
        for c in self.order:
            model = self.models[c]
            ctx = self._context(c, recovered)
            if isinstance(model, CategoricalModel):
                if model.size > 1:
                    cum, maxw = snap.get(model.row(ctx))
                    recovered[c] = dec.next_branch(cum, maxw)
                else:
                    recovered[c] = 0
            else:
                cur = model.tree(ctx).cursor()
                while not cur.is_end():
                    dist = cur.generate_branch()
                    cum, maxw = snap.get(dist.probabilities)
                    cur.choose_branch(dec.next_branch(cum, maxw))
                recovered[c] = cur.get_result().representative
        dec.finish()
        return tuple(recovered)


class Compressor:
    """Streaming front of the engine: feed rows, then close.

    ``read_tuple`` validates and buffers one row; ``end_of_data`` runs
    structure search, fits the models, encodes everything, and returns
    the archive.  Each instance handles one dataset.
    """

    def __init__(
        self,
        schema: Schema,
        options: EngineOptions | None = None,
        original_bytes: int = 0,
        validate: bool = True,
    ):
        self.schema = schema
        self.options = options or EngineOptions()
        self.original_bytes = original_bytes
        self._validate = validate
        self._rows: list[tuple] = []
        self._done = False
        for column in schema.columns:
            kind = column.kind
            if isinstance(kind, Numerical) and not kind.integer and column.tolerance == 0.0:
                raise ConfigError(
                    f"column {column.name!r} holds reals and needs a positive tolerance"
                )

    def read_tuple(self, row: Sequence) -> None:
        if self._done:
            raise ModelError("read_tuple called after end_of_data")
        if self._validate:
            violation = validate_row(self.schema, row)
            if violation is not None:
                raise SchemaError(
                    f"column {violation.column!r}: {violation.reason}"
                )
        self._rows.append(tuple(row))

    def end_of_data(self) -> Archive:
        if self._done:
            raise ModelError("end_of_data called twice")
        self._done = True
        schema, options = self.schema, self.options
        m = len(schema)
        n = len(self._rows)
        if n == 0:
            structure = options.structure or BayesNetStructure(
                tuple(() for _ in range(m)), tuple(range(m))
            )
            stats = ArchiveStats(0, 0, (0.0,) * m, (0.0,) * m, 0, self.original_bytes)
            return Archive(
                schema, structure, (None,) * m, stats,
                options.delta, options.index, [], options.codec,
            )
        report = None
        if options.structure is not None:
            structure = options.structure
        else:
            structure, report = learn_structure(
                Dataset(schema, self._rows), options.search
            )
        models, costs, clamped = _fit_models(schema, structure, self._rows)
        coder = _Coder(schema, structure, models, options.codec)
        codes = []
        code_bits = 0
        for row in self._rows:
            code, _ = coder.encode_row(row)
            codes.append(code)
            code_bits += code.length
        stats = ArchiveStats(
            rows=n,
            clamped=clamped,
            column_model_bits=tuple(c.model_bits for c in costs),
            column_data_bits=tuple(c.data_bits for c in costs),
            code_bits=code_bits,
            original_bytes=self.original_bytes,
        )
        return Archive(
            schema,
            structure,
            tuple(models),
            stats,
            options.delta,
            options.index,
            codes,
            options.codec,
            report,
        )


def _fit_models(schema: Schema, structure: BayesNetStructure, rows: list[tuple]):
    """Fit one model per column in topological order.

    Children see parent contexts built from the parents' reconstructed
    values, the same values the decoder will use.  Returns the models,
    their costs, and how many values had to be clamped into their root
    range.
    """
    m = len(schema)
    n = len(rows)
    models: list[ColumnModel | None] = [None] * m
    costs = [None] * m
    recovered: list[list | None] = [None] * m
    interp: list = [None] * m
    clamped = 0
    for c in structure.order:
        column = schema.columns[c]
        kind = column.kind
        ps = structure.parents[c]
        for p in ps:
            if interp[p] is None:
                interp[p] = parent_interpreter(schema.columns[p], models[p])
        if ps:
            ips = [interp[p] for p in ps]
            cols = [recovered[p] for p in ps]
            contexts: Sequence[tuple] = [
                tuple(ip.apply(col[i]) for ip, col in zip(ips, cols))
                for i in range(n)
            ]
        else:
            contexts = [()] * n
        values = [row[c] for row in rows]
        if isinstance(kind, Categorical):
            model, cost = fit_categorical(kind.size, len(ps), contexts, values)
            recovered[c] = values
        elif isinstance(kind, Numerical):
            lo, hi = root_range(kind.integer, column.tolerance, values, kind.lo, kind.hi)
            model, cost = fit_numeric(
                kind.integer, column.tolerance, lo, hi, len(ps), contexts, values
            )
            tree = model.tree(())
            reps = []
            for v in values:
                v2 = tree.clamp(v)
                if v2 != v:
                    clamped += 1
                reps.append(route(tree, v2).representative)
            recovered[c] = reps
        else:
            if ps:
                raise ConfigError(
                    f"text column {column.name!r} cannot depend on other columns"
                )
            model, cost = fit_string(values)
            recovered[c] = values
        models[c] = model
        costs[c] = cost
    return models, costs, clamped


def compress(
    dataset: Dataset,
    options: EngineOptions | None = None,
    original_bytes: int = 0,
    validate: bool = True,
) -> Archive:
    """One-call compression of an in-memory dataset."""
    comp = Compressor(dataset.schema, options, original_bytes, validate)
    for row in dataset.rows:
        comp.read_tuple(row)
    return comp.end_of_data()


def decode_stream(
    schema: Schema,
    structure: BayesNetStructure,
    models: Sequence[ColumnModel | None],
    reader,
    count: int,
    cfg: CodecConfig = DEFAULT_CONFIG,
) -> Iterator[tuple]:
    """Decode ``count`` consecutive codes from a bit source into rows.

    On corruption the raised error carries how many rows came out
    intact before the bad code.
    """
    coder = _Coder(schema, structure, models, cfg)
    for i in range(count):
        try:
            yield coder.decode_row(reader)
        except CorruptStream as e:
            raise CorruptStream(str(e), decoded_rows=i) from None


def iter_rows(archive: Archive) -> Iterator[tuple]:
    """Decode an in-memory archive row by row."""
    if archive.stats.rows == 0:
        return
    writer = BitWriter()
    for code in archive.codes:
        writer.write(code)
    reader = BitReader(writer.getvalue())
    yield from decode_stream(
        archive.schema,
        archive.structure,
        archive.models,
        reader,
        len(archive.codes),
        archive.codec,
    )


def decompress(archive: Archive) -> Dataset:
    return Dataset(archive.schema, list(iter_rows(archive)))


def decode_one(
    schema: Schema,
    structure: BayesNetStructure,
    models: Sequence[ColumnModel | None],
    data: bytes,
    bit_offset: int,
    cfg: CodecConfig = DEFAULT_CONFIG,
) -> tuple:
    """Decode the single code starting at ``bit_offset`` of ``data``."""
    reader = BitReader(data, bit_offset)
    coder = _Coder(schema, structure, models, cfg)
    return coder.decode_row(reader)
