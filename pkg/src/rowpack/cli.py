"""Command line interface.

Four subcommands: ``compress`` a CSV into an archive, ``decompress``
an archive back to CSV, ``inspect`` an archive's accounting, and
``get`` one row by position from an indexed archive.

Exit codes: 0 success, 2 configuration problems, 3 unparseable input
data, 4 I/O failures, 5 corrupt or truncated archives.  Compress and
inspect print a one-line machine-readable summary first:

    ratio=<float> model_bits=<int> data_bits=<int> framing_bits=<int>

where ratio is archive bytes over input bytes, model and data bits
are the fitted models' parameter budget and the total tuple code
length, and framing is everything else in the file (negative when the
serialized models undercut their nominal parameter budget).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from .bayesnet import BayesNetStructure, StructureSearchConfig
from .codec import CorruptStream
from .core import Categorical, Numerical, SchemaError
from .engine import EngineOptions, compress as engine_compress
from .models import ConfigError
from .storage import (
    ColumnSpec,
    IngestError,
    IngestionConfig,
    ingest_csv,
    read_archive,
    write_archive,
)
from .wire import WireError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_IO = 4
EXIT_CORRUPT = 5


def _summary_line(archive_bytes: int, stats) -> str:
    model_bits = int(stats.model_bits)
    data_bits = int(stats.code_bits)
    framing = archive_bytes * 8 - model_bits - data_bits
    if stats.original_bytes > 0:
        ratio = archive_bytes / stats.original_bytes
    else:
        ratio = float("inf")
    return f"ratio={ratio} model_bits={model_bits} data_bits={data_bits} framing_bits={framing}"


def _parse_sidecar(text: str) -> dict[str, ColumnSpec]:
    """Per-column overrides: ``name = kind [tol=..] [lo=..] [hi=..] [max=..]``."""
    overrides: dict[str, ColumnSpec] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'name = kind ...', got {raw!r}")
        name, _, rest = line.partition("=")
        name = name.strip()
        if not name:
            raise ConfigError(f"missing column name in {raw!r}")
        tokens = rest.split()
        if not tokens:
            raise ConfigError(f"missing kind for column {name!r}")
        kind = tokens[0]
        if kind not in ("categorical", "int", "float", "text"):
            raise ConfigError(f"unknown kind {kind!r} for column {name!r}")
        fields: dict = {"kind": kind}
        for token in tokens[1:]:
            if "=" not in token:
                raise ConfigError(f"expected key=value, got {token!r}")
            key, _, value = token.partition("=")
            try:
                if key == "tol":
                    fields["tolerance"] = float(value)
                elif key == "lo":
                    fields["lo"] = float(value)
                elif key == "hi":
                    fields["hi"] = float(value)
                elif key == "max":
                    fields["max_length"] = int(value)
                else:
                    raise ConfigError(f"unknown option {key!r} for column {name!r}")
            except ValueError:
                raise ConfigError(f"bad value {value!r} for {key!r}") from None
        if name in overrides:
            raise ConfigError(f"column {name!r} configured twice")
        overrides[name] = ColumnSpec(**fields)
    return overrides


def _kind_label(kind) -> str:
    if isinstance(kind, Categorical):
        return f"categorical({kind.size})"
    if isinstance(kind, Numerical):
        return "int" if kind.integer else "float"
    return "text"


def _format_value(column, value) -> str:
    kind = column.kind
    if isinstance(kind, Categorical):
        if kind.labels is not None and 0 <= value < len(kind.labels):
            return kind.labels[value]
        return str(value)
    if isinstance(kind, Numerical):
        return str(int(value)) if kind.integer else repr(float(value))
    return value.decode("utf-8", errors="replace")


def cmd_compress(args) -> int:
    with open(args.input, "rb") as f:
        raw = f.read()
    text = raw.decode("utf-8")
    overrides = {}
    if args.schema:
        with open(args.schema, "r", encoding="utf-8") as f:
            overrides = _parse_sidecar(f.read())
    config = IngestionConfig(tolerance_percent=args.tolerance, overrides=overrides)
    dataset = ingest_csv(csv.reader(text.splitlines()), config)
    structure = None
    if args.structure:
        with open(args.structure, "r", encoding="utf-8") as f:
            structure = BayesNetStructure.parse(f.read(), dataset.schema)
    options = EngineOptions(
        structure=structure,
        search=StructureSearchConfig(
            sample_rows=args.sample_rows, max_parents=args.max_parents, seed=args.seed
        ),
        delta=args.delta,
        index=args.index,
    )
    archive = engine_compress(dataset, options, original_bytes=len(raw), validate=False)
    blob = write_archive(archive)
    out_path = args.output or (args.input + ".sqsh")
    with open(out_path, "wb") as f:
        f.write(blob)
    print(_summary_line(len(blob), archive.stats))
    print(f"{archive.stats.rows} rows, {len(dataset.schema)} columns -> {len(blob)} bytes ({out_path})")
    return EXIT_OK


def _open_output(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def cmd_decompress(args) -> int:
    with open(args.archive, "rb") as f:
        stored = read_archive(f.read())
    out, close = _open_output(args.output)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([c.name for c in stored.schema.columns])
    decoded = 0
    failure: CorruptStream | None = None
    try:
        for row in stored.rows():
            writer.writerow(
                _format_value(c, v) for c, v in zip(stored.schema.columns, row)
            )
            decoded += 1
    except CorruptStream as e:
        failure = e
    finally:
        if close:
            out.close()
    if failure is not None:
        print(
            f"archive is corrupt: {failure}; wrote {decoded} of {stored.count} rows",
            file=sys.stderr,
        )
        return EXIT_CORRUPT
    return EXIT_OK


def cmd_inspect(args) -> int:
    with open(args.archive, "rb") as f:
        data = f.read()
    stored = read_archive(data)
    stats = stored.stats
    if args.json:
        payload = {
            "ratio": (len(data) / stats.original_bytes) if stats.original_bytes else None,
            "model_bits": int(stats.model_bits),
            "data_bits": stats.code_bits,
            "framing_bits": len(data) * 8 - int(stats.model_bits) - stats.code_bits,
            "archive_bytes": len(data),
            "original_bytes": stats.original_bytes,
            "rows": stats.rows,
            "clamped_values": stats.clamped,
            "delta": stored.delta,
            "index": stored.index,
            "columns": [
                {
                    "name": c.name,
                    "kind": _kind_label(c.kind),
                    "tolerance": c.tolerance,
                    "model_bits": stats.column_model_bits[i],
                    "data_bits": stats.column_data_bits[i],
                    "parents": [
                        stored.schema.columns[p].name
                        for p in stored.structure.parents[i]
                    ],
                }
                for i, c in enumerate(stored.schema.columns)
            ],
        }
        print(json.dumps(payload, indent=2))
        return EXIT_OK
    print(_summary_line(len(data), stats))
    print(f"rows: {stats.rows}")
    print(f"archive bytes: {len(data)}")
    print(f"original bytes: {stats.original_bytes}")
    print(f"body: {'shared-prefix' if stored.delta else 'raw'}"
          + (", indexed" if stored.index else ""))
    if stats.clamped:
        print(f"clamped values: {stats.clamped}")
    print("columns:")
    for i, column in enumerate(stored.schema.columns):
        tol = f" tol={column.tolerance}" if column.tolerance else ""
        print(
            f"  {column.name}: {_kind_label(column.kind)}{tol} "
            f"model_bits={stats.column_model_bits[i]:.1f} "
            f"data_bits={stats.column_data_bits[i]:.1f}"
        )
    print("structure:")
    for line in stored.structure.render(stored.schema).splitlines():
        print(f"  {line}")
    return EXIT_OK


def cmd_get(args) -> int:
    with open(args.archive, "rb") as f:
        stored = read_archive(f.read())
    try:
        row = stored.row_at(args.row)
    except IndexError:
        raise ConfigError(
            f"row {args.row} out of range (archive holds {stored.count})"
        ) from None
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(
        _format_value(c, v) for c, v in zip(stored.schema.columns, row)
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rowpack",
        description="Model-based compression of relational datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress a CSV file into an archive")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="archive path (default: INPUT.sqsh)")
    p.add_argument(
        "--tolerance",
        type=float,
        default=None,
        metavar="PCT",
        help="numeric error budget, as a percentage of each column's value range",
    )
    p.add_argument("--schema", help="sidecar file with per-column kind overrides")
    p.add_argument("--structure", help="file fixing the dependency structure")
    p.add_argument("--sample-rows", type=int, default=2000)
    p.add_argument("--max-parents", type=int, default=4)
    p.add_argument("--seed", type=int, default=None,
                   help="subsample rows for the structure search with this seed")
    p.add_argument("--delta", action="store_true",
                   help="shared-prefix body (smaller, loses row order)")
    p.add_argument("--index", action="store_true",
                   help="embed a tuple index for random access")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="decode an archive back to CSV")
    p.add_argument("archive")
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("inspect", help="show an archive's accounting")
    p.add_argument("archive")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("get", help="print one row from an indexed archive")
    p.add_argument("archive")
    p.add_argument("row", type=int)
    p.set_defaults(func=cmd_get)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SchemaError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestError, csv.Error, UnicodeDecodeError) as e:
        print(f"error: cannot parse input: {e}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (CorruptStream, WireError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CORRUPT


if __name__ == "__main__":
    sys.exit(main())
